// Double-Amici prism design: six losses on a collimated chief-ray template,
// their weighted sum and an Adam optimizer over the design variables.
//
// Template: an ideal f = 50 mm collimator images the object field at
// infinity, the prism assembly sits in the collimated space and an ideal
// imaging lens of the same focal length (perpendicular to the 520 nm center
// output) forms the detector image, P = f (d.e1 / d.e3, d.e2 / d.e3).
#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cassi/distortion.hpp"
#include "cassi/dual.hpp"
#include "cassi/glass.hpp"
#include "cassi/system.hpp"

namespace cassi {

struct PrismDesignParams {
  double alpha_c_deg = 5.1;
  double a1_deg = 29.2;
  double a2_deg = 47.9;
  double n1 = 0.0, v1 = 0.0;  // outer prisms (n_d, V_d)
  double n2 = 0.0, v2 = 0.0;  // center prism
  std::string glass1, glass2;  // catalog names once snapped, empty while relaxed
};

// Params with the glasses' catalog (n_d, V_d) and names.
PrismDesignParams design_params(const AmiciParams& amici);
// Named glasses come from the catalog, the others are relaxed (n_d, V_d) models.
AmiciParams to_amici(const PrismDesignParams& p, const GlassCatalog& catalog = GlassCatalog::schott());
// Throws DomainError outside A in (0, 80) deg, alpha_c in (-45, 45) deg,
// n_d in [1.4, 2.1], V_d in [15, 100].
void validate(const PrismDesignParams& p);

struct LossWeights {
  double dispersion = 1.0;
  double distortion = 1.0;
  double deviation = 2.5e6;
  double thickness = 5e3;
  double glass = 1e10;  // multiplied by the iteration number
  double tir = 10.0;

  double glass_at(int iteration) const { return glass * iteration; }
};

// Weights with the dispersion and deviation terms measured on the detector:
// an angle error a moves the image by f a, so w = (f in um)^2 puts them in
// um^2 next to the distortion term. Other weights keep their defaults.
LossWeights image_plane_weights(double focal_mm = 50.0);

struct DesignTemplate {
  double focal_mm = 50.0;
  int grid = 7;
  double half_field_mm = 2.5;
  std::vector<double> wavelengths{450.0, 520.0, 650.0};  // first and last set the dispersion
  double target_dispersion_deg = 0.95;
  double smooth_max_tau_um = 1e-2;
  std::array<double, 3> thickness_mm{5.0, 7.0, 5.0};
};

inline constexpr double kDeadRayPenalty = 1e6;

template <class T>
struct SubLosses {
  T dispersion{}, distortion{}, deviation{}, thickness{}, glass{}, tir{};
  bool dead = false;  // some template chief ray died; dependent losses carry the penalty

  T total(const LossWeights& w, int iteration) const {
    return dispersion * w.dispersion + distortion * w.distortion + deviation * w.deviation +
           thickness * w.thickness + glass * w.glass_at(iteration) + tir * w.tir;
  }
};

// Differentiable variables: [alpha_c, A1, A2] in radians, then the glasses
// as catalog-normalized (n_d - n_min) / dn, (V_d - V_min) / dV for glass 1 and
// glass 2. Named (snapped) glasses stay fixed and use only the angles.
std::vector<double> design_variables(const PrismDesignParams& p, const GlassCatalog& catalog = GlassCatalog::schott());
PrismDesignParams from_variables(std::span<const double> x, const PrismDesignParams& base,
                                 const GlassCatalog& catalog = GlassCatalog::schott());

// All six sub-losses at once. `x` follows design_variables(base); with
// smooth_max the distortion term uses a log-sum-exp maximum.
template <class T>
SubLosses<T> evaluate_losses(std::span<const T> x, const PrismDesignParams& base, const DesignTemplate& tmpl,
                             const GlassCatalog& catalog, bool smooth_max);

SubLosses<double> sub_losses(const PrismDesignParams& p, const DesignTemplate& tmpl = {},
                             const GlassCatalog& catalog = GlassCatalog::schott(), bool smooth_max = false);

// Distortion of the template image; positions and eps in um.
struct DistortionTensor {
  int grid = 0;
  std::vector<double> wavelengths;
  std::vector<Point2<double>> field_um;
  std::vector<std::vector<std::optional<Point2<double>>>> ideal_um, distorted_um;  // [band][point]
  std::vector<std::vector<std::optional<double>>> eps_um;
  std::size_t missing = 0;

  double max_um() const;
  double mean_um() const;
};
DistortionTensor distortion_tensor(const PrismDesignParams& p, const DesignTemplate& tmpl = {},
                                   const GlassCatalog& catalog = GlassCatalog::schott());

// Individual losses.
double loss_dispersion(const PrismDesignParams& p, const DesignTemplate& tmpl = {});
double loss_distortion(const DistortionTensor& t);  // (max eps)^2; DomainError when every entry is missing
double loss_deviation(const PrismDesignParams& p, const DesignTemplate& tmpl = {});
double loss_thickness(const PrismDesignParams& p);
double loss_glass(const PrismDesignParams& p, const GlassCatalog& catalog = GlassCatalog::schott());
double loss_tir(const PrismDesignParams& p, const DesignTemplate& tmpl = {});
double total_loss(const PrismDesignParams& p, const LossWeights& w, int iteration, const DesignTemplate& tmpl = {},
                  const GlassCatalog& catalog = GlassCatalog::schott());

// Closed forms shared with the template evaluation.
template <class T>
T dispersion_residual2(const T& measured_rad, double target_rad) {
  const T r = T(target_rad) - measured_rad;
  return r * r;
}
template <class T>
T tir_term(const T& max_margin) {
  const T s = softplus(max_margin * 2.0);
  return s * s;
}

// Chief-ray summary of a design on the template.
struct DesignMetrics {
  double dispersion_deg = 0.0;  // |theta(last) - theta(first)|
  double deviation_mrad = 0.0;  // 520 nm center-field output angle
  double max_distortion_um = 0.0, mean_distortion_um = 0.0;
  double max_tir_margin = 0.0;  // max over interfaces of sin(theta_i) - sin(theta_c)
};
DesignMetrics design_metrics(const PrismDesignParams& p, const DesignTemplate& tmpl = {},
                             const GlassCatalog& catalog = GlassCatalog::schott());

// Nearest catalog glass for each relaxed glass; idempotent.
PrismDesignParams snap_glasses(const PrismDesignParams& p, const GlassCatalog& catalog = GlassCatalog::schott());

struct AdamConfig {
  double lr_angle = 1e-3;  // radians
  double lr_glass = 1e-3;  // normalized glass coordinates
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int iterations = 2000;
  // Monotone refinement of the angles with the snapped catalog glasses:
  // Adam steps that would raise the loss are retried at half the step.
  int polish_iterations = 300;
};

struct DesignRun {
  PrismDesignParams initial, relaxed, snapped, final;
  std::vector<double> loss_trace;  // Adam iterations, then polish iterations
  int adam_iterations = 0;
  SubLosses<double> final_losses;
  DesignMetrics final_metrics;
};

// Non-finite loss during optimization.
class OptimizationDiverged : public DomainError {
 public:
  OptimizationDiverged(int iteration, PrismDesignParams last_valid);
  int iteration;
  PrismDesignParams last_valid;
};

DesignRun optimize_prism(const PrismDesignParams& initial, const LossWeights& weights = {}, const AdamConfig& adam = {},
                         const DesignTemplate& tmpl = {}, const GlassCatalog& catalog = GlassCatalog::schott());

}  // namespace cassi
