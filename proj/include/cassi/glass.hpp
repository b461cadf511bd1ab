// Glass dispersion models and the SCHOTT catalog.
#pragma once

#include <array>
#include <cmath>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cassi/dual.hpp"
#include "cassi/errors.hpp"

namespace cassi {

// Fraunhofer lines (nm).
inline constexpr double kLambdaD = 587.5618;
inline constexpr double kLambdaF = 486.1327;
inline constexpr double kLambdaC = 656.2725;

// n^2 = 1 + sum B_i l^2 / (l^2 - C_i), l in micrometres.
struct Sellmeier {
  std::array<double, 3> b{};
  std::array<double, 3> c{};
};

// Two-parameter glass used while designing: n(l) = a + b / l^2 anchored so
// that n(l_d) = n_d and (n_d - 1) / (n_F - n_C) = V_d.
template <class T>
struct RelaxedGlass {
  T n_d{};
  T v_d{};

  T index(double wavelength_nm) const {
    constexpr double span = 1.0 / (kLambdaF * kLambdaF) - 1.0 / (kLambdaC * kLambdaC);
    const T b = (n_d - 1.0) / (v_d * span);
    const T a = n_d - b / (kLambdaD * kLambdaD);
    return a + b / (wavelength_nm * wavelength_nm);
  }
};

struct GlassModel {
  std::string name;
  std::variant<Sellmeier, RelaxedGlass<double>> kind;
  double n_d = 0.0;  // nominal datasheet values (exact for relaxed glasses)
  double v_d = 0.0;

  static GlassModel relaxed(double n_d, double v_d, std::string name = "relaxed");
  bool is_catalog() const { return std::holds_alternative<Sellmeier>(kind); }
};

// Throws DomainError for non-positive wavelengths.
double refractive_index(const GlassModel& glass, double wavelength_nm);

// Medium between two surfaces; relaxed glasses may carry derivatives.
template <class T>
struct Medium {
  std::variant<std::monostate, GlassModel, RelaxedGlass<T>> kind;

  static Medium vacuum() { return {}; }
  static Medium glass(const GlassModel& g) { return {g}; }
  static Medium relaxed(const T& n_d, const T& v_d) { return {RelaxedGlass<T>{n_d, v_d}}; }

  bool is_vacuum() const { return std::holds_alternative<std::monostate>(kind); }

  T index(double wavelength_nm) const {
    if (const auto* g = std::get_if<GlassModel>(&kind)) return T(refractive_index(*g, wavelength_nm));
    if (const auto* r = std::get_if<RelaxedGlass<T>>(&kind)) return r->index(wavelength_nm);
    return T(1.0);
  }
};

class GlassCatalog {
 public:
  GlassCatalog() = default;
  explicit GlassCatalog(std::vector<GlassModel> glasses);

  // Records: name n_d V_d B1 B2 B3 C1 C2 C3; '#' starts a comment.
  static GlassCatalog parse(std::istream& in, std::string_view source = "<catalog>");
  static GlassCatalog load(const std::string& path);
  // The SCHOTT catalog embedded at build time.
  static const GlassCatalog& schott();

  const std::vector<GlassModel>& glasses() const { return glasses_; }
  bool empty() const { return glasses_.empty(); }
  std::size_t size() const { return glasses_.size(); }

  const GlassModel& at(std::string_view name) const;
  const GlassModel* find(std::string_view name) const;

  double n_d_min() const { return nd_min_; }
  double n_d_max() const { return nd_max_; }
  double v_d_min() const { return vd_min_; }
  double v_d_max() const { return vd_max_; }
  double n_d_range() const { return nd_max_ - nd_min_; }
  double v_d_range() const { return vd_max_ - vd_min_; }

  // Squared normalized distance in the (n_d, V_d) plane.
  double distance2(double n_d, double v_d, const GlassModel& g) const {
    const double dn = (n_d - g.n_d) / n_d_range();
    const double dv = (v_d - g.v_d) / v_d_range();
    return dn * dn + dv * dv;
  }

  // Closest glass under distance2; first entry wins ties.
  const GlassModel& nearest(double n_d, double v_d) const;

 private:
  std::vector<GlassModel> glasses_;
  double nd_min_ = 0, nd_max_ = 0, vd_min_ = 0, vd_max_ = 0;
};

}  // namespace cassi
