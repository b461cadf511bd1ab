#include "cassi/designer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cassi/mapping.hpp"
#include "cassi/prism.hpp"

namespace cassi {

PrismDesignParams design_params(const AmiciParams& a) {
  PrismDesignParams p;
  p.alpha_c_deg = a.alpha_c_deg;
  p.a1_deg = a.a1_deg;
  p.a2_deg = a.a2_deg;
  p.n1 = a.glass1.n_d, p.v1 = a.glass1.v_d;
  p.n2 = a.glass2.n_d, p.v2 = a.glass2.v_d;
  if (a.glass1.is_catalog()) p.glass1 = a.glass1.name;
  if (a.glass2.is_catalog()) p.glass2 = a.glass2.name;
  return p;
}

AmiciParams to_amici(const PrismDesignParams& p, const GlassCatalog& catalog) {
  auto glass = [&](const std::string& name, double n, double v) {
    return name.empty() ? GlassModel::relaxed(n, v) : catalog.at(name);
  };
  AmiciParams a;
  a.alpha_c_deg = p.alpha_c_deg;
  a.a1_deg = p.a1_deg;
  a.a2_deg = p.a2_deg;
  a.glass1 = glass(p.glass1, p.n1, p.v1);
  a.glass2 = glass(p.glass2, p.n2, p.v2);
  return a;
}

void validate(const PrismDesignParams& p) {
  auto in = [](double x, double lo, double hi) { return x > lo && x < hi; };
  if (!in(p.a1_deg, 0.0, 80.0) || !in(p.a2_deg, 0.0, 80.0))
    throw DomainError("apex angles must lie in (0, 80) deg");
  if (!in(p.alpha_c_deg, -45.0, 45.0)) throw DomainError("alpha_c must lie in (-45, 45) deg");
  for (auto [n, v] : {std::pair{p.n1, p.v1}, std::pair{p.n2, p.v2}})
    if (!(n >= 1.4 && n <= 2.1 && v >= 15.0 && v <= 100.0))
      throw DomainError("glass (n_d, V_d) outside [1.4, 2.1] x [15, 100]");
}

LossWeights image_plane_weights(double focal_mm) {
  LossWeights w;
  const double f_um = focal_mm * 1e3;
  w.dispersion = f_um * f_um;
  w.deviation = f_um * f_um;
  return w;
}

std::vector<double> design_variables(const PrismDesignParams& p, const GlassCatalog& catalog) {
  std::vector<double> x{deg_to_rad(p.alpha_c_deg), deg_to_rad(p.a1_deg), deg_to_rad(p.a2_deg)};
  const bool fixed = !p.glass1.empty() && !p.glass2.empty();
  if (!fixed) {
    for (auto [n, v] : {std::pair{p.n1, p.v1}, std::pair{p.n2, p.v2}}) {
      x.push_back((n - catalog.n_d_min()) / catalog.n_d_range());
      x.push_back((v - catalog.v_d_min()) / catalog.v_d_range());
    }
  }
  return x;
}

PrismDesignParams from_variables(std::span<const double> x, const PrismDesignParams& base, const GlassCatalog& catalog) {
  PrismDesignParams p = base;
  p.alpha_c_deg = rad_to_deg(x[0]);
  p.a1_deg = rad_to_deg(x[1]);
  p.a2_deg = rad_to_deg(x[2]);
  if (x.size() == 7) {
    p.n1 = catalog.n_d_min() + x[3] * catalog.n_d_range();
    p.v1 = catalog.v_d_min() + x[4] * catalog.v_d_range();
    p.n2 = catalog.n_d_min() + x[5] * catalog.n_d_range();
    p.v2 = catalog.v_d_min() + x[6] * catalog.v_d_range();
    p.glass1.clear();
    p.glass2.clear();
  }
  return p;
}

namespace {

template <class T>
struct Glass {
  Medium<T> medium;
  T n_d, v_d;
};

template <class T>
Glass<T> glass_from(std::span<const T> x, std::size_t at, const std::string& name, double n, double v,
                    const GlassCatalog& catalog) {
  if (x.size() == 7) {
    const T nd = x[at] * catalog.n_d_range() + catalog.n_d_min();
    const T vd = x[at + 1] * catalog.v_d_range() + catalog.v_d_min();
    return {Medium<T>::relaxed(nd, vd), nd, vd};
  }
  if (!name.empty()) {
    const GlassModel& g = catalog.at(name);
    return {Medium<T>::glass(g), T(g.n_d), T(g.v_d)};
  }
  return {Medium<T>::glass(GlassModel::relaxed(n, v)), T(n), T(v)};
}

// Normalized squared distance to the nearest catalog entry.
template <class T>
T glass_distance(const T& n, const T& v, const GlassCatalog& catalog) {
  if (catalog.empty()) throw DomainError("glass loss needs a non-empty catalog");
  const GlassModel& g = catalog.nearest(value_of(n), value_of(v));
  const T dn = (n - g.n_d) / catalog.n_d_range();
  const T dv = (v - g.v_d) / catalog.v_d_range();
  return dn * dn + dv * dv;
}

template <class T>
struct TemplateRay {
  Vec3<T> direction;
  T max_margin;
  bool alive;
};

template <class T>
TemplateRay<T> through_prism(const std::vector<Surface<T>>& surfaces, const Vec3<T>& direction, double wavelength) {
  Ray<T> in{Vec3<T>(T(0.0), T(0.0), T(-100.0)), direction, wavelength, true};
  const auto r = trace_sequential(in, std::span<const Surface<T>>(surfaces));
  T margin(-std::numeric_limits<double>::infinity());
  bool first = true;
  for (const auto& h : r.log) {
    const T sin_i = norm(cross(h.incident, h.normal));
    const T m = sin_i - h.n_after / h.n_before;
    if (first || value_of(m) > value_of(margin)) margin = m;
    first = false;
  }
  const bool alive = r.ray.alive && r.log.size() == surfaces.size();
  return {r.ray.direction, margin, alive};
}

template <class T>
T output_angle(const Vec3<T>& d) {
  using std::atan2;
  return atan2(d.x, d.z);
}

template <class T>
struct Evaluation {
  SubLosses<T> losses;
  T dispersion_rad{}, deviation_rad{}, max_margin{};
  DistortionFit<T> fit;
  std::vector<std::vector<std::optional<Point2<T>>>> traced;
  std::vector<Point2<double>> field_um;
  std::size_t center = 0, ref = 0;
  bool center_dead = false;
};

std::size_t closest_index(const std::vector<double>& v, double x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i] - x) < std::abs(v[best] - x)) best = i;
  return best;
}

template <class T>
Evaluation<T> evaluate(std::span<const T> x, const PrismDesignParams& base, const DesignTemplate& tmpl,
                       const GlassCatalog& catalog, bool smooth_max) {
  if (tmpl.wavelengths.size() < 2) throw DomainError("design template needs at least two wavelengths");
  if (tmpl.grid < 3 || tmpl.grid % 2 == 0) throw DomainError("design template grid must be odd and >= 3");
  const bool relaxed = x.size() == 7;
  if (x.size() != 3 && !relaxed) throw DomainError("design variables: expected 3 or 7 entries");
  const T alpha = x[0], a1 = x[1], a2 = x[2];
  const Glass<T> g1 = glass_from(x, 3, base.glass1, base.n1, base.v1, catalog);
  const Glass<T> g2 = glass_from(x, 5, base.glass2, base.n2, base.v2, catalog);

  Evaluation<T> ev;
  SubLosses<T>& L = ev.losses;
  L.thickness = a1 * a1 * 2.0 + a2 * a2;
  L.glass = glass_distance(g1.n_d, g1.v_d, catalog) + glass_distance(g2.n_d, g2.v_d, catalog);

  PrismGeometry<T> geometry;
  geometry.apex = {a1, a2, a1};
  geometry.signs = {1, -1, 1};
  geometry.thickness.assign(tmpl.thickness_mm.begin(), tmpl.thickness_mm.end());
  geometry.glasses = {g1.medium, g2.medium, g1.medium};
  geometry.aperture = std::numeric_limits<double>::infinity();
  const T ry = alpha + (a1 * 2.0 - a2) * 0.5;
  const auto surfaces = prism_surfaces(geometry, Pose<T>{rotation_y(ry), Vec3<T>()});

  const std::vector<double>& wls = tmpl.wavelengths;
  ev.ref = closest_index(wls, kCentralWavelength);
  const auto field_mm = field_grid(tmpl.grid, tmpl.half_field_mm);
  ev.center = field_mm.size() / 2;
  for (const auto& p : field_mm) ev.field_um.push_back({p.x * 1e3, p.y * 1e3});

  // chief rays: field (x, y) on the collimator's front focal plane
  std::vector<std::vector<TemplateRay<T>>> rays(wls.size());
  bool any_dead = false;
  T margin(-std::numeric_limits<double>::infinity());
  bool have_margin = false;
  for (std::size_t k = 0; k < wls.size(); ++k)
    for (const auto& p : field_mm) {
      const Vec3<T> d = normalized(Vec3<T>(T(-p.x), T(-p.y), T(tmpl.focal_mm)));
      rays[k].push_back(through_prism(surfaces, d, wls[k]));
      const auto& r = rays[k].back();
      any_dead = any_dead || !r.alive;
      if (!have_margin || value_of(r.max_margin) > value_of(margin)) margin = r.max_margin, have_margin = true;
    }
  ev.max_margin = margin;
  L.tir = tir_term(margin);

  for (std::size_t k = 0; k < wls.size(); ++k) ev.center_dead = ev.center_dead || !rays[k][ev.center].alive;
  L.dead = any_dead;
  const T penalty = alpha * alpha + kDeadRayPenalty;
  if (ev.center_dead) {
    L.dispersion = L.deviation = L.distortion = penalty;
    return ev;
  }

  const T theta_first = output_angle(rays.front()[ev.center].direction);
  const T theta_last = output_angle(rays.back()[ev.center].direction);
  using std::abs;
  ev.dispersion_rad = abs(theta_last - theta_first);
  L.dispersion = dispersion_residual2(ev.dispersion_rad, deg_to_rad(tmpl.target_dispersion_deg));

  // alpha_c_out: output angle measured from the last face normal, signed so
  // that alpha_c + alpha_c_out + 2 A1 - A2 is the net deviation
  const T theta_ref = output_angle(rays[ev.ref][ev.center].direction);
  const T last_face = alpha + a1 * 2.0 - a2;
  const T alpha_out = theta_ref - last_face;
  ev.deviation_rad = alpha + alpha_out + a1 * 2.0 - a2;
  L.deviation = ev.deviation_rad * ev.deviation_rad;

  // detector frame of the imaging lens
  const Vec3<T> e3 = rays[ev.ref][ev.center].direction;
  const Vec3<T> e1 = normalized(cross(Vec3<T>(T(0.0), T(1.0), T(0.0)), e3));
  const Vec3<T> e2 = cross(e3, e1);
  const double f_um = tmpl.focal_mm * 1e3;
  ev.traced.resize(wls.size());
  for (std::size_t k = 0; k < wls.size(); ++k)
    for (const auto& r : rays[k]) {
      if (!r.alive) {
        ev.traced[k].push_back(std::nullopt);
        continue;
      }
      const T w = dot(r.direction, e3);
      ev.traced[k].push_back(Point2<T>{dot(r.direction, e1) / w * f_um, dot(r.direction, e2) / w * f_um});
    }
  ev.fit = fit_distortion(ev.traced, ev.field_um, ev.center, ev.ref);

  std::vector<T> eps;
  for (const auto& band : ev.fit.displacement)
    for (const auto& d : band)
      if (d) eps.push_back(magnitude(*d));
  std::size_t imax = 0;
  for (std::size_t i = 1; i < eps.size(); ++i)
    if (value_of(eps[i]) > value_of(eps[imax])) imax = i;
  T emax = eps[imax];
  if (smooth_max) {
    using std::exp;
    using std::log;
    const double tau = tmpl.smooth_max_tau_um;
    T sum(0.0);
    for (const T& e : eps) sum = sum + exp((e - eps[imax]) / tau);
    emax = eps[imax] + log(sum) * tau;
  }
  L.distortion = emax * emax;
  if (any_dead) L.distortion = L.distortion + penalty;
  return ev;
}

}  // namespace

template <class T>
SubLosses<T> evaluate_losses(std::span<const T> x, const PrismDesignParams& base, const DesignTemplate& tmpl,
                             const GlassCatalog& catalog, bool smooth_max) {
  return evaluate(x, base, tmpl, catalog, smooth_max).losses;
}

template SubLosses<double> evaluate_losses(std::span<const double>, const PrismDesignParams&, const DesignTemplate&,
                                           const GlassCatalog&, bool);
template SubLosses<Dual> evaluate_losses(std::span<const Dual>, const PrismDesignParams&, const DesignTemplate&,
                                         const GlassCatalog&, bool);

SubLosses<double> sub_losses(const PrismDesignParams& p, const DesignTemplate& tmpl, const GlassCatalog& catalog,
                             bool smooth_max) {
  const auto x = design_variables(p, catalog);
  return evaluate_losses<double>(x, p, tmpl, catalog, smooth_max);
}

double DistortionTensor::max_um() const {
  double m = 0.0;
  for (const auto& band : eps_um)
    for (const auto& e : band)
      if (e) m = std::max(m, *e);
  return m;
}

double DistortionTensor::mean_um() const {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& band : eps_um)
    for (const auto& e : band)
      if (e) s += *e, ++n;
  return n ? s / n : 0.0;
}

DistortionTensor distortion_tensor(const PrismDesignParams& p, const DesignTemplate& tmpl,
                                   const GlassCatalog& catalog) {
  const auto x = design_variables(p, catalog);
  const auto ev = evaluate<double>(x, p, tmpl, catalog, false);
  DistortionTensor t;
  t.grid = tmpl.grid;
  t.wavelengths = tmpl.wavelengths;
  t.field_um = ev.field_um;
  if (ev.center_dead) throw DomainError("distortion_tensor: center-field chief ray dies");
  t.missing = ev.fit.missing;
  for (std::size_t k = 0; k < ev.traced.size(); ++k) {
    t.distorted_um.push_back(ev.traced[k]);
    t.ideal_um.emplace_back();
    t.eps_um.emplace_back();
    for (std::size_t i = 0; i < ev.traced[k].size(); ++i) {
      const auto& d = ev.fit.displacement[k][i];
      if (!d) {
        t.ideal_um.back().push_back(std::nullopt);
        t.eps_um.back().push_back(std::nullopt);
        continue;
      }
      const auto& P = *ev.traced[k][i];
      t.ideal_um.back().push_back(Point2<double>{P.x - d->x, P.y - d->y});
      t.eps_um.back().push_back(magnitude(*d));
    }
  }
  return t;
}

double loss_dispersion(const PrismDesignParams& p, const DesignTemplate& tmpl) { return sub_losses(p, tmpl).dispersion; }

double loss_distortion(const DistortionTensor& t) {
  bool any = false;
  for (const auto& band : t.eps_um)
    for (const auto& e : band) any = any || e.has_value();
  if (!any) throw DomainError("loss_distortion: every tensor entry is missing");
  const double m = t.max_um();
  return m * m;
}

double loss_deviation(const PrismDesignParams& p, const DesignTemplate& tmpl) { return sub_losses(p, tmpl).deviation; }

double loss_thickness(const PrismDesignParams& p) {
  const double a1 = deg_to_rad(p.a1_deg), a2 = deg_to_rad(p.a2_deg);
  return 2 * a1 * a1 + a2 * a2;
}

double loss_glass(const PrismDesignParams& p, const GlassCatalog& catalog) {
  double n1 = p.n1, v1 = p.v1, n2 = p.n2, v2 = p.v2;
  if (!p.glass1.empty()) n1 = catalog.at(p.glass1).n_d, v1 = catalog.at(p.glass1).v_d;
  if (!p.glass2.empty()) n2 = catalog.at(p.glass2).n_d, v2 = catalog.at(p.glass2).v_d;
  return glass_distance(n1, v1, catalog) + glass_distance(n2, v2, catalog);
}

double loss_tir(const PrismDesignParams& p, const DesignTemplate& tmpl) { return sub_losses(p, tmpl).tir; }

double total_loss(const PrismDesignParams& p, const LossWeights& w, int iteration, const DesignTemplate& tmpl,
                  const GlassCatalog& catalog) {
  return sub_losses(p, tmpl, catalog, false).total(w, iteration);
}

DesignMetrics design_metrics(const PrismDesignParams& p, const DesignTemplate& tmpl, const GlassCatalog& catalog) {
  const auto x = design_variables(p, catalog);
  const auto ev = evaluate<double>(x, p, tmpl, catalog, false);
  if (ev.center_dead) throw DomainError("design_metrics: center-field chief ray dies");
  DesignMetrics m;
  m.dispersion_deg = rad_to_deg(ev.dispersion_rad);
  m.deviation_mrad = ev.deviation_rad * 1e3;
  m.max_tir_margin = ev.max_margin;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& band : ev.fit.displacement)
    for (const auto& d : band)
      if (d) {
        const double e = magnitude(*d);
        m.max_distortion_um = std::max(m.max_distortion_um, e);
        sum += e, ++n;
      }
  m.mean_distortion_um = n ? sum / n : 0.0;
  return m;
}

PrismDesignParams snap_glasses(const PrismDesignParams& p, const GlassCatalog& catalog) {
  PrismDesignParams out = p;
  auto snap = [&](std::string& name, double& n, double& v) {
    const GlassModel& g = name.empty() ? catalog.nearest(n, v) : catalog.at(name);
    name = g.name, n = g.n_d, v = g.v_d;
  };
  snap(out.glass1, out.n1, out.v1);
  snap(out.glass2, out.n2, out.v2);
  return out;
}

OptimizationDiverged::OptimizationDiverged(int it, PrismDesignParams last)
    : DomainError("prism optimization diverged at iteration " + std::to_string(it)),
      iteration(it),
      last_valid(std::move(last)) {}

namespace {

struct Bounds {
  std::vector<double> lo, hi;
};

Bounds variable_bounds(std::size_t n, const GlassCatalog& catalog) {
  const double a_lo = deg_to_rad(0.1), a_hi = deg_to_rad(79.9), c = deg_to_rad(44.9);
  Bounds b{{-c, a_lo, a_lo}, {c, a_hi, a_hi}};
  if (n == 7)
    for (int g = 0; g < 2; ++g) {
      b.lo.push_back((1.4 - catalog.n_d_min()) / catalog.n_d_range());
      b.hi.push_back((2.1 - catalog.n_d_min()) / catalog.n_d_range());
      b.lo.push_back((15.0 - catalog.v_d_min()) / catalog.v_d_range());
      b.hi.push_back((100.0 - catalog.v_d_min()) / catalog.v_d_range());
    }
  return b;
}

struct Objective {
  const PrismDesignParams& base;
  const LossWeights& weights;
  const DesignTemplate& tmpl;
  const GlassCatalog& catalog;

  Dual operator()(const std::vector<double>& x, int iteration) const {
    const auto v = seed(x);
    return evaluate_losses<Dual>(v, base, tmpl, catalog, true).total(weights, iteration);
  }
};

class Adam {
 public:
  Adam(const AdamConfig& c, std::vector<double> lr) : c_(c), lr_(std::move(lr)), m_(lr_.size()), v_(lr_.size()) {}

  std::vector<double> step(const std::vector<double>& x, std::span<const double> g, double scale = 1.0) {
    ++t_;
    std::vector<double> out = x;
    const double b1 = 1.0 - std::pow(c_.beta1, t_), b2 = 1.0 - std::pow(c_.beta2, t_);
    for (std::size_t i = 0; i < x.size(); ++i) {
      m_[i] = c_.beta1 * m_[i] + (1 - c_.beta1) * g[i];
      v_[i] = c_.beta2 * v_[i] + (1 - c_.beta2) * g[i] * g[i];
      out[i] -= scale * lr_[i] * (m_[i] / b1) / (std::sqrt(v_[i] / b2) + c_.epsilon);
    }
    return out;
  }

 private:
  AdamConfig c_;
  std::vector<double> lr_, m_, v_;
  int t_ = 0;
};

void clamp(std::vector<double>& x, const Bounds& b) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], b.lo[i], b.hi[i]);
}

std::vector<double> learning_rates(std::size_t n, const AdamConfig& c) {
  std::vector<double> lr(3, c.lr_angle);
  lr.resize(n, c.lr_glass);
  return lr;
}

}  // namespace

DesignRun optimize_prism(const PrismDesignParams& initial, const LossWeights& weights, const AdamConfig& adam,
                         const DesignTemplate& tmpl, const GlassCatalog& catalog) {
  validate(initial);
  DesignRun run;
  run.initial = initial;

  // relaxed phase over all seven variables
  PrismDesignParams relaxed_base = initial;
  relaxed_base.glass1.clear();
  relaxed_base.glass2.clear();
  std::vector<double> x = design_variables(relaxed_base, catalog);
  Bounds bounds = variable_bounds(x.size(), catalog);
  Adam opt(adam, learning_rates(x.size(), adam));
  Objective f{relaxed_base, weights, tmpl, catalog};
  for (int it = 1; it <= adam.iterations; ++it) {
    const Dual loss = f(x, it);
    if (!std::isfinite(loss.value())) throw OptimizationDiverged(it, from_variables(x, relaxed_base, catalog));
    for (double g : loss.tangents())
      if (!std::isfinite(g)) throw OptimizationDiverged(it, from_variables(x, relaxed_base, catalog));
    run.loss_trace.push_back(loss.value());
    x = opt.step(x, loss.tangents());
    clamp(x, bounds);
  }
  run.adam_iterations = adam.iterations;
  run.relaxed = adam.iterations > 0 ? from_variables(x, relaxed_base, catalog) : initial;
  run.snapped = snap_glasses(run.relaxed, catalog);

  // polish: angles only, catalog glasses, steps that raise the loss are halved
  std::vector<double> y = design_variables(run.snapped, catalog);
  bounds = variable_bounds(y.size(), catalog);
  Objective h{run.snapped, weights, tmpl, catalog};
  const int it_final = std::max(adam.iterations, 1);
  Dual current = h(y, it_final);
  Adam polish(adam, learning_rates(y.size(), adam));
  for (int it = 0; it < adam.polish_iterations; ++it) {
    if (!std::isfinite(current.value()))
      throw OptimizationDiverged(adam.iterations + it + 1, from_variables(y, run.snapped, catalog));
    double scale = 1.0;
    bool accepted = false;
    Adam trial = polish;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt, scale *= 0.5) {
      trial = polish;
      auto cand = trial.step(y, current.tangents(), scale);
      clamp(cand, bounds);
      const Dual next = h(cand, it_final);
      if (std::isfinite(next.value()) && next.value() <= current.value()) {
        y = std::move(cand);
        current = next;
        accepted = true;
      }
    }
    polish = trial;
    run.loss_trace.push_back(current.value());
  }
  run.final = from_variables(y, run.snapped, catalog);
  run.final_losses = sub_losses(run.final, tmpl, catalog, false);
  run.final_metrics = design_metrics(run.final, tmpl, catalog);
  return run;
}

}  // namespace cassi
