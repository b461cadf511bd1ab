// Acceptance run: one PASS/FAIL line per criterion, exit status = number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "cassi/designer.hpp"
#include "cassi/reconstruction.hpp"
#include "cassi/validation.hpp"

using namespace cassi;
using V = Vec3<double>;

namespace {

constexpr ReferenceSystem kAll[] = {ReferenceSystem::SP, ReferenceSystem::AP, ReferenceSystem::mSP,
                                    ReferenceSystem::mAP};

std::string f(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double angle_between(const V& a, const V& b) { return std::atan2(norm(cross(a, b)), dot(a, b)); }

const Element& dispersive(const SystemConfig& c) {
  const Element* e = c.dispersive_element();
  if (!e) throw DomainError(c.name + ": no dispersive element");
  return *e;
}

// Direction after the dispersive element alone for a collimated input along +z.
V prism_exit(const SystemConfig& c, double wl) {
  const auto& e = dispersive(c);
  const auto surfaces = prism_element_surfaces(std::get<PrismElement>(e.kind), e.pose());
  const V d(0, 0, 1);
  const auto res = trace_sequential(Ray<double>{e.position_mm - d * 40.0, d, wl, true},
                                    std::span<const Surface<double>>(surfaces));
  if (!res.ray.alive) throw DomainError(c.name + ": collimated ray dies in the prism at " + f(wl) + " nm");
  return res.ray.direction;
}

double dispersion_deg(const SystemConfig& c) { return rad_to_deg(angle_between(prism_exit(c, 450.0), prism_exit(c, 650.0))); }
double deviation_mrad(const SystemConfig& c) { return 1e3 * angle_between(V(0, 0, 1), prism_exit(c, 520.0)); }

struct Outcome {
  bool pass;
  std::string detail;
};

// Optimizer runs from the four apex corners of the +-2 deg box, shared by criteria 1 and 5.
const std::vector<DesignRun>& corner_runs() {
  static const std::vector<DesignRun> runs = [] {
    std::vector<DesignRun> out;
    for (int c = 0; c < 4; ++c) {
      auto p = design_params(reported_amici_design());
      p.a1_deg += (c & 1) ? 2.0 : -2.0;
      p.a2_deg += (c & 2) ? 2.0 : -2.0;
      out.push_back(optimize_prism(p, image_plane_weights()));
    }
    return out;
  }();
  return runs;
}

SystemConfig designed_system(const DesignRun& r) { return build_reference_system(ReferenceSystem::AP, to_amici(r.final)); }

Outcome c1_dispersion() {
  const double sp = dispersion_deg(build_reference_system(ReferenceSystem::SP));
  bool pass = std::abs(sp / 0.95 - 1) <= 0.05;
  std::string d = "SP " + f(sp) + " deg; optimized";
  for (const auto& r : corner_runs()) {
    const double v = dispersion_deg(designed_system(r));
    pass = pass && std::abs(v / 0.95 - 1) <= 0.01;
    d += " " + f(v);
  }
  return {pass, d + " (0.95 +-5% / +-1%)"};
}

Outcome c2_distortion() {
  const auto sp = distortion_map(OpticalSystem(build_reference_system(ReferenceSystem::SP)));
  const auto ap = distortion_map(OpticalSystem(build_reference_system(ReferenceSystem::AP)));
  const bool pass = std::abs(sp.max_um / 214 - 1) <= 0.15 && std::abs(sp.mean_um / 75 - 1) <= 0.15 && ap.max_um <= 10 &&
                    ap.mean_um <= 3;
  return {pass, "SP max " + f(sp.max_um) + " mean " + f(sp.mean_um) + " um; AP max " + f(ap.max_um) + " mean " +
                    f(ap.mean_um) + " um"};
}

Outcome c3_direct_view() {
  const double d = deviation_mrad(build_reference_system(ReferenceSystem::AP));
  return {d <= 1.0, "AP |D| = " + f(d) + " mrad"};
}

Outcome c4_spread() {
  bool pass = true;
  std::string d;
  for (auto s : {ReferenceSystem::SP, ReferenceSystem::AP}) {
    const double v = spectral_spread_um(OpticalSystem(build_reference_system(s)));
    pass = pass && std::abs(v / 830 - 1) <= 0.01;
    d += to_string(s) + " " + f(v, 5) + " um ";
  }
  return {pass, d + "(830 +-1%)"};
}

Outcome c5_optimizer() {
  bool pass = true;
  std::string d;
  const auto& cat = GlassCatalog::schott();
  for (const auto& r : corner_runs()) {
    const auto cfg = designed_system(r);
    const auto dm = distortion_map(OpticalSystem(cfg));
    const double disp = dispersion_deg(cfg), dev = deviation_mrad(cfg);
    const bool snapped = cat.find(r.final.glass1) && cat.find(r.final.glass2);
    bool monotone = r.loss_trace.size() > 100;
    for (std::size_t i = r.loss_trace.size() - 100; monotone && i < r.loss_trace.size(); ++i)
      monotone = r.loss_trace[i] <= r.loss_trace[i - 1];
    const bool ok = std::abs(disp / 0.95 - 1) <= 0.01 && dm.max_um <= 10 && dm.mean_um <= 3 && dev <= 1 && snapped &&
                    monotone;
    pass = pass && ok;
    d += "[" + r.final.glass1 + "/" + r.final.glass2 + " " + f(disp) + " deg " + f(dm.max_um, 3) + "/" +
         f(dm.mean_um, 3) + " um " + f(dev, 2) + " mrad" + (monotone ? "" : " non-monotone") + "] ";
  }
  return {pass, d};
}

// Random design whose template chief rays all survive.
PrismDesignParams random_feasible(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> alpha(-10, 15), a1(20, 35), a2(35, 55), n(1.5, 1.8), v(25, 65);
  for (;;) {
    PrismDesignParams p;
    p.alpha_c_deg = alpha(rng), p.a1_deg = a1(rng), p.a2_deg = a2(rng);
    p.n1 = n(rng), p.v1 = v(rng), p.n2 = n(rng), p.v2 = v(rng);
    if (!sub_losses(p).dead) return p;
  }
}

Outcome c6_gradients() {
  using Pick = std::function<Dual(const SubLosses<Dual>&)>;
  const Pick picks[] = {[](auto& l) { return l.dispersion; }, [](auto& l) { return l.distortion; },
                        [](auto& l) { return l.deviation; },  [](auto& l) { return l.thickness; },
                        [](auto& l) { return l.glass; },      [](auto& l) { return l.tir; }};
  std::mt19937_64 rng(77);
  const auto& cat = GlassCatalog::schott();
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const auto p = random_feasible(rng);
    const auto x = design_variables(p, cat);
    for (const auto& pick : picks)
      worst = std::max(worst, gradient_check(
                                  [&](std::span<const Dual> v) { return pick(evaluate_losses<Dual>(v, p, {}, cat, true)); },
                                  x, 1e-6));
  }
  return {worst < 1e-5, "worst relative error " + f(worst, 3) + " over 20 points x 6 losses"};
}

Outcome c7_trace() {
  const auto md = check_minimum_deviation();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto& cat = GlassCatalog::schott();
  using S = Surface<double>;
  const auto g1 = Medium<double>::glass(cat.at("N-SK2"));
  const auto g2 = Medium<double>::glass(cat.at("N-SF10"));
  const std::vector<S> forward{
      S::plane(Pose<double>{intrinsic_yxz(0.05, 0.3, 0.0), V(0, 0, 0)}, 20.0, {}, g1),
      S::sphere(-40.0, Pose<double>{intrinsic_yxz(0.0, -0.1, 0.0), V(0, 0, 6)}, 20.0, g1, g2),
      S::plane(Pose<double>{intrinsic_yxz(-0.02, 0.2, 0.1), V(0, 0, 12)}, 20.0, g2, {}),
  };
  std::vector<S> reversed(forward.rbegin(), forward.rend());
  for (auto& s : reversed) std::swap(s.before, s.after);
  int survivors = 0, lost = 0;
  double planar = 0, back = 0;
  for (int i = 0; i < 10000; ++i) {
    const V normal = normalized(V(0.3 * u(rng), 0.3 * u(rng), -1.0));
    const V dir = normalized(V(0.5 * u(rng), 0.5 * u(rng), 1.0));
    const auto r = refract(Ray<double>{V(0, 0, 0), dir}, normal, 1.0 + 0.8 * std::abs(u(rng)), 1.0 + 0.8 * std::abs(u(rng)));
    if (r.alive) planar = std::max(planar, std::abs(dot(cross(dir, r.direction), normal)));

    const V o(2 * u(rng), 2 * u(rng), -15.0);
    const V d = normalized(V(0.1 * u(rng), 0.1 * u(rng), 1.0));
    const double wl = 450.0 + 100.0 * (u(rng) + 1.0);
    const auto fwd = trace_sequential(Ray<double>{o, d, wl}, std::span<const S>(forward));
    if (!fwd.ray.alive) continue;
    ++survivors;
    const auto rev = trace_sequential(Ray<double>{fwd.ray.origin + fwd.ray.direction * 10.0, -fwd.ray.direction, wl},
                                      std::span<const S>(reversed));
    if (!rev.ray.alive) {
      ++lost;
      continue;
    }
    const V w = o - rev.ray.origin;
    back = std::max(back, norm(w - rev.ray.direction * dot(w, rev.ray.direction)));
  }
  const bool pass = md.pass && planar < 1e-12 && back < 1e-8 && lost == 0 && survivors > 9000;
  return {pass, md.detail + "; planarity " + f(planar, 3) + ", return miss " + f(back, 3) + " mm over " +
                    std::to_string(survivors) + " rays"};
}

Outcome c8_slit() {
  const auto rep = slit_spectrometer_test(OpticalSystem(build_reference_system(ReferenceSystem::SP)));
  std::string d = "relative RMSE";
  for (const auto& r : rep.regions) d += " " + f(100 * r.relative_rmse, 3) + "%";
  return {rep.worst() < 0.05, d + " (< 5%)"};
}

Outcome c9_consistency() {
  bool pass = true;
  std::string d;
  for (auto s : kAll) {
    const OpticalSystem sys(build_reference_system(s));
    const auto a = check_mapping_consistency(sys), b = check_flux_conservation(sys), c = check_determinism(sys);
    pass = pass && a.pass && b.pass && c.pass;
    d += to_string(s) + (a.pass && b.pass && c.pass ? " ok" : " [" + a.detail + "; " + b.detail + "; " + c.detail + "]") +
         "; ";
  }
  return {pass, d};
}

// Criteria 10 and 11 share one set of renders.
struct SceneRuns {
  std::map<std::string, double> psnr;  // per config
  double shift_only = 0, mismatch = 0;
};

const std::vector<SceneRuns>& scene_runs() {
  static const std::vector<SceneRuns> runs = [] {
    const auto mask = Mask::random(64, 64, 0.5, 7);
    const RenderConfig rc;
    const TvConfig tv;
    std::map<std::string, OpticalSystem> sys;
    for (auto s : kAll) sys.emplace(to_string(s), OpticalSystem(build_reference_system(s)));
    const auto wl = sys.at("AP").config().band_wavelengths();
    std::vector<SceneRuns> out;
    for (auto kind : {SceneKind::Blocks, SceneKind::Smooth, SceneKind::Disks}) {
      const auto truth = synthetic_scene(kind, 64, 64, wl, 11 + static_cast<int>(kind));
      const auto coded = code_scene(truth, mask);
      SceneRuns r;
      std::map<std::string, MappingTable> maps;
      std::map<std::string, Acquisition> acqs;
      for (const auto& [name, s] : sys) {
        auto acq = render(coded, s, rc);
        auto map = render_mapping(s, truth.grid(), wl, rc);
        r.psnr[name] = quality(truth, reconstruct_tv(acq, ForwardOperator(map, mask), tv).cube).psnr;
        maps.emplace(name, std::move(map));
        acqs.emplace(name, std::move(acq));
      }
      const auto& acq = acqs.at("mSP");
      r.shift_only = quality(truth, reconstruct_tv(acq, ForwardOperator(shift_only_mapping(maps.at("mSP")), mask), tv).cube).psnr;
      r.mismatch =
          quality(truth, reconstruct_tv(acq, ForwardOperator(maps.at("AP").reframed(acq.geometry), mask), tv).cube).psnr;
      out.push_back(std::move(r));
    }
    return out;
  }();
  return runs;
}

Outcome c10_marginal() {
  const auto& runs = scene_runs();
  std::map<std::string, double> mean;
  double per_scene = 0;
  for (const auto& r : runs) {
    double lo = 1e9, hi = -1e9;
    for (const auto& [n, p] : r.psnr) {
      mean[n] += p / runs.size();
      lo = std::min(lo, p), hi = std::max(hi, p);
    }
    per_scene = std::max(per_scene, hi - lo);
  }
  double lo = 1e9, hi = -1e9;
  std::string d = "scene-mean PSNR";
  for (const auto& [n, p] : mean) {
    lo = std::min(lo, p), hi = std::max(hi, p);
    d += " " + n + " " + f(p) + " dB";
  }
  return {hi - lo < 1.5, d + "; spread " + f(hi - lo, 3) + " dB (largest single-scene spread " + f(per_scene, 3) + " dB)"};
}

Outcome c11_ablation() {
  bool pass = true;
  std::string d;
  for (const auto& r : scene_runs()) {
    const double aware = r.psnr.at("mSP");
    pass = pass && aware > r.shift_only && aware - r.mismatch > 3.0;
    d += "[" + f(aware) + " vs shift-only " + f(r.shift_only) + ", AP operator " + f(r.mismatch) + "] ";
  }
  return {pass, d};
}

Outcome c12_adjoint() {
  bool pass = true;
  std::string d;
  for (auto s : kAll) {
    const auto r = check_adjoint(OpticalSystem(build_reference_system(s)), 10, 5);
    pass = pass && r.pass;
    d += to_string(s) + ": " + r.detail + "; ";
  }
  return {pass, d};
}

}  // namespace

int main() {
  const std::pair<const char*, Outcome (*)()> criteria[] = {
      {"dispersion", c1_dispersion},       {"distortion", c2_distortion},   {"direct view", c3_direct_view},
      {"spatio-spectral spread", c4_spread}, {"optimizer", c5_optimizer},   {"gradients", c6_gradients},
      {"ray-trace oracle", c7_trace},      {"slit spectrometer", c8_slit},  {"mapping consistency", c9_consistency},
      {"configuration spread", c10_marginal}, {"ablations", c11_ablation}, {"adjoint", c12_adjoint},
  };
  int failures = 0, i = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", ++i, name, o.detail.c_str(), t);
    std::fflush(stdout);
  }
  return failures;
}
