#include "cassi/validation.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "cassi/parallel.hpp"
#include "cassi/reconstruction.hpp"
#include "cassi/sampling.hpp"

namespace cassi {

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

SpectralCube random_cube(const OpticalSystem& system, int size, std::uint64_t seed) {
  SpectralCube c(size, size, system.config().band_wavelengths(), system.config().sensor.pitch_um);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : c.data) v = u(rng);
  return c;
}

}  // namespace

CheckResult check_minimum_deviation() {
  CheckResult r{"minimum deviation", true, ""};
  const auto& bk7 = GlassCatalog::schott().at("N-BK7");
  const double apex = deg_to_rad(60.0);
  PrismGeometry<double> g{{apex}, {1}, {10.0}, {Medium<double>::glass(bk7)}, 30.0};
  const auto surfaces = prism_surfaces(g, Pose<double>{});
  double worst = 0.0;
  for (double wl : {450.0, 520.0, 650.0}) {
    const double n = refractive_index(bk7, wl);
    const double incidence = minimum_deviation_incidence(apex, n);
    // the first face normal is tilted by -apex/2 about y
    const Vec3<double> d(std::sin(incidence - apex / 2), 0.0, std::cos(incidence - apex / 2));
    const auto res = trace_sequential(Ray<double>{d * -20.0, d, wl, true}, std::span<const Surface<double>>(surfaces));
    if (!res.ray.alive) {
      r.pass = false;
      r.detail = "ray died at " + fmt(wl) + " nm";
      return r;
    }
    const double dev = std::atan2(norm(cross(d, res.ray.direction)), dot(d, res.ray.direction));
    worst = std::max(worst, std::abs(dev - (2 * incidence - apex)));
  }
  r.pass = worst < 1e-9;
  r.detail = "max |D - D_closed| = " + fmt(worst) + " rad";
  return r;
}

CheckResult check_mapping_consistency(const OpticalSystem& system, int probes, std::uint64_t seed) {
  const int size = 64;
  const auto wl = system.config().band_wavelengths();
  const SceneGrid grid{size, size, system.pitch_mm()};
  RenderConfig cfg;
  cfg.seed = seed;
  const auto geom = render_geometry(system, grid, wl, cfg);
  const auto map = build_mapping(system, grid, wl, geom);
  std::mt19937_64 rng(seed);
  std::vector<double> err(probes);
  std::vector<std::array<int, 3>> picks(probes);
  for (auto& p : picks) p = {int(rng() % size), int(rng() % size), int(rng() % wl.size())};
  parallel_for(probes, [&](std::size_t i) {
    const auto [r, c, k] = picks[i];
    SpectralCube imp(size, size, wl, system.config().sensor.pitch_um);
    imp.at(r, c, k) = 1.0;
    const auto a = render(imp, system, cfg, geom);
    double s = 0, sx = 0, sy = 0;
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x) s += a.at(y, x), sx += a.at(y, x) * x, sy += a.at(y, x) * y;
    const Vec2 m = map.at(r, c, k);
    err[i] = s > 0 ? std::hypot(sx / s - m.x, sy / s - m.y) : std::numeric_limits<double>::infinity();
  });
  const double worst = *std::max_element(err.begin(), err.end());
  return {"mapping/renderer consistency", worst < 0.5,
          std::to_string(probes) + " probes, max centroid offset " + fmt(worst) + " px"};
}

CheckResult check_flux_conservation(const OpticalSystem& system, std::uint64_t seed) {
  const auto cube = random_cube(system, 32, seed);
  RenderConfig cfg;
  cfg.seed = seed;
  const auto acq = render(cube, system, cfg);
  const auto o = oversample_cube(cube, cfg.oversampling);
  double var = 0.0;
  for (int k = 0; k < o.bands(); ++k) {
    const double p = 1.0 - acq.dead_fraction[k];
    double sq = 0.0;
    const std::size_t plane = std::size_t(o.height) * o.width;
    for (std::size_t i = 0; i < plane; ++i) sq += o.data[k * plane + i] * o.data[k * plane + i];
    var += sq * p * (1 - p) / cfg.rays_per_pixel;
  }
  const double total = cube.total(), got = acq.total();
  const double se = std::sqrt(var);
  const bool pass = std::abs(got - total) <= 4 * se + 1e-9 * total;
  return {"flux conservation", pass,
          "rendered " + fmt(got) + " vs cube " + fmt(total) + " (diff " + fmt(got - total) + ")" + " (4 SE = " + fmt(4 * se) + ")"};
}

CheckResult check_determinism(const OpticalSystem& system, std::uint64_t seed) {
  const auto cube = random_cube(system, 16, seed);
  RenderConfig cfg;
  cfg.seed = seed;
  const auto a = render(cube, system, cfg), b = render(cube, system, cfg);
  const bool same = a.data == b.data;
  return {"fixed-seed determinism", same, same ? "bit-identical" : "renders differ"};
}

CheckResult check_adjoint(const OpticalSystem& system, int pairs, std::uint64_t seed) {
  const SceneGrid grid{32, 32, system.pitch_mm()};
  const ForwardOperator op(render_mapping(system, grid, system.config().band_wavelengths(), {}),
                           Mask::random(32, 32, 0.5, seed));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    std::vector<double> x(op.cube_size()), y(op.acquisition_size());
    for (auto& v : x) v = g(rng);
    for (auto& v : y) v = g(rng);
    const auto px = op.apply(x), ty = op.adjoint(y);
    double lhs = 0, rhs = 0;
    for (std::size_t j = 0; j < y.size(); ++j) lhs += px[j] * y[j];
    for (std::size_t j = 0; j < x.size(); ++j) rhs += x[j] * ty[j];
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300));
  }
  return {"adjoint identity", worst < 1e-10, std::to_string(pairs) + " pairs, max relative gap " + fmt(worst)};
}

std::vector<CheckResult> validate_system(const OpticalSystem& system) {
  return {check_minimum_deviation(), check_mapping_consistency(system), check_flux_conservation(system),
          check_determinism(system), check_adjoint(system)};
}

// ---------------------------------------------------------------------------
// slit test

double SlitReport::worst() const {
  double w = 0.0;
  for (const auto& r : regions) w = std::max(w, r.relative_rmse);
  return w;
}

namespace {

struct SlitSpectrum {
  int kind;
  double operator()(double wl) const {
    switch (kind) {
      case 0: return 0.1 + 0.8 * std::exp(-(wl - 530.0) * (wl - 530.0) / (2 * 35.0 * 35.0));  // green
      case 1: return 0.1 + 0.75 / (1.0 + std::exp(-(wl - 590.0) / 18.0));  // orange
      default: return 0.45;  // gray
    }
  }
};

}  // namespace

SlitReport slit_spectrometer_test(const OpticalSystem& system, const RenderConfig& config, int size,
                                  int reference_samples) {
  // each third keeps at least one interior row after the 2 + 2 pixel insets
  if (size < 27) throw DomainError("slit test needs a scene of at least 27 pixels");
  const auto wl = system.config().band_wavelengths();
  const int K = static_cast<int>(wl.size());
  SlitReport rep;
  rep.slit_column = size / 2;
  const int third = size / 3;
  for (int i = 0; i < 3; ++i) {
    SlitRegion r;
    r.row_begin = i * third + 2, r.row_end = (i + 1) * third - 2;
    rep.regions.push_back(r);
  }
  SpectralCube scene(size, size, wl, system.config().sensor.pitch_um);
  for (int i = 0; i < 3; ++i)
    for (int row = rep.regions[i].row_begin; row < rep.regions[i].row_end; ++row)
      for (int c = 0; c < size; ++c)
        for (int k = 0; k < K; ++k) scene.at(row, c, k) = SlitSpectrum{i}(wl[k]);
  const auto acq = render(code_scene(scene, Mask::slit(size, size, rep.slit_column)), system, config);
  const auto& g = acq.geometry;
  const SceneGrid grid = scene.grid();

  // reference: native spectra linearly upsampled over the rendered range
  const auto sub = oversampled_wavelengths(wl, config.oversampling);
  const double step = K > 1 ? (wl.back() - wl.front()) / (K - 1) : 1.0;
  const double lo = wl.front() - step / 2, hi = wl.back() + step / 2;
  const int M = reference_samples;
  auto native_value = [&](int region, double lambda) {
    const double t = std::clamp((lambda - wl.front()) / step, 0.0, double(K - 1));
    const int k = std::min(static_cast<int>(t), K - 2);
    const double a = scene.at(rep.regions[region].row_begin, rep.slit_column, k);
    const double b = scene.at(rep.regions[region].row_begin, rep.slit_column, k + 1);
    return a + (t - k) * (b - a);
  };
  constexpr int kSub = 4;  // positions per pixel side
  const auto pattern = hexapolar_pattern(3);
  const double na = system.config().numerical_aperture;
  const std::size_t pixels = std::size_t(g.height) * g.width;
  std::vector<std::vector<double>> images(M);
  parallel_for(M, [&](std::size_t j) {
    const double lambda = lo + (j + 0.5) * (hi - lo) / M;
    const auto n = system.indices(lambda);
    std::vector<double> img(pixels, 0.0);
    const double rays = kSub * kSub * double(pattern.size());
    for (int i = 0; i < 3; ++i) {
      const double flux = native_value(i, lambda) * K / M;
      for (int row = rep.regions[i].row_begin; row < rep.regions[i].row_end; ++row)
        for (int sy = 0; sy < kSub; ++sy)
          for (int sx = 0; sx < kSub; ++sx) {
            const Vec2 p = grid.point(row + (sy + 0.5) / kSub - 0.5, rep.slit_column + (sx + 0.5) / kSub - 0.5);
            const Vec3<double> origin(p.x, p.y, system.config().object_z_mm);
            const Frame f = frame_around(normalized(system.objective_center() - origin));
            for (const Vec2& d : pattern) {
              const auto hit = system.trace(Ray<double>{origin, cone_direction(f, d, na), lambda, true}, n);
              if (!hit) continue;
              const Vec2 px = g.to_pixels(*hit);
              const long x = std::lround(px.x), y = std::lround(px.y);
              if (x < 0 || y < 0 || x >= g.width || y >= g.height) continue;
              img[std::size_t(y) * g.width + x] += flux / rays;
            }
          }
    }
    images[j] = convolve(img, g.height, g.width,
                         airy_kernel(lambda, system.config().sensor.pitch_um, config.airy_diameter_at_520));
  });
  std::vector<double> reference(pixels, 0.0);
  for (const auto& img : images)
    for (std::size_t i = 0; i < pixels; ++i) reference[i] += img[i];

  // detector rows of each region's interior, from the slit chief rays at mid band
  const double mid = sub[sub.size() / 2];
  const auto n_mid = system.indices(mid);
  for (auto& r : rep.regions) {
    std::vector<int> rows;
    for (int row = r.row_begin + 2; row < r.row_end - 2; ++row) {
      const auto hit = system.trace(system.chief_ray(grid.point(row, rep.slit_column), mid), n_mid);
      if (hit) rows.push_back(static_cast<int>(std::lround(g.to_pixels(*hit).y)));
    }
    if (rows.empty()) throw DomainError("slit test: region rows miss the detector");
    r.rendered.assign(g.width, 0.0);
    r.reference.assign(g.width, 0.0);
    for (int y : rows)
      for (int x = 0; x < g.width; ++x) {
        r.rendered[x] += acq.at(y, x) / rows.size();
        r.reference[x] += reference[std::size_t(y) * g.width + x] / rows.size();
      }
    double num = 0.0, den = 0.0;
    for (int x = 0; x < g.width; ++x) {
      num += (r.rendered[x] - r.reference[x]) * (r.rendered[x] - r.reference[x]);
      den += r.reference[x] * r.reference[x];
    }
    r.relative_rmse = den > 0.0 ? std::sqrt(num / den) : std::numeric_limits<double>::infinity();
  }
  return rep;
}

}  // namespace cassi
