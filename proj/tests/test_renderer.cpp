#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "cassi/parallel.hpp"
#include "cassi/renderer.hpp"
#include "doctest.h"

using namespace cassi;

namespace {

std::vector<double> native_bands() { return build_reference_system(ReferenceSystem::AP).band_wavelengths(); }

SpectralCube random_cube(int h, int w, const std::vector<double>& wl, std::uint64_t seed) {
  SpectralCube c(h, w, wl);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : c.data) v = u(rng);
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cassi_test_" + name)).string();
}

const OpticalSystem& system_of(ReferenceSystem s) {
  static const OpticalSystem sp(build_reference_system(ReferenceSystem::SP)), ap(build_reference_system(ReferenceSystem::AP)),
      msp(build_reference_system(ReferenceSystem::mSP)), map(build_reference_system(ReferenceSystem::mAP));
  switch (s) {
    case ReferenceSystem::SP: return sp;
    case ReferenceSystem::AP: return ap;
    case ReferenceSystem::mSP: return msp;
    default: return map;
  }
}

}  // namespace

TEST_CASE("oversampling") {
  const auto wl = native_bands();
  const auto cube = random_cube(8, 6, wl, 1);
  const auto same = oversample_cube(cube, 1);
  CHECK(same.data == cube.data);
  CHECK(same.wavelengths == cube.wavelengths);

  const auto o = oversample_cube(cube, 4);
  REQUIRE(o.bands() == 112);
  CHECK(o.total() == doctest::Approx(cube.total()).epsilon(1e-12));
  for (int k = 0; k < 28; ++k)
    for (int j = 0; j < 4; ++j) CHECK(o.band_sum(4 * k + j) == doctest::Approx(cube.band_sum(k) / 4).epsilon(1e-12));
  // uniformly spaced centers, a quarter of the native spacing apart
  const double step = (650.0 - 450.0) / 27 / 4;
  for (int k = 1; k < 112; ++k) CHECK(o.wavelengths[k] - o.wavelengths[k - 1] == doctest::Approx(step));
  CHECK(o.wavelengths[1] + o.wavelengths[2] == doctest::Approx(2 * 450.0));

  SpectralCube flat(4, 4, wl);
  for (auto& v : flat.data) v = 3.0;
  const auto f = oversample_cube(flat, 4);
  for (double v : f.data) CHECK(v == 0.75);
  CHECK_THROWS_AS(oversample_cube(cube, 0), DomainError);
}

TEST_CASE("scene coding") {
  const auto cube = random_cube(6, 8, {500.0, 600.0}, 2);
  CHECK(code_scene(cube, Mask::filled(6, 8, true)).data == cube.data);
  CHECK(code_scene(cube, Mask::filled(6, 8, false)).total() == 0.0);
  SpectralCube flat(6, 8, {500.0, 600.0});
  for (auto& v : flat.data) v = 2.0;
  Mask checker = Mask::filled(6, 8, false);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 8; ++c) checker.data[r * 8 + c] = (r + c) % 2;
  const auto coded = code_scene(flat, checker);
  for (int k = 0; k < 2; ++k) CHECK(coded.band_sum(k) == flat.band_sum(k) / 2);
  CHECK_THROWS_AS(code_scene(cube, Mask::filled(8, 6, true)), DomainError);
}

TEST_CASE("random masks") {
  for (std::uint64_t seed : {0ull, 1ull, 77ull, 123456789ull})
    for (double ratio : {0.5, 0.3}) {
      const auto m = Mask::random(64, 64, ratio, seed);
      CHECK(std::abs(m.open_fraction() - ratio) < 0.02);
      for (auto v : m.data) CHECK((v == 0 || v == 1));
    }
  CHECK(Mask::random(16, 16, 0.5, 9).data == Mask::random(16, 16, 0.5, 9).data);
  CHECK(Mask::random(16, 16, 0.5, 9).data != Mask::random(16, 16, 0.5, 10).data);
  CHECK_THROWS_AS(Mask::random(4, 4, 1.5, 0), DomainError);
  const auto s = Mask::slit(10, 7, 3);
  CHECK(s.open_fraction() == doctest::Approx(1.0 / 7));
  CHECK(s.open(4, 3));
  CHECK(!s.open(4, 2));
}

TEST_CASE("airy kernel") {
  for (double wl : {450.0, 520.0, 650.0}) {
    const auto k = airy_kernel(wl, 10.0, 2.5);
    double sum = 0.0;
    for (double w : k.weights) sum += w;
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(k.truncation_radius_px / k.first_zero_radius_px == doctest::Approx(7.0155866698 / 3.8317059702));
    for (int dy = -k.radius; dy <= k.radius; ++dy)
      for (int dx = -k.radius; dx <= k.radius; ++dx) {
        CHECK(k.at(dy, dx) == doctest::Approx(k.at(-dx, dy)).epsilon(1e-12));
        CHECK(k.at(dy, dx) <= k.at(0, 0));
        // pixels entirely beyond the second zero carry nothing
        if (std::hypot(std::abs(dx) - 0.5, std::abs(dy) - 0.5) > k.truncation_radius_px) CHECK(k.at(dy, dx) == 0.0);
      }
  }
  CHECK(2 * airy_kernel(520.0, 10.0, 2.5).first_zero_radius_px == doctest::Approx(2.5));
  CHECK(2 * airy_kernel(650.0, 10.0, 2.5).first_zero_radius_px == doctest::Approx(3.125));
  CHECK_THROWS_AS(airy_kernel(0.0, 10.0, 2.5), DomainError);

  const auto k = airy_kernel(600.0, 10.0, 2.5);
  std::vector<double> img(15 * 15, 0.0);
  img[7 * 15 + 7] = 2.0;
  const auto out = convolve(img, 15, 15, k);
  for (int dy = -k.radius; dy <= k.radius; ++dy)
    for (int dx = -k.radius; dx <= k.radius; ++dx) CHECK(out[(7 + dy) * 15 + 7 + dx] == 2.0 * k.at(dy, dx));
}

TEST_CASE("render preconditions") {
  const auto& ap = system_of(ReferenceSystem::AP);
  SpectralCube wrong_pitch(4, 4, native_bands(), 5.0);
  CHECK_THROWS_AS(render(wrong_pitch, ap), DomainError);
  SpectralCube too_big(600, 4, native_bands(), 10.0);
  CHECK_THROWS_AS(render(too_big, ap), DomainError);
  SpectralCube negative(4, 4, native_bands(), 10.0);
  negative.data[3] = -1.0;
  CHECK_THROWS_AS(render(negative, ap), DomainError);
}

TEST_CASE("render determinism and linearity") {
  const auto& sys = system_of(ReferenceSystem::mSP);
  const std::vector<double> wl{480.0, 560.0, 620.0};
  const auto a = random_cube(12, 10, wl, 3), b = random_cube(12, 10, wl, 4);
  RenderConfig cfg;
  cfg.seed = 42;
  const auto ra = render(a, sys, cfg);
  const auto ra2 = render(a, sys, cfg);
  CHECK(ra.data == ra2.data);
  set_thread_count(3);
  const auto ra3 = render(a, sys, cfg);
  set_thread_count(0);
  CHECK(ra.data == ra3.data);

  cfg.seed = 43;
  CHECK(render(a, sys, cfg).data != ra.data);
  cfg.seed = 42;

  SpectralCube mix = a;
  for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = 2.0 * a.data[i] + 0.5 * b.data[i];
  const auto rm = render(mix, sys, cfg, ra.geometry);
  const auto rb = render(b, sys, cfg, ra.geometry);
  double peak = 0.0;
  for (double v : rm.data) peak = std::max(peak, v);
  for (std::size_t i = 0; i < rm.data.size(); ++i)
    CHECK(std::abs(rm.data[i] - (2.0 * ra.data[i] + 0.5 * rb.data[i])) <= 1e-12 * peak);
}

TEST_CASE("render conserves flux") {
  for (auto which : {ReferenceSystem::SP, ReferenceSystem::AP, ReferenceSystem::mAP}) {
    const auto& sys = system_of(which);
    const auto cube = random_cube(16, 16, native_bands(), 5);
    RenderConfig cfg;
    cfg.oversampling = 2;
    const auto acq = render(cube, sys, cfg);
    // standard error of the surviving-flux estimator, binomial per band
    double var = 0.0, expected = 0.0;
    const auto o = oversample_cube(cube, cfg.oversampling);
    for (int k = 0; k < o.bands(); ++k) {
      const double p = 1.0 - acq.dead_fraction[k];
      double sq = 0.0;
      for (int r = 0; r < o.height; ++r)
        for (int c = 0; c < o.width; ++c) sq += o.at(r, c, k) * o.at(r, c, k);
      var += sq * p * (1 - p) / cfg.rays_per_pixel;
      expected += o.band_sum(k);
    }
    CHECK(acq.warnings.empty());
    CHECK(std::abs(acq.total() - expected) <= 4 * std::sqrt(var) + 1e-9 * expected);
  }
}

TEST_CASE("flat field") {
  const auto& sys = system_of(ReferenceSystem::AP);
  SpectralCube cube(48, 48, {520.0});
  for (auto& v : cube.data) v = 1.0;
  RenderConfig cfg;
  cfg.oversampling = 1;
  const auto acq = render(cube, sys, cfg);
  const auto map = build_mapping(sys, cube.grid(), cube.wavelengths, acq.geometry);
  // detector pixel area per scene pixel from the mapping around the center
  const Vec2 x0 = map.at(24, 14, 0), x1 = map.at(24, 34, 0), y0 = map.at(14, 24, 0), y1 = map.at(34, 24, 0);
  const double area = (x1.x - x0.x) / 20 * (y1.y - y0.y) / 20;
  const Vec2 c = map.at(24, 24, 0);
  double sum = 0.0, sq = 0.0;
  int n = 0;
  for (int r = -10; r <= 10; ++r)
    for (int q = -10; q <= 10; ++q) {
      const double v = acq.at(static_cast<int>(std::lround(c.y)) + r, static_cast<int>(std::lround(c.x)) + q);
      sum += v, sq += v * v, ++n;
    }
  const double mean = sum / n, sd = std::sqrt(sq / n - mean * mean);
  // binomial model: a pixel gathers about one scene pixel's worth of rays
  const double se = std::sqrt(1.0 / cfg.rays_per_pixel);
  CHECK(sd < 3 * se);
  CHECK(std::abs(mean - 1.0 / area) < 3 * se / std::sqrt(double(n)));
}

TEST_CASE("impulse centroids follow the mapping") {
  const auto wl = native_bands();
  for (auto which : {ReferenceSystem::SP, ReferenceSystem::AP, ReferenceSystem::mSP, ReferenceSystem::mAP}) {
    CAPTURE(to_string(which));
    const auto& sys = system_of(which);
    const SceneGrid grid{32, 32, 0.01};
    RenderConfig cfg;
    const auto geom = render_geometry(sys, grid, wl, cfg);
    const auto map = build_mapping(sys, grid, wl, geom);
    std::mt19937_64 rng(static_cast<int>(which) + 10);
    for (int probe = 0; probe < 5; ++probe) {
      const int r = rng() % 32, c = rng() % 32, k = rng() % 28;
      SpectralCube imp(32, 32, wl);
      imp.at(r, c, k) = 1.0;
      const auto a = render(imp, sys, cfg, geom);
      double s = 0.0, sx = 0.0, sy = 0.0;
      for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) s += a.at(y, x), sx += a.at(y, x) * x, sy += a.at(y, x) * y;
      const Vec2 m = map.at(r, c, k);
      CHECK(std::hypot(sx / s - m.x, sy / s - m.y) < 0.5);
    }
  }
}

TEST_CASE("aligned band support") {
  const auto& sys = system_of(ReferenceSystem::SP);
  SpectralCube cube(20, 20, {450.0, 650.0});
  for (auto& v : cube.data) v = 1.0;
  RenderConfig cfg;
  cfg.oversampling = 1;
  const auto geom = render_geometry(sys, cube.grid(), cube.wavelengths, cfg);
  const auto map = build_mapping(sys, cube.grid(), cube.wavelengths, geom);
  for (int k = 0; k < 2; ++k) {
    SpectralCube band(20, 20, cube.wavelengths);
    for (int r = 0; r < 20; ++r)
      for (int c = 0; c < 20; ++c) band.at(r, c, k) = 1.0;
    const auto a = render(band, sys, cfg, geom);
    double lo = 1e9, hi = -1e9;
    for (int r = 0; r < 20; ++r)
      for (int c = 0; c < 20; ++c) lo = std::min(lo, map.at(r, c, k).x), hi = std::max(hi, map.at(r, c, k).x);
    const int reach = airy_kernel(cube.wavelengths[k], 10.0, 2.5).radius + 2;  // kernel plus pixel footprint and blur
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x)
        if (x < lo - reach || x > hi + reach) CHECK(a.at(y, x) == 0.0);
  }
}

TEST_CASE("dead-ray warning") {
  auto cfg_sys = build_reference_system(ReferenceSystem::SP);
  for (auto& e : cfg_sys.elements)
    if (auto* d = std::get_if<DoubletElement>(&e.kind)) d->aperture_mm = 1.2;
  const OpticalSystem sys(cfg_sys);
  SpectralCube cube(8, 8, {520.0});
  for (auto& v : cube.data) v = 1.0;
  RenderConfig cfg;
  cfg.oversampling = 1;
  const auto acq = render(cube, sys, cfg);
  CHECK(acq.dead_fraction[0] > 0.5);
  REQUIRE(!acq.warnings.empty());
  CHECK(acq.warnings[0].find("died") != std::string::npos);
}

TEST_CASE("containers round trip") {
  const auto cube = random_cube(5, 7, {450.0, 500.0, 650.0}, 8);
  const auto path = temp_path("cube.bin");
  save_cube(path, cube);
  const auto back = load_cube(path);
  CHECK(back.height == 5);
  CHECK(back.width == 7);
  CHECK(back.wavelengths == cube.wavelengths);
  for (std::size_t i = 0; i < cube.data.size(); ++i) CHECK(back.data[i] == static_cast<float>(cube.data[i]));
  CHECK_THROWS_AS(load_acquisition(path), ConfigError);

  // truncated and foreign files
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  }
  CHECK_THROWS_AS(load_cube(path), ConfigError);
  std::ofstream(path) << "not a cube";
  CHECK_THROWS_AS(load_cube(path), ConfigError);
  CHECK_THROWS_AS(load_cube(temp_path("missing.bin")), ConfigError);

  const auto& sys = system_of(ReferenceSystem::mAP);
  SpectralCube small(6, 6, {500.0, 600.0});
  for (auto& v : small.data) v = 1.0;
  RenderConfig cfg;
  cfg.oversampling = 1;
  const auto acq = render(small, sys, cfg);
  save_acquisition(path, acq);
  const auto a2 = load_acquisition(path);
  CHECK(a2.geometry == acq.geometry);
  CHECK(a2.system_name == "mAP");
  for (std::size_t i = 0; i < acq.data.size(); ++i) CHECK(a2.data[i] == static_cast<float>(acq.data[i]));

  auto map = build_mapping(sys, small.grid(), small.wavelengths, acq.geometry);
  map.invalidate(2, 3, 1);
  save_mapping(path, map);
  const auto m2 = load_mapping(path);
  CHECK(m2.geometry() == map.geometry());
  CHECK(m2.missing() == 1);
  CHECK(!m2.valid(2, 3, 1));
  CHECK(m2.at(4, 5, 0).x == doctest::Approx(map.at(4, 5, 0).x).epsilon(1e-6));
  CHECK(m2.system_name == "mAP");

  const auto mask = Mask::random(9, 11, 0.5, 3);
  save_mask_pgm(path, mask);
  CHECK(load_mask_pgm(path).data == mask.data);
  std::filesystem::remove(path);
}
