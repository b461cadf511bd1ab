#include <cmath>
#include <cstring>
#include <random>

#include "cassi/system.hpp"
#include "doctest.h"

using namespace cassi;
using V = Vec3<double>;

namespace {

// Exit direction of the 520 nm center-field chief ray.
V exit_direction(const OpticalSystem& s) {
  const auto out = s.trace_to_last_surface(s.chief_ray({0, 0}, 520.0));
  REQUIRE(out);
  return out->direction;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("thin lens examples") {
  const Ray<double> axial{V(0, 0, -10), V(0, 0, 1), 520.0, true};
  const auto out = thin_lens_refract(axial, 50.0);
  CHECK(out.alive);
  CHECK(out.direction.x == 0.0);
  CHECK(out.direction.z == 1.0);

  // parallel bundles converge at (f tan(theta), 0, f)
  for (double theta_deg : {0.0, 3.0, -7.5, 12.0}) {
    const double th = deg_to_rad(theta_deg);
    const V d(std::sin(th), 0, std::cos(th));
    for (double h : {-4.0, -1.0, 0.0, 2.5, 6.0}) {
      const Ray<double> r{V(h, 0.3, -5), d, 450.0, true};
      const auto o = thin_lens_refract(r, 50.0);
      REQUIRE(o.alive);
      const double t = (50.0 - o.origin.z) / o.direction.z;
      CHECK(o.origin.x + t * o.direction.x == doctest::Approx(50.0 * std::tan(th)).epsilon(1e-12));
      CHECK(o.origin.y + t * o.direction.y == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
  // achromatic
  Ray<double> red{V(1, 1, -5), normalized(V(0.1, 0.05, 1)), 650.0, true}, blue = red;
  blue.wavelength = 450.0;
  CHECK(thin_lens_refract(red, 50.0).direction.x == thin_lens_refract(blue, 50.0).direction.x);

  CHECK_THROWS_AS(thin_lens_refract(axial, 0.0), DomainError);
  const Ray<double> grazing{V(0, 0, -1), V(1, 0, 0), 520.0, true};
  CHECK_FALSE(thin_lens_refract(grazing, 50.0).alive);
}

TEST_CASE("reference system names") {
  CHECK(parse_reference_name("mSP") == ReferenceSystem::mSP);
  CHECK_THROWS_AS(parse_reference_name("XYZ"), ConfigError);
  CHECK_THROWS_AS(build_reference_system("ap"), ConfigError);
  for (auto s : {ReferenceSystem::SP, ReferenceSystem::AP, ReferenceSystem::mSP, ReferenceSystem::mAP})
    CHECK(parse_reference_name(to_string(s)) == s);
}

TEST_CASE("sensor geometry") {
  const auto c = build_reference_system("SP");
  CHECK(c.field_of_view_mm_x() == doctest::Approx(5.12));
  CHECK(c.field_of_view_mm_y() == doctest::Approx(5.12));
  const auto wl = c.band_wavelengths();
  REQUIRE(wl.size() == 28);
  CHECK(wl.front() == 450.0);
  CHECK(wl.back() == 650.0);
}

TEST_CASE("SP prism sits at minimum deviation for 520 nm") {
  const auto c = build_reference_system("SP");
  const Element* e = c.dispersive_element();
  REQUIRE(e);
  const double n = refractive_index(GlassCatalog::schott().at("N-BK7"), 520.0);
  const double expected = std::asin(n * std::sin(deg_to_rad(30.0)));
  // the chief ray after the collimator runs along +z; face 0 is tilted +30 deg in the element frame
  const Mat3<double> r = rotation_y(deg_to_rad(e->rotation_deg.y)) * rotation_y(deg_to_rad(30.0));
  const V normal = r * V(0, 0, 1);
  CHECK(std::acos(normal.z) == doctest::Approx(expected).epsilon(1e-12));

  // the internal ray then runs parallel to the base: exit incidence equals entry incidence
  const OpticalSystem s(c);
  const auto out = s.trace_to_last_surface(s.chief_ray({0, 0}, 520.0));
  REQUIRE(out);
}

TEST_CASE("spread of the reference systems") {
  for (const char* name : {"SP", "AP"}) {
    CAPTURE(name);
    const OpticalSystem s(build_reference_system(name));
    CHECK(spectral_spread_um(s) == doctest::Approx(kTargetSpreadUm).epsilon(0.01));
    const auto curve = spectral_spread_curve(s, {0, 0}, s.config().band_wavelengths());
    CHECK(curve.front().distance_um == 0.0);
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].dx_um > curve[i - 1].dx_um);
    // aligned: dispersion along x only
    CHECK(std::abs(curve.back().dy_um) < 1.0);
  }
}

TEST_CASE("AP is direct view") {
  const OpticalSystem s(build_reference_system("AP"));
  const V d = exit_direction(s);
  CHECK(std::atan2(std::hypot(d.x, d.y), d.z) < 1e-3);
  const auto hit = s.trace(s.chief_ray({0, 0}, 520.0));
  REQUIRE(hit);
  CHECK(std::hypot(hit->x, hit->y) < s.pitch_mm());
}

TEST_CASE("misaligned systems spread along y") {
  for (const char* name : {"mSP", "mAP"}) {
    CAPTURE(name);
    const OpticalSystem s(build_reference_system(name));
    const auto curve = spectral_spread_curve(s, {0, 0}, {450.0, 650.0});
    CHECK(std::abs(curve.back().dy_um) > 1.0);
  }
}

TEST_CASE("misaligned variants differ only by the dispersive element x rotation") {
  for (auto [a, m] : {std::pair{"SP", "mSP"}, std::pair{"AP", "mAP"}}) {
    CAPTURE(a);
    const auto ca = build_reference_system(a);
    auto cm = build_reference_system(m);
    REQUIRE(ca.elements.size() == cm.elements.size());
    for (std::size_t i = 0; i < ca.elements.size(); ++i) {
      const auto& ea = ca.elements[i];
      const auto& em = cm.elements[i];
      CHECK(ea.position_mm.x == em.position_mm.x);
      CHECK(ea.position_mm.z == em.position_mm.z);
      CHECK(ea.rotation_deg.y == em.rotation_deg.y);
      CHECK(ea.rotation_deg.z == em.rotation_deg.z);
      CHECK(em.rotation_deg.x - ea.rotation_deg.x == (ea.is_dispersive() ? kMisalignmentDeg : 0.0));
    }
    // undoing the rotation reproduces the aligned traces bit for bit
    for (auto& e : cm.elements)
      if (e.is_dispersive()) e.rotation_deg.x = 0.0;
    const OpticalSystem sa(ca), sm(cm);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.5, 2.5), w(450.0, 650.0);
    for (int i = 0; i < 50; ++i) {
      const Vec2 f{u(rng), u(rng)};
      const double wl = w(rng);
      const auto pa = sa.trace(sa.chief_ray(f, wl));
      const auto pm = sm.trace(sm.chief_ray(f, wl));
      REQUIRE(pa);
      REQUIRE(pm);
      CHECK(same_bits(pa->x, pm->x));
      CHECK(same_bits(pa->y, pm->y));
    }
  }
}

TEST_CASE("direct-view solve") {
  const auto p = reported_amici_design();
  CHECK(std::abs(amici_deviation_rad(p)) < 1e-12);
  CHECK(std::round(p.a1_deg * 10) / 10 == doctest::Approx(29.2));
  const double disp = rad_to_deg(amici_deviation_rad(p, 650.0) - amici_deviation_rad(p, 450.0));
  CHECK(std::abs(disp) == doctest::Approx(0.95).epsilon(0.01));
}

TEST_CASE("config round trip") {
  for (const char* name : {"SP", "AP", "mSP", "mAP"}) {
    CAPTURE(name);
    const auto c = build_reference_system(name);
    const std::string text = dump_system_config(c);
    const auto back = parse_system_config(text);
    CHECK(dump_system_config(back) == text);
    const OpticalSystem a(c), b(back);
    for (double wl : {450.0, 650.0}) {
      const auto pa = a.trace(a.chief_ray({1.0, -2.0}, wl));
      const auto pb = b.trace(b.chief_ray({1.0, -2.0}, wl));
      REQUIRE(pa);
      REQUIRE(pb);
      CHECK(pa->x == doctest::Approx(pb->x).epsilon(1e-12));
      CHECK(pa->y == doctest::Approx(pb->y).epsilon(1e-12));
    }
  }
}

TEST_CASE("config errors") {
  try {
    parse_system_config("{\n  \"name\": \"x\",\n  \"elements\": [,]\n}", "bad.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.json") != std::string::npos);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  auto c = build_reference_system("SP");
  std::string text = dump_system_config(c);
  const auto pos = text.find("\"N-BK7\"");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 7, "\"XX-99\"");
  try {
    parse_system_config(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("XX-99") != std::string::npos);
    CHECK(std::string(e.what()).find("elements") != std::string::npos);
  }
  c.elements.pop_back();
  CHECK_THROWS_AS(parse_system_config(dump_system_config(c)), ConfigError);
  CHECK_THROWS_AS(load_system_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("doublet data") {
  const auto& d = ac254_050_a();
  CHECK(d.part == "AC254-050-A");
  CHECK(d.radii_mm[0] == 33.3);
  CHECK(d.glasses[1].name == "N-SF10");
  CHECK_THROWS_AS(parse_doublet("{\"radii_mm\": [1, 2]}"), ConfigError);
}

#ifdef CASSI_SOURCE_DIR
TEST_CASE("shipped configs match the builder") {
  for (const char* name : {"SP", "AP", "mSP", "mAP"}) {
    CAPTURE(name);
    const auto file = load_system_config(std::string(CASSI_SOURCE_DIR) + "/configs/" + name + ".json");
    CHECK(dump_system_config(file) == dump_system_config(build_reference_system(name)));
  }
}
#endif
