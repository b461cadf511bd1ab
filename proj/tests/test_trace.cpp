#include <cmath>
#include <random>

#include "cassi/trace.hpp"
#include "doctest.h"

using namespace cassi;
using S = Surface<double>;
using V = Vec3<double>;

namespace {

Pose<double> at_z(double z, double ry = 0.0) { return {rotation_y(ry), V(0, 0, z)}; }

Ray<double> axial(double z0 = -10.0) { return {V(0, 0, z0), V(0, 0, 1), 520.0, true}; }

// Prism with apex toward +x, entrance face through the origin.
std::vector<S> single_prism(double apex, const GlassModel& g) {
  const auto glass = Medium<double>::glass(g);
  return {S::plane(at_z(0.0, -apex / 2), 30.0, Medium<double>::vacuum(), glass),
          S::plane(at_z(10.0, apex / 2), 30.0, glass, Medium<double>::vacuum())};
}

double angle_between(const V& a, const V& b) { return std::atan2(norm(cross(a, b)), dot(a, b)); }

}  // namespace

TEST_CASE("intersect examples") {
  const auto plane = S::plane(at_z(0.0), std::numeric_limits<double>::infinity(), {}, {});
  auto hit = intersect(axial(), plane);
  REQUIRE(hit);
  CHECK(norm(hit->point) < 1e-15);
  CHECK(hit->distance == doctest::Approx(10.0));
  CHECK(hit->normal.z == -1.0);

  const auto sphere = S::sphere(-25.0, at_z(0.0), 12.7, {}, {});
  hit = intersect(axial(), sphere);
  REQUIRE(hit);
  CHECK(norm(hit->point) < 1e-12);
  CHECK(hit->normal.z == doctest::Approx(-1.0));

  const auto small = S::plane(at_z(0.0), 12.7, {}, {});
  CHECK_FALSE(intersect(Ray<double>{V(0, 30, -10), V(0, 0, 1)}, small));
  CHECK_FALSE(intersect(Ray<double>{V(0, 0, 10), V(0, 0, 1)}, plane));  // behind
  Ray<double> dead = axial();
  dead.alive = false;
  CHECK_FALSE(intersect(dead, plane));
  CHECK_THROWS_AS(S::sphere(0.0, at_z(0), 1.0, {}, {}), DomainError);
}

TEST_CASE("sphere hits lie on the surface") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double r : {25.0, -25.0, 100.0, -7.0}) {
    const auto s = S::sphere(r, Pose<double>{intrinsic_yxz(0.1, -0.2, 0.3), V(1, 2, 3)}, 5.0, {}, {});
    for (int i = 0; i < 200; ++i) {
      const V o = V(1 + 3 * u(rng), 2 + 3 * u(rng), -20);
      const V d = normalized(V(0.05 * u(rng), 0.05 * u(rng), 1.0));
      const auto hit = intersect(Ray<double>{o, d}, s);
      if (!hit) continue;
      const V local = s.pose.to_local(hit->point);
      const V c(0, 0, r);
      CHECK(std::abs(norm(local - c) - std::abs(r)) < 1e-9);
      CHECK(dot(hit->normal, d) < 0.0);
      CHECK(std::abs(local.z) < std::abs(r));  // vertex hemisphere
    }
  }
}

TEST_CASE("refract examples") {
  const V n(0, 0, -1);
  const double t1 = deg_to_rad(30.0);
  Ray<double> r{V(0, 0, 0), V(std::sin(t1), 0, std::cos(t1))};
  const auto out = refract(r, n, 1.0, 1.5);
  REQUIRE(out.alive);
  CHECK(rad_to_deg(std::asin(out.direction.x)) == doctest::Approx(19.47122).epsilon(1e-7));
  CHECK(norm(out.direction) == doctest::Approx(1.0).epsilon(1e-14));

  const auto normal_inc = refract(axial(), n, 1.3, 1.8);
  CHECK(normal_inc.direction.x == 0.0);
  CHECK(normal_inc.direction.z == doctest::Approx(1.0));

  const double t45 = deg_to_rad(45.0);
  const auto tir = refract(Ray<double>{V(0, 0, 0), V(std::sin(t45), 0, std::cos(t45))}, n, 1.5, 1.0);
  CHECK_FALSE(tir.alive);
}

TEST_CASE("trace_sequential basics") {
  CHECK(trace_sequential(axial(), std::span<const S>{}).ray.origin.z == -10.0);

  const auto bk7 = Medium<double>::glass(GlassCatalog::schott().at("N-BK7"));
  const std::vector<S> slab{S::plane(at_z(0.0), 10.0, {}, bk7), S::plane(at_z(5.0), 10.0, bk7, {})};
  const auto res = trace_sequential(axial(), std::span<const S>(slab));
  CHECK(res.ray.alive);
  CHECK(res.log.size() == 2);
  CHECK(res.ray.origin.x == 0.0);
  CHECK(res.ray.direction.z == doctest::Approx(1.0));
  CHECK(res.ray.origin.z == doctest::Approx(5.0));

  const std::vector<S> miss{S::plane(at_z(0.0), 10.0, {}, bk7), S::plane(at_z(5.0, 0.0), 1.0, bk7, {})};
  const auto m = trace_sequential(Ray<double>{V(3, 0, -10), V(0, 0, 1)}, std::span<const S>(miss));
  CHECK_FALSE(m.ray.alive);
  CHECK(m.log.size() == 1);
}

TEST_CASE("prism minimum deviation matches the closed form") {
  const auto& bk7 = GlassCatalog::schott().at("N-BK7");
  const double apex = deg_to_rad(60.0);
  const auto prism = single_prism(apex, bk7);
  for (double wl : {450.0, kLambdaD, 650.0}) {
    const double n = refractive_index(bk7, wl);
    const double theta = std::asin(n * std::sin(apex / 2));
    const double expected = 2 * theta - apex;
    auto deviation_at = [&](double incidence) {
      const V d(std::sin(incidence - apex / 2), 0, std::cos(incidence - apex / 2));
      const auto res = trace_sequential(Ray<double>{V(0, 0, 0) - d * 10.0, d, wl}, std::span<const S>(prism));
      REQUIRE(res.ray.alive);
      return angle_between(d, res.ray.direction);
    };
    CHECK(std::abs(deviation_at(theta) - expected) < 1e-9);
    // sweep +-0.5 deg in 0.01 deg steps: the minimum sits at the analytic incidence
    double best = 1e9, best_inc = 0;
    for (int k = -50; k <= 50; ++k) {
      const double inc = theta + deg_to_rad(0.01 * k);
      const double dev = deviation_at(inc);
      if (dev < best) best = dev, best_inc = inc;
    }
    CHECK(std::abs(best_inc - theta) <= deg_to_rad(0.01) / 2);
  }
}

TEST_CASE("refraction planarity and reversibility on random rays") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto& cat = GlassCatalog::schott();
  const auto g1 = Medium<double>::glass(cat.at("N-SK2"));
  const auto g2 = Medium<double>::glass(cat.at("N-SF10"));
  const std::vector<S> forward{
      S::plane(Pose<double>{intrinsic_yxz(0.05, 0.3, 0.0), V(0, 0, 0)}, 20.0, {}, g1),
      S::sphere(-40.0, Pose<double>{intrinsic_yxz(0.0, -0.1, 0.0), V(0, 0, 6)}, 20.0, g1, g2),
      S::plane(Pose<double>{intrinsic_yxz(-0.02, 0.2, 0.1), V(0, 0, 12)}, 20.0, g2, {}),
  };
  std::vector<S> reversed(forward.rbegin(), forward.rend());
  for (auto& s : reversed) std::swap(s.before, s.after);

  int survivors = 0;
  double worst_planar = 0.0, worst_return = 0.0;
  for (int i = 0; i < 10000; ++i) {
    // planarity of one refraction
    const V normal = normalized(V(0.3 * u(rng), 0.3 * u(rng), -1.0));
    const V dir = normalized(V(0.5 * u(rng), 0.5 * u(rng), 1.0));
    const auto r = refract(Ray<double>{V(0, 0, 0), dir}, normal, 1.0 + 0.8 * std::abs(u(rng)), 1.0 + 0.8 * std::abs(u(rng)));
    if (r.alive) worst_planar = std::max(worst_planar, std::abs(dot(cross(dir, r.direction), normal)));

    const V o(2 * u(rng), 2 * u(rng), -15.0);
    const V d = normalized(V(0.1 * u(rng), 0.1 * u(rng), 1.0));
    const double wl = 450.0 + 100.0 * (u(rng) + 1.0);
    const auto fwd = trace_sequential(Ray<double>{o, d, wl}, std::span<const S>(forward));
    if (!fwd.ray.alive) continue;
    ++survivors;
    const Ray<double> back{fwd.ray.origin + fwd.ray.direction * 10.0, -fwd.ray.direction, wl};
    const auto rev = trace_sequential(back, std::span<const S>(reversed));
    REQUIRE(rev.ray.alive);
    // the returning ray passes through the original origin
    const V w = o - rev.ray.origin;
    const double along = dot(w, rev.ray.direction);
    worst_return = std::max(worst_return, norm(w - rev.ray.direction * along));
    CHECK(along > 0.0);
  }
  CHECK(survivors > 9000);
  CHECK(worst_planar < 1e-12);
  CHECK(worst_return < 1e-8);
}

TEST_CASE("dual trace with zero tangents is bit-identical") {
  const auto& bk7 = GlassCatalog::schott().at("N-BK7");
  const auto prism = single_prism(deg_to_rad(60.0), bk7);
  std::vector<Surface<Dual>> dual_prism;
  for (const auto& s : prism) {
    Surface<Dual> t;
    t.shape = s.shape;
    t.radius = s.radius;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.pose.rotation.m[i][j] = s.pose.rotation.m[i][j];
    t.pose.translation = Vec3<Dual>(s.pose.translation);
    t.aperture = s.aperture;
    t.before = s.before.is_vacuum() ? Medium<Dual>::vacuum() : Medium<Dual>::glass(bk7);
    t.after = s.after.is_vacuum() ? Medium<Dual>::vacuum() : Medium<Dual>::glass(bk7);
    dual_prism.push_back(t);
  }
  const V d = normalized(V(0.4, 0.01, 1.0));
  const auto a = trace_sequential(Ray<double>{V(0, 0, -5), d, 500.0}, std::span<const S>(prism));
  const auto b = trace_sequential(Ray<Dual>{Vec3<Dual>(V(0, 0, -5)), Vec3<Dual>(d), 500.0},
                                  std::span<const Surface<Dual>>(dual_prism));
  CHECK(a.ray.direction.x == b.ray.direction.x.value());
  CHECK(a.ray.direction.y == b.ray.direction.y.value());
  CHECK(a.ray.origin.z == b.ray.origin.z.value());
}
