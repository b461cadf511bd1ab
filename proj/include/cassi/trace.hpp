// Sequential ray tracing through planes and spheres.
//
// Every function is templated on the scalar so a trace can be differentiated
// with Dual. Units: mm for lengths, nm for wavelengths.
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cassi/glass.hpp"
#include "cassi/vec3.hpp"

namespace cassi {

// Hits closer than this along the ray are treated as self-intersections.
inline constexpr double kIntersectionTolerance = 1e-9;

template <class T>
struct Ray {
  Vec3<T> origin;
  Vec3<T> direction;  // unit length
  double wavelength = 520.0;
  bool alive = true;
};

enum class SurfaceShape { Plane, Sphere };

// A refracting surface. In its local frame the vertex is at the origin and
// the surface axis is +z; a sphere's center sits at (0, 0, radius).
template <class T>
struct Surface {
  SurfaceShape shape = SurfaceShape::Plane;
  T radius{};  // spheres only, signed, non-zero
  Pose<T> pose;
  double aperture = std::numeric_limits<double>::infinity();  // radial half-extent
  Medium<T> before = Medium<T>::vacuum();
  Medium<T> after = Medium<T>::vacuum();

  static Surface plane(const Pose<T>& pose, double aperture, Medium<T> before, Medium<T> after) {
    return {SurfaceShape::Plane, T(0.0), pose, aperture, std::move(before), std::move(after)};
  }
  static Surface sphere(const T& radius, const Pose<T>& pose, double aperture, Medium<T> before, Medium<T> after) {
    if (value_of(radius) == 0.0) throw DomainError("sphere radius must be non-zero");
    return {SurfaceShape::Sphere, radius, pose, aperture, std::move(before), std::move(after)};
  }
};

template <class T>
struct Hit {
  Vec3<T> point;
  Vec3<T> normal;  // unit, facing the incoming ray
  T distance;
};

template <class T>
std::optional<Hit<T>> intersect(const Ray<T>& ray, const Surface<T>& s) {
  using std::sqrt;
  if (!ray.alive) return std::nullopt;
  const Vec3<T> o = s.pose.to_local(ray.origin);
  const Vec3<T> d = s.pose.dir_to_local(ray.direction);

  T t{};
  Vec3<T> p, n;
  if (s.shape == SurfaceShape::Plane) {
    if (value_of(d.z) == 0.0) return std::nullopt;
    t = -o.z / d.z;
    if (!(value_of(t) > kIntersectionTolerance)) return std::nullopt;
    p = o + d * t;
    p.z = T(0.0);
    n = Vec3<T>(T(0.0), T(0.0), T(1.0));
  } else {
    // |o + t d - c|^2 = R^2 with c = (0, 0, R)
    const Vec3<T> c(T(0.0), T(0.0), s.radius);
    const Vec3<T> oc = o - c;
    const T b = dot(oc, d);
    const T q = dot(oc, oc) - s.radius * s.radius;
    const T disc = b * b - q;
    if (value_of(disc) < 0.0) return std::nullopt;
    const T root = sqrt(disc);
    const T t1 = -b - root;
    const T t2 = -b + root;
    // Prefer the smallest positive root on the vertex hemisphere, where a lens
    // surface physically exists; fall back to the smallest positive root.
    auto on_vertex_side = [&](const T& tt) {
      const Vec3<T> h = o + d * tt;
      return value_of(h.z - s.radius) * value_of(s.radius) < 0.0;
    };
    std::optional<T> chosen;
    for (const T& cand : {t1, t2})
      if (value_of(cand) > kIntersectionTolerance && on_vertex_side(cand)) {
        chosen = cand;
        break;
      }
    if (!chosen)
      for (const T& cand : {t1, t2})
        if (value_of(cand) > kIntersectionTolerance) {
          chosen = cand;
          break;
        }
    if (!chosen) return std::nullopt;
    t = *chosen;
    p = o + d * t;
    n = (p - c) / s.radius;  // unit, points toward -z at the vertex for R > 0
    n = -n;
  }
  const double r2 = value_of(p.x) * value_of(p.x) + value_of(p.y) * value_of(p.y);
  if (r2 > s.aperture * s.aperture) return std::nullopt;
  if (value_of(dot(n, d)) > 0.0) n = -n;
  return Hit<T>{s.pose.to_parent(p), s.pose.dir_to_parent(n), t};
}

// Vector Snell law. `normal` must face the incoming ray. Total internal
// reflection returns the ray with alive = false.
template <class T>
Ray<T> refract(const Ray<T>& ray, const Vec3<T>& normal, const T& n1, const T& n2) {
  using std::sqrt;
  Ray<T> out = ray;
  const T eta = n1 / n2;
  const T cos_i = -dot(normal, ray.direction);
  const T k = T(1.0) - eta * eta * (T(1.0) - cos_i * cos_i);
  if (value_of(k) < 0.0) {
    out.alive = false;
    return out;
  }
  out.direction = ray.direction * eta + normal * (eta * cos_i - sqrt(k));
  return out;
}

template <class T>
struct SurfaceHit {
  Vec3<T> point;
  Vec3<T> normal;
  Vec3<T> incident;  // direction before refraction
  T n_before{};
  T n_after{};
};

template <class T>
struct TraceResult {
  Ray<T> ray;
  std::vector<SurfaceHit<T>> log;
};

// Intersect and refract surface by surface. A miss or TIR kills the ray; the
// log then ends at the last surface reached (a TIR surface is logged, a
// missed one is not).
template <class T>
TraceResult<T> trace_sequential(const Ray<T>& input, std::span<const Surface<T>> surfaces) {
  TraceResult<T> result{input, {}};
  Ray<T>& ray = result.ray;
  result.log.reserve(surfaces.size());
  for (const auto& s : surfaces) {
    if (!ray.alive) break;
    const auto hit = intersect(ray, s);
    if (!hit) {
      ray.alive = false;
      break;
    }
    const T n1 = s.before.index(ray.wavelength);
    const T n2 = s.after.index(ray.wavelength);
    result.log.push_back({hit->point, hit->normal, ray.direction, n1, n2});
    ray.origin = hit->point;
    ray = refract(ray, hit->normal, n1, n2);
  }
  return result;
}

}  // namespace cassi
