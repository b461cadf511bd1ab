// Pupil and pixel sampling patterns.
#pragma once

#include <cmath>
#include <vector>

#include "cassi/system.hpp"

namespace cassi {

// Points of a hexapolar pattern on the unit disk: the center plus rings
// k = 1..rings of 6k points at radius k / rings.
inline std::vector<Vec2> hexapolar_pattern(int rings, double rotation = 0.0) {
  std::vector<Vec2> pts{{0.0, 0.0}};
  for (int k = 1; k <= rings; ++k) {
    const double r = double(k) / rings;
    for (int j = 0; j < 6 * k; ++j) {
      const double a = rotation + 2.0 * kPi * j / (6 * k);
      pts.push_back({r * std::cos(a), r * std::sin(a)});
    }
  }
  return pts;
}

inline int hexapolar_size(int rings) { return 1 + 3 * rings * (rings + 1); }

// Fewest rings whose pattern holds at least `count` points.
inline int hexapolar_rings_for(int count) {
  int rings = 0;
  while (hexapolar_size(rings) < count) ++rings;
  return rings;
}

// Orthonormal frame (u, v, axis) around a unit axis.
struct Frame {
  Vec3<double> u, v, w;
};
inline Frame frame_around(const Vec3<double>& axis) {
  const Vec3<double> helper = std::abs(axis.y) < 0.9 ? Vec3<double>(0, 1, 0) : Vec3<double>(1, 0, 0);
  const Vec3<double> u = normalized(cross(helper, axis));
  return {u, cross(axis, u), axis};
}

// Direction inside a cone of half-angle asin(sin_max) around the frame axis
// for a point of the unit disk.
inline Vec3<double> cone_direction(const Frame& f, Vec2 disk, double sin_max) {
  const double a = disk.x * sin_max, b = disk.y * sin_max;
  return f.u * a + f.v * b + f.w * std::sqrt(std::max(0.0, 1.0 - a * a - b * b));
}

}  // namespace cassi
