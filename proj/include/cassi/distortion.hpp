// Ideal-grid distortion shared by the analysis and the prism designer.
//
// For traced positions P(k, p) of field points s_p at wavelengths k, the
// ideal position is (mx s_p.x, my s_p.y) + c_k where c_k is the center field
// position at wavelength k and mx, my the least-squares magnifications along
// each detector axis at the reference wavelength:
//   mx = sum_p (P(ref, p) - c_ref).x s_p.x / sum_p s_p.x^2   (my alike)
// Distortion is eps(k, p) = |P(k, p) - ideal(k, p)|. Separate axis
// magnifications absorb the anamorphic scaling of prisms, which is a
// uniform stretch rather than a distortion.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "cassi/dual.hpp"
#include "cassi/errors.hpp"

namespace cassi {

inline constexpr double kCentralWavelength = 520.0;

template <class T>
struct Point2 {
  T x{}, y{};
};

template <class T>
struct DistortionFit {
  Point2<T> magnification{};
  std::vector<std::vector<std::optional<Point2<T>>>> displacement;  // [k][p], nullopt for dead rays
  std::size_t missing = 0;
};

// `traced[k][p]` holds positions (any length unit, same as `field`).
template <class T>
DistortionFit<T> fit_distortion(const std::vector<std::vector<std::optional<Point2<T>>>>& traced,
                                const std::vector<Point2<double>>& field, std::size_t center, std::size_t ref) {
  if (traced.empty() || ref >= traced.size() || center >= field.size())
    throw DomainError("fit_distortion: bad reference indices");
  for (const auto& row : traced) {
    if (row.size() != field.size()) throw DomainError("fit_distortion: field size mismatch");
    if (!row[center]) throw DomainError("fit_distortion: center-field chief ray is dead");
  }
  const Point2<T> c_ref = *traced[ref][center];
  T num_x(0.0), num_y(0.0);
  double den_x = 0.0, den_y = 0.0;
  for (std::size_t p = 0; p < field.size(); ++p) {
    if (!traced[ref][p]) continue;
    num_x = num_x + (traced[ref][p]->x - c_ref.x) * field[p].x;
    num_y = num_y + (traced[ref][p]->y - c_ref.y) * field[p].y;
    den_x += field[p].x * field[p].x;
    den_y += field[p].y * field[p].y;
  }
  if (den_x == 0.0 || den_y == 0.0) throw DomainError("fit_distortion: field grid must extend along both axes");
  DistortionFit<T> out;
  out.magnification = {num_x / den_x, num_y / den_y};
  out.displacement.resize(traced.size());
  for (std::size_t k = 0; k < traced.size(); ++k) {
    const Point2<T> c = *traced[k][center];
    for (std::size_t p = 0; p < field.size(); ++p) {
      if (!traced[k][p]) {
        out.displacement[k].push_back(std::nullopt);
        ++out.missing;
        continue;
      }
      out.displacement[k].push_back(Point2<T>{traced[k][p]->x - (out.magnification.x * field[p].x + c.x),
                                              traced[k][p]->y - (out.magnification.y * field[p].y + c.y)});
    }
  }
  return out;
}

template <class T>
T magnitude(const Point2<T>& d) {
  using std::sqrt;
  // |d| has no derivative at 0; use 0 there
  if (value_of(d.x) == 0.0 && value_of(d.y) == 0.0) return T(0.0);
  return sqrt(d.x * d.x + d.y * d.y);
}

}  // namespace cassi
