// Multi-prism assemblies as ordered plane surfaces.
//
// Face i has a cumulative tilt psi_i about the element's y axis:
// psi_0 = 0, psi_{i+1} = psi_i + s_i * A_i with s_i = +1 for an apex
// toward +x and -1 for an inverted prism. Tilts are then centered so the
// first and last face are symmetric about the element axis. Faces cross the
// element z axis at the given center thicknesses, the whole stack centered
// on the element origin.
#pragma once

#include <numeric>
#include <vector>

#include "cassi/trace.hpp"

namespace cassi {

template <class T>
struct PrismGeometry {
  std::vector<T> apex;             // radians, one per prism
  std::vector<int> signs;          // +1 / -1 per prism
  std::vector<double> thickness;   // mm along the element axis, one per prism
  std::vector<Medium<T>> glasses;  // one per prism
  double aperture = 12.7;          // radial half-extent of every face (mm)
};

// Centered face tilts phi_i (radians), size apex.size() + 1.
template <class T>
std::vector<T> face_tilts(const std::vector<T>& apex, const std::vector<int>& signs) {
  if (apex.size() != signs.size() || apex.empty()) throw DomainError("prism: need one sign per apex");
  std::vector<T> psi{T(0.0)};
  for (std::size_t i = 0; i < apex.size(); ++i) psi.push_back(psi.back() + apex[i] * double(signs[i]));
  const T mid = (psi.front() + psi.back()) * 0.5;
  for (auto& p : psi) p = p - mid;
  return psi;
}

template <class T>
std::vector<Surface<T>> prism_surfaces(const PrismGeometry<T>& g, const Pose<T>& pose) {
  const std::size_t k = g.apex.size();
  if (g.thickness.size() != k || g.glasses.size() != k) throw DomainError("prism: apex/thickness/glass counts differ");
  for (const auto& a : g.apex)
    if (!(value_of(a) > 0.0)) throw DomainError("prism: apex angles must be positive");
  const auto phi = face_tilts(g.apex, g.signs);
  const double total = std::accumulate(g.thickness.begin(), g.thickness.end(), 0.0);
  std::vector<Surface<T>> out;
  out.reserve(k + 1);
  double z = -total / 2;
  for (std::size_t i = 0; i <= k; ++i) {
    const Pose<T> face{rotation_y(phi[i]), Vec3<T>(T(0.0), T(0.0), T(z))};
    const Medium<T> before = i == 0 ? Medium<T>::vacuum() : g.glasses[i - 1];
    const Medium<T> after = i == k ? Medium<T>::vacuum() : g.glasses[i];
    out.push_back(Surface<T>::plane(pose.compose(face), g.aperture, before, after));
    if (i < k) z += g.thickness[i];
  }
  return out;
}

}  // namespace cassi
