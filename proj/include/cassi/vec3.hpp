// Small fixed-size linear algebra templated on the scalar so that the same
// geometry runs with double and Dual.
#pragma once

#include <array>
#include <cmath>

#include "cassi/dual.hpp"

namespace cassi {

template <class T>
struct Vec3 {
  T x{}, y{}, z{};

  Vec3() = default;
  Vec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}
  template <class U>
  explicit Vec3(const Vec3<U>& o) : x(o.x), y(o.y), z(o.z) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(const T& s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(const T& s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { return *this = *this + o; }
  Vec3& operator-=(const Vec3& o) { return *this = *this - o; }
};

template <class T>
Vec3<T> operator*(const T& s, const Vec3<T>& v) {
  return v * s;
}

template <class T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <class T>
Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <class T>
T norm(const Vec3<T>& v) {
  using std::sqrt;
  return sqrt(dot(v, v));
}

template <class T>
Vec3<T> normalized(const Vec3<T>& v) {
  return v / norm(v);
}

template <class T>
Vec3<double> value_of(const Vec3<T>& v) {
  return {value_of(v.x), value_of(v.y), value_of(v.z)};
}

// Row-major 3x3 matrix.
template <class T>
struct Mat3 {
  std::array<std::array<T, 3>, 3> m{};

  static Mat3 identity() {
    Mat3 r;
    r.m[0][0] = T(1.0);
    r.m[1][1] = T(1.0);
    r.m[2][2] = T(1.0);
    return r;
  }

  Vec3<T> operator*(const Vec3<T>& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z, m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j] + m[i][2] * o.m[2][j];
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }

  Vec3<T> column(int j) const { return {m[0][j], m[1][j], m[2][j]}; }
};

template <class T>
Mat3<T> rotation_x(const T& a) {
  using std::cos;
  using std::sin;
  Mat3<T> r = Mat3<T>::identity();
  r.m[1][1] = cos(a);
  r.m[1][2] = -sin(a);
  r.m[2][1] = sin(a);
  r.m[2][2] = cos(a);
  return r;
}

template <class T>
Mat3<T> rotation_y(const T& a) {
  using std::cos;
  using std::sin;
  Mat3<T> r = Mat3<T>::identity();
  r.m[0][0] = cos(a);
  r.m[0][2] = sin(a);
  r.m[2][0] = -sin(a);
  r.m[2][2] = cos(a);
  return r;
}

template <class T>
Mat3<T> rotation_z(const T& a) {
  using std::cos;
  using std::sin;
  Mat3<T> r = Mat3<T>::identity();
  r.m[0][0] = cos(a);
  r.m[0][1] = -sin(a);
  r.m[1][0] = sin(a);
  r.m[1][1] = cos(a);
  return r;
}

// Element orientation: intrinsic rotation about y, then the new local x, then
// the new local z (R = Ry * Rx * Rz). Angles in radians.
template <class T>
Mat3<T> intrinsic_yxz(const T& about_x, const T& about_y, const T& about_z) {
  return rotation_y(about_y) * rotation_x(about_x) * rotation_z(about_z);
}

// Rigid transform local -> parent: p_parent = rotation * p_local + translation.
template <class T>
struct Pose {
  Mat3<T> rotation = Mat3<T>::identity();
  Vec3<T> translation{};

  Vec3<T> to_parent(const Vec3<T>& p) const { return rotation * p + translation; }
  Vec3<T> dir_to_parent(const Vec3<T>& d) const { return rotation * d; }
  Vec3<T> to_local(const Vec3<T>& p) const { return rotation.transposed() * (p - translation); }
  Vec3<T> dir_to_local(const Vec3<T>& d) const { return rotation.transposed() * d; }

  // this ∘ inner: maps inner-local coordinates to this pose's parent.
  Pose compose(const Pose& inner) const {
    return {rotation * inner.rotation, rotation * inner.translation + translation};
  }
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double deg_to_rad(double d) { return d * kPi / 180.0; }
inline constexpr double rad_to_deg(double r) { return r * 180.0 / kPi; }

}  // namespace cassi
