// Forward-mode dual numbers.
//
// A Dual carries a value and up to kMaxTangents partial derivatives. Width 0
// marks a constant; binary operations between a constant and a seeded value
// take the seeded width. Mixing two different non-zero widths is an error.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace cassi {

class Dual {
 public:
  static constexpr std::size_t kMaxTangents = 8;

  Dual() = default;
  Dual(double value) : value_(value) {}  // NOLINT(google-explicit-constructor)

  static Dual variable(double value, std::size_t index, std::size_t width) {
    if (width == 0 || width > kMaxTangents || index >= width)
      throw std::domain_error("Dual::variable: bad tangent index/width");
    Dual d(value);
    d.width_ = static_cast<unsigned char>(width);
    d.tangent_[index] = 1.0;
    return d;
  }

  double value() const { return value_; }
  std::size_t width() const { return width_; }
  double d(std::size_t i) const { return i < width_ ? tangent_[i] : 0.0; }
  std::span<const double> tangents() const { return {tangent_.data(), width_}; }

  // value and tangent of f(x) given f(x) and f'(x).
  Dual chain(double fx, double dfx) const {
    Dual r(fx);
    r.width_ = width_;
    for (std::size_t i = 0; i < width_; ++i) r.tangent_[i] = dfx * tangent_[i];
    return r;
  }

  Dual operator-() const { return chain(-value_, -1.0); }

  Dual& operator+=(const Dual& o) { return *this = *this + o; }
  Dual& operator-=(const Dual& o) { return *this = *this - o; }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }
  Dual& operator/=(const Dual& o) { return *this = *this / o; }

  friend Dual operator+(const Dual& a, const Dual& b) { return combine(a, b, a.value_ + b.value_, 1.0, 1.0); }
  friend Dual operator-(const Dual& a, const Dual& b) { return combine(a, b, a.value_ - b.value_, 1.0, -1.0); }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return combine(a, b, a.value_ * b.value_, b.value_, a.value_);
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    const double q = a.value_ / b.value_;
    return combine(a, b, q, 1.0 / b.value_, -q / b.value_);
  }

  friend bool operator<(const Dual& a, const Dual& b) { return a.value_ < b.value_; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.value_ > b.value_; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.value_ <= b.value_; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.value_ >= b.value_; }
  friend bool operator==(const Dual& a, const Dual& b) { return a.value_ == b.value_; }

 private:
  // r = f(a, b) with partials da, db.
  static Dual combine(const Dual& a, const Dual& b, double value, double da, double db) {
    if (a.width_ && b.width_ && a.width_ != b.width_)
      throw std::domain_error("Dual: mixed tangent widths");
    Dual r(value);
    r.width_ = std::max(a.width_, b.width_);
    for (std::size_t i = 0; i < r.width_; ++i)
      r.tangent_[i] = da * (i < a.width_ ? a.tangent_[i] : 0.0) + db * (i < b.width_ ? b.tangent_[i] : 0.0);
    return r;
  }

  double value_ = 0.0;
  std::array<double, kMaxTangents> tangent_{};
  unsigned char width_ = 0;
};

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value(); }

// Scalar helpers used by code templated on double / Dual.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double square(double x) { return x * x; }

inline Dual sin(const Dual& x) { return x.chain(std::sin(x.value()), std::cos(x.value())); }
inline Dual cos(const Dual& x) { return x.chain(std::cos(x.value()), -std::sin(x.value())); }
inline Dual tan(const Dual& x) {
  const double t = std::tan(x.value());
  return x.chain(t, 1.0 + t * t);
}
inline Dual asin(const Dual& x) {
  return x.chain(std::asin(x.value()), 1.0 / std::sqrt(1.0 - x.value() * x.value()));
}
inline Dual acos(const Dual& x) {
  return x.chain(std::acos(x.value()), -1.0 / std::sqrt(1.0 - x.value() * x.value()));
}
inline Dual atan(const Dual& x) { return x.chain(std::atan(x.value()), 1.0 / (1.0 + x.value() * x.value())); }
inline Dual sqrt(const Dual& x) {
  const double s = std::sqrt(x.value());
  return x.chain(s, 0.5 / s);
}
inline Dual exp(const Dual& x) {
  const double e = std::exp(x.value());
  return x.chain(e, e);
}
inline Dual log(const Dual& x) { return x.chain(std::log(x.value()), 1.0 / x.value()); }
inline Dual log1p(const Dual& x) { return x.chain(std::log1p(x.value()), 1.0 / (1.0 + x.value())); }
inline Dual square(const Dual& x) { return x * x; }

// |x| has derivative 0 at x = 0.
inline Dual abs(const Dual& x) {
  const double v = x.value();
  return x.chain(std::abs(v), v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
}

// Ties select the first argument.
inline Dual min(const Dual& a, const Dual& b) { return b.value() < a.value() ? b : a; }
inline Dual max(const Dual& a, const Dual& b) { return b.value() > a.value() ? b : a; }

inline Dual atan2(const Dual& y, const Dual& x) {
  const double r2 = x.value() * x.value() + y.value() * y.value();
  // value of the second term is exactly zero; it only carries the tangents
  return Dual(std::atan2(y.value(), x.value())) + (y * x.value() - x * y.value()) / r2;
}

inline Dual hypot(const Dual& a, const Dual& b) { return sqrt(a * a + b * b); }

inline Dual softplus(const Dual& x) {
  const double v = x.value();
  const double s = 1.0 / (1.0 + std::exp(-v));  // logistic
  return x.chain(softplus(v), s);
}

// k independent variables with identity tangents.
std::vector<Dual> seed(std::span<const double> values);

// Largest |g_dual - g_fd| / max(1, |g_fd|) over the components, using central
// differences with the given step. Returns +inf when f is non-finite at a probe.
double gradient_check(const std::function<Dual(std::span<const Dual>)>& f, std::span<const double> point,
                      double step);

}  // namespace cassi
