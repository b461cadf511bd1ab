#include "cassi/dual.hpp"

#include <limits>

namespace cassi {

std::vector<Dual> seed(std::span<const double> values) {
  if (values.empty()) throw std::domain_error("seed: need at least one value");
  std::vector<Dual> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back(Dual::variable(values[i], i, values.size()));
  return out;
}

double gradient_check(const std::function<Dual(std::span<const Dual>)>& f, std::span<const double> point,
                      double step) {
  const auto vars = seed(point);
  const Dual at = f(vars);
  if (!std::isfinite(at.value())) return std::numeric_limits<double>::infinity();

  std::vector<Dual> probe(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double hi = f(probe).value();
    probe[i] = point[i] - step;
    const double lo = f(probe).value();
    probe[i] = point[i];
    if (!std::isfinite(hi) || !std::isfinite(lo)) return std::numeric_limits<double>::infinity();
    const double fd = (hi - lo) / (2.0 * step);
    worst = std::max(worst, std::abs(at.d(i) - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

}  // namespace cassi
