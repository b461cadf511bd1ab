#include <cmath>
#include <random>

#include "cassi/dual.hpp"
#include "doctest.h"

using cassi::Dual;

TEST_CASE("seed gives identity tangents") {
  const std::vector<double> v{2.0, -1.0, 0.5};
  const auto x = cassi::seed(v);
  REQUIRE(x.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(x[i].value() == v[i]);
    for (std::size_t j = 0; j < 3; ++j) CHECK(x[i].d(j) == (i == j ? 1.0 : 0.0));
  }
  CHECK_THROWS_AS(cassi::seed(std::vector<double>{}), std::domain_error);
}

TEST_CASE("seed examples") {
  {
    const auto x = cassi::seed(std::vector<double>{2.0});
    const Dual y = cassi::square(x[0]);
    CHECK(y.value() == 4.0);
    CHECK(y.d(0) == 4.0);
  }
  {
    const auto x = cassi::seed(std::vector<double>{3.0, 4.0});
    const Dual h = cassi::hypot(x[0], x[1]);
    CHECK(h.value() == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(h.d(0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(h.d(1) == doctest::Approx(0.8).epsilon(1e-15));
  }
  {
    const auto x = cassi::seed(std::vector<double>{0.5});
    CHECK(cassi::asin(x[0]).d(0) == doctest::Approx(1.0 / std::sqrt(0.75)).epsilon(1e-14));
  }
}

TEST_CASE("mixed widths are rejected") {
  const Dual a = Dual::variable(1.0, 0, 2);
  const Dual b = Dual::variable(1.0, 0, 3);
  CHECK_THROWS_AS(a + b, std::domain_error);
  CHECK_NOTHROW(a + 1.0);
}

TEST_CASE("abs, min, max conventions") {
  const Dual z = Dual::variable(0.0, 0, 1);
  CHECK(cassi::abs(z).d(0) == 0.0);
  const Dual a = Dual::variable(1.0, 0, 2);
  const Dual b = Dual::variable(1.0, 1, 2);
  CHECK(cassi::min(a, b).d(0) == 1.0);
  CHECK(cassi::max(a, b).d(0) == 1.0);
  CHECK(cassi::max(a, b + 1.0).d(1) == 1.0);
}

TEST_CASE("softplus is stable") {
  CHECK(cassi::softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(cassi::softplus(800.0) == doctest::Approx(800.0));
  CHECK(cassi::softplus(-800.0) >= 0.0);
  CHECK(std::isfinite(cassi::softplus(Dual::variable(800.0, 0, 1)).d(0)));
}

TEST_CASE("gradient_check examples") {
  const std::vector<double> p{1.0, 2.0};
  const double err = cassi::gradient_check([](std::span<const Dual> x) { return cassi::sin(x[0] * x[1]); }, p, 1e-6);
  CHECK(err < 1e-6);
  CHECK(cassi::gradient_check([](std::span<const Dual>) { return Dual(3.0); }, p, 1e-6) == 0.0);
  const double bad = cassi::gradient_check([](std::span<const Dual> x) { return cassi::log(x[0] - 1.0); }, p, 1e-6);
  CHECK(std::isinf(bad));
}

namespace {

// Analytic derivative oracles written independently of Dual.
struct Elementary {
  const char* name;
  Dual (*f)(const Dual&);
  double (*df)(double);
  double lo, hi;
};

}  // namespace

TEST_CASE("elementary derivatives match finite differences on random points") {
  const Elementary fns[] = {
      {"sin", [](const Dual& x) { return cassi::sin(x); }, [](double x) { return std::cos(x); }, -3, 3},
      {"cos", [](const Dual& x) { return cassi::cos(x); }, [](double x) { return -std::sin(x); }, -3, 3},
      {"tan", [](const Dual& x) { return cassi::tan(x); }, [](double x) { return 1.0 / (std::cos(x) * std::cos(x)); },
       -1.2, 1.2},
      {"asin", [](const Dual& x) { return cassi::asin(x); }, [](double x) { return 1.0 / std::sqrt(1 - x * x); }, -0.9,
       0.9},
      {"sqrt", [](const Dual& x) { return cassi::sqrt(x); }, [](double x) { return 0.5 / std::sqrt(x); }, 0.1, 10},
      {"exp", [](const Dual& x) { return cassi::exp(x); }, [](double x) { return std::exp(x); }, -3, 3},
      {"log", [](const Dual& x) { return cassi::log(x); }, [](double x) { return 1.0 / x; }, 0.1, 10},
      {"abs", [](const Dual& x) { return cassi::abs(x); }, [](double x) { return x > 0 ? 1.0 : -1.0; }, -3, 3},
      {"softplus", [](const Dual& x) { return cassi::softplus(x); },
       [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, -5, 5},
  };
  std::mt19937_64 rng(7);
  for (const auto& e : fns) {
    std::uniform_real_distribution<double> u(e.lo, e.hi);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      double x = u(rng);
      if (std::string_view(e.name) == "abs" && std::abs(x) < 1e-3) x = 0.5;
      const Dual y = e.f(Dual::variable(x, 0, 1));
      const double h = 1e-6 * std::max(1.0, std::abs(x));
      const double fd = (e.f(Dual(x + h)).value() - e.f(Dual(x - h)).value()) / (2 * h);
      worst = std::max(worst, std::abs(y.d(0) - fd) / std::max(1.0, std::abs(fd)));
      CHECK(y.d(0) == doctest::Approx(e.df(x)).epsilon(1e-12));
    }
    INFO(e.name);
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("binary operations match finite differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  auto fn = [](std::span<const Dual> x) {
    return cassi::atan2(x[0], x[1]) + x[0] / x[1] - x[0] * x[1] + cassi::min(x[0], x[1]) * cassi::max(x[0], x[1]);
  };
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> p{u(rng), u(rng)};
    if (std::abs(p[0] - p[1]) < 1e-3) continue;
    CHECK(cassi::gradient_check(fn, p, 1e-6) < 1e-6);
  }
}
