#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "biphoton/quadrature.hpp"

namespace bp = biphoton;

TEST(Quadrature, PolynomialIsExact) {
  auto r = bp::integrate_adaptive([](double x) { return 3.0 * x * x - 2.0 * x + 1.0; }, -1.0, 2.0);
  EXPECT_NEAR(r.value, 9.0 - 3.0 + 3.0, 1e-13);
  EXPECT_EQ(r.panels, 1u);
}

TEST(Quadrature, GaussianAndOscillatory) {
  const double pi = std::numbers::pi;
  auto g = bp::integrate_adaptive([](double x) { return std::exp(-x * x); }, -10.0, 10.0);
  EXPECT_NEAR(g.value, std::sqrt(pi), 1e-12);

  // Int exp(-x^2) cos(b x) = sqrt(pi) exp(-b^2/4)
  const double b = 6.0;
  auto c = bp::integrate_adaptive(
      [b](double x) { return std::exp(-x * x) * std::polar(1.0, -b * x); }, -10.0, 10.0,
      {1e-12, 1e-16, 100000});
  EXPECT_NEAR(c.value.real(), std::sqrt(pi) * std::exp(-b * b / 4.0), 1e-14);
  EXPECT_NEAR(c.value.imag(), 0.0, 1e-14);
}

TEST(Quadrature, NarrowLorentzianWithBreakpoint) {
  // Int 1/(1 + g x^2) over R = pi / sqrt(g); peak width 1e-4 at x = 0.
  const double g = 1e8;
  const std::array<double, 3> bp_{-1e3, 0.0, 1e3};
  auto r = bp::integrate_adaptive([g](double x) { return 1.0 / (1.0 + g * x * x); },
                                  std::span<const double>(bp_));
  const double tail = 2.0 * (std::numbers::pi / 2.0 - std::atan(1e3 * std::sqrt(g))) / std::sqrt(g);
  EXPECT_NEAR(r.value / (std::numbers::pi / std::sqrt(g) - tail), 1.0, 1e-9);
}

TEST(Quadrature, ReportsNonConvergence) {
  bp::QuadratureOptions o;
  o.rel_tol = 1e-14;
  o.max_panels = 4;
  EXPECT_THROW(bp::integrate_adaptive([](double x) { return std::sqrt(std::abs(x)); }, -1.0, 1.0, o),
               bp::NumericError);
}

TEST(Quadrature, RejectsBadBreakpoints) {
  const std::vector<double> bad{0.0, 1.0, 0.5};
  EXPECT_THROW(bp::integrate_adaptive([](double) { return 1.0; }, std::span<const double>(bad)),
               bp::DomainError);
}
