#pragma once

// Globally adaptive Gauss-Kronrod (10/21-point) integration over a set of
// initial panels. The integrand may be real or complex; error control uses
// |K21 - G10| per panel and bisects the worst panel until the summed error
// estimate meets max(abs_tol, rel_tol * |integral|).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <queue>
#include <span>
#include <sstream>
#include <vector>

#include "biphoton/errors.hpp"

namespace biphoton {

struct QuadratureOptions {
  double rel_tol = 1e-9;
  double abs_tol = 0.0;
  std::size_t max_panels = 200000;
};

template <class T>
struct QuadratureResult {
  T value{};
  double error_estimate = 0.0;
  std::size_t panels = 0;
  std::size_t evaluations = 0;
};

namespace detail {

// Abscissae/weights of the 21-point Kronrod rule and the embedded 10-point
// Gauss rule (QUADPACK qk21).
inline constexpr std::array<double, 11> kronrod21_x = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
inline constexpr std::array<double, 11> kronrod21_w = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525552251, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> gauss10_w = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

template <class T>
struct Panel {
  double a;
  double b;
  T value;
  double error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class T, class F>
Panel<T> gauss_kronrod21(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const T fc = f(center);
  T kronrod = fc * kronrod21_w[10];
  T gauss{};
  for (std::size_t j = 0; j < 10; ++j) {
    const double dx = half * kronrod21_x[j];
    const T sum = f(center - dx) + f(center + dx);
    kronrod += sum * kronrod21_w[j];
    if (j % 2 == 1) gauss += sum * gauss10_w[j / 2];
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Integrates f over [breakpoints.front(), breakpoints.back()], starting from
/// the panels delimited by consecutive breakpoints. Throws NumericError when
/// the panel budget runs out before the tolerance is met.
template <class F>
auto integrate_adaptive(const F& f, std::span<const double> breakpoints,
                        const QuadratureOptions& opt = {}) {
  using T = std::decay_t<decltype(f(0.0))>;
  if (breakpoints.size() < 2) detail::domain_fail("integrate_adaptive: need at least two breakpoints");
  for (std::size_t i = 1; i < breakpoints.size(); ++i)
    if (!(breakpoints[i] > breakpoints[i - 1]))
      detail::domain_fail("integrate_adaptive: breakpoints must be strictly increasing");

  std::priority_queue<detail::Panel<T>> heap;
  T total{};
  double total_err = 0.0;
  std::size_t evals = 0;
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    auto p = detail::gauss_kronrod21<T>(f, breakpoints[i - 1], breakpoints[i]);
    evals += 21;
    total += p.value;
    total_err += p.error;
    heap.push(p);
  }

  auto done = [&] { return total_err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total)); };
  while (!done()) {
    if (heap.size() >= opt.max_panels) {
      std::ostringstream msg;
      msg << "adaptive quadrature did not converge: error estimate " << total_err
          << " vs target " << std::max(opt.abs_tol, opt.rel_tol * std::abs(total)) << " after "
          << heap.size() << " panels";
      throw NumericError(msg.str());
    }
    const auto worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      throw NumericError("adaptive quadrature: panel width reached floating-point resolution");
    }
    heap.pop();
    auto left = detail::gauss_kronrod21<T>(f, worst.a, mid);
    auto right = detail::gauss_kronrod21<T>(f, mid, worst.b);
    evals += 42;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }

  // Re-sum from scratch to shed the cancellation accumulated in `total`.
  QuadratureResult<T> result;
  result.panels = heap.size();
  result.evaluations = evals;
  T sum{};
  double err = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  result.value = sum;
  result.error_estimate = err;
  return result;
}

template <class F>
auto integrate_adaptive(const F& f, double a, double b, const QuadratureOptions& opt = {}) {
  const std::array<double, 2> bp{a, b};
  return integrate_adaptive(f, std::span<const double>(bp), opt);
}

}  // namespace biphoton
