#pragma once

// Least-squares estimation of model parameters from visibility scans.
//
// The optimizer is a bounded Levenberg-Marquardt loop with forward-difference
// Jacobians; a rank-deficient Jacobian hands over to a Nelder-Mead simplex on
// the same objective. Measured error bars weight residuals by 1/sigma.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biphoton/errors.hpp"
#include "biphoton/mzi.hpp"
#include "biphoton/spectra.hpp"
#include "biphoton/units.hpp"

namespace biphoton {

struct Parameter {
  std::string name;
  double value = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool free = true;
};

struct Estimate {
  std::string name;
  double value = 0.0;
  double uncertainty = 0.0;  ///< one standard deviation; 0 for fixed parameters
  bool free = true;
};

struct FitResult {
  std::vector<Estimate> estimates;
  std::vector<std::pair<std::string, double>> derived;
  std::vector<double> residuals;  ///< data - model, unweighted
  double rss = 0.0;               ///< weighted residual sum of squares
  int iterations = 0;
  bool converged = false;
  std::string method;

  /// A fit that did not converge is reported but must not be relied on.
  bool authoritative() const { return converged; }

  const Estimate& estimate(std::string_view name) const {
    for (const auto& e : estimates)
      if (e.name == name) return e;
    detail::domain_fail("no fitted parameter named " + std::string(name));
  }
  double value(std::string_view name) const { return estimate(name).value; }
  double derived_value(std::string_view name) const {
    for (const auto& [k, v] : derived)
      if (k == name) return v;
    detail::domain_fail("no derived quantity named " + std::string(name));
  }
};

struct LeastSquaresOptions {
  int max_iterations = 500;
  double rel_step = 1e-6;  ///< forward-difference step relative to |x|
  double ftol = 1e-14;     ///< relative cost decrease that counts as converged
  double xtol = 1e-12;     ///< relative step size that counts as converged
};

struct LeastSquaresSolution {
  std::vector<double> x;
  std::vector<double> residuals;  ///< as returned by the residual function
  std::vector<double> uncertainty;
  double cost = 0.0;  ///< sum of squared residuals
  int iterations = 0;
  bool converged = false;
  std::string method;
};

namespace detail {

inline double clamp_to(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

inline double sum_sq(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

template <class Cost>
std::pair<std::vector<double>, int> nelder_mead(const Cost& cost, std::vector<double> x0,
                                                std::span<const double> lo,
                                                std::span<const double> hi, int max_iter) {
  const std::size_t n = x0.size();
  auto clamp = [&](std::vector<double> x) {
    for (std::size_t j = 0; j < n; ++j) x[j] = clamp_to(x[j], lo[j], hi[j]);
    return x;
  };
  std::vector<std::vector<double>> simplex{x0};
  for (std::size_t j = 0; j < n; ++j) {
    auto v = x0;
    double step = 0.05 * std::abs(v[j]);
    if (step == 0.0) step = std::isfinite(hi[j] - lo[j]) ? 0.05 * (hi[j] - lo[j]) : 1e-3;
    v[j] = v[j] + step <= hi[j] ? v[j] + step : v[j] - step;
    simplex.push_back(clamp(v));
  }
  std::vector<double> f(simplex.size());
  for (std::size_t i = 0; i < simplex.size(); ++i) f[i] = cost(simplex[i]);

  int it = 0;
  for (; it < max_iter; ++it) {
    std::vector<std::size_t> order(simplex.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return f[a] < f[b]; });
    const auto best = order.front();
    const auto worst = order.back();
    const auto second = order[order.size() - 2];
    if (std::abs(f[worst] - f[best]) <= 1e-15 * (std::abs(f[best]) + 1e-300)) break;

    std::vector<double> centroid(n, 0.0);
    for (auto i : order)
      if (i != worst)
        for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
    auto along = [&](double t) {
      std::vector<double> v(n);
      for (std::size_t j = 0; j < n; ++j) v[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
      return clamp(v);
    };
    auto xr = along(-1.0);
    const double fr = cost(xr);
    if (fr < f[best]) {
      auto xe = along(-2.0);
      const double fe = cost(xe);
      if (fe < fr) simplex[worst] = xe, f[worst] = fe;
      else simplex[worst] = xr, f[worst] = fr;
    } else if (fr < f[second]) {
      simplex[worst] = xr, f[worst] = fr;
    } else {
      auto xc = along(fr < f[worst] ? -0.5 : 0.5);
      const double fc = cost(xc);
      if (fc < std::min(fr, f[worst])) {
        simplex[worst] = xc, f[worst] = fc;
      } else {
        for (auto i : order) {
          if (i == best) continue;
          for (std::size_t j = 0; j < n; ++j)
            simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
          f[i] = cost(simplex[i]);
        }
      }
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
  return {simplex[best], it};
}

}  // namespace detail

/// Minimizes sum r_i(x)^2 subject to lower <= x <= upper.
/// `residual` maps a parameter vector to the residual vector.
template <class ResidualFn>
LeastSquaresSolution levenberg_marquardt(const ResidualFn& residual, std::vector<double> x,
                                         std::span<const double> lower,
                                         std::span<const double> upper,
                                         const LeastSquaresOptions& opt = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const std::size_t n = x.size();
  if (n == 0) detail::domain_fail("least squares needs at least one free parameter");
  for (std::size_t j = 0; j < n; ++j) {
    if (!(std::isfinite(lower[j]) && std::isfinite(upper[j]) && lower[j] < upper[j]))
      detail::domain_fail("every free parameter needs finite bounds");
    x[j] = detail::clamp_to(x[j], lower[j], upper[j]);
  }

  std::vector<double> r = residual(x);
  const std::size_t m = r.size();
  double cost = detail::sum_sq(r);
  if (!std::isfinite(cost)) throw NumericError("least squares: non-finite residual at start");

  auto jacobian = [&](const std::vector<double>& at, const std::vector<double>& r0) {
    MatrixXd jac(m, n);
    for (std::size_t j = 0; j < n; ++j) {
      // a parameter sitting near zero still gets a step on the scale of its bounds
      const double h = opt.rel_step * std::max(std::abs(at[j]), 1e-3 * (upper[j] - lower[j]));
      const double hj = at[j] + h > upper[j] ? -h : h;
      auto xp = at;
      xp[j] += hj;
      const auto rp = residual(xp);
      for (std::size_t i = 0; i < m; ++i) jac(i, j) = (rp[i] - r0[i]) / hj;
    }
    return jac;
  };

  LeastSquaresSolution out;
  out.method = "levenberg-marquardt";
  double lambda = 1e-3;
  bool rank_deficient = false;
  int it = 0;
  MatrixXd jac;
  for (; it < opt.max_iterations; ++it) {
    if (cost == 0.0) {
      out.converged = true;
      break;
    }
    jac = jacobian(x, r);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(jac);
    if (qr.rank() < static_cast<Eigen::Index>(n)) {
      rank_deficient = true;
      break;
    }
    const VectorXd rv = Eigen::Map<const VectorXd>(r.data(), static_cast<Eigen::Index>(m));
    const MatrixXd a = jac.transpose() * jac;
    const VectorXd g = jac.transpose() * rv;

    bool accepted = false;
    bool done = false;
    while (!accepted) {
      MatrixXd damped = a;
      for (std::size_t j = 0; j < n; ++j) damped(j, j) += lambda * std::max(a(j, j), 1e-300);
      const VectorXd step = damped.ldlt().solve(-g);
      auto xn = x;
      double step_norm = 0.0;
      double x_norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        xn[j] = detail::clamp_to(x[j] + step(j), lower[j], upper[j]);
        step_norm += (xn[j] - x[j]) * (xn[j] - x[j]);
        x_norm += x[j] * x[j];
      }
      const auto rn = residual(xn);
      const double cn = detail::sum_sq(rn);
      if (std::isfinite(cn) && cn < cost) {
        accepted = true;
        const double decrease = cost - cn;
        x = std::move(xn);
        r = rn;
        cost = cn;
        lambda = std::max(lambda / 10.0, 1e-12);
        if (decrease <= opt.ftol * cost ||
            std::sqrt(step_norm) <= opt.xtol * (std::sqrt(x_norm) + opt.xtol))
          done = true;
      } else {
        lambda *= 10.0;
        // No descent direction left at working precision: stationary point.
        if (lambda > 1e16) {
          done = true;
          break;
        }
      }
    }
    if (done) {
      out.converged = true;
      ++it;
      break;
    }
  }

  if (rank_deficient) {
    auto cost_fn = [&](const std::vector<double>& p) { return detail::sum_sq(residual(p)); };
    auto [best, nm_it] = detail::nelder_mead(cost_fn, x, lower, upper, 200 * static_cast<int>(n));
    x = best;
    r = residual(x);
    cost = detail::sum_sq(r);
    it += nm_it;
    out.method = "nelder-mead";
    out.converged = nm_it < 200 * static_cast<int>(n);
    jac = jacobian(x, r);
  }

  out.uncertainty.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (jac.rows() == static_cast<Eigen::Index>(m) && m > n) {
    // Parameters the residuals do not respond to (e.g. sitting on a flat
    // maximum of the model) keep a NaN uncertainty; the rest come from the
    // inverse of J^T J restricted to the responsive columns.
    std::vector<Eigen::Index> keep;
    double max_norm = 0.0;
    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double scale = std::max(std::abs(x[j]), 1e-3 * (upper[j] - lower[j]));
      norms[j] = jac.col(static_cast<Eigen::Index>(j)).norm() * scale;
      max_norm = std::max(max_norm, norms[j]);
    }
    for (std::size_t j = 0; j < n; ++j)
      if (norms[j] > 1e-8 * max_norm) keep.push_back(static_cast<Eigen::Index>(j));
    const MatrixXd sub = jac(Eigen::all, keep);
    Eigen::FullPivLU<MatrixXd> lu(sub.transpose() * sub);
    if (!keep.empty() && lu.isInvertible()) {
      const MatrixXd cov = lu.inverse() * (cost / static_cast<double>(m - n));
      for (std::size_t k = 0; k < keep.size(); ++k)
        out.uncertainty[static_cast<std::size_t>(keep[k])] =
            std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))));
    }
  }
  out.x = std::move(x);
  out.residuals = std::move(r);
  out.cost = cost;
  out.iterations = it;
  return out;
}

/// Fits `model(params, l_ag)` to the scan. Parameters flagged not free are
/// held at their value. Returns estimates in the order given.
template <class Model>
FitResult fit_scan(const VisibilityScan& scan, std::vector<Parameter> params, const Model& model,
                   const LeastSquaresOptions& opt = {}) {
  std::vector<std::size_t> free_idx;
  for (std::size_t j = 0; j < params.size(); ++j)
    if (params[j].free) free_idx.push_back(j);
  if (free_idx.empty()) detail::domain_fail("fit needs at least one free parameter");

  std::vector<double> x0, lo, hi;
  for (auto j : free_idx) {
    x0.push_back(params[j].value);
    lo.push_back(params[j].lower);
    hi.push_back(params[j].upper);
  }
  auto full = [&](std::span<const double> xf) {
    std::vector<double> p(params.size());
    for (std::size_t j = 0; j < params.size(); ++j) p[j] = params[j].value;
    for (std::size_t k = 0; k < free_idx.size(); ++k) p[free_idx[k]] = xf[k];
    return p;
  };
  auto residual = [&](const std::vector<double>& xf) {
    const auto p = full(xf);
    std::vector<double> r(scan.points.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      const auto& pt = scan.points[i];
      const double w = pt.sigma ? 1.0 / *pt.sigma : 1.0;
      r[i] = (model(std::span<const double>(p), pt.l_ag) - pt.value) * w;
    }
    return r;
  };
  const auto sol = levenberg_marquardt(residual, x0, lo, hi, opt);

  FitResult res;
  const auto p = full(sol.x);
  for (std::size_t j = 0, k = 0; j < params.size(); ++j) {
    Estimate e{params[j].name, p[j], 0.0, params[j].free};
    if (params[j].free) e.uncertainty = sol.uncertainty[k++];
    res.estimates.push_back(e);
  }
  res.rss = sol.cost;
  res.iterations = sol.iterations;
  res.converged = sol.converged;
  res.method = sol.method;
  res.residuals.reserve(scan.points.size());
  for (const auto& pt : scan.points)
    res.residuals.push_back(pt.value - model(std::span<const double>(p), pt.l_ag));
  return res;
}

// ---------------------------------------------------------------------------
// Gaussian envelope

struct GaussianFitOptions {
  double center_wavelength = 826.2e-9;  ///< for the equivalent spectral FWHM
};

namespace detail {

inline void require_fittable(const VisibilityScan& scan, std::size_t min_points) {
  if (scan.points.size() < min_points)
    throw FitError("scan has " + std::to_string(scan.points.size()) + " points; need at least " +
                   std::to_string(min_points));
  scan.validate();
  const auto [mn, mx] = std::minmax_element(
      scan.points.begin(), scan.points.end(),
      [](const auto& a, const auto& b) { return a.value < b.value; });
  if (mn->value == mx->value) throw FitError("degenerate scan: all values are equal");
}

}  // namespace detail

/// V(l) = A exp(-4 ln2 (l - l0)^2 / W^2), fitting W (FWHM, m), A and l0.
/// Derived: fwhm_um, beta2 (s^2) and the equivalent per-arm spectral FWHM in
/// nm assuming equal signal and idler widths.
inline FitResult fit_gaussian_envelope(const VisibilityScan& scan,
                                       const GaussianFitOptions& options = {}) {
  detail::require_fittable(scan, 5);
  const auto& pts = scan.points;
  std::size_t imax = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].value > pts[imax].value) imax = i;
  const double peak = pts[imax].value;
  const double half = 0.5 * peak;

  // Half-maximum crossings on either side of the peak, linearly interpolated.
  std::optional<double> left, right;
  for (std::size_t i = imax; i > 0; --i)
    if (pts[i - 1].value < half) {
      const double t = (half - pts[i - 1].value) / (pts[i].value - pts[i - 1].value);
      left = pts[i - 1].l_ag + t * (pts[i].l_ag - pts[i - 1].l_ag);
      break;
    }
  for (std::size_t i = imax; i + 1 < pts.size(); ++i)
    if (pts[i + 1].value < half) {
      const double t = (pts[i].value - half) / (pts[i].value - pts[i + 1].value);
      right = pts[i].l_ag + t * (pts[i + 1].l_ag - pts[i].l_ag);
      break;
    }
  if (!left && !right) throw FitError("scan does not cross half maximum; FWHM is unconstrained");
  const double center = pts[imax].l_ag;
  const double w0 = left && right ? *right - *left
                                  : 2.0 * (left ? center - *left : *right - center);
  const double span = pts.back().l_ag - pts.front().l_ag;

  std::vector<Parameter> params{
      {"fwhm", w0, 1e-4 * span, 10.0 * span, true},
      {"amplitude", peak, 0.0, 2.0, true},
      {"center", center, pts.front().l_ag, pts.back().l_ag, true},
  };
  auto model = [](std::span<const double> p, double l) {
    const double x = (l - p[2]) / p[0];
    return p[1] * std::exp(-4.0 * std::numbers::ln2 * x * x);
  };
  auto res = fit_scan(scan, params, model);

  const double fwhm = res.value("fwhm");
  const double dt_fwhm = fwhm / speed_of_light;
  const double beta2 = dt_fwhm * dt_fwhm / (16.0 * std::numbers::ln2);
  const double sigma = std::sqrt(2.0 / beta2);
  res.derived = {
      {"fwhm_um", fwhm * 1e6},
      {"fwhm_um_uncertainty", res.estimate("fwhm").uncertainty * 1e6},
      {"beta2_s2", beta2},
      {"spectral_fwhm_nm", sigma_to_fwhm_wavelength(sigma, options.center_wavelength) * 1e9},
  };
  return res;
}

// ---------------------------------------------------------------------------
// Fourier period of a visibility oscillation

struct PeriodEstimate {
  double period = 0.0;        ///< same unit as the scan positions
  double amplitude = 0.0;     ///< modulation amplitude at the peak frequency
  double significance = 0.0;  ///< peak magnitude over median spectral magnitude
};

/// Dominant oscillation period of y(x) after removing a quadratic trend and
/// applying a Hann window. Only periods that fit at least `min_cycles` times
/// into the scan are considered. Returns nullopt when no peak stands out.
inline std::optional<PeriodEstimate> dominant_period(std::span<const double> x,
                                                     std::span<const double> y,
                                                     double min_cycles = 3.0) {
  const std::size_t n = x.size();
  if (n < 16 || y.size() != n) return std::nullopt;
  const double span = x.back() - x.front();
  if (!(span > 0.0)) return std::nullopt;

  // Quadratic detrend in a centered, scaled variable.
  const double xm = 0.5 * (x.front() + x.back());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (x[i] - xm) / span;
    a(i, 0) = 1.0;
    a(i, 1) = u;
    a(i, 2) = u * u;
    b(i) = y[i];
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (x[i] - x.front()) / span);
    z[i] = (b(i) - a.row(i).dot(coef)) * hann;
  }

  auto magnitude = [&](double k) {
    complex s{};
    for (std::size_t i = 0; i < n; ++i) s += z[i] * std::polar(1.0, -2.0 * std::numbers::pi * k * x[i]);
    return std::abs(s);
  };

  std::vector<double> dx(n - 1);
  for (std::size_t i = 1; i < n; ++i) dx[i - 1] = x[i] - x[i - 1];
  std::nth_element(dx.begin(), dx.begin() + dx.size() / 2, dx.end());
  const double k_max = 0.5 / dx[dx.size() / 2];
  const double k_min = min_cycles / span;
  if (!(k_max > k_min)) return std::nullopt;
  const double dk = 0.125 / span;

  std::vector<double> ks, mags;
  for (double k = k_min; k <= k_max; k += dk) {
    ks.push_back(k);
    mags.push_back(magnitude(k));
  }
  if (ks.size() < 3) return std::nullopt;
  const auto ibest = static_cast<std::size_t>(std::max_element(mags.begin(), mags.end()) - mags.begin());
  // A maximum on the low edge is leakage from the trend, not an oscillation.
  if (ibest == 0 || ibest + 1 == ks.size()) return std::nullopt;

  auto sorted = mags;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double significance = median > 0.0 ? mags[ibest] / median : std::numeric_limits<double>::infinity();
  if (significance < 8.0) return std::nullopt;

  // Golden-section refinement of the peak between the neighbouring grid points.
  double lo = ks[ibest - 1];
  double hi = ks[ibest + 1];
  const double g = 0.6180339887498949;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = magnitude(c), fd = magnitude(d);
  while (hi - lo > 1e-10 * ks[ibest]) {
    if (fc > fd) {
      hi = d, d = c, fd = fc, c = hi - g * (hi - lo), fc = magnitude(c);
    } else {
      lo = c, c = d, fc = fd, d = lo + g * (hi - lo), fd = magnitude(d);
    }
  }
  const double k = 0.5 * (lo + hi);
  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    wsum += 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (x[i] - x.front()) / span);
  return PeriodEstimate{1.0 / k, 2.0 * magnitude(k) / wsum, significance};
}

// ---------------------------------------------------------------------------
// Fabry-Perot visibility

struct FpFitConfig {
  double omega1_0 = 0.0;  ///< effective signal center, rad/s
  double omega2_0 = 0.0;  ///< effective idler center, rad/s
  double beta2 = 0.0;     ///< Gaussian spectral weight, s^2

  double finesse = 150.0;
  bool finesse_free = false;

  /// Initial guess (or the fixed value when l_f_free is false). Without a
  /// guess, l_f starts from half the dominant Fourier period of the scan.
  std::optional<double> l_f;
  bool l_f_free = true;
  double l_f_window = 0.5e-6;  ///< search half-width around the start, m

  double arm_ratio = 1.0;
  bool arm_ratio_free = true;
};

/// Visibility envelope of the roundtrip-series model for the given
/// resonator length, finesse and arm ratio |t_l / t_s|.
inline double fp_model_visibility(const FpFitConfig& cfg, double l_f, double finesse,
                                  double arm_ratio, double l_ag) {
  const FpSeriesInterference m(MachZehnder::from_ratio(arm_ratio), FabryPerotFilter(l_f, finesse),
                               cfg.omega1_0, cfg.omega2_0, cfg.beta2);
  return m.envelope(airgap_to_delay(l_ag));
}

inline FitResult fit_fp_visibility(const VisibilityScan& scan, const FpFitConfig& cfg) {
  detail::require_fittable(scan, 8);
  detail::require(cfg.beta2 > 0.0 && cfg.omega1_0 > 0.0 && cfg.omega2_0 > 0.0,
                  "FP fit needs spectral centers and beta2");
  const auto xs = scan.positions();
  const auto ys = scan.values();

  double l_f0 = 0.0;
  std::optional<PeriodEstimate> period;
  if (cfg.l_f_free) {
    period = dominant_period(xs, ys);
    if (!period && !cfg.l_f)
      throw FitError("no visibility modulation detected; resonator length is unconstrained");
    l_f0 = cfg.l_f ? *cfg.l_f : 0.5 * period->period;
  } else {
    if (!cfg.l_f) detail::domain_fail("fixed resonator length needs a value");
    l_f0 = *cfg.l_f;
  }

  const double lf_lo = cfg.l_f_free ? l_f0 - cfg.l_f_window : l_f0;
  const double lf_hi = cfg.l_f_free ? l_f0 + cfg.l_f_window : l_f0 + 1e-12;
  double ratio0 = cfg.arm_ratio;

  if (cfg.l_f_free) {
    // The objective repeats every half wavelength in l_f (roundtrip phase),
    // so scan the window finely before the local refinement. For each length
    // the visibility scale 2r/(1+r^2) enters linearly and is solved exactly.
    const double lambda1 = angular_frequency_to_wavelength(cfg.omega1_0);
    const double step = lambda1 / 100.0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (double lf = lf_lo; lf <= lf_hi + 0.5 * step; lf += step) {
      std::vector<double> e(xs.size());
      double se = 0.0, ee = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        e[i] = fp_model_visibility(cfg, lf, cfg.finesse, 1.0, xs[i]);
        const double w = scan.points[i].sigma ? 1.0 / (*scan.points[i].sigma * *scan.points[i].sigma) : 1.0;
        se += w * e[i] * ys[i];
        ee += w * e[i] * e[i];
      }
      double scale = cfg.arm_ratio_free ? std::clamp(se / ee, 1e-6, 1.0)
                                        : 2.0 * cfg.arm_ratio / (1.0 + cfg.arm_ratio * cfg.arm_ratio);
      double cost = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = scan.points[i].sigma ? 1.0 / *scan.points[i].sigma : 1.0;
        const double r = (scale * e[i] - ys[i]) * w;
        cost += r * r;
      }
      if (cost < best_cost) {
        best_cost = cost;
        l_f0 = lf;
        // invert scale = 2r/(1+r^2) on r in (0, 1]
        ratio0 = cfg.arm_ratio_free ? (1.0 - std::sqrt(std::max(0.0, 1.0 - scale * scale))) / scale
                                    : cfg.arm_ratio;
      }
    }
  }

  std::vector<Parameter> params{
      {"l_f", l_f0, lf_lo, lf_hi, cfg.l_f_free},
      {"finesse", cfg.finesse, 2.0, 5000.0, cfg.finesse_free},
      {"arm_ratio", std::clamp(ratio0, 1e-3, 1.0), 1e-3, 1.0, cfg.arm_ratio_free},
  };
  auto model = [&cfg](std::span<const double> p, double l) {
    return fp_model_visibility(cfg, p[0], p[1], p[2], l);
  };
  auto res = fit_scan(scan, params, model);
  res.derived.push_back({"l_f_um", res.value("l_f") * 1e6});
  res.derived.push_back({"l_f_um_uncertainty", res.estimate("l_f").uncertainty * 1e6});
  res.derived.push_back({"modulation_period_um", 2.0 * res.value("l_f") * 1e6});
  if (period) res.derived.push_back({"fourier_period_um", period->period * 1e6});
  return res;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Forward-evaluates `visibility(l_ag)` at every position, adds independent
/// Gaussian noise of standard deviation noise_sigma and clamps to [0, 1].
/// Identical seeds give identical scans.
template <class F>
  requires std::invocable<const F&, double>
VisibilityScan generate_synthetic_scan(const F& visibility, std::span<const double> l_ag,
                                       double noise_sigma, std::uint64_t seed) {
  detail::require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise sigma must be >= 0");
  detail::require_increasing(l_ag);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  VisibilityScan scan;
  scan.kind = ScanKind::visibility;
  scan.source = ScanSource::computed;
  for (double l : l_ag) {
    double v = visibility(l);
    if (noise_sigma > 0.0) v += noise_sigma * noise(rng);
    v = std::clamp(v, 0.0, 1.0);
    std::optional<double> sd;
    if (noise_sigma > 0.0) sd = noise_sigma;
    scan.points.push_back({l, v, sd});
  }
  return scan;
}

/// Uses the model's smooth visibility envelope as the forward curve.
template <InterferencePattern Model>
VisibilityScan generate_synthetic_scan(const Model& model, std::span<const double> l_ag,
                                       double noise_sigma, std::uint64_t seed) {
  return generate_synthetic_scan([&](double l) { return model.envelope(airgap_to_delay(l)); },
                                 l_ag, noise_sigma, seed);
}

}  // namespace biphoton
