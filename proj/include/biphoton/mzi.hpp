#pragma once

// Coincidence-count interference of the idler photon in an unbalanced
// Mach-Zehnder interferometer while the signal photon is filtered remotely.
//
// Three evaluation routes for the interference term rho(dt):
//   * closed Gaussian form, when every filter is Gaussian;
//   * roundtrip series, when the signal arm also holds one Fabry-Perot
//     resonator (each term is one extra cavity roundtrip);
//   * direct adaptive quadrature over the signal detuning, for any chains.
// The quadrature route is the independent check on the other two.

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "biphoton/errors.hpp"
#include "biphoton/quadrature.hpp"
#include "biphoton/spectra.hpp"
#include "biphoton/units.hpp"

namespace biphoton {

using complex = std::complex<double>;

/// Complex amplitude transmittances of the short and long arm.
struct MachZehnder {
  complex t_s{1.0, 0.0};
  complex t_l{1.0, 0.0};

  /// t_s = 1, t_l = ratio * exp(i phase).
  static MachZehnder from_ratio(double ratio, double phase_rad = 0.0) {
    detail::require(std::isfinite(ratio) && ratio > 0.0, "arm ratio must be positive");
    return {complex(1.0, 0.0), std::polar(ratio, phase_rad)};
  }

  double total_power() const { return std::norm(t_s) + std::norm(t_l); }

  /// 2 conj(t_l) t_s / (|t_s|^2 + |t_l|^2); its modulus is the peak visibility.
  complex coupling() const {
    const double p = total_power();
    if (!(p > 0.0)) detail::domain_fail("Mach-Zehnder arms must not both be opaque");
    return 2.0 * std::conj(t_l) * t_s / p;
  }
};

// ---------------------------------------------------------------------------
// Gaussian filtering

/// exp(-dt^2 / (4 beta2))
inline double visibility_envelope_gaussian(double beta2, double dt) {
  detail::require(beta2 > 0.0, "beta2 must be positive");
  return std::exp(-dt * dt / (4.0 * beta2));
}

/// Full width at half maximum of the Gaussian visibility envelope, seconds.
inline double gaussian_envelope_fwhm(double beta2) {
  detail::require(beta2 > 0.0, "beta2 must be positive");
  return 4.0 * std::sqrt(beta2 * std::numbers::ln2);
}

/// beta2 = 1/sigma1^2 + 1/sigma2^2
inline double beta2_from_widths(double sigma1, double sigma2) {
  detail::require(sigma1 > 0.0 && sigma2 > 0.0, "spectral widths must be positive");
  return 1.0 / (sigma1 * sigma1) + 1.0 / (sigma2 * sigma2);
}

inline double interference_term_gaussian(const MachZehnder& mzi, double omega2_0, double beta2,
                                         double dt) {
  const complex k = mzi.coupling() * std::polar(1.0, omega2_0 * dt);
  return k.real() * visibility_envelope_gaussian(beta2, dt);
}

/// sigma1, sigma2: fully composed signal and idler widths.
inline double interference_term_gaussian(const BiphotonSource& src, double sigma1, double sigma2,
                                         const MachZehnder& mzi, double dt) {
  return interference_term_gaussian(mzi, src.omega2_0(), beta2_from_widths(sigma1, sigma2), dt);
}

// ---------------------------------------------------------------------------
// Fabry-Perot roundtrip series

struct FpSeriesParams {
  double c_norm = 0.0;  ///< normalization, includes |t_s|^2 + |t_l|^2
  double t0 = 0.0;      ///< roundtrip time 2 l_f / c
  double phi0 = 0.0;    ///< roundtrip phase omega1_0 * t0
  double gamma = 0.0;   ///< (2F/pi)^2
  double decay = 0.0;   ///< per-roundtrip amplitude factor
};

/// 1 + 2/gamma - 2 sqrt(1+gamma)/gamma, written as gamma/(sqrt(1+gamma)+1)^2
/// to avoid cancellation.
inline double fp_decay(double gamma) {
  detail::require(gamma > 0.0, "gamma must be positive");
  const double r = std::sqrt(1.0 + gamma) + 1.0;
  return gamma / (r * r);
}

namespace detail {

inline constexpr double series_cutoff = 1e-15;
inline constexpr long series_max_terms = 10000;

inline double roundtrip_weight(double decay, long n, double dt, double t0, double beta2) {
  const double x = dt - static_cast<double>(n) * t0;
  return std::pow(decay, static_cast<double>(std::labs(n))) * std::exp(-x * x / (4.0 * beta2));
}

// Sum_n a^|n| e^{i n phi0} exp[-(dt - n t0)^2 / (4 beta2)]. log|term| is
// concave in n, so starting at the largest term and walking outward, each
// direction is monotonically decreasing and stops below the cutoff.
inline complex roundtrip_sum(double decay, double phi0, double t0, double beta2, double dt) {
  // continuous maximizer of -|n| ln(1/a) - (dt - n t0)^2 / (4 beta2)
  const double pull = 2.0 * beta2 * -std::log(decay) / (t0 * t0);
  const double ratio = dt / t0;
  const double peak = ratio > 0.0 ? std::max(0.0, ratio - pull) : std::min(0.0, ratio + pull);
  const long start = std::lround(peak);
  const long cap = static_cast<long>(std::ceil(std::abs(dt) / t0)) + series_max_terms;
  complex sum = roundtrip_weight(decay, start, dt, t0, beta2) *
                std::polar(1.0, static_cast<double>(start) * phi0);
  for (int dir : {-1, +1}) {
    bool converged = false;
    for (long k = 1; k <= cap; ++k) {
      const long n = start + dir * k;
      const double w = roundtrip_weight(decay, n, dt, t0, beta2);
      sum += w * std::polar(1.0, static_cast<double>(n) * phi0);
      if (w < series_cutoff) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NumericError("roundtrip series did not converge within the term cap");
  }
  return sum;
}

}  // namespace detail

inline FpSeriesParams fp_series_params(const FabryPerotFilter& fp, double omega1_0, double beta2,
                                       const MachZehnder& mzi) {
  detail::require(beta2 > 0.0, "beta2 must be positive");
  detail::require(omega1_0 > 0.0, "signal center frequency must be positive");
  FpSeriesParams p;
  p.t0 = fp.roundtrip_time();
  p.phi0 = omega1_0 * p.t0;
  p.gamma = fp.gamma();
  p.decay = fp_decay(p.gamma);
  const double s0 = detail::roundtrip_sum(p.decay, p.phi0, p.t0, beta2, 0.0).real();
  p.c_norm = mzi.total_power() * s0;
  if (!(p.c_norm > 0.0)) throw NumericError("roundtrip normalization is not positive");
  return p;
}

/// Sum_n a^|n| exp[i(omega2_0 dt + n phi0)] exp[-(dt - n t0)^2 / (4 beta2)].
inline complex fp_series_sum(const FpSeriesParams& p, double omega2_0, double beta2, double dt) {
  detail::require(p.t0 > 0.0 && p.decay > 0.0 && p.decay < 1.0 && p.c_norm > 0.0,
                  "invalid roundtrip series parameters");
  detail::require(beta2 > 0.0, "beta2 must be positive");
  return std::polar(1.0, omega2_0 * dt) * detail::roundtrip_sum(p.decay, p.phi0, p.t0, beta2, dt);
}

inline double interference_term_fp_series(const FpSeriesParams& p, double omega2_0, double beta2,
                                          const MachZehnder& mzi, double dt) {
  const complex s = fp_series_sum(p, omega2_0, beta2, dt);
  return 2.0 * (std::conj(mzi.t_l) * mzi.t_s * s).real() / p.c_norm;
}

/// a^(|dt|/t0), continuous in dt.
inline double upper_envelope(const FpSeriesParams& p, double dt) {
  return std::pow(p.decay, std::abs(dt) / p.t0);
}

// ---------------------------------------------------------------------------
// Interference models. Each exposes rho(dt), the smooth visibility envelope
// envelope(dt), and the carrier frequency that sets one optical period.

template <class M>
concept InterferencePattern = requires(const M& m, double dt) {
  { m.rho(dt) } -> std::convertible_to<double>;
  { m.envelope(dt) } -> std::convertible_to<double>;
  { m.carrier_frequency() } -> std::convertible_to<double>;
};

class GaussianInterference {
 public:
  GaussianInterference(const MachZehnder& mzi, double omega2_0, double beta2)
      : coupling_(mzi.coupling()), omega2_(omega2_0), beta2_(beta2) {
    detail::require(beta2 > 0.0, "beta2 must be positive");
    detail::require(omega2_0 > 0.0, "idler center frequency must be positive");
  }

  double rho(double dt) const {
    return (coupling_ * std::polar(1.0, omega2_ * dt)).real() *
           visibility_envelope_gaussian(beta2_, dt);
  }
  double envelope(double dt) const {
    return std::abs(coupling_) * visibility_envelope_gaussian(beta2_, dt);
  }
  double carrier_frequency() const { return omega2_; }
  double beta2() const { return beta2_; }
  double envelope_fwhm() const { return gaussian_envelope_fwhm(beta2_); }

 private:
  complex coupling_;
  double omega2_;
  double beta2_;
};

class FpSeriesInterference {
 public:
  /// omega1_0 / omega2_0 are the effective spectral centers of the Gaussian
  /// weight (source centers shifted by any off-center Gaussian filters).
  FpSeriesInterference(const MachZehnder& mzi, const FabryPerotFilter& fp, double omega1_0,
                       double omega2_0, double beta2)
      : mzi_(mzi),
        params_(fp_series_params(fp, omega1_0, beta2, mzi)),
        omega2_(omega2_0),
        beta2_(beta2) {
    detail::require(omega2_0 > 0.0, "idler center frequency must be positive");
  }

  double rho(double dt) const {
    return interference_term_fp_series(params_, omega2_, beta2_, mzi_, dt);
  }
  double envelope(double dt) const {
    const complex s = detail::roundtrip_sum(params_.decay, params_.phi0, params_.t0, beta2_, dt);
    return 2.0 * std::abs(std::conj(mzi_.t_l) * mzi_.t_s) * std::abs(s) / params_.c_norm;
  }
  /// Normalized complex amplitude g with rho = Re{coupling * g}.
  complex amplitude(double dt) const {
    return fp_series_sum(params_, omega2_, beta2_, dt) * mzi_.total_power() / params_.c_norm;
  }
  double carrier_frequency() const { return omega2_; }
  double upper_envelope(double dt) const { return biphoton::upper_envelope(params_, dt); }
  const FpSeriesParams& params() const { return params_; }
  double beta2() const { return beta2_; }
  const MachZehnder& mzi() const { return mzi_; }

 private:
  MachZehnder mzi_;
  FpSeriesParams params_;
  double omega2_;
  double beta2_;
};

/// Direct integration over the signal detuning nu1 of the filtered joint
/// density D(nu1):
///   rho = Re{ coupling * e^{i w2_0 dt} Int D(nu) e^{-i nu dt} dnu / Int D(nu) dnu }
/// over |nu - shift| <= 8 / sqrt(beta2), with panels split at every FP
/// resonance so the narrow transmission peaks sit on panel edges.
class QuadratureInterference {
 public:
  QuadratureInterference(BiphotonSource src, FilterChain signal, FilterChain idler,
                         const MachZehnder& mzi, QuadratureOptions opt = {})
      : src_(std::move(src)),
        signal_(std::move(signal)),
        idler_(std::move(idler)),
        coupling_(mzi.coupling()),
        opt_(opt) {
    breakpoints_ = spectral_panel_edges(src_, signal_, idler_);
    auto density = [this](double nu) { return biphoton_spectral_density(src_, signal_, idler_, nu); };
    norm_ = integrate_adaptive(density, std::span<const double>(breakpoints_), opt_).value;
    if (!(norm_ > 0.0)) throw NumericError("joint spectral density integrates to zero");
  }

  /// Int D(nu) e^{-i nu dt} / Int D(nu); no carrier phase.
  complex amplitude(double dt) const {
    auto integrand = [this, dt](double nu) {
      return biphoton_spectral_density(src_, signal_, idler_, nu) * std::polar(1.0, -nu * dt);
    };
    QuadratureOptions o = opt_;
    // Relative accuracy is referred to the normalization, so deep in the
    // tails the oscillatory integral is not chased down to roundoff.
    o.abs_tol = std::max(o.abs_tol, 1e-3 * o.rel_tol * norm_);
    return integrate_adaptive(integrand, std::span<const double>(breakpoints_), o).value / norm_;
  }

  double rho(double dt) const {
    return (coupling_ * std::polar(1.0, src_.omega2_0() * dt) * amplitude(dt)).real();
  }
  double envelope(double dt) const { return std::abs(coupling_) * std::abs(amplitude(dt)); }
  double carrier_frequency() const { return src_.omega2_0(); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }

 private:
  BiphotonSource src_;
  FilterChain signal_;
  FilterChain idler_;
  complex coupling_;
  QuadratureOptions opt_;
  std::vector<double> breakpoints_;
  double norm_ = 0.0;
};

inline double interference_term_fp_quadrature(const BiphotonSource& src, const FilterChain& signal,
                                              const MachZehnder& mzi, double dt,
                                              const FilterChain& idler = {}) {
  return QuadratureInterference(src, signal, idler, mzi).rho(dt);
}

// ---------------------------------------------------------------------------
// Model selection

enum class ModelKind { automatic, gaussian, fp_series, quadrature };

/// Any of the three evaluation routes behind one value type.
class InterferenceModel {
 public:
  using Variant = std::variant<GaussianInterference, FpSeriesInterference, QuadratureInterference>;

  explicit InterferenceModel(Variant v) : v_(std::move(v)) {}

  double rho(double dt) const {
    return std::visit([dt](const auto& m) { return m.rho(dt); }, v_);
  }
  double envelope(double dt) const {
    return std::visit([dt](const auto& m) { return m.envelope(dt); }, v_);
  }
  double carrier_frequency() const {
    return std::visit([](const auto& m) { return m.carrier_frequency(); }, v_);
  }
  ModelKind kind() const {
    switch (v_.index()) {
      case 0: return ModelKind::gaussian;
      case 1: return ModelKind::fp_series;
      default: return ModelKind::quadrature;
    }
  }
  const Variant& variant() const { return v_; }

 private:
  Variant v_;
};

/// Picks the closed Gaussian form when no FP is present, the roundtrip series
/// for a single FP on the signal arm, and quadrature otherwise. Requesting a
/// route that the filter configuration cannot support is a domain error.
inline InterferenceModel make_interference_model(const BiphotonSource& src,
                                                 const FilterChain& signal,
                                                 const FilterChain& idler,
                                                 const MachZehnder& mzi,
                                                 ModelKind kind = ModelKind::automatic) {
  const auto fp_signal = signal.count<FabryPerotFilter>();
  const auto fp_idler = idler.count<FabryPerotFilter>();
  if (kind == ModelKind::automatic) {
    if (fp_signal + fp_idler == 0)
      kind = ModelKind::gaussian;
    else if (fp_signal == 1 && fp_idler == 0)
      kind = ModelKind::fp_series;
    else
      kind = ModelKind::quadrature;
  }
  const auto w = gaussian_weight(src, signal, idler);
  const double w1 = src.omega1_0() + w.shift;
  const double w2 = src.omega2_0() - w.shift;
  switch (kind) {
    case ModelKind::gaussian:
      if (fp_signal + fp_idler != 0)
        detail::domain_fail("Gaussian model requested but a Fabry-Perot filter is present");
      return InterferenceModel(GaussianInterference(mzi, w2, w.beta2));
    case ModelKind::fp_series: {
      if (fp_signal != 1 || fp_idler != 0)
        detail::domain_fail("series model needs exactly one Fabry-Perot filter, on the signal arm");
      const FabryPerotFilter* fp = nullptr;
      for (const auto& f : signal.filters)
        if (const auto* p = std::get_if<FabryPerotFilter>(&f)) fp = p;
      return InterferenceModel(FpSeriesInterference(mzi, *fp, w1, w2, w.beta2));
    }
    default:
      return InterferenceModel(QuadratureInterference(src, signal, idler, mzi));
  }
}

// ---------------------------------------------------------------------------
// Rates and visibility

/// R_n = 1 + rho. |rho| beyond 1 + 1e-9 indicates an upstream bug.
inline double normalized_rate(double rho) {
  if (!(std::abs(rho) <= 1.0 + 1e-9)) {
    std::ostringstream msg;
    msg << "interference term out of range: " << rho;
    detail::domain_fail(msg.str());
  }
  return 1.0 + rho;
}

struct Fringe {
  double rho = 0.0;     ///< rho at the window center
  double rn_max = 0.0;
  double rn_min = 0.0;
  double visibility = 0.0;
};

namespace detail {

inline constexpr int fringe_samples = 64;
inline constexpr double golden = 0.6180339887498949;

// Golden-section search for the maximum of f on [a, b].
template <class F>
double golden_max(const F& f, double a, double b, double tol) {
  double c = b - golden * (b - a);
  double d = a + golden * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - golden * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + golden * (b - a);
      fd = f(d);
    }
  }
  return std::max(fc, fd);
}

}  // namespace detail

/// Samples R_n over one optical period 2 pi / carrier centered on dt_center,
/// refines the extrema by golden section and returns
/// (R_max - R_min) / (R_max + R_min).
template <InterferencePattern Model>
Fringe local_fringe(const Model& model, double dt_center) {
  const double period = 2.0 * std::numbers::pi / model.carrier_frequency();
  const double lo = dt_center - 0.5 * period;
  const double h = period / detail::fringe_samples;
  auto rate = [&](double dt) { return normalized_rate(model.rho(dt)); };

  int imax = 0;
  int imin = 0;
  double smax = -1.0;
  double smin = 3.0;
  for (int i = 0; i <= detail::fringe_samples; ++i) {
    const double r = rate(lo + i * h);
    if (r > smax) smax = r, imax = i;
    if (r < smin) smin = r, imin = i;
  }
  const double hi = lo + period;
  const double tol = 1e-9 * period;
  auto bracket = [&](int i) {
    return std::pair{std::max(lo, lo + (i - 1) * h), std::min(hi, lo + (i + 1) * h)};
  };
  const auto [a1, b1] = bracket(imax);
  const auto [a2, b2] = bracket(imin);
  Fringe f;
  f.rho = model.rho(dt_center);
  f.rn_max = std::max(smax, detail::golden_max(rate, a1, b1, tol));
  f.rn_min = std::min(smin, -detail::golden_max([&](double t) { return -rate(t); }, a2, b2, tol));
  f.rn_min = std::max(0.0, f.rn_min);  // rounding below a perfect null
  const double denom = f.rn_max + f.rn_min;
  if (!(denom > 0.0)) detail::domain_fail("visibility undefined: R_max + R_min = 0");
  f.visibility = (f.rn_max - f.rn_min) / denom;
  return f;
}

template <InterferencePattern Model>
double local_visibility(const Model& model, double dt_center) {
  return local_fringe(model, dt_center).visibility;
}

// ---------------------------------------------------------------------------
// Scans

enum class ScanKind { interference_term, visibility };
enum class ScanSource { computed, measured };

struct ScanPoint {
  double l_ag = 0.0;  ///< meters
  double value = 0.0;
  std::optional<double> sigma;
};

struct VisibilityScan {
  std::vector<ScanPoint> points;
  ScanKind kind = ScanKind::visibility;
  ScanSource source = ScanSource::computed;

  /// Throws DomainError unless l_ag is strictly increasing and the values
  /// lie in the range of `kind`.
  void validate() const {
    const double lo = kind == ScanKind::visibility ? 0.0 : -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      if (i > 0 && !(p.l_ag > points[i - 1].l_ag))
        detail::domain_fail("scan positions must be strictly increasing");
      if (!(p.value >= lo && p.value <= 1.0))
        detail::domain_fail("scan value out of range at point " + std::to_string(i));
      if (p.sigma && !(*p.sigma > 0.0))
        detail::domain_fail("scan standard deviation must be positive at point " + std::to_string(i));
    }
  }

  std::vector<double> positions() const {
    std::vector<double> x;
    x.reserve(points.size());
    for (const auto& p : points) x.push_back(p.l_ag);
    return x;
  }
  std::vector<double> values() const {
    std::vector<double> y;
    y.reserve(points.size());
    for (const auto& p : points) y.push_back(p.value);
    return y;
  }
};

namespace detail {

inline void require_increasing(std::span<const double> x) {
  if (x.empty()) domain_fail("scan position list is empty");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) domain_fail("scan positions must be finite");
    if (i > 0 && !(x[i] > x[i - 1])) domain_fail("scan positions must be strictly increasing");
  }
}

// Evaluates fn(i) for every index, split into contiguous blocks across
// threads. Each slot is written by exactly one worker, so the result does not
// depend on the partition.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, unsigned threads, const Fn& fn) {
  std::vector<T> out(n);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  const std::size_t block = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t * block; i < std::min(n, (t + 1) * block); ++i) out[i] = fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace detail

/// Fringe data at every air-gap position (meters).
template <InterferencePattern Model>
std::vector<Fringe> fringe_scan(const Model& model, std::span<const double> l_ag,
                                unsigned threads = 1) {
  detail::require_increasing(l_ag);
  return detail::parallel_map<Fringe>(l_ag.size(), threads, [&](std::size_t i) {
    return local_fringe(model, airgap_to_delay(l_ag[i]));
  });
}

template <InterferencePattern Model>
VisibilityScan visibility_scan(const Model& model, std::span<const double> l_ag,
                               unsigned threads = 1) {
  const auto fringes = fringe_scan(model, l_ag, threads);
  VisibilityScan scan;
  scan.kind = ScanKind::visibility;
  scan.source = ScanSource::computed;
  scan.points.reserve(l_ag.size());
  for (std::size_t i = 0; i < l_ag.size(); ++i)
    scan.points.push_back({l_ag[i], fringes[i].visibility, std::nullopt});
  return scan;
}

/// Evenly spaced positions from lo to hi inclusive (hi snapped when the range
/// is a whole number of steps).
inline std::vector<double> linspace_step(double lo, double hi, double step) {
  detail::require(std::isfinite(lo) && std::isfinite(hi) && hi >= lo, "invalid range");
  if (hi == lo) return {lo};
  detail::require(step > 0.0, "step must be positive");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step * (1.0 + 1e-12))) + 1;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = lo + static_cast<double>(i) * step;
  return x;
}

}  // namespace biphoton
