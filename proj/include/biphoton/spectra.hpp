#pragma once

// Intensity transmittance models and the joint spectral density of a
// cw-pumped photon pair. Under cw pumping energy conservation pins
// w2 = wp - w1, so every spectral quantity is a function of the single
// signal detuning nu = w1 - w1_0.

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "biphoton/errors.hpp"
#include "biphoton/units.hpp"

namespace biphoton {

/// exp[-(w - omega0)^2 / sigma^2]
struct GaussianFilter {
  double omega0 = 0.0;
  double sigma = 0.0;

  static GaussianFilter make(double omega0, double sigma) {
    detail::require(std::isfinite(omega0) && omega0 > 0.0,
                    "Gaussian filter center must be positive");
    detail::require(sigma > 0.0, "Gaussian filter width must be positive");
    return {omega0, sigma};
  }

  static GaussianFilter from_wavelength(double center, double fwhm) {
    return make(wavelength_to_angular_frequency(center),
                fwhm_wavelength_to_sigma(fwhm, center));
  }
};

/// Fabry-Perot resonator, T_max / (1 + gamma sin^2(l_f w / c)).
class FabryPerotFilter {
 public:
  FabryPerotFilter(double l_f, double finesse, double t_max = 1.0)
      : l_f_(l_f), finesse_(finesse), t_max_(t_max) {
    detail::require(std::isfinite(l_f) && l_f > 0.0, "FP length must be positive");
    detail::require(std::isfinite(finesse) && finesse > 1.0, "FP finesse must exceed 1");
    detail::require(t_max > 0.0 && t_max <= 1.0, "FP peak transmittance must lie in (0, 1]");
  }

  double length() const { return l_f_; }
  double finesse() const { return finesse_; }
  double t_max() const { return t_max_; }

  /// (2F/pi)^2
  double gamma() const {
    const double q = 2.0 * finesse_ / std::numbers::pi;
    return q * q;
  }

  /// Roundtrip time 2 l_f / c.
  double roundtrip_time() const { return 2.0 * l_f_ / speed_of_light; }

 private:
  double l_f_;
  double finesse_;
  double t_max_;
};

using Filter = std::variant<GaussianFilter, FabryPerotFilter>;

/// Filters traversed in sequence; transmittances multiply.
struct FilterChain {
  std::vector<Filter> filters;

  FilterChain() = default;
  FilterChain(std::initializer_list<Filter> f) : filters(f) {}

  bool empty() const { return filters.empty(); }

  template <class T>
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& f : filters) n += std::holds_alternative<T>(f) ? 1 : 0;
    return n;
  }
};

inline double transmittance(const GaussianFilter& g, double omega) {
  const double x = (omega - g.omega0) / g.sigma;
  return std::exp(-x * x);
}

inline double transmittance(const FabryPerotFilter& fp, double omega) {
  // The phase l_f*w/c is several hundred radians; extended precision keeps
  // the narrow resonances from smearing by rounding in the argument.
  const long double phase =
      static_cast<long double>(fp.length()) * static_cast<long double>(omega) /
      static_cast<long double>(speed_of_light);
  const double s = static_cast<double>(std::sin(phase));
  return fp.t_max() / (1.0 + fp.gamma() * s * s);
}

inline double transmittance(const Filter& f, double omega) {
  return std::visit([omega](const auto& x) { return transmittance(x, omega); }, f);
}

inline double transmittance(const FilterChain& chain, double omega) {
  double t = 1.0;
  for (const auto& f : chain.filters) t *= transmittance(f, omega);
  return t;
}

struct FreeSpectralRange {
  double omega = 0.0;  ///< pi c / l_f, rad/s

  /// Same spacing in wavelength near lambda0: lambda0^2 / (2 l_f).
  double wavelength_at(double lambda0) const {
    return lambda0 * lambda0 * omega / (2.0 * std::numbers::pi * speed_of_light);
  }
};

inline FreeSpectralRange fp_free_spectral_range(const FabryPerotFilter& fp) {
  return {std::numbers::pi * speed_of_light / fp.length()};
}

/// Product of two concentric Gaussians, 1/sigma^2 = 1/sigma_a^2 + 1/sigma_b^2.
/// An infinite sigma acts as a transparent filter.
inline GaussianFilter gaussian_compose(const GaussianFilter& a, const GaussianFilter& b) {
  const double min_sigma = std::min(a.sigma, b.sigma);
  if (std::abs(a.omega0 - b.omega0) >= 1e-4 * min_sigma)
    detail::domain_fail("gaussian_compose: centers differ; use a FilterChain instead");
  const double inv = 1.0 / (a.sigma * a.sigma) + 1.0 / (b.sigma * b.sigma);
  return {a.omega0, 1.0 / std::sqrt(inv)};
}

/// cw-pumped SPDC pair source. Idler center is derived so that
/// omega1_0 + omega2_0 == omega_p holds by construction.
class BiphotonSource {
 public:
  BiphotonSource(double omega_p, double omega1_0, double sigma_geo1, double sigma_geo2,
                 double crystal_length = 0.0, double group_velocity = 0.0)
      : omega_p_(omega_p),
        omega1_0_(omega1_0),
        omega2_0_(omega_p - omega1_0),
        sigma1_(sigma_geo1),
        sigma2_(sigma_geo2),
        crystal_length_(crystal_length),
        group_velocity_(group_velocity) {
    detail::require(std::isfinite(omega_p) && omega_p > 0.0, "pump frequency must be positive");
    detail::require(omega1_0 > 0.0 && omega1_0 < omega_p,
                    "signal center must lie strictly between 0 and the pump frequency");
    detail::require(sigma_geo1 > 0.0 && sigma_geo2 > 0.0,
                    "geometric filtering widths must be positive");
  }

  /// Degenerate source, both photons at twice the pump wavelength, with
  /// geometric filtering given as wavelength FWHM per arm.
  static BiphotonSource degenerate(double pump_wavelength, double fwhm1, double fwhm2) {
    const double wp = wavelength_to_angular_frequency(pump_wavelength);
    const double lambda = 2.0 * pump_wavelength;
    return {wp, 0.5 * wp, fwhm_wavelength_to_sigma(fwhm1, lambda),
            fwhm_wavelength_to_sigma(fwhm2, lambda)};
  }

  double omega_p() const { return omega_p_; }
  double omega1_0() const { return omega1_0_; }
  double omega2_0() const { return omega2_0_; }
  double sigma_geo1() const { return sigma1_; }
  double sigma_geo2() const { return sigma2_; }
  double crystal_length() const { return crystal_length_; }
  double group_velocity() const { return group_velocity_; }

  GaussianFilter signal_geometric() const { return {omega1_0_, sigma1_}; }
  GaussianFilter idler_geometric() const { return {omega2_0_, sigma2_}; }

 private:
  double omega_p_;
  double omega1_0_;
  double omega2_0_;
  double sigma1_;
  double sigma2_;
  double crystal_length_;   // informational
  double group_velocity_;   // informational
};

/// Joint spectral weight at signal detuning nu1; the phase-matching factor is
/// constant on the energy-conservation shell and is dropped.
inline double biphoton_spectral_density(const BiphotonSource& src, const FilterChain& signal,
                                        const FilterChain& idler, double nu1) {
  const double w1 = src.omega1_0() + nu1;
  const double w2 = src.omega2_0() - nu1;
  const double x1 = nu1 / src.sigma_geo1();
  const double x2 = nu1 / src.sigma_geo2();
  return std::exp(-x1 * x1 - x2 * x2) * transmittance(signal, w1) * transmittance(idler, w2);
}

/// All Gaussian factors of the joint density collapsed into one Gaussian in
/// nu1: exp[-beta2 (nu1 - shift)^2] times a constant.
struct GaussianWeight {
  double beta2 = 0.0;  ///< sum of 1/sigma^2, s^2
  double shift = 0.0;  ///< centroid offset in nu1, rad/s

  double width() const { return 1.0 / std::sqrt(beta2); }
};

/// Collects the geometric Gaussians and every GaussianFilter of both chains.
/// Fabry-Perot members are ignored here.
inline GaussianWeight gaussian_weight(const BiphotonSource& src, const FilterChain& signal,
                                      const FilterChain& idler) {
  double beta = 1.0 / (src.sigma_geo1() * src.sigma_geo1()) +
                1.0 / (src.sigma_geo2() * src.sigma_geo2());
  double moment = 0.0;
  auto add = [&](double center_in_nu, double sigma) {
    const double w = 1.0 / (sigma * sigma);
    beta += w;
    moment += w * center_in_nu;
  };
  for (const auto& f : signal.filters)
    if (const auto* g = std::get_if<GaussianFilter>(&f)) add(g->omega0 - src.omega1_0(), g->sigma);
  for (const auto& f : idler.filters)
    if (const auto* g = std::get_if<GaussianFilter>(&f)) add(src.omega2_0() - g->omega0, g->sigma);
  return {beta, moment / beta};
}

/// Panel edges for integrating the joint density over nu1: the Gaussian
/// weight truncated at `half_widths` widths around its centroid, split at
/// every Fabry-Perot resonance inside that range.
inline std::vector<double> spectral_panel_edges(const BiphotonSource& src,
                                                const FilterChain& signal,
                                                const FilterChain& idler,
                                                double half_widths = 8.0) {
  const auto w = gaussian_weight(src, signal, idler);
  const double lo = w.shift - half_widths * w.width();
  const double hi = w.shift + half_widths * w.width();
  std::vector<double> edges{lo, hi};
  // Resonances sit at w = k * fsr; on the idler arm w = omega2_0 - nu.
  auto add_comb = [&](const FabryPerotFilter& fp, double sign, double center) {
    const double fsr = fp_free_spectral_range(fp).omega;
    const double a = std::min(center + sign * lo, center + sign * hi);
    const double b = std::max(center + sign * lo, center + sign * hi);
    for (double k = std::ceil(a / fsr); k * fsr <= b; k += 1.0) {
      const double nu = sign * (k * fsr - center);
      if (nu > lo && nu < hi) edges.push_back(nu);
    }
  };
  for (const auto& f : signal.filters)
    if (const auto* fp = std::get_if<FabryPerotFilter>(&f)) add_comb(*fp, 1.0, src.omega1_0());
  for (const auto& f : idler.filters)
    if (const auto* fp = std::get_if<FabryPerotFilter>(&f)) add_comb(*fp, -1.0, src.omega2_0());
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace biphoton
