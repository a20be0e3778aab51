#pragma once

// Hong-Ou-Mandel dip of the same pair source.
//
// Under the cw energy constraint w2 = wp - w1, the time-domain overlap
//   Int Int Re{A(tA - dt, tB) A*(tB - dt, tA)} / Int Int |A|^2
// becomes a cosine transform of the joint spectral density over the signal
// detuning nu:  Int D(nu) cos(2 nu dt) dnu / Int D(nu) dnu.
// For equal Gaussian arms, D = exp(-2 nu^2 / sigma^2), which gives
// exp(-sigma^2 dt^2 / 2).

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "biphoton/errors.hpp"
#include "biphoton/mzi.hpp"
#include "biphoton/quadrature.hpp"
#include "biphoton/spectra.hpp"

namespace biphoton {

struct HomModel {
  double sigma = 0.0;  ///< common signal/idler Gaussian width, rad/s

  static HomModel make(double sigma) {
    detail::require(std::isfinite(sigma) && sigma > 0.0, "HOM spectral width must be positive");
    return {sigma};
  }
};

/// exp(-sigma^2 dt^2 / 2)
inline double hom_interference_term(const HomModel& m, double dt) {
  detail::require(m.sigma > 0.0, "HOM spectral width must be positive");
  const double x = m.sigma * dt;
  return std::exp(-0.5 * x * x);
}

/// 1 - rho_HOM; zero at dt = 0.
inline double hom_rate(const HomModel& m, double dt) { return 1.0 - hom_interference_term(m, dt); }

/// Dip FWHM in delay, 2 sqrt(2 ln 2) / sigma.
inline double hom_dip_fwhm(const HomModel& m) {
  detail::require(m.sigma > 0.0, "HOM spectral width must be positive");
  return 2.0 * std::sqrt(2.0 * std::numbers::ln2) / m.sigma;
}

/// Cosine-transform form for arbitrary filter chains. The integration range
/// and the FP-resonance panel edges are the same as for the MZ quadrature.
class HomQuadrature {
 public:
  HomQuadrature(BiphotonSource src, FilterChain signal, FilterChain idler,
                QuadratureOptions opt = {})
      : src_(std::move(src)), signal_(std::move(signal)), idler_(std::move(idler)), opt_(opt) {
    edges_ = spectral_panel_edges(src_, signal_, idler_);
    auto density = [this](double nu) { return biphoton_spectral_density(src_, signal_, idler_, nu); };
    norm_ = integrate_adaptive(density, std::span<const double>(edges_), opt_).value;
    if (!(norm_ > 0.0)) throw NumericError("joint spectral density integrates to zero");
  }

  double rho(double dt) const {
    auto integrand = [this, dt](double nu) {
      return biphoton_spectral_density(src_, signal_, idler_, nu) * std::cos(2.0 * nu * dt);
    };
    QuadratureOptions o = opt_;
    o.abs_tol = std::max(o.abs_tol, 1e-3 * o.rel_tol * norm_);
    return integrate_adaptive(integrand, std::span<const double>(edges_), o).value / norm_;
  }

  double rate(double dt) const { return 1.0 - rho(dt); }

 private:
  BiphotonSource src_;
  FilterChain signal_;
  FilterChain idler_;
  QuadratureOptions opt_;
  std::vector<double> edges_;
  double norm_ = 0.0;
};

inline double hom_general_quadrature(const BiphotonSource& src, const FilterChain& signal,
                                     const FilterChain& idler, double dt) {
  return HomQuadrature(src, signal, idler).rho(dt);
}

}  // namespace biphoton
