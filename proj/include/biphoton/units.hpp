#pragma once

// Conversions between laboratory quantities (wavelength, air-gap length,
// spectral FWHM) and model quantities (angular frequency, delay, Gaussian
// width). Everything is SI: meters, seconds, rad/s.

#include <cmath>
#include <numbers>

#include "biphoton/errors.hpp"

namespace biphoton {

/// Speed of light in vacuum, m/s (exact).
inline constexpr double speed_of_light = 2.99792458e8;

namespace detail {
inline constexpr double two_sqrt_ln2 = 1.6651092223153954;  // 2*sqrt(ln 2)
}

inline double wavelength_to_angular_frequency(double lambda) {
  detail::require(std::isfinite(lambda) && lambda > 0.0,
                  "wavelength must be positive and finite");
  return 2.0 * std::numbers::pi * speed_of_light / lambda;
}

inline double angular_frequency_to_wavelength(double omega) {
  detail::require(std::isfinite(omega) && omega > 0.0,
                  "angular frequency must be positive and finite");
  return 2.0 * std::numbers::pi * speed_of_light / omega;
}

/// Gaussian width sigma (rad/s) of exp[-(w-w0)^2/sigma^2] whose intensity FWHM
/// is `fwhm` in wavelength around `lambda0`. Uses the first-order dispersion
/// dw = 2 pi c dlambda / lambda0^2, accurate while fwhm << lambda0.
inline double fwhm_wavelength_to_sigma(double fwhm, double lambda0) {
  detail::require(std::isfinite(fwhm) && fwhm > 0.0, "FWHM must be positive");
  detail::require(std::isfinite(lambda0) && lambda0 > 0.0,
                  "center wavelength must be positive");
  const double domega = 2.0 * std::numbers::pi * speed_of_light * fwhm / (lambda0 * lambda0);
  return domega / detail::two_sqrt_ln2;
}

/// Inverse of fwhm_wavelength_to_sigma.
inline double sigma_to_fwhm_wavelength(double sigma, double lambda0) {
  detail::require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive");
  detail::require(std::isfinite(lambda0) && lambda0 > 0.0,
                  "center wavelength must be positive");
  return sigma * detail::two_sqrt_ln2 * lambda0 * lambda0 /
         (2.0 * std::numbers::pi * speed_of_light);
}

/// MZ detuning for an air-gap position; negative positions are allowed.
inline double airgap_to_delay(double l_ag) {
  detail::require(std::isfinite(l_ag), "air-gap position must be finite");
  return l_ag / speed_of_light;
}

inline double delay_to_airgap(double dt) {
  detail::require(std::isfinite(dt), "delay must be finite");
  return dt * speed_of_light;
}

}  // namespace biphoton
