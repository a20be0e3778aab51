#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "biphoton/hom.hpp"

namespace bp = biphoton;

namespace {
const double kSigma6 = bp::fwhm_wavelength_to_sigma(6.0e-9, 826.2e-9);
}

TEST(Hom, ClosedForm) {
  const auto m = bp::HomModel::make(kSigma6);
  EXPECT_EQ(bp::hom_interference_term(m, 0.0), 1.0);
  // sqrt(2 ln2)/sigma, mpmath reference
  const double half = 1.18410172597198482e-13;
  EXPECT_NEAR(bp::hom_interference_term(m, half), 0.5, 1e-12);
  EXPECT_NEAR(bp::hom_interference_term(m, -half), 0.5, 1e-12);
  EXPECT_NEAR(bp::delay_to_airgap(bp::hom_dip_fwhm(m)) * 1e6, 70.9969533902367536, 1e-9);
  EXPECT_LT(bp::hom_dip_fwhm(bp::HomModel::make(100.0 * kSigma6)), 0.011 * bp::hom_dip_fwhm(m));
  EXPECT_THROW(bp::HomModel::make(0.0), bp::DomainError);
}

TEST(Hom, Rate) {
  const auto m = bp::HomModel::make(kSigma6);
  EXPECT_EQ(bp::hom_rate(m, 0.0), 0.0);
  EXPECT_NEAR(bp::hom_rate(m, 5.0 / kSigma6), 1.0, 4e-6);
  EXPECT_NEAR(bp::hom_rate(m, -5.0 / kSigma6), 1.0, 4e-6);
  for (double dt : {1e-15, -1e-15, 3e-14, -7e-14}) EXPECT_GT(bp::hom_rate(m, dt), 0.0);
}

TEST(Hom, WidthIsHalfTheMzEnvelope) {
  for (double s : {1e12, kSigma6, 3.3e13}) {
    const double beta2 = bp::beta2_from_widths(s, s);
    EXPECT_NEAR(bp::hom_dip_fwhm(bp::HomModel::make(s)) / bp::gaussian_envelope_fwhm(beta2), 0.5,
                1e-12);
  }
}

TEST(Hom, QuadratureMatchesClosedForm) {
  const auto src = bp::BiphotonSource::degenerate(413.1e-9, 6.0e-9, 6.0e-9);
  const bp::HomQuadrature q(src, {}, {});
  const auto m = bp::HomModel::make(src.sigma_geo1());
  for (double dt : {0.0, 5e-14, 1.184e-13, -2e-13, 4e-13})
    EXPECT_NEAR(q.rho(dt), bp::hom_interference_term(m, dt), 1e-9) << dt;
  EXPECT_NEAR(bp::hom_general_quadrature(src, {}, {}, 1e-13), bp::hom_interference_term(m, 1e-13), 1e-9);
}

TEST(Hom, SymmetricSpectrumGivesEvenBoundedDip) {
  const auto src = bp::BiphotonSource::degenerate(413.1e-9, 6.0e-9, 6.0e-9);
  const auto w = src.omega1_0();
  const bp::HomQuadrature q(src, bp::FilterChain{bp::GaussianFilter{w, 4e12}},
                            bp::FilterChain{bp::GaussianFilter{w, 4e12}});
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> dt(0.0, 1e-12);
  for (int i = 0; i < 100; ++i) {
    const double t = dt(rng);
    const double r = q.rho(t);
    EXPECT_GE(r, -1e-12);
    EXPECT_LE(r, 1.0 + 1e-12);
    EXPECT_NEAR(r, q.rho(-t), 1e-12);
  }
}

TEST(Hom, FabryPerotRevivals) {
  // A resonator on one arm revives the dip at half-roundtrip multiples.
  // References: mpmath quadrature (25 digits) of Int D cos(2 nu dt) / Int D,
  // split at every resonance. They coincide with Re g_MZ(2 dt) of the
  // Mach-Zehnder oracle, as the cosine-transform form requires.
  const auto src = bp::BiphotonSource::degenerate(413.1e-9, 5.3e-9, 5.3e-9);
  const bp::FabryPerotFilter fp(94.86e-6, 150.0);
  const bp::HomQuadrature q(src, bp::FilterChain{fp}, {});
  const double t0 = fp.roundtrip_time();
  EXPECT_NEAR(q.rho(0.0), 1.0, 1e-9);
  EXPECT_NEAR(q.rho(0.25 * t0), 0.1283959492185531, 1e-8);
  EXPECT_NEAR(q.rho(0.5 * t0), -0.67113122076579455, 1e-8);
  EXPECT_NEAR(q.rho(1.0 * t0), -0.056356034853350718, 1e-8);
  EXPECT_NEAR(q.rho(-0.5 * t0), q.rho(0.5 * t0), 1e-12);
  EXPECT_GT(std::abs(q.rho(0.5 * t0)), std::abs(q.rho(0.25 * t0)));
}
