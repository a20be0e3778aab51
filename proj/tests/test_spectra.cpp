#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "biphoton/spectra.hpp"

namespace bp = biphoton;

namespace {
const double kLambda = 826.2e-9;
const double kOmega1 = bp::wavelength_to_angular_frequency(kLambda);
const double kSigma53 = bp::fwhm_wavelength_to_sigma(5.3e-9, kLambda);
const double kSigma18 = bp::fwhm_wavelength_to_sigma(1.8e-9, 826.4e-9);
}  // namespace

TEST(Spectra, GaussianPeakAndSymmetry) {
  const auto g = bp::GaussianFilter::make(kOmega1, kSigma53);
  EXPECT_EQ(bp::transmittance(g, kOmega1), 1.0);
  // omega1 + sigma loses ~1e-14 of sigma to rounding at this magnitude
  EXPECT_NEAR(bp::transmittance(g, kOmega1 + kSigma53), std::exp(-1.0), 1e-13);
  EXPECT_DOUBLE_EQ(bp::transmittance(g, kOmega1 + 3e12), bp::transmittance(g, kOmega1 - 3e12));
  EXPECT_THROW(bp::GaussianFilter::make(kOmega1, 0.0), bp::DomainError);
}

TEST(Spectra, FabryPerotExtremes) {
  const bp::FabryPerotFilter fp(94.86e-6, 150.0, 0.8);
  const double fsr = bp::fp_free_spectral_range(fp).omega;
  const double k = std::round(kOmega1 / fsr);
  EXPECT_NEAR(bp::transmittance(fp, k * fsr), 0.8, 1e-12);
  // 1 + gamma = 9119.9065..., gamma = (300/pi)^2
  EXPECT_NEAR(fp.gamma(), 9118.90652781039943, 1e-9);
  EXPECT_NEAR(bp::transmittance(fp, (k + 0.5) * fsr) / 0.8, 1.09650246628140633e-4, 1e-15);
}

TEST(Spectra, FabryPerotValidation) {
  EXPECT_THROW(bp::FabryPerotFilter(0.0, 150.0), bp::DomainError);
  EXPECT_THROW(bp::FabryPerotFilter(95e-6, 1.0), bp::DomainError);
  EXPECT_THROW(bp::FabryPerotFilter(95e-6, 150.0, 0.0), bp::DomainError);
  EXPECT_THROW(bp::FabryPerotFilter(95e-6, 150.0, 1.1), bp::DomainError);
}

TEST(Spectra, FreeSpectralRange) {
  const bp::FabryPerotFilter fp(95.0e-6, 150.0);
  const auto fsr = bp::fp_free_spectral_range(fp);
  EXPECT_NEAR(fsr.omega, 9.91395561741501725e12, 1e-2);
  EXPECT_NEAR(fsr.wavelength_at(kLambda), 3.59266547368421053e-9, 1e-20);
  // published value ~3.6 nm
  EXPECT_NEAR(fsr.wavelength_at(kLambda), 3.6e-9, 0.01 * 3.6e-9);
  const bp::FabryPerotFilter twice(190.0e-6, 150.0);
  EXPECT_NEAR(bp::fp_free_spectral_range(twice).wavelength_at(kLambda),
              0.5 * fsr.wavelength_at(kLambda), 1e-24);
}

TEST(Spectra, FabryPerotPeriodicity) {
  // The period is made an exact integer so that w and w + fsr are exactly
  // representable; the check then isolates the model from input rounding.
  const double period = 9.9e12;
  const bp::FabryPerotFilter fp(std::numbers::pi * bp::speed_of_light / period, 150.0);
  const double fsr = bp::fp_free_spectral_range(fp).omega;
  ASSERT_NEAR(fsr, period, 0.01);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> pick(2'000'000'000'000'000, 2'500'000'000'000'000);
  for (int i = 0; i < 200; ++i) {
    const double w = static_cast<double>(pick(rng));
    const double t0 = bp::transmittance(fp, w);
    const double t1 = bp::transmittance(fp, w + period);
    EXPECT_NEAR(t1 / t0, 1.0, 1e-12) << "w = " << w;
  }
}

TEST(Spectra, TransmittanceBounded) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> w(1.9e15, 2.7e15);
  const bp::FilterChain chain{bp::GaussianFilter{kOmega1, kSigma18},
                              bp::FabryPerotFilter(94.86e-6, 150.0, 0.9),
                              bp::FabryPerotFilter(31.0e-6, 20.0)};
  for (int i = 0; i < 1000; ++i) {
    const double x = w(rng);
    for (const auto& f : chain.filters) {
      const double t = bp::transmittance(f, x);
      EXPECT_GE(t, 0.0);
      EXPECT_LE(t, 1.0);
    }
    const double t = bp::transmittance(chain, x);
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, 1.0);
    double product = 1.0;
    for (const auto& f : chain.filters) product *= bp::transmittance(f, x);
    EXPECT_DOUBLE_EQ(t, product);
  }
}

TEST(Spectra, GaussianCompose) {
  const bp::GaussianFilter a{kOmega1, kSigma53};
  const bp::GaussianFilter b{kOmega1, kSigma18};
  EXPECT_NEAR(bp::gaussian_compose(a, a).sigma, kSigma53 / std::sqrt(2.0), 1e-3);
  EXPECT_NEAR(bp::gaussian_compose(a, b).sigma, 2.82336572053410433e12, 1e-2);
  const bp::GaussianFilter open{kOmega1, std::numeric_limits<double>::infinity()};
  EXPECT_EQ(bp::gaussian_compose(a, open).sigma, kSigma53);
  EXPECT_THROW(bp::gaussian_compose(a, bp::GaussianFilter{kOmega1 + 1e10, kSigma18}),
               bp::DomainError);

  const auto ab = bp::gaussian_compose(a, b);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-5.0 * kSigma18, 5.0 * kSigma18);
  for (int i = 0; i < 200; ++i) {
    const double w = kOmega1 + d(rng);
    const double product = bp::transmittance(a, w) * bp::transmittance(b, w);
    EXPECT_NEAR(bp::transmittance(ab, w) / product, 1.0, 1e-12);
  }
}

TEST(Spectra, SourceEnforcesEnergyConservation) {
  const auto src = bp::BiphotonSource::degenerate(413.1e-9, 5.3e-9, 5.3e-9);
  EXPECT_EQ(src.omega1_0() + src.omega2_0(), src.omega_p());
  EXPECT_NEAR(src.omega1_0(), kOmega1, 1.0);
  EXPECT_NEAR(src.sigma_geo1(), kSigma53, 1e-3);
  const bp::BiphotonSource nd(4.5e15, 2.0e15, 1e13, 2e13);
  EXPECT_EQ(nd.omega1_0() + nd.omega2_0(), nd.omega_p());
  EXPECT_THROW(bp::BiphotonSource(4.5e15, 5e15, 1e13, 1e13), bp::DomainError);
  EXPECT_THROW(bp::BiphotonSource(4.5e15, 2e15, 0.0, 1e13), bp::DomainError);
}

TEST(Spectra, SpectralDensity) {
  const auto src = bp::BiphotonSource::degenerate(413.1e-9, 5.3e-9, 5.3e-9);
  const bp::FilterChain none;
  EXPECT_EQ(bp::biphoton_spectral_density(src, none, none, 0.0), 1.0);
  EXPECT_NEAR(bp::biphoton_spectral_density(src, none, none, src.sigma_geo1()), std::exp(-2.0),
              1e-15);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> nu(-4.0 * kSigma53, 4.0 * kSigma53);
  for (int i = 0; i < 200; ++i) {
    const double x = nu(rng);
    EXPECT_DOUBLE_EQ(bp::biphoton_spectral_density(src, none, none, x),
                     bp::biphoton_spectral_density(src, none, none, -x));
  }

  const bp::FabryPerotFilter fp(94.86e-6, 150.0);
  const bp::FilterChain signal{fp};
  const double fsr = bp::fp_free_spectral_range(fp).omega;
  const double k = std::round(src.omega1_0() / fsr);
  const double mid = (k + 0.5) * fsr - src.omega1_0();
  const double ratio = bp::biphoton_spectral_density(src, signal, none, mid) /
                       bp::biphoton_spectral_density(src, none, none, mid);
  EXPECT_NEAR(ratio, 1.09650246628140633e-4, 1e-14);
}

TEST(Spectra, GaussianWeightCollectsAllGaussians) {
  const auto src = bp::BiphotonSource::degenerate(413.1e-9, 5.3e-9, 5.3e-9);
  const bp::FilterChain none;
  auto w = bp::gaussian_weight(src, none, none);
  EXPECT_NEAR(w.beta2, 2.0 / (kSigma53 * kSigma53), 1e-40);
  EXPECT_EQ(w.shift, 0.0);

  // an off-center signal filter drags the centroid toward its center
  const double offset = 1e12;
  const bp::FilterChain signal{bp::GaussianFilter{src.omega1_0() + offset, kSigma18}};
  w = bp::gaussian_weight(src, signal, none);
  EXPECT_GT(w.shift, 0.0);
  EXPECT_LT(w.shift, offset);
  // brute-force check: density / exp(-beta2 (nu - shift)^2) is constant
  const double r0 = bp::biphoton_spectral_density(src, signal, none, 0.0) /
                    std::exp(-w.beta2 * w.shift * w.shift);
  for (double nu : {-3e12, -1e12, 2e12, 5e12}) {
    const double d = nu - w.shift;
    EXPECT_NEAR(bp::biphoton_spectral_density(src, signal, none, nu) / std::exp(-w.beta2 * d * d) / r0,
                1.0, 1e-12);
  }
}

TEST(Spectra, PanelEdgesSitOnResonances) {
  const auto src = bp::BiphotonSource::degenerate(413.1e-9, 5.3e-9, 5.3e-9);
  const bp::FabryPerotFilter fp(94.86e-6, 150.0);
  const auto edges = bp::spectral_panel_edges(src, bp::FilterChain{fp}, {});
  ASSERT_GT(edges.size(), 10u);
  for (std::size_t i = 1; i + 1 < edges.size(); ++i) {
    EXPECT_NEAR(bp::transmittance(fp, src.omega1_0() + edges[i]), 1.0, 1e-6);
    EXPECT_GT(edges[i], edges[i - 1]);
  }
}
