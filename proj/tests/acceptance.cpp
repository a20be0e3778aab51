// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit status
// when any criterion fails.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "biphoton/biphoton.hpp"
#include "cli/commands.hpp"
#include "cli/csv.hpp"
#include "cli/scenario.hpp"

namespace bp = biphoton;
namespace cli = biphoton::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = BIPHOTON_SCENARIO_DIR;
constexpr double c_um = bp::speed_of_light * 1e6;

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* spec, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, spec, a, b, c);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

cli::Scenario scenario(const std::string& name) {
  return cli::load_scenario((kScenarios / (name + ".yaml")).string());
}

double envelope_fwhm_um(const cli::Scenario& s) {
  const auto m = s.make_model();
  return std::get<bp::GaussianInterference>(m.variant()).envelope_fwhm() * bp::speed_of_light * 1e6;
}

// Wraps a check so that an exception counts as a failure instead of
// aborting the remaining criteria.
void criterion(int id, const std::string& what, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [ok, detail] = body();
    report(id, ok, what, detail);
  } catch (const std::exception& e) {
    report(id, false, what, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  criterion(1, "Gaussian envelope FWHM for 5.3 nm spectra", [] {
    const double w = envelope_fwhm_um(scenario("fig2_nofilter"));
    const bool ok = rel(w, 160.7) < 1e-3 && rel(w, 160.0) < 0.01;
    return std::pair{ok, fmt("%.3f um, published 160 um, deviation %.2f%%", w, 100.0 * rel(w, 160.0))};
  });

  criterion(2, "remote 1.8 nm filter broadens the envelope", [] {
    const double w = envelope_fwhm_um(scenario("fig2_filter"));
    const double composed = envelope_fwhm_um(scenario("fig2_composed"));
    const bool ok = rel(w, 353.5) < 1e-3 && rel(w, 350.0) < 0.02 && rel(composed, 371.3) < 2e-3;
    return std::pair{ok, fmt("filter only %.2f um vs published 350 (%.2f%%); composed %.2f um", w,
                             100.0 * rel(w, 350.0), composed)};
  });

  criterion(3, "free spectral range at l_F = 95.0 um", [] {
    const double fsr = bp::fp_free_spectral_range(bp::FabryPerotFilter(95.0e-6, 150.0)).wavelength_at(826.2e-9) * 1e9;
    const bool ok = rel(fsr, 3.59) < 0.01 && rel(fsr, 3.6) < 0.01;
    return std::pair{ok, fmt("%.4f nm, published 3.6 nm, deviation %.2f%%", fsr, 100.0 * rel(fsr, 3.6))};
  });

  criterion(4, "visibility modulation period equals 2 l_F", [] {
    std::ostringstream csv;
    cli::write_scan(scenario("fig3_fp"), {4, 0.0, 0}, csv);
    const auto scan = cli::parse_scan_csv(csv.str());
    const auto p = bp::dominant_period(scan.positions(), scan.values());
    if (!p) return std::pair{false, std::string("no modulation found")};
    const double period = p->period * 1e6;
    return std::pair{rel(period, 189.72) < 0.005, fmt("Fourier period %.3f um vs 2 l_F = 189.72 um (%.4f%%)", period,
                                                      100.0 * rel(period, 189.72))};
  });

  criterion(5, "modulation depth near 1 mm: 94.80 > 94.86 > 95.00", [] {
    auto depth = [](double l_f) {
      auto s = scenario("fig3_fp");
      std::get<cli::FabryPerotSpec>(s.signal_filters.at(0)).l_f_um = l_f;
      const auto m = s.make_model();
      double hi = 0.0, lo = 1.0;
      for (double l : bp::linspace_step(900.0, 1100.0, 1.0)) {
        const double v = bp::local_visibility(m, bp::airgap_to_delay(l * 1e-6));
        hi = std::max(hi, v);
        lo = std::min(lo, v);
      }
      return hi - lo;
    };
    const double a = depth(94.80), b = depth(94.86), c = depth(95.00);
    return std::pair{a > b && b > c, fmt("depths %.4f, %.4f, %.4f", a, b, c)};
  });

  criterion(6, "HOM dip FWHM for 6.0 nm spectra", [] {
    const auto s = scenario("fig7_hom");
    std::ostringstream csv;
    cli::write_hom(s, 1, csv);
    std::vector<double> x, y;
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::stringstream ls(line);
      std::string cell;
      std::vector<double> v;
      while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
      x.push_back(v[0]);
      y.push_back(v[2]);
    }
    const auto w = cli::half_max_width(x, y);
    const double analytic = bp::hom_dip_fwhm(bp::HomModel::make(s.make_source().sigma_geo1())) * c_um;
    const bool ok = w && rel(*w, 71.0) < 2e-3 && rel(analytic, 72.0) < 0.03 && rel(*w, analytic) < 1e-4;
    return std::pair{ok, fmt("%.3f um from the dip, %.3f um closed form, published 72 um (%.2f%%)", w.value_or(0.0),
                             analytic, 100.0 * rel(analytic, 72.0))};
  });

  criterion(7, "HOM dip FWHM is half the MZ envelope FWHM", [] {
    double worst = 0.0;
    for (double fwhm_nm : {1.0, 5.3, 6.0, 12.0}) {
      const double sigma = bp::fwhm_wavelength_to_sigma(fwhm_nm * 1e-9, 826.2e-9);
      const double hom = bp::hom_dip_fwhm(bp::HomModel::make(sigma));
      const double mz = bp::gaussian_envelope_fwhm(bp::beta2_from_widths(sigma, sigma));
      worst = std::max(worst, std::abs(hom / mz - 0.5));
    }
    return std::pair{worst < 1e-9, fmt("max |ratio - 0.5| = %.2e", worst)};
  });

  const auto src = bp::BiphotonSource::degenerate(413.1e-9, 5.3e-9, 5.3e-9);
  const bp::FabryPerotFilter fp(94.86e-6, 150.0);
  const auto w = bp::gaussian_weight(src, bp::FilterChain{fp}, {});
  const bp::FpSeriesInterference series({}, fp, src.omega1_0(), src.omega2_0(), w.beta2);
  const bp::QuadratureInterference quad(src, bp::FilterChain{fp}, {}, {});
  const double t0 = fp.roundtrip_time();

  criterion(8, "roundtrip series agrees with adaptive quadrature", [&] {
    double worst = 0.0;
    for (double f : {0.0, 0.5, 1.0, 3.3, 10.0}) {
      const double dt = f * t0;
      const auto gs = series.amplitude(dt);
      const auto gq = quad.amplitude(dt) * std::polar(1.0, src.omega2_0() * dt);
      worst = std::max(worst, std::abs(gs - gq) / std::abs(gs));
    }
    return std::pair{worst <= 1e-6, fmt("max relative difference %.2e at dt in {0, 0.5, 1, 3.3, 10} t0", worst)};
  });

  criterion(9, "upper envelope tracks the visibility peaks", [&] {
    double worst_env = 0.0, worst_quad = 0.0;
    for (int n = -10; n <= 10; ++n) {
      double best = 0.0, at = 0.0;
      for (double f = n - 0.3; f <= n + 0.3; f += 0.005) {
        const double dt = std::clamp(f, -10.0, 10.0) * t0;
        const double v = series.envelope(dt);
        if (v > best) best = v, at = dt;
      }
      const double vs = bp::local_visibility(series, at);
      const double vq = bp::local_visibility(quad, at);
      worst_env = std::max(worst_env, std::abs(vs / series.upper_envelope(at) - 1.0));
      worst_quad = std::max(worst_quad, std::abs(vq - vs));
    }
    return std::pair{worst_env < 0.02 && worst_quad < 1e-6,
                     fmt("peaks within %.3f%% of the envelope; quadrature differs by %.1e", 100.0 * worst_env,
                         worst_quad)};
  });

  criterion(10, "invariant suite", [&] {
    std::vector<std::string> failed;
    auto check = [&](bool ok, const char* name) {
      if (!ok) failed.emplace_back(name);
    };
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> pick(-10.0 * t0, 10.0 * t0);

    const bp::FilterChain fp_chain{fp};
    const auto gauss = bp::make_interference_model(src, {}, {}, {});
    const auto fps = bp::make_interference_model(src, fp_chain, {}, {});
    check(gauss.rho(0.0) == 1.0 && std::abs(fps.rho(0.0) - 1.0) < 1e-14 && std::abs(quad.rho(0.0) - 1.0) < 1e-9,
          "rho(0) = 1");

    bool bounded = true, even = true, phase = true;
    const auto base = bp::MachZehnder::from_ratio(0.7, 0.5);
    const auto unit = std::polar(1.0, 2.1);
    const bp::MachZehnder rotated{base.t_s * unit, base.t_l * unit};
    const auto a = bp::make_interference_model(src, fp_chain, {}, base);
    const auto b = bp::make_interference_model(src, fp_chain, {}, rotated);
    for (int i = 0; i < 500; ++i) {
      const double dt = pick(rng);
      bounded &= std::abs(gauss.rho(dt)) <= 1.0 && std::abs(fps.rho(dt)) <= 1.0 && std::abs(a.rho(dt)) <= 1.0;
      even &= std::abs(series.envelope(dt) - series.envelope(-dt)) < 1e-12 &&
              std::abs(gauss.envelope(dt) - gauss.envelope(-dt)) < 1e-15;
      phase &= std::abs(a.rho(dt) - b.rho(dt)) < 1e-12;
    }
    for (int i = 0; i < 20; ++i) {
      const double dt = pick(rng);
      even &= std::abs(bp::local_visibility(fps, dt) - bp::local_visibility(fps, -dt)) < 1e-9;
    }
    check(bounded, "|rho| <= 1");
    check(even, "evenness");
    check(phase, "common-phase invariance");

    const double period = 9.9e12;
    const bp::FabryPerotFilter exact(std::numbers::pi * bp::speed_of_light / period, 150.0);
    bool periodic = true;
    std::uniform_int_distribution<std::int64_t> omega(2'000'000'000'000'000, 2'500'000'000'000'000);
    for (int i = 0; i < 200; ++i) {
      const double x = static_cast<double>(omega(rng));
      periodic &= std::abs(bp::transmittance(exact, x + period) / bp::transmittance(exact, x) - 1.0) < 1e-12;
    }
    check(periodic, "FP periodicity");

    const auto g1 = bp::GaussianFilter::from_wavelength(826.2e-9, 5.3e-9);
    const auto g2 = bp::GaussianFilter::from_wavelength(826.2e-9, 1.8e-9);
    const auto g12 = bp::gaussian_compose(g1, g2);
    bool compose = true;
    for (double d : {0.0, 1e12, -3e12, 7e12})
      compose &= std::abs(bp::transmittance(g12, g1.omega0 + d) -
                          bp::transmittance(g1, g1.omega0 + d) * bp::transmittance(g2, g1.omega0 + d)) < 1e-14;
    check(compose, "Gaussian composition identity");

    const auto l_ag = bp::linspace_step(-400e-6, 400e-6, 4e-6);
    const auto s1 = bp::generate_synthetic_scan(gauss, l_ag, 0.02, 42);
    const auto s2 = bp::generate_synthetic_scan(gauss, l_ag, 0.02, 42);
    const auto f1 = bp::fit_gaussian_envelope(s1);
    const auto f2 = bp::fit_gaussian_envelope(s2);
    check(s1.values() == s2.values() && f1.value("fwhm") == f2.value("fwhm") &&
              f1.estimate("fwhm").uncertainty == f2.estimate("fwhm").uncertainty,
          "fit seed-determinism");

    const auto clean = bp::fit_gaussian_envelope(bp::generate_synthetic_scan(gauss, l_ag, 0.0, 1));
    const double truth = std::get<bp::GaussianInterference>(gauss.variant()).envelope_fwhm() * bp::speed_of_light;
    bp::FpFitConfig cfg;
    cfg.omega1_0 = src.omega1_0();
    cfg.omega2_0 = src.omega2_0();
    cfg.beta2 = w.beta2;
    const auto fp_fit = bp::fit_fp_visibility(
        bp::generate_synthetic_scan(series, bp::linspace_step(0.0, 3e-3, 4e-6), 0.0, 1), cfg);
    check(clean.converged && rel(clean.value("fwhm"), truth) < 1e-3 && fp_fit.converged &&
              rel(fp_fit.value("l_f"), 94.86e-6) < 1e-3,
          "noiseless fit recovery");

    std::string detail = failed.empty() ? "8 of 8 properties hold" : "failed:";
    for (const auto& f : failed) detail += " " + f + ";";
    return std::pair{failed.empty(), detail};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
