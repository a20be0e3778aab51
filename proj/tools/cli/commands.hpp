#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "biphoton/fitting.hpp"
#include "cli/scenario.hpp"

namespace biphoton::cli {

/// Stable process exit codes.
enum ExitCode : int {
  exit_ok = 0,
  exit_internal = 1,
  exit_input = 2,    ///< unreadable or invalid input, unknown figure id
  exit_numeric = 3,  ///< numeric failure during evaluation
  exit_fit = 4,      ///< fit did not converge or is ill-posed
};

struct ScanOptions {
  unsigned threads = 1;
  double noise = 0.0;  ///< standard deviation added to the visibility column
  std::uint64_t seed = 0;
};

void write_scan(const Scenario& s, const ScanOptions& opt, std::ostream& out);
void write_hom(const Scenario& s, unsigned threads, std::ostream& out);

struct SpectrumRange {
  double min_nm = 0.0;
  double max_nm = 0.0;
  double step_nm = 0.0;
};

/// Default window: signal center +- 3 geometric FWHM (or 10 nm without
/// geometric filtering) at 0.002 nm.
SpectrumRange default_spectrum_range(const Scenario& s);

/// Signal-arm spectrum: geometric Gaussian times the filter chain, sampled in
/// wavelength.
void write_spectrum(const Scenario& s, const SpectrumRange& range, std::ostream& out);

FitResult run_fit(const VisibilityScan& scan, const FitConfig& cfg);
void write_fit_report(const FitResult& fit, const FitConfig& cfg, std::ostream& out);

struct Headline {
  std::string quantity;
  std::string unit;
  double computed = 0.0;
  std::optional<double> reference;  ///< published value, when there is one
};

inline const std::vector<std::string> figure_ids{"fig2", "fig3", "fig4", "fig5", "fig7"};

/// Runs the bundled scenario(s) of one figure, writes the curve CSVs into
/// out_dir and returns the headline numbers.
std::vector<Headline> reproduce(const std::string& figure, const std::filesystem::path& scenario_dir,
                                const std::filesystem::path& out_dir, unsigned threads = 1);
void write_headlines(const std::string& figure, const std::vector<Headline>& rows, std::ostream& out);

/// Full width at half maximum of a sampled single-peak curve, by linear
/// interpolation of both half-maximum crossings. nullopt when a crossing is
/// outside the samples.
std::optional<double> half_max_width(const std::vector<double>& x, const std::vector<double>& y);

std::filesystem::path bundled_scenario_dir();

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace biphoton::cli
