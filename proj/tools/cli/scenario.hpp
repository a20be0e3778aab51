#pragma once

// Scenario files: YAML documents with a schema_version field. Unknown keys
// are rejected so that a misspelled parameter cannot silently fall back to a
// default.

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "biphoton/mzi.hpp"
#include "biphoton/spectra.hpp"

namespace biphoton::cli {

inline constexpr int scenario_schema_version = 1;

/// Malformed input file; maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SourceSpec {
  double pump_wavelength_nm = 0.0;
  double signal_center_nm = 0.0;
  std::optional<double> idler_center_nm;
  std::optional<double> signal_geometric_fwhm_nm;  ///< nullopt: no geometric filtering
  std::optional<double> idler_geometric_fwhm_nm;
};

struct GaussianSpec {
  double center_nm = 0.0;
  double fwhm_nm = 0.0;
};

struct FabryPerotSpec {
  double l_f_um = 0.0;
  double finesse = 0.0;
  double t_max = 1.0;
};

using FilterSpec = std::variant<GaussianSpec, FabryPerotSpec>;

struct MziSpec {
  double arm_ratio = 1.0;
  double arm_phase_deg = 0.0;
};

struct RangeSpec {
  double min_um = 0.0;
  double max_um = 0.0;
  double step_um = 0.0;
};

struct Scenario {
  int schema_version = scenario_schema_version;
  std::string name;
  std::string description;
  SourceSpec source;
  std::vector<FilterSpec> signal_filters;
  std::vector<FilterSpec> idler_filters;
  MziSpec mzi;
  ModelKind model = ModelKind::automatic;
  std::optional<RangeSpec> scan;  ///< air-gap range
  std::optional<RangeSpec> hom;   ///< HOM path-difference range

  BiphotonSource make_source() const;
  FilterChain signal_chain() const;
  FilterChain idler_chain() const;
  MachZehnder make_mzi() const;
  InterferenceModel make_model() const;
};

Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");
Scenario load_scenario(const std::string& path);

struct FitConfig {
  int schema_version = scenario_schema_version;
  std::string model = "gaussian_envelope";  ///< gaussian_envelope | fp_series | fp_plus_filter
  double center_wavelength_nm = 826.2;
  double signal_geometric_fwhm_nm = 5.3;
  double idler_geometric_fwhm_nm = 5.3;
  std::optional<double> signal_filter_fwhm_nm;
  double finesse = 150.0;
  bool finesse_free = false;
  std::optional<double> l_f_um;
  bool l_f_free = true;
  double l_f_window_um = 0.5;
  double arm_ratio = 1.0;
  bool arm_ratio_free = true;
};

FitConfig parse_fit_config(const std::string& text, const std::string& origin = "<string>");
FitConfig load_fit_config(const std::string& path);

std::string read_file(const std::string& path);

}  // namespace biphoton::cli
