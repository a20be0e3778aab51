#include "cli/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "biphoton/units.hpp"

namespace biphoton::cli {
namespace {

constexpr double nm = 1e-9;
constexpr double um = 1e-6;

[[noreturn]] void fail(const std::string& origin, const YAML::Node& node, const std::string& what) {
  std::ostringstream msg;
  msg << origin;
  if (node.IsDefined() && node.Mark().line >= 0) msg << ":" << node.Mark().line + 1 << ":" << node.Mark().column + 1;
  msg << ": " << what;
  throw InputError(msg.str());
}

// Walks one YAML mapping, tracking which keys were consumed.
class Fields {
 public:
  Fields(const YAML::Node& node, std::string path, const std::string& origin)
      : node_(node), path_(std::move(path)), origin_(origin) {
    if (!node.IsMap()) fail(origin_, node, path_ + " must be a mapping");
  }

  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

  YAML::Node raw(const std::string& key) {
    seen_.insert(key);
    return node_[key];
  }

  double number(const std::string& key) {
    const auto n = raw(key);
    if (!n) fail(origin_, node_, "missing field " + where(key));
    return as_number(n, key);
  }

  double number_or(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  std::string text(const std::string& key) {
    const auto n = raw(key);
    if (!n) fail(origin_, node_, "missing field " + where(key));
    if (!n.IsScalar()) fail(origin_, n, where(key) + " must be a string");
    return n.Scalar();
  }

  std::string text_or(const std::string& key, const std::string& fallback) {
    return has(key) ? text(key) : fallback;
  }

  bool flag_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto n = raw(key);
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(origin_, n, where(key) + " must be true or false");
    }
  }

  int integer(const std::string& key) {
    const auto n = raw(key);
    if (!n) fail(origin_, node_, "missing field " + where(key));
    try {
      return n.as<int>();
    } catch (const YAML::Exception&) {
      fail(origin_, n, where(key) + " must be an integer");
    }
  }

  double as_number(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(origin_, n, where(key) + " must be a number");
    double v = 0.0;
    try {
      v = n.as<double>();
    } catch (const YAML::Exception&) {
      fail(origin_, n, where(key) + " must be a number, got '" + n.Scalar() + "'");
    }
    if (!std::isfinite(v)) fail(origin_, n, where(key) + " must be finite");
    return v;
  }

  /// Unknown keys are errors.
  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(origin_, kv.first, "unknown field " + where(key));
    }
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& origin() const { return origin_; }

 private:
  YAML::Node node_;
  std::string path_;
  const std::string& origin_;
  std::set<std::string> seen_;
};

void positive(const Fields& f, const YAML::Node& n, const std::string& key, double v) {
  if (!(v > 0.0)) fail(f.origin(), n, f.where(key) + " must be positive");
}

std::optional<double> geometric_fwhm(Fields& f, const std::string& key) {
  const auto n = f.raw(key);
  if (!n) fail(f.origin(), n, "missing field " + f.where(key));
  if (n.IsScalar() && n.Scalar() == "none") return std::nullopt;
  const double v = f.as_number(n, key);
  positive(f, n, key, v);
  return v;
}

FilterSpec parse_filter(const YAML::Node& node, const std::string& path, const std::string& origin) {
  Fields f(node, path, origin);
  const auto type = f.text("type");
  if (type == "gaussian") {
    GaussianSpec g;
    g.center_nm = f.number("center_nm");
    g.fwhm_nm = f.number("fwhm_nm");
    positive(f, node["center_nm"], "center_nm", g.center_nm);
    positive(f, node["fwhm_nm"], "fwhm_nm", g.fwhm_nm);
    f.finish();
    return g;
  }
  if (type == "fabry_perot") {
    FabryPerotSpec p;
    p.l_f_um = f.number("l_f_um");
    p.finesse = f.number("finesse");
    p.t_max = f.number_or("t_max", 1.0);
    positive(f, node["l_f_um"], "l_f_um", p.l_f_um);
    if (!(p.finesse > 1.0)) fail(origin, node["finesse"], f.where("finesse") + " must exceed 1");
    if (!(p.t_max > 0.0 && p.t_max <= 1.0))
      fail(origin, node["t_max"], f.where("t_max") + " must lie in (0, 1]");
    f.finish();
    return p;
  }
  fail(origin, node["type"], f.where("type") + " must be 'gaussian' or 'fabry_perot', got '" + type + "'");
}

std::vector<FilterSpec> parse_filters(Fields& top, const std::string& key) {
  std::vector<FilterSpec> out;
  if (!top.has(key)) return out;
  const auto list = top.raw(key);
  if (list.IsNull()) return out;
  if (!list.IsSequence()) fail(top.origin(), list, key + " must be a list");
  for (std::size_t i = 0; i < list.size(); ++i)
    out.push_back(parse_filter(list[i], key + "[" + std::to_string(i) + "]", top.origin()));
  return out;
}

RangeSpec parse_range(const YAML::Node& node, const std::string& path, const std::string& lo_key,
                      const std::string& hi_key, const std::string& origin) {
  Fields f(node, path, origin);
  RangeSpec r;
  r.min_um = f.number(lo_key);
  r.max_um = f.number(hi_key);
  r.step_um = f.number("step_um");
  if (r.max_um < r.min_um) fail(origin, node[hi_key], f.where(hi_key) + " must not be below " + lo_key);
  if (r.max_um > r.min_um && !(r.step_um > 0.0)) fail(origin, node["step_um"], f.where("step_um") + " must be positive");
  f.finish();
  return r;
}

YAML::Node load_yaml(const std::string& text, const std::string& origin) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream msg;
    msg << origin << ":" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
    throw InputError(msg.str());
  }
}

void check_version(Fields& f, const YAML::Node& root) {
  const int v = f.integer("schema_version");
  if (v != scenario_schema_version)
    fail(f.origin(), root["schema_version"],
         "unsupported schema_version " + std::to_string(v) + " (expected " +
             std::to_string(scenario_schema_version) + ")");
}

double to_sigma(const std::optional<double>& fwhm_nm, double center_nm) {
  if (!fwhm_nm) return std::numeric_limits<double>::infinity();
  return fwhm_wavelength_to_sigma(*fwhm_nm * nm, center_nm * nm);
}

FilterChain to_chain(const std::vector<FilterSpec>& specs) {
  FilterChain chain;
  for (const auto& s : specs) {
    if (const auto* g = std::get_if<GaussianSpec>(&s))
      chain.filters.emplace_back(GaussianFilter::from_wavelength(g->center_nm * nm, g->fwhm_nm * nm));
    else {
      const auto& p = std::get<FabryPerotSpec>(s);
      chain.filters.emplace_back(FabryPerotFilter(p.l_f_um * um, p.finesse, p.t_max));
    }
  }
  return chain;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  const auto root = load_yaml(text, origin);
  if (!root.IsMap()) throw InputError(origin + ": scenario must be a YAML mapping");
  Fields top(root, "", origin);
  Scenario s;
  check_version(top, root);
  s.schema_version = scenario_schema_version;
  s.name = top.text_or("name", "");
  s.description = top.text_or("description", "");

  {
    const auto node = top.raw("source");
    if (!node) fail(origin, root, "missing block 'source'");
    Fields f(node, "source", origin);
    auto& src = s.source;
    src.pump_wavelength_nm = f.number("pump_wavelength_nm");
    positive(f, node["pump_wavelength_nm"], "pump_wavelength_nm", src.pump_wavelength_nm);
    src.signal_center_nm = f.number_or("signal_center_nm", 2.0 * src.pump_wavelength_nm);
    positive(f, node["signal_center_nm"], "signal_center_nm", src.signal_center_nm);
    src.idler_center_nm = f.optional_number("idler_center_nm");
    src.signal_geometric_fwhm_nm = geometric_fwhm(f, "signal_geometric_fwhm_nm");
    src.idler_geometric_fwhm_nm = geometric_fwhm(f, "idler_geometric_fwhm_nm");
    f.finish();

    if (!(src.signal_center_nm > src.pump_wavelength_nm))
      fail(origin, node["signal_center_nm"], "source.signal_center_nm must exceed the pump wavelength");
    if (src.idler_center_nm) {
      const double lhs = 1.0 / src.signal_center_nm + 1.0 / *src.idler_center_nm;
      const double rhs = 1.0 / src.pump_wavelength_nm;
      if (std::abs(lhs - rhs) > 1e-9 * rhs)
        fail(origin, node["idler_center_nm"],
             "source center wavelengths violate energy conservation: 1/signal + 1/idler != 1/pump");
    }
  }

  s.signal_filters = parse_filters(top, "signal_filters");
  s.idler_filters = parse_filters(top, "idler_filters");

  if (top.has("mzi")) {
    const auto node = top.raw("mzi");
    Fields f(node, "mzi", origin);
    s.mzi.arm_ratio = f.number_or("arm_ratio", 1.0);
    s.mzi.arm_phase_deg = f.number_or("arm_phase_deg", 0.0);
    positive(f, node["arm_ratio"], "arm_ratio", s.mzi.arm_ratio);
    f.finish();
  }

  if (top.has("model")) {
    const auto node = top.raw("model");
    const auto m = top.text("model");
    if (m == "auto") s.model = ModelKind::automatic;
    else if (m == "gaussian") s.model = ModelKind::gaussian;
    else if (m == "fp_series") s.model = ModelKind::fp_series;
    else if (m == "quadrature") s.model = ModelKind::quadrature;
    else fail(origin, node, "model must be one of auto, gaussian, fp_series, quadrature");
  }

  if (top.has("scan"))
    s.scan = parse_range(top.raw("scan"), "scan", "l_ag_min_um", "l_ag_max_um", origin);
  if (top.has("hom"))
    s.hom = parse_range(top.raw("hom"), "hom", "path_diff_min_um", "path_diff_max_um", origin);
  if (s.scan.has_value() == s.hom.has_value())
    fail(origin, root, "exactly one of the blocks 'scan' and 'hom' must be present");

  top.finish();

  // Physical consistency that depends on several fields at once.
  try {
    (void)s.make_source();
    (void)s.signal_chain();
    (void)s.idler_chain();
    if (!s.source.signal_geometric_fwhm_nm && !s.source.idler_geometric_fwhm_nm) {
      bool any_gaussian = false;
      for (const auto* list : {&s.signal_filters, &s.idler_filters})
        for (const auto& f : *list) any_gaussian |= std::holds_alternative<GaussianSpec>(f);
      if (!any_gaussian)
        throw InputError(origin + ": spectrum is not normalizable: no geometric filtering and no Gaussian filter");
    }
  } catch (const DomainError& e) {
    throw InputError(origin + ": " + e.what());
  }
  return s;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path), path); }

BiphotonSource Scenario::make_source() const {
  const double wp = wavelength_to_angular_frequency(source.pump_wavelength_nm * nm);
  const double w1 = wavelength_to_angular_frequency(source.signal_center_nm * nm);
  const double lambda2 = angular_frequency_to_wavelength(wp - w1) / nm;
  return {wp, w1, to_sigma(source.signal_geometric_fwhm_nm, source.signal_center_nm),
          to_sigma(source.idler_geometric_fwhm_nm, lambda2)};
}

FilterChain Scenario::signal_chain() const { return to_chain(signal_filters); }
FilterChain Scenario::idler_chain() const { return to_chain(idler_filters); }

MachZehnder Scenario::make_mzi() const {
  return MachZehnder::from_ratio(mzi.arm_ratio, mzi.arm_phase_deg * std::numbers::pi / 180.0);
}

InterferenceModel Scenario::make_model() const {
  return make_interference_model(make_source(), signal_chain(), idler_chain(), make_mzi(), model);
}

FitConfig parse_fit_config(const std::string& text, const std::string& origin) {
  const auto root = load_yaml(text, origin);
  if (!root.IsMap()) throw InputError(origin + ": fit configuration must be a YAML mapping");
  Fields f(root, "", origin);
  check_version(f, root);
  FitConfig c;
  c.model = f.text("model");
  if (c.model != "gaussian_envelope" && c.model != "fp_series" && c.model != "fp_plus_filter")
    fail(origin, root["model"], "model must be gaussian_envelope, fp_series or fp_plus_filter");
  c.center_wavelength_nm = f.number_or("center_wavelength_nm", c.center_wavelength_nm);
  positive(f, root["center_wavelength_nm"], "center_wavelength_nm", c.center_wavelength_nm);
  c.signal_geometric_fwhm_nm = f.number_or("signal_geometric_fwhm_nm", c.signal_geometric_fwhm_nm);
  c.idler_geometric_fwhm_nm = f.number_or("idler_geometric_fwhm_nm", c.idler_geometric_fwhm_nm);
  positive(f, root["signal_geometric_fwhm_nm"], "signal_geometric_fwhm_nm", c.signal_geometric_fwhm_nm);
  positive(f, root["idler_geometric_fwhm_nm"], "idler_geometric_fwhm_nm", c.idler_geometric_fwhm_nm);
  c.signal_filter_fwhm_nm = f.optional_number("signal_filter_fwhm_nm");
  if (c.model == "fp_plus_filter" && !c.signal_filter_fwhm_nm)
    fail(origin, root, "fp_plus_filter needs signal_filter_fwhm_nm");
  if (c.signal_filter_fwhm_nm) positive(f, root["signal_filter_fwhm_nm"], "signal_filter_fwhm_nm", *c.signal_filter_fwhm_nm);
  c.finesse = f.number_or("finesse", c.finesse);
  if (!(c.finesse > 1.0)) fail(origin, root["finesse"], "finesse must exceed 1");
  c.finesse_free = f.flag_or("finesse_free", c.finesse_free);
  c.l_f_um = f.optional_number("l_f_um");
  if (c.l_f_um) positive(f, root["l_f_um"], "l_f_um", *c.l_f_um);
  c.l_f_free = f.flag_or("l_f_free", c.l_f_free);
  c.l_f_window_um = f.number_or("l_f_window_um", c.l_f_window_um);
  positive(f, root["l_f_window_um"], "l_f_window_um", c.l_f_window_um);
  c.arm_ratio = f.number_or("arm_ratio", c.arm_ratio);
  if (!(c.arm_ratio > 0.0 && c.arm_ratio <= 1.0)) fail(origin, root["arm_ratio"], "arm_ratio must lie in (0, 1]");
  c.arm_ratio_free = f.flag_or("arm_ratio_free", c.arm_ratio_free);
  if (!c.l_f_free && !c.l_f_um) fail(origin, root, "l_f_free: false needs l_f_um");
  f.finish();
  return c;
}

FitConfig load_fit_config(const std::string& path) { return parse_fit_config(read_file(path), path); }

}  // namespace biphoton::cli
