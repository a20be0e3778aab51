#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "biphoton/hom.hpp"
#include "cli/csv.hpp"

#ifndef BIPHOTON_SCENARIO_DIR
#define BIPHOTON_SCENARIO_DIR "scenarios"
#endif

namespace biphoton::cli {
namespace {

constexpr double um = 1e-6;
constexpr double nm = 1e-9;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const {
    const auto i = static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
    std::vector<double> c;
    c.reserve(rows.size());
    for (const auto& r : rows) c.push_back(r.at(i));
    return c;
  }
};

void write_table(const Table& t, std::ostream& out) {
  CsvWriter w(out, t.header);
  for (const auto& r : t.rows) w.row(r);
}

void write_table(const Table& t, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError(path.string() + ": cannot open for writing");
  write_table(t, f);
}

Table scan_table(const Scenario& s, const ScanOptions& opt) {
  if (!s.scan) throw InputError("scenario '" + s.name + "' has no scan block");
  const auto model = s.make_model();
  const auto l_um = linspace_step(s.scan->min_um, s.scan->max_um, s.scan->step_um);
  std::vector<double> l(l_um.size());
  std::transform(l_um.begin(), l_um.end(), l.begin(), [](double x) { return x * um; });
  const auto fringes = fringe_scan(model, l, opt.threads);

  Table t{{"l_ag_um", "delta_t_s", "rho", "r_n_max", "r_n_min", "visibility"}, {}};
  if (opt.noise > 0.0) t.header.push_back("sigma");
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < l.size(); ++i) {
    const auto& f = fringes[i];
    std::vector<double> row{l_um[i], airgap_to_delay(l[i]), f.rho, f.rn_max, f.rn_min, f.visibility};
    if (opt.noise > 0.0) {
      row[5] = std::clamp(f.visibility + opt.noise * normal(rng), 0.0, 1.0);
      row.push_back(opt.noise);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table hom_table(const Scenario& s, unsigned threads) {
  if (!s.hom) throw InputError("scenario '" + s.name + "' has no hom block");
  const auto src = s.make_source();
  const auto signal = s.signal_chain();
  const auto idler = s.idler_chain();
  const auto fp = signal.count<FabryPerotFilter>() + idler.count<FabryPerotFilter>();
  const auto w = gaussian_weight(src, signal, idler);

  ModelKind kind = s.model;
  if (kind == ModelKind::fp_series) detail::domain_fail("HOM has no roundtrip-series form; use quadrature");
  if (kind == ModelKind::automatic) kind = fp == 0 && w.shift == 0.0 ? ModelKind::gaussian : ModelKind::quadrature;
  if (kind == ModelKind::gaussian && (fp != 0 || w.shift != 0.0))
    detail::domain_fail("closed HOM form needs centered Gaussian spectra without Fabry-Perot filters");

  std::function<double(double)> rho;
  std::optional<HomQuadrature> quad;
  if (kind == ModelKind::gaussian) {
    const auto m = HomModel::make(std::sqrt(2.0 / w.beta2));
    rho = [m](double dt) { return hom_interference_term(m, dt); };
  } else {
    quad.emplace(src, signal, idler);
    rho = [&quad](double dt) { return quad->rho(dt); };
  }

  const auto x_um = linspace_step(s.hom->min_um, s.hom->max_um, s.hom->step_um);
  const auto values = detail::parallel_map<double>(x_um.size(), threads, [&](std::size_t i) {
    return rho(airgap_to_delay(x_um[i] * um));
  });
  Table t{{"path_diff_um", "delta_t_s", "rho_hom", "r_n"}, {}};
  for (std::size_t i = 0; i < x_um.size(); ++i)
    t.rows.push_back({x_um[i], airgap_to_delay(x_um[i] * um), values[i], 1.0 - values[i]});
  return t;
}

Table spectrum_table(const Scenario& s, const SpectrumRange& r) {
  if (!(r.min_nm > 0.0 && r.max_nm >= r.min_nm)) detail::domain_fail("invalid wavelength range");
  const auto src = s.make_source();
  const auto signal = s.signal_chain();
  Table t{{"lambda_nm", "transmittance"}, {}};
  for (double lambda : linspace_step(r.min_nm, r.max_nm, r.step_nm)) {
    const double omega = wavelength_to_angular_frequency(lambda * nm);
    const double x = (omega - src.omega1_0()) / src.sigma_geo1();
    t.rows.push_back({lambda, std::exp(-x * x) * transmittance(signal, omega)});
  }
  return t;
}

Scenario load_bundled(const std::filesystem::path& dir, const std::string& name) {
  return load_scenario((dir / (name + ".yaml")).string());
}

FabryPerotSpec& signal_fp(Scenario& s) {
  for (auto& f : s.signal_filters)
    if (auto* p = std::get_if<FabryPerotSpec>(&f)) return *p;
  throw InputError("scenario '" + s.name + "' has no Fabry-Perot filter on the signal arm");
}

std::string length_tag(double l_f_um) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", l_f_um);
  return buf;
}

double value_at(const Table& t, const std::string& xcol, const std::string& ycol, double x0) {
  const auto x = t.column(xcol);
  const auto y = t.column(ycol);
  const auto it = std::min_element(x.begin(), x.end(),
                                   [x0](double a, double b) { return std::abs(a - x0) < std::abs(b - x0); });
  return y[static_cast<std::size_t>(it - x.begin())];
}

// Peak-to-valley of the smooth visibility between 0.9 and 1.1 mm.
double modulation_depth(const Scenario& s) {
  const auto model = s.make_model();
  double hi = 0.0, lo = 1.0;
  for (double l : linspace_step(900.0, 1100.0, 1.0)) {
    const double v = model.envelope(airgap_to_delay(l * um));
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  }
  return hi - lo;
}

std::vector<Headline> reproduce_fig2(const std::filesystem::path& dir, const std::filesystem::path& out,
                                     unsigned threads) {
  std::vector<Headline> h;
  const struct {
    const char* scenario;
    const char* label;
    std::optional<double> reference;
  } cases[] = {
      {"fig2_nofilter", "envelope FWHM (no filter)", 160.0},
      {"fig2_filter", "envelope FWHM (1.8 nm filter only)", 350.0},
      {"fig2_composed", "envelope FWHM (filter and geometric)", std::nullopt},
  };
  for (const auto& c : cases) {
    const auto s = load_bundled(dir, c.scenario);
    const auto t = scan_table(s, {threads, 0.0, 0});
    write_table(t, out / (std::string(c.scenario) + ".csv"));
    // Width of the smooth envelope on the scan grid. The sampled visibility
    // column picks R_max and R_min half a fringe apart, which biases its
    // half-maximum crossings by a fraction of a micrometre.
    const auto x = t.column("l_ag_um");
    const auto model = s.make_model();
    std::vector<double> env(x.size());
    std::transform(x.begin(), x.end(), env.begin(), [&](double l) { return model.envelope(airgap_to_delay(l * um)); });
    const auto w = half_max_width(x, env);
    if (!w) throw NumericError(std::string(c.scenario) + ": scan range does not cover the half maximum");
    h.push_back({c.label, "um", *w, c.reference});
  }
  return h;
}

std::vector<Headline> reproduce_fig3(const std::filesystem::path& dir, const std::filesystem::path& out,
                                     unsigned threads) {
  std::vector<Headline> h;
  auto base = load_bundled(dir, "fig3_fp");
  const double l_f = signal_fp(base).l_f_um;

  const auto t = scan_table(base, {threads, 0.0, 0});
  write_table(t, out / "fig3_fp.csv");
  const auto x = t.column("l_ag_um");
  const auto v = t.column("visibility");
  const auto period = dominant_period(x, v);
  if (!period) throw NumericError("fig3: no visibility modulation found");
  h.push_back({"visibility modulation period (Fourier)", "um", period->period, 2.0 * l_f});

  const FabryPerotFilter fp(l_f * um, signal_fp(base).finesse);
  const double fsr = fp_free_spectral_range(fp).wavelength_at(base.source.signal_center_nm * nm) / nm;
  h.push_back({"free spectral range at l_F = " + length_tag(l_f) + " um", "nm", fsr, 3.6});

  std::vector<double> depths;
  for (double len : {94.80, 94.86, 95.00}) {
    auto s = base;
    signal_fp(s).l_f_um = len;
    if (len != l_f) write_table(scan_table(s, {threads, 0.0, 0}), out / ("fig3_lf" + length_tag(len) + ".csv"));
    depths.push_back(modulation_depth(s));
    h.push_back({"modulation depth near 1 mm, l_F = " + length_tag(len) + " um", "", depths.back(), std::nullopt});
  }
  h.push_back({"depth ordering 94.80 > 94.86 > 95.00 holds", "bool",
               depths[0] > depths[1] && depths[1] > depths[2] ? 1.0 : 0.0, std::nullopt});
  return h;
}

std::vector<Headline> reproduce_fig4(const std::filesystem::path& dir, const std::filesystem::path& out) {
  auto s = load_bundled(dir, "fig3_fp");
  const auto t = spectrum_table(s, default_spectrum_range(s));
  write_table(t, out / "fig4_spectrum.csv");

  // spacing of the transmission peaks that carry at least 1% of the maximum
  const auto lam = t.column("lambda_nm");
  const auto tr = t.column("transmittance");
  const double top = *std::max_element(tr.begin(), tr.end());
  std::vector<double> peaks;
  for (std::size_t i = 1; i + 1 < tr.size(); ++i)
    if (tr[i] > tr[i - 1] && tr[i] >= tr[i + 1] && tr[i] > 0.01 * top) peaks.push_back(lam[i]);
  if (peaks.size() < 2) throw NumericError("fig4: fewer than two transmission peaks in range");
  std::vector<double> gaps;
  for (std::size_t i = 1; i < peaks.size(); ++i) gaps.push_back(peaks[i] - peaks[i - 1]);
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());

  const auto& fp = signal_fp(s);
  return {
      {"free spectral range from peak spacing, l_F = " + length_tag(fp.l_f_um) + " um", "nm",
       gaps[gaps.size() / 2], 3.6},
      {"transmission peaks above 1% of maximum", "", static_cast<double>(peaks.size()), std::nullopt},
  };
}

std::vector<Headline> reproduce_fig5(const std::filesystem::path& dir, const std::filesystem::path& out,
                                     unsigned threads) {
  const auto with_filter = load_bundled(dir, "fig5_fp_plus_filter");
  const auto t = scan_table(with_filter, {threads, 0.0, 0});
  write_table(t, out / "fig5_fp_plus_filter.csv");
  const auto x = t.column("l_ag_um");
  const auto v = t.column("visibility");

  std::vector<Headline> h;
  const auto w = half_max_width(x, v);
  if (w) h.push_back({"visibility FWHM (FP and filter)", "um", *w, std::nullopt});
  h.push_back({"visibility at l_AG = 2 mm (FP and filter)", "", value_at(t, "l_ag_um", "visibility", 2000.0),
               std::nullopt});
  const auto bare = load_bundled(dir, "fig2_nofilter");
  h.push_back({"visibility at l_AG = 2 mm (no filter)", "",
               bare.make_model().envelope(airgap_to_delay(2000.0 * um)), std::nullopt});
  const auto period = dominant_period(x, v);
  h.push_back({"modulation detected", "bool", period ? 1.0 : 0.0, std::nullopt});
  return h;
}

std::vector<Headline> reproduce_fig7(const std::filesystem::path& dir, const std::filesystem::path& out,
                                     unsigned threads) {
  const auto s = load_bundled(dir, "fig7_hom");
  const auto t = hom_table(s, threads);
  write_table(t, out / "fig7_hom.csv");
  const auto w = half_max_width(t.column("path_diff_um"), t.column("rho_hom"));
  if (!w) throw NumericError("fig7: scan range does not cover the half depth");
  return {{"HOM dip FWHM", "um", *w, 72.0}};
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string deviation(const Headline& h) {
  if (!h.reference) return "";
  return fmt("%+.2f%%", 100.0 * (h.computed - *h.reference) / *h.reference);
}

void write_summary_csv(const std::vector<Headline>& rows, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError(path.string() + ": cannot open for writing");
  f << "quantity,unit,computed,reference,deviation_percent\n";
  for (const auto& h : rows) {
    f << h.quantity << ',' << h.unit << ',' << format_number(h.computed) << ',';
    if (h.reference)
      f << format_number(*h.reference) << ',' << format_number(100.0 * (h.computed - *h.reference) / *h.reference);
    else
      f << ',';
    f << '\n';
  }
}

void open_output(const std::string& path, std::ofstream& file) {
  file.open(path, std::ios::binary);
  if (!file) throw InputError(path + ": cannot open for writing");
}

}  // namespace

void write_scan(const Scenario& s, const ScanOptions& opt, std::ostream& out) {
  if (!(opt.noise >= 0.0 && std::isfinite(opt.noise))) detail::domain_fail("noise must be >= 0");
  write_table(scan_table(s, opt), out);
}

void write_hom(const Scenario& s, unsigned threads, std::ostream& out) { write_table(hom_table(s, threads), out); }

SpectrumRange default_spectrum_range(const Scenario& s) {
  const double c = s.source.signal_center_nm;
  const double half = s.source.signal_geometric_fwhm_nm ? 3.0 * *s.source.signal_geometric_fwhm_nm : 10.0;
  return {c - half, c + half, 0.002};
}

void write_spectrum(const Scenario& s, const SpectrumRange& range, std::ostream& out) {
  write_table(spectrum_table(s, range), out);
}

FitResult run_fit(const VisibilityScan& scan, const FitConfig& cfg) {
  const double lambda = cfg.center_wavelength_nm * nm;
  if (cfg.model == "gaussian_envelope") return fit_gaussian_envelope(scan, {lambda});

  const double w = wavelength_to_angular_frequency(lambda);
  const BiphotonSource src(2.0 * w, w, fwhm_wavelength_to_sigma(cfg.signal_geometric_fwhm_nm * nm, lambda),
                           fwhm_wavelength_to_sigma(cfg.idler_geometric_fwhm_nm * nm, lambda));
  FilterChain signal;
  if (cfg.signal_filter_fwhm_nm)
    signal.filters.emplace_back(GaussianFilter::from_wavelength(lambda, *cfg.signal_filter_fwhm_nm * nm));

  FpFitConfig f;
  f.omega1_0 = w;
  f.omega2_0 = w;
  f.beta2 = gaussian_weight(src, signal, {}).beta2;
  f.finesse = cfg.finesse;
  f.finesse_free = cfg.finesse_free;
  if (cfg.l_f_um) f.l_f = *cfg.l_f_um * um;
  f.l_f_free = cfg.l_f_free;
  f.l_f_window = cfg.l_f_window_um * um;
  f.arm_ratio = cfg.arm_ratio;
  f.arm_ratio_free = cfg.arm_ratio_free;
  return fit_fp_visibility(scan, f);
}

void write_fit_report(const FitResult& fit, const FitConfig& cfg, std::ostream& out) {
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %24s %24s  %s\n", "parameter", "value", "uncertainty", "status");
  out << line;
  for (const auto& e : fit.estimates) {
    std::snprintf(line, sizeof line, "%-12s %24.12g %24.6g  %s\n", e.name.c_str(), e.value, e.uncertainty,
                  e.free ? "free" : "fixed");
    out << line;
  }
  out << "\nmodel=" << cfg.model << '\n'
      << "method=" << fit.method << '\n'
      << "converged=" << (fit.converged ? "true" : "false") << '\n'
      << "iterations=" << fit.iterations << '\n'
      << "points=" << fit.residuals.size() << '\n'
      << "rss=" << format_number(fit.rss) << '\n';
  double rn = 0.0;
  for (double r : fit.residuals) rn += r * r;
  out << "residual_norm=" << format_number(std::sqrt(rn)) << '\n';
  for (const auto& e : fit.estimates) {
    out << e.name << '=' << format_number(e.value) << '\n';
    out << e.name << "_uncertainty=" << format_number(e.uncertainty) << '\n';
  }
  for (const auto& [k, v] : fit.derived) out << k << '=' << format_number(v) << '\n';
}

std::optional<double> half_max_width(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) return std::nullopt;
  const auto ipk = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  const double half = 0.5 * y[ipk];
  auto cross = [&](std::size_t a, std::size_t b) {
    return x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
  };
  std::optional<double> left, right;
  for (std::size_t i = ipk; i > 0; --i)
    if (y[i - 1] < half) {
      left = cross(i - 1, i);
      break;
    }
  for (std::size_t i = ipk; i + 1 < y.size(); ++i)
    if (y[i + 1] < half) {
      right = cross(i, i + 1);
      break;
    }
  if (!left || !right) return std::nullopt;
  return *right - *left;
}

std::vector<Headline> reproduce(const std::string& figure, const std::filesystem::path& scenario_dir,
                                const std::filesystem::path& out_dir, unsigned threads) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw InputError(out_dir.string() + ": " + ec.message());
  std::vector<Headline> h;
  if (figure == "fig2") h = reproduce_fig2(scenario_dir, out_dir, threads);
  else if (figure == "fig3") h = reproduce_fig3(scenario_dir, out_dir, threads);
  else if (figure == "fig4") h = reproduce_fig4(scenario_dir, out_dir);
  else if (figure == "fig5") h = reproduce_fig5(scenario_dir, out_dir, threads);
  else if (figure == "fig7") h = reproduce_fig7(scenario_dir, out_dir, threads);
  else throw InputError("unknown figure '" + figure + "' (expected fig2, fig3, fig4, fig5 or fig7)");
  write_summary_csv(h, out_dir / (figure + "_summary.csv"));
  return h;
}

void write_headlines(const std::string& figure, const std::vector<Headline>& rows, std::ostream& out) {
  char line[200];
  std::snprintf(line, sizeof line, "%-6s %-52s %14s %10s %10s\n", "figure", "quantity", "computed", "reference",
                "deviation");
  out << line;
  for (const auto& h : rows) {
    const auto label = h.unit.empty() || h.unit == "bool" ? h.quantity : h.quantity + " [" + h.unit + "]";
    const auto computed = h.unit == "bool" ? std::string(h.computed != 0.0 ? "yes" : "no") : fmt("%.4f", h.computed);
    std::snprintf(line, sizeof line, "%-6s %-52s %14s %10s %10s\n", figure.c_str(), label.c_str(), computed.c_str(),
                  h.reference ? fmt("%g", *h.reference).c_str() : "", deviation(h).c_str());
    out << line;
  }
}

std::filesystem::path bundled_scenario_dir() { return BIPHOTON_SCENARIO_DIR; }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-photon interference with spectral filtering: scans, HOM dips, fits"};
  app.require_subcommand(1);

  std::string scenario_path, out_path, format = "csv";
  unsigned threads = 1;
  std::uint64_t seed = 0;
  double noise = 0.0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario_path, "Scenario file (YAML)")->required();
    sub->add_option("--out", out_path, "Write the CSV here instead of standard output");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv"}));
  };

  auto* scan = app.add_subcommand("scan", "Visibility versus air-gap position");
  add_common(scan);
  scan->add_option("--noise", noise, "Add Gaussian noise of this standard deviation to the visibility")
      ->check(CLI::NonNegativeNumber);
  scan->add_option("--seed", seed, "Seed for --noise");

  auto* hom = app.add_subcommand("hom", "Hong-Ou-Mandel coincidence dip");
  add_common(hom);

  SpectrumRange range;
  auto* spectrum = app.add_subcommand("spectrum", "Signal-arm spectrum in wavelength");
  add_common(spectrum);
  auto* o_min = spectrum->add_option("--lambda-min", range.min_nm, "Lower wavelength, nm");
  auto* o_max = spectrum->add_option("--lambda-max", range.max_nm, "Upper wavelength, nm");
  auto* o_step = spectrum->add_option("--lambda-step", range.step_nm, "Wavelength step, nm");

  std::string data_path, config_path;
  auto* fit = app.add_subcommand("fit", "Fit a measured or synthetic visibility scan");
  fit->add_option("--data", data_path, "CSV with l_ag_um, visibility[, sigma]")->required();
  fit->add_option("--config", config_path, "Fit configuration (YAML)")->required();

  std::string figure;
  std::string out_dir = ".";
  std::string scenario_dir = bundled_scenario_dir().string();
  auto* repro = app.add_subcommand("reproduce", "Regenerate the curves and headline numbers of one figure");
  repro->add_option("figure", figure, "fig2, fig3, fig4, fig5 or fig7")->required();
  repro->add_option("--out", out_dir, "Directory for the CSV files");
  repro->add_option("--scenarios", scenario_dir, "Directory with the bundled scenario files");
  repro->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 1024u));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_input;
  }

  try {
    std::ofstream file;
    auto sink = [&]() -> std::ostream& {
      if (out_path.empty()) return out;
      open_output(out_path, file);
      return file;
    };
    if (*scan) {
      const auto s = load_scenario(scenario_path);
      std::ostringstream buf;
      write_scan(s, {threads, noise, seed}, buf);
      sink() << buf.str();
    } else if (*hom) {
      const auto s = load_scenario(scenario_path);
      std::ostringstream buf;
      write_hom(s, threads, buf);
      sink() << buf.str();
    } else if (*spectrum) {
      const auto s = load_scenario(scenario_path);
      auto r = default_spectrum_range(s);
      if (*o_min) r.min_nm = range.min_nm;
      if (*o_max) r.max_nm = range.max_nm;
      if (*o_step) r.step_nm = range.step_nm;
      std::ostringstream buf;
      write_spectrum(s, r, buf);
      sink() << buf.str();
    } else if (*fit) {
      const auto cfg = load_fit_config(config_path);
      const auto data = load_scan_csv(data_path);
      const auto result = run_fit(data, cfg);
      write_fit_report(result, cfg, out);
      if (!result.converged) {
        err << "fit did not converge; estimates are not authoritative\n";
        return exit_fit;
      }
    } else if (*repro) {
      const auto rows = reproduce(figure, scenario_dir, out_dir, threads);
      write_headlines(figure, rows, out);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return exit_input;
  } catch (const FitError& e) {
    err << "fit error: " << e.what() << '\n';
    return exit_fit;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return exit_numeric;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << '\n';
    return exit_input;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return exit_internal;
  }
  return exit_ok;
}

}  // namespace biphoton::cli
