#include "mirpairs_cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mirpairs/coincidence.hpp"
#include "mirpairs/config.hpp"
#include "mirpairs/csvio.hpp"
#include "mirpairs/detector.hpp"
#include "mirpairs/fwm.hpp"
#include "mirpairs/interference.hpp"
#include "mirpairs/nlse.hpp"
#include "mirpairs/pairsource.hpp"
#include "mirpairs/physmodel.hpp"
#include "mirpairs/retrieval.hpp"
#include "mirpairs/rng.hpp"
#include "mirpairs/tagio.hpp"
#include "mirpairs/version.hpp"

namespace mirpairs_cli {

namespace {

using nlohmann::json;
using namespace mirpairs;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitRuntime = 4;

// ---------------------------------------------------------------- utilities

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("MIRPAIRS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1 || v > 256)
      throw config::ConfigError("MIRPAIRS_THREADS", "must be an integer in [1, 256]");
    return static_cast<int>(v);
  }
  return 1;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

json base_json(const config::ExperimentConfig& cfg) {
  json j;
  j["tool_version"] = kVersion;
  j["config_hash"] = cfg.config_hash;
  return j;
}

void add_provenance(csvio::CsvWriter& csv, const config::ExperimentConfig& cfg) {
  csv.add_comment("tool_version", kVersion);
  csv.add_comment("config_hash", std::to_string(cfg.config_hash));
}

struct CsvTable {
  std::map<std::string, std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error("csv input: missing column '" + name + "'");
  }
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      const std::size_t eq = body.find('=');
      if (eq != std::string::npos) {
        std::string key = body.substr(0, eq);
        key.erase(0, key.find_first_not_of(' '));
        table.comments[key] = body.substr(eq + 1);
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      table.header = cells;
      have_header = true;
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw std::runtime_error("csv input '" + path + "' line " + std::to_string(line_no) +
                                 ": not a number: '" + c + "'");
      }
    }
    if (row.size() != table.header.size())
      throw std::runtime_error("csv input '" + path + "' line " + std::to_string(line_no) +
                               ": wrong column count");
    table.rows.push_back(row);
  }
  if (!have_header) throw std::runtime_error("csv input '" + path + "': no header row");
  return table;
}

template <typename T>
const T& need_section(const std::optional<T>& section, const char* name) {
  if (!section) throw config::ConfigError(name, "section required by this command");
  return *section;
}

std::uint64_t scan_seed(std::uint64_t base, std::size_t index) {
  return mix64(base ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(index + 1)));
}

double cross_jitter_sigma_s(const pairsource::DetectorSpec& a, const pairsource::DetectorSpec& b) {
  constexpr double kFwhmPerSigma = 2.3548200450309493;
  const double sa = a.jitter_fwhm_s / kFwhmPerSigma;
  const double sb = b.jitter_fwhm_s / kFwhmPerSigma;
  return std::sqrt(sa * sa + sb * sb);
}

double window_capture(double window_s, double sigma_cc_s) {
  return sigma_cc_s > 0.0 ? std::erf(window_s / (2.0 * sigma_cc_s * std::sqrt(2.0))) : 1.0;
}

// --------------------------------------------------------------- phasematch

struct PhasematchArgs {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  double power_w = -1.0;
};

int run_phasematch(const PhasematchArgs& args) {
  const auto cfg = config::load_config(args.config_path);
  const double gamma = fwm::nonlinear_parameter(cfg.waveguide.n2_m2_per_w,
                                                cfg.waveguide.a_eff_m2, cfg.pump.wavelength_m);

  double power = args.power_w;
  config::PhasematchPlan plan;
  if (cfg.phasematch) plan = *cfg.phasematch;
  if (power < 0.0) {
    if (!cfg.phasematch || plan.powers_w.empty())
      throw config::ConfigError("phasematch", "need a phasematch section or --power");
    power = plan.powers_w.front();
  }

  double d_max = plan.detuning_max_rad_s;
  const auto pm = fwm::perfect_match_detuning(cfg.waveguide.beta2_s2_per_m, gamma, power);
  if (d_max <= 0.0) {
    if (pm && *pm > 0.0) {
      d_max = 2.5 * *pm;
    } else if (cfg.waveguide.beta2_s2_per_m != 0.0) {
      // Reach past the first sinc null of the dispersive mismatch.
      d_max = 2.0 * std::sqrt(2.0 * std::acos(-1.0) /
                              (std::abs(cfg.waveguide.beta2_s2_per_m) * cfg.waveguide.length_m));
    } else {
      d_max = 1e13;
    }
  }

  std::vector<double> detunings(plan.points);
  for (std::size_t i = 0; i < plan.points; ++i)
    detunings[i] = -d_max + 2.0 * d_max * static_cast<double>(i) /
                               static_cast<double>(plan.points - 1);
  const auto scan = fwm::phase_match_scan(cfg.waveguide, gamma, power, detunings);

  if (args.format == "json") {
    json j = base_json(cfg);
    j["gamma_per_w_m"] = gamma;
    j["peak_power_w"] = power;
    if (pm)
      j["perfect_match_detuning_rad_s"] = *pm;
    else
      j["perfect_match_detuning_rad_s"] = nullptr;
    json rows = json::array();
    for (const auto& p : scan) {
      rows.push_back({{"detuning_rad_s", p.delta_omega_rad_s},
                      {"dk_lin_per_m", p.dk_lin_per_m},
                      {"dk_total_per_m", p.dk_total_per_m},
                      {"gain_rel", p.gain_rel}});
    }
    j["scan"] = std::move(rows);
    write_text(args.out_path, json_text(j));
  } else {
    csvio::CsvWriter csv;
    add_provenance(csv, cfg);
    csv.add_comment("gamma_per_w_m", csvio::format_number(gamma));
    csv.add_comment("peak_power_w", csvio::format_number(power));
    if (pm) csv.add_comment("perfect_match_detuning_rad_s", csvio::format_number(*pm));
    csv.set_header({"detuning_rad_s", "dk_total"});
    for (const auto& p : scan) csv.add_row({p.delta_omega_rad_s, p.dk_total_per_m});
    write_text(args.out_path, csv.str());
  }

  std::cerr << "gamma = " << csvio::format_number(gamma) << " 1/(W m); ";
  if (pm)
    std::cerr << "perfect-match detuning = " << csvio::format_number(*pm) << " rad/s\n";
  else
    std::cerr << "no finite perfect-match detuning (normal or zero dispersion)\n";
  return kExitOk;
}

// ------------------------------------------------------------------ fwm map

struct FwmMapArgs {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  double power_w = -1.0;
  double seed_min_nm = 0.0;
  double seed_max_nm = 0.0;
  std::size_t seeds = 41;
};

int run_fwmmap(const FwmMapArgs& args) {
  const auto cfg = config::load_config(args.config_path);
  const auto& chan_a = need_section(cfg.channel_a, "channels");
  const auto& chan_b = need_section(cfg.channel_b, "channels");
  const double gamma = fwm::nonlinear_parameter(cfg.waveguide.n2_m2_per_w,
                                                cfg.waveguide.a_eff_m2, cfg.pump.wavelength_m);
  double power = args.power_w;
  if (power < 0.0) {
    if (cfg.phasematch && !cfg.phasematch->powers_w.empty())
      power = cfg.phasematch->powers_w.front();
    else
      throw config::ConfigError("phasematch", "need a phasematch section or --power");
  }

  double lo_nm = args.seed_min_nm;
  double hi_nm = args.seed_max_nm;
  if (lo_nm <= 0.0) lo_nm = chan_a.filter_center_m * 1e9 - 20.0;
  if (hi_nm <= 0.0) hi_nm = std::min(chan_a.filter_center_m * 1e9 + 20.0,
                                     cfg.pump.wavelength_m * 1e9 - 2.0);
  if (args.seeds < 2 || hi_nm <= lo_nm)
    throw config::ConfigError("fwmmap", "need at least two seed wavelengths, min < max");

  std::vector<double> seeds(args.seeds);
  for (std::size_t i = 0; i < args.seeds; ++i)
    seeds[i] = (lo_nm + (hi_nm - lo_nm) * static_cast<double>(i) /
                            static_cast<double>(args.seeds - 1)) *
               1e-9;

  // The idler emerges on the far side of the pump and is collected through
  // the arm-B coupler.
  const auto map = fwm::stimulated_fwm_map(cfg.waveguide, cfg.pump.wavelength_m, gamma, power,
                                           seeds, chan_b);

  // Reduce each row to the idler-side ridge: position and relative strength.
  std::vector<double> ridge_db(seeds.size(), -300.0);
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    double best = 0.0;
    for (std::size_t c = 0; c < map.spectrum_wavelengths_m.size(); ++c)
      if (map.spectrum_wavelengths_m[c] > cfg.pump.wavelength_m)
        best = std::max(best, map.rel_psd[r][c]);
    ridge_db[r] = 10.0 * std::log10(std::max(best, 1e-30));
  }

  if (args.format == "json") {
    json j = base_json(cfg);
    j["peak_power_w"] = power;
    j["gamma_per_w_m"] = gamma;
    json rows = json::array();
    for (std::size_t r = 0; r < seeds.size(); ++r)
      rows.push_back({{"seed_nm", seeds[r] * 1e9},
                      {"idler_nm", map.idler_wavelengths_m[r] * 1e9},
                      {"rel_psd_db", ridge_db[r]}});
    j["map"] = std::move(rows);
    write_text(args.out_path, json_text(j));
  } else {
    csvio::CsvWriter csv;
    add_provenance(csv, cfg);
    csv.add_comment("peak_power_w", csvio::format_number(power));
    csv.set_header({"seed_nm", "idler_nm", "rel_psd_db"});
    for (std::size_t r = 0; r < seeds.size(); ++r)
      csv.add_row({seeds[r] * 1e9, map.idler_wavelengths_m[r] * 1e9, ridge_db[r]});
    write_text(args.out_path, csv.str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------- propagate

struct PropagateArgs {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
};

nlse::PowerSweepResult run_power_sweep(const config::ExperimentConfig& cfg,
                                       const config::PropagatePlan& plan) {
  std::vector<double> powers = plan.powers_w;
  std::sort(powers.begin(), powers.end());
  const TimeGrid grid = grid_for_fwhm(cfg.pump.fwhm_s, plan.grid_n, plan.span_fwhm);
  nlse::PropagateOptions opts;
  opts.free_carrier = cfg.free_carrier;
  return nlse::power_sweep(cfg.waveguide, cfg.pump.fwhm_s, grid, cfg.pump.wavelength_m,
                           cfg.pump.rep_rate_hz, powers, static_cast<std::size_t>(plan.steps),
                           opts);
}

int run_propagate(const PropagateArgs& args) {
  const auto cfg = config::load_config(args.config_path);
  const auto& plan = need_section(cfg.propagate, "propagate");
  const auto sweep = run_power_sweep(cfg, plan);

  if (args.format == "json") {
    json j = base_json(cfg);
    j["steps"] = plan.steps;
    j["converged"] = sweep.converged;
    json rows = json::array();
    for (const auto& r : sweep.rows)
      rows.push_back({{"peak_power_w", r.peak_power_w}, {"eta", r.eta},
                      {"phi_nl_rad", r.phi_nl_rad}});
    j["rows"] = std::move(rows);
    write_text(args.out_path, json_text(j));
  } else {
    csvio::CsvWriter csv;
    add_provenance(csv, cfg);
    csv.add_comment("steps", std::to_string(plan.steps));
    csv.add_comment("converged", sweep.converged ? "1" : "0");
    csv.set_header({"peak_power_W", "eta", "phi_nl_rad"});
    for (const auto& r : sweep.rows) csv.add_row({r.peak_power_w, r.eta, r.phi_nl_rad});
    write_text(args.out_path, csv.str());
  }
  if (!sweep.converged)
    std::cerr << "warning: split-step energy not converged at the configured step count\n";
  return kExitOk;
}

// ----------------------------------------------------------------- retrieve

struct RetrieveArgs {
  std::string config_path;
  std::string spectrum_path;  // single-spectrum mode when non-empty
  std::string out_path;
  std::string format = "json";
  std::size_t max_iterations = 500;
  double tol = 1e-6;
};

int run_retrieve_single(const RetrieveArgs& args) {
  const CsvTable table = read_csv(args.spectrum_path);
  const auto it = table.comments.find("dt_ps");
  if (it == table.comments.end())
    throw std::runtime_error("csv input: missing '# dt_ps=' comment");
  retrieval::RetrievalProblem problem;
  problem.dt_s = std::stod(it->second) * 1e-12;
  const std::size_t c_psd = table.column("psd");
  const std::size_t c_env = table.column("envelope");
  for (const auto& row : table.rows) {
    problem.spectrum_psd.push_back(row[c_psd]);
    problem.temporal_envelope.push_back(row[c_env]);
  }
  problem.max_iterations = args.max_iterations;
  problem.tol = args.tol;
  const auto res = retrieval::gerchberg_saxton(problem);

  json j;
  j["tool_version"] = kVersion;
  j["phi_nl_rad"] = res.phi_nl_rad;
  j["phi_nl_err"] = res.phi_nl_err;
  j["iterations"] = res.iterations;
  j["residual"] = res.residual;
  j["converged"] = res.converged;
  j["energy_mismatch"] = res.energy_mismatch;
  write_text(args.out_path, json_text(j));
  return kExitOk;
}

int run_retrieve(const RetrieveArgs& args) {
  if (!args.spectrum_path.empty()) return run_retrieve_single(args);

  const auto cfg = config::load_config(args.config_path);
  const auto& plan = need_section(cfg.propagate, "propagate");
  config::RetrievePlan rplan;
  if (cfg.retrieve) rplan = *cfg.retrieve;

  const auto sweep = run_power_sweep(cfg, plan);
  const TimeGrid grid = grid_for_fwhm(cfg.pump.fwhm_s, plan.grid_n, plan.span_fwhm);

  // The retrieval assumes the nominal pulse shape, as an experiment would
  // (shape from autocorrelation, amplitude from the average power).
  std::vector<double> powers, phis, phi_errs, etas;
  json per_power = json::array();
  bool all_converged = true;
  for (std::size_t k = 0; k < sweep.rows.size(); ++k) {
    const auto& row = sweep.rows[k];
    const SampledPulse shape = sech_pulse(row.peak_power_w, cfg.pump.fwhm_s, grid,
                                          cfg.pump.wavelength_m, cfg.pump.rep_rate_hz);
    retrieval::RetrievalProblem problem;
    problem.dt_s = grid.dt_s;
    problem.max_iterations = rplan.max_iterations;
    problem.tol = rplan.tol;
    problem.spectrum_psd = sweep.spectra[k];
    problem.temporal_envelope.reserve(shape.envelope.size());
    for (const auto& a : shape.envelope) problem.temporal_envelope.push_back(std::abs(a));
    const auto res = retrieval::gerchberg_saxton(problem);
    all_converged = all_converged && res.converged;
    powers.push_back(row.peak_power_w);
    phis.push_back(res.phi_nl_rad);
    phi_errs.push_back(res.phi_nl_err);
    etas.push_back(row.eta);
    per_power.push_back({{"peak_power_w", row.peak_power_w},
                         {"eta", row.eta},
                         {"phi_nl_rad", res.phi_nl_rad},
                         {"phi_nl_err", res.phi_nl_err},
                         {"iterations", res.iterations},
                         {"residual", res.residual},
                         {"converged", res.converged}});
  }

  std::vector<double> fit_powers, fit_phis;
  for (std::size_t k = 0; k < powers.size(); ++k) {
    if (rplan.n2_power_max_w > 0.0 && powers[k] > rplan.n2_power_max_w) continue;
    fit_powers.push_back(powers[k]);
    fit_phis.push_back(phis[k]);
  }
  const auto n2 = retrieval::extract_n2(fit_powers, fit_phis, cfg.waveguide,
                                        cfg.pump.wavelength_m);
  const auto tpa = nlse::inverse_transmission_fit(powers, etas, cfg.waveguide);

  if (args.format == "json") {
    json j = base_json(cfg);
    j["per_power"] = std::move(per_power);
    j["gamma_per_w_m"] = n2.gamma_per_w_m;
    j["gamma_err"] = n2.gamma_err;
    j["n2_m2_per_w"] = n2.n2_m2_per_w;
    j["n2_err"] = n2.n2_err;
    j["curvature_sigma"] = n2.curvature_sigma;
    j["curvature_flag"] = n2.curvature_flag;
    j["alpha_tpa_per_w_m"] = tpa.alpha_tpa_per_w_m;
    j["alpha_tpa_err"] = tpa.alpha_tpa_err;
    j["beta_tpa_cm_per_gw"] =
        fwm::tpa_waveguide_to_bulk(tpa.alpha_tpa_per_w_m, cfg.waveguide.a_eff_m2);
    j["n2_fit_points"] = fit_powers.size();
    j["converged"] = all_converged && sweep.converged;
    write_text(args.out_path, json_text(j));
  } else {
    csvio::CsvWriter csv;
    add_provenance(csv, cfg);
    csv.add_comment("n2_m2_per_w", csvio::format_number(n2.n2_m2_per_w));
    csv.add_comment("n2_err", csvio::format_number(n2.n2_err));
    csv.add_comment("alpha_tpa_per_w_m", csvio::format_number(tpa.alpha_tpa_per_w_m));
    csv.add_comment("alpha_tpa_err", csvio::format_number(tpa.alpha_tpa_err));
    csv.set_header({"peak_power_W", "eta", "phi_nl_rad"});
    for (std::size_t k = 0; k < powers.size(); ++k)
      csv.add_row({powers[k], etas[k], phis[k]});
    write_text(args.out_path, csv.str());
  }
  return kExitOk;
}

// -------------------------------------------------------------------- pairs

struct PairsContext {
  config::ExperimentConfig cfg;
  pairsource::SourceSpec source;
  ChannelSpec chan_a, chan_b;
  pairsource::DetectorSpec det_a, det_b;
  config::PairsPlan plan;
};

PairsContext pairs_context(const std::string& config_path, bool need_device) {
  PairsContext ctx;
  ctx.cfg = config::load_config(config_path);
  ctx.plan = need_section(ctx.cfg.pairs, "pairs");
  if (need_device) {
    ctx.source = need_section(ctx.cfg.source, "source");
    ctx.chan_a = need_section(ctx.cfg.channel_a, "channels");
    ctx.chan_b = need_section(ctx.cfg.channel_b, "channels");
    ctx.det_a = need_section(ctx.cfg.detector_a, "detectors");
    ctx.det_b = need_section(ctx.cfg.detector_b, "detectors");
  }
  return ctx;
}

struct PairsSimArgs {
  std::string config_path;
  std::string out_path;
  std::string format = "bin";
  double power_w = -1.0;
  double duration_s = -1.0;
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int run_pairs_simulate(const PairsSimArgs& args) {
  auto ctx = pairs_context(args.config_path, true);
  const double power = args.power_w >= 0.0 ? args.power_w : ctx.plan.powers_w.front();
  double duration = args.duration_s > 0.0 ? args.duration_s : ctx.plan.durations_s.front();
  for (std::size_t i = 0; i < ctx.plan.powers_w.size() && args.duration_s <= 0.0; ++i)
    if (ctx.plan.powers_w[i] == power) duration = ctx.plan.durations_s[i];

  pairsource::SimOptions opts;
  opts.threads = resolve_threads(args.threads);
  opts.statistics = ctx.cfg.pair_statistics;
  const std::uint64_t seed = args.seed_set ? args.seed : ctx.cfg.seed;

  auto stream = pairsource::simulate_tags(ctx.source, ctx.chan_a, ctx.chan_b, ctx.det_a,
                                          ctx.det_b, power, duration, seed, opts);
  stream.meta.config_hash = ctx.cfg.config_hash;

  if (args.out_path.empty()) throw CLI::ValidationError("--out", "output path required");
  if (args.format == "csv")
    tagio::write_tags_csv(args.out_path, stream);
  else
    tagio::write_tags(args.out_path, stream);

  std::uint64_t n_a = 0;
  for (const auto& t : stream.tags) n_a += t.channel == 0 ? 1 : 0;
  std::cerr << "wrote " << stream.tags.size() << " tags (" << n_a << " on A, "
            << stream.tags.size() - n_a << " on B) for " << csvio::format_number(duration)
            << " s at " << csvio::format_number(power) << " W\n";
  return kExitOk;
}

struct PairsAnalysis {
  coincidence::Histogram hist;
  coincidence::PeakFit peak;
  coincidence::CarResult car;
  coincidence::CarCurveRow row;
  coincidence::CarResult wide;  // scan-window variant for the brightness fit
  coincidence::CarCurveRow wide_row;
  double singles_a_hz = 0.0, singles_a_err_hz = 0.0;
  double singles_b_hz = 0.0, singles_b_err_hz = 0.0;
};

PairsAnalysis analyze_stream(const pairsource::TagStream& stream,
                             const config::PairsPlan& plan) {
  if (stream.meta.rep_rate_hz <= 0.0 || stream.meta.duration_s <= 0.0)
    throw std::runtime_error("tag stream metadata lacks rep rate / duration");
  const double period_ps = 1e12 / stream.meta.rep_rate_hz;

  PairsAnalysis out;
  coincidence::HistogramOptions hopts;
  hopts.bin_ps = plan.hist_bin_ps;
  hopts.half_span_ps = (plan.side_peaks / 2 + 0.5) * period_ps;
  out.hist = coincidence::build_histogram(stream, hopts);
  out.peak = coincidence::fit_peak(out.hist, plan.fit_span_ps);

  coincidence::CarOptions copts;
  copts.window_ps = plan.car_window_ps;
  copts.period_ps = period_ps;
  copts.side_peaks = plan.side_peaks;
  out.car = coincidence::car_from_histogram(out.hist, copts);
  out.row = coincidence::make_curve_row(out.car, stream.meta.peak_power_w,
                                        stream.meta.duration_s);

  coincidence::CarOptions wopts = copts;
  wopts.window_ps = plan.scan_window_ps;
  out.wide = coincidence::car_from_histogram(out.hist, wopts);
  out.wide_row = coincidence::make_curve_row(out.wide, stream.meta.peak_power_w,
                                             stream.meta.duration_s);

  std::uint64_t n_a = 0, n_b = 0;
  for (const auto& t : stream.tags) (t.channel == 0 ? n_a : n_b) += 1;
  out.singles_a_hz = static_cast<double>(n_a) / stream.meta.duration_s;
  out.singles_a_err_hz = std::sqrt(static_cast<double>(n_a)) / stream.meta.duration_s;
  out.singles_b_hz = static_cast<double>(n_b) / stream.meta.duration_s;
  out.singles_b_err_hz = std::sqrt(static_cast<double>(n_b)) / stream.meta.duration_s;
  return out;
}

json analysis_json(const PairsAnalysis& a, const pairsource::TagStreamMeta& meta) {
  json j;
  j["peak_power_w"] = meta.peak_power_w;
  j["duration_s"] = meta.duration_s;
  j["seed"] = meta.seed;
  j["config_hash"] = meta.config_hash;
  j["singles_a_hz"] = a.singles_a_hz;
  j["singles_b_hz"] = a.singles_b_hz;
  j["car"] = a.car.infinite ? json() : json(a.car.car);
  j["car_err"] = a.car.car_err;
  j["car_infinite"] = a.car.infinite;
  j["center_counts"] = a.car.center_counts;
  j["side_mean_counts"] = a.car.side_mean_counts;
  j["raw_hz"] = a.row.raw_hz;
  j["net_hz"] = a.row.net_hz;
  j["net_err_hz"] = a.row.net_err_hz;
  j["pair_rate_hz"] = a.row.pair_rate_hz;
  j["peak_fit"] = {{"fwhm_ps", a.peak.fwhm_ps},     {"fwhm_err_ps", a.peak.fwhm_err_ps},
                   {"center_ps", a.peak.center_ps}, {"sigma_ps", a.peak.sigma_ps},
                   {"rebinned", a.peak.rebinned},   {"converged", a.peak.converged}};
  return j;
}

struct PairsAnalyzeArgs {
  std::string config_path;
  std::string tags_path;
  std::string out_path;
  std::string hist_out_path;
  std::string format = "json";
};

int run_pairs_analyze(const PairsAnalyzeArgs& args) {
  auto ctx = pairs_context(args.config_path, false);
  const auto stream = tagio::read_tags(args.tags_path);
  const auto a = analyze_stream(stream, ctx.plan);

  if (!args.hist_out_path.empty()) {
    csvio::CsvWriter csv;
    add_provenance(csv, ctx.cfg);
    csv.add_comment("peak_power_w", csvio::format_number(stream.meta.peak_power_w));
    csv.add_comment("bin_ps", csvio::format_number(a.hist.bin_ps));
    csv.set_header({"delay_ps", "counts"});
    for (std::size_t i = 0; i < a.hist.delay_ps.size(); ++i)
      csv.add_row({a.hist.delay_ps[i], static_cast<double>(a.hist.counts[i])});
    csv.write_file(args.hist_out_path);
  }

  if (args.format == "csv") {
    csvio::CsvWriter csv;
    add_provenance(csv, ctx.cfg);
    csv.set_header({"peak_power_W", "car", "car_err", "raw_hz", "net_hz"});
    csv.add_row({a.row.peak_power_w, a.row.car, a.row.car_err, a.row.raw_hz, a.row.net_hz});
    write_text(args.out_path, csv.str());
  } else {
    json j = base_json(ctx.cfg);
    j.update(analysis_json(a, stream.meta));
    write_text(args.out_path, json_text(j));
  }
  return kExitOk;
}

struct PairsScanArgs {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int run_pairs_scan(const PairsScanArgs& args) {
  auto ctx = pairs_context(args.config_path, true);
  pairsource::SimOptions opts;
  opts.threads = resolve_threads(args.threads);
  opts.statistics = ctx.cfg.pair_statistics;
  const std::uint64_t base_seed = args.seed_set ? args.seed : ctx.cfg.seed;

  const double sigma_cc = cross_jitter_sigma_s(ctx.det_a, ctx.det_b);
  const double capture = window_capture(ctx.plan.scan_window_ps * 1e-12, sigma_cc);

  std::vector<coincidence::CarCurveRow> rows;
  std::vector<coincidence::PowerScanPoint> points;
  json per_power = json::array();
  for (std::size_t k = 0; k < ctx.plan.powers_w.size(); ++k) {
    const double power = ctx.plan.powers_w[k];
    auto stream = pairsource::simulate_tags(ctx.source, ctx.chan_a, ctx.chan_b, ctx.det_a,
                                            ctx.det_b, power, ctx.plan.durations_s[k],
                                            scan_seed(base_seed, k), opts);
    stream.meta.config_hash = ctx.cfg.config_hash;
    const auto a = analyze_stream(stream, ctx.plan);
    rows.push_back(a.row);

    coincidence::PowerScanPoint pt;
    pt.peak_power_w = power;
    pt.singles_a_hz = a.singles_a_hz;
    pt.singles_a_err_hz = a.singles_a_err_hz;
    pt.singles_b_hz = a.singles_b_hz;
    pt.singles_b_err_hz = a.singles_b_err_hz;
    pt.net_hz = a.wide_row.net_hz;
    pt.net_err_hz = a.wide_row.net_err_hz;
    points.push_back(pt);
    per_power.push_back(analysis_json(a, stream.meta));
  }

  const auto fit = coincidence::power_scan_fit(points, ctx.source.rep_rate_hz, capture);

  if (args.format == "json") {
    json j = base_json(ctx.cfg);
    j["per_power"] = std::move(per_power);
    j["xi_per_w2"] = fit.xi_per_w2;
    j["xi_err"] = fit.xi_err;
    j["quad_a_hz_per_w2"] = fit.quad_a;
    j["quad_b_hz_per_w2"] = fit.quad_b;
    j["net_c2_hz_per_w2"] = fit.net_c2;
    j["window_capture"] = capture;
    j["fit_converged"] = fit.converged;
    write_text(args.out_path, json_text(j));
  } else {
    csvio::CsvWriter csv;
    add_provenance(csv, ctx.cfg);
    csv.add_comment("seed", std::to_string(base_seed));
    csv.add_comment("xi_per_w2", csvio::format_number(fit.xi_per_w2));
    csv.add_comment("xi_err", csvio::format_number(fit.xi_err));
    csv.add_comment("net_c2_hz_per_w2", csvio::format_number(fit.net_c2));
    csv.add_comment("window_capture", csvio::format_number(capture));
    csv.set_header({"peak_power_W", "car", "car_err", "raw_hz", "net_hz"});
    for (const auto& r : rows) csv.add_row({r.peak_power_w, r.car, r.car_err, r.raw_hz, r.net_hz});
    write_text(args.out_path, csv.str());
  }

  std::cerr << "xi = " << csvio::format_number(fit.xi_per_w2) << " +/- "
            << csvio::format_number(fit.xi_err) << " pairs/pulse/W^2\n";
  return kExitOk;
}

// ---------------------------------------------------------------------- hom

struct HomSimArgs {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int run_hom_simulate(const HomSimArgs& args) {
  const auto cfg = config::load_config(args.config_path);
  const auto& plan = need_section(cfg.interference, "interference");

  interference::FringeSpec spec;
  spec.r_split = plan.r_split;
  spec.indistinguishability = plan.indistinguishability;
  spec.peak_net_hz = plan.peak_net_hz;
  spec.car = plan.car;
  spec.duration_s = plan.duration_s;
  spec.side_windows = plan.side_windows;
  const double two_pi = 2.0 * std::acos(-1.0);
  for (int k = 0; k < plan.phase_points; ++k)
    spec.phases_rad.push_back(two_pi * static_cast<double>(k) /
                              static_cast<double>(plan.phase_points));

  const std::uint64_t seed = args.seed_set ? args.seed : cfg.seed;
  const auto scan = interference::simulate_fringe(spec, seed);

  if (args.format == "json") {
    json j = base_json(cfg);
    j["seed"] = seed;
    j["duration_s"] = scan.duration_s;
    j["side_windows"] = plan.side_windows;
    j["phase_rad"] = scan.phases_rad;
    j["coincidences"] = scan.raw_counts;
    j["accidentals"] = scan.accidental_counts;
    j["net"] = scan.net_counts;
    write_text(args.out_path, json_text(j));
  } else {
    csvio::CsvWriter csv;
    add_provenance(csv, cfg);
    csv.add_comment("seed", std::to_string(seed));
    csv.add_comment("duration_s", csvio::format_number(scan.duration_s));
    csv.add_comment("side_windows", std::to_string(plan.side_windows));
    csv.set_header({"phase_rad", "coincidences", "accidentals", "net"});
    for (std::size_t k = 0; k < scan.phases_rad.size(); ++k)
      csv.add_row({scan.phases_rad[k], static_cast<double>(scan.raw_counts[k]),
                   scan.accidental_counts[k], scan.net_counts[k]});
    write_text(args.out_path, csv.str());
  }
  return kExitOk;
}

struct HomAnalyzeArgs {
  std::string scan_path;
  std::string out_path;
  std::string use = "net";
};

int run_hom_analyze(const HomAnalyzeArgs& args) {
  const CsvTable table = read_csv(args.scan_path);
  const std::size_t c_phase = table.column("phase_rad");
  const std::size_t c_raw = table.column("coincidences");
  const std::size_t c_acc = table.column("accidentals");
  const std::size_t c_net = table.column("net");

  double side_windows = 6.0;
  if (const auto it = table.comments.find("side_windows"); it != table.comments.end())
    side_windows = std::stod(it->second);

  std::vector<double> phases, values, errs;
  for (const auto& row : table.rows) {
    phases.push_back(row[c_phase]);
    const double raw = row[c_raw];
    const double acc = row[c_acc];
    if (args.use == "raw") {
      values.push_back(raw);
      errs.push_back(std::sqrt(std::max(raw, 1.0)));
    } else {
      values.push_back(row[c_net]);
      errs.push_back(std::sqrt(std::max(raw + acc / side_windows, 1.0)));
    }
  }

  const auto fit = interference::fit_visibility(phases, values, errs);
  json j;
  j["tool_version"] = kVersion;
  j["used"] = args.use;
  j["visibility"] = fit.visibility;
  j["visibility_err"] = fit.visibility_err;
  j["offset"] = fit.offset;
  j["phase0_rad"] = fit.phase0_rad;
  j["converged"] = fit.converged;
  write_text(args.out_path, json_text(j));

  std::cerr << args.use << " visibility = " << csvio::format_number(fit.visibility) << " +/- "
            << csvio::format_number(fit.visibility_err) << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- detector

struct DetectorCurveArgs {
  double sde_max = 0.48;
  double i_half_ua = 6.5;
  double i_width_ua = 0.8;
  double dcr0_hz = 0.1;
  double i_dcr_ua = 1.1;
  double bb_floor_hz = 300.0;
  double bias_min_ua = 0.0;
  double bias_max_ua = 12.0;
  std::size_t points = 121;
  std::string out_path;
};

int run_detector_curve(const DetectorCurveArgs& args) {
  detector::BiasCurveModel model;
  model.sde_max = args.sde_max;
  model.i_half_ua = args.i_half_ua;
  model.i_width_ua = args.i_width_ua;
  model.dcr0_hz = args.dcr0_hz;
  model.i_dcr_ua = args.i_dcr_ua;
  model.bb_floor_hz = args.bb_floor_hz;
  model.validate();
  if (args.points < 2 || args.bias_max_ua <= args.bias_min_ua)
    throw std::invalid_argument("detector curve: need points >= 2 and max > min bias");

  csvio::CsvWriter csv;
  csv.add_comment("tool_version", kVersion);
  csv.set_header({"bias_ua", "sde", "dcr_hz", "disc_a_mv", "disc_b_mv"});
  for (std::size_t i = 0; i < args.points; ++i) {
    const double bias = args.bias_min_ua + (args.bias_max_ua - args.bias_min_ua) *
                                               static_cast<double>(i) /
                                               static_cast<double>(args.points - 1);
    csv.add_row({bias, detector::sde_vs_bias(model, bias), detector::dcr_vs_bias(model, bias),
                 detector::discrimination_voltage_mv(detector::DetectorId::kA, bias),
                 detector::discrimination_voltage_mv(detector::DetectorId::kB, bias)});
  }
  write_text(args.out_path, csv.str());
  return kExitOk;
}

struct DetectorCalArgs {
  std::string data_path;
  std::string out_path;
};

int run_detector_calibrate(const DetectorCalArgs& args) {
  const CsvTable table = read_csv(args.data_path);
  const std::size_t c_flux = table.column("flux_hz");
  const std::size_t c_counts = table.column("counts_hz");
  std::vector<double> flux, counts;
  for (const auto& row : table.rows) {
    flux.push_back(row[c_flux]);
    counts.push_back(row[c_counts]);
  }
  const auto fit = detector::calibration_fit(flux, counts);

  json j;
  j["tool_version"] = kVersion;
  j["sde"] = fit.sde;
  j["sde_err"] = fit.sde_err;
  j["intercept_hz"] = fit.intercept_hz;
  j["intercept_err_hz"] = fit.intercept_err_hz;
  j["saturation_flag"] = fit.saturation_flag;
  write_text(args.out_path, json_text(j));
  return kExitOk;
}

struct DetectorSpectralArgs {
  std::string table_path;
  std::string out_path;
  double wavelength_nm = 0.0;
};

int run_detector_spectral(const DetectorSpectralArgs& args) {
  const CsvTable table = read_csv(args.table_path);
  const std::size_t c_wl = table.column("wavelength_nm");
  const std::size_t c_sde = table.column("sde");
  std::vector<detector::SpectralSdePoint> points;
  for (const auto& row : table.rows)
    points.push_back({row[c_wl] * 1e-9, row[c_sde]});
  const auto res = detector::spectral_sde(points, args.wavelength_nm * 1e-9);

  json j;
  j["tool_version"] = kVersion;
  j["wavelength_nm"] = args.wavelength_nm;
  j["sde"] = res.sde;
  j["sde_err"] = res.sde_err;
  write_text(args.out_path, json_text(j));
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Simulation and analysis toolkit for a pulsed silicon-waveguide "
               "photon-pair source with superconducting single-photon readout"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // phasematch
  PhasematchArgs pm_args;
  auto* pm = app.add_subcommand("phasematch",
                                "Phase-mismatch scan over signal/idler detuning");
  pm->add_option("--config", pm_args.config_path, "experiment JSON")
      ->required()
      ->check(CLI::ExistingFile);
  pm->add_option("--power", pm_args.power_w, "pump peak power [W]");
  pm->add_option("--out", pm_args.out_path, "output path (default stdout)");
  pm->add_option("--format", pm_args.format)->check(CLI::IsMember({"csv", "json"}));

  // fwmmap
  FwmMapArgs fm_args;
  auto* fm = app.add_subcommand("fwmmap", "Stimulated seed/idler wavelength map");
  fm->add_option("--config", fm_args.config_path)->required()->check(CLI::ExistingFile);
  fm->add_option("--power", fm_args.power_w, "pump peak power [W]");
  fm->add_option("--seed-min-nm", fm_args.seed_min_nm, "lowest seed wavelength");
  fm->add_option("--seed-max-nm", fm_args.seed_max_nm, "highest seed wavelength");
  fm->add_option("--seeds", fm_args.seeds, "number of seed wavelengths");
  fm->add_option("--out", fm_args.out_path);
  fm->add_option("--format", fm_args.format)->check(CLI::IsMember({"csv", "json"}));

  // propagate
  PropagateArgs pr_args;
  auto* pr = app.add_subcommand("propagate",
                                "Split-step power sweep: transmission and nonlinear phase");
  pr->add_option("--config", pr_args.config_path)->required()->check(CLI::ExistingFile);
  pr->add_option("--out", pr_args.out_path);
  pr->add_option("--format", pr_args.format)->check(CLI::IsMember({"csv", "json"}));

  // retrieve
  RetrieveArgs re_args;
  auto* re = app.add_subcommand("retrieve",
                                "Phase retrieval from spectra: nonlinear phase, n2, TPA");
  re->add_option("--config", re_args.config_path)->check(CLI::ExistingFile);
  re->add_option("--spectrum", re_args.spectrum_path,
                 "single-spectrum CSV (index,psd,envelope with # dt_ps=)")
      ->check(CLI::ExistingFile);
  re->add_option("--max-iterations", re_args.max_iterations);
  re->add_option("--tol", re_args.tol);
  re->add_option("--out", re_args.out_path);
  re->add_option("--format", re_args.format)->check(CLI::IsMember({"csv", "json"}));

  // pairs
  auto* pairs = app.add_subcommand("pairs", "Photon-pair source simulation and analysis");
  pairs->require_subcommand(1);

  PairsSimArgs ps_args;
  auto* psim = pairs->add_subcommand("simulate", "Generate a time-tag stream at one power");
  psim->add_option("--config", ps_args.config_path)->required()->check(CLI::ExistingFile);
  psim->add_option("--power", ps_args.power_w, "peak power [W] (default: first of the plan)");
  psim->add_option("--duration", ps_args.duration_s, "integration time [s]");
  psim->add_option("--threads", ps_args.threads, "worker threads (or MIRPAIRS_THREADS)");
  psim->add_option("--seed", ps_args.seed)->each([&](const std::string&) {
    ps_args.seed_set = true;
  });
  psim->add_option("--out", ps_args.out_path, "tag file path")->required();
  psim->add_option("--format", ps_args.format)->check(CLI::IsMember({"bin", "csv"}));

  PairsAnalyzeArgs pa_args;
  auto* pana = pairs->add_subcommand("analyze", "Histogram, peak fit and CAR of a tag file");
  pana->add_option("--config", pa_args.config_path)->required()->check(CLI::ExistingFile);
  pana->add_option("--tags", pa_args.tags_path)->required()->check(CLI::ExistingFile);
  pana->add_option("--out", pa_args.out_path);
  pana->add_option("--hist-out", pa_args.hist_out_path, "write the delay histogram CSV");
  pana->add_option("--format", pa_args.format)->check(CLI::IsMember({"csv", "json"}));

  PairsScanArgs pc_args;
  auto* pscan = pairs->add_subcommand(
      "scan", "Simulate and analyze the whole power scan; fit the brightness");
  pscan->add_option("--config", pc_args.config_path)->required()->check(CLI::ExistingFile);
  pscan->add_option("--threads", pc_args.threads);
  pscan->add_option("--seed", pc_args.seed)->each([&](const std::string&) {
    pc_args.seed_set = true;
  });
  pscan->add_option("--out", pc_args.out_path);
  pscan->add_option("--format", pc_args.format)->check(CLI::IsMember({"csv", "json"}));

  // hom
  auto* hom = app.add_subcommand("hom", "Two-photon interference fringe");
  hom->require_subcommand(1);

  HomSimArgs hs_args;
  auto* hsim = hom->add_subcommand("simulate", "Simulate a phase scan of the pair fringe");
  hsim->add_option("--config", hs_args.config_path)->required()->check(CLI::ExistingFile);
  hsim->add_option("--seed", hs_args.seed)->each([&](const std::string&) {
    hs_args.seed_set = true;
  });
  hsim->add_option("--out", hs_args.out_path);
  hsim->add_option("--format", hs_args.format)->check(CLI::IsMember({"csv", "json"}));

  HomAnalyzeArgs ha_args;
  auto* hana = hom->add_subcommand("analyze", "Fit the fringe visibility from a scan CSV");
  hana->add_option("--scan", ha_args.scan_path)->required()->check(CLI::ExistingFile);
  hana->add_option("--use", ha_args.use)->check(CLI::IsMember({"raw", "net"}));
  hana->add_option("--out", ha_args.out_path);

  // detector
  auto* det = app.add_subcommand("detector", "Detector bias curves and calibration fits");
  det->require_subcommand(1);

  DetectorCurveArgs dc_args;
  auto* dcur = det->add_subcommand("curve", "Efficiency/dark-rate bias curves");
  dcur->add_option("--sde-max", dc_args.sde_max);
  dcur->add_option("--i-half-ua", dc_args.i_half_ua);
  dcur->add_option("--i-width-ua", dc_args.i_width_ua);
  dcur->add_option("--dcr0-hz", dc_args.dcr0_hz);
  dcur->add_option("--i-dcr-ua", dc_args.i_dcr_ua);
  dcur->add_option("--bb-floor-hz", dc_args.bb_floor_hz);
  dcur->add_option("--bias-min-ua", dc_args.bias_min_ua);
  dcur->add_option("--bias-max-ua", dc_args.bias_max_ua);
  dcur->add_option("--points", dc_args.points);
  dcur->add_option("--out", dc_args.out_path);

  DetectorCalArgs dl_args;
  auto* dcal = det->add_subcommand("calibrate", "Flux-sweep efficiency fit");
  dcal->add_option("--data", dl_args.data_path, "CSV with flux_hz,counts_hz")
      ->required()
      ->check(CLI::ExistingFile);
  dcal->add_option("--out", dl_args.out_path);

  DetectorSpectralArgs dsp_args;
  auto* dspec = det->add_subcommand("spectral", "Tabulated spectral efficiency lookup");
  dspec->add_option("--table", dsp_args.table_path, "CSV with wavelength_nm,sde")
      ->required()
      ->check(CLI::ExistingFile);
  dspec->add_option("--wavelength-nm", dsp_args.wavelength_nm)->required();
  dspec->add_option("--out", dsp_args.out_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (pm->parsed()) return run_phasematch(pm_args);
    if (fm->parsed()) return run_fwmmap(fm_args);
    if (pr->parsed()) return run_propagate(pr_args);
    if (re->parsed()) {
      if (re_args.spectrum_path.empty() && re_args.config_path.empty())
        throw CLI::ValidationError("retrieve", "need --config or --spectrum");
      return run_retrieve(re_args);
    }
    if (psim->parsed()) return run_pairs_simulate(ps_args);
    if (pana->parsed()) return run_pairs_analyze(pa_args);
    if (pscan->parsed()) return run_pairs_scan(pc_args);
    if (hsim->parsed()) return run_hom_simulate(hs_args);
    if (hana->parsed()) return run_hom_analyze(ha_args);
    if (dcur->parsed()) return run_detector_curve(dc_args);
    if (dcal->parsed()) return run_detector_calibrate(dl_args);
    if (dspec->parsed()) return run_detector_spectral(dsp_args);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const config::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  std::cerr << "error: no subcommand\n";
  return kExitUsage;
}

}  // namespace mirpairs_cli
