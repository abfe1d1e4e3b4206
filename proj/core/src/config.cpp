#include "mirpairs/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mirpairs {
namespace config {

namespace {

using nlohmann::json;

std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& item : obj.items())
    if (allowed.find(item.key()) == allowed.end())
      throw ConfigError(join_path(path, item.key()), "unknown key");
}

double get_number(const json& obj, const std::string& path, const std::string& key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join_path(path, key), "missing required key");
  if (!it->is_number()) throw ConfigError(join_path(path, key), "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ConfigError(join_path(path, key), "must be finite");
  return v;
}

double get_number_or(const json& obj, const std::string& path, const std::string& key,
                     double fallback) {
  return obj.contains(key) ? get_number(obj, path, key) : fallback;
}

std::vector<double> get_array(const json& obj, const std::string& path, const std::string& key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join_path(path, key), "missing required key");
  if (!it->is_array() || it->empty())
    throw ConfigError(join_path(path, key), "expected a non-empty array of numbers");
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) throw ConfigError(join_path(path, key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(join_path(path, key), "must be finite");
    out.push_back(d);
  }
  return out;
}

WaveguideSpec parse_waveguide(const json& obj, const std::string& path) {
  check_keys(obj, path,
             {"width_nm", "height_nm", "sidewall_angle_deg", "length_mm", "loss_db_per_cm",
              "beta2_ps2_per_m", "a_eff_um2", "n2_m2_per_w", "beta_tpa_cm_per_gw"});
  WaveguideSpec wg;
  wg.width_nm = get_number_or(obj, path, "width_nm", wg.width_nm);
  wg.height_nm = get_number_or(obj, path, "height_nm", wg.height_nm);
  wg.sidewall_angle_deg = get_number_or(obj, path, "sidewall_angle_deg", wg.sidewall_angle_deg);
  wg.length_m = get_number(obj, path, "length_mm") * 1e-3;
  wg.alpha_lin_per_m = alpha_from_db_per_cm(get_number(obj, path, "loss_db_per_cm"));
  wg.beta2_s2_per_m = get_number(obj, path, "beta2_ps2_per_m") * 1e-24;
  wg.a_eff_m2 = get_number(obj, path, "a_eff_um2") * 1e-12;
  wg.n2_m2_per_w = get_number(obj, path, "n2_m2_per_w");
  // 1 cm/GW = 1e-11 m/W; per-waveguide TPA is beta divided by the mode area.
  wg.alpha_tpa_per_w_m = get_number(obj, path, "beta_tpa_cm_per_gw") * 1e-11 / wg.a_eff_m2;
  try {
    wg.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(path, err.what());
  }
  return wg;
}

PumpSpec parse_pump(const json& obj, const std::string& path) {
  check_keys(obj, path, {"wavelength_nm", "rep_rate_hz", "fwhm_ps", "autocorr_fwhm_ps"});
  PumpSpec pump;
  pump.wavelength_m = get_number(obj, path, "wavelength_nm") * 1e-9;
  pump.rep_rate_hz = get_number(obj, path, "rep_rate_hz");
  const bool has_direct = obj.contains("fwhm_ps");
  const bool has_ac = obj.contains("autocorr_fwhm_ps");
  if (has_direct == has_ac)
    throw ConfigError(path, "need exactly one of fwhm_ps / autocorr_fwhm_ps");
  pump.fwhm_s = has_direct ? get_number(obj, path, "fwhm_ps") * 1e-12
                           : autocorrelation_fwhm_to_pulse_fwhm(
                                 get_number(obj, path, "autocorr_fwhm_ps") * 1e-12);
  if (pump.wavelength_m <= 0.0 || pump.rep_rate_hz <= 0.0 || pump.fwhm_s <= 0.0)
    throw ConfigError(path, "pump values must be positive");
  return pump;
}

ChannelSpec parse_channel(const json& obj, const std::string& path) {
  check_keys(obj, path,
             {"coupler_peak_db", "coupler_center_nm", "coupler_bw3db_nm", "mono_loss_db",
              "filter_center_nm", "filter_width_nm", "pump_rejection_db", "fiber_loss_db"});
  ChannelSpec ch;
  ch.coupler_peak_db = get_number(obj, path, "coupler_peak_db");
  ch.coupler_center_m = get_number(obj, path, "coupler_center_nm") * 1e-9;
  ch.coupler_bw3db_m = get_number_or(obj, path, "coupler_bw3db_nm", 60.0) * 1e-9;
  ch.mono_loss_db = get_number(obj, path, "mono_loss_db");
  ch.filter_center_m = get_number(obj, path, "filter_center_nm") * 1e-9;
  ch.filter_width_m = get_number_or(obj, path, "filter_width_nm", 1.0) * 1e-9;
  ch.pump_rejection_db = get_number_or(obj, path, "pump_rejection_db", 100.0);
  ch.fiber_loss_db = get_number_or(obj, path, "fiber_loss_db", 0.0);
  try {
    ch.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(path, err.what());
  }
  return ch;
}

pairsource::DetectorSpec parse_detector(const json& obj, const std::string& path) {
  check_keys(obj, path,
             {"sde_plateau", "bias_ua", "jitter_fwhm_ps", "dark_hz", "bb_hz", "dead_time_ns",
              "fiber_loss_db"});
  pairsource::DetectorSpec det;
  det.sde_plateau = get_number(obj, path, "sde_plateau");
  det.bias_ua = get_number_or(obj, path, "bias_ua", 0.0);
  det.jitter_fwhm_s = get_number(obj, path, "jitter_fwhm_ps") * 1e-12;
  det.dcr_dark_hz = get_number_or(obj, path, "dark_hz", 0.0);
  det.bb_rate_hz = get_number_or(obj, path, "bb_hz", 0.0);
  det.dead_time_s = get_number_or(obj, path, "dead_time_ns", 0.0) * 1e-9;
  det.fiber_loss_db = get_number_or(obj, path, "fiber_loss_db", 0.0);
  try {
    det.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(path, err.what());
  }
  return det;
}

pairsource::SourceSpec parse_source(const json& obj, const std::string& path, double rep_hz,
                                    pairsource::PairStatistics& statistics) {
  check_keys(obj, path, {"xi_per_w2", "linear_noise_per_w", "duty_cycle", "statistics"});
  pairsource::SourceSpec src;
  src.xi_per_w2 = get_number(obj, path, "xi_per_w2");
  src.linear_noise_b = get_number_or(obj, path, "linear_noise_per_w", 0.0);
  src.duty_cycle = get_number_or(obj, path, "duty_cycle", 0.0);
  src.rep_rate_hz = rep_hz;
  if (obj.contains("statistics")) {
    const auto& v = obj.at("statistics");
    if (!v.is_string() || (v != "poisson" && v != "thermal"))
      throw ConfigError(join_path(path, "statistics"), "expected \"poisson\" or \"thermal\"");
    statistics = v == "thermal" ? pairsource::PairStatistics::kThermal
                                : pairsource::PairStatistics::kPoisson;
  }
  try {
    src.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(path, err.what());
  }
  return src;
}

PairsPlan parse_pairs(const json& obj, const std::string& path) {
  check_keys(obj, path,
             {"powers_w", "durations_s", "car_window_ps", "scan_window_ps", "side_peaks",
              "hist_bin_ps", "fit_span_ps"});
  PairsPlan plan;
  plan.powers_w = get_array(obj, path, "powers_w");
  plan.durations_s = get_array(obj, path, "durations_s");
  if (plan.durations_s.size() == 1)
    plan.durations_s.assign(plan.powers_w.size(), plan.durations_s[0]);
  if (plan.durations_s.size() != plan.powers_w.size())
    throw ConfigError(join_path(path, "durations_s"), "size must match powers_w (or be 1)");
  plan.car_window_ps = get_number_or(obj, path, "car_window_ps", plan.car_window_ps);
  plan.scan_window_ps = get_number_or(obj, path, "scan_window_ps", plan.scan_window_ps);
  plan.side_peaks = static_cast<int>(get_number_or(obj, path, "side_peaks", plan.side_peaks));
  plan.hist_bin_ps = get_number_or(obj, path, "hist_bin_ps", plan.hist_bin_ps);
  plan.fit_span_ps = get_number_or(obj, path, "fit_span_ps", plan.fit_span_ps);
  for (double p : plan.powers_w)
    if (p <= 0.0) throw ConfigError(join_path(path, "powers_w"), "powers must be positive");
  for (double d : plan.durations_s)
    if (d <= 0.0) throw ConfigError(join_path(path, "durations_s"), "durations must be positive");
  if (plan.side_peaks < 2 || plan.side_peaks % 2 != 0)
    throw ConfigError(join_path(path, "side_peaks"), "need an even count >= 2");
  return plan;
}

InterferencePlan parse_interference(const json& obj, const std::string& path) {
  check_keys(obj, path,
             {"r_split", "car", "peak_net_hz", "duration_s", "phase_points",
              "indistinguishability", "side_windows"});
  InterferencePlan plan;
  plan.r_split = get_number(obj, path, "r_split");
  plan.car = get_number_or(obj, path, "car", 0.0);
  plan.peak_net_hz = get_number(obj, path, "peak_net_hz");
  plan.duration_s = get_number(obj, path, "duration_s");
  plan.phase_points = static_cast<int>(get_number(obj, path, "phase_points"));
  plan.indistinguishability =
      get_number_or(obj, path, "indistinguishability", plan.indistinguishability);
  plan.side_windows = static_cast<int>(get_number_or(obj, path, "side_windows", plan.side_windows));
  if (plan.r_split <= 0.0 || plan.r_split >= 1.0)
    throw ConfigError(join_path(path, "r_split"), "must lie in (0, 1)");
  if (plan.phase_points < 5)
    throw ConfigError(join_path(path, "phase_points"), "need at least 5 points");
  if (plan.duration_s <= 0.0)
    throw ConfigError(join_path(path, "duration_s"), "must be positive");
  return plan;
}

PropagatePlan parse_propagate(const json& obj, const std::string& path) {
  check_keys(obj, path, {"steps", "powers_w", "grid_n", "span_fwhm"});
  PropagatePlan plan;
  plan.steps = static_cast<int>(get_number_or(obj, path, "steps", plan.steps));
  plan.powers_w = get_array(obj, path, "powers_w");
  plan.grid_n = static_cast<std::size_t>(get_number_or(obj, path, "grid_n", 4096.0));
  plan.span_fwhm = get_number_or(obj, path, "span_fwhm", plan.span_fwhm);
  if (plan.steps < 64) throw ConfigError(join_path(path, "steps"), "need at least 64 steps");
  for (double p : plan.powers_w)
    if (p <= 0.0) throw ConfigError(join_path(path, "powers_w"), "powers must be positive");
  return plan;
}

RetrievePlan parse_retrieve(const json& obj, const std::string& path) {
  check_keys(obj, path, {"max_iterations", "tol", "n2_power_max_w"});
  RetrievePlan plan;
  plan.max_iterations =
      static_cast<std::size_t>(get_number_or(obj, path, "max_iterations", 500.0));
  plan.tol = get_number_or(obj, path, "tol", plan.tol);
  plan.n2_power_max_w = get_number_or(obj, path, "n2_power_max_w", 0.0);
  if (plan.max_iterations < 10)
    throw ConfigError(join_path(path, "max_iterations"), "need at least 10 iterations");
  if (plan.tol <= 0.0) throw ConfigError(join_path(path, "tol"), "must be positive");
  return plan;
}

PhasematchPlan parse_phasematch(const json& obj, const std::string& path) {
  check_keys(obj, path, {"detuning_max_rad_s", "points", "powers_w"});
  PhasematchPlan plan;
  plan.detuning_max_rad_s = get_number_or(obj, path, "detuning_max_rad_s", 0.0);
  plan.points = static_cast<std::size_t>(get_number_or(obj, path, "points", 801.0));
  plan.powers_w = get_array(obj, path, "powers_w");
  if (plan.points < 11) throw ConfigError(join_path(path, "points"), "need at least 11 points");
  return plan;
}

nlse::FreeCarrierSpec parse_free_carrier(const json& obj, const std::string& path) {
  check_keys(obj, path, {"sigma_fca_m2", "fcd_m3"});
  nlse::FreeCarrierSpec fc;
  fc.sigma_fca_m2 = get_number(obj, path, "sigma_fca_m2");
  fc.fcd_coefficient_m3 = get_number_or(obj, path, "fcd_m3", 0.0);
  if (fc.sigma_fca_m2 < 0.0 || fc.fcd_coefficient_m3 < 0.0)
    throw ConfigError(path, "free-carrier coefficients must be >= 0");
  return fc;
}

}  // namespace

std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& err) {
    throw ConfigError("", std::string("not valid JSON: ") + err.what());
  }
  check_keys(root, "",
             {"name", "seed", "waveguide", "pump", "channels", "detectors", "source", "pairs",
              "interference", "propagate", "retrieve", "phasematch", "freecarrier"});

  ExperimentConfig cfg;
  if (root.contains("name")) {
    if (!root["name"].is_string()) throw ConfigError("name", "expected a string");
    cfg.name = root["name"].get<std::string>();
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) throw ConfigError("seed", "expected an integer >= 0");
    cfg.seed = root["seed"].get<std::uint64_t>();
  }
  if (!root.contains("waveguide")) throw ConfigError("waveguide", "missing required section");
  if (!root.contains("pump")) throw ConfigError("pump", "missing required section");
  cfg.waveguide = parse_waveguide(root["waveguide"], "waveguide");
  cfg.pump = parse_pump(root["pump"], "pump");

  if (root.contains("channels")) {
    check_keys(root["channels"], "channels", {"a", "b"});
    if (!root["channels"].contains("a") || !root["channels"].contains("b"))
      throw ConfigError("channels", "need both \"a\" and \"b\"");
    cfg.channel_a = parse_channel(root["channels"]["a"], "channels.a");
    cfg.channel_b = parse_channel(root["channels"]["b"], "channels.b");
  }
  if (root.contains("detectors")) {
    check_keys(root["detectors"], "detectors", {"a", "b"});
    if (!root["detectors"].contains("a") || !root["detectors"].contains("b"))
      throw ConfigError("detectors", "need both \"a\" and \"b\"");
    cfg.detector_a = parse_detector(root["detectors"]["a"], "detectors.a");
    cfg.detector_b = parse_detector(root["detectors"]["b"], "detectors.b");
  }
  if (root.contains("source"))
    cfg.source =
        parse_source(root["source"], "source", cfg.pump.rep_rate_hz, cfg.pair_statistics);
  if (root.contains("pairs")) cfg.pairs = parse_pairs(root["pairs"], "pairs");
  if (root.contains("interference"))
    cfg.interference = parse_interference(root["interference"], "interference");
  if (root.contains("propagate")) cfg.propagate = parse_propagate(root["propagate"], "propagate");
  if (root.contains("retrieve")) cfg.retrieve = parse_retrieve(root["retrieve"], "retrieve");
  if (root.contains("phasematch"))
    cfg.phasematch = parse_phasematch(root["phasematch"], "phasematch");
  if (root.contains("freecarrier"))
    cfg.free_carrier = parse_free_carrier(root["freecarrier"], "freecarrier");

  cfg.config_hash = fnv1a_hash(root.dump());
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace config
}  // namespace mirpairs
