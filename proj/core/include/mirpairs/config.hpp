#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mirpairs/nlse.hpp"
#include "mirpairs/pairsource.hpp"
#include "mirpairs/physmodel.hpp"

// Strict JSON experiment description. Keys carry their unit as a suffix
// (_nm, _ps, _db, ...); unknown keys are rejected with their full path so a
// typo cannot silently fall back to a default. The loader converts
// everything to SI on the way in.

namespace mirpairs {
namespace config {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error("config: " + (path.empty() ? what : path + ": " + what)),
        key_path_(path) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

struct PumpSpec {
  double wavelength_m = 0.0;
  double rep_rate_hz = 0.0;
  double fwhm_s = 0.0;  // deconvolved pulse width (not the autocorrelation)
};

struct PairsPlan {
  std::vector<double> powers_w;     // peak powers of the scan
  std::vector<double> durations_s;  // per-power integration time
  double car_window_ps = 389.0;
  double scan_window_ps = 2000.0;  // wide window for the brightness fit
  int side_peaks = 6;
  double hist_bin_ps = 4.0;
  double fit_span_ps = 1500.0;  // half-span of the Gaussian peak fit
};

struct InterferencePlan {
  double r_split = 0.5;
  double car = 0.0;
  double peak_net_hz = 0.0;
  double duration_s = 0.0;
  int phase_points = 0;
  double indistinguishability = 1.0;
  int side_windows = 6;
};

struct PropagatePlan {
  int steps = 512;
  std::vector<double> powers_w;
  std::size_t grid_n = 4096;
  double span_fwhm = 32.0;
};

struct RetrievePlan {
  std::size_t max_iterations = 500;
  double tol = 1e-6;
  double n2_power_max_w = 0.0;  // 0 = use every power for the n2 fit
};

struct PhasematchPlan {
  double detuning_max_rad_s = 0.0;  // 0 = choose from the waveguide
  std::size_t points = 801;
  std::vector<double> powers_w;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 1;
  WaveguideSpec waveguide;
  PumpSpec pump;
  std::optional<ChannelSpec> channel_a;
  std::optional<ChannelSpec> channel_b;
  std::optional<pairsource::DetectorSpec> detector_a;
  std::optional<pairsource::DetectorSpec> detector_b;
  std::optional<pairsource::SourceSpec> source;
  pairsource::PairStatistics pair_statistics = pairsource::PairStatistics::kPoisson;
  std::optional<PairsPlan> pairs;
  std::optional<InterferencePlan> interference;
  std::optional<PropagatePlan> propagate;
  std::optional<RetrievePlan> retrieve;
  std::optional<PhasematchPlan> phasematch;
  std::optional<nlse::FreeCarrierSpec> free_carrier;
  std::uint64_t config_hash = 0;  // FNV-1a of the canonical JSON dump
};

// Throws ConfigError for schema problems, std::runtime_error for IO.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

std::uint64_t fnv1a_hash(const std::string& bytes);

}  // namespace config
}  // namespace mirpairs
