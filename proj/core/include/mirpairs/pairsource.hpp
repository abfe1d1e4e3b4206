#pragma once

#include <cstdint>
#include <vector>

#include "mirpairs/physmodel.hpp"

// Monte-Carlo photon-pair source and detection chain. One pulsed source
// feeds a 50:50 splitter; arm A passes only the signal band, arm B only the
// idler band, so a generated pair yields a possible coincidence with
// probability 1/4. Event generation is windowed: each window of pulses draws
// from its own counter-derived random substream, so tag streams are
// identical for any worker-thread count.

namespace mirpairs {
namespace pairsource {

enum class PairStatistics {
  kPoisson,  // per-pulse pair number ~ Poisson(mu); O(detected events)
  kThermal,  // per-pulse Bose-Einstein statistics; O(pulses), test use
};

struct SourceSpec {
  double xi_per_w2 = 0.0;        // pairs/pulse per W^2 of peak power
  double rep_rate_hz = 0.0;      // pulse repetition rate
  double linear_noise_b = 0.0;   // noise photons/pulse per W (leakage), on-chip
  double duty_cycle = 0.0;       // effective duty cycle (avg-power conversion)

  void validate() const;  // throws std::invalid_argument
};

struct DetectorSpec {
  double sde_plateau = 0.0;    // system detection efficiency at operating bias
  double bias_ua = 0.0;        // operating bias (bookkeeping)
  double jitter_fwhm_s = 0.0;  // per-detector Gaussian timing jitter
  double dcr_dark_hz = 0.0;    // intrinsic dark counts
  double bb_rate_hz = 0.0;     // black-body background counts
  double dead_time_s = 0.0;    // drop tags closer than this, per channel (<= 100 ns)
  double fiber_loss_db = 0.0;  // cryostat fiber span, dB (<= 0)

  void validate() const;  // throws std::invalid_argument
};

// channel: 0 = A (signal arm), 1 = B (idler arm). t: picoseconds.
struct TimeTag {
  std::uint8_t channel = 0;
  std::int64_t t_ps = 0;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

struct TagStreamMeta {
  std::uint64_t seed = 0;
  double peak_power_w = 0.0;
  double duration_s = 0.0;
  double rep_rate_hz = 0.0;
  std::uint64_t config_hash = 0;
};

struct TagStream {
  TagStreamMeta meta;
  std::vector<TimeTag> tags;  // sorted by (t_ps, channel)

  // Checks global (t, channel) ordering and per-channel dead-time spacing;
  // throws std::runtime_error on violation.
  void validate(double dead_time_s = 0.0) const;
};

// Expected pairs per pulse mu = xi * P^2.
double pairs_per_pulse(double xi_per_w2, double peak_power_w);

// End-to-end transmission of one arm excluding the 1/2 routing factor:
// coupler peak, two monochromator passes, patch and cryostat fibers, SDE.
double arm_efficiency(const ChannelSpec& chan, const DetectorSpec& det);

struct SimOptions {
  int threads = 1;                       // worker threads for window generation
  std::uint64_t window_pulses = 1 << 20; // pulses per random-substream window
  PairStatistics statistics = PairStatistics::kPoisson;
};

// Simulate duration_s (<= 3600 s) of tags at the given peak power.
TagStream simulate_tags(const SourceSpec& src, const ChannelSpec& chan_a,
                        const ChannelSpec& chan_b, const DetectorSpec& det_a,
                        const DetectorSpec& det_b, double peak_power_w, double duration_s,
                        std::uint64_t seed, const SimOptions& opts = {});

struct RateEstimate {
  double singles_a_hz = 0.0;       // pulsed photons plus dark/black-body
  double singles_b_hz = 0.0;
  double coincidences_hz = 0.0;    // true pairs R mu eta_a eta_b / 4 (no window)
  double accidentals_hz = 0.0;     // uncorrelated rate inside the window
  double window_capture = 0.0;     // Gaussian capture of true pairs in the window
  bool multipair_warning = false;  // mu >= 0.1
};

// Closed-form expectations used as the oracle for simulate_tags.
RateEstimate expected_rates(const SourceSpec& src, const ChannelSpec& chan_a,
                            const ChannelSpec& chan_b, const DetectorSpec& det_a,
                            const DetectorSpec& det_b, double peak_power_w,
                            double window_s = 389e-12);

}  // namespace pairsource
}  // namespace mirpairs
