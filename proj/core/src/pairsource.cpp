#include "mirpairs/pairsource.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

#include "mirpairs/rng.hpp"

namespace mirpairs {
namespace pairsource {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("pairsource: " + msg);
}

constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

// Random-substream ids, one per independent physical noise process.
enum StreamId : std::uint64_t {
  kStreamPairs = 0,
  kStreamNoiseA = 1,
  kStreamNoiseB = 2,
  kStreamDarkA = 3,
  kStreamDarkB = 4,
};

struct WindowJob {
  std::uint64_t index = 0;        // window index (substream selector)
  std::uint64_t first_pulse = 0;  // first pulse in window
  std::uint64_t n_pulses = 0;     // pulses in window
};

struct PulseParams {
  double mu = 0.0;       // pairs per pulse
  double p_s = 0.0;      // signal detected in arm A, per pair
  double p_i = 0.0;      // idler detected in arm B, per pair
  double noise_a = 0.0;  // detected noise clicks per pulse, arm A
  double noise_b = 0.0;  // detected noise clicks per pulse, arm B
  double dark_a_hz = 0.0;
  double dark_b_hz = 0.0;
  double sigma_a_ps = 0.0;  // per-detector jitter, std dev
  double sigma_b_ps = 0.0;
  double period_ps = 0.0;
};

std::int64_t pulse_tag_ps(std::uint64_t pulse, double period_ps, double jitter_ps) {
  return static_cast<std::int64_t>(
      std::llround(static_cast<double>(pulse) * period_ps + jitter_ps));
}

void generate_window(const PulseParams& pp, std::uint64_t seed, const WindowJob& job,
                     PairStatistics stats, std::vector<TimeTag>& out) {
  const double n = static_cast<double>(job.n_pulses);
  const double t0_ps = static_cast<double>(job.first_pulse) * pp.period_ps;
  const double span_ps = n * pp.period_ps;

  // Correlated pairs. Poisson pair numbers thin into three independent
  // Poisson streams (both detected / signal only / idler only), so the cost
  // is proportional to detected events, not pulses.
  {
    Rng rng = Rng::substream(seed, kStreamPairs, job.index);
    if (stats == PairStatistics::kPoisson) {
      const std::uint64_t n_both = rng.poisson(n * pp.mu * pp.p_s * pp.p_i);
      const std::uint64_t n_sig = rng.poisson(n * pp.mu * pp.p_s * (1.0 - pp.p_i));
      const std::uint64_t n_idl = rng.poisson(n * pp.mu * pp.p_i * (1.0 - pp.p_s));
      for (std::uint64_t k = 0; k < n_both; ++k) {
        const std::uint64_t pulse = job.first_pulse + rng.uniform_below(job.n_pulses);
        out.push_back({0, pulse_tag_ps(pulse, pp.period_ps, rng.normal(0.0, pp.sigma_a_ps))});
        out.push_back({1, pulse_tag_ps(pulse, pp.period_ps, rng.normal(0.0, pp.sigma_b_ps))});
      }
      for (std::uint64_t k = 0; k < n_sig; ++k) {
        const std::uint64_t pulse = job.first_pulse + rng.uniform_below(job.n_pulses);
        out.push_back({0, pulse_tag_ps(pulse, pp.period_ps, rng.normal(0.0, pp.sigma_a_ps))});
      }
      for (std::uint64_t k = 0; k < n_idl; ++k) {
        const std::uint64_t pulse = job.first_pulse + rng.uniform_below(job.n_pulses);
        out.push_back({1, pulse_tag_ps(pulse, pp.period_ps, rng.normal(0.0, pp.sigma_b_ps))});
      }
    } else {
      // Bose-Einstein pair numbers have no thinning shortcut; walk every
      // pulse. Kept for statistics cross-checks on short runs.
      const double ratio = pp.mu / (1.0 + pp.mu);
      const double log_ratio = std::log(ratio);
      for (std::uint64_t p = 0; p < job.n_pulses; ++p) {
        const double u = rng.uniform();
        std::uint64_t npair = 0;
        if (pp.mu > 0.0 && u > 0.0) {
          const double x = std::log(u) / log_ratio;
          npair = x >= 4096.0 ? 4096 : static_cast<std::uint64_t>(x);
        }
        const std::uint64_t pulse = job.first_pulse + p;
        for (std::uint64_t k = 0; k < npair; ++k) {
          const bool det_s = rng.uniform() < pp.p_s;
          const bool det_i = rng.uniform() < pp.p_i;
          if (det_s)
            out.push_back({0, pulse_tag_ps(pulse, pp.period_ps, rng.normal(0.0, pp.sigma_a_ps))});
          if (det_i)
            out.push_back({1, pulse_tag_ps(pulse, pp.period_ps, rng.normal(0.0, pp.sigma_b_ps))});
        }
      }
    }
  }

  // Pulse-locked uncorrelated noise (pump leakage and broadband parasitics).
  {
    Rng rng = Rng::substream(seed, kStreamNoiseA, job.index);
    const std::uint64_t cnt = rng.poisson(n * pp.noise_a);
    for (std::uint64_t k = 0; k < cnt; ++k) {
      const std::uint64_t pulse = job.first_pulse + rng.uniform_below(job.n_pulses);
      out.push_back({0, pulse_tag_ps(pulse, pp.period_ps, rng.normal(0.0, pp.sigma_a_ps))});
    }
  }
  {
    Rng rng = Rng::substream(seed, kStreamNoiseB, job.index);
    const std::uint64_t cnt = rng.poisson(n * pp.noise_b);
    for (std::uint64_t k = 0; k < cnt; ++k) {
      const std::uint64_t pulse = job.first_pulse + rng.uniform_below(job.n_pulses);
      out.push_back({1, pulse_tag_ps(pulse, pp.period_ps, rng.normal(0.0, pp.sigma_b_ps))});
    }
  }

  // Dark and black-body counts, uniform in time.
  const auto uniform_tags = [&](std::uint64_t stream, double rate_hz, std::uint8_t channel) {
    Rng rng = Rng::substream(seed, stream, job.index);
    const std::uint64_t cnt = rng.poisson(rate_hz * span_ps * 1e-12);
    for (std::uint64_t k = 0; k < cnt; ++k) {
      const double t = t0_ps + rng.uniform() * span_ps;
      out.push_back({channel, static_cast<std::int64_t>(std::llround(t))});
    }
  };
  uniform_tags(kStreamDarkA, pp.dark_a_hz, 0);
  uniform_tags(kStreamDarkB, pp.dark_b_hz, 1);
}

void apply_dead_time(std::vector<TimeTag>& tags, double dead_a_s, double dead_b_s) {
  if (dead_a_s <= 0.0 && dead_b_s <= 0.0) return;
  const std::int64_t dead_ps[2] = {
      static_cast<std::int64_t>(std::llround(dead_a_s * 1e12)),
      static_cast<std::int64_t>(std::llround(dead_b_s * 1e12))};
  std::int64_t last[2] = {0, 0};
  bool seen[2] = {false, false};
  std::size_t kept = 0;
  for (const TimeTag& tag : tags) {
    const int ch = tag.channel;
    if (seen[ch] && tag.t_ps - last[ch] < dead_ps[ch]) continue;
    seen[ch] = true;
    last[ch] = tag.t_ps;
    tags[kept++] = tag;
  }
  tags.resize(kept);
}

}  // namespace

void SourceSpec::validate() const {
  require(std::isfinite(xi_per_w2) && xi_per_w2 >= 0.0, "xi must be >= 0");
  require(std::isfinite(rep_rate_hz) && rep_rate_hz > 0.0, "rep rate must be positive");
  require(std::isfinite(linear_noise_b) && linear_noise_b >= 0.0,
          "linear noise coefficient must be >= 0");
  require(std::isfinite(duty_cycle) && duty_cycle >= 0.0 && duty_cycle <= 1.0,
          "duty cycle must lie in [0, 1]");
}

void DetectorSpec::validate() const {
  require(std::isfinite(sde_plateau) && sde_plateau > 0.0 && sde_plateau <= 1.0,
          "detection efficiency must lie in (0, 1]");
  require(std::isfinite(jitter_fwhm_s) && jitter_fwhm_s >= 0.0, "jitter must be >= 0");
  require(std::isfinite(dcr_dark_hz) && dcr_dark_hz >= 0.0, "dark rate must be >= 0");
  require(std::isfinite(bb_rate_hz) && bb_rate_hz >= 0.0, "background rate must be >= 0");
  require(std::isfinite(dead_time_s) && dead_time_s >= 0.0 && dead_time_s <= 100e-9,
          "dead time must lie in [0, 100 ns]");
  require(std::isfinite(fiber_loss_db) && fiber_loss_db <= 0.0, "fiber loss must be <= 0 dB");
}

void TagStream::validate(double dead_time_s) const {
  const std::int64_t dead_ps = static_cast<std::int64_t>(std::llround(dead_time_s * 1e12));
  std::int64_t last_ch[2] = {0, 0};
  bool seen[2] = {false, false};
  const TimeTag* prev = nullptr;
  for (const TimeTag& tag : tags) {
    if (tag.channel > 1) throw std::runtime_error("tag stream: channel out of range");
    if (prev != nullptr) {
      const bool ordered = prev->t_ps < tag.t_ps ||
                           (prev->t_ps == tag.t_ps && prev->channel <= tag.channel);
      if (!ordered) throw std::runtime_error("tag stream: tags out of (time, channel) order");
    }
    const int ch = tag.channel;
    if (dead_ps > 0 && seen[ch] && tag.t_ps - last_ch[ch] < dead_ps)
      throw std::runtime_error("tag stream: dead-time violation");
    seen[ch] = true;
    last_ch[ch] = tag.t_ps;
    prev = &tag;
  }
}

double pairs_per_pulse(double xi_per_w2, double peak_power_w) {
  require(std::isfinite(xi_per_w2) && xi_per_w2 >= 0.0, "xi must be >= 0");
  require(std::isfinite(peak_power_w) && peak_power_w >= 0.0, "power must be >= 0");
  return xi_per_w2 * peak_power_w * peak_power_w;
}

double arm_efficiency(const ChannelSpec& chan, const DetectorSpec& det) {
  chan.validate();
  det.validate();
  const double total_db =
      chan.coupler_peak_db + 2.0 * chan.mono_loss_db + chan.fiber_loss_db + det.fiber_loss_db;
  return db_to_linear(total_db) * det.sde_plateau;
}

TagStream simulate_tags(const SourceSpec& src, const ChannelSpec& chan_a,
                        const ChannelSpec& chan_b, const DetectorSpec& det_a,
                        const DetectorSpec& det_b, double peak_power_w, double duration_s,
                        std::uint64_t seed, const SimOptions& opts) {
  src.validate();
  require(std::isfinite(peak_power_w) && peak_power_w >= 0.0, "power must be >= 0");
  require(std::isfinite(duration_s) && duration_s > 0.0 && duration_s <= 3600.0,
          "duration must lie in (0 s, 3600 s]");
  require(opts.threads >= 1 && opts.threads <= 256, "threads must lie in [1, 256]");
  require(opts.window_pulses >= 1024, "window must hold at least 1024 pulses");

  const std::uint64_t n_pulses =
      static_cast<std::uint64_t>(std::floor(duration_s * src.rep_rate_hz));
  require(n_pulses >= 1, "duration shorter than one pulse period");
  if (opts.statistics == PairStatistics::kThermal)
    require(n_pulses <= 200000000ull, "thermal statistics walk every pulse; shorten the run");

  PulseParams pp;
  pp.mu = pairs_per_pulse(src.xi_per_w2, peak_power_w);
  pp.p_s = 0.5 * arm_efficiency(chan_a, det_a);
  pp.p_i = 0.5 * arm_efficiency(chan_b, det_b);
  pp.noise_a = src.linear_noise_b * peak_power_w * 0.5 * arm_efficiency(chan_a, det_a);
  pp.noise_b = src.linear_noise_b * peak_power_w * 0.5 * arm_efficiency(chan_b, det_b);
  pp.dark_a_hz = det_a.dcr_dark_hz + det_a.bb_rate_hz;
  pp.dark_b_hz = det_b.dcr_dark_hz + det_b.bb_rate_hz;
  pp.sigma_a_ps = det_a.jitter_fwhm_s / kFwhmPerSigma * 1e12;
  pp.sigma_b_ps = det_b.jitter_fwhm_s / kFwhmPerSigma * 1e12;
  pp.period_ps = 1e12 / src.rep_rate_hz;

  const std::uint64_t window = opts.window_pulses;
  const std::uint64_t n_windows = (n_pulses + window - 1) / window;
  std::vector<std::vector<TimeTag>> buckets(n_windows);

  const auto run_range = [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t widx = begin; widx < end; ++widx) {
      WindowJob job;
      job.index = widx;
      job.first_pulse = widx * window;
      job.n_pulses = std::min<std::uint64_t>(window, n_pulses - job.first_pulse);
      generate_window(pp, seed, job, opts.statistics, buckets[widx]);
    }
  };

  const std::uint64_t workers =
      std::min<std::uint64_t>(static_cast<std::uint64_t>(opts.threads), n_windows);
  if (workers <= 1) {
    run_range(0, n_windows);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::uint64_t t = 0; t < workers; ++t) {
      const std::uint64_t begin = n_windows * t / workers;
      const std::uint64_t end = n_windows * (t + 1) / workers;
      pool.emplace_back(run_range, begin, end);
    }
    for (std::thread& th : pool) th.join();
  }

  TagStream stream;
  stream.meta.seed = seed;
  stream.meta.peak_power_w = peak_power_w;
  stream.meta.duration_s = duration_s;
  stream.meta.rep_rate_hz = src.rep_rate_hz;
  std::size_t total = 0;
  for (const auto& b : buckets) total += b.size();
  stream.tags.reserve(total);
  for (const auto& b : buckets) stream.tags.insert(stream.tags.end(), b.begin(), b.end());

  std::sort(stream.tags.begin(), stream.tags.end(), [](const TimeTag& a, const TimeTag& b) {
    return a.t_ps != b.t_ps ? a.t_ps < b.t_ps : a.channel < b.channel;
  });
  apply_dead_time(stream.tags, det_a.dead_time_s, det_b.dead_time_s);
  return stream;
}

RateEstimate expected_rates(const SourceSpec& src, const ChannelSpec& chan_a,
                            const ChannelSpec& chan_b, const DetectorSpec& det_a,
                            const DetectorSpec& det_b, double peak_power_w, double window_s) {
  src.validate();
  require(std::isfinite(peak_power_w) && peak_power_w >= 0.0, "power must be >= 0");
  require(std::isfinite(window_s) && window_s > 0.0, "window must be positive");

  const double rep = src.rep_rate_hz;
  const double mu = pairs_per_pulse(src.xi_per_w2, peak_power_w);
  const double p_s = 0.5 * arm_efficiency(chan_a, det_a);
  const double p_i = 0.5 * arm_efficiency(chan_b, det_b);
  const double dark_a = det_a.dcr_dark_hz + det_a.bb_rate_hz;
  const double dark_b = det_b.dcr_dark_hz + det_b.bb_rate_hz;

  // Per-pulse click probabilities (linearized; valid while << 1).
  const double p_a = (mu + src.linear_noise_b * peak_power_w) * p_s;
  const double p_b = (mu + src.linear_noise_b * peak_power_w) * p_i;

  RateEstimate est;
  est.singles_a_hz = rep * p_a + dark_a;
  est.singles_b_hz = rep * p_b + dark_b;
  est.coincidences_hz = rep * mu * p_s * p_i;

  const double sigma_a = det_a.jitter_fwhm_s / kFwhmPerSigma;
  const double sigma_b = det_b.jitter_fwhm_s / kFwhmPerSigma;
  const double sigma_cc = std::sqrt(sigma_a * sigma_a + sigma_b * sigma_b);
  est.window_capture =
      sigma_cc > 0.0 ? std::erf(window_s / (2.0 * sigma_cc * std::sqrt(2.0))) : 1.0;

  // Accidentals inside the window: pulse-locked products land in full,
  // anything involving a uniform background scales with the window width.
  est.accidentals_hz = rep * p_a * p_b +
                       window_s * (rep * p_a * dark_b + dark_a * rep * p_b + dark_a * dark_b);
  est.multipair_warning = mu >= 0.1;
  return est;
}

}  // namespace pairsource
}  // namespace mirpairs
