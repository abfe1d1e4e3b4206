#include "mirpairs/interference.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mirpairs/fitters.hpp"
#include "mirpairs/rng.hpp"

namespace mirpairs {
namespace interference {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("interference: " + msg);
}

void check_split(double r_split) {
  require(std::isfinite(r_split) && r_split >= 0.0 && r_split <= 1.0,
          "splitting ratio must lie in [0, 1]");
}

}  // namespace

double BiphotonState::coincidence_probability() const {
  return std::norm(amplitudes[2]) + std::norm(amplitudes[3]);
}

double BiphotonState::norm() const {
  double n = 0.0;
  for (const auto& a : amplitudes) n += std::norm(a);
  return n;
}

BiphotonState biphoton_state(double r_split, double phi_rad) {
  check_split(r_split);
  require(std::isfinite(phi_rad), "phase must be finite");
  const double big_r = r_split;
  const double big_t = 1.0 - r_split;
  const double c = std::cos(phi_rad);
  const double s = std::sin(phi_rad);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  // (s1+ i1+ + e^{2 i phi} s2+ i2+)/sqrt(2) through U = [[t, i r], [i r, t]]
  // applied to signal and idler alike, then the global phase i e^{i phi}
  // divided out.
  BiphotonState st;
  st.amplitudes[0] = {-s * inv_sqrt2, -(big_t - big_r) * c * inv_sqrt2};
  st.amplitudes[1] = {s * inv_sqrt2, -(big_t - big_r) * c * inv_sqrt2};
  st.amplitudes[2] = {std::sqrt(2.0 * big_r * big_t) * c, 0.0};
  st.amplitudes[3] = {std::sqrt(2.0 * big_r * big_t) * c, 0.0};
  return st;
}

double coincidence_probability(double r_split, double phi_rad) {
  return biphoton_state(r_split, phi_rad).coincidence_probability();
}

double classical_fringe(double phi_rad) {
  require(std::isfinite(phi_rad), "phase must be finite");
  return 0.5 * (1.0 + std::cos(phi_rad));
}

FringeScan simulate_fringe(const FringeSpec& spec, std::uint64_t seed) {
  check_split(spec.r_split);
  require(spec.indistinguishability >= 0.0 && spec.indistinguishability <= 1.0,
          "indistinguishability must lie in [0, 1]");
  require(std::isfinite(spec.peak_net_hz) && spec.peak_net_hz >= 0.0,
          "peak rate must be >= 0");
  require(std::isfinite(spec.car) && spec.car >= 0.0, "car must be >= 0");
  require(std::isfinite(spec.duration_s) && spec.duration_s > 0.0,
          "duration must be positive");
  require(spec.side_windows >= 1, "need at least one accidental window");
  require(!spec.phases_rad.empty(), "need at least one phase point");

  const double vi = spec.indistinguishability;
  const double rt4 = 4.0 * spec.r_split * (1.0 - spec.r_split);
  // q(phi) relative to the fringe maximum q(0); flat part from
  // distinguishable pairs.
  const double q_max = vi * rt4 + (1.0 - vi) * 0.5 * rt4;
  const double acc_hz = spec.car > 0.0 ? spec.peak_net_hz / spec.car : 0.0;

  FringeScan scan;
  scan.phases_rad = spec.phases_rad;
  scan.duration_s = spec.duration_s;
  scan.raw_counts.resize(spec.phases_rad.size());
  scan.accidental_counts.resize(spec.phases_rad.size());
  scan.net_counts.resize(spec.phases_rad.size());

  for (std::size_t k = 0; k < spec.phases_rad.size(); ++k) {
    const double phi = spec.phases_rad[k];
    require(std::isfinite(phi), "phase must be finite");
    const double c = std::cos(phi);
    const double q = vi * rt4 * c * c + (1.0 - vi) * 0.5 * rt4;
    const double net_hz = q_max > 0.0 ? spec.peak_net_hz * q / q_max : 0.0;

    Rng rng = Rng::substream(seed, k, 0);
    const double raw_mean = (net_hz + acc_hz) * spec.duration_s;
    const double acc_mean = acc_hz * spec.duration_s * spec.side_windows;
    scan.raw_counts[k] = rng.poisson(raw_mean);
    scan.accidental_counts[k] =
        static_cast<double>(rng.poisson(acc_mean)) / spec.side_windows;
    scan.net_counts[k] = static_cast<double>(scan.raw_counts[k]) - scan.accidental_counts[k];
  }
  return scan;
}

VisibilityFit fit_visibility(const std::vector<double>& phases_rad,
                             const std::vector<double>& counts,
                             const std::vector<double>& errs) {
  require(phases_rad.size() == counts.size(), "phase/count size mismatch");
  require(phases_rad.size() >= 5, "need at least five phase points");
  require(errs.empty() || errs.size() == counts.size(), "error vector size mismatch");

  std::vector<double> weights;
  if (!errs.empty()) {
    weights.reserve(errs.size());
    for (const double e : errs) weights.push_back(e > 0.0 ? 1.0 / e : 1.0);
  }

  VisibilityFit out;
  const auto guess = fitters::initial_guess(fitters::ModelId::kHarmonic2, phases_rad, counts);
  if (!guess) return out;
  const auto fit =
      fitters::least_squares(fitters::ModelId::kHarmonic2, phases_rad, counts, weights, *guess);
  if (!fit.converged || fit.params.size() != 3) return out;

  const double c0 = fit.params[0];
  const double c1 = fit.params[1];
  const double c2 = fit.params[2];
  const double amp = std::hypot(c1, c2);
  if (c0 <= 0.0 || amp <= 0.0) return out;

  out.offset = c0;
  out.visibility = amp / c0;
  // atan2 picks the maximum of c1 cos(2phi) + c2 sin(2phi).
  out.phase0_rad = 0.5 * std::atan2(c2, c1);
  // First-order propagation with the diagonal covariance entries.
  const double dc0 = fit.param_errs[0];
  const double dc1 = fit.param_errs[1];
  const double dc2 = fit.param_errs[2];
  const double da = std::sqrt(c1 * c1 * dc1 * dc1 + c2 * c2 * dc2 * dc2) / amp;
  out.visibility_err =
      out.visibility * std::sqrt(da * da / (amp * amp) + dc0 * dc0 / (c0 * c0));
  out.converged = true;
  return out;
}

PhaseCalibration calibrate_phase_voltage(const std::vector<double>& volts,
                                         const std::vector<double>& intensity) {
  require(volts.size() == intensity.size(), "voltage/intensity size mismatch");
  require(volts.size() >= 8, "need at least eight calibration points");

  PhaseCalibration cal;
  const auto guess = fitters::initial_guess(fitters::ModelId::kSinusoid, volts, intensity);
  if (!guess) return cal;
  const auto fit =
      fitters::least_squares(fitters::ModelId::kSinusoid, volts, intensity, {}, *guess);
  if (!fit.converged || fit.params.size() != 4) return cal;

  // I(v) = o + a cos(f v + phi0). A negative amplitude is the same fringe
  // shifted by pi; fold it into the offset so rad_per_v stays positive.
  double freq = fit.params[2];
  double phase0 = fit.params[3];
  if (fit.params[1] < 0.0) phase0 += std::acos(-1.0);
  if (freq < 0.0) {
    freq = -freq;
    phase0 = -phase0;
  }
  cal.rad_per_v = freq;
  cal.phase0_rad = std::remainder(phase0, 2.0 * std::acos(-1.0));
  cal.converged = true;
  return cal;
}

double phase_from_voltage(double volts, const PhaseCalibration& cal) {
  require(cal.converged, "calibration has not converged");
  require(std::isfinite(volts), "voltage must be finite");
  return cal.rad_per_v * volts + cal.phase0_rad;
}

}  // namespace interference
}  // namespace mirpairs
