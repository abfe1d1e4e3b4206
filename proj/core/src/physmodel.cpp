#include "mirpairs/physmodel.hpp"

#include <cmath>
#include <stdexcept>

namespace mirpairs {

namespace {

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

double db_to_linear(double db) {
  require(std::isfinite(db), "db_to_linear: value must be finite");
  return std::pow(10.0, db / 10.0);
}

double linear_to_db(double fraction) {
  require(std::isfinite(fraction) && fraction > 0.0, "linear_to_db: fraction must be > 0");
  return 10.0 * std::log10(fraction);
}

double angular_frequency(double wavelength_m) {
  require(std::isfinite(wavelength_m) && wavelength_m > 0.0,
          "angular_frequency: wavelength must be > 0");
  return 2.0 * M_PI * kSpeedOfLight / wavelength_m;
}

double wavelength_from_angular(double omega_rad_s) {
  require(std::isfinite(omega_rad_s) && omega_rad_s > 0.0,
          "wavelength_from_angular: omega must be > 0");
  return 2.0 * M_PI * kSpeedOfLight / omega_rad_s;
}

double alpha_from_db_per_cm(double db_per_cm) {
  require(std::isfinite(db_per_cm) && db_per_cm >= 0.0,
          "alpha_from_db_per_cm: loss must be >= 0");
  // dB/cm -> dB/m, then dB -> e-folding: ln(10)/10.
  return db_per_cm * 100.0 * std::log(10.0) / 10.0;
}

double WaveguideSpec::effective_length() const {
  const double al = alpha_lin_per_m * length_m;
  if (al < 1e-12) return length_m * (1.0 - 0.5 * al);  // series limit, alpha -> 0
  return (1.0 - std::exp(-al)) / alpha_lin_per_m;
}

void WaveguideSpec::validate() const {
  require(width_nm > 0.0 && height_nm > 0.0, "WaveguideSpec: cross-section must be positive");
  require(length_m > 0.0, "WaveguideSpec: length must be > 0");
  require(alpha_lin_per_m >= 0.0, "WaveguideSpec: linear loss must be >= 0");
  require(a_eff_m2 > 0.0, "WaveguideSpec: effective area must be > 0");
  require(alpha_tpa_per_w_m >= 0.0, "WaveguideSpec: TPA coefficient must be >= 0");
  require(std::isfinite(beta2_s2_per_m), "WaveguideSpec: beta2 must be finite");
  require(std::isfinite(n2_m2_per_w), "WaveguideSpec: n2 must be finite");
}

void ChannelSpec::validate() const {
  require(coupler_peak_db <= 0.0, "ChannelSpec: coupler transmission must be <= 0 dB");
  require(mono_loss_db <= 0.0, "ChannelSpec: monochromator loss must be <= 0 dB");
  require(fiber_loss_db <= 0.0, "ChannelSpec: fiber loss must be <= 0 dB");
  require(pump_rejection_db >= 100.0, "ChannelSpec: pump rejection must be >= 100 dB");
  require(coupler_center_m > 0.0, "ChannelSpec: coupler center must be > 0");
  require(coupler_bw3db_m > 0.0, "ChannelSpec: coupler bandwidth must be > 0");
  require(filter_center_m > 0.0, "ChannelSpec: filter center must be > 0");
  require(filter_width_m > 0.0, "ChannelSpec: filter width must be > 0");
}

void TimeGrid::validate() const {
  require(is_power_of_two(n) && n >= 256, "TimeGrid: n must be a power of two >= 256");
  require(std::isfinite(dt_s) && dt_s > 0.0, "TimeGrid: dt must be > 0");
}

TimeGrid grid_for_fwhm(double fwhm_s, std::size_t n, double span_fwhm) {
  require(fwhm_s > 0.0, "grid_for_fwhm: fwhm must be > 0");
  require(span_fwhm > 0.0, "grid_for_fwhm: span must be > 0");
  TimeGrid g;
  g.n = n;
  g.dt_s = span_fwhm * fwhm_s / static_cast<double>(n);
  g.validate();
  return g;
}

double SampledPulse::peak_power_w() const {
  double peak = 0.0;
  for (const auto& a : envelope) peak = std::max(peak, std::norm(a));
  return peak;
}

double SampledPulse::energy_j() const {
  double e = 0.0;
  for (const auto& a : envelope) e += std::norm(a);
  return e * grid.dt_s;
}

void SampledPulse::validate() const {
  grid.validate();
  require(envelope.size() == grid.n, "SampledPulse: envelope size must match grid");
  require(carrier_wavelength_m > 0.0, "SampledPulse: carrier wavelength must be > 0");
  require(rep_rate_hz > 0.0, "SampledPulse: repetition rate must be > 0");
  for (const auto& a : envelope) {
    require(std::isfinite(a.real()) && std::isfinite(a.imag()),
            "SampledPulse: envelope must be finite");
  }
}

SampledPulse sech_pulse(double peak_power_w, double fwhm_s, const TimeGrid& grid,
                        double carrier_wavelength_m, double rep_rate_hz) {
  require(peak_power_w >= 0.0, "sech_pulse: peak power must be >= 0");
  require(fwhm_s > 0.0, "sech_pulse: fwhm must be > 0");
  grid.validate();
  require(fwhm_s >= 8.0 * grid.dt_s, "sech_pulse: pulse under-resolved (need fwhm >= 8 dt)");

  SampledPulse p;
  p.carrier_wavelength_m = carrier_wavelength_m;
  p.rep_rate_hz = rep_rate_hz;
  p.grid = grid;
  p.envelope.resize(grid.n);
  const double tau = fwhm_s / kSechFwhmPerTau;
  const double amp = std::sqrt(peak_power_w);
  for (std::size_t i = 0; i < grid.n; ++i) {
    // |t| keeps the envelope exactly even on the symmetric grid.
    const double x = std::abs(grid.time_at(i)) / tau;
    p.envelope[i] = amp / std::cosh(x);
  }
  p.validate();
  return p;
}

double autocorrelation_fwhm_to_pulse_fwhm(double ac_fwhm_s) {
  require(std::isfinite(ac_fwhm_s) && ac_fwhm_s > 0.0,
          "autocorrelation_fwhm_to_pulse_fwhm: input must be > 0");
  return ac_fwhm_s / kSechAutocorrFactor;
}

}  // namespace mirpairs
