#pragma once

#include <complex>
#include <cstddef>
#include <vector>

// Shared physical types and unit conversions used by every other module.
// Internal unit policy: SI base units (m, s, W, rad/s) everywhere; dB and
// "per cm" style quantities are converted at the edges.

namespace mirpairs {

inline constexpr double kSpeedOfLight = 299792458.0;       // m/s
inline constexpr double kPlanckReduced = 1.054571817e-34;  // J s

// FWHM of sech^2(t/tau) in units of tau: 2*ln(1+sqrt(2)).
inline constexpr double kSechFwhmPerTau = 1.7627471740390861;
// FWHM ratio between the intensity autocorrelation of a sech^2 pulse and the
// pulse itself (deconvolution factor).
inline constexpr double kSechAutocorrFactor = 1.5427;

// dB -> linear power fraction. db_to_linear(-7.3) ~ 0.186.
double db_to_linear(double db);
// Linear power fraction -> dB. Requires fraction > 0.
double linear_to_db(double fraction);

// Vacuum wavelength (m) -> angular frequency (rad/s). Requires wavelength > 0.
double angular_frequency(double wavelength_m);
// Angular frequency (rad/s) -> vacuum wavelength (m). Requires omega > 0.
double wavelength_from_angular(double omega_rad_s);

// Propagation loss given in dB/cm -> field-intensity loss coefficient (1/m).
double alpha_from_db_per_cm(double db_per_cm);

// Waveguide cross-section, length and material response.
struct WaveguideSpec {
  double width_nm = 510.0;          // top width
  double height_nm = 340.0;         // film thickness
  double sidewall_angle_deg = 15.0; // from vertical
  double length_m = 0.0;            // propagation length L
  double alpha_lin_per_m = 0.0;     // linear loss (1/m)
  double beta2_s2_per_m = 0.0;      // group-velocity dispersion (s^2/m)
  double a_eff_m2 = 0.0;            // effective mode area
  double n2_m2_per_w = 0.0;         // Kerr index
  double alpha_tpa_per_w_m = 0.0;   // waveguide two-photon absorption (1/(W m))

  // L_eff = (1 - exp(-alpha L)) / alpha; limit L as alpha -> 0.
  double effective_length() const;
  void validate() const;  // throws std::invalid_argument
};

// One collection arm: chip coupler, band filter, monochromators, patch fiber.
struct ChannelSpec {
  double coupler_peak_db = 0.0;   // peak transmission, dB (<= 0)
  double coupler_center_m = 0.0;  // wavelength of peak transmission
  double coupler_bw3db_m = 60e-9; // full width of the -3 dB band
  double mono_loss_db = 0.0;      // per-monochromator insertion, dB (<= 0); applied twice
  double filter_center_m = 0.0;   // selected band center
  double filter_width_m = 1e-9;   // selected band width
  double pump_rejection_db = 100.0; // total pump suppression, dB (>= 100)
  double fiber_loss_db = 0.0;     // patch fiber, dB (<= 0)

  void validate() const;  // throws std::invalid_argument
};

// Uniform symmetric time grid; sample i sits at t = (i - n/2) * dt.
struct TimeGrid {
  std::size_t n = 4096;  // power of two, >= 256
  double dt_s = 0.0;

  double time_at(std::size_t i) const { return (static_cast<double>(i) - 0.5 * static_cast<double>(n)) * dt_s; }
  double span_s() const { return static_cast<double>(n) * dt_s; }
  void validate() const;  // throws std::invalid_argument
};

// Grid sized so the window spans `span_fwhm` pulse widths (default 32).
TimeGrid grid_for_fwhm(double fwhm_s, std::size_t n = 4096, double span_fwhm = 32.0);

// Complex envelope sampled on a TimeGrid; |a|^2 is instantaneous power (W).
struct SampledPulse {
  double carrier_wavelength_m = 0.0;
  double rep_rate_hz = 0.0;
  TimeGrid grid;
  std::vector<std::complex<double>> envelope;  // sqrt(W), size grid.n

  std::size_t n() const { return envelope.size(); }
  double peak_power_w() const;  // max |a|^2
  double energy_j() const;      // sum |a|^2 dt
  void validate() const;        // throws std::invalid_argument
};

// sech envelope with the given peak power and intensity FWHM.
// peak_power_w == 0 yields an all-zero envelope.
SampledPulse sech_pulse(double peak_power_w, double fwhm_s, const TimeGrid& grid,
                        double carrier_wavelength_m, double rep_rate_hz);

// Intensity-autocorrelation FWHM -> pulse FWHM for sech^2 pulses.
double autocorrelation_fwhm_to_pulse_fwhm(double ac_fwhm_s);

}  // namespace mirpairs
