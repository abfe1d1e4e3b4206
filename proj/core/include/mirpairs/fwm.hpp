#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mirpairs/physmodel.hpp"

// Degenerate-pump four-wave mixing: nonlinear parameter, phase mismatch,
// conversion efficiency and the stimulated seed/idler spectral map.

namespace mirpairs {
namespace fwm {

// gamma = (2*pi/lambda) * n2 / A_eff  (1/(W m)).
double nonlinear_parameter(double n2_m2_per_w, double a_eff_m2, double wavelength_m);

// Bulk beta_TPA in cm/GW -> waveguide alpha_TPA in 1/(W m): beta/A_eff.
double tpa_bulk_to_waveguide(double beta_tpa_cm_per_gw, double a_eff_m2);
// Inverse conversion.
double tpa_waveguide_to_bulk(double alpha_tpa_per_w_m, double a_eff_m2);

// Dispersive mismatch -beta2 * dw^2 for signal/idler detuned +-dw from the pump.
double linear_mismatch(double beta2_s2_per_m, double delta_omega_rad_s);

// Total mismatch including the self-phase term: dk_lin - 2*gamma*P.
double total_mismatch(double beta2_s2_per_m, double delta_omega_rad_s,
                      double gamma_per_w_m, double peak_power_w);

// Detuning where total mismatch vanishes: sqrt(2*gamma*P/|beta2|) for
// anomalous beta2 < 0 and P > 0. Normal or zero dispersion has no finite
// solution (mismatch stays near zero broadband): returns nullopt.
std::optional<double> perfect_match_detuning(double beta2_s2_per_m, double gamma_per_w_m,
                                             double peak_power_w);

// Energy conservation: omega_i = 2*omega_p - omega_s (rad/s).
double idler_frequency(double omega_pump_rad_s, double omega_signal_rad_s);
// Same relation on vacuum wavelengths.
double idler_wavelength(double lambda_pump_m, double lambda_signal_m);

// Parametric gain envelope sinc^2(dk L / 2), in [0, 1].
double gain_rel(double dk_per_m, double length_m);

// Rayleigh scattering strength relative to 1.55 um: (1.55 um / lambda)^4.
double rayleigh_relative(double wavelength_m);

// Coupler transmission in dB at a wavelength; Gaussian-in-dB envelope
// peak_dB - 3 * ((lambda - center) / (bw3dB/2))^2.
double coupler_transmission_db(const ChannelSpec& chan, double wavelength_m);

// One row of the phase-matching table.
struct PhaseMatchPoint {
  double delta_omega_rad_s = 0.0;
  double dk_lin_per_m = 0.0;
  double dk_total_per_m = 0.0;
  double gain_rel = 0.0;  // sinc^2(dk_total L / 2)
};

// Mismatch and gain over a detuning scan.
std::vector<PhaseMatchPoint> phase_match_scan(const WaveguideSpec& wg, double gamma_per_w_m,
                                              double peak_power_w,
                                              const std::vector<double>& detunings_rad_s);

// Stimulated-FWM spectra: one row per seed wavelength, columns on a common
// wavelength axis. Values are per-row max-normalized PSD (linear scale).
struct FwmMap {
  std::vector<double> seed_wavelengths_m;      // rows
  std::vector<double> spectrum_wavelengths_m;  // columns
  std::vector<std::vector<double>> rel_psd;    // [row][col], max 1 per row
  std::vector<double> idler_wavelengths_m;     // predicted idler position per row
};

struct FwmMapOptions {
  double spectrum_min_m = 0.0;      // axis start; 0 -> auto from seeds/idlers
  double spectrum_max_m = 0.0;      // axis end; 0 -> auto
  std::size_t spectrum_points = 1024;
  double line_width_m = 1e-9;       // FWHM of each rendered spectral line
  double pump_marker_rel = 1.0;     // pump line amplitude relative to the seed
};

// Seeds must all lie strictly on one side of the pump wavelength.
FwmMap stimulated_fwm_map(const WaveguideSpec& wg, double pump_wavelength_m,
                          double gamma_per_w_m, double peak_power_w,
                          const std::vector<double>& seed_wavelengths_m,
                          const ChannelSpec& coupler, const FwmMapOptions& opts = {});

}  // namespace fwm
}  // namespace mirpairs
