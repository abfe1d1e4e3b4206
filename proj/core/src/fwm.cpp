#include "mirpairs/fwm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mirpairs {
namespace fwm {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

}  // namespace

double nonlinear_parameter(double n2_m2_per_w, double a_eff_m2, double wavelength_m) {
  require(a_eff_m2 > 0.0, "nonlinear_parameter: A_eff must be > 0");
  require(wavelength_m > 0.0, "nonlinear_parameter: wavelength must be > 0");
  return 2.0 * M_PI / wavelength_m * n2_m2_per_w / a_eff_m2;
}

double tpa_bulk_to_waveguide(double beta_tpa_cm_per_gw, double a_eff_m2) {
  require(a_eff_m2 > 0.0, "tpa_bulk_to_waveguide: A_eff must be > 0");
  // cm/GW -> m/W: 1e-2 / 1e9.
  return beta_tpa_cm_per_gw * 1e-11 / a_eff_m2;
}

double tpa_waveguide_to_bulk(double alpha_tpa_per_w_m, double a_eff_m2) {
  require(a_eff_m2 > 0.0, "tpa_waveguide_to_bulk: A_eff must be > 0");
  return alpha_tpa_per_w_m * a_eff_m2 / 1e-11;
}

double linear_mismatch(double beta2_s2_per_m, double delta_omega_rad_s) {
  return -beta2_s2_per_m * delta_omega_rad_s * delta_omega_rad_s;
}

double total_mismatch(double beta2_s2_per_m, double delta_omega_rad_s, double gamma_per_w_m,
                      double peak_power_w) {
  require(peak_power_w >= 0.0, "total_mismatch: power must be >= 0");
  return linear_mismatch(beta2_s2_per_m, delta_omega_rad_s) - 2.0 * gamma_per_w_m * peak_power_w;
}

std::optional<double> perfect_match_detuning(double beta2_s2_per_m, double gamma_per_w_m,
                                             double peak_power_w) {
  require(peak_power_w >= 0.0, "perfect_match_detuning: power must be >= 0");
  require(gamma_per_w_m >= 0.0, "perfect_match_detuning: gamma must be >= 0");
  if (beta2_s2_per_m >= 0.0) return std::nullopt;  // broadband near-zero mismatch
  if (gamma_per_w_m * peak_power_w == 0.0) return 0.0;
  return std::sqrt(2.0 * gamma_per_w_m * peak_power_w / -beta2_s2_per_m);
}

double idler_frequency(double omega_pump_rad_s, double omega_signal_rad_s) {
  require(omega_pump_rad_s > 0.0 && omega_signal_rad_s > 0.0,
          "idler_frequency: frequencies must be > 0");
  const double omega_i = 2.0 * omega_pump_rad_s - omega_signal_rad_s;
  require(omega_i > 0.0, "idler_frequency: signal detuning exceeds the pump frequency");
  return omega_i;
}

double idler_wavelength(double lambda_pump_m, double lambda_signal_m) {
  return wavelength_from_angular(
      idler_frequency(angular_frequency(lambda_pump_m), angular_frequency(lambda_signal_m)));
}

double gain_rel(double dk_per_m, double length_m) {
  require(length_m > 0.0, "gain_rel: length must be > 0");
  const double s = sinc(0.5 * dk_per_m * length_m);
  return s * s;
}

double rayleigh_relative(double wavelength_m) {
  require(wavelength_m > 0.0, "rayleigh_relative: wavelength must be > 0");
  const double r = 1.55e-6 / wavelength_m;
  return r * r * r * r;
}

double coupler_transmission_db(const ChannelSpec& chan, double wavelength_m) {
  require(wavelength_m > 0.0, "coupler_transmission_db: wavelength must be > 0");
  const double half_bw = 0.5 * chan.coupler_bw3db_m;
  const double x = (wavelength_m - chan.coupler_center_m) / half_bw;
  return chan.coupler_peak_db - 3.0 * x * x;
}

std::vector<PhaseMatchPoint> phase_match_scan(const WaveguideSpec& wg, double gamma_per_w_m,
                                              double peak_power_w,
                                              const std::vector<double>& detunings_rad_s) {
  wg.validate();
  std::vector<PhaseMatchPoint> out;
  out.reserve(detunings_rad_s.size());
  for (double dw : detunings_rad_s) {
    PhaseMatchPoint p;
    p.delta_omega_rad_s = dw;
    p.dk_lin_per_m = linear_mismatch(wg.beta2_s2_per_m, dw);
    p.dk_total_per_m = total_mismatch(wg.beta2_s2_per_m, dw, gamma_per_w_m, peak_power_w);
    p.gain_rel = gain_rel(p.dk_total_per_m, wg.length_m);
    out.push_back(p);
  }
  return out;
}

FwmMap stimulated_fwm_map(const WaveguideSpec& wg, double pump_wavelength_m,
                          double gamma_per_w_m, double peak_power_w,
                          const std::vector<double>& seed_wavelengths_m,
                          const ChannelSpec& coupler, const FwmMapOptions& opts) {
  wg.validate();
  coupler.validate();
  require(pump_wavelength_m > 0.0, "stimulated_fwm_map: pump wavelength must be > 0");
  require(peak_power_w >= 0.0, "stimulated_fwm_map: power must be >= 0");
  require(!seed_wavelengths_m.empty(), "stimulated_fwm_map: need at least one seed");
  require(opts.spectrum_points >= 16, "stimulated_fwm_map: need >= 16 spectrum points");

  // All seeds strictly on one side of the pump (the idler lands on the other).
  bool any_below = false, any_above = false;
  for (double s : seed_wavelengths_m) {
    require(s > 0.0, "stimulated_fwm_map: seed wavelength must be > 0");
    require(s != pump_wavelength_m, "stimulated_fwm_map: degenerate seed equals the pump");
    (s < pump_wavelength_m ? any_below : any_above) = true;
  }
  require(!(any_below && any_above),
          "stimulated_fwm_map: seeds must all lie on one side of the pump");

  const double omega_p = angular_frequency(pump_wavelength_m);
  const double l_eff = wg.effective_length();

  FwmMap map;
  map.seed_wavelengths_m = seed_wavelengths_m;
  map.idler_wavelengths_m.reserve(seed_wavelengths_m.size());

  double axis_min = opts.spectrum_min_m;
  double axis_max = opts.spectrum_max_m;
  if (axis_min <= 0.0 || axis_max <= 0.0) {
    axis_min = pump_wavelength_m;
    axis_max = pump_wavelength_m;
    for (double s : seed_wavelengths_m) {
      const double i = idler_wavelength(pump_wavelength_m, s);
      axis_min = std::min({axis_min, s, i});
      axis_max = std::max({axis_max, s, i});
    }
    const double pad = 5.0 * opts.line_width_m + 0.02 * (axis_max - axis_min);
    axis_min -= pad;
    axis_max += pad;
  }
  require(axis_max > axis_min, "stimulated_fwm_map: empty spectrum axis");

  map.spectrum_wavelengths_m.resize(opts.spectrum_points);
  for (std::size_t i = 0; i < opts.spectrum_points; ++i) {
    map.spectrum_wavelengths_m[i] =
        axis_min + (axis_max - axis_min) * static_cast<double>(i) /
                       static_cast<double>(opts.spectrum_points - 1);
  }

  // Gaussian line rendered in linear PSD; width is the OSA resolution proxy.
  const double gauss_k = 4.0 * std::log(2.0) / (opts.line_width_m * opts.line_width_m);
  auto add_line = [&](std::vector<double>& row, double center_m, double amplitude) {
    if (amplitude <= 0.0) return;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const double d = map.spectrum_wavelengths_m[i] - center_m;
      row[i] += amplitude * std::exp(-gauss_k * d * d);
    }
  };

  for (double seed_m : seed_wavelengths_m) {
    const double omega_s = angular_frequency(seed_m);
    const double omega_i = idler_frequency(omega_p, omega_s);
    const double idler_m = wavelength_from_angular(omega_i);
    map.idler_wavelengths_m.push_back(idler_m);

    const double dw = std::abs(omega_s - omega_p);
    const double dk =
        total_mismatch(wg.beta2_s2_per_m, dw, gamma_per_w_m, peak_power_w);
    // Idler power relative to the transmitted seed: (gamma P L_eff)^2 sinc^2(dk L/2).
    const double gpl = gamma_per_w_m * peak_power_w * l_eff;
    const double conv = gpl * gpl * gain_rel(dk, wg.length_m);

    std::vector<double> row(opts.spectrum_points, 0.0);
    add_line(row, pump_wavelength_m,
             opts.pump_marker_rel * db_to_linear(coupler_transmission_db(coupler, pump_wavelength_m)));
    add_line(row, seed_m, db_to_linear(coupler_transmission_db(coupler, seed_m)));
    add_line(row, idler_m, conv * db_to_linear(coupler_transmission_db(coupler, idler_m)));

    const double peak = *std::max_element(row.begin(), row.end());
    if (peak > 0.0) {
      for (double& v : row) v /= peak;
    }
    map.rel_psd.push_back(std::move(row));
  }
  return map;
}

}  // namespace fwm
}  // namespace mirpairs
