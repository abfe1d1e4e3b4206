#include "mirpairs/nlse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mirpairs/fft.hpp"
#include "mirpairs/fitters.hpp"
#include "mirpairs/fwm.hpp"

namespace mirpairs {
namespace nlse {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

struct StepState {
  std::vector<double> phi_kerr;   // accumulated Kerr phase per sample
  std::vector<double> phi_fc;     // accumulated free-carrier phase per sample
  double carrier_peak = 0.0;
};

// One full propagation at a fixed step count; returns the output envelope.
std::vector<std::complex<double>> run_split_step(const SampledPulse& input,
                                                 const WaveguideSpec& wg, std::size_t steps,
                                                 const PropagateOptions& opts,
                                                 StepState& state) {
  const std::size_t n = input.n();
  const double dz = wg.length_m / static_cast<double>(steps);
  const double gamma =
      fwm::nonlinear_parameter(wg.n2_m2_per_w, wg.a_eff_m2, input.carrier_wavelength_m);
  const double a_tpa = wg.alpha_tpa_per_w_m;
  const double alpha = wg.alpha_lin_per_m;
  const double dt = input.grid.dt_s;

  // Angular frequency grid in FFT bin order (bin k > n/2 wraps negative).
  std::vector<double> omega(n);
  const double dw = 2.0 * M_PI / (static_cast<double>(n) * dt);
  for (std::size_t k = 0; k < n; ++k) {
    const double kk = (k <= n / 2) ? static_cast<double>(k)
                                   : static_cast<double>(k) - static_cast<double>(n);
    omega[k] = kk * dw;
  }

  // Linear operator over dz/2 and dz: loss plus dispersion phase
  // exp[(i beta2 omega^2 / 2 - alpha/2) dz].
  auto make_linear = [&](double step) {
    std::vector<std::complex<double>> op(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double phase = 0.5 * wg.beta2_s2_per_m * omega[k] * omega[k] * step;
      op[k] = std::polar(std::exp(-0.5 * alpha * step), phase);
    }
    return op;
  };
  const auto lin_half = make_linear(0.5 * dz);
  const auto lin_full = make_linear(dz);

  state.phi_kerr.assign(n, 0.0);
  state.phi_fc.assign(n, 0.0);
  state.carrier_peak = 0.0;
  const bool fc_on = opts.free_carrier.has_value() &&
                     (opts.free_carrier->sigma_fca_m2 != 0.0 ||
                      opts.free_carrier->fcd_coefficient_m3 != 0.0);
  const double omega0 = angular_frequency(input.carrier_wavelength_m);
  const double k0 = 2.0 * M_PI / input.carrier_wavelength_m;
  // dN/dt = alpha_TPA |A|^4 / (2 hbar omega A_eff^2).
  const double fc_gen =
      fc_on ? a_tpa / (2.0 * kPlanckReduced * omega0 * wg.a_eff_m2 * wg.a_eff_m2) : 0.0;

  std::vector<std::complex<double>> a(input.envelope);
  std::vector<double> carrier(fc_on ? n : 0, 0.0);

  // Kerr + TPA over one dz, closed form: with I = |A|^2,
  //   I(dz) = I / (1 + a_tpa I dz),  phi += (gamma/a_tpa) ln(1 + a_tpa I dz).
  auto nonlinear_step = [&](double step) {
    if (fc_on) std::fill(carrier.begin(), carrier.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double intensity = std::norm(a[i]);
      double amp_factor = 1.0;
      double phi = 0.0;
      if (a_tpa > 0.0) {
        const double q = 1.0 + a_tpa * intensity * step;
        amp_factor = 1.0 / std::sqrt(q);
        phi = gamma / a_tpa * std::log(q);
      } else {
        phi = gamma * intensity * step;
      }
      double fc_loss = 1.0;
      double fc_phi = 0.0;
      if (fc_on) {
        // Carriers build up across the pulse; forward Euler in t.
        if (i > 0) {
          carrier[i] = carrier[i - 1] + fc_gen * std::norm(a[i - 1]) * std::norm(a[i - 1]) * dt;
        }
        state.carrier_peak = std::max(state.carrier_peak, carrier[i]);
        fc_loss = std::exp(-0.5 * opts.free_carrier->sigma_fca_m2 * carrier[i] * step);
        fc_phi = -k0 * opts.free_carrier->fcd_coefficient_m3 * carrier[i] * step;
        state.phi_fc[i] += fc_phi;
      }
      state.phi_kerr[i] += phi;
      a[i] *= std::polar(amp_factor * fc_loss, phi + fc_phi);
    }
  };

  auto linear_step = [&](const std::vector<std::complex<double>>& op) {
    fft_forward(a);
    for (std::size_t k = 0; k < n; ++k) a[k] *= op[k];
    fft_inverse(a);
  };

  // Fused symmetric scheme: D(dz/2) [N(dz) D(dz)]^(steps-1) N(dz) D(dz/2).
  linear_step(lin_half);
  for (std::size_t s = 0; s + 1 < steps; ++s) {
    nonlinear_step(dz);
    linear_step(lin_full);
  }
  nonlinear_step(dz);
  linear_step(lin_half);
  return a;
}

double envelope_energy(const std::vector<std::complex<double>>& a, double dt) {
  double e = 0.0;
  for (const auto& v : a) e += std::norm(v);
  return e * dt;
}

}  // namespace

PropagationResult propagate(const SampledPulse& input, const WaveguideSpec& wg,
                            std::size_t steps, const PropagateOptions& opts) {
  input.validate();
  wg.validate();
  require(steps >= 64, "propagate: need at least 64 steps");
  const double e_in = input.energy_j();
  require(e_in > 0.0, "propagate: input pulse has zero energy");

  StepState state;
  PropagationResult res;
  res.output = input;
  res.output.envelope = run_split_step(input, wg, steps, opts, state);

  const double e_out = envelope_energy(res.output.envelope, input.grid.dt_s);
  const double linear_only = std::exp(-wg.alpha_lin_per_m * wg.length_m);
  res.transmission_eta = e_out / e_in / linear_only;
  res.phi_nl_max_rad = *std::max_element(state.phi_kerr.begin(), state.phi_kerr.end());
  double tot = 0.0;
  for (std::size_t i = 0; i < state.phi_kerr.size(); ++i) {
    tot = std::max(tot, state.phi_kerr[i] + state.phi_fc[i]);
  }
  res.phi_total_max_rad = tot;
  res.carrier_density_peak = state.carrier_peak;

  if (opts.check_convergence && steps >= 128) {
    StepState half_state;
    const auto half = run_split_step(input, wg, steps / 2, opts, half_state);
    const double e_half = envelope_energy(half, input.grid.dt_s);
    res.step_energy_rel_change = std::abs(e_out - e_half) / std::max(e_out, 1e-300);
    res.converged = res.step_energy_rel_change <= 1e-3;
  }
  return res;
}

PowerSweepResult power_sweep(const WaveguideSpec& wg, double fwhm_s, const TimeGrid& grid,
                             double carrier_wavelength_m, double rep_rate_hz,
                             const std::vector<double>& peak_powers_w, std::size_t steps,
                             const PropagateOptions& opts) {
  require(!peak_powers_w.empty(), "power_sweep: need at least one power");
  for (std::size_t i = 0; i + 1 < peak_powers_w.size(); ++i) {
    require(peak_powers_w[i] < peak_powers_w[i + 1], "power_sweep: powers must be ascending");
  }
  require(peak_powers_w.front() > 0.0, "power_sweep: powers must be > 0");

  PowerSweepResult out;
  double eta0 = 0.0;
  for (double p : peak_powers_w) {
    const auto pulse = sech_pulse(p, fwhm_s, grid, carrier_wavelength_m, rep_rate_hz);
    const auto res = propagate(pulse, wg, steps, opts);
    out.converged = out.converged && res.converged;
    if (eta0 == 0.0) eta0 = res.transmission_eta;
    SweepRow row;
    row.peak_power_w = p;
    row.eta = res.transmission_eta / eta0;
    row.phi_nl_rad = res.phi_nl_max_rad;
    out.rows.push_back(row);
    out.spectra.push_back(power_spectrum(res.output.envelope));
  }
  return out;
}

TpaFit inverse_transmission_fit(const std::vector<double>& peak_powers_w,
                                const std::vector<double>& transmissions,
                                const WaveguideSpec& wg) {
  wg.validate();
  require(peak_powers_w.size() == transmissions.size(),
          "inverse_transmission_fit: size mismatch");
  require(peak_powers_w.size() >= 5, "inverse_transmission_fit: need >= 5 points");
  require(peak_powers_w.back() >= 5.0 * peak_powers_w.front(),
          "inverse_transmission_fit: need >= 5x power span");

  // Renormalize to the lowest-power point so a global transmission scale
  // cancels; then check physical shape.
  const double t0 = transmissions.front();
  require(t0 > 0.0, "inverse_transmission_fit: transmissions must be > 0");
  std::vector<double> inv_eta(transmissions.size());
  for (std::size_t i = 0; i < transmissions.size(); ++i) {
    const double t = transmissions[i] / t0;
    require(t > 0.0, "inverse_transmission_fit: transmissions must be > 0");
    if (i > 0) {
      require(transmissions[i] <= transmissions[i - 1] * (1.0 + 1e-9),
              "inverse_transmission_fit: transmissions must not increase with power");
    }
    inv_eta[i] = 1.0 / t;
  }

  auto guess = fitters::initial_guess(fitters::ModelId::kLine, peak_powers_w, inv_eta);
  require(guess.has_value(), "inverse_transmission_fit: degenerate power axis");
  const auto fit = fitters::least_squares(fitters::ModelId::kLine, peak_powers_w, inv_eta, {},
                                          *guess);
  TpaFit out;
  out.slope_per_w = fit.params[0];
  out.slope_err = fit.param_errs[0];
  const double denom = wg.effective_length() * kSechTpaShapeFactor;
  out.alpha_tpa_per_w_m = out.slope_per_w / denom;
  out.alpha_tpa_err = out.slope_err / denom;
  return out;
}

}  // namespace nlse
}  // namespace mirpairs
