#include "mirpairs/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>

#include "mirpairs/fft.hpp"
#include "mirpairs/fitters.hpp"

namespace mirpairs {
namespace retrieval {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Standard 1-D unwrap: remove 2*pi jumps between neighbors.
std::vector<double> unwrap(const std::vector<double>& phase) {
  std::vector<double> out(phase.size());
  if (phase.empty()) return out;
  out[0] = phase[0];
  for (std::size_t i = 1; i < phase.size(); ++i) {
    double d = phase[i] - phase[i - 1];
    d -= 2.0 * M_PI * std::round(d / (2.0 * M_PI));
    out[i] = out[i - 1] + d;
  }
  return out;
}

}  // namespace

RetrievalResult gerchberg_saxton(const RetrievalProblem& problem) {
  const std::size_t n = problem.temporal_envelope.size();
  require(n >= 256 && (n & (n - 1)) == 0, "gerchberg_saxton: size must be a power of two >= 256");
  require(problem.spectrum_psd.size() == n, "gerchberg_saxton: grid size mismatch");
  require(problem.dt_s > 0.0, "gerchberg_saxton: dt must be > 0");
  require(problem.max_iterations >= 1, "gerchberg_saxton: need >= 1 iteration");
  for (double v : problem.spectrum_psd) {
    require(std::isfinite(v) && v >= 0.0, "gerchberg_saxton: PSD must be finite and >= 0");
  }
  double env_energy = 0.0;
  for (double v : problem.temporal_envelope) {
    require(std::isfinite(v) && v >= 0.0, "gerchberg_saxton: envelope must be finite and >= 0");
    env_energy += v * v;
  }
  require(env_energy > 0.0, "gerchberg_saxton: envelope is identically zero");

  RetrievalResult res;

  // Scale the spectral target so Parseval holds against the envelope
  // (sum |X|^2 = N sum |a|^2 for the unnormalized forward transform); flag
  // inputs whose energies disagree by more than 20% before scaling.
  const double psd_sum = std::accumulate(problem.spectrum_psd.begin(),
                                         problem.spectrum_psd.end(), 0.0);
  require(psd_sum > 0.0, "gerchberg_saxton: PSD is identically zero");
  const double target_sum = env_energy * static_cast<double>(n);
  res.energy_mismatch = std::abs(psd_sum - target_sum) > 0.2 * target_sum;
  const double scale = std::sqrt(target_sum / psd_sum);
  std::vector<double> target_mag(n);
  for (std::size_t k = 0; k < n; ++k) target_mag[k] = scale * std::sqrt(problem.spectrum_psd[k]);
  const double target_rms = rms(target_mag);

  // Zero initial phase.
  std::vector<std::complex<double>> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = problem.temporal_envelope[i];

  double prev_residual = -1.0;
  for (res.iterations = 0; res.iterations < problem.max_iterations; ++res.iterations) {
    fft_forward(a);
    double err = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double mag = std::abs(a[k]);
      err += (mag - target_mag[k]) * (mag - target_mag[k]);
      // Replace the spectral amplitude, keep the phase.
      a[k] = (mag > 0.0) ? a[k] * (target_mag[k] / mag) : std::complex<double>(target_mag[k], 0.0);
    }
    res.residual = std::sqrt(err / static_cast<double>(n)) / target_rms;
    fft_inverse(a);
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = std::abs(a[i]);
      a[i] = (mag > 0.0) ? a[i] * (problem.temporal_envelope[i] / mag)
                         : std::complex<double>(problem.temporal_envelope[i], 0.0);
    }
    if (prev_residual >= 0.0 &&
        std::abs(prev_residual - res.residual) < problem.tol * std::max(prev_residual, 1e-300)) {
      res.converged = true;
      ++res.iterations;
      break;
    }
    prev_residual = res.residual;
  }

  // Phase of the envelope-constrained field, unwrapped and referenced to the
  // envelope peak.
  std::vector<double> phase(n);
  for (std::size_t i = 0; i < n; ++i) phase[i] = std::arg(a[i]);
  phase = unwrap(phase);
  const std::size_t peak = static_cast<std::size_t>(std::distance(
      problem.temporal_envelope.begin(),
      std::max_element(problem.temporal_envelope.begin(), problem.temporal_envelope.end())));
  const double ref = phase[peak];
  for (double& p : phase) p -= ref;

  // Time-reversal ambiguity: the conjugate-reversed field has phase
  // -phase(reversed). Pick the branch whose envelope-weighted phase is
  // non-negative (SPM with positive n2 chirps that way).
  double corr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    corr += phase[i] * problem.temporal_envelope[i] * problem.temporal_envelope[i];
  }
  if (corr < 0.0) {
    std::vector<double> flipped(n);
    for (std::size_t i = 0; i < n; ++i) flipped[i] = -phase[n - 1 - i];
    phase = std::move(flipped);
    const std::size_t peak2 = n - 1 - peak;
    const double ref2 = phase[peak2];
    for (double& p : phase) p -= ref2;
  }
  res.temporal_phase_rad = std::move(phase);

  const auto fit = fit_sech_phase(res.temporal_phase_rad, problem.temporal_envelope,
                                  problem.dt_s);
  res.phi_nl_rad = fit.phi_nl_rad;
  res.phi_nl_err = fit.phi_nl_err;
  return res;
}

SechPhaseFit fit_sech_phase(const std::vector<double>& phase_rad,
                            const std::vector<double>& envelope, double dt_s) {
  require(phase_rad.size() == envelope.size() && !phase_rad.empty(),
          "fit_sech_phase: size mismatch");
  require(dt_s > 0.0, "fit_sech_phase: dt must be > 0");

  const double env_peak = *std::max_element(envelope.begin(), envelope.end());
  require(env_peak > 0.0, "fit_sech_phase: envelope is identically zero");
  const std::size_t n = envelope.size();

  // Restrict to samples with envelope > 5% of peak; time axis centered on the
  // peak sample.
  const std::size_t ipeak = static_cast<std::size_t>(
      std::distance(envelope.begin(), std::max_element(envelope.begin(), envelope.end())));
  std::vector<double> t, y;
  for (std::size_t i = 0; i < n; ++i) {
    if (envelope[i] > 0.05 * env_peak) {
      t.push_back((static_cast<double>(i) - static_cast<double>(ipeak)) * dt_s);
      y.push_back(phase_rad[i]);
    }
  }
  SechPhaseFit out;
  if (t.size() < 4) return out;

  // Width seeded from the envelope half-maximum; amplitude from the peak phase.
  auto env_guess = fitters::initial_guess(fitters::ModelId::kSech2,
                                          [&] {
                                            std::vector<double> tt(n);
                                            for (std::size_t i = 0; i < n; ++i) {
                                              tt[i] = (static_cast<double>(i) -
                                                       static_cast<double>(ipeak)) *
                                                      dt_s;
                                            }
                                            return tt;
                                          }(),
                                          [&] {
                                            std::vector<double> e2(n);
                                            for (std::size_t i = 0; i < n; ++i) {
                                              e2[i] = envelope[i] * envelope[i];
                                            }
                                            return e2;
                                          }());
  double tau_seed = env_guess ? (*env_guess)[2] : (t.back() - t.front()) / 4.0;
  std::vector<double> init = {phase_rad[ipeak], 0.0, tau_seed};
  if (init[0] == 0.0) init[0] = 1e-3;
  const auto fit = fitters::least_squares(fitters::ModelId::kSech2, t, y, {}, init);
  out.phi_nl_rad = fit.params[0];
  out.phi_nl_err = fit.param_errs[0];
  out.tau_s = std::abs(fit.params[2]);
  out.converged = fit.converged;
  return out;
}

N2Extraction extract_n2(const std::vector<double>& peak_powers_w,
                        const std::vector<double>& phi_nl_rad, const WaveguideSpec& wg,
                        double wavelength_m, const N2Options& opts) {
  wg.validate();
  require(peak_powers_w.size() == phi_nl_rad.size(), "extract_n2: size mismatch");
  require(peak_powers_w.size() >= 4, "extract_n2: need >= 4 points");
  require(wavelength_m > 0.0, "extract_n2: wavelength must be > 0");
  for (double p : peak_powers_w) require(p > 0.0, "extract_n2: powers must be > 0");

  N2Extraction out;
  const double l_eff = wg.effective_length();

  double slope, slope_err;
  if (opts.quadratic_correction) {
    // phi = s P + q P^2 (no constant term physically; keep c free as a
    // diagnostic but report the linear slope).
    auto guess = fitters::initial_guess(fitters::ModelId::kQuadratic, peak_powers_w, phi_nl_rad);
    require(guess.has_value(), "extract_n2: degenerate power axis");
    const auto fit = fitters::least_squares(fitters::ModelId::kQuadratic, peak_powers_w,
                                            phi_nl_rad, {}, *guess);
    slope = fit.params[1];
    slope_err = fit.param_errs[1];
  } else {
    // Proportional fit through the origin: slope = sum(x y) / sum(x^2).
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < peak_powers_w.size(); ++i) {
      sxx += peak_powers_w[i] * peak_powers_w[i];
      sxy += peak_powers_w[i] * phi_nl_rad[i];
    }
    slope = sxy / sxx;
    double ss = 0.0;
    for (std::size_t i = 0; i < peak_powers_w.size(); ++i) {
      const double r = phi_nl_rad[i] - slope * peak_powers_w[i];
      ss += r * r;
    }
    const double dof = static_cast<double>(peak_powers_w.size()) - 1.0;
    slope_err = std::sqrt(ss / dof / sxx);
  }

  out.gamma_per_w_m = slope / l_eff;
  out.gamma_err = slope_err / l_eff;
  out.n2_m2_per_w = out.gamma_per_w_m * wavelength_m * wg.a_eff_m2 / (2.0 * M_PI);
  out.n2_err = out.gamma_err * wavelength_m * wg.a_eff_m2 / (2.0 * M_PI);

  // TPA or carriers bend phi(P); flag significant quadratic curvature.
  auto qguess = fitters::initial_guess(fitters::ModelId::kQuadratic, peak_powers_w, phi_nl_rad);
  if (qguess) {
    const auto qfit = fitters::least_squares(fitters::ModelId::kQuadratic, peak_powers_w,
                                             phi_nl_rad, {}, *qguess);
    if (qfit.converged && qfit.param_errs[0] > 0.0) {
      out.curvature_sigma = std::abs(qfit.params[0]) / qfit.param_errs[0];
      out.curvature_flag = out.curvature_sigma > 3.0;
    }
  }
  return out;
}

}  // namespace retrieval
}  // namespace mirpairs
