#pragma once

#include <cstddef>
#include <vector>

#include "mirpairs/physmodel.hpp"

// Gerchberg-Saxton phase retrieval: recover the temporal phase of a pulse
// from its measured power spectrum and known temporal envelope, then reduce
// the retrieved phase to a nonlinear-phase amplitude and a Kerr index.

namespace mirpairs {
namespace retrieval {

struct RetrievalProblem {
  std::vector<double> spectrum_psd;       // |FFT|^2 target, FFT bin order
  std::vector<double> temporal_envelope;  // |a(t)| on the matching time grid
  double dt_s = 0.0;
  std::size_t max_iterations = 500;
  double tol = 1e-6;  // stop when the relative residual change drops below this
};

struct RetrievalResult {
  std::vector<double> temporal_phase_rad;  // unwrapped, zero at the envelope peak
  double phi_nl_rad = 0.0;                 // fitted sech^2 phase amplitude
  double phi_nl_err = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;  // final relative spectral-amplitude residual
  bool converged = false;
  bool energy_mismatch = false;  // envelope/spectrum energies differed by > 20%
};

// Alternating projections between the measured spectral amplitude and the
// known temporal envelope, starting from zero phase. The time-reversal
// ambiguity is resolved toward a positive phase bump at the envelope peak
// (the self-phase-modulation chirp sign for positive n2). Non-convergence is
// reported through the flags, not an exception.
RetrievalResult gerchberg_saxton(const RetrievalProblem& problem);

struct SechPhaseFit {
  double phi_nl_rad = 0.0;
  double phi_nl_err = 0.0;
  double tau_s = 0.0;
  bool converged = false;
};

// Least-squares fit of phi(t) = phi_nl * sech^2(t/tau) restricted to samples
// where the envelope exceeds 5% of its peak.
SechPhaseFit fit_sech_phase(const std::vector<double>& phase_rad,
                            const std::vector<double>& envelope, double dt_s);

struct N2Extraction {
  double gamma_per_w_m = 0.0;
  double gamma_err = 0.0;
  double n2_m2_per_w = 0.0;
  double n2_err = 0.0;
  double curvature_sigma = 0.0;  // quadratic-term significance (TPA/carrier bend)
  bool curvature_flag = false;   // true when |quadratic| > 3 sigma
};

struct N2Options {
  // When true, fits phi = s*P + q*P^2 and reports gamma from the linear term;
  // otherwise a pure proportional fit through the origin.
  bool quadratic_correction = false;
};

// Needs >= 4 (peak power, phi_nl) points from the low-TPA regime.
// gamma = slope / L_eff; n2 = gamma * lambda * A_eff / (2 pi).
N2Extraction extract_n2(const std::vector<double>& peak_powers_w,
                        const std::vector<double>& phi_nl_rad, const WaveguideSpec& wg,
                        double wavelength_m, const N2Options& opts = {});

}  // namespace retrieval
}  // namespace mirpairs
