#pragma once

#include <complex>
#include <vector>

// Thin deterministic wrapper around FFTW3 (complex-to-complex, power-of-two
// sizes). Plans use FFTW_ESTIMATE so results do not depend on runtime
// measurements; plan creation is serialized internally (the FFTW planner is
// not thread-safe), execution is re-entrant.

namespace mirpairs {

// In-place unnormalized forward DFT: X[k] = sum_n x[n] exp(-2*pi*i*k*n/N).
void fft_forward(std::vector<std::complex<double>>& data);

// In-place inverse DFT with 1/N normalization (fft_inverse(fft_forward(x)) == x).
void fft_inverse(std::vector<std::complex<double>>& data);

// |FFT(envelope)|^2 per bin (unnormalized forward transform).
std::vector<double> power_spectrum(const std::vector<std::complex<double>>& envelope);

}  // namespace mirpairs
