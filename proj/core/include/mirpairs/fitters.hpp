#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

// Shared weighted nonlinear least-squares engine: damped Gauss-Newton
// (Levenberg-style multiplicative damping), analytic Jacobians, deterministic
// moment/DFT-based initial guesses. Every fitted quantity in the toolkit
// (Gaussian peaks, fringes, power laws, sech^2 phases) goes through here.

namespace mirpairs {
namespace fitters {

enum class ModelId {
  kLine,       // p = {slope, intercept}:            y = p0*x + p1
  kQuadratic,  // p = {a, b, c}:                     y = a*x^2 + b*x + c
  kGaussian,   // p = {amp, center, sigma, offset}:  y = amp*exp(-(x-c)^2/(2 s^2)) + offset
  kSech2,      // p = {amp, center, width}:          y = amp*sech^2((x-c)/w)
  kSinusoid,   // p = {offset, amp, freq, phase}:    y = o + a*cos(f*x + phi)
  kHarmonic2,  // p = {offset, cos_amp, sin_amp}:    y = o + c*cos(2x) + s*sin(2x)
};

std::size_t parameter_count(ModelId model);
double evaluate(ModelId model, const std::vector<double>& params, double x);

struct FitOptions {
  std::size_t max_iterations = 200;
  double tol_rel_chi2 = 1e-10;  // stop when the relative chi^2 change drops below this
};

struct FitResult {
  std::vector<double> params;
  std::vector<double> param_errs;  // 1-sigma from the local quadratic approximation
  double residual_rms = 0.0;       // sqrt(chi^2 / n) with the weights applied
  double chi2 = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::string message;
};

// Weighted fit; weights are 1/sigma_i. An empty weights vector means uniform
// weights, in which case parameter errors are scaled by the reduced chi^2.
// Singular or non-finite steps end with converged == false (never NaN params).
FitResult least_squares(ModelId model, const std::vector<double>& x,
                        const std::vector<double>& y, const std::vector<double>& weights,
                        const std::vector<double>& initial, const FitOptions& opts = {});

// Poisson count weights: 1/sqrt(max(y, 1)).
std::vector<double> poisson_weights(const std::vector<double>& y);

// Deterministic data-driven starting point (moments, half-max widths, DFT
// peak for the sinusoid frequency, normal equations for polynomials).
// Returns nullopt for degenerate inputs (too few points, zero span, ...).
std::optional<std::vector<double>> initial_guess(ModelId model, const std::vector<double>& x,
                                                 const std::vector<double>& y);

}  // namespace fitters
}  // namespace mirpairs
