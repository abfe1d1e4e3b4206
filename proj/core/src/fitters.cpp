#include "mirpairs/fitters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mirpairs {
namespace fitters {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void model_eval(ModelId model, const std::vector<double>& p, double x, double* y,
                std::vector<double>* grad) {
  switch (model) {
    case ModelId::kLine: {
      *y = p[0] * x + p[1];
      if (grad) *grad = {x, 1.0};
      return;
    }
    case ModelId::kQuadratic: {
      *y = (p[0] * x + p[1]) * x + p[2];
      if (grad) *grad = {x * x, x, 1.0};
      return;
    }
    case ModelId::kGaussian: {
      const double s = p[2];
      const double u = (x - p[1]) / s;
      const double e = std::exp(-0.5 * u * u);
      *y = p[0] * e + p[3];
      if (grad) *grad = {e, p[0] * e * u / s, p[0] * e * u * u / s, 1.0};
      return;
    }
    case ModelId::kSech2: {
      const double u = (x - p[1]) / p[2];
      const double sech = 1.0 / std::cosh(u);
      const double s2 = sech * sech;
      *y = p[0] * s2;
      if (grad) {
        const double d = 2.0 * p[0] * s2 * std::tanh(u) / p[2];
        *grad = {s2, d, d * u};
      }
      return;
    }
    case ModelId::kSinusoid: {
      const double arg = p[2] * x + p[3];
      *y = p[0] + p[1] * std::cos(arg);
      if (grad) *grad = {1.0, std::cos(arg), -p[1] * std::sin(arg) * x, -p[1] * std::sin(arg)};
      return;
    }
    case ModelId::kHarmonic2: {
      const double c = std::cos(2.0 * x);
      const double s = std::sin(2.0 * x);
      *y = p[0] + p[1] * c + p[2] * s;
      if (grad) *grad = {1.0, c, s};
      return;
    }
  }
  throw std::invalid_argument("fitters: unknown model");
}

// Solve A x = b for a small symmetric positive-definite system via Cholesky.
// Returns false if the factorization hits a non-positive pivot.
bool cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t n,
                    std::vector<double>* x) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (!(sum > 0.0) || !std::isfinite(sum)) return false;
        a[i * n + i] = std::sqrt(sum);
      } else {
        a[i * n + j] = sum / a[j * n + j];
      }
    }
  }
  // Forward then back substitution.
  for (std::size_t i = 0; i < n; ++i) {
    double sum = b[i];
    for (std::size_t k = 0; k < i; ++k) sum -= a[i * n + k] * b[k];
    b[i] = sum / a[i * n + i];
  }
  x->assign(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double sum = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) sum -= a[k * n + ii] * (*x)[k];
    (*x)[ii] = sum / a[ii * n + ii];
  }
  return true;
}

// Invert the symmetric positive-definite matrix column by column.
bool spd_inverse(const std::vector<double>& a, std::size_t n, std::vector<double>* inv) {
  inv->assign(n * n, 0.0);
  for (std::size_t col = 0; col < n; ++col) {
    std::vector<double> e(n, 0.0);
    e[col] = 1.0;
    std::vector<double> x;
    if (!cholesky_solve(a, e, n, &x)) return false;
    for (std::size_t row = 0; row < n; ++row) (*inv)[row * n + col] = x[row];
  }
  return true;
}

double chi_squared(ModelId model, const std::vector<double>& p, const std::vector<double>& x,
                   const std::vector<double>& y, const std::vector<double>& w) {
  double chi2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double f;
    model_eval(model, p, x[i], &f, nullptr);
    const double wi = w.empty() ? 1.0 : w[i];
    const double r = wi * (y[i] - f);
    chi2 += r * r;
  }
  return chi2;
}

}  // namespace

std::size_t parameter_count(ModelId model) {
  switch (model) {
    case ModelId::kLine: return 2;
    case ModelId::kQuadratic: return 3;
    case ModelId::kGaussian: return 4;
    case ModelId::kSech2: return 3;
    case ModelId::kSinusoid: return 4;
    case ModelId::kHarmonic2: return 3;
  }
  throw std::invalid_argument("fitters: unknown model");
}

double evaluate(ModelId model, const std::vector<double>& params, double x) {
  require(params.size() == parameter_count(model), "fitters::evaluate: wrong parameter count");
  double y;
  model_eval(model, params, x, &y, nullptr);
  return y;
}

std::vector<double> poisson_weights(const std::vector<double>& y) {
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) w[i] = 1.0 / std::sqrt(std::max(y[i], 1.0));
  return w;
}

FitResult least_squares(ModelId model, const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& weights, const std::vector<double>& initial,
                        const FitOptions& opts) {
  const std::size_t np = parameter_count(model);
  require(x.size() == y.size(), "fitters: x and y size mismatch");
  require(weights.empty() || weights.size() == x.size(), "fitters: weights size mismatch");
  require(initial.size() == np, "fitters: wrong initial parameter count");
  require(x.size() >= np, "fitters: need at least as many points as parameters");
  for (double v : initial) require(std::isfinite(v), "fitters: initial parameters must be finite");

  const std::size_t n = x.size();
  FitResult res;
  res.params = initial;
  res.param_errs.assign(np, 0.0);

  double chi2 = chi_squared(model, res.params, x, y, weights);
  if (!std::isfinite(chi2)) {
    res.message = "initial chi^2 not finite";
    return res;
  }

  double lambda = 1e-3;
  std::vector<double> grad(np), jtj(np * np), jtr(np), step;
  std::size_t iter = 0;
  bool converged = false;
  for (; iter < opts.max_iterations; ++iter) {
    // Build the normal equations J^T W J and J^T W r at the current point.
    std::fill(jtj.begin(), jtj.end(), 0.0);
    std::fill(jtr.begin(), jtr.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double f;
      model_eval(model, res.params, x[i], &f, &grad);
      const double wi = weights.empty() ? 1.0 : weights[i];
      const double w2 = wi * wi;
      const double r = y[i] - f;
      for (std::size_t a = 0; a < np; ++a) {
        jtr[a] += w2 * grad[a] * r;
        for (std::size_t b = 0; b <= a; ++b) jtj[a * np + b] += w2 * grad[a] * grad[b];
      }
    }
    for (std::size_t a = 0; a < np; ++a)
      for (std::size_t b = a + 1; b < np; ++b) jtj[a * np + b] = jtj[b * np + a];

    // Damped step; grow the damping until the step is accepted.
    bool accepted = false;
    for (int tries = 0; tries < 12; ++tries) {
      std::vector<double> damped = jtj;
      for (std::size_t a = 0; a < np; ++a) {
        const double d = jtj[a * np + a];
        damped[a * np + a] = d + lambda * (d > 0.0 ? d : 1.0);
      }
      if (!cholesky_solve(damped, jtr, np, &step)) {
        lambda *= 10.0;
        continue;
      }
      std::vector<double> trial(np);
      bool finite = true;
      for (std::size_t a = 0; a < np; ++a) {
        trial[a] = res.params[a] + step[a];
        finite = finite && std::isfinite(trial[a]);
      }
      const double chi2_new = finite ? chi_squared(model, trial, x, y, weights)
                                     : std::numeric_limits<double>::infinity();
      if (std::isfinite(chi2_new) && chi2_new <= chi2) {
        const double delta = chi2 - chi2_new;
        res.params = std::move(trial);
        chi2 = chi2_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (delta < opts.tol_rel_chi2 * std::max(chi2, 1e-300)) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No acceptable damped step: either at a (possibly flat) minimum or the
      // normal equations are singular. Treat a tiny gradient as converged.
      double gnorm = 0.0;
      for (double g : jtr) gnorm += g * g;
      converged = std::sqrt(gnorm) < 1e-12 * std::max(1.0, std::sqrt(chi2));
      if (!converged) res.message = "singular or non-improving normal equations";
      break;
    }
    if (converged) break;
  }

  res.chi2 = chi2;
  res.residual_rms = std::sqrt(chi2 / static_cast<double>(n));
  res.converged = converged;
  res.iterations = iter + 1;

  // Parameter errors from (J^T W J)^-1; uniform weights get the reduced-chi^2 scale.
  std::vector<double> cov;
  if (spd_inverse(jtj, np, &cov)) {
    double scale = 1.0;
    if (weights.empty() && n > np) scale = chi2 / static_cast<double>(n - np);
    for (std::size_t a = 0; a < np; ++a) {
      const double v = cov[a * np + a] * scale;
      res.param_errs[a] = v > 0.0 ? std::sqrt(v) : 0.0;
    }
  } else if (res.message.empty()) {
    res.message = "covariance not available (singular J^T W J)";
  }
  return res;
}

std::optional<std::vector<double>> initial_guess(ModelId model, const std::vector<double>& x,
                                                 const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < parameter_count(model)) return std::nullopt;
  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  if (!(*xmax_it > *xmin_it)) return std::nullopt;
  const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  const double ymin = *ymin_it, ymax = *ymax_it;

  switch (model) {
    case ModelId::kLine: {
      // Closed-form normal equations.
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
      }
      const double d = n * sxx - sx * sx;
      if (d == 0.0) return std::nullopt;
      const double slope = (n * sxy - sx * sy) / d;
      return std::vector<double>{slope, (sy - slope * sx) / n};
    }
    case ModelId::kQuadratic: {
      // Normal equations for [x^2, x, 1].
      double m[9] = {0}, v[3] = {0};
      for (std::size_t i = 0; i < n; ++i) {
        const double b[3] = {x[i] * x[i], x[i], 1.0};
        for (int a = 0; a < 3; ++a) {
          v[a] += b[a] * y[i];
          for (int c = 0; c < 3; ++c) m[a * 3 + c] += b[a] * b[c];
        }
      }
      std::vector<double> mm(m, m + 9), bv(v, v + 3), sol;
      if (!cholesky_solve(mm, bv, 3, &sol)) return std::nullopt;
      return sol;
    }
    case ModelId::kGaussian: {
      const double offset = ymin;
      const double amp = ymax - ymin;
      if (amp <= 0.0) return std::nullopt;
      double w = 0.0, m1 = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double yy = y[i] - offset;
        if (yy <= 0.0) continue;
        w += yy;
        m1 += yy * x[i];
      }
      if (w <= 0.0) return std::nullopt;
      m1 /= w;
      for (std::size_t i = 0; i < n; ++i) {
        const double yy = y[i] - offset;
        if (yy <= 0.0) continue;
        m2 += yy * (x[i] - m1) * (x[i] - m1);
      }
      double sigma = std::sqrt(m2 / w);
      if (!(sigma > 0.0)) sigma = (*xmax_it - *xmin_it) / static_cast<double>(n);
      return std::vector<double>{amp, m1, sigma, offset};
    }
    case ModelId::kSech2: {
      const std::size_t imax = static_cast<std::size_t>(
          std::distance(y.begin(), std::max_element(y.begin(), y.end())));
      const double amp = y[imax];
      if (!(amp > 0.0)) return std::nullopt;
      // Width from the half-maximum crossings: FWHM = kSechFwhmPerTau * w.
      const double half = 0.5 * amp;
      double lo = x[imax], hi = x[imax];
      for (std::size_t i = imax; i-- > 0;) {
        if (y[i] < half) break;
        lo = x[i];
      }
      for (std::size_t i = imax + 1; i < n; ++i) {
        if (y[i] < half) break;
        hi = x[i];
      }
      double width = (hi - lo) / 1.7627471740390861;
      if (!(width > 0.0)) width = (*xmax_it - *xmin_it) / 4.0;
      return std::vector<double>{amp, x[imax], width};
    }
    case ModelId::kSinusoid: {
      // Assumes near-uniform x spacing; frequency from the DFT peak of the
      // mean-subtracted samples.
      const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
      double var = 0.0;
      for (double yy : y) var += (yy - mean) * (yy - mean);
      var /= n;
      if (!(var > 0.0)) return std::nullopt;
      const double span = *xmax_it - *xmin_it;
      std::size_t kbest = 1;
      double pbest = -1.0;
      std::complex<double> cbest;
      for (std::size_t k = 1; k <= n / 2; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const double ph = 2.0 * M_PI * static_cast<double>(k) * static_cast<double>(i) /
                            static_cast<double>(n);
          acc += (y[i] - mean) * std::complex<double>(std::cos(ph), -std::sin(ph));
        }
        if (std::norm(acc) > pbest) {
          pbest = std::norm(acc);
          kbest = k;
          cbest = acc;
        }
      }
      const double freq = 2.0 * M_PI * static_cast<double>(kbest) * (n - 1) /
                          (static_cast<double>(n) * span);
      // Bin phase referenced back to x_min: y ~ cos(freq*(x - xmin) + arg).
      const double phase = std::arg(cbest) - freq * *xmin_it;
      return std::vector<double>{mean, std::sqrt(2.0 * var), freq, phase};
    }
    case ModelId::kHarmonic2: {
      return std::vector<double>{std::accumulate(y.begin(), y.end(), 0.0) / n, 0.0, 0.0};
    }
  }
  return std::nullopt;
}

}  // namespace fitters
}  // namespace mirpairs
