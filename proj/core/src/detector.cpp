#include "mirpairs/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mirpairs/fitters.hpp"

namespace mirpairs {
namespace detector {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void BiasCurveModel::validate() const {
  require(sde_max > 0.0 && sde_max <= 1.0, "BiasCurveModel: sde_max must be in (0, 1]");
  require(i_width_ua > 0.0, "BiasCurveModel: i_width must be > 0");
  require(i_dcr_ua > 0.0, "BiasCurveModel: i_dcr must be > 0");
  require(dcr0_hz >= 0.0 && bb_floor_hz >= 0.0, "BiasCurveModel: rates must be >= 0");
}

double sde_vs_bias(const BiasCurveModel& model, double bias_ua) {
  model.validate();
  require(bias_ua >= 0.0, "sde_vs_bias: bias must be >= 0");
  return model.sde_max / (1.0 + std::exp(-(bias_ua - model.i_half_ua) / model.i_width_ua));
}

double dcr_vs_bias(const BiasCurveModel& model, double bias_ua) {
  model.validate();
  require(bias_ua >= 0.0, "dcr_vs_bias: bias must be >= 0");
  return model.dcr0_hz * std::exp(bias_ua / model.i_dcr_ua) +
         model.bb_floor_hz * sde_vs_bias(model, bias_ua) / model.sde_max;
}

double discrimination_voltage_mv(DetectorId which, double bias_ua) {
  require(bias_ua >= 0.0 && bias_ua <= 12.0,
          "discrimination_voltage_mv: bias must be in [0, 12] uA");
  // 1 uV/nA == 1 mV/uA.
  return which == DetectorId::kA ? 7.46 * bias_ua + 15.0 : 10.84 * bias_ua + 20.0;
}

CalibrationFit calibration_fit(const std::vector<double>& flux_hz,
                               const std::vector<double>& counts_hz,
                               const std::vector<double>& counts_err_hz) {
  const std::size_t n = flux_hz.size();
  require(counts_hz.size() == n, "calibration_fit: size mismatch");
  require(counts_err_hz.empty() || counts_err_hz.size() == n,
          "calibration_fit: error vector size mismatch");
  require(n >= 3, "calibration_fit: need >= 3 points");
  for (double f : flux_hz) require(f >= 0.0, "calibration_fit: flux must be >= 0");

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double sigma = counts_err_hz.empty() ? std::sqrt(std::max(counts_hz[i], 1.0))
                                               : counts_err_hz[i];
    require(sigma > 0.0, "calibration_fit: errors must be > 0");
    w[i] = 1.0 / sigma;
  }

  CalibrationFit out;

  // Through-origin weighted slope: the SDE estimate.
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * w[i] * flux_hz[i] * flux_hz[i];
    sxy += w[i] * w[i] * flux_hz[i] * counts_hz[i];
  }
  require(sxx > 0.0, "calibration_fit: flux axis is degenerate");
  out.sde = sxy / sxx;
  out.sde_err = 1.0 / std::sqrt(sxx);

  // Free-intercept fit for the offset diagnostic.
  auto guess = fitters::initial_guess(fitters::ModelId::kLine, flux_hz, counts_hz);
  if (guess) {
    const auto line = fitters::least_squares(fitters::ModelId::kLine, flux_hz, counts_hz, w,
                                             *guess);
    out.intercept_hz = line.params[1];
    out.intercept_err_hz = line.param_errs[1];
  }

  // Saturation shows up as a significant negative quadratic term.
  auto qguess = fitters::initial_guess(fitters::ModelId::kQuadratic, flux_hz, counts_hz);
  if (qguess) {
    const auto q = fitters::least_squares(fitters::ModelId::kQuadratic, flux_hz, counts_hz, w,
                                          *qguess);
    if (q.converged && q.param_errs[0] > 0.0) {
      out.saturation_flag = std::abs(q.params[0]) > 3.0 * q.param_errs[0];
    }
  }
  return out;
}

SpectralSdeResult spectral_sde(const std::vector<SpectralSdePoint>& table, double wavelength_m,
                               std::size_t window) {
  require(table.size() >= 2, "spectral_sde: need >= 2 table points");
  require(window >= 1, "spectral_sde: window must be >= 1");
  for (std::size_t i = 1; i < table.size(); ++i) {
    require(table[i].wavelength_m > table[i - 1].wavelength_m,
            "spectral_sde: table must be sorted by wavelength");
  }
  require(wavelength_m >= table.front().wavelength_m &&
              wavelength_m <= table.back().wavelength_m,
          "spectral_sde: query outside the tabulated range (no extrapolation)");

  const std::size_t n = table.size();
  const std::size_t half = window / 2;

  // Centered moving average; the window shrinks symmetrically at the edges.
  auto smoothed = [&](std::size_t i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double mean = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) mean += table[k].sde;
    mean /= static_cast<double>(hi - lo + 1);
    double var = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
      var += (table[k].sde - mean) * (table[k].sde - mean);
    }
    const std::size_t m = hi - lo + 1;
    const double err = m > 1 ? std::sqrt(var / static_cast<double>(m - 1) /
                                         static_cast<double>(m))
                             : 0.0;
    return std::pair<double, double>(mean, err);
  };

  std::size_t j = 0;
  while (j + 1 < n && table[j + 1].wavelength_m < wavelength_m) ++j;
  if (j + 1 >= n) j = n - 2;

  const auto [y0, e0] = smoothed(j);
  const auto [y1, e1] = smoothed(j + 1);
  const double x0 = table[j].wavelength_m;
  const double x1 = table[j + 1].wavelength_m;
  const double f = (wavelength_m - x0) / (x1 - x0);

  SpectralSdeResult out;
  out.sde = y0 + f * (y1 - y0);
  out.sde_err = std::max(e0, e1);
  return out;
}

}  // namespace detector
}  // namespace mirpairs
