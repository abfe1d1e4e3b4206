#pragma once

#include <cstddef>
#include <vector>

// Superconducting nanowire detector models: bias-dependent efficiency and
// dark counts, discrimination-voltage settings, flux-sweep calibration and
// tabulated spectral efficiency.

namespace mirpairs {
namespace detector {

// Sigmoid efficiency plateau plus exponential dark-count growth with an
// additive black-body floor that scales with the efficiency.
struct BiasCurveModel {
  double sde_max = 0.0;      // plateau system detection efficiency (0..1]
  double i_half_ua = 0.0;    // bias at half plateau
  double i_width_ua = 0.0;   // sigmoid width
  double dcr0_hz = 0.0;      // intrinsic dark rate prefactor
  double i_dcr_ua = 0.0;     // dark-rate exponential scale
  double bb_floor_hz = 0.0;  // black-body rate at full efficiency

  void validate() const;  // throws std::invalid_argument
};

// sde(i) = sde_max / (1 + exp(-(i - i_half)/i_width)).
double sde_vs_bias(const BiasCurveModel& model, double bias_ua);

// dcr(i) = dcr0 * exp(i/i_dcr) + bb_floor * sde(i)/sde_max.
double dcr_vs_bias(const BiasCurveModel& model, double bias_ua);

enum class DetectorId { kA, kB };

// Linear discrimination setting (mV) for bias in [0, 12] uA:
// channel A: 7.46 uV/nA * i + 15 mV; channel B: 10.84 uV/nA * i + 20 mV.
double discrimination_voltage_mv(DetectorId which, double bias_ua);

struct CalibrationFit {
  double sde = 0.0;           // slope of counts vs photon flux
  double sde_err = 0.0;
  double intercept_hz = 0.0;  // diagnostic intercept of the free fit
  double intercept_err_hz = 0.0;
  bool saturation_flag = false;  // nonlinearity detected (> 3 sigma quadratic)
};

// Weighted linear fit of detected rate against incident photon flux. The
// reported SDE is the through-origin slope; the free-intercept fit supplies
// the intercept diagnostic. counts_err empty -> Poisson-style sqrt weights.
CalibrationFit calibration_fit(const std::vector<double>& flux_hz,
                               const std::vector<double>& counts_hz,
                               const std::vector<double>& counts_err_hz = {});

struct SpectralSdePoint {
  double wavelength_m = 0.0;
  double sde = 0.0;
};

struct SpectralSdeResult {
  double sde = 0.0;
  double sde_err = 0.0;  // scatter within the smoothing window
};

// Moving-average smoothed (default 5 points) lookup with linear
// interpolation between smoothed samples. Queries outside the tabulated
// range throw (no extrapolation).
SpectralSdeResult spectral_sde(const std::vector<SpectralSdePoint>& table,
                               double wavelength_m, std::size_t window = 5);

}  // namespace detector
}  // namespace mirpairs
