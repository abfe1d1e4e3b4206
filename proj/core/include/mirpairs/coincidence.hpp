#pragma once

#include <cstdint>
#include <vector>

#include "mirpairs/pairsource.hpp"

// Cross-correlation analysis of two-channel time-tag streams: delay
// histograms, Gaussian peak width, coincidences-to-accidentals ratio (CAR)
// against pulse-period side peaks, and the quadratic power-scan fit that
// recovers the source brightness without knowing the arm efficiencies.

namespace mirpairs {
namespace coincidence {

struct HistogramOptions {
  double bin_ps = 4.0;
  double half_span_ps = 0.0;  // histogram covers [-half_span, +half_span]
};

struct Histogram {
  double bin_ps = 0.0;
  std::vector<double> delay_ps;       // bin centers, odd count, symmetric about 0
  std::vector<std::uint64_t> counts;  // pairs with delay = t_B - t_A in the bin
};

// All A-B tag pairs within the span, two-pointer over the sorted stream.
Histogram build_histogram(const pairsource::TagStream& stream, const HistogramOptions& opts);

struct PeakFit {
  double center_ps = 0.0;
  double sigma_ps = 0.0;
  double fwhm_ps = 0.0;
  double fwhm_err_ps = 0.0;
  double amplitude = 0.0;  // counts per bin above the floor
  double baseline = 0.0;
  bool rebinned = false;  // low-count histograms are rebinned 4x before fitting
  bool converged = false;
};

// Gaussian-plus-floor fit of the central peak within +/-fit_half_span_ps.
PeakFit fit_peak(const Histogram& hist, double fit_half_span_ps);

struct CarOptions {
  double window_ps = 389.0;    // coincidence window, centered on each peak
  double period_ps = 0.0;      // pulse period; side peaks at +/-k*period
  int side_peaks = 6;          // windows split evenly over both sides
};

struct CarResult {
  std::uint64_t center_counts = 0;
  double side_mean_counts = 0.0;  // per side window
  int side_windows_used = 0;
  double car = 0.0;
  double car_err = 0.0;
  bool infinite = false;  // no accidentals observed; car is a lower bound
};

CarResult car_from_histogram(const Histogram& hist, const CarOptions& opts);

// One row of the rate-vs-power summary. pair_rate_hz undoes the 1/4
// probabilistic routing of the splitter (signal to A and idler to B), so for
// an ideal lossless bus it is exactly four times the net rate.
struct CarCurveRow {
  double peak_power_w = 0.0;
  double car = 0.0;
  double car_err = 0.0;
  double raw_hz = 0.0;  // center-window coincidence rate
  double net_hz = 0.0;  // raw minus mean accidentals
  double net_err_hz = 0.0;
  double pair_rate_hz = 0.0;  // 4 * net_hz
};

CarCurveRow make_curve_row(const CarResult& car, double peak_power_w, double duration_s);

struct PowerScanPoint {
  double peak_power_w = 0.0;
  double singles_a_hz = 0.0;
  double singles_a_err_hz = 0.0;
  double singles_b_hz = 0.0;
  double singles_b_err_hz = 0.0;
  double net_hz = 0.0;
  double net_err_hz = 0.0;
};

struct PairScanFit {
  double xi_per_w2 = 0.0;  // pairs per pulse per W^2
  double xi_err = 0.0;
  double quad_a = 0.0;  // quadratic singles coefficient, arm A [Hz/W^2]
  double quad_a_err = 0.0;
  double quad_b = 0.0;
  double quad_b_err = 0.0;
  double net_c2 = 0.0;  // net coincidences [Hz/W^2]
  double net_c2_err = 0.0;
  bool converged = false;
};

// Singles fit S(P) = d + b1 P + a P^2 per arm; net coincidences fit c2 P^2.
// Brightness follows from xi = quad_a * quad_b * capture / (rep * c2): the
// unknown arm efficiencies cancel between the three coefficients.
PairScanFit power_scan_fit(const std::vector<PowerScanPoint>& points, double rep_rate_hz,
                           double window_capture = 1.0);

}  // namespace coincidence
}  // namespace mirpairs
