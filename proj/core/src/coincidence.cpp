#include "mirpairs/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mirpairs/fitters.hpp"

namespace mirpairs {
namespace coincidence {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("coincidence: " + msg);
}

constexpr double kFwhmPerSigma = 2.3548200450309493;

}  // namespace

Histogram build_histogram(const pairsource::TagStream& stream, const HistogramOptions& opts) {
  require(std::isfinite(opts.bin_ps) && opts.bin_ps >= 1.0, "bin width must be >= 1 ps");
  require(std::isfinite(opts.half_span_ps) && opts.half_span_ps >= opts.bin_ps,
          "half span must cover at least one bin");

  const std::int64_t n_half = static_cast<std::int64_t>(opts.half_span_ps / opts.bin_ps);
  const std::size_t n_bins = static_cast<std::size_t>(2 * n_half + 1);
  const double d_max = (static_cast<double>(n_half) + 0.5) * opts.bin_ps;

  Histogram hist;
  hist.bin_ps = opts.bin_ps;
  hist.delay_ps.resize(n_bins);
  hist.counts.assign(n_bins, 0);
  for (std::size_t i = 0; i < n_bins; ++i)
    hist.delay_ps[i] = (static_cast<double>(i) - static_cast<double>(n_half)) * opts.bin_ps;

  std::vector<std::int64_t> t_a, t_b;
  for (const pairsource::TimeTag& tag : stream.tags)
    (tag.channel == 0 ? t_a : t_b).push_back(tag.t_ps);

  // Tags are time-sorted, so the matching B range slides monotonically.
  std::size_t lo = 0;
  for (const std::int64_t ta : t_a) {
    const double t_min = static_cast<double>(ta) - d_max;
    const double t_max = static_cast<double>(ta) + d_max;
    while (lo < t_b.size() && static_cast<double>(t_b[lo]) < t_min) ++lo;
    for (std::size_t j = lo; j < t_b.size() && static_cast<double>(t_b[j]) <= t_max; ++j) {
      const double delay = static_cast<double>(t_b[j] - ta);
      const std::int64_t offset = std::llround(delay / opts.bin_ps);
      if (offset < -n_half || offset > n_half) continue;
      ++hist.counts[static_cast<std::size_t>(offset + n_half)];
    }
  }
  return hist;
}

PeakFit fit_peak(const Histogram& hist, double fit_half_span_ps) {
  require(std::isfinite(fit_half_span_ps) && fit_half_span_ps >= 4.0 * hist.bin_ps,
          "fit span must cover several bins");

  std::vector<double> x, y;
  for (std::size_t i = 0; i < hist.delay_ps.size(); ++i) {
    if (std::abs(hist.delay_ps[i]) <= fit_half_span_ps) {
      x.push_back(hist.delay_ps[i]);
      y.push_back(static_cast<double>(hist.counts[i]));
    }
  }

  PeakFit peak;
  if (x.size() < 8) return peak;

  const double y_max = *std::max_element(y.begin(), y.end());
  if (y_max < 20.0 && x.size() >= 32) {
    // Merge groups of four bins so the Poisson weights stay meaningful.
    std::vector<double> xr, yr;
    for (std::size_t i = 0; i + 4 <= x.size(); i += 4) {
      xr.push_back(0.25 * (x[i] + x[i + 1] + x[i + 2] + x[i + 3]));
      yr.push_back(y[i] + y[i + 1] + y[i + 2] + y[i + 3]);
    }
    x.swap(xr);
    y.swap(yr);
    peak.rebinned = true;
  }

  const auto guess = fitters::initial_guess(fitters::ModelId::kGaussian, x, y);
  if (!guess) return peak;
  const auto fit = fitters::least_squares(fitters::ModelId::kGaussian, x, y,
                                          fitters::poisson_weights(y), *guess);
  if (fit.params.size() != 4) return peak;
  peak.amplitude = fit.params[0];
  peak.center_ps = fit.params[1];
  peak.sigma_ps = std::abs(fit.params[2]);
  peak.baseline = fit.params[3];
  peak.fwhm_ps = kFwhmPerSigma * peak.sigma_ps;
  peak.fwhm_err_ps = kFwhmPerSigma * fit.param_errs[2];
  peak.converged = fit.converged && peak.sigma_ps > 0.0;
  return peak;
}

CarResult car_from_histogram(const Histogram& hist, const CarOptions& opts) {
  require(std::isfinite(opts.window_ps) && opts.window_ps >= hist.bin_ps,
          "window must cover at least one bin");
  require(std::isfinite(opts.period_ps) && opts.period_ps > opts.window_ps,
          "period must exceed the window");
  require(opts.side_peaks >= 2 && opts.side_peaks % 2 == 0,
          "need an even side-peak count of at least 2");

  const double half_w = 0.5 * opts.window_ps;
  const double reach = std::abs(hist.delay_ps.back());

  const auto window_sum = [&](double center) {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < hist.delay_ps.size(); ++i)
      if (std::abs(hist.delay_ps[i] - center) <= half_w) sum += hist.counts[i];
    return sum;
  };

  CarResult res;
  res.center_counts = window_sum(0.0);
  std::uint64_t side_total = 0;
  for (int k = 1; k <= opts.side_peaks / 2; ++k) {
    const double center = static_cast<double>(k) * opts.period_ps;
    if (center + half_w > reach) break;
    side_total += window_sum(center);
    side_total += window_sum(-center);
    res.side_windows_used += 2;
  }
  require(res.side_windows_used >= 2, "histogram span too short for any side peak");

  res.side_mean_counts = static_cast<double>(side_total) / res.side_windows_used;
  if (side_total == 0) {
    res.infinite = true;
    res.car = std::numeric_limits<double>::infinity();
    res.car_err = 0.0;
    return res;
  }
  res.car = static_cast<double>(res.center_counts) / res.side_mean_counts;
  if (res.center_counts > 0) {
    const double rel2 = 1.0 / static_cast<double>(res.center_counts) +
                        1.0 / static_cast<double>(side_total);
    res.car_err = res.car * std::sqrt(rel2);
  }
  return res;
}

CarCurveRow make_curve_row(const CarResult& car, double peak_power_w, double duration_s) {
  require(std::isfinite(duration_s) && duration_s > 0.0, "duration must be positive");
  CarCurveRow row;
  row.peak_power_w = peak_power_w;
  row.car = car.car;
  row.car_err = car.car_err;
  row.raw_hz = static_cast<double>(car.center_counts) / duration_s;
  row.net_hz = (static_cast<double>(car.center_counts) - car.side_mean_counts) / duration_s;
  const double side_total = car.side_mean_counts * car.side_windows_used;
  const double var_counts = static_cast<double>(car.center_counts) +
                            side_total / (static_cast<double>(car.side_windows_used) *
                                          car.side_windows_used);
  row.net_err_hz = std::sqrt(std::max(var_counts, 0.0)) / duration_s;
  row.pair_rate_hz = 4.0 * row.net_hz;
  return row;
}

PairScanFit power_scan_fit(const std::vector<PowerScanPoint>& points, double rep_rate_hz,
                           double window_capture) {
  require(points.size() >= 4, "need at least four power points");
  require(std::isfinite(rep_rate_hz) && rep_rate_hz > 0.0, "rep rate must be positive");
  require(std::isfinite(window_capture) && window_capture > 0.0 && window_capture <= 1.0,
          "window capture must lie in (0, 1]");

  std::vector<double> p, sa, sb, wa, wb;
  for (const PowerScanPoint& pt : points) {
    require(std::isfinite(pt.peak_power_w) && pt.peak_power_w > 0.0, "powers must be positive");
    p.push_back(pt.peak_power_w);
    sa.push_back(pt.singles_a_hz);
    sb.push_back(pt.singles_b_hz);
    wa.push_back(pt.singles_a_err_hz > 0.0 ? 1.0 / pt.singles_a_err_hz : 1.0);
    wb.push_back(pt.singles_b_err_hz > 0.0 ? 1.0 / pt.singles_b_err_hz : 1.0);
  }

  PairScanFit out;
  const auto fit_singles = [&](const std::vector<double>& y, const std::vector<double>& w,
                               double& quad, double& err) {
    const auto guess = fitters::initial_guess(fitters::ModelId::kQuadratic, p, y);
    if (!guess) return false;
    const auto fit = fitters::least_squares(fitters::ModelId::kQuadratic, p, y, w, *guess);
    if (!fit.converged) return false;
    quad = fit.params[0];
    err = fit.param_errs[0];
    return true;
  };

  // Net coincidences are quadratic through the origin: c2 = sum w^2 z y / sum w^2 z^2
  // with z = P^2 (weighted linear regression in one coefficient).
  double num = 0.0, den = 0.0;
  for (const PowerScanPoint& pt : points) {
    const double z = pt.peak_power_w * pt.peak_power_w;
    const double w = pt.net_err_hz > 0.0 ? 1.0 / pt.net_err_hz : 1.0;
    num += w * w * z * pt.net_hz;
    den += w * w * z * z;
  }
  if (den <= 0.0) return out;
  out.net_c2 = num / den;
  out.net_c2_err = 1.0 / std::sqrt(den);

  if (!fit_singles(sa, wa, out.quad_a, out.quad_a_err)) return out;
  if (!fit_singles(sb, wb, out.quad_b, out.quad_b_err)) return out;
  if (out.net_c2 <= 0.0 || out.quad_a <= 0.0 || out.quad_b <= 0.0) return out;

  // S_A = d + b1 P + (rep xi eta_A/2) P^2 and net = rep xi (eta_A/2)(eta_B/2)
  // capture P^2, so the efficiencies cancel in quad_a*quad_b/net_c2.
  out.xi_per_w2 = out.quad_a * out.quad_b * window_capture / (rep_rate_hz * out.net_c2);
  const double ra = out.quad_a_err / out.quad_a;
  const double rb = out.quad_b_err / out.quad_b;
  const double rc = out.net_c2_err / out.net_c2;
  out.xi_err = out.xi_per_w2 * std::sqrt(ra * ra + rb * rb + rc * rc);
  out.converged = true;
  return out;
}

}  // namespace coincidence
}  // namespace mirpairs
