#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

// Reversed Hong-Ou-Mandel interferometer: a signal-idler pair enters a 2x2
// coupler in a superposition of both input ports, with a relative pump phase
// phi applied twice (once per photon) to the second port. Coincidences
// between the output ports fringe as cos^2(phi) - half the period of the
// classical fringe - and null at phi = pi/2 for any splitting ratio of the
// lossless coupler.

namespace mirpairs {
namespace interference {

// Output amplitudes with the global phase i*exp(i*phi) removed, over the
// basis {both photons in A, both in B, signal A + idler B, idler A + signal B}.
struct BiphotonState {
  std::array<std::complex<double>, 4> amplitudes;

  double coincidence_probability() const;  // |amp[2]|^2 + |amp[3]|^2
  double norm() const;                     // should be 1 for a lossless coupler
};

// r_split is the power reflectivity R of the coupler; phi the pump phase.
BiphotonState biphoton_state(double r_split, double phi_rad);

// 4 R (1-R) cos^2(phi), evaluated through the state above.
double coincidence_probability(double r_split, double phi_rad);

// Normalized classical (single-field) fringe (1 + cos(phi)) / 2: period 2 pi,
// against which the pair fringe shows its doubled frequency.
double classical_fringe(double phi_rad);

struct FringeSpec {
  double r_split = 0.5;          // coupler power reflectivity
  double indistinguishability = 1.0;  // overlap of the two pair amplitudes
  double peak_net_hz = 0.0;      // net coincidence rate at the fringe maximum
  double car = 0.0;              // accidental floor = peak_net_hz / car (0 = none)
  double duration_s = 0.0;       // integration per phase point
  int side_windows = 6;          // accidental estimator windows per point
  std::vector<double> phases_rad;
};

struct FringeScan {
  std::vector<double> phases_rad;
  std::vector<std::uint64_t> raw_counts;  // coincidences incl. accidentals
  std::vector<double> accidental_counts;  // side-window estimate, per window mean
  std::vector<double> net_counts;         // raw - accidental estimate
  double duration_s = 0.0;
};

// Poisson draws per phase point from independent substreams of `seed`.
// Partial indistinguishability adds a flat 2RT background to the
// interference term 4RT cos^2(phi).
FringeScan simulate_fringe(const FringeSpec& spec, std::uint64_t seed);

struct VisibilityFit {
  double visibility = 0.0;  // (max - min) / (max + min) of the fitted fringe
  double visibility_err = 0.0;
  double offset = 0.0;      // mean counts
  double phase0_rad = 0.0;  // fringe maximum location
  bool converged = false;
};

// Fits y = c0 + c1 cos(2 phi) + c2 sin(2 phi); V = sqrt(c1^2+c2^2)/c0.
VisibilityFit fit_visibility(const std::vector<double>& phases_rad,
                             const std::vector<double>& counts,
                             const std::vector<double>& errs = {});

struct PhaseCalibration {
  double rad_per_v = 0.0;  // phase advance per volt on the thermal tuner
  double phase0_rad = 0.0;
  bool converged = false;
};

// Classical fringe versus drive voltage calibrates the voltage-to-phase map.
PhaseCalibration calibrate_phase_voltage(const std::vector<double>& volts,
                                         const std::vector<double>& intensity);

double phase_from_voltage(double volts, const PhaseCalibration& cal);

}  // namespace interference
}  // namespace mirpairs
