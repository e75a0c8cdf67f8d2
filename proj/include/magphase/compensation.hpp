#pragma once

#include <complex>
#include <string>

#include "magphase/losses.hpp"
#include "magphase/types.hpp"

namespace magphase {

/// Magnitude m minimizing the distance between m e^{j phase} and `target`.
///
/// L2: the projection |S| cos(angle S - phase), clamped at 0 when `nonneg`; the clamp is
/// what sends the estimate to zero once the phase error exceeds pi/2.
/// L1 (over the real and imaginary parts): no closed form is used; the objective is
/// convex piecewise-linear in m and is minimized by ternary search.
double optimal_magnitude_along_phase(std::complex<double> target, double phase, Norm norm,
                                     bool nonneg = true);

/// max(0, |S| cos(angle S - phase)) for every T-F unit.
MagSpectrogram compensated_magnitude(const Spectrogram& clean, const RealMatrix& phase);

/// cos(angle S - angle Y) per unit.
RealMatrix phase_diff_map(const Spectrogram& clean, const Spectrogram& mixture);

/// Phase difference vs. magnitude ratio counts.
struct Histogram2D {
  SampleArray x_edges;  // cos phase difference, [-1, 1]
  SampleArray y_edges;  // magnitude ratio, [0, 2]
  Eigen::Array<long, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> counts;  // [y bin x x bin]
  double floor_db = 60.0;

  int x_bins() const { return static_cast<int>(x_edges.size()) - 1; }
  int y_bins() const { return static_cast<int>(y_edges.size()) - 1; }
  long total() const { return counts.sum(); }
};

/// Bin of `value` among `bins` equal bins over [lo, hi]; values outside are clamped to
/// the first/last bin.
int bin_index(double value, double lo, double hi, int bins);

/// Units whose |S|^2 is more than floor_db below the strongest unit, or with |S| = 0,
/// are discarded. Ratios est/|S| are truncated to 2.
Histogram2D histogram2d(const MagSpectrogram& est, const Spectrogram& clean,
                        const Spectrogram& mixture, double floor_db = 60.0, int bins = 50);

/// Rows "x_center,y_center,count" after a header line.
std::string to_csv(const Histogram2D& hist);
/// Binary PGM (P5); top row is the largest ratio, gray level linear in count.
std::string to_pgm(const Histogram2D& hist);

}  // namespace magphase
