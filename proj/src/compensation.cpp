#include "magphase/compensation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace magphase {
namespace {

double l1_along(double m, double c, double s, std::complex<double> target) {
  return std::abs(m * c - target.real()) + std::abs(m * s - target.imag());
}

}  // namespace

double optimal_magnitude_along_phase(std::complex<double> target, double phase, Norm norm,
                                     bool nonneg) {
  if (norm == Norm::L2) {
    const double m = std::abs(target) * std::cos(principal_arg(target) - phase);
    return nonneg ? std::max(m, 0.0) : m;
  }
  const double c = std::cos(phase);
  const double s = std::sin(phase);
  // |m c - a| + |m s - b| >= |m| - (|a| + |b|), so the minimizer lies within twice that.
  const double bound = 2.0 * (std::abs(target.real()) + std::abs(target.imag()));
  double lo = nonneg ? 0.0 : -bound;
  double hi = bound;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (l1_along(m1, c, s, target) < l1_along(m2, c, s, target)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return 0.5 * (lo + hi);
}

MagSpectrogram compensated_magnitude(const Spectrogram& clean, const RealMatrix& phase_matrix) {
  if (phase_matrix.rows() != clean.frames() || phase_matrix.cols() != clean.bins()) {
    throw Error(ErrorCode::ShapeMismatch, "compensated_magnitude: phase shape differs");
  }
  return MagSpectrogram(
      (clean.data().abs() * (phase(clean.data()) - phase_matrix).cos()).max(0.0),
      clean.config());
}

RealMatrix phase_diff_map(const Spectrogram& clean, const Spectrogram& mixture) {
  require_same_shape(clean, mixture, "phase_diff_map");
  return (phase(clean.data()) - phase(mixture.data())).cos();
}

int bin_index(double value, double lo, double hi, int bins) {
  const double pos = (value - lo) * bins / (hi - lo);
  return std::clamp(static_cast<int>(std::floor(pos)), 0, bins - 1);
}

Histogram2D histogram2d(const MagSpectrogram& est, const Spectrogram& clean,
                        const Spectrogram& mixture, double floor_db, int bins) {
  require_same_shape(est, clean, "histogram2d");
  require_same_shape(clean, mixture, "histogram2d");
  if (bins < 1 || !std::isfinite(floor_db)) {
    throw Error(ErrorCode::SpecInvalid, "histogram2d: invalid bins or floor");
  }
  Histogram2D hist;
  hist.floor_db = floor_db;
  hist.x_edges = SampleArray::LinSpaced(bins + 1, -1.0, 1.0);
  hist.y_edges = SampleArray::LinSpaced(bins + 1, 0.0, 2.0);
  hist.counts.setZero(bins, bins);

  const RealMatrix energy = clean.data().abs2();
  const double threshold = energy.maxCoeff() * std::pow(10.0, -floor_db / 10.0);
  const RealMatrix cos_d = phase_diff_map(clean, mixture);
  const RealMatrix s_mag = clean.data().abs();
  for (Index i = 0; i < energy.size(); ++i) {
    if (!(energy(i) > 0.0) || energy(i) < threshold) continue;
    const double ratio = std::min(est.data()(i) / s_mag(i), 2.0);
    ++hist.counts(bin_index(ratio, 0.0, 2.0, bins), bin_index(cos_d(i), -1.0, 1.0, bins));
  }
  return hist;
}

std::string to_csv(const Histogram2D& hist) {
  std::ostringstream out;
  out << "x_center,y_center,count\n";
  out.precision(6);
  for (int j = 0; j < hist.y_bins(); ++j) {
    const double yc = 0.5 * (hist.y_edges[j] + hist.y_edges[j + 1]);
    for (int i = 0; i < hist.x_bins(); ++i) {
      const double xc = 0.5 * (hist.x_edges[i] + hist.x_edges[i + 1]);
      out << std::fixed << xc << ',' << yc << ',' << hist.counts(j, i) << '\n';
    }
  }
  return out.str();
}

std::string to_pgm(const Histogram2D& hist) {
  const int w = hist.x_bins();
  const int h = hist.y_bins();
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const long peak = std::max(1L, hist.counts.maxCoeff());
  for (int row = h - 1; row >= 0; --row) {
    for (int col = 0; col < w; ++col) {
      out.push_back(static_cast<char>(static_cast<unsigned char>(
          std::lround(255.0 * static_cast<double>(hist.counts(row, col)) / peak))));
    }
  }
  return out;
}

}  // namespace magphase
