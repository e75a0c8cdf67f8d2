#include "magphase/masks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "magphase/stft.hpp"

namespace magphase {
namespace {

RealMatrix cos_phase_difference(const Spectrogram& clean, const Spectrogram& mixture) {
  return (phase(clean.data()) - phase(mixture.data())).cos();
}

RealMatrix guarded_ratio(const Spectrogram& clean, const Spectrogram& mixture, double eps) {
  return clean.data().abs() / mixture.data().abs().max(eps);
}

}  // namespace

MaskMatrix iam(const Spectrogram& clean, const Spectrogram& mixture, double eps) {
  require_same_shape(clean, mixture, "iam");
  return {guarded_ratio(clean, mixture, eps), MaskKind::IAM};
}

MaskMatrix psm(const Spectrogram& clean, const Spectrogram& mixture, double eps, bool truncate) {
  require_same_shape(clean, mixture, "psm");
  RealMatrix m = guarded_ratio(clean, mixture, eps) * cos_phase_difference(clean, mixture);
  if (truncate) return {m.max(0.0).min(1.0), MaskKind::PSMTruncated};
  return {std::move(m), MaskKind::PSM};
}

MagSpectrogram psa_target(const Spectrogram& clean, const Spectrogram& mixture) {
  require_same_shape(clean, mixture, "psa_target");
  return MagSpectrogram(
      clean.data().abs() * cos_phase_difference(clean, mixture).max(0.0).min(1.0),
      clean.config());
}

MagSpectrogram oracle_masked_magnitude(MaskKind kind, const Spectrogram& clean,
                                       const Spectrogram& mixture, double eps,
                                       const MaskApplyOptions& options) {
  require_same_shape(clean, mixture, "oracle_masked_magnitude");
  const RealMatrix s_mag = clean.data().abs();
  const RealMatrix y_mag = mixture.data().abs();
  const RealMatrix cos_d = cos_phase_difference(clean, mixture);
  const double max_gain = options.max_gain.value_or(std::numeric_limits<double>::infinity());

  RealMatrix out(s_mag.rows(), s_mag.cols());
  for (Index t = 0; t < out.rows(); ++t) {
    for (Index f = 0; f < out.cols(); ++f) {
      const double s = s_mag(t, f);
      const double y = y_mag(t, f);
      // gain * |Y| written without the division when |Y| >= eps.
      double value = y >= eps ? s : s * y / eps;
      if (kind != MaskKind::IAM) value *= cos_d(t, f);
      if (kind == MaskKind::PSMTruncated) value = std::clamp(value, 0.0, y);
      value = std::min(value, max_gain * y);
      // A negative PSM gain flips the phase; the delivered magnitude is its modulus.
      out(t, f) = std::abs(value);
    }
  }
  return MagSpectrogram(std::move(out), clean.config());
}

Spectrogram apply_mask(const MaskMatrix& mask, const Spectrogram& mixture,
                       const MaskApplyOptions& options) {
  if (mask.data.rows() != mixture.frames() || mask.data.cols() != mixture.bins()) {
    throw Error(ErrorCode::ShapeMismatch, "apply_mask: mask and mixture shapes differ");
  }
  RealMatrix gain = mask.data;
  if (options.max_gain) gain = gain.min(*options.max_gain);
  if (mask.kind == MaskKind::IAM || mask.kind == MaskKind::PSMTruncated) gain = gain.max(0.0);
  return Spectrogram(gain.cast<std::complex<double>>() * mixture.data(), mixture.config());
}

TimeSignal apply_mask_resynth(const MaskMatrix& mask, const Spectrogram& mixture, Index out_len,
                              const MaskApplyOptions& options) {
  return istft(apply_mask(mask, mixture, options), out_len);
}

TimeSignal apply_mask_resynth(const MagSpectrogram& magnitude, const Spectrogram& mixture,
                              Index out_len) {
  require_same_shape(magnitude, mixture, "apply_mask_resynth");
  return istft(Spectrogram(magnitude.data().cast<std::complex<double>>() *
                               unit_phasor(mixture.data()),
                           mixture.config()),
               out_len);
}

}  // namespace magphase
