#pragma once

#include <optional>
#include <variant>

#include "magphase/types.hpp"

namespace magphase {

enum class MaskKind { IAM, PSM, PSMTruncated };

/// Real-valued time-frequency mask [frames x bins].
struct MaskMatrix {
  RealMatrix data;
  MaskKind kind;
};

/// Guard on |Y| in the mask denominators.
inline constexpr double kMaskEps = 1e-8;

/// Ideal amplitude mask |S| / max(|Y|, eps).
MaskMatrix iam(const Spectrogram& clean, const Spectrogram& mixture, double eps = kMaskEps);

/// Phase-sensitive mask |S| / max(|Y|, eps) * cos(angle S - angle Y), optionally clamped to [0, 1].
MaskMatrix psm(const Spectrogram& clean, const Spectrogram& mixture, double eps = kMaskEps,
               bool truncate = false);

/// Phase-sensitive approximation target |S| * clamp(cos(angle S - angle Y), 0, 1).
MagSpectrogram psa_target(const Spectrogram& clean, const Spectrogram& mixture);

struct MaskApplyOptions {
  /// Upper clamp on mask gains when applied; std::nullopt disables it.
  std::optional<double> max_gain = 10.0;
};

/// Magnitude delivered by an oracle mask on |Y|, evaluated in closed form so that,
/// for example, the IAM reproduces |S| exactly wherever |Y| >= eps.
MagSpectrogram oracle_masked_magnitude(MaskKind kind, const Spectrogram& clean,
                                       const Spectrogram& mixture, double eps = kMaskEps,
                                       const MaskApplyOptions& options = {});

/// Masked mixture M (.) Y, with the gain clamp applied.
Spectrogram apply_mask(const MaskMatrix& mask, const Spectrogram& mixture,
                       const MaskApplyOptions& options = {});

/// Re-synthesis with the mixture phase: istft(M (.) Y) for a mask,
/// istft(M e^{j angle Y}) for a magnitude estimate.
TimeSignal apply_mask_resynth(const MaskMatrix& mask, const Spectrogram& mixture, Index out_len,
                              const MaskApplyOptions& options = {});
TimeSignal apply_mask_resynth(const MagSpectrogram& magnitude, const Spectrogram& mixture,
                              Index out_len);

}  // namespace magphase
