#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <variant>

#include "magphase/types.hpp"

namespace magphase {

enum class LossTag {
  RI,             // |R - Re S| + |I - Im S|
  RI_Mag,         // RI + | |R + jI| - |S| |
  RI_iSTFT,       // | istft(S^) - s |
  RI_iSTFT_Mag,   // RI_iSTFT + | |stft(istft(S^))| - |S| |
  Mag_RI_iSTFT,   // | |R + jI| - |S| | + RI_iSTFT
  RIiSTFTx0_Mag,  // RI_iSTFT_Mag with zero time weight
  Wav,            // | s^ - s |
  Wav_Mag,        // Wav + | |stft(s^)| - |S| |
  Wavx0_Mag,      // Wav_Mag with zero time weight
  MSA,            // | M^ - |S| |
  PSA,            // | M^ - |S| clamp(cos(angle S - angle Y), 0, 1) |
  Phase,          // RI distance between |S| e^{j angle S^} and S
};

inline constexpr std::array<LossTag, 12> kAllLossTags = {
    LossTag::RI,     LossTag::RI_Mag,  LossTag::RI_iSTFT,  LossTag::RI_iSTFT_Mag,
    LossTag::Mag_RI_iSTFT, LossTag::RIiSTFTx0_Mag, LossTag::Wav, LossTag::Wav_Mag,
    LossTag::Wavx0_Mag, LossTag::MSA,  LossTag::PSA,       LossTag::Phase};

const char* to_string(LossTag tag) noexcept;
std::optional<LossTag> parse_loss_tag(std::string_view name);

/// Which free variable a loss is defined over.
enum class EstimateDomain { Spectral, Magnitude, Waveform };
EstimateDomain domain_of(LossTag tag) noexcept;

/// Per-element distance. L1 is the form used throughout the losses above; L2 (squared
/// error) is available for the closed-form projection experiments.
enum class Norm { L1, L2 };

/// Tagged loss selector. `time_weight` scales the complex (RI) or time-domain term,
/// `mag_weight` the magnitude term. Single-term losses (MSA, PSA, Phase) ignore both.
struct LossKind {
  LossTag tag = LossTag::RI;
  double time_weight = 1.0;
  double mag_weight = 1.0;
  Norm norm = Norm::L1;

  /// Default weights; the x0 variants get time_weight = 0.
  static LossKind make(LossTag tag, Norm norm = Norm::L1);
  /// Throws Error(SpecInvalid) for negative/non-finite weights or a nonzero x0 time weight.
  void validate() const;
};

using Gradient = std::variant<std::monostate, ComplexMatrix, RealMatrix, SampleArray>;

/// `value` is the exact loss; `smoothed` is the Charbonnier-smoothed objective whose
/// derivative is `gradient` (dL/dRe + j dL/dIm for spectral estimates).
struct LossValue {
  double value = 0.0;
  double smoothed = 0.0;
  Gradient gradient;
};

inline constexpr double kCharbonnierEps = 1e-8;

struct LossOptions {
  Norm norm = Norm::L1;
  double time_weight = 1.0;
  double mag_weight = 1.0;
  bool gradient = true;
  double smoothing = kCharbonnierEps;  // Charbonnier epsilon for L1
};

// All sums are divided by their element count: T-F units for spectral terms,
// samples for time-domain terms.

LossValue loss_ri(const Spectrogram& est, const Spectrogram& clean, const LossOptions& opt = {});
LossValue loss_ri_mag(const Spectrogram& est, const Spectrogram& clean,
                      const LossOptions& opt = {});
LossValue loss_ri_istft(const Spectrogram& est, const TimeSignal& clean,
                        const LossOptions& opt = {});
LossValue loss_ri_istft_mag(const Spectrogram& est, const TimeSignal& clean,
                            const Spectrogram& clean_spec, const LossOptions& opt = {});
LossValue loss_mag_ri_istft(const Spectrogram& est, const TimeSignal& clean,
                            const Spectrogram& clean_spec, const LossOptions& opt = {});
LossValue loss_wav(const TimeSignal& est, const TimeSignal& clean, const LossOptions& opt = {});
LossValue loss_wav_mag(const TimeSignal& est, const TimeSignal& clean,
                       const Spectrogram& clean_spec, const LossOptions& opt = {});

/// Magnitude-only variants: consistency-projected magnitude of istft(S^), or the
/// magnitude of stft(s^), with no time-domain term.
LossValue loss_ri_istft_x0_mag(const Spectrogram& est, Index out_len,
                               const Spectrogram& clean_spec, const LossOptions& opt = {});
LossValue loss_wav_x0_mag(const TimeSignal& est, const Spectrogram& clean_spec,
                          const LossOptions& opt = {});

LossValue loss_msa(const MagSpectrogram& est, const Spectrogram& clean,
                   const LossOptions& opt = {});
/// MSA written with the oracle phase attached to both operands; the complex
/// distance is the modulus of the difference.
double loss_msa_teacher_forced(const MagSpectrogram& est, const Spectrogram& clean,
                               Norm norm = Norm::L1);
LossValue loss_psa(const MagSpectrogram& est, const Spectrogram& clean,
                   const Spectrogram& mixture, const LossOptions& opt = {});
/// Gradient flows only through the phase of `est`; it is zero at est == 0.
LossValue loss_phase(const Spectrogram& est, const Spectrogram& clean,
                     const LossOptions& opt = {});

using Estimate = std::variant<Spectrogram, MagSpectrogram, TimeSignal>;

/// Non-owning references to whatever reference signals a loss needs.
struct LossTargets {
  const Spectrogram* clean_spec = nullptr;    // S
  const TimeSignal* clean = nullptr;          // s
  const Spectrogram* mixture_spec = nullptr;  // Y
};

/// Dispatches on `kind.tag`; throws MissingTarget when a needed reference is absent
/// and ShapeMismatch when the estimate has the wrong domain.
LossValue evaluate_loss(const LossKind& kind, const Estimate& est, const LossTargets& targets,
                        bool gradient = true, double smoothing = kCharbonnierEps);

struct PitResult {
  double value = 0.0;                  // sum over both sources, best assignment
  std::array<LossValue, 2> per_source;  // per estimate, under the chosen assignment
  std::array<int, 2> permutation{0, 1};  // estimate i is matched to target permutation[i]
};

/// Two-source permutation-invariant wrapper. Ties keep the identity assignment.
PitResult pit_wrap(const LossKind& kind, const std::array<Estimate, 2>& estimates,
                   const std::array<LossTargets, 2>& targets, bool gradient = true);

}  // namespace magphase
