#pragma once

#include "magphase/types.hpp"

namespace magphase {

/// Analysis window and its canonical dual for a given hop.
///
/// The synthesis window satisfies sum_k analysis[n + k*hop] * synthesis[n + k*hop] = 1
/// wherever frames fully overlap, which gives exact reconstruction for any hop that
/// keeps the overlapped analysis energy positive (including non-dyadic ratios such as
/// 200/80 where sqrt-Hann is not COLA on its own).
struct WindowPair {
  SampleArray analysis;
  SampleArray synthesis;
};

/// Periodic sqrt-Hann of length win_length.
SampleArray analysis_window(const StftConfig& config);
WindowPair make_window_pair(const StftConfig& config);

/// One-sided STFT, unnormalized DFT. The signal is padded with win_length - hop_length
/// zeros on both sides and produces 1 + ceil(len / hop) frames.
Spectrogram stft(const TimeSignal& x, const StftConfig& config);
Spectrogram stft(const SampleArray& x, const StftConfig& config);

/// Weighted overlap-add inverse. Interior samples are exactly the dual-window
/// overlap-add; samples near the edges use the finite-frame least-squares
/// normalization, so istft(stft(x), len(x)) == x up to rounding everywhere.
/// The result is trimmed or zero-padded to out_len.
TimeSignal istft(const Spectrogram& spec, Index out_len);
SampleArray istft_samples(const ComplexMatrix& spec, const StftConfig& config, Index out_len);

/// STFT(iSTFT(X)): projection onto the set of consistent spectrograms.
Spectrogram consistency_project(const Spectrogram& spec, Index out_len);

/// Vector-Jacobian product of stft(): given G = dL/dRe + j dL/dIm over the
/// spectrogram, returns dL/dx for a signal of length signal_len.
SampleArray stft_vjp(const ComplexMatrix& grad, const StftConfig& config, Index signal_len);

/// Vector-Jacobian product of istft(): given dL/dx over the out_len output samples,
/// returns dL/dRe + j dL/dIm for a spectrogram with `frames` rows.
ComplexMatrix istft_vjp(const SampleArray& grad, const StftConfig& config, Index frames);

}  // namespace magphase
