#include "magphase/stft.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace magphase {
namespace {

using cvec = std::vector<std::complex<double>>;
using rvec = std::vector<double>;

/// Per-call real FFT workspace for one frame size.
class FrameFft {
 public:
  explicit FrameFft(int n) : n_(n), time_(n), freq_(n / 2 + 1) {
    fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  }

  int size() const { return n_; }

  /// Real frame of length <= n (zero-extended) -> first `bins` DFT coefficients.
  template <typename Frame, typename Out>
  void forward(const Frame& frame, Index len, Out&& out) {
    for (int i = 0; i < n_; ++i) time_[i] = i < len ? frame[i] : 0.0;
    fft_.fwd(freq_, time_);
    for (Index k = 0; k < out.size(); ++k) out[k] = freq_[k];
  }

  /// One-sided spectrum -> real frame, the DC and Nyquist imaginary parts are ignored.
  template <typename In>
  const rvec& inverse_real(const In& half) {
    load_half(half, 1.0);
    fft_.inv(time_, freq_, n_);  // scaled by 1/n
    return time_;
  }

  /// Re(sum_{k < bins} g[k] exp(+j 2 pi k m / n)), unscaled.
  template <typename In>
  const rvec& synthesize_real(const In& half) {
    // The Hermitian inverse counts interior bins twice.
    load_half(half, 0.5);
    fft_.inv(time_, freq_, n_);
    for (auto& v : time_) v *= static_cast<double>(n_);
    return time_;
  }

 private:
  template <typename In>
  void load_half(const In& half, double interior_scale) {
    const Index bins = std::min<Index>(half.size(), static_cast<Index>(freq_.size()));
    freq_.assign(freq_.size(), std::complex<double>{});
    freq_[0] = half[0].real();
    for (Index k = 1; k < bins; ++k) {
      freq_[k] = 2 * k == n_ ? std::complex<double>(half[k].real()) : interior_scale * half[k];
    }
  }

  int n_;
  Eigen::FFT<double> fft_;
  rvec time_;
  cvec freq_;
};

// Overlapped analysis energy at every padded sample position covered by `frames` frames.
SampleArray overlap_envelope(const SampleArray& window, Index hop, Index frames) {
  const Index wl = window.size();
  SampleArray env = SampleArray::Zero((frames - 1) * hop + wl);
  const SampleArray sq = window.square();
  for (Index t = 0; t < frames; ++t) env.segment(t * hop, wl) += sq;
  return env;
}

void check_frames(Index frames) {
  if (frames < 1) throw Error(ErrorCode::ShapeMismatch, "spectrogram has no frames");
}

}  // namespace

SampleArray analysis_window(const StftConfig& config) {
  config.validate();
  const Index wl = config.win_length;
  SampleArray w(wl);
  for (Index n = 0; n < wl; ++n) {
    w[n] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * EIGEN_PI * static_cast<double>(n) / wl));
  }
  return w;
}

WindowPair make_window_pair(const StftConfig& config) {
  WindowPair pair;
  pair.analysis = analysis_window(config);
  const Index wl = config.win_length;
  const Index hop = config.hop_length;
  pair.synthesis = SampleArray::Zero(wl);
  for (Index n = 0; n < wl; ++n) {
    double energy = 0.0;
    for (Index m = n % hop; m < wl; m += hop) energy += pair.analysis[m] * pair.analysis[m];
    if (energy > 0.0) pair.synthesis[n] = pair.analysis[n] / energy;
  }
  return pair;
}

Spectrogram stft(const SampleArray& x, const StftConfig& config) {
  config.validate();
  if (x.size() == 0) throw Error(ErrorCode::Empty, "stft of an empty signal");
  const SampleArray w = analysis_window(config);
  const Index wl = config.win_length;
  const Index hop = config.hop_length;
  const Index pad = config.padding();
  const Index len = x.size();
  const Index frames = config.num_frames(len);

  ComplexMatrix out(frames, config.num_bins());
  FrameFft fft(config.fft_size);
  SampleArray frame(wl);
  for (Index t = 0; t < frames; ++t) {
    for (Index m = 0; m < wl; ++m) {
      const Index n = t * hop + m - pad;
      frame[m] = (n >= 0 && n < len) ? w[m] * x[n] : 0.0;
    }
    fft.forward(frame, wl, out.row(t));
  }
  return Spectrogram(std::move(out), config);
}

Spectrogram stft(const TimeSignal& x, const StftConfig& config) {
  if (x.sample_rate() != config.sample_rate_hz) {
    throw Error(ErrorCode::ConfigInvalid, "signal sample rate does not match STFT config");
  }
  return stft(x.samples(), config);
}

SampleArray istft_samples(const ComplexMatrix& spec, const StftConfig& config, Index out_len) {
  config.validate();
  if (spec.cols() != config.num_bins()) {
    throw Error(ErrorCode::ShapeMismatch, "istft: bin count does not match config");
  }
  check_frames(spec.rows());
  if (out_len < 0) throw Error(ErrorCode::ShapeMismatch, "istft: negative output length");

  const SampleArray w = analysis_window(config);
  const Index wl = config.win_length;
  const Index hop = config.hop_length;
  const Index pad = config.padding();
  const Index frames = spec.rows();
  const SampleArray env = overlap_envelope(w, hop, frames);

  SampleArray acc = SampleArray::Zero(env.size());
  FrameFft fft(config.fft_size);
  for (Index t = 0; t < frames; ++t) {
    const rvec& y = fft.inverse_real(spec.row(t));
    for (Index m = 0; m < wl; ++m) acc[t * hop + m] += w[m] * y[m];
  }

  SampleArray out = SampleArray::Zero(out_len);
  for (Index n = 0; n < out_len; ++n) {
    const Index p = n + pad;
    if (p < env.size() && env[p] > 0.0) out[n] = acc[p] / env[p];
  }
  return out;
}

TimeSignal istft(const Spectrogram& spec, Index out_len) {
  if (out_len < 1) throw Error(ErrorCode::ShapeMismatch, "istft: output length must be >= 1");
  return TimeSignal(istft_samples(spec.data(), spec.config(), out_len),
                    spec.config().sample_rate_hz);
}

Spectrogram consistency_project(const Spectrogram& spec, Index out_len) {
  if (spec.config().num_frames(out_len) != spec.frames()) {
    throw Error(ErrorCode::ShapeMismatch,
                "consistency_project: output length implies a different frame count");
  }
  return stft(istft_samples(spec.data(), spec.config(), out_len), spec.config());
}

SampleArray stft_vjp(const ComplexMatrix& grad, const StftConfig& config, Index signal_len) {
  config.validate();
  if (grad.cols() != config.num_bins() || grad.rows() != config.num_frames(signal_len)) {
    throw Error(ErrorCode::ShapeMismatch, "stft_vjp: gradient shape does not match signal");
  }
  const SampleArray w = analysis_window(config);
  const Index wl = config.win_length;
  const Index hop = config.hop_length;
  const Index pad = config.padding();

  SampleArray out = SampleArray::Zero(signal_len);
  FrameFft fft(config.fft_size);
  for (Index t = 0; t < grad.rows(); ++t) {
    const rvec& s = fft.synthesize_real(grad.row(t));
    for (Index m = 0; m < wl; ++m) {
      const Index n = t * hop + m - pad;
      if (n >= 0 && n < signal_len) out[n] += w[m] * s[m];
    }
  }
  return out;
}

ComplexMatrix istft_vjp(const SampleArray& grad, const StftConfig& config, Index frames) {
  config.validate();
  check_frames(frames);
  const SampleArray w = analysis_window(config);
  const Index wl = config.win_length;
  const Index hop = config.hop_length;
  const Index pad = config.padding();
  const int nfft = config.fft_size;
  const Index bins = config.num_bins();
  const SampleArray env = overlap_envelope(w, hop, frames);

  // Gradient with respect to the overlap-add accumulator at each padded position.
  SampleArray acc_grad = SampleArray::Zero(env.size());
  for (Index n = 0; n < grad.size(); ++n) {
    const Index p = n + pad;
    if (p < env.size() && env[p] > 0.0) acc_grad[p] = grad[n] / env[p];
  }

  ComplexMatrix out(frames, bins);
  FrameFft fft(nfft);
  SampleArray frame(wl);
  for (Index t = 0; t < frames; ++t) {
    frame = w * acc_grad.segment(t * hop, wl);
    fft.forward(frame, wl, out.row(t));
    for (Index k = 0; k < bins; ++k) {
      const bool self_conjugate = k == 0 || 2 * k == nfft;
      out(t, k) *= (self_conjugate ? 1.0 : 2.0) / nfft;
    }
  }
  return out;
}

}  // namespace magphase
