#include "magphase/types.hpp"

#include <bit>
#include <cmath>

namespace magphase {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroSignal: return "ZeroSignal";
    case ErrorCode::SilentReference: return "SilentReference";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::MissingTarget: return "MissingTarget";
    case ErrorCode::DivergedNaN: return "DivergedNaN";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

StftConfig StftConfig::with_defaults(int win_length, int hop_length, int sample_rate_hz) {
  StftConfig cfg;
  cfg.win_length = win_length;
  cfg.hop_length = hop_length;
  cfg.sample_rate_hz = sample_rate_hz;
  cfg.fft_size = win_length > 0 ? static_cast<int>(std::bit_ceil(static_cast<unsigned>(win_length)))
                                : 0;
  cfg.validate();
  return cfg;
}

StftConfig StftConfig::from_ms(double win_ms, double hop_ms, int sample_rate_hz) {
  const auto to_samples = [&](double ms) {
    return static_cast<int>(std::lround(ms * 1e-3 * sample_rate_hz));
  };
  return with_defaults(to_samples(win_ms), to_samples(hop_ms), sample_rate_hz);
}

Index StftConfig::num_frames(Index signal_length) const {
  return 1 + (signal_length + hop_length - 1) / hop_length;
}

void StftConfig::validate() const {
  if (win_length <= 0 || hop_length <= 0 || fft_size <= 0) {
    throw Error(ErrorCode::ConfigInvalid, "window, hop and fft size must be positive");
  }
  if (hop_length > win_length) {
    throw Error(ErrorCode::ConfigInvalid, "hop length exceeds window length");
  }
  if (fft_size < win_length) {
    throw Error(ErrorCode::ConfigInvalid, "fft size smaller than window length");
  }
  if (sample_rate_hz <= 0) {
    throw Error(ErrorCode::ConfigInvalid, "sample rate must be positive");
  }
}

std::optional<ErrorCode> validate_signal(const SampleArray& samples, int sample_rate_hz) {
  if (samples.size() == 0) return ErrorCode::Empty;
  if (!samples.isFinite().all()) return ErrorCode::NonFinite;
  if (sample_rate_hz <= 0) return ErrorCode::ConfigInvalid;
  return std::nullopt;
}

TimeSignal::TimeSignal(SampleArray samples, int sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_(sample_rate_hz) {
  if (auto err = validate_signal(samples_, sample_rate_)) {
    throw Error(*err, "invalid time signal");
  }
}

TimeSignal TimeSignal::zeros(Index length, int sample_rate_hz) {
  return TimeSignal(SampleArray::Zero(length), sample_rate_hz);
}

Spectrogram::Spectrogram(ComplexMatrix data, const StftConfig& config)
    : data_(std::move(data)), config_(config) {
  config_.validate();
  if (data_.cols() != config_.num_bins()) {
    throw Error(ErrorCode::ShapeMismatch, "spectrogram bin count does not match fft size");
  }
  if (!data_.real().isFinite().all() || !data_.imag().isFinite().all()) {
    throw Error(ErrorCode::NonFinite, "spectrogram contains non-finite entries");
  }
}

MagSpectrogram::MagSpectrogram(RealMatrix data, const StftConfig& config)
    : data_(std::move(data)), config_(config) {
  config_.validate();
  if (data_.cols() != config_.num_bins()) {
    throw Error(ErrorCode::ShapeMismatch, "magnitude bin count does not match fft size");
  }
  if (!data_.isFinite().all()) {
    throw Error(ErrorCode::NonFinite, "magnitude contains non-finite entries");
  }
  if ((data_ < 0.0).any()) {
    throw Error(ErrorCode::SpecInvalid, "magnitude contains negative entries");
  }
}

MagSpectrogram magnitude_of(const Spectrogram& x) {
  return MagSpectrogram(x.data().abs(), x.config());
}

RealMatrix phase_of(const Spectrogram& x) { return phase(x.data()); }

Spectrogram from_polar(const RealMatrix& magnitude, const RealMatrix& phase,
                       const StftConfig& config) {
  if (magnitude.rows() != phase.rows() || magnitude.cols() != phase.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "from_polar: magnitude and phase shapes differ");
  }
  return Spectrogram(magnitude.cast<std::complex<double>>() * polar_phasor(phase), config);
}

}  // namespace magphase
