#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace magphase {

using Index = Eigen::Index;

/// Time-frequency matrices are frame-major: row = frame t, column = bin f.
template <typename Scalar = double>
using RealMatrixX = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar = double>
using ComplexMatrixX =
    Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar = double>
using SampleArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using RealMatrix = RealMatrixX<double>;
using ComplexMatrix = ComplexMatrixX<double>;
using SampleArray = SampleArrayX<double>;

enum class ErrorCode {
  NonFinite,
  Empty,
  ConfigInvalid,
  ShapeMismatch,
  LengthMismatch,
  ZeroSignal,
  SilentReference,
  SpecInvalid,
  MissingTarget,
  DivergedNaN,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class WindowKind { SqrtHann };

struct StftConfig {
  int win_length = 512;
  int hop_length = 128;
  int fft_size = 512;
  WindowKind window = WindowKind::SqrtHann;
  int sample_rate_hz = 16000;

  /// FFT size defaults to the smallest power of two >= win_length.
  static StftConfig with_defaults(int win_length, int hop_length, int sample_rate_hz = 16000);
  /// Window and hop given in milliseconds, e.g. 32/8 ms at 16 kHz -> 512/128 samples.
  static StftConfig from_ms(double win_ms, double hop_ms, int sample_rate_hz);

  Index num_bins() const { return fft_size / 2 + 1; }
  /// 1 + ceil(len / hop).
  Index num_frames(Index signal_length) const;
  /// Zero samples prepended (and appended) before framing.
  Index padding() const { return win_length - hop_length; }

  /// Throws Error(ConfigInvalid) when the invariants do not hold.
  void validate() const;

  bool operator==(const StftConfig&) const = default;
};

/// Returns an error code when the samples or rate violate the signal invariants.
std::optional<ErrorCode> validate_signal(const SampleArray& samples, int sample_rate_hz);

/// Real-valued mono signal. Validated on construction, immutable afterwards.
class TimeSignal {
 public:
  TimeSignal(SampleArray samples, int sample_rate_hz);

  static TimeSignal zeros(Index length, int sample_rate_hz);

  const SampleArray& samples() const { return samples_; }
  int sample_rate() const { return sample_rate_; }
  Index size() const { return samples_.size(); }
  double operator[](Index n) const { return samples_[n]; }

 private:
  SampleArray samples_;
  int sample_rate_;
};

/// Complex one-sided STFT matrix [frames x bins].
class Spectrogram {
 public:
  Spectrogram(ComplexMatrix data, const StftConfig& config);

  const ComplexMatrix& data() const { return data_; }
  const StftConfig& config() const { return config_; }
  Index frames() const { return data_.rows(); }
  Index bins() const { return data_.cols(); }

 private:
  ComplexMatrix data_;
  StftConfig config_;
};

/// Nonnegative magnitude matrix [frames x bins].
class MagSpectrogram {
 public:
  MagSpectrogram(RealMatrix data, const StftConfig& config);

  const RealMatrix& data() const { return data_; }
  const StftConfig& config() const { return config_; }
  Index frames() const { return data_.rows(); }
  Index bins() const { return data_.cols(); }

 private:
  RealMatrix data_;
  StftConfig config_;
};

/// Argument in (-pi, pi]; the argument of 0 is 0.
template <typename Scalar>
Scalar principal_arg(const std::complex<Scalar>& z) {
  if (z.real() == Scalar(0) && z.imag() == Scalar(0)) return Scalar(0);
  Scalar a = std::atan2(z.imag(), z.real());
  if (a <= -Scalar(EIGEN_PI)) a = Scalar(EIGEN_PI);
  return a;
}

/// Entrywise principal argument of a complex array expression.
template <typename Derived>
RealMatrixX<typename Derived::RealScalar> phase(const Eigen::ArrayBase<Derived>& z) {
  using Real = typename Derived::RealScalar;
  return z.unaryExpr([](const std::complex<Real>& v) { return principal_arg(v); });
}

/// Unit phasor of each entry; zero entries map to 1 (phase 0).
template <typename Derived>
ComplexMatrixX<typename Derived::RealScalar> unit_phasor(const Eigen::ArrayBase<Derived>& z) {
  using Real = typename Derived::RealScalar;
  return z.unaryExpr([](const std::complex<Real>& v) {
    const Real r = std::abs(v);
    return r > Real(0) ? std::complex<Real>(v / r) : std::complex<Real>(Real(1), Real(0));
  });
}

/// exp(j * phase) entrywise.
template <typename Derived>
ComplexMatrixX<typename Derived::Scalar> polar_phasor(const Eigen::ArrayBase<Derived>& phase) {
  using Real = typename Derived::Scalar;
  return phase.unaryExpr([](Real p) { return std::polar(Real(1), p); });
}

MagSpectrogram magnitude_of(const Spectrogram& x);
RealMatrix phase_of(const Spectrogram& x);

/// Builds a spectrogram from magnitude and phase matrices.
Spectrogram from_polar(const RealMatrix& magnitude, const RealMatrix& phase,
                       const StftConfig& config);

/// Throws Error(ShapeMismatch) unless both operands have the same [frames x bins] shape.
template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* where) {
  if (a.frames() != b.frames() || a.bins() != b.bins()) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(where) + ": " + std::to_string(a.frames()) + "x" +
                    std::to_string(a.bins()) + " vs " + std::to_string(b.frames()) + "x" +
                    std::to_string(b.bins()));
  }
}

}  // namespace magphase
