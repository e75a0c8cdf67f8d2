#include <doctest.h>

#include <numbers>

#include <cmath>
#include <limits>

#include "magphase/scenes.hpp"
#include "magphase/types.hpp"

using namespace magphase;

namespace {

Spectrogram single_row(std::initializer_list<std::complex<double>> values) {
  const StftConfig cfg = StftConfig::with_defaults(4, 2);  // 3 bins
  ComplexMatrix z = ComplexMatrix::Zero(1, cfg.num_bins());
  Index i = 0;
  for (auto v : values) z(0, i++) = v;
  return Spectrogram(z, cfg);
}

}  // namespace

TEST_CASE("validate_signal accepts zeros and rejects NaN and empty input") {
  SampleArray zeros = SampleArray::Zero(3);
  CHECK_FALSE(validate_signal(zeros, 8000).has_value());

  SampleArray nan(1);
  nan[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK(validate_signal(nan, 8000) == ErrorCode::NonFinite);
  CHECK(validate_signal(SampleArray(), 8000) == ErrorCode::Empty);
  CHECK(validate_signal(zeros, 0).has_value());

  CHECK_THROWS_AS(TimeSignal(nan, 8000), Error);
  try {
    TimeSignal bad(SampleArray(), 8000);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Empty);
  }
}

TEST_CASE("magnitude_of") {
  const MagSpectrogram m = magnitude_of(single_row({{3, 4}, {1, 1}, {0, 0}}));
  CHECK(m.data()(0, 0) == 5.0);
  CHECK(m.data()(0, 1) == doctest::Approx(1.41421356).epsilon(1e-9));
  CHECK(m.data()(0, 2) == 0.0);

  const StftConfig cfg = StftConfig::with_defaults(8, 2);
  CHECK((magnitude_of(Spectrogram(ComplexMatrix::Zero(4, 5), cfg)).data() == 0.0).all());
}

TEST_CASE("phase_of uses (-pi, pi] and maps zero to 0") {
  const RealMatrix p = phase_of(single_row({{0, 1}, {-1, 0}, {0, 0}}));
  CHECK(p(0, 0) == doctest::Approx(std::numbers::pi / 2));
  CHECK(p(0, 1) == doctest::Approx(std::numbers::pi));
  CHECK(p(0, 2) == 0.0);
  // -1 - 0j sits on the branch cut and must still report +pi.
  CHECK(principal_arg(std::complex<double>(-1.0, -0.0)) == std::numbers::pi);
}

TEST_CASE("polar reconstruction and conjugation invariance") {
  SplitMix64 rng(1);
  const StftConfig cfg = StftConfig::with_defaults(16, 4);
  ComplexMatrix z(7, cfg.num_bins());
  for (Index i = 0; i < z.size(); ++i) z(i) = {rng.normal(), rng.normal()};
  z(3) = 0.0;
  const Spectrogram x(z, cfg);
  const Spectrogram back = from_polar(magnitude_of(x).data(), phase_of(x), cfg);
  CHECK((back.data() - z).abs().maxCoeff() < 1e-12);
  CHECK(back.data()(3) == std::complex<double>(0.0, 0.0));

  const Spectrogram conj(z.conjugate(), cfg);
  CHECK((magnitude_of(conj).data() == magnitude_of(x).data()).all());
}

TEST_CASE("StftConfig defaults and validation") {
  const StftConfig a = StftConfig::with_defaults(512, 128);
  CHECK(a.fft_size == 512);
  CHECK(a.num_bins() == 257);
  const StftConfig b = StftConfig::with_defaults(200, 80, 8000);
  CHECK(b.fft_size == 256);
  CHECK(StftConfig::from_ms(25, 10, 8000) == b);
  CHECK(StftConfig::from_ms(32, 8, 16000) == a);
  CHECK(a.num_frames(16000) == 1 + 125);
  CHECK(a.num_frames(16001) == 1 + 126);

  StftConfig bad = a;
  bad.hop_length = 600;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = a;
  bad.fft_size = 256;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("spectrogram invariants are enforced") {
  const StftConfig cfg = StftConfig::with_defaults(8, 2);
  CHECK_THROWS_AS(Spectrogram(ComplexMatrix::Zero(3, 4), cfg), Error);
  RealMatrix neg = RealMatrix::Zero(3, 5);
  neg(1, 1) = -1e-3;
  CHECK_THROWS_AS(MagSpectrogram(neg, cfg), Error);
  ComplexMatrix inf = ComplexMatrix::Zero(3, 5);
  inf(0, 0) = {std::numeric_limits<double>::infinity(), 0.0};
  CHECK_THROWS_AS(Spectrogram(inf, cfg), Error);
}
