#include <doctest.h>

#include <numbers>

#include "magphase/compensation.hpp"
#include "magphase/scenes.hpp"
#include "magphase/stft.hpp"

using namespace magphase;

namespace {

double grid_argmin(std::complex<double> s, double phase, Norm norm) {
  const std::complex<double> u = std::polar(1.0, phase);
  const double hi = 2.0 * std::abs(s), step = std::abs(s) * 1e-4;
  double best = 0.0, best_cost = std::numeric_limits<double>::infinity();
  for (double m = 0.0; m <= hi; m += step) {
    const std::complex<double> d = m * u - s;
    const double cost = norm == Norm::L2 ? std::norm(d) : std::abs(d.real()) + std::abs(d.imag());
    if (cost < best_cost) best_cost = cost, best = m;
  }
  return best;
}

}  // namespace

TEST_CASE("closed-form compensated magnitude") {
  const std::complex<double> s = std::polar(1.0, 0.4);
  CHECK(optimal_magnitude_along_phase(s, 0.4 - std::numbers::pi / 3, Norm::L2) == doctest::Approx(0.5));
  CHECK(optimal_magnitude_along_phase(s, 0.4 - 2 * std::numbers::pi / 3, Norm::L2) == 0.0);
  CHECK(optimal_magnitude_along_phase(s, 0.4 - 2 * std::numbers::pi / 3, Norm::L2, false) ==
        doctest::Approx(-0.5));
  CHECK(optimal_magnitude_along_phase(s, 0.4, Norm::L2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(grid_argmin(s, 0.4 - std::numbers::pi / 3, Norm::L2) == doctest::Approx(0.5).epsilon(2e-4));
}

TEST_CASE("L2 optimum agrees with grid search on random units") {
  SplitMix64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const std::complex<double> s = std::polar(0.1 + 3 * rng.uniform(), 6.28 * rng.uniform());
    const double phase = 6.28 * rng.uniform();
    const double tol = 2e-4 * std::abs(s);
    CHECK(std::abs(optimal_magnitude_along_phase(s, phase, Norm::L2) -
                   grid_argmin(s, phase, Norm::L2)) <= tol);
  }
}

TEST_CASE("L1 optimum attains the grid minimum") {
  SplitMix64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const std::complex<double> s = std::polar(0.1 + 3 * rng.uniform(), 6.28 * rng.uniform());
    const double phase = 6.28 * rng.uniform();
    const std::complex<double> u = std::polar(1.0, phase);
    auto cost = [&](double m) {
      const auto d = m * u - s;
      return std::abs(d.real()) + std::abs(d.imag());
    };
    const double m = optimal_magnitude_along_phase(s, phase, Norm::L1);
    CHECK(cost(m) <= cost(grid_argmin(s, phase, Norm::L1)) + 1e-9);
  }
}

TEST_CASE("L2 optimum shrinks monotonically with the phase error") {
  const std::complex<double> s = std::polar(2.0, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 100; ++k) {
    const double delta = std::numbers::pi * k / 100.0;
    const double m = optimal_magnitude_along_phase(s, 1.0 - delta, Norm::L2);
    CHECK(m <= prev + 1e-15);
    if (k > 0) CHECK(m < 2.0);
    prev = m;
  }
}

TEST_CASE("phase_diff_map") {
  const StftConfig cfg = StftConfig::with_defaults(4, 2);
  ComplexMatrix s(1, 3), y(1, 3);
  s << std::complex<double>(1, 0), std::complex<double>(0.5, 0.5), std::complex<double>(-2, 1);
  y << std::complex<double>(0, 1), std::complex<double>(0.5, 0.5), std::complex<double>(2, -1);
  const RealMatrix c = phase_diff_map(Spectrogram(s, cfg), Spectrogram(y, cfg));
  CHECK(c(0, 0) == doctest::Approx(0.0));
  CHECK(c(0, 1) == doctest::Approx(1.0));
  CHECK(c(0, 2) == doctest::Approx(-1.0));
}

TEST_CASE("histogram") {
  CHECK(bin_index(1.0, 0.0, 2.0, 50) == 25);
  CHECK(bin_index(2.0, 0.0, 2.0, 50) == 49);
  CHECK(bin_index(-1.0, -1.0, 1.0, 50) == 0);
  CHECK(bin_index(-5.0, -1.0, 1.0, 50) == 0);

  const StftConfig cfg = StftConfig::with_defaults(256, 64);
  SceneSpec spec;
  spec.seed = 9;
  const Scene scene = synth_scene(spec);
  const Spectrogram S = stft(scene.target, cfg), Y = stft(scene.mixture, cfg);

  const Histogram2D h = histogram2d(magnitude_of(S), S, Y);
  CHECK(h.x_bins() == 50);
  CHECK(h.y_bins() == 50);
  CHECK(h.x_edges[0] == -1.0);
  CHECK(h.y_edges[50] == 2.0);
  CHECK(h.counts.row(25).sum() == h.total());

  // Retained units are those within 60 dB of the strongest one.
  const RealMatrix e = S.data().abs2();
  const double floor = e.maxCoeff() * 1e-6;
  CHECK(h.total() == (e >= floor && e > 0.0).count());

  const Histogram2D top = histogram2d(MagSpectrogram(3.0 * S.data().abs(), cfg), S, Y);
  CHECK(top.counts.row(49).sum() == top.total());

  const Histogram2D loose = histogram2d(magnitude_of(S), S, Y, 200.0);
  CHECK(loose.total() >= h.total());

  const std::string csv = to_csv(h);
  CHECK(csv.rfind("x_center,y_center,count\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 50 * 50);
  const std::string pgm = to_pgm(h);
  CHECK(pgm.rfind("P5\n50 50\n255\n", 0) == 0);
  CHECK(pgm.size() == std::string("P5\n50 50\n255\n").size() + 2500);
}
