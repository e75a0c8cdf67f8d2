// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "magphase/compensation.hpp"
#include "magphase/losses.hpp"
#include "magphase/masks.hpp"
#include "magphase/metrics.hpp"
#include "magphase/optim.hpp"
#include "magphase/scenes.hpp"
#include "magphase/stft.hpp"
#include "support/gradient_check.hpp"

using namespace magphase;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

SampleArray random_signal(std::uint64_t seed, Index n) {
  SplitMix64 rng(seed);
  SampleArray x(n);
  for (Index i = 0; i < n; ++i) x[i] = rng.normal();
  return x;
}

SceneSpec noisy_scene(std::uint64_t seed) {
  SceneSpec spec;
  spec.seed = seed;
  spec.duration_s = 1.0;
  spec.sample_rate_hz = 16000;
  spec.interference = InterferenceKind::WhiteNoise;
  spec.level_db = 0.0;
  return spec;
}

Outcome stft_round_trip() {
  double worst = 0.0;
  for (auto [wl, hl] : {std::pair{512, 128}, std::pair{200, 80}}) {
    const StftConfig cfg = StftConfig::with_defaults(wl, hl);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const TimeSignal x(random_signal(1000 + seed, 16000), 16000);
      const TimeSignal back = istft(stft(x, cfg), x.size());
      worst = std::max(worst, (back.samples() - x.samples()).abs().maxCoeff());
    }
  }
  return {worst < 1e-10, fmt("max error %.3e", worst)};
}

Outcome consistency_idempotence() {
  const StftConfig cfg = StftConfig::with_defaults(512, 128);
  const Index len = 16000;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitMix64 rng(2000 + seed);
    ComplexMatrix z(cfg.num_frames(len), cfg.num_bins());
    for (Index i = 0; i < z.size(); ++i) z(i) = {rng.normal(), rng.normal()};
    const Spectrogram once = consistency_project(Spectrogram(z, cfg), len);
    const Spectrogram twice = consistency_project(once, len);
    worst = std::max(worst, (twice.data() - once.data()).abs().maxCoeff());
  }
  return {worst < 1e-10, fmt("max deviation %.3e", worst)};
}

Outcome compensation_oracle() {
  // 100 units: 20 frames x 5 bins, phase error i * pi / 99 at unit i.
  const StftConfig cfg = StftConfig::with_defaults(8, 2);
  const Index frames = 20, bins = cfg.num_bins();
  SplitMix64 rng(3);
  ComplexMatrix s(frames, bins);
  RealMatrix phase(frames, bins);
  for (Index i = 0; i < s.size(); ++i) {
    const double mag = 0.5 + rng.uniform();
    const double angle = EIGEN_PI * (2.0 * rng.uniform() - 1.0);
    s(i) = std::polar(mag, angle);
    phase(i) = angle - static_cast<double>(i) * EIGEN_PI / 99.0;
  }
  OptimizationProblem p{Parameterization::FreeMagnitudeFixedPhase,
                        PhaseSource::Custom,
                        phase,
                        LossKind::make(LossTag::RI, Norm::L2),
                        ProblemTargets{Spectrogram(s, cfg), {}, {}, {}},
                        InitSpec{InitSpec::Kind::Zeros, 0}};
  const OptimizationResult r = optimize(p);
  const RealMatrix& m = std::get<MagSpectrogram>(r.parameters).data();

  double opt_err = 0.0, grid_err = 0.0;
  bool zero_regime_exact = true;
  for (Index i = 0; i < s.size(); ++i) {
    const double delta = static_cast<double>(i) * EIGEN_PI / 99.0;
    const double expected = std::max(0.0, std::abs(s(i)) * std::cos(delta));
    opt_err = std::max(opt_err, std::abs(m(i) - expected));
    if (delta > EIGEN_PI / 2 && m(i) != 0.0) zero_regime_exact = false;

    // Independent oracle: brute-force grid over m in [0, 2|S|].
    const std::complex<double> u = std::polar(1.0, phase(i));
    const double hi = 2.0 * std::abs(s(i));
    double best_m = 0.0, best = kInf;
    for (int k = 0; k <= 40000; ++k) {
      const double cand = hi * k / 40000.0;
      const double d = std::norm(cand * u - s(i));
      if (d < best) best = d, best_m = cand;
    }
    grid_err = std::max(grid_err, std::abs(best_m - m(i)));
  }
  std::ostringstream d;
  d << "optimizer vs closed form " << fmt("%.2e", opt_err) << ", grid " << fmt("%.2e", grid_err)
    << ", zero regime exact " << (zero_regime_exact ? "yes" : "no");
  return {opt_err < 1e-4 && grid_err < 2e-4 && zero_regime_exact, d.str()};
}

Outcome trend_reproduction() {
  int msnr_better = 0, sisdr_worse = 0;
  const LossKind without = LossKind::make(LossTag::RI, Norm::L2);
  const LossKind with = LossKind::make(LossTag::RI_Mag, Norm::L2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene scene = synth_scene(noisy_scene(seed));
    const TrendReport r = run_trend_experiment(scene, without, with);
    msnr_better += r.msnr_improves;
    sisdr_worse += r.si_sdr_degrades;
  }
  std::ostringstream d;
  d << "mSNR with >= without in " << msnr_better << "/10, SI-SDR with <= without in "
    << sisdr_worse << "/10";
  return {msnr_better >= 9 && sisdr_worse >= 9, d.str()};
}

Outcome metric_identities() {
  const StftConfig cfg = StftConfig::with_defaults(512, 128);
  const TimeSignal s(random_signal(50, 16000), 16000);
  const Spectrogram S = stft(s, cfg);
  SplitMix64 rng(51);

  // pSNR closed form.
  ComplexMatrix est = S.data();
  for (Index i = 0; i < est.size(); ++i) est(i) *= std::polar(0.3 + rng.uniform(), rng.normal());
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < est.size(); ++i) {
    const double a2 = std::norm(S.data()(i));
    num += a2;
    den += 2.0 * a2 * (1.0 - std::cos(std::arg(S.data()(i)) - std::arg(est(i))));
  }
  const double psnr_err = std::abs(psnr(Spectrogram(est, cfg), S) - 10.0 * std::log10(num / den));

  const double half = msnr(MagSpectrogram(0.5 * S.data().abs(), cfg), S);
  const double half_err = std::abs(half - 6.0206);

  SampleArray e = s.samples() + 0.3 * random_signal(52, 16000);
  const double base = si_sdr(TimeSignal(e, 16000), s);
  double scale_err = 0.0;
  for (double a : {1e-3, 0.37, 5.0, 1e3}) {
    scale_err = std::max(scale_err, std::abs(si_sdr(TimeSignal(a * e, 16000), s) - base));
  }

  const Scene scene = synth_scene(noisy_scene(77));
  const Spectrogram S2 = stft(scene.target, cfg);
  const Spectrogram Y2 = stft(scene.mixture, cfg);
  const double iam_msnr =
      msnr(oracle_masked_magnitude(MaskKind::IAM, S2, Y2, kMaskEps, {std::nullopt}), S2);

  std::ostringstream d;
  d << "pSNR err " << fmt("%.2e", psnr_err) << " dB, half-scale " << fmt("%.7f", half)
    << " dB, SI-SDR scale err " << fmt("%.2e", scale_err) << " dB, IAM mSNR "
    << format_db(iam_msnr);
  return {psnr_err < 1e-9 && half_err <= 1e-6 && scale_err < 1e-9 && iam_msnr == kInf, d.str()};
}

Outcome mask_ordering() {
  const StftConfig cfg = StftConfig::with_defaults(512, 128);
  int psm_sisdr = 0, iam_msnr = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene scene = synth_scene(noisy_scene(100 + seed));
    const Spectrogram S = stft(scene.target, cfg);
    const Spectrogram Y = stft(scene.mixture, cfg);
    const Index n = scene.target.size();
    const TimeSignal x_iam = apply_mask_resynth(iam(S, Y), Y, n);
    // Truncated PSM, the usual form of the oracle.
    const TimeSignal x_psm = apply_mask_resynth(psm(S, Y, kMaskEps, true), Y, n);
    psm_sisdr += si_sdr(x_psm, scene.target) >= si_sdr(x_iam, scene.target);
    iam_msnr += msnr(stft(x_iam, cfg), S) >= msnr(stft(x_psm, cfg), S);
  }
  std::ostringstream d;
  d << "PSM SI-SDR >= IAM in " << psm_sisdr << "/10, IAM mSNR >= PSM in " << iam_msnr << "/10";
  return {psm_sisdr >= 9 && iam_msnr >= 9, d.str()};
}

Outcome gradient_correctness() {
  double worst = 0.0;
  std::string worst_tag;
  for (LossTag tag : kAllLossTags) {
    for (std::uint64_t point = 0; point < 5; ++point) {
      const testing::TinyProblem prob = testing::make_tiny_problem(7000 + point);
      SplitMix64 rng(8000 + 31 * point + static_cast<std::uint64_t>(tag));
      const Estimate est = testing::random_estimate(tag, prob, rng);
      const auto check = testing::check_gradient(LossKind::make(tag), est, prob.targets());
      if (check.relative_error > worst) worst = check.relative_error, worst_tag = to_string(tag);
    }
  }
  return {worst < 1e-5, "worst relative error " + fmt("%.2e", worst) + " (" + worst_tag + ")"};
}

Outcome msa_equivalence() {
  const StftConfig cfg = StftConfig::with_defaults(16, 4);
  double worst = 0.0;
  bool clamp_ok = true;
  int negative_units = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SplitMix64 rng(9000 + seed);
    ComplexMatrix s(6, cfg.num_bins()), y(6, cfg.num_bins());
    RealMatrix m(6, cfg.num_bins());
    for (Index i = 0; i < s.size(); ++i) {
      s(i) = {rng.normal(), rng.normal()};
      y(i) = {rng.normal(), rng.normal()};
      m(i) = std::abs(rng.normal());
    }
    const Spectrogram S(s, cfg), Y(y, cfg);
    const MagSpectrogram M(m, cfg);
    for (Norm norm : {Norm::L1, Norm::L2}) {
      LossOptions opt;
      opt.norm = norm;
      opt.gradient = false;
      worst = std::max(worst, std::abs(loss_msa(M, S, opt).value -
                                       loss_msa_teacher_forced(M, S, norm)));
    }
    const RealMatrix target = psa_target(S, Y).data();
    const RealMatrix cosd = phase_diff_map(S, Y);
    for (Index i = 0; i < target.size(); ++i) {
      if (cosd(i) < 0.0) {
        ++negative_units;
        clamp_ok = clamp_ok && target(i) == 0.0;
      }
      clamp_ok = clamp_ok && target(i) >= 0.0 && target(i) <= std::abs(s(i));
    }
  }
  std::ostringstream d;
  d << "max |MSA - teacher-forced| " << fmt("%.2e", worst) << ", PSA clamp "
    << (clamp_ok ? "ok" : "violated") << " on " << negative_units << " negative-cos units";
  return {worst < 1e-12 && clamp_ok && negative_units > 0, d.str()};
}

Outcome histogram_fidelity() {
  const StftConfig cfg = StftConfig::with_defaults(512, 128);
  const Scene scene = synth_scene(noisy_scene(321));
  const Spectrogram S = stft(scene.target, cfg);
  const Spectrogram Y = stft(scene.mixture, cfg);

  const Histogram2D comp = histogram2d(compensated_magnitude(S, phase_of(Y)), S, Y);
  long near = 0;
  for (int xi = 0; xi < comp.x_bins(); ++xi) {
    const double xc = 0.5 * (comp.x_edges[xi] + comp.x_edges[xi + 1]);
    const int expected = bin_index(std::max(0.0, xc), 0.0, 2.0, comp.y_bins());
    for (int yi = 0; yi < comp.y_bins(); ++yi) {
      if (std::abs(yi - expected) <= 1) near += comp.counts(yi, xi);
    }
  }
  const double diag = static_cast<double>(near) / static_cast<double>(comp.total());

  const Histogram2D ident = histogram2d(magnitude_of(S), S, Y);
  const int row = bin_index(1.0, 0.0, 2.0, ident.y_bins());
  const double at_one =
      static_cast<double>(ident.counts.row(row).sum()) / static_cast<double>(ident.total());

  std::ostringstream d;
  d << "diagonal mass " << fmt("%.4f", diag) << ", ratio-1 mass " << fmt("%.4f", at_one);
  return {diag >= 0.99 && at_one == 1.0 && comp.total() > 0, d.str()};
}

Outcome pit_exact() {
  const StftConfig cfg = StftConfig::with_defaults(16, 4);
  int mismatches = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SplitMix64 rng(11000 + seed);
    auto random_spec = [&] {
      ComplexMatrix z(5, cfg.num_bins());
      for (Index i = 0; i < z.size(); ++i) z(i) = {rng.normal(), rng.normal()};
      return Spectrogram(z, cfg);
    };
    const Spectrogram t0 = random_spec(), t1 = random_spec();
    const std::array<Estimate, 2> est{random_spec(), random_spec()};
    const std::array<LossTargets, 2> tg{LossTargets{&t0, nullptr, nullptr},
                                        LossTargets{&t1, nullptr, nullptr}};
    const LossKind kind = LossKind::make(seed % 2 ? LossTag::RI : LossTag::RI_Mag);
    const PitResult pit = pit_wrap(kind, est, tg, false);
    auto l = [&](int e, int t) { return evaluate_loss(kind, est[e], tg[t], false).value; };
    const double brute = std::min(l(0, 0) + l(1, 1), l(0, 1) + l(1, 0));
    mismatches += pit.value != brute;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 100 cases"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "STFT round-trip", 5, stft_round_trip},
      {2, "consistency projection idempotence", 5, consistency_idempotence},
      {3, "compensation oracle", 10, compensation_oracle},
      {4, "trend reproduction", 60, trend_reproduction},
      {5, "metric identities", 5, metric_identities},
      {6, "oracle mask ordering", 30, mask_ordering},
      {7, "gradient correctness", 30, gradient_correctness},
      {8, "MSA teacher-forcing equivalence", 2, msa_equivalence},
      {9, "histogram fidelity", 5, histogram_fidelity},
      {10, "PIT wrapper", 2, pit_exact},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = out.pass && in_time;
    failures += !pass;
    std::printf("%s  %2d  %-36s %7.2f s / %g s  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                secs, c.budget_s, out.detail.c_str(), in_time ? "" : " [over time budget]");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
