#include "gradient_check.hpp"

#include "magphase/stft.hpp"

namespace magphase::testing {

Flat central_difference(const std::function<double(const Flat&)>& f, const Flat& x, double h) {
  Flat g(x.size());
  Flat probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const Flat& a, const Flat& b) {
  const double denom = b.matrix().norm();
  const double diff = (a - b).matrix().norm();
  return denom > 0.0 ? diff / denom : diff;
}

StftConfig tiny_config() { return StftConfig::with_defaults(16, 4); }

namespace {

double away_from_zero(SplitMix64& rng) {
  const double mag = 0.1 + 0.9 * rng.uniform();
  return rng.uniform() < 0.5 ? -mag : mag;
}

}  // namespace

TinyProblem make_tiny_problem(std::uint64_t seed, const StftConfig& config, Index length) {
  SplitMix64 rng(seed);
  SampleArray s(length), y(length);
  for (Index n = 0; n < length; ++n) {
    s[n] = rng.normal();
    y[n] = s[n] + 0.7 * rng.normal();
  }
  TimeSignal clean(s, config.sample_rate_hz);
  return {clean, stft(clean, config), stft(y, config)};
}

Estimate random_estimate(LossTag tag, const TinyProblem& problem, SplitMix64& rng) {
  const StftConfig& cfg = problem.clean_spec.config();
  const Index frames = problem.clean_spec.frames();
  const Index bins = problem.clean_spec.bins();
  switch (domain_of(tag)) {
    case EstimateDomain::Spectral: {
      ComplexMatrix z(frames, bins);
      for (Index i = 0; i < z.size(); ++i) z(i) = {away_from_zero(rng), away_from_zero(rng)};
      return Spectrogram(z, cfg);
    }
    case EstimateDomain::Magnitude: {
      RealMatrix m(frames, bins);
      for (Index i = 0; i < m.size(); ++i) m(i) = std::abs(away_from_zero(rng));
      return MagSpectrogram(m, cfg);
    }
    case EstimateDomain::Waveform: {
      SampleArray x(problem.clean.size());
      for (Index i = 0; i < x.size(); ++i) x[i] = away_from_zero(rng);
      return TimeSignal(x, cfg.sample_rate_hz);
    }
  }
  throw Error(ErrorCode::SpecInvalid, "unknown domain");
}

namespace {

Flat flatten_complex(const ComplexMatrix& z) {
  Flat out(2 * z.size());
  for (Index i = 0; i < z.size(); ++i) {
    out[2 * i] = z(i).real();
    out[2 * i + 1] = z(i).imag();
  }
  return out;
}

}  // namespace

Flat flatten(const Estimate& est) {
  if (const auto* s = std::get_if<Spectrogram>(&est)) return flatten_complex(s->data());
  if (const auto* m = std::get_if<MagSpectrogram>(&est)) {
    return Eigen::Map<const Flat>(m->data().data(), m->data().size());
  }
  return std::get<TimeSignal>(est).samples();
}

Estimate unflatten(const Flat& x, const Estimate& like) {
  if (const auto* s = std::get_if<Spectrogram>(&like)) {
    ComplexMatrix z(s->frames(), s->bins());
    for (Index i = 0; i < z.size(); ++i) z(i) = {x[2 * i], x[2 * i + 1]};
    return Spectrogram(z, s->config());
  }
  if (const auto* m = std::get_if<MagSpectrogram>(&like)) {
    return MagSpectrogram(Eigen::Map<const RealMatrix>(x.data(), m->frames(), m->bins()),
                          m->config());
  }
  return TimeSignal(x, std::get<TimeSignal>(like).sample_rate());
}

Flat flatten_gradient(const Gradient& g) {
  if (const auto* z = std::get_if<ComplexMatrix>(&g)) return flatten_complex(*z);
  if (const auto* m = std::get_if<RealMatrix>(&g)) return Eigen::Map<const Flat>(m->data(), m->size());
  if (const auto* s = std::get_if<SampleArray>(&g)) return *s;
  return {};
}

GradientCheck check_gradient(const LossKind& kind, const Estimate& est, const LossTargets& targets) {
  const LossValue lv = evaluate_loss(kind, est, targets, true);
  const Flat analytic = flatten_gradient(lv.gradient);
  const Flat x = flatten(est);
  const Flat numeric = central_difference(
      [&](const Flat& p) { return evaluate_loss(kind, unflatten(p, est), targets, false).smoothed; },
      x);
  return {relative_error(analytic, numeric), analytic.matrix().norm()};
}

}  // namespace magphase::testing
