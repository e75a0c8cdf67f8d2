#include "magphase/optim.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "magphase/metrics.hpp"
#include "magphase/stft.hpp"

namespace magphase {
namespace {

using Flat = Eigen::ArrayXd;

ComplexMatrix unit_or_zero(const ComplexMatrix& z) {
  return z.unaryExpr([](const std::complex<double>& v) {
    const double r = std::abs(v);
    return r > 0.0 ? v / r : std::complex<double>{};
  });
}

/// Maps the flat parameter vector to estimates, losses and gradients.
class Evaluator {
 public:
  explicit Evaluator(const OptimizationProblem& p)
      : problem_(p), targets_(p.targets), config_(p.targets.clean_spec.config()) {
    const Spectrogram& s = targets_.clean_spec;
    frames_ = s.frames();
    bins_ = s.bins();
    if (targets_.clean) {
      out_len_ = targets_.clean->size();
    } else if (targets_.mixture) {
      out_len_ = targets_.mixture->size();
    } else {
      out_len_ = (frames_ - 1) * config_.hop_length;
    }
    if (p.parameterization == Parameterization::FreeMagnitudeFixedPhase) {
      phasor_ = polar_phasor(fixed_phase(p));
    }
    loss_targets_.clean_spec = &targets_.clean_spec;
    loss_targets_.clean = targets_.clean ? &*targets_.clean : nullptr;
    loss_targets_.mixture_spec = targets_.mixture_spec ? &*targets_.mixture_spec : nullptr;
  }

  Index size() const {
    switch (problem_.parameterization) {
      case Parameterization::FreeRI: return 2 * frames_ * bins_;
      case Parameterization::FreeMagnitudeFixedPhase: return frames_ * bins_;
      case Parameterization::FreeWaveform: return out_len_;
    }
    return 0;
  }

  /// Element count used to turn mean-normalized gradients into per-element steps.
  double element_count() const {
    return problem_.parameterization == Parameterization::FreeWaveform
               ? static_cast<double>(out_len_)
               : static_cast<double>(frames_ * bins_);
  }

  bool projects_nonnegative() const {
    return problem_.parameterization == Parameterization::FreeMagnitudeFixedPhase;
  }

  Flat initial() const {
    const InitSpec& init = problem_.init;
    const Spectrogram& s = targets_.clean_spec;
    Flat x = Flat::Zero(size());
    if (init.kind == InitSpec::Kind::Zeros) return x;
    if (init.kind == InitSpec::Kind::Random) {
      SplitMix64 rng(init.seed);
      const double scale = problem_.parameterization == Parameterization::FreeWaveform
                               ? (targets_.clean ? std::sqrt(targets_.clean->samples().square().mean()) : 0.1)
                               : std::sqrt(s.data().abs2().mean());
      for (Index i = 0; i < x.size(); ++i) x[i] = scale * rng.normal();
      if (projects_nonnegative()) x = x.abs();
      return x;
    }
    switch (problem_.parameterization) {
      case Parameterization::FreeRI: return flatten(need_mixture_spec().data());
      case Parameterization::FreeMagnitudeFixedPhase: {
        const RealMatrix m = need_mixture_spec().data().abs();
        return Eigen::Map<const Flat>(m.data(), m.size());
      }
      case Parameterization::FreeWaveform: {
        if (!targets_.mixture) throw Error(ErrorCode::MissingTarget, "mixture init needs y");
        if (targets_.mixture->size() != out_len_) {
          throw Error(ErrorCode::LengthMismatch, "mixture length differs from the output length");
        }
        return targets_.mixture->samples();
      }
    }
    return x;
  }

  void project(Flat& x) const {
    if (projects_nonnegative()) x = x.max(0.0);
  }

  Spectrogram spectrogram(const Flat& x) const {
    switch (problem_.parameterization) {
      case Parameterization::FreeRI: return Spectrogram(unflatten_complex(x), config_);
      case Parameterization::FreeMagnitudeFixedPhase:
        return Spectrogram(magnitude(x).cast<std::complex<double>>() * phasor_, config_);
      case Parameterization::FreeWaveform: return stft(SampleArray(x), config_);
    }
    throw Error(ErrorCode::SpecInvalid, "unknown parameterization");
  }

  SampleArray signal(const Flat& x) const {
    if (problem_.parameterization == Parameterization::FreeWaveform) return x;
    return istft_samples(spectrogram(x).data(), config_, out_len_);
  }

  Estimate estimate(const Flat& x) const {
    switch (domain_of(problem_.loss.tag)) {
      case EstimateDomain::Spectral: return spectrogram(x);
      case EstimateDomain::Magnitude:
        if (problem_.parameterization == Parameterization::FreeMagnitudeFixedPhase) {
          return MagSpectrogram(magnitude(x), config_);
        }
        return magnitude_of(spectrogram(x));
      case EstimateDomain::Waveform:
        return TimeSignal(signal(x), config_.sample_rate_hz);
    }
    throw Error(ErrorCode::SpecInvalid, "unknown loss domain");
  }

  /// Loss at x and its gradient with respect to the flat parameters.
  /// Objective at x under smoothing `eps`, its gradient with respect to the flat
  /// parameters, and the reported loss (smoothing kCharbonnierEps).
  struct Point {
    double objective = 0.0;
    double reported = 0.0;
    double exact = 0.0;
  };
  Point evaluate(const Flat& x, double eps, Flat& grad) const {
    const Estimate est = estimate(x);
    const LossValue lv = evaluate_loss(problem_.loss, est, loss_targets_, true, eps);
    grad = chain(x, lv.gradient);
    if (eps == kCharbonnierEps || problem_.loss.norm == Norm::L2) {
      return {lv.smoothed, lv.smoothed, lv.value};
    }
    const LossValue rep = evaluate_loss(problem_.loss, est, loss_targets_, false);
    return {lv.smoothed, rep.smoothed, rep.value};
  }

  /// Typical residual scale, used to start the L1 smoothing schedule.
  double residual_scale() const {
    double scale = std::sqrt(targets_.clean_spec.data().abs2().mean());
    if (targets_.clean) scale = std::max(scale, std::sqrt(targets_.clean->samples().square().mean()));
    return scale;
  }

 private:
  const Spectrogram& need_mixture_spec() const {
    if (!targets_.mixture_spec) throw Error(ErrorCode::MissingTarget, "mixture init needs Y");
    return *targets_.mixture_spec;
  }

  RealMatrix magnitude(const Flat& x) const {
    return Eigen::Map<const RealMatrix>(x.data(), frames_, bins_);
  }

  static Flat flatten(const ComplexMatrix& z) {
    Flat out(2 * z.size());
    for (Index i = 0; i < z.size(); ++i) {
      out[2 * i] = z(i).real();
      out[2 * i + 1] = z(i).imag();
    }
    return out;
  }

  ComplexMatrix unflatten_complex(const Flat& x) const {
    ComplexMatrix z(frames_, bins_);
    for (Index i = 0; i < z.size(); ++i) z(i) = {x[2 * i], x[2 * i + 1]};
    return z;
  }

  // Gradient with respect to the complex estimate -> flat parameters.
  Flat chain_complex(const Flat& x, const ComplexMatrix& g) const {
    switch (problem_.parameterization) {
      case Parameterization::FreeRI: return flatten(g);
      case Parameterization::FreeMagnitudeFixedPhase: {
        const RealMatrix gm = (g * phasor_.conjugate()).real();
        return Eigen::Map<const Flat>(gm.data(), gm.size());
      }
      case Parameterization::FreeWaveform: return stft_vjp(g, config_, out_len_);
    }
    (void)x;
    return {};
  }

  Flat chain(const Flat& x, const Gradient& g) const {
    if (const auto* gc = std::get_if<ComplexMatrix>(&g)) return chain_complex(x, *gc);
    if (const auto* gm = std::get_if<RealMatrix>(&g)) {
      if (problem_.parameterization == Parameterization::FreeMagnitudeFixedPhase) {
        return Eigen::Map<const Flat>(gm->data(), gm->size());
      }
      const ComplexMatrix gz = gm->cast<std::complex<double>>() * unit_or_zero(spectrogram(x).data());
      return chain_complex(x, gz);
    }
    if (const auto* gs = std::get_if<SampleArray>(&g)) {
      if (problem_.parameterization == Parameterization::FreeWaveform) return *gs;
      return chain_complex(x, istft_vjp(*gs, config_, frames_));
    }
    throw Error(ErrorCode::SpecInvalid, "loss returned no gradient");
  }

  const OptimizationProblem& problem_;
  const ProblemTargets& targets_;
  StftConfig config_;
  Index frames_ = 0;
  Index bins_ = 0;
  Index out_len_ = 0;
  ComplexMatrix phasor_;
  LossTargets loss_targets_;
};

TrajectoryPoint checkpoint(const Evaluator& ev, const OptimizationProblem& p, const Flat& x,
                           int step, double loss) {
  TrajectoryPoint pt;
  pt.step = step;
  pt.loss = loss;
  const Spectrogram spec = ev.spectrogram(x);
  pt.msnr_db = msnr(spec, p.targets.clean_spec);
  pt.psnr_db = psnr(spec, p.targets.clean_spec);
  if (p.targets.clean) {
    const SampleArray est = ev.signal(x);
    if (!(est == 0.0).all() && est.size() == p.targets.clean->size()) {
      pt.si_sdr_db = si_sdr(TimeSignal(est, p.targets.clean->sample_rate()), *p.targets.clean);
    }
  }
  return pt;
}

void require_finite(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::DivergedNaN, "loss became non-finite");
}

}  // namespace

const char* to_string(Parameterization p) noexcept {
  switch (p) {
    case Parameterization::FreeRI: return "free_ri";
    case Parameterization::FreeMagnitudeFixedPhase: return "fixed_phase";
    case Parameterization::FreeWaveform: return "free_waveform";
  }
  return "?";
}

const char* to_string(PhaseSource p) noexcept {
  switch (p) {
    case PhaseSource::Mixture: return "mixture";
    case PhaseSource::Oracle: return "oracle";
    case PhaseSource::Custom: return "custom";
  }
  return "?";
}

ProblemTargets targets_from_scene(const Scene& scene, const StftConfig& config) {
  return ProblemTargets{stft(scene.target, config), scene.target, stft(scene.mixture, config),
                        scene.mixture};
}

void OptimizationProblem::validate() const {
  loss.validate();
  if (steps < 1) throw Error(ErrorCode::SpecInvalid, "steps must be >= 1");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw Error(ErrorCode::SpecInvalid, "step size must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorCode::SpecInvalid, "momentum must lie in [0, 1)");
  }
  if (!(targets.clean_spec.data().abs2().sum() > 0.0)) {
    throw Error(ErrorCode::SilentReference, "clean spectrogram is silent");
  }
  const Index frames = targets.clean_spec.frames();
  if (targets.mixture_spec) require_same_shape(*targets.mixture_spec, targets.clean_spec, "problem");
  for (const auto* sig : {targets.clean ? &*targets.clean : nullptr,
                          targets.mixture ? &*targets.mixture : nullptr}) {
    if (sig && targets.clean_spec.config().num_frames(sig->size()) != frames) {
      throw Error(ErrorCode::ShapeMismatch, "signal length does not match the spectrogram frames");
    }
  }
  if (parameterization == Parameterization::FreeMagnitudeFixedPhase) (void)fixed_phase(*this);
  if (parameterization == Parameterization::FreeWaveform && !targets.clean && !targets.mixture) {
    // The waveform length would be guessed from the frame count; fine for consistency, but
    // metrics and waveform losses need s.
  }
  const LossTag tag = loss.tag;
  const bool needs_s = (tag == LossTag::RI_iSTFT || tag == LossTag::RI_iSTFT_Mag ||
                        tag == LossTag::Mag_RI_iSTFT || tag == LossTag::Wav ||
                        tag == LossTag::Wav_Mag) && loss.time_weight != 0.0;
  if (needs_s && !targets.clean) throw Error(ErrorCode::MissingTarget, "loss needs s");
  if (tag == LossTag::PSA && !targets.mixture_spec) {
    throw Error(ErrorCode::MissingTarget, "PSA needs Y");
  }
  if (init.kind == InitSpec::Kind::Mixture) {
    const bool have = parameterization == Parameterization::FreeWaveform
                          ? targets.mixture.has_value()
                          : targets.mixture_spec.has_value();
    if (!have) throw Error(ErrorCode::MissingTarget, "mixture initialization needs the mixture");
  }
}

RealMatrix fixed_phase(const OptimizationProblem& p) {
  switch (p.phase_source) {
    case PhaseSource::Oracle: return phase_of(p.targets.clean_spec);
    case PhaseSource::Mixture:
      if (!p.targets.mixture_spec) throw Error(ErrorCode::MissingTarget, "mixture phase needs Y");
      return phase_of(*p.targets.mixture_spec);
    case PhaseSource::Custom:
      if (!p.custom_phase) throw Error(ErrorCode::MissingTarget, "custom phase not supplied");
      if (p.custom_phase->rows() != p.targets.clean_spec.frames() ||
          p.custom_phase->cols() != p.targets.clean_spec.bins()) {
        throw Error(ErrorCode::ShapeMismatch, "custom phase shape differs from S");
      }
      return *p.custom_phase;
  }
  throw Error(ErrorCode::SpecInvalid, "unknown phase source");
}

OptimizationResult optimize(const OptimizationProblem& problem) {
  problem.validate();
  const Evaluator ev(problem);
  const double n = ev.element_count();
  const int every = std::max(1, problem.steps / 100);

  // L1 losses are descended through a decreasing sequence of Charbonnier epsilons
  // ending at kCharbonnierEps; a single global step cannot resolve both large and
  // near-zero residuals of an almost non-smooth objective.
  std::vector<double> schedule;
  if (problem.loss.norm == Norm::L1) {
    for (double eps = ev.residual_scale(); eps > 10.0 * kCharbonnierEps; eps /= 10.0) {
      schedule.push_back(eps);
    }
  }
  schedule.push_back(kCharbonnierEps);
  const int stage_cap = std::max(1, problem.steps / (2 * static_cast<int>(schedule.size())));

  Flat x = ev.initial();
  ev.project(x);
  std::size_t stage = 0;
  int stage_steps = 0;
  Flat grad;
  Evaluator::Point current = ev.evaluate(x, schedule[stage], grad);
  require_finite(current.objective);

  TrajectoryRecord record;
  record.points.push_back(checkpoint(ev, problem, x, 0, current.reported));

  Flat velocity = Flat::Zero(x.size());
  double eta = problem.step_size;
  Flat cand_grad;
  // Accepts a candidate only if it lowers the stage objective without raising the
  // reported loss, which keeps the recorded trajectory monotone.
  auto improves = [&](const Evaluator::Point& c, double margin) {
    return c.objective < current.objective && c.objective <= current.objective - margin &&
           c.reported <= current.reported;
  };
  auto next_stage = [&] {
    if (stage + 1 >= schedule.size()) return false;
    ++stage;
    stage_steps = 0;
    eta = problem.step_size;
    velocity.setZero();
    current = ev.evaluate(x, schedule[stage], grad);
    return true;
  };

  for (int step = 1; step <= problem.steps; ++step) {
    if (stage + 1 < schedule.size() && stage_steps >= stage_cap) next_stage();
    ++stage_steps;
    const double eps = schedule[stage];
    const Flat g = n * grad;
    velocity = problem.momentum * velocity - eta * g;
    Flat cand = x + velocity;
    ev.project(cand);
    Evaluator::Point next = ev.evaluate(cand, eps, cand_grad);

    if (!improves(next, 0.0)) {
      // Momentum step rejected: plain projected gradient step with backtracking.
      velocity.setZero();
      bool accepted = false;
      for (int halving = 0; halving < 60; ++halving) {
        cand = x - eta * g;
        ev.project(cand);
        next = ev.evaluate(cand, eps, cand_grad);
        if (improves(next, 1e-4 * (grad * (x - cand)).sum())) {
          accepted = true;
          break;
        }
        eta *= 0.5;
      }
      if (!accepted) {
        // No step lowers this objective at working precision.
        if (next_stage()) continue;
        record.points.push_back(checkpoint(ev, problem, x, step, current.reported));
        break;
      }
    }
    require_finite(next.objective);
    x = std::move(cand);
    current = next;
    std::swap(grad, cand_grad);

    if (step % every == 0 || step == problem.steps) {
      record.points.push_back(checkpoint(ev, problem, x, step, current.reported));
    }
  }

  Spectrogram spec = ev.spectrogram(x);
  std::optional<TimeSignal> signal;
  {
    SampleArray s = ev.signal(x);
    const int rate = problem.targets.clean_spec.config().sample_rate_hz;
    if (s.size() > 0) signal = TimeSignal(std::move(s), rate);
  }
  Estimate params = [&]() -> Estimate {
    switch (problem.parameterization) {
      case Parameterization::FreeRI: return spec;
      case Parameterization::FreeMagnitudeFixedPhase:
        return MagSpectrogram(Eigen::Map<const RealMatrix>(x.data(), spec.frames(), spec.bins()),
                              spec.config());
      case Parameterization::FreeWaveform:
        return TimeSignal(SampleArray(x), spec.config().sample_rate_hz);
    }
    return spec;
  }();
  return OptimizationResult{std::move(params), std::move(spec), std::move(signal),
                            std::move(record), current.exact, eta};
}

std::string TrajectoryRecord::to_csv() const {
  std::ostringstream out;
  out << "step,loss,si_sdr_db,msnr_db,psnr_db\n";
  out.precision(12);
  for (const auto& p : points) {
    out << p.step << ',' << p.loss << ',' << (p.si_sdr_db ? format_db(*p.si_sdr_db) : "") << ','
        << format_db(p.msnr_db) << ',' << format_db(p.psnr_db) << '\n';
  }
  return out.str();
}

TrendReport run_trend_experiment(const Scene& scene, const LossKind& without_mag,
                                 const LossKind& with_mag, const TrendConfig& config) {
  const ProblemTargets targets = targets_from_scene(scene, config.stft);
  auto run = [&](const LossKind& loss, const char* label) {
    OptimizationProblem p{config.parameterization, config.phase_source, std::nullopt, loss,
                          targets, config.init, config.steps, config.step_size, config.momentum};
    const OptimizationResult r = optimize(p);
    TrendRow row;
    row.label = label;
    row.loss = loss;
    row.final_loss = r.final_loss;
    row.msnr_db = msnr(r.estimate_spec, targets.clean_spec);
    row.psnr_db = psnr(r.estimate_spec, targets.clean_spec);
    const SampleArray resynth = istft_samples(r.estimate_spec.data(), config.stft, scene.target.size());
    row.msnr_resynth_db = msnr(stft(resynth, config.stft), targets.clean_spec);
    if (!(resynth == 0.0).all()) {
      row.si_sdr_db = si_sdr(TimeSignal(resynth, scene.target.sample_rate()), scene.target);
    }
    return row;
  };
  TrendReport report;
  report.without_mag = run(without_mag, "without_mag");
  report.with_mag = run(with_mag, "with_mag");
  report.msnr_improves = report.with_mag.msnr_db >= report.without_mag.msnr_db;
  const double inf = std::numeric_limits<double>::infinity();
  report.si_sdr_degrades = report.with_mag.si_sdr_db.value_or(-inf) <=
                           report.without_mag.si_sdr_db.value_or(-inf);
  return report;
}

std::string TrendReport::to_csv() const {
  std::ostringstream out;
  out << "label,loss,norm,final_loss,si_sdr_db,msnr_db,msnr_resynth_db,psnr_db\n";
  out.precision(12);
  for (const TrendRow* r : {&without_mag, &with_mag}) {
    out << r->label << ',' << to_string(r->loss.tag) << ','
        << (r->loss.norm == Norm::L1 ? "L1" : "L2") << ',' << r->final_loss << ','
        << (r->si_sdr_db ? format_db(*r->si_sdr_db) : "") << ',' << format_db(r->msnr_db) << ','
        << format_db(r->msnr_resynth_db) << ',' << format_db(r->psnr_db) << '\n';
  }
  return out.str();
}

}  // namespace magphase
