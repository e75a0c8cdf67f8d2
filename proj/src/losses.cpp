#include "magphase/losses.hpp"

#include <cmath>
#include <string>

#include "magphase/masks.hpp"
#include "magphase/stft.hpp"

namespace magphase {
namespace {

struct Penalty {
  Norm norm;
  double eps = kCharbonnierEps;

  double exact(double d) const { return norm == Norm::L1 ? std::abs(d) : d * d; }
  double smooth(double d) const {
    return norm == Norm::L1
               ? std::sqrt(d * d + eps * eps) - eps
               : d * d;
  }
  double slope(double d) const {
    return norm == Norm::L1 ? d / std::sqrt(d * d + eps * eps)
                            : 2.0 * d;
  }
};

struct Accum {
  double value = 0.0;
  double smoothed = 0.0;
};

// Each term adds weight * mean(penalty(residual)) to `acc` and returns its gradient.

ComplexMatrix ri_term(const ComplexMatrix& est, const ComplexMatrix& ref, Penalty p,
                      double weight, Accum& acc, bool grad) {
  const double scale = weight / static_cast<double>(est.size());
  ComplexMatrix g;
  if (grad) g.resize(est.rows(), est.cols());
  double value = 0.0, smoothed = 0.0;
  for (Index i = 0; i < est.size(); ++i) {
    const std::complex<double> d = est(i) - ref(i);
    value += p.exact(d.real()) + p.exact(d.imag());
    smoothed += p.smooth(d.real()) + p.smooth(d.imag());
    if (grad) g(i) = scale * std::complex<double>(p.slope(d.real()), p.slope(d.imag()));
  }
  acc.value += scale * value;
  acc.smoothed += scale * smoothed;
  return g;
}

// | |Z| - A | with d|Z|/dZ = Z / |Z|, taken as 0 at Z = 0.
ComplexMatrix mag_term(const ComplexMatrix& est, const RealMatrix& ref_mag, Penalty p,
                       double weight, Accum& acc, bool grad) {
  const double scale = weight / static_cast<double>(est.size());
  ComplexMatrix g;
  if (grad) g.resize(est.rows(), est.cols());
  double value = 0.0, smoothed = 0.0;
  for (Index i = 0; i < est.size(); ++i) {
    const double r = std::abs(est(i));
    const double d = r - ref_mag(i);
    value += p.exact(d);
    smoothed += p.smooth(d);
    if (grad) g(i) = r > 0.0 ? scale * p.slope(d) * est(i) / r : std::complex<double>{};
  }
  acc.value += scale * value;
  acc.smoothed += scale * smoothed;
  return g;
}

template <typename Array>
Array real_term(const Array& est, const Array& ref, Penalty p, double weight, Accum& acc,
                bool grad) {
  const double scale = weight / static_cast<double>(est.size());
  Array g;
  if (grad) g.resize(est.rows(), est.cols());
  double value = 0.0, smoothed = 0.0;
  for (Index i = 0; i < est.size(); ++i) {
    const double d = est(i) - ref(i);
    value += p.exact(d);
    smoothed += p.smooth(d);
    if (grad) g(i) = scale * p.slope(d);
  }
  acc.value += scale * value;
  acc.smoothed += scale * smoothed;
  return g;
}

LossValue finish(const Accum& acc, Gradient g) { return {acc.value, acc.smoothed, std::move(g)}; }

void require_same_config(const StftConfig& a, const StftConfig& b, const char* where) {
  if (!(a == b)) throw Error(ErrorCode::ShapeMismatch, std::string(where) + ": STFT configs differ");
}

void require_same_length(Index a, Index b, const char* where) {
  if (a != b) {
    throw Error(ErrorCode::LengthMismatch, std::string(where) + ": " + std::to_string(a) +
                                               " vs " + std::to_string(b) + " samples");
  }
}

// Shared path for the losses that go through istft(S^). `clean` may be null when the
// time weight is zero.
LossValue istft_family(const Spectrogram& est, const SampleArray* clean, Index out_len,
                       const Spectrogram* clean_spec, bool mag_before_istft,
                       bool mag_after_istft, const LossOptions& opt, const char* where) {
  const StftConfig& cfg = est.config();
  if (est.config().num_frames(out_len) != est.frames()) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(where) + ": estimate frames do not match the output length");
  }
  if (clean_spec) {
    require_same_shape(est, *clean_spec, where);
    require_same_config(cfg, clean_spec->config(), where);
  }
  const Penalty p{opt.norm, opt.smoothing};
  Accum acc;
  const SampleArray x = istft_samples(est.data(), cfg, out_len);

  SampleArray gx = SampleArray::Zero(out_len);
  if (opt.time_weight != 0.0) {
    if (!clean) throw Error(ErrorCode::MissingTarget, std::string(where) + ": needs clean signal");
    require_same_length(clean->size(), out_len, where);
    gx = real_term(x, *clean, p, opt.time_weight, acc, opt.gradient);
  }
  if (mag_after_istft) {
    const Spectrogram projected = stft(x, cfg);
    const ComplexMatrix gproj = mag_term(projected.data(), clean_spec->data().abs(), p,
                                         opt.mag_weight, acc, opt.gradient);
    if (opt.gradient) gx += stft_vjp(gproj, cfg, out_len);
  }
  ComplexMatrix g;
  if (opt.gradient) g = istft_vjp(gx, cfg, est.frames());
  if (mag_before_istft) {
    const ComplexMatrix gm =
        mag_term(est.data(), clean_spec->data().abs(), p, opt.mag_weight, acc, opt.gradient);
    if (opt.gradient) g += gm;
  }
  return finish(acc, opt.gradient ? Gradient(std::move(g)) : Gradient{});
}

LossValue wav_family(const TimeSignal& est, const TimeSignal* clean,
                     const Spectrogram* clean_spec, const LossOptions& opt, const char* where) {
  const Penalty p{opt.norm, opt.smoothing};
  Accum acc;
  SampleArray g = SampleArray::Zero(est.size());
  if (opt.time_weight != 0.0) {
    if (!clean) throw Error(ErrorCode::MissingTarget, std::string(where) + ": needs clean signal");
    require_same_length(est.size(), clean->size(), where);
    g = real_term(est.samples(), clean->samples(), p, opt.time_weight, acc, opt.gradient);
  }
  if (clean_spec) {
    const Spectrogram x = stft(est.samples(), clean_spec->config());
    require_same_shape(x, *clean_spec, where);
    const ComplexMatrix gx =
        mag_term(x.data(), clean_spec->data().abs(), p, opt.mag_weight, acc, opt.gradient);
    if (opt.gradient) g += stft_vjp(gx, clean_spec->config(), est.size());
  }
  return finish(acc, opt.gradient ? Gradient(std::move(g)) : Gradient{});
}

const Spectrogram& need(const Spectrogram* p, const char* what) {
  if (!p) throw Error(ErrorCode::MissingTarget, std::string("loss needs ") + what);
  return *p;
}

const TimeSignal& need(const TimeSignal* p, const char* what) {
  if (!p) throw Error(ErrorCode::MissingTarget, std::string("loss needs ") + what);
  return *p;
}

template <typename T>
const T& estimate_as(const Estimate& est, LossTag tag) {
  if (const T* v = std::get_if<T>(&est)) return *v;
  throw Error(ErrorCode::ShapeMismatch,
              std::string("estimate has the wrong domain for loss ") + to_string(tag));
}

}  // namespace

const char* to_string(LossTag tag) noexcept {
  switch (tag) {
    case LossTag::RI: return "RI";
    case LossTag::RI_Mag: return "RI+Mag";
    case LossTag::RI_iSTFT: return "RI-iSTFT";
    case LossTag::RI_iSTFT_Mag: return "RI-iSTFT+Mag";
    case LossTag::Mag_RI_iSTFT: return "Mag+RI-iSTFT";
    case LossTag::RIiSTFTx0_Mag: return "(RI-iSTFT)x0+Mag";
    case LossTag::Wav: return "Wav";
    case LossTag::Wav_Mag: return "Wav+Mag";
    case LossTag::Wavx0_Mag: return "Wavx0+Mag";
    case LossTag::MSA: return "MSA";
    case LossTag::PSA: return "PSA";
    case LossTag::Phase: return "Phase";
  }
  return "?";
}

std::optional<LossTag> parse_loss_tag(std::string_view name) {
  for (LossTag tag : kAllLossTags) {
    if (name == to_string(tag)) return tag;
  }
  // Identifier-style aliases, e.g. "RI_iSTFT_Mag".
  static constexpr std::pair<std::string_view, LossTag> aliases[] = {
      {"RI_Mag", LossTag::RI_Mag},           {"RI_iSTFT", LossTag::RI_iSTFT},
      {"RI_iSTFT_Mag", LossTag::RI_iSTFT_Mag}, {"Mag_RI_iSTFT", LossTag::Mag_RI_iSTFT},
      {"RIiSTFTx0_Mag", LossTag::RIiSTFTx0_Mag}, {"Wav_Mag", LossTag::Wav_Mag},
      {"Wavx0_Mag", LossTag::Wavx0_Mag}};
  for (const auto& [alias, tag] : aliases) {
    if (name == alias) return tag;
  }
  return std::nullopt;
}

EstimateDomain domain_of(LossTag tag) noexcept {
  switch (tag) {
    case LossTag::Wav:
    case LossTag::Wav_Mag:
    case LossTag::Wavx0_Mag: return EstimateDomain::Waveform;
    case LossTag::MSA:
    case LossTag::PSA: return EstimateDomain::Magnitude;
    default: return EstimateDomain::Spectral;
  }
}

LossKind LossKind::make(LossTag tag, Norm norm) {
  LossKind kind;
  kind.tag = tag;
  kind.norm = norm;
  if (tag == LossTag::RIiSTFTx0_Mag || tag == LossTag::Wavx0_Mag) kind.time_weight = 0.0;
  return kind;
}

void LossKind::validate() const {
  if (!std::isfinite(time_weight) || !std::isfinite(mag_weight) || time_weight < 0.0 ||
      mag_weight < 0.0) {
    throw Error(ErrorCode::SpecInvalid, "loss weights must be finite and nonnegative");
  }
  if ((tag == LossTag::RIiSTFTx0_Mag || tag == LossTag::Wavx0_Mag) && time_weight != 0.0) {
    throw Error(ErrorCode::SpecInvalid, "x0 loss variants require time_weight = 0");
  }
}

LossValue loss_ri(const Spectrogram& est, const Spectrogram& clean, const LossOptions& opt) {
  require_same_shape(est, clean, "loss_ri");
  Accum acc;
  const Penalty p{opt.norm, opt.smoothing};
  ComplexMatrix g = ri_term(est.data(), clean.data(), p, opt.time_weight, acc, opt.gradient);
  return finish(acc, opt.gradient ? Gradient(std::move(g)) : Gradient{});
}

LossValue loss_ri_mag(const Spectrogram& est, const Spectrogram& clean, const LossOptions& opt) {
  require_same_shape(est, clean, "loss_ri_mag");
  const Penalty p{opt.norm, opt.smoothing};
  Accum acc;
  ComplexMatrix g = ri_term(est.data(), clean.data(), p, opt.time_weight, acc, opt.gradient);
  const ComplexMatrix gm =
      mag_term(est.data(), clean.data().abs(), p, opt.mag_weight, acc, opt.gradient);
  if (opt.gradient) g += gm;
  return finish(acc, opt.gradient ? Gradient(std::move(g)) : Gradient{});
}

LossValue loss_ri_istft(const Spectrogram& est, const TimeSignal& clean, const LossOptions& opt) {
  return istft_family(est, &clean.samples(), clean.size(), nullptr, false, false, opt,
                      "loss_ri_istft");
}

LossValue loss_ri_istft_mag(const Spectrogram& est, const TimeSignal& clean,
                            const Spectrogram& clean_spec, const LossOptions& opt) {
  return istft_family(est, &clean.samples(), clean.size(), &clean_spec, false, true, opt,
                      "loss_ri_istft_mag");
}

LossValue loss_mag_ri_istft(const Spectrogram& est, const TimeSignal& clean,
                            const Spectrogram& clean_spec, const LossOptions& opt) {
  return istft_family(est, &clean.samples(), clean.size(), &clean_spec, true, false, opt,
                      "loss_mag_ri_istft");
}

LossValue loss_ri_istft_x0_mag(const Spectrogram& est, Index out_len,
                               const Spectrogram& clean_spec, const LossOptions& opt) {
  LossOptions o = opt;
  o.time_weight = 0.0;
  return istft_family(est, nullptr, out_len, &clean_spec, false, true, o,
                      "loss_ri_istft_x0_mag");
}

LossValue loss_wav(const TimeSignal& est, const TimeSignal& clean, const LossOptions& opt) {
  return wav_family(est, &clean, nullptr, opt, "loss_wav");
}

LossValue loss_wav_mag(const TimeSignal& est, const TimeSignal& clean,
                       const Spectrogram& clean_spec, const LossOptions& opt) {
  return wav_family(est, &clean, &clean_spec, opt, "loss_wav_mag");
}

LossValue loss_wav_x0_mag(const TimeSignal& est, const Spectrogram& clean_spec,
                          const LossOptions& opt) {
  LossOptions o = opt;
  o.time_weight = 0.0;
  return wav_family(est, nullptr, &clean_spec, o, "loss_wav_x0_mag");
}

LossValue loss_msa(const MagSpectrogram& est, const Spectrogram& clean, const LossOptions& opt) {
  require_same_shape(est, clean, "loss_msa");
  Accum acc;
  const Penalty p{opt.norm, opt.smoothing};
  RealMatrix g =
      real_term(est.data(), RealMatrix(clean.data().abs()), p, 1.0, acc, opt.gradient);
  return finish(acc, opt.gradient ? Gradient(std::move(g)) : Gradient{});
}

double loss_msa_teacher_forced(const MagSpectrogram& est, const Spectrogram& clean, Norm norm) {
  require_same_shape(est, clean, "loss_msa_teacher_forced");
  const ComplexMatrix oracle_phase = polar_phasor(phase(clean.data()));
  const ComplexMatrix diff = est.data().cast<std::complex<double>>() * oracle_phase -
                             clean.data().abs().cast<std::complex<double>>() * oracle_phase;
  const RealMatrix modulus = diff.abs();
  const double total = norm == Norm::L1 ? modulus.sum() : modulus.square().sum();
  return total / static_cast<double>(diff.size());
}

LossValue loss_psa(const MagSpectrogram& est, const Spectrogram& clean,
                   const Spectrogram& mixture, const LossOptions& opt) {
  require_same_shape(est, clean, "loss_psa");
  const MagSpectrogram target = psa_target(clean, mixture);
  Accum acc;
  const Penalty p{opt.norm, opt.smoothing};
  RealMatrix g = real_term(est.data(), target.data(), p, 1.0, acc, opt.gradient);
  return finish(acc, opt.gradient ? Gradient(std::move(g)) : Gradient{});
}

LossValue loss_phase(const Spectrogram& est, const Spectrogram& clean, const LossOptions& opt) {
  require_same_shape(est, clean, "loss_phase");
  const Penalty p{opt.norm, opt.smoothing};
  const double scale = 1.0 / static_cast<double>(est.data().size());
  ComplexMatrix g;
  if (opt.gradient) g.resize(est.frames(), est.bins());
  Accum acc;
  for (Index i = 0; i < est.data().size(); ++i) {
    const std::complex<double> z = est.data()(i);
    const std::complex<double> s = clean.data()(i);
    const double a_mag = std::abs(s);
    const double r = std::abs(z);
    const std::complex<double> u = r > 0.0 ? z / r : std::complex<double>(1.0, 0.0);
    const std::complex<double> d = a_mag * u - s;
    acc.value += scale * (p.exact(d.real()) + p.exact(d.imag()));
    acc.smoothed += scale * (p.smooth(d.real()) + p.smooth(d.imag()));
    if (opt.gradient) {
      if (r > 0.0) {
        // d(Re u)/dR = I^2/r^3, d(Re u)/dI = -RI/r^3, d(Im u)/dR = -RI/r^3, d(Im u)/dI = R^2/r^3
        const double a = scale * p.slope(d.real());
        const double b = scale * p.slope(d.imag());
        const double re = z.real(), im = z.imag();
        const double r3 = r * r * r;
        g(i) = {a_mag * im * (a * im - b * re) / r3, a_mag * re * (b * re - a * im) / r3};
      } else {
        g(i) = 0.0;
      }
    }
  }
  return finish(acc, opt.gradient ? Gradient(std::move(g)) : Gradient{});
}

LossValue evaluate_loss(const LossKind& kind, const Estimate& est, const LossTargets& targets,
                        bool gradient, double smoothing) {
  kind.validate();
  LossOptions opt{kind.norm, kind.time_weight, kind.mag_weight, gradient, smoothing};
  const LossTag tag = kind.tag;
  switch (tag) {
    case LossTag::RI:
      return loss_ri(estimate_as<Spectrogram>(est, tag), need(targets.clean_spec, "S"), opt);
    case LossTag::RI_Mag:
      return loss_ri_mag(estimate_as<Spectrogram>(est, tag), need(targets.clean_spec, "S"), opt);
    case LossTag::RI_iSTFT:
      return loss_ri_istft(estimate_as<Spectrogram>(est, tag), need(targets.clean, "s"), opt);
    case LossTag::RI_iSTFT_Mag:
      return loss_ri_istft_mag(estimate_as<Spectrogram>(est, tag), need(targets.clean, "s"),
                               need(targets.clean_spec, "S"), opt);
    case LossTag::Mag_RI_iSTFT:
      return loss_mag_ri_istft(estimate_as<Spectrogram>(est, tag), need(targets.clean, "s"),
                               need(targets.clean_spec, "S"), opt);
    case LossTag::RIiSTFTx0_Mag: {
      const Spectrogram& s_hat = estimate_as<Spectrogram>(est, tag);
      // The output length comes from s when present, else from the frame count.
      const Index out_len = targets.clean ? targets.clean->size()
                                          : (s_hat.frames() - 1) * s_hat.config().hop_length;
      return loss_ri_istft_x0_mag(s_hat, out_len, need(targets.clean_spec, "S"), opt);
    }
    case LossTag::Wav:
      return loss_wav(estimate_as<TimeSignal>(est, tag), need(targets.clean, "s"), opt);
    case LossTag::Wav_Mag:
      return loss_wav_mag(estimate_as<TimeSignal>(est, tag), need(targets.clean, "s"),
                          need(targets.clean_spec, "S"), opt);
    case LossTag::Wavx0_Mag:
      return loss_wav_x0_mag(estimate_as<TimeSignal>(est, tag), need(targets.clean_spec, "S"),
                             opt);
    case LossTag::MSA:
      return loss_msa(estimate_as<MagSpectrogram>(est, tag), need(targets.clean_spec, "S"), opt);
    case LossTag::PSA:
      return loss_psa(estimate_as<MagSpectrogram>(est, tag), need(targets.clean_spec, "S"),
                      need(targets.mixture_spec, "Y"), opt);
    case LossTag::Phase:
      return loss_phase(estimate_as<Spectrogram>(est, tag), need(targets.clean_spec, "S"), opt);
  }
  throw Error(ErrorCode::SpecInvalid, "unknown loss tag");
}

PitResult pit_wrap(const LossKind& kind, const std::array<Estimate, 2>& estimates,
                   const std::array<LossTargets, 2>& targets, bool gradient) {
  PitResult best;
  bool first = true;
  for (const std::array<int, 2> perm : {std::array<int, 2>{0, 1}, std::array<int, 2>{1, 0}}) {
    std::array<LossValue, 2> values{evaluate_loss(kind, estimates[0], targets[perm[0]], gradient),
                                    evaluate_loss(kind, estimates[1], targets[perm[1]], gradient)};
    const double total = values[0].value + values[1].value;
    if (first || total < best.value) {
      best.value = total;
      best.per_source = std::move(values);
      best.permutation = perm;
      first = false;
    }
  }
  return best;
}

}  // namespace magphase
