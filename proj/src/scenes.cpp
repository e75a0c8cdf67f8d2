#include "magphase/scenes.hpp"

#include <cmath>
#include <vector>

#include <json.hpp>
#include <unsupported/Eigen/FFT>

namespace magphase {
namespace {

constexpr double kBandLow = 80.0;
constexpr double kBandHigh = 4000.0;

SampleArray harmonic_stack(const HarmonicSource& src, double f0, Index len, int fs,
                           SplitMix64& rng) {
  const double top = std::min(kBandHigh, 0.45 * fs);
  const int max_harm = static_cast<int>(top / (f0 * (1.0 + src.vibrato_depth)));
  const int count = src.harmonics > 0 ? std::min(src.harmonics, max_harm) : max_harm;
  std::vector<double> phases(count);
  for (double& p : phases) p = 2.0 * EIGEN_PI * rng.uniform();
  const double am_phase = 2.0 * EIGEN_PI * rng.uniform();

  SampleArray out = SampleArray::Zero(len);
  double base_phase = 0.0;
  for (Index n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) / fs;
    const double f = f0 * (1.0 + src.vibrato_depth * std::sin(2.0 * EIGEN_PI * src.vibrato_rate_hz * t));
    double v = 0.0;
    for (int k = 1; k <= count; ++k) {
      if (k * f0 < kBandLow) continue;
      v += std::sin(k * base_phase + phases[k - 1]) / k;
    }
    const double am = 0.5 * (1.0 - std::cos(2.0 * EIGEN_PI * src.am_rate_hz * t + am_phase));
    out[n] = am * v;
    base_phase += 2.0 * EIGEN_PI * f / fs;
  }
  const double rms = std::sqrt(out.square().mean());
  if (rms > 0.0) out *= 0.1 / rms;
  return out;
}

SampleArray white_noise(Index len, SplitMix64& rng) {
  SampleArray out(len);
  for (Index n = 0; n < len; ++n) out[n] = rng.normal();
  return out;
}

// 1/f power spectrum by shaping white noise in the frequency domain.
SampleArray pink_noise(Index len, SplitMix64& rng) {
  std::vector<double> white(len);
  for (double& v : white) v = rng.normal();
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, white);
  const Index n = static_cast<Index>(spec.size());
  for (Index k = 0; k < n; ++k) {
    const Index kk = std::min(k, n - k);
    spec[k] *= kk == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(kk));
  }
  std::vector<std::complex<double>> time;
  fft.inv(time, spec);
  SampleArray out(len);
  for (Index i = 0; i < len; ++i) out[i] = time[i].real();
  return out;
}

// Linear convolution truncated to x's length.
SampleArray convolve_truncated(const SampleArray& x, const SampleArray& h) {
  const Index len = x.size();
  Index n = 1;
  while (n < len + h.size()) n <<= 1;
  std::vector<std::complex<double>> a(n), b(n), fa, fb, out;
  for (Index i = 0; i < len; ++i) a[i] = x[i];
  for (Index i = 0; i < h.size(); ++i) b[i] = h[i];
  Eigen::FFT<double> fft;
  fft.fwd(fa, a);
  fft.fwd(fb, b);
  for (Index k = 0; k < n; ++k) fa[k] *= fb[k];
  fft.inv(out, fa);
  SampleArray y(len);
  for (Index i = 0; i < len; ++i) y[i] = out[i].real();
  return y;
}

double energy(const SampleArray& x) { return x.square().sum(); }

}  // namespace

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * EIGEN_PI * u2);
  return r * std::cos(2.0 * EIGEN_PI * u2);
}

const char* to_string(InterferenceKind kind) noexcept {
  switch (kind) {
    case InterferenceKind::WhiteNoise: return "white";
    case InterferenceKind::PinkNoise: return "pink";
    case InterferenceKind::SecondTalker: return "talker";
  }
  return "?";
}

std::optional<InterferenceKind> parse_interference(const std::string& name) {
  for (auto k : {InterferenceKind::WhiteNoise, InterferenceKind::PinkNoise,
                 InterferenceKind::SecondTalker}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

void SceneSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::SpecInvalid, what); };
  if (!std::isfinite(duration_s) || duration_s < 0.25) fail("duration must be >= 0.25 s");
  if (sample_rate_hz <= 0) fail("sample rate must be positive");
  if (!std::isfinite(level_db)) fail("snr/sir must be finite");
  if (!std::isfinite(target.f0_hz) || !std::isfinite(target.am_rate_hz) ||
      !std::isfinite(target.vibrato_depth) || !std::isfinite(target.vibrato_rate_hz)) {
    fail("target parameters must be finite");
  }
  if (target.f0_hz > 0.0 && target.f0_hz * (1.0 + target.vibrato_depth) >= kBandHigh) {
    fail("f0 above the synthesis band");
  }
  if (reverb) {
    if (!std::isfinite(reverb->rt60_s) || reverb->rt60_s < 0.05 || reverb->rt60_s > 1.0) {
      fail("rt60 must lie in [0.05, 1.0] s");
    }
    if (!std::isfinite(reverb->direct_to_reverb_db)) fail("direct-to-reverb ratio must be finite");
  }
}

SampleArray synth_rir(double rt60_s, int sample_rate_hz, std::uint64_t seed) {
  if (!std::isfinite(rt60_s) || rt60_s < 0.05 || rt60_s > 1.0) {
    throw Error(ErrorCode::SpecInvalid, "rt60 must lie in [0.05, 1.0] s");
  }
  if (sample_rate_hz <= 0) throw Error(ErrorCode::SpecInvalid, "sample rate must be positive");
  const double decay_samples = rt60_s * sample_rate_hz;
  const Index len = static_cast<Index>(std::ceil(decay_samples)) + 1;
  SplitMix64 rng(seed);
  SampleArray h(len);
  h[0] = 1.0;
  // Amplitude 10^{-3} (-60 dB) at n = rt60 * fs.
  const double rate = std::log(1000.0) / decay_samples;
  for (Index n = 1; n < len; ++n) h[n] = rng.normal() * std::exp(-rate * static_cast<double>(n));
  return h;
}

Scene synth_scene(const SceneSpec& spec_in) {
  spec_in.validate();
  SceneSpec spec = spec_in;
  SplitMix64 rng(spec.seed);
  if (spec.target.f0_hz <= 0.0) spec.target.f0_hz = 100.0 + 100.0 * rng.uniform();

  const int fs = spec.sample_rate_hz;
  const Index len = static_cast<Index>(std::llround(spec.duration_s * fs));
  const SampleArray s = harmonic_stack(spec.target, spec.target.f0_hz, len, fs, rng);

  SampleArray interferer;
  switch (spec.interference) {
    case InterferenceKind::WhiteNoise: interferer = white_noise(len, rng); break;
    case InterferenceKind::PinkNoise: interferer = pink_noise(len, rng); break;
    case InterferenceKind::SecondTalker: {
      HarmonicSource other = spec.target;
      other.f0_hz = spec.target.f0_hz * (1.3 + 0.2 * rng.uniform());
      if (other.f0_hz * (1.0 + other.vibrato_depth) >= std::min(kBandHigh, 0.45 * fs)) {
        other.f0_hz = spec.target.f0_hz / 1.3;
      }
      interferer = harmonic_stack(other, other.f0_hz, len, fs, rng);
      break;
    }
  }

  SampleArray tail = SampleArray::Zero(len);
  if (spec.reverb) {
    SampleArray h = synth_rir(spec.reverb->rt60_s, fs, rng.next());
    h[0] = 0.0;
    tail = convolve_truncated(s, h);
    const double tail_e = energy(tail);
    if (tail_e > 0.0) {
      tail *= std::sqrt(energy(s) / tail_e * std::pow(10.0, -spec.reverb->direct_to_reverb_db / 10.0));
    }
  }

  // |tail + g n|^2 = |s|^2 10^{-level/10}, solved for g >= 0.
  const double budget = energy(s) * std::pow(10.0, -spec.level_db / 10.0);
  const double a = energy(interferer);
  const double b = (tail * interferer).sum();
  const double c = energy(tail) - budget;
  const double disc = b * b - a * c;
  if (!(a > 0.0) || disc < 0.0) {
    throw Error(ErrorCode::SpecInvalid, "requested level unreachable with this reverberant tail");
  }
  const double gain = (-b + std::sqrt(disc)) / a;
  if (gain < 0.0) {
    throw Error(ErrorCode::SpecInvalid, "reverberant tail alone exceeds the requested level");
  }
  const SampleArray scaled = gain * interferer;
  const SampleArray v = tail + scaled;
  const SampleArray y = s + v;

  Scene scene{TimeSignal(s, fs), TimeSignal(v, fs), TimeSignal(y, fs), std::nullopt, spec};
  if (spec.interference == InterferenceKind::SecondTalker) scene.second_talker = TimeSignal(scaled, fs);
  return scene;
}

std::string scene_spec_to_json(const SceneSpec& spec, int indent) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["generator"] = SplitMix64::kName;
  j["seed"] = spec.seed;
  j["duration_s"] = spec.duration_s;
  j["sample_rate_hz"] = spec.sample_rate_hz;
  j["target"] = {{"f0_hz", spec.target.f0_hz},
                 {"harmonics", spec.target.harmonics},
                 {"am_rate_hz", spec.target.am_rate_hz},
                 {"vibrato_depth", spec.target.vibrato_depth},
                 {"vibrato_rate_hz", spec.target.vibrato_rate_hz}};
  j["interference"] = {{"kind", to_string(spec.interference)}, {"level_db", spec.level_db}};
  if (spec.reverb) {
    j["reverb"] = {{"rt60_s", spec.reverb->rt60_s},
                   {"direct_to_reverb_db", spec.reverb->direct_to_reverb_db}};
  } else {
    j["reverb"] = nullptr;
  }
  return j.dump(indent);
}

SceneSpec scene_spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SpecInvalid, std::string("scene spec: ") + e.what());
  }
  SceneSpec spec;
  try {
    if (j.value("schema_version", 1) != 1) {
      throw Error(ErrorCode::SpecInvalid, "unsupported scene schema_version");
    }
    spec.seed = j.value("seed", spec.seed);
    spec.duration_s = j.value("duration_s", spec.duration_s);
    spec.sample_rate_hz = j.value("sample_rate_hz", spec.sample_rate_hz);
    if (j.contains("target")) {
      const auto& t = j["target"];
      spec.target.f0_hz = t.value("f0_hz", spec.target.f0_hz);
      spec.target.harmonics = t.value("harmonics", spec.target.harmonics);
      spec.target.am_rate_hz = t.value("am_rate_hz", spec.target.am_rate_hz);
      spec.target.vibrato_depth = t.value("vibrato_depth", spec.target.vibrato_depth);
      spec.target.vibrato_rate_hz = t.value("vibrato_rate_hz", spec.target.vibrato_rate_hz);
    }
    if (j.contains("interference")) {
      const auto& i = j["interference"];
      const auto kind = parse_interference(i.value("kind", std::string("white")));
      if (!kind) throw Error(ErrorCode::SpecInvalid, "unknown interference kind");
      spec.interference = *kind;
      spec.level_db = i.value("level_db", spec.level_db);
    }
    if (j.contains("reverb") && !j["reverb"].is_null()) {
      ReverbSpec r;
      r.rt60_s = j["reverb"].value("rt60_s", r.rt60_s);
      r.direct_to_reverb_db = j["reverb"].value("direct_to_reverb_db", r.direct_to_reverb_db);
      spec.reverb = r;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SpecInvalid, std::string("scene spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

}  // namespace magphase
