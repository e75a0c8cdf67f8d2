#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "magphase/types.hpp"

namespace magphase {

/// SplitMix64: output k is a fixed mixing function of seed + (k + 1) * golden gamma,
/// so streams are reproducible across platforms and implementations.
class SplitMix64 {
 public:
  static constexpr const char* kName = "splitmix64";

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::uint64_t state_;
  std::optional<double> spare_;
};

/// Harmonic stack with pitch vibrato and syllabic amplitude modulation, band-limited
/// to 80-4000 Hz.
struct HarmonicSource {
  double f0_hz = 0.0;  // <= 0 draws f0 from the seed in [100, 200] Hz
  int harmonics = 0;   // <= 0 keeps every harmonic inside the band
  double am_rate_hz = 4.0;
  double vibrato_depth = 0.03;
  double vibrato_rate_hz = 5.0;
};

enum class InterferenceKind { WhiteNoise, PinkNoise, SecondTalker };

const char* to_string(InterferenceKind kind) noexcept;
std::optional<InterferenceKind> parse_interference(const std::string& name);

struct ReverbSpec {
  double rt60_s = 0.3;
  double direct_to_reverb_db = 10.0;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  double duration_s = 1.0;
  int sample_rate_hz = 16000;
  HarmonicSource target;
  InterferenceKind interference = InterferenceKind::WhiteNoise;
  double level_db = 0.0;  // SNR for noise, SIR for a second talker
  std::optional<ReverbSpec> reverb;

  /// Throws Error(SpecInvalid).
  void validate() const;
};

/// y = s + v. With reverb, s is the direct path and the scaled reverberant tail is part
/// of v; the interference gain is solved so that |s|^2 / |v|^2 hits level_db.
struct Scene {
  TimeSignal target;        // s
  TimeSignal interference;  // v
  TimeSignal mixture;       // y
  std::optional<TimeSignal> second_talker;
  SceneSpec spec;  // with f0 resolved
};

Scene synth_scene(const SceneSpec& spec);

/// Unit direct tap followed by seeded Gaussian noise under an exponential envelope
/// reaching -60 dB at rt60_s. rt60_s must lie in [0.05, 1.0].
SampleArray synth_rir(double rt60_s, int sample_rate_hz, std::uint64_t seed = 0);

std::string scene_spec_to_json(const SceneSpec& spec, int indent = 2);
SceneSpec scene_spec_from_json(const std::string& text);

}  // namespace magphase
