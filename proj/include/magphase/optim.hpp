#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "magphase/losses.hpp"
#include "magphase/scenes.hpp"
#include "magphase/types.hpp"

namespace magphase {

/// Which free parameters stand in for the network output.
enum class Parameterization {
  FreeRI,                    // complex spectrogram S^
  FreeMagnitudeFixedPhase,   // magnitude M with S^ = M e^{j phase}, phase held fixed
  FreeWaveform,              // time signal s^
};

enum class PhaseSource { Mixture, Oracle, Custom };

struct InitSpec {
  enum class Kind { Mixture, Zeros, Random };
  Kind kind = Kind::Mixture;
  std::uint64_t seed = 0;
};

/// References for a problem. Only `clean_spec` is mandatory; the rest are needed by
/// particular losses, phase sources and metrics.
struct ProblemTargets {
  Spectrogram clean_spec;                      // S
  std::optional<TimeSignal> clean;             // s
  std::optional<Spectrogram> mixture_spec;     // Y
  std::optional<TimeSignal> mixture;           // y
};

/// Builds S and Y from a synthesized scene.
ProblemTargets targets_from_scene(const Scene& scene, const StftConfig& config);

struct OptimizationProblem {
  Parameterization parameterization = Parameterization::FreeMagnitudeFixedPhase;
  PhaseSource phase_source = PhaseSource::Mixture;
  std::optional<RealMatrix> custom_phase;
  LossKind loss;
  ProblemTargets targets;
  InitSpec init;
  int steps = 2000;
  double step_size = 0.5;
  double momentum = 0.9;

  /// Throws SpecInvalid / MissingTarget.
  void validate() const;
};

struct TrajectoryPoint {
  int step = 0;
  double loss = 0.0;
  std::optional<double> si_sdr_db;  // needs s and a nonzero estimate
  double msnr_db = 0.0;             // on the estimate's own magnitude (no re-synthesis)
  double psnr_db = 0.0;
};

struct TrajectoryRecord {
  std::vector<TrajectoryPoint> points;
  std::string to_csv() const;
};

struct OptimizationResult {
  Estimate parameters;        // S^ (FreeRI), M (fixed phase) or s^ (waveform)
  Spectrogram estimate_spec;  // complex estimate implied by the parameters
  std::optional<TimeSignal> estimate_signal;  // re-synthesized (or direct) time signal
  TrajectoryRecord trajectory;
  double final_loss = 0.0;
  double final_step_size = 0.0;
};

/// Heavy-ball gradient descent on the Charbonnier-smoothed loss with a monotone
/// safeguard: a momentum step that does not lower the loss is replaced by a plain
/// gradient step, halving the step size until it satisfies sufficient decrease.
/// Magnitudes are projected onto [0, inf) after every step.
/// The run stops early once no step size lowers the loss.
///
/// Step sizes are per element: the update uses the gradient of the loss times the
/// number of free parameters, i.e. of the unnormalized sum.
///
/// Throws DivergedNaN on a non-finite loss and MissingTarget when the loss or phase
/// source needs a reference the problem lacks.
OptimizationResult optimize(const OptimizationProblem& problem);

/// The fixed phase used by FreeMagnitudeFixedPhase.
RealMatrix fixed_phase(const OptimizationProblem& problem);

struct TrendRow {
  std::string label;
  LossKind loss;
  double final_loss = 0.0;
  std::optional<double> si_sdr_db;
  double msnr_db = 0.0;          // estimated magnitude, no re-synthesis
  double msnr_resynth_db = 0.0;  // |stft(istft(S^))|
  double psnr_db = 0.0;
};

struct TrendReport {
  TrendRow without_mag;
  TrendRow with_mag;
  bool msnr_improves = false;   // with.msnr >= without.msnr
  bool si_sdr_degrades = false;  // with.si_sdr <= without.si_sdr

  std::string to_csv() const;
};

struct TrendConfig {
  StftConfig stft = StftConfig::with_defaults(512, 128);
  Parameterization parameterization = Parameterization::FreeMagnitudeFixedPhase;
  PhaseSource phase_source = PhaseSource::Mixture;
  InitSpec init;
  int steps = 2000;
  double step_size = 0.5;
  double momentum = 0.9;
};

/// Optimizes the same scene under both losses with identical budgets and compares.
TrendReport run_trend_experiment(const Scene& scene, const LossKind& without_mag,
                                 const LossKind& with_mag, const TrendConfig& config = {});

const char* to_string(Parameterization p) noexcept;
const char* to_string(PhaseSource p) noexcept;

}  // namespace magphase
