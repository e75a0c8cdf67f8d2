// magphase: scene synthesis, oracle masks, metrics, optimization runs and histograms.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "magphase/compensation.hpp"
#include "magphase/masks.hpp"
#include "magphase/metrics.hpp"
#include "magphase/optim.hpp"
#include "magphase/scenes.hpp"
#include "magphase/stft.hpp"
#include "magphase/wav.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace magphase;

namespace {

constexpr int kExitError = 2;
constexpr int kExitOracleMismatch = 3;

struct StftArgs {
  int win = 512;
  int hop = 128;
  int fft = 0;  // 0: next power of two >= win

  void add_to(CLI::App* app) {
    app->add_option("--win", win, "STFT window length in samples")->capture_default_str();
    app->add_option("--hop", hop, "STFT hop length in samples")->capture_default_str();
    app->add_option("--fft", fft, "FFT size (0 = next power of two)")->capture_default_str();
  }

  StftConfig config(int rate) const {
    StftConfig c = StftConfig::with_defaults(win, hop, rate);
    if (fft > 0) c.fft_size = fft;
    c.validate();
    return c;
  }
};

json db_value(double db) {
  if (std::isinf(db)) return db > 0 ? "inf" : "-inf";
  return std::stod(format_db(db));
}

json optional_db(const std::optional<double>& db) {
  return db ? db_value(*db) : json(nullptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IoError, path.string() + ": write failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, dir.string() + ": cannot create output directory");
  }
}

double parse_real(const std::string& text, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0') {
    throw Error(ErrorCode::SpecInvalid, std::string(what) + ": not a number: " + text);
  }
  return v;
}

struct SceneFiles {
  TimeSignal s;
  TimeSignal y;
};

SceneFiles read_scene_dir(const fs::path& dir) {
  SceneFiles f{read_wav(dir / "s.wav"), read_wav(dir / "y.wav")};
  if (f.s.size() != f.y.size()) throw Error(ErrorCode::LengthMismatch, "s.wav and y.wav lengths differ");
  if (f.s.sample_rate() != f.y.sample_rate()) {
    throw Error(ErrorCode::ConfigInvalid, "s.wav and y.wav sample rates differ");
  }
  return f;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::uint64_t seed = 0;
  std::string level = "0";
  std::string noise = "white";
  double duration = 1.0;
  int rate = 16000;
  double f0 = 0.0;
  std::optional<double> rt60;
  double drr = 10.0;
  std::string spec_path;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  SceneSpec spec;
  if (!a.spec_path.empty()) {
    spec = scene_spec_from_json(read_text(a.spec_path));
  } else {
    const auto kind = parse_interference(a.noise);
    if (!kind) throw Error(ErrorCode::SpecInvalid, "unknown interference: " + a.noise);
    spec.seed = a.seed;
    spec.duration_s = a.duration;
    spec.sample_rate_hz = a.rate;
    spec.target.f0_hz = a.f0;
    spec.interference = *kind;
    spec.level_db = parse_real(a.level, "level");
    if (a.rt60) spec.reverb = ReverbSpec{*a.rt60, a.drr};
  }
  const Scene scene = synth_scene(spec);
  const fs::path out(a.out);
  ensure_dir(out);
  write_wav(out / "s.wav", scene.target);
  write_wav(out / "v.wav", scene.interference);
  write_wav(out / "y.wav", scene.mixture);
  if (scene.second_talker) write_wav(out / "s2.wav", *scene.second_talker);
  write_text(out / "scene.json", scene_spec_to_json(scene.spec) + "\n");
  std::cout << "wrote " << (out / "s.wav").string() << ", v.wav, y.wav"
            << (scene.second_talker ? ", s2.wav" : "") << ", scene.json\n";
  return 0;
}

// ---- metrics --------------------------------------------------------------

struct MetricsArgs {
  std::string est;
  std::string ref;
  std::string format = "json";
  std::string out;
  StftArgs stft;
};

int cmd_metrics(const MetricsArgs& a) {
  const TimeSignal est = read_wav(a.est);
  const TimeSignal ref = read_wav(a.ref);
  if (est.sample_rate() != ref.sample_rate()) {
    throw Error(ErrorCode::ConfigInvalid, "sample rates differ");
  }
  const MetricReport r = evaluate_metrics(est, ref, a.stft.config(ref.sample_rate()));
  std::string text;
  if (a.format == "csv") {
    text = metrics_csv_header() + "\n" + to_csv_row(r) + "\n";
  } else {
    text = to_json(r) + "\n";
  }
  if (!a.out.empty()) write_text(a.out, text);
  std::cout << text;
  return 0;
}

// ---- mask -----------------------------------------------------------------

struct MaskArgs {
  std::string kind;
  std::string scene;
  std::string out;
  double max_gain = 10.0;
  bool no_clamp = false;
  StftArgs stft;
};

int cmd_mask(const MaskArgs& a) {
  const SceneFiles f = read_scene_dir(a.scene);
  const StftConfig cfg = a.stft.config(f.s.sample_rate());
  const Spectrogram S = stft(f.s, cfg);
  const Spectrogram Y = stft(f.y, cfg);
  const Index n = f.s.size();
  MaskApplyOptions opts;
  if (a.no_clamp) opts.max_gain = std::nullopt;
  else opts.max_gain = a.max_gain;

  // The no-resynthesis magnitude is the oracle product itself, without the gain clamp.
  std::optional<TimeSignal> enhanced;
  std::optional<MagSpectrogram> magnitude;
  if (a.kind == "iam") {
    enhanced = apply_mask_resynth(iam(S, Y), Y, n, opts);
    magnitude = oracle_masked_magnitude(MaskKind::IAM, S, Y, kMaskEps, {std::nullopt});
  } else if (a.kind == "psm" || a.kind == "psm-trunc") {
    const bool trunc = a.kind == "psm-trunc";
    enhanced = apply_mask_resynth(psm(S, Y, kMaskEps, trunc), Y, n, opts);
    magnitude = oracle_masked_magnitude(trunc ? MaskKind::PSMTruncated : MaskKind::PSM, S, Y,
                                        kMaskEps, {std::nullopt});
  } else if (a.kind == "psa-target") {
    magnitude = psa_target(S, Y);
    enhanced = apply_mask_resynth(*magnitude, Y, n);
  } else {
    throw Error(ErrorCode::ConfigInvalid, "unknown mask kind: " + a.kind);
  }

  const MetricReport r = evaluate_metrics(*enhanced, f.s, cfg);
  json j;
  j["kind"] = a.kind;
  j["resynthesis"] = json::parse(to_json(r));
  j["no_resynthesis"] = {{"msnr_db", db_value(msnr(*magnitude, S))}};
  const fs::path out = a.out.empty() ? fs::path(a.scene) : fs::path(a.out);
  ensure_dir(out);
  const std::string stem = "enhanced_" + a.kind;
  write_wav(out / (stem + ".wav"), *enhanced);
  write_text(out / (stem + ".json"), j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---- optimize -------------------------------------------------------------

LossKind parse_loss(const json& j) {
  const auto tag = parse_loss_tag(j.at("tag").get<std::string>());
  if (!tag) throw Error(ErrorCode::SpecInvalid, "unknown loss tag: " + j.at("tag").dump());
  const std::string norm = j.value("norm", std::string("L1"));
  if (norm != "L1" && norm != "L2") throw Error(ErrorCode::SpecInvalid, "norm must be L1 or L2");
  LossKind k = LossKind::make(*tag, norm == "L1" ? Norm::L1 : Norm::L2);
  k.time_weight = j.value("time_weight", k.time_weight);
  k.mag_weight = j.value("mag_weight", k.mag_weight);
  k.validate();
  return k;
}

struct ProblemFile {
  OptimizationProblem problem;
  std::optional<std::pair<LossKind, LossKind>> trend;
  Scene scene;
};

Scene load_scene(const json& j, const fs::path& base) {
  if (j.contains("scene_spec")) return synth_scene(scene_spec_from_json(j["scene_spec"].dump()));
  if (!j.contains("scene")) throw Error(ErrorCode::SpecInvalid, "problem needs scene or scene_spec");
  fs::path dir = j["scene"].get<std::string>();
  if (dir.is_relative()) dir = base / dir;
  const SceneFiles f = read_scene_dir(dir);
  SampleArray v = f.y.samples() - f.s.samples();
  SceneSpec spec;
  spec.sample_rate_hz = f.s.sample_rate();
  return Scene{f.s, TimeSignal(v, f.s.sample_rate()), f.y, std::nullopt, spec};
}

ProblemFile load_problem(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SpecInvalid, std::string("problem file: ") + e.what());
  }
  try {
    if (j.value("schema_version", 0) != 1) {
      throw Error(ErrorCode::SpecInvalid, "problem file needs \"schema_version\": 1");
    }
    Scene scene = load_scene(j, path.parent_path());
    const json st = j.value("stft", json::object());
    StftConfig cfg = StftConfig::with_defaults(st.value("win_length", 512), st.value("hop_length", 128),
                                               scene.target.sample_rate());
    if (st.contains("fft_size")) cfg.fft_size = st["fft_size"].get<int>();
    cfg.validate();

    const std::string param = j.value("parameterization", std::string("fixed_phase"));
    Parameterization pz;
    if (param == "fixed_phase") pz = Parameterization::FreeMagnitudeFixedPhase;
    else if (param == "free_ri") pz = Parameterization::FreeRI;
    else if (param == "free_waveform") pz = Parameterization::FreeWaveform;
    else throw Error(ErrorCode::SpecInvalid, "unknown parameterization: " + param);

    const std::string phase = j.value("phase_source", std::string("mixture"));
    PhaseSource ps;
    if (phase == "mixture") ps = PhaseSource::Mixture;
    else if (phase == "oracle") ps = PhaseSource::Oracle;
    else throw Error(ErrorCode::SpecInvalid, "unknown phase_source: " + phase);

    InitSpec init;
    const json ij = j.value("init", json::object());
    const std::string ik = ij.value("kind", std::string("mixture"));
    if (ik == "mixture") init.kind = InitSpec::Kind::Mixture;
    else if (ik == "zeros") init.kind = InitSpec::Kind::Zeros;
    else if (ik == "random") init.kind = InitSpec::Kind::Random;
    else throw Error(ErrorCode::SpecInvalid, "unknown init kind: " + ik);
    init.seed = ij.value("seed", std::uint64_t{0});

    const LossKind loss = j.contains("loss") ? parse_loss(j["loss"]) : LossKind::make(LossTag::RI);
    OptimizationProblem p{pz, ps, std::nullopt, loss, targets_from_scene(scene, cfg), init,
                          j.value("steps", 2000), j.value("step_size", 0.5),
                          j.value("momentum", 0.9)};
    std::optional<std::pair<LossKind, LossKind>> trend;
    if (j.contains("trend")) {
      trend = {parse_loss(j["trend"].at("without")), parse_loss(j["trend"].at("with"))};
    }
    return {std::move(p), trend, std::move(scene)};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SpecInvalid, std::string("problem file: ") + e.what());
  }
}

struct OptimizeArgs {
  std::string problem;
  std::string out = ".";
  bool verify_oracle = false;
  bool trend = false;
};

int cmd_optimize(const OptimizeArgs& a) {
  ProblemFile pf = load_problem(a.problem);
  const fs::path out(a.out);
  ensure_dir(out);
  const OptimizationProblem& p = pf.problem;

  if (a.trend || pf.trend) {
    const auto pair = pf.trend.value_or(
        std::pair{LossKind::make(LossTag::RI, Norm::L2), LossKind::make(LossTag::RI_Mag, Norm::L2)});
    TrendConfig tc{p.targets.clean_spec.config(), p.parameterization, p.phase_source, p.init,
                   p.steps, p.step_size, p.momentum};
    const TrendReport r = run_trend_experiment(pf.scene, pair.first, pair.second, tc);
    write_text(out / "trend.csv", r.to_csv());
    std::cout << r.to_csv();
    std::cout << "msnr_improves=" << (r.msnr_improves ? "yes" : "no")
              << " si_sdr_degrades=" << (r.si_sdr_degrades ? "yes" : "no") << "\n";
    return 0;
  }

  if (a.verify_oracle && (p.parameterization != Parameterization::FreeMagnitudeFixedPhase ||
                          p.loss.tag != LossTag::RI)) {
    throw Error(ErrorCode::ConfigInvalid,
                "--verify-oracle needs a fixed_phase problem with the RI loss");
  }
  const OptimizationResult r = optimize(p);
  write_text(out / "trajectory.csv", r.trajectory.to_csv());
  if (r.estimate_signal) {
    write_wav(out / "estimate.wav", *r.estimate_signal);
  }
  const TrajectoryPoint& last = r.trajectory.points.back();
  json j;
  j["final_loss"] = r.final_loss;
  j["steps_run"] = last.step;
  j["si_sdr_db"] = optional_db(last.si_sdr_db);
  j["msnr_db"] = db_value(last.msnr_db);
  j["psnr_db"] = db_value(last.psnr_db);

  int status = 0;
  if (a.verify_oracle) {
    const RealMatrix phase = fixed_phase(p);
    const RealMatrix& m = std::get<MagSpectrogram>(r.parameters).data();
    const ComplexMatrix& s = p.targets.clean_spec.data();
    double worst = 0.0;
    for (Index i = 0; i < m.size(); ++i) {
      const double oracle = optimal_magnitude_along_phase(s(i), phase(i), p.loss.norm);
      worst = std::max(worst, std::abs(m(i) - oracle));
    }
    j["oracle_max_abs_error"] = worst;
    j["oracle_match"] = worst <= 1e-4;
    if (worst > 1e-4) status = kExitOracleMismatch;
  }
  write_text(out / "metrics.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  if (status != 0) std::cerr << "error: optimized magnitude deviates from the closed-form oracle\n";
  return status;
}

// ---- histogram ------------------------------------------------------------

struct HistogramArgs {
  std::string source;
  std::string scene;
  std::string out;
  double floor_db = 60.0;
  int bins = 50;
  StftArgs stft;
};

int cmd_histogram(const HistogramArgs& a) {
  const SceneFiles f = read_scene_dir(a.scene);
  const StftConfig cfg = a.stft.config(f.s.sample_rate());
  const Spectrogram S = stft(f.s, cfg);
  const Spectrogram Y = stft(f.y, cfg);
  const auto est = [&]() -> MagSpectrogram {
    if (a.source == "clean") return magnitude_of(S);
    if (a.source == "mixture") return magnitude_of(Y);
    if (a.source == "compensated") return compensated_magnitude(S, phase_of(Y));
    if (a.source == "iam") return oracle_masked_magnitude(MaskKind::IAM, S, Y, kMaskEps, {std::nullopt});
    if (a.source == "psm") return oracle_masked_magnitude(MaskKind::PSM, S, Y, kMaskEps, {std::nullopt});
    if (a.source == "psa-target") return psa_target(S, Y);
    // Anything else is a WAV estimate, analyzed with the same STFT.
    const TimeSignal e = read_wav(a.source);
    if (e.size() != f.s.size()) throw Error(ErrorCode::LengthMismatch, "estimate length differs from s");
    return magnitude_of(stft(e, cfg));
  }();
  const Histogram2D h = histogram2d(est, S, Y, a.floor_db, a.bins);
  const fs::path out = a.out.empty() ? fs::path(a.scene) : fs::path(a.out);
  ensure_dir(out);
  write_text(out / "histogram.csv", to_csv(h));
  write_text(out / "histogram.pgm", to_pgm(h));
  std::cout << "units " << h.total() << ", floor " << format_db(a.floor_db) << " dB, wrote "
            << (out / "histogram.csv").string() << " and histogram.pgm\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnitude/phase compensation toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Synthesize a seeded (s, v, y) scene");
  s->add_option("--seed", synth.seed)->capture_default_str();
  s->add_option("--snr,--sir,--level", synth.level, "Target-to-interference ratio in dB")
      ->capture_default_str();
  s->add_option("--noise", synth.noise, "white | pink | talker")->capture_default_str();
  s->add_option("--duration", synth.duration, "Seconds")->capture_default_str();
  s->add_option("--rate", synth.rate, "Sample rate in Hz")->capture_default_str();
  s->add_option("--f0", synth.f0, "Target f0 in Hz (0 draws from the seed)")->capture_default_str();
  s->add_option("--rt60", synth.rt60, "Add reverberation with this T60 in seconds");
  s->add_option("--drr", synth.drr, "Direct-to-reverberant ratio in dB")->capture_default_str();
  s->add_option("--spec", synth.spec_path, "Scene JSON (overrides the flags)");
  s->add_option("--out", synth.out, "Output directory")->required();

  MetricsArgs metrics;
  auto* m = app.add_subcommand("metrics", "SI-SDR, SNR, mSNR and pSNR of an estimate");
  m->add_option("est", metrics.est)->required();
  m->add_option("ref", metrics.ref)->required();
  m->add_option("--format", metrics.format)->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  m->add_option("--out", metrics.out, "Also write the report here");
  metrics.stft.add_to(m);

  MaskArgs mask;
  auto* k = app.add_subcommand("mask", "Apply an oracle mask with mixture-phase re-synthesis");
  k->add_option("kind", mask.kind)
      ->check(CLI::IsMember({"iam", "psm", "psm-trunc", "psa-target"}))
      ->required();
  k->add_option("--scene", mask.scene, "Scene directory with s.wav and y.wav")->required();
  k->add_option("--out", mask.out, "Output directory (default: the scene directory)");
  k->add_option("--max-gain", mask.max_gain, "Upper clamp on mask gains")->capture_default_str();
  k->add_flag("--no-clamp", mask.no_clamp, "Disable the gain clamp");
  mask.stft.add_to(k);

  OptimizeArgs opt;
  auto* o = app.add_subcommand("optimize", "Run gradient descent on a problem file");
  o->add_option("problem", opt.problem, "Problem JSON")->required();
  o->add_option("--out", opt.out, "Output directory")->capture_default_str();
  o->add_flag("--verify-oracle", opt.verify_oracle,
              "Fail unless the result matches the closed-form magnitude within 1e-4");
  o->add_flag("--trend", opt.trend, "Compare the loss pair in \"trend\" (or RI vs RI+Mag, L2)");

  HistogramArgs hist;
  auto* h = app.add_subcommand("histogram", "Phase difference vs. magnitude ratio histogram");
  h->add_option("source", hist.source,
                "clean | mixture | compensated | iam | psm | psa-target | path to an estimate WAV")
      ->required();
  h->add_option("--scene", hist.scene, "Scene directory with s.wav and y.wav")->required();
  h->add_option("--out", hist.out, "Output directory (default: the scene directory)");
  h->add_option("--floor", hist.floor_db, "Discard units this many dB below the peak")
      ->capture_default_str();
  h->add_option("--bins", hist.bins)->capture_default_str();
  hist.stft.add_to(h);

  CLI11_PARSE(app, argc, argv);
  try {
    if (s->parsed()) return cmd_synth(synth);
    if (m->parsed()) return cmd_metrics(metrics);
    if (k->parsed()) return cmd_mask(mask);
    if (o->parsed()) return cmd_optimize(opt);
    if (h->parsed()) return cmd_histogram(hist);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
