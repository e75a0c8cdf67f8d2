#include "magphase/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "magphase/stft.hpp"

namespace magphase {
namespace {

double ratio_db(double num, double den) {
  if (den < kPerfectDenominator) return std::numeric_limits<double>::infinity();
  if (num <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(num / den);
}

void check_pair(const TimeSignal& est, const TimeSignal& ref, const char* where) {
  if (est.size() != ref.size()) {
    throw Error(ErrorCode::LengthMismatch, std::string(where) + ": lengths differ");
  }
}

double reference_energy(const Spectrogram& ref, const char* where) {
  const double energy = ref.data().abs2().sum();
  if (!(energy > 0.0)) throw Error(ErrorCode::SilentReference, std::string(where) + ": |S| = 0");
  return energy;
}

nlohmann::json db_json(double db) {
  if (std::isinf(db)) return db > 0 ? "inf" : "-inf";
  return std::stod(format_db(db));
}

}  // namespace

double si_sdr(const TimeSignal& est, const TimeSignal& ref) {
  check_pair(est, ref, "si_sdr");
  const SampleArray& s = ref.samples();
  const SampleArray& e = est.samples();
  const double ref_energy = s.square().sum();
  if (!(ref_energy > 0.0)) throw Error(ErrorCode::ZeroSignal, "si_sdr: reference is all zeros");
  if ((e == 0.0).all()) throw Error(ErrorCode::ZeroSignal, "si_sdr: estimate is all zeros");
  const double alpha = (s * e).sum() / ref_energy;
  const SampleArray target = alpha * s;
  return ratio_db(target.square().sum(), (target - e).square().sum());
}

double snr(const TimeSignal& est, const TimeSignal& ref) {
  check_pair(est, ref, "snr");
  const double energy = ref.samples().square().sum();
  if (!(energy > 0.0)) throw Error(ErrorCode::ZeroSignal, "snr: reference is all zeros");
  return ratio_db(energy, (ref.samples() - est.samples()).square().sum());
}

double msnr(const MagSpectrogram& est, const Spectrogram& ref) {
  require_same_shape(est, ref, "msnr");
  const double energy = reference_energy(ref, "msnr");
  return ratio_db(energy, (ref.data().abs() - est.data()).square().sum());
}

double msnr(const Spectrogram& est, const Spectrogram& ref) {
  return msnr(magnitude_of(est), ref);
}

double psnr(const Spectrogram& est, const Spectrogram& ref) {
  require_same_shape(est, ref, "psnr");
  const double energy = reference_energy(ref, "psnr");
  const RealMatrix half_delta = 0.5 * (phase(ref.data()) - phase(est.data()));
  const double err = (4.0 * ref.data().abs2() * half_delta.sin().square()).sum();
  return ratio_db(energy, err);
}

MetricReport evaluate_metrics(const TimeSignal& est, const TimeSignal& ref,
                              const StftConfig& config) {
  check_pair(est, ref, "evaluate_metrics");
  MetricReport report;
  report.config = config;
  if (!(est.samples() == 0.0).all()) report.si_sdr_db = si_sdr(est, ref);
  report.snr_db = snr(est, ref);
  const Spectrogram est_spec = stft(est, config);
  const Spectrogram ref_spec = stft(ref, config);
  report.msnr_db = msnr(est_spec, ref_spec);
  report.psnr_db = psnr(est_spec, ref_spec);
  return report;
}

std::string format_db(double db) {
  if (std::isinf(db)) return db > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", db);
  return buf;
}

std::string metrics_csv_header() { return "si_sdr_db,snr_db,msnr_db,psnr_db"; }

std::string to_csv_row(const MetricReport& r) {
  return (r.si_sdr_db ? format_db(*r.si_sdr_db) : std::string()) + "," + format_db(r.snr_db) +
         "," + format_db(r.msnr_db) + "," + format_db(r.psnr_db);
}

std::string to_json(const MetricReport& r, int indent) {
  nlohmann::json j;
  j["si_sdr_db"] = r.si_sdr_db ? db_json(*r.si_sdr_db) : nlohmann::json(nullptr);
  j["snr_db"] = db_json(r.snr_db);
  j["msnr_db"] = db_json(r.msnr_db);
  j["psnr_db"] = db_json(r.psnr_db);
  return j.dump(indent);
}

}  // namespace magphase
