#pragma once

#include <optional>
#include <string>

#include "magphase/types.hpp"

namespace magphase {

/// Metric denominators below this value report +inf.
inline constexpr double kPerfectDenominator = 1e-300;

/// Scale-invariant SDR: the reference is rescaled by <s, s^> / <s, s> before the
/// error ratio. Throws ZeroSignal for an all-zero input, LengthMismatch otherwise.
double si_sdr(const TimeSignal& est, const TimeSignal& ref);

/// Plain SNR 10 log10(|s|^2 / |s - s^|^2).
double snr(const TimeSignal& est, const TimeSignal& ref);

/// Magnitude SNR: sum |S|^2 / sum (|S| - |S^|)^2.
double msnr(const MagSpectrogram& est, const Spectrogram& ref);
double msnr(const Spectrogram& est, const Spectrogram& ref);

/// Phase SNR with the oracle magnitude supplied: sum |S|^2 / sum |S - |S| e^{j angle S^}|^2.
/// Each error term is evaluated as 4 |S|^2 sin^2((angle S - angle S^) / 2), so identical
/// phases give exactly +inf; bins with |S| = 0 contribute nothing.
double psnr(const Spectrogram& est, const Spectrogram& ref);

struct MetricReport {
  std::optional<double> si_sdr_db;  // empty when the estimate is all zeros
  double snr_db = 0.0;
  double msnr_db = 0.0;
  double psnr_db = 0.0;
  StftConfig config;
};

/// All four metrics for a time-domain estimate; mSNR and pSNR use STFTs under `config`.
MetricReport evaluate_metrics(const TimeSignal& est, const TimeSignal& ref,
                              const StftConfig& config);

/// Four decimals, or the literals "inf" / "-inf".
std::string format_db(double db);

std::string metrics_csv_header();
std::string to_csv_row(const MetricReport& report);
/// JSON object with keys si_sdr_db, snr_db, msnr_db, psnr_db.
std::string to_json(const MetricReport& report, int indent = 2);

}  // namespace magphase
