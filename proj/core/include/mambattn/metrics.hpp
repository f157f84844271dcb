// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mambattn::metrics {

inline constexpr double kSiSdrCap = 100.0;
inline constexpr double kSsnrMin = -10.0;
inline constexpr double kSsnrMax = 35.0;

/// Scale-invariant SDR in dB, capped at 100 dB.
double si_sdr(std::span<const double> ref, std::span<const double> est);

/// Segmental SNR: 512-sample rectangular frames, hop 256, per-frame SNR
/// clamped to [-10, 35] dB, averaged over frames whose reference energy is
/// nonzero.
double ssnr(std::span<const double> ref, std::span<const double> est);
/// Per-frame clamped values used by ssnr().
std::vector<double> ssnr_frames(std::span<const double> ref, std::span<const double> est);

struct EstoiConfig {
  double sample_rate = 16000.0;
  std::size_t frame = 512;
  std::size_t hop = 256;
  std::size_t fft_size = 512;
  std::size_t bands = 15;
  double min_frequency = 150.0;
  std::size_t segment = 30;  // N
  double dynamic_range_db = 40.0;
};

/// Extended short-time objective intelligibility in [-1, 1].
double estoi(std::span<const double> ref, std::span<const double> est,
             const EstoiConfig& cfg = {});

struct FileScores {
  std::string id;
  double si_sdr = 0.0;
  double ssnr = 0.0;
  double estoi = 0.0;
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  std::size_t count = 0;
};

/// Mean and standard deviation over the finite entries of `values`.
Summary summarize(std::span<const double> values);

struct MetricReport {
  std::vector<FileScores> files;
  Summary si_sdr, ssnr, estoi;

  void recompute();
  /// id,si_sdr,ssnr,estoi rows plus mean and std rows.
  void write_csv(std::ostream& out) const;
};

}  // namespace mambattn::metrics
