// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mambattn::datagen {

inline constexpr double kSampleRate = 16000.0;
inline constexpr std::array<double, 7> kSnrGrid{-10, -5, 0, 5, 10, 15, 20};

enum class NoiseType { kSsn, kBabble, kWhite, kTonal };
inline constexpr std::array<NoiseType, 4> kNoiseTypes{NoiseType::kSsn, NoiseType::kBabble,
                                                      NoiseType::kWhite, NoiseType::kTonal};
std::string to_string(NoiseType t);
NoiseType parse_noise_type(const std::string& text);

/// Deterministic 64-bit mixing of a seed.
std::uint64_t splitmix64(std::uint64_t x);

/// Per-frame activity: frame energy (dB) within `threshold_db` of the loudest
/// frame. Samples after the last full frame follow the last frame.
std::vector<bool> active_samples(std::span<const double> x, std::size_t frame,
                                 std::size_t hop, double threshold_db);

/// Keeps only active samples (25 ms frames, 10 ms hop, 35 dB rule).
std::vector<double> remove_silence(std::span<const double> x);

/// LPC-shaped Gaussian noise with unit RMS.
std::vector<double> gen_ssn(std::span<const double> source, std::size_t order,
                            std::size_t length, std::uint64_t seed);

/// Average of >= 6 signals after unit-RMS scaling and silence removal; all
/// are truncated to the shortest trimmed length.
std::vector<double> gen_babble(std::span<const std::vector<double>> signals);

/// Energies of clean and noise summed over the frames (512, hop 256) where
/// the clean signal is active under the 35 dB rule.
struct ActiveEnergy {
  double clean = 0.0;
  double noise = 0.0;
};
ActiveEnergy active_energy(std::span<const double> clean, std::span<const double> noise);

struct Mixture {
  std::vector<double> noisy;
  std::vector<double> noise;  // scaled noise, noisy = clean + noise
  double gain = 0.0;
};

/// Scales `noise` (cyclically extended or cut to the clean length) so the
/// active-frame energy ratio equals `target_db`.
Mixture mix_at_ssnr(std::span<const double> clean, std::span<const double> noise,
                    double target_db);

/// Re-measures 10 log10(E_clean / E_noise) over the same active frames.
double measured_snr(std::span<const double> clean, std::span<const double> noise);

/// Harmonic "speech" (3-8 harmonics, f0 80-300 Hz, 2-8 Hz syllabic
/// envelope) plus band-limited aspiration noise. Peak 1.
std::vector<double> synth_speech(std::size_t length, std::uint64_t seed);

std::vector<double> synth_noise(NoiseType type, std::size_t length, std::uint64_t seed);

struct MixtureSpec {
  std::string split;
  std::string clean_path, noise_path, noisy_path;  // relative to the corpus root
  NoiseType noise_type = NoiseType::kWhite;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<MixtureSpec> entries;

  std::vector<const MixtureSpec*> split(const std::string& name) const;
};

struct CorpusOptions {
  std::filesystem::path out_dir;
  std::size_t train_clips = 32;
  std::size_t valid_clips = 4;
  std::size_t test_clips = 4;
  double duration_s = 2.0;
  std::uint64_t seed = 0;
};

/// Noise seeds carry the split index in their top byte, so realizations in
/// different splits never coincide.
std::uint64_t noise_seed(std::size_t split_index, std::uint64_t base_seed, std::size_t clip);

/// Writes <out>/<split>/{clean,noise,noisy}/<split>_NNNN.wav and
/// <out>/manifest.tsv. The output directory must exist.
CorpusManifest synth_desk_corpus(const CorpusOptions& opts);

/// In-memory clip with the same recipe as the corpus writer (quantized).
struct Clip {
  std::vector<double> clean, noise, noisy;
  NoiseType noise_type = NoiseType::kWhite;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};
Clip make_clip(std::size_t split_index, std::size_t clip, std::size_t length,
               std::uint64_t base_seed);

void write_manifest(const CorpusManifest& m, const std::filesystem::path& path);
CorpusManifest read_manifest(const std::filesystem::path& path);

}  // namespace mambattn::datagen
