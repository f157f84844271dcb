// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "mambattn/error.hpp"
#include "mambattn/lpc.hpp"
#include "mambattn/wav.hpp"

namespace mambattn::datagen {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::array<const char*, 3> kSplits{"train", "valid", "test"};

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

std::vector<double> cyclic(std::span<const double> x, std::size_t length) {
  if (x.empty()) throw DataError("cannot extend an empty signal");
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = x[i % x.size()];
  return out;
}

void scale_to_unit_rms(std::vector<double>& x) {
  const double r = rms(x);
  if (r > 0.0) {
    for (double& v : x) v /= r;
  }
}

struct Framing {
  std::vector<std::size_t> starts;
  std::size_t frame;
};

Framing frames_of(std::size_t n, std::size_t frame, std::size_t hop) {
  Framing f;
  f.frame = std::min(frame, n);
  for (std::size_t s = 0; s + f.frame <= n; s += hop) {
    f.starts.push_back(s);
    if (f.frame == n) break;
  }
  return f;
}

std::vector<double> frame_energy_db(std::span<const double> x, const Framing& f) {
  std::vector<double> out;
  for (std::size_t s : f.starts) {
    double e = 0.0;
    for (std::size_t n = s; n < s + f.frame; ++n) e += x[n] * x[n];
    out.push_back(10.0 * std::log10(e + 1e-300));
  }
  return out;
}

std::vector<bool> frame_activity(std::span<const double> x, const Framing& f,
                                 double threshold_db) {
  const auto db = frame_energy_db(x, f);
  const double peak = db.empty() ? 0.0 : *std::max_element(db.begin(), db.end());
  std::vector<bool> active(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) active[i] = db[i] >= peak - threshold_db;
  return active;
}

}  // namespace

std::string to_string(NoiseType t) {
  switch (t) {
    case NoiseType::kSsn: return "ssn";
    case NoiseType::kBabble: return "babble";
    case NoiseType::kWhite: return "white";
    case NoiseType::kTonal: return "tonal-harmonic";
  }
  return "white";
}

NoiseType parse_noise_type(const std::string& text) {
  if (text == "ssn") return NoiseType::kSsn;
  if (text == "babble") return NoiseType::kBabble;
  if (text == "white") return NoiseType::kWhite;
  if (text == "tonal-harmonic") return NoiseType::kTonal;
  throw DataError("unknown noise type '" + text + "'");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<bool> active_samples(std::span<const double> x, std::size_t frame,
                                 std::size_t hop, double threshold_db) {
  std::vector<bool> out(x.size(), false);
  if (x.empty()) return out;
  const Framing f = frames_of(x.size(), frame, hop);
  const auto active = frame_activity(x, f, threshold_db);
  for (std::size_t i = 0; i < f.starts.size(); ++i) {
    if (!active[i]) continue;
    for (std::size_t n = f.starts[i]; n < f.starts[i] + f.frame; ++n) out[n] = true;
  }
  const std::size_t covered = f.starts.back() + f.frame;
  for (std::size_t n = covered; n < x.size(); ++n) out[n] = active.back();
  return out;
}

std::vector<double> remove_silence(std::span<const double> x) {
  const auto active = active_samples(x, 400, 160, 35.0);
  std::vector<double> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (active[i]) out.push_back(x[i]);
  }
  return out;
}

std::vector<double> gen_ssn(std::span<const double> source, std::size_t order,
                            std::size_t length, std::uint64_t seed) {
  const lpc::Predictor p = lpc::analyze(source, order);
  constexpr std::size_t kWarmup = 1024;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> e(length + kWarmup);
  for (double& v : e) v = gauss(rng);
  auto y = lpc::synthesize(p, e);
  std::vector<double> out(y.begin() + kWarmup, y.end());
  scale_to_unit_rms(out);
  return out;
}

std::vector<double> gen_babble(std::span<const std::vector<double>> signals) {
  if (signals.size() < 6) {
    throw DataError("gen_babble: need 6 signals, got " + std::to_string(signals.size()));
  }
  std::vector<std::vector<double>> trimmed;
  std::size_t shortest = SIZE_MAX;
  for (const auto& s : signals) {
    std::vector<double> x = s;
    scale_to_unit_rms(x);
    trimmed.push_back(remove_silence(x));
    shortest = std::min(shortest, trimmed.back().size());
  }
  if (shortest == 0) throw DataError("gen_babble: an input is empty after silence removal");
  std::vector<double> out(shortest, 0.0);
  for (const auto& t : trimmed)
    for (std::size_t i = 0; i < shortest; ++i) out[i] += t[i];
  const double inv = 1.0 / static_cast<double>(trimmed.size());
  for (double& v : out) v *= inv;
  return out;
}

ActiveEnergy active_energy(std::span<const double> clean, std::span<const double> noise) {
  if (clean.size() != noise.size()) {
    throw DataError("active_energy: clean has " + std::to_string(clean.size()) +
                    " samples, noise " + std::to_string(noise.size()));
  }
  ActiveEnergy e;
  if (clean.empty()) return e;
  const Framing f = frames_of(clean.size(), 512, 256);
  const auto active = frame_activity(clean, f, 35.0);
  for (std::size_t i = 0; i < f.starts.size(); ++i) {
    if (!active[i]) continue;
    for (std::size_t n = f.starts[i]; n < f.starts[i] + f.frame; ++n) {
      e.clean += clean[n] * clean[n];
      e.noise += noise[n] * noise[n];
    }
  }
  return e;
}

Mixture mix_at_ssnr(std::span<const double> clean, std::span<const double> noise,
                    double target_db) {
  if (!std::isfinite(target_db)) throw DataError("mix_at_ssnr: target SNR must be finite");
  std::vector<double> n = cyclic(noise, clean.size());
  const ActiveEnergy e = active_energy(clean, n);
  if (!(e.clean > 0.0)) throw DataError("mix_at_ssnr: clean signal has no active energy");
  if (!(e.noise > 0.0)) throw DataError("mix_at_ssnr: noise has no energy in active frames");
  Mixture m;
  m.gain = std::sqrt(e.clean / (e.noise * std::pow(10.0, target_db / 10.0)));
  m.noise.resize(clean.size());
  m.noisy.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    m.noise[i] = m.gain * n[i];
    m.noisy[i] = clean[i] + m.noise[i];
  }
  return m;
}

double measured_snr(std::span<const double> clean, std::span<const double> noise) {
  const ActiveEnergy e = active_energy(clean, noise);
  return 10.0 * std::log10(e.clean / e.noise);
}

std::vector<double> synth_speech(std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const double f0 = range(80.0, 300.0);
  const int harmonics = 3 + static_cast<int>(u(rng) * 6.0);  // 3..8
  const double glide_rate = range(0.2, 0.6), glide_depth = range(0.05, 0.15);
  const double syllable_rate = range(2.0, 8.0);
  const double glide_phase = range(0.0, kTwoPi), syllable_phase = range(0.0, kTwoPi);
  std::vector<double> amp(harmonics), offset(harmonics);
  for (int h = 0; h < harmonics; ++h) {
    amp[h] = range(0.3, 1.0) / (h + 1);
    offset[h] = range(0.0, kTwoPi);
  }
  const double breath = range(0.03, 0.12);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Aspiration band 1.5-5 kHz as a difference of one-pole lowpass filters.
  const double c_hi = std::exp(-kTwoPi * 5000.0 / kSampleRate);
  const double c_lo = std::exp(-kTwoPi * 1500.0 / kSampleRate);
  double lp_hi = 0.0, lp_lo = 0.0, phase = 0.0;
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    const double f = f0 * (1.0 + glide_depth * std::sin(kTwoPi * glide_rate * t + glide_phase));
    phase += kTwoPi * f / kSampleRate;
    const double s = 0.5 - 0.5 * std::cos(kTwoPi * syllable_rate * t + syllable_phase);
    const double env = s * s;
    double v = 0.0;
    for (int h = 0; h < harmonics; ++h) {
      if (f * (h + 1) >= 0.47 * kSampleRate) break;
      v += amp[h] * std::sin((h + 1) * phase + offset[h]);
    }
    const double w = gauss(rng);
    lp_hi = (1.0 - c_hi) * w + c_hi * lp_hi;
    lp_lo = (1.0 - c_lo) * w + c_lo * lp_lo;
    out[i] = env * (v + breath * 4.0 * (lp_hi - lp_lo));
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : out) v /= peak;
  }
  return out;
}

std::vector<double> synth_noise(NoiseType type, std::size_t length, std::uint64_t seed) {
  std::vector<double> out;
  switch (type) {
    case NoiseType::kWhite: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      out.resize(length);
      for (double& v : out) v = gauss(rng);
      break;
    }
    case NoiseType::kTonal: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      const double f = 50.0 + 350.0 * u(rng);
      const int harmonics = 3 + static_cast<int>(u(rng) * 4.0);  // 3..6
      std::vector<double> amp(harmonics), offset(harmonics);
      for (int h = 0; h < harmonics; ++h) {
        amp[h] = 0.2 + 0.8 * u(rng);
        offset[h] = kTwoPi * u(rng);
      }
      out.resize(length);
      for (std::size_t i = 0; i < length; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        double v = 0.05 * gauss(rng);
        for (int h = 0; h < harmonics; ++h) {
          v += amp[h] * std::sin(kTwoPi * f * (h + 1) * t + offset[h]);
        }
        out[i] = v;
      }
      break;
    }
    case NoiseType::kSsn: {
      const auto source = synth_speech(std::max<std::size_t>(length, 8000), splitmix64(seed));
      out = gen_ssn(source, 12, length, seed);
      break;
    }
    case NoiseType::kBabble: {
      std::vector<std::vector<double>> talkers;
      for (std::uint64_t k = 0; k < 6; ++k) {
        talkers.push_back(synth_speech(2 * length + 8000, splitmix64(seed + 1 + k)));
      }
      out = cyclic(gen_babble(talkers), length);
      break;
    }
  }
  scale_to_unit_rms(out);
  return out;
}

std::vector<const MixtureSpec*> CorpusManifest::split(const std::string& name) const {
  std::vector<const MixtureSpec*> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(&e);
  }
  return out;
}

std::uint64_t noise_seed(std::size_t split_index, std::uint64_t base_seed, std::size_t clip) {
  const std::uint64_t body = splitmix64(splitmix64(base_seed) ^ (clip * 0x2545f4914f6cdd1dULL)) >> 8;
  return (static_cast<std::uint64_t>(split_index + 1) << 56) | body;
}

Clip make_clip(std::size_t split_index, std::size_t clip, std::size_t length,
               std::uint64_t base_seed) {
  Clip c;
  c.snr_db = kSnrGrid[clip % kSnrGrid.size()];
  c.noise_type = kNoiseTypes[clip % kNoiseTypes.size()];
  c.seed = noise_seed(split_index, base_seed, clip);
  const std::uint64_t speech_seed = splitmix64(c.seed ^ 0x5eed5eed5eed5eedULL);
  const auto clean = synth_speech(length, speech_seed);
  const auto noise = synth_noise(c.noise_type, length, c.seed);
  const Mixture m = mix_at_ssnr(clean, noise, c.snr_db);
  double peak = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    peak = std::max({peak, std::abs(clean[i]), std::abs(m.noise[i]), std::abs(m.noisy[i])});
  }
  const double s = peak > 0.0 ? 0.95 / peak : 1.0;
  std::vector<std::int16_t> cq(length), nq(length), yq(length);
  for (std::size_t i = 0; i < length; ++i) {
    cq[i] = wav::quantize(s * clean[i]);
    nq[i] = wav::quantize(s * m.noise[i]);
    yq[i] = static_cast<std::int16_t>(cq[i] + nq[i]);
  }
  c.clean = wav::to_double(cq);
  c.noise = wav::to_double(nq);
  c.noisy = wav::to_double(yq);
  return c;
}

CorpusManifest synth_desk_corpus(const CorpusOptions& opts) {
  if (opts.train_clips == 0) throw DataError("corpus: need at least one training clip");
  if (!(opts.duration_s > 0.0)) throw DataError("corpus: duration must be positive");
  if (!std::filesystem::is_directory(opts.out_dir)) {
    throw DataError("corpus: output directory " + opts.out_dir.string() + " does not exist");
  }
  const auto length = static_cast<std::size_t>(std::llround(opts.duration_s * kSampleRate));
  const std::array<std::size_t, 3> counts{opts.train_clips, opts.valid_clips, opts.test_clips};
  CorpusManifest m;
  m.root = opts.out_dir;
  for (std::size_t s = 0; s < kSplits.size(); ++s) {
    if (counts[s] == 0) continue;
    const std::string split = kSplits[s];
    for (const char* kind : {"clean", "noise", "noisy"}) {
      const auto dir = opts.out_dir / split / kind;
      std::error_code ec;
      std::filesystem::create_directories(dir, ec);
      if (ec) throw DataError("corpus: cannot create " + dir.string() + ": " + ec.message());
    }
    for (std::size_t i = 0; i < counts[s]; ++i) {
      const Clip c = make_clip(s, i, length, opts.seed);
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04zu.wav", split.c_str(), i);
      MixtureSpec spec;
      spec.split = split;
      spec.clean_path = split + "/clean/" + name;
      spec.noise_path = split + "/noise/" + name;
      spec.noisy_path = split + "/noisy/" + name;
      spec.noise_type = c.noise_type;
      spec.snr_db = c.snr_db;
      spec.seed = c.seed;
      wav::write(opts.out_dir / spec.clean_path, c.clean);
      wav::write(opts.out_dir / spec.noise_path, c.noise);
      wav::write(opts.out_dir / spec.noisy_path, c.noisy);
      m.entries.push_back(spec);
    }
  }
  write_manifest(m, opts.out_dir / "manifest.tsv");
  return m;
}

void write_manifest(const CorpusManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("manifest: cannot create " + path.string());
  for (const auto& e : m.entries) {
    out << e.split << '\t' << e.clean_path << '\t' << e.noise_path << '\t' << e.noisy_path
        << '\t' << to_string(e.noise_type) << '\t' << e.snr_db << '\t' << e.seed << '\n';
  }
  if (!out) throw DataError("manifest: write failed for " + path.string());
}

CorpusManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open " + path.string());
  CorpusManifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 7) {
      throw DataError("manifest " + path.string() + ":" + std::to_string(line_no) +
                      ": expected 7 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    MixtureSpec e;
    e.split = fields[0];
    e.clean_path = fields[1];
    e.noise_path = fields[2];
    e.noisy_path = fields[3];
    e.noise_type = parse_noise_type(fields[4]);
    try {
      e.snr_db = std::stod(fields[5]);
      e.seed = std::stoull(fields[6]);
    } catch (const std::exception&) {
      throw DataError("manifest " + path.string() + ":" + std::to_string(line_no) +
                      ": bad snr or seed field");
    }
    m.entries.push_back(e);
  }
  return m;
}

}  // namespace mambattn::datagen
