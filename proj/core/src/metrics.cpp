// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <numbers>

#include "mambattn/error.hpp"

namespace mambattn::metrics {
namespace {

void equal_lengths(const char* op, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError(std::string(op) + ": reference has " + std::to_string(a.size()) +
                    " samples, estimate has " + std::to_string(b.size()));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Symmetric Hann of length n without its zero end points (n + 2 taps, ends
// dropped).
std::vector<double> inner_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) /
                                static_cast<double>(n + 1));
  }
  return w;
}

// Drops frames of `ref` more than `range_db` below its loudest frame and
// overlap-adds the kept frames of both signals.
void remove_silent_frames(std::span<const double> ref, std::span<const double> est,
                          const EstoiConfig& cfg, std::vector<double>& ref_out,
                          std::vector<double>& est_out) {
  const std::size_t len = cfg.frame, hop = cfg.hop;
  const auto w = inner_hann(len);
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i + len <= ref.size(); i += hop) starts.push_back(i);
  std::vector<double> energy(starts.size());
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t f = 0; f < starts.size(); ++f) {
    double e = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      const double v = w[n] * ref[starts[f] + n];
      e += v * v;
    }
    energy[f] = 20.0 * std::log10(std::sqrt(e) + eps);
  }
  const double peak = energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());
  std::vector<std::size_t> kept;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    if (peak - cfg.dynamic_range_db - energy[f] < 0.0) kept.push_back(starts[f]);
  }
  const std::size_t out_len = kept.empty() ? 0 : (kept.size() - 1) * hop + len;
  ref_out.assign(out_len, 0.0);
  est_out.assign(out_len, 0.0);
  for (std::size_t j = 0; j < kept.size(); ++j)
    for (std::size_t n = 0; n < len; ++n) {
      ref_out[j * hop + n] += w[n] * ref[kept[j] + n];
      est_out[j * hop + n] += w[n] * est[kept[j] + n];
    }
}

// Band envelopes, bands x frames (row-major).
std::vector<double> band_envelopes(const std::vector<double>& x, const EstoiConfig& cfg,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& bands,
                                   std::size_t& frames) {
  const std::size_t len = cfg.frame, hop = cfg.hop, nfft = cfg.fft_size;
  const std::size_t bins = nfft / 2 + 1;
  const auto w = inner_hann(len);
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i + len < x.size(); i += hop) starts.push_back(i);
  frames = starts.size();
  std::vector<double> cos_t(nfft), sin_t(nfft);
  for (std::size_t n = 0; n < nfft; ++n) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(nfft);
    cos_t[n] = std::cos(a);
    sin_t[n] = std::sin(a);
  }
  std::vector<double> power(bins), out(bands.size() * frames, 0.0), frame(len);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t n = 0; n < len; ++n) frame[n] = w[n] * x[starts[f] + n];
    for (std::size_t k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < len; ++n) {
        const std::size_t idx = (k * n) % nfft;
        re += frame[n] * cos_t[idx];
        im -= frame[n] * sin_t[idx];
      }
      power[k] = re * re + im * im;
    }
    for (std::size_t b = 0; b < bands.size(); ++b) {
      double s = 0.0;
      for (std::size_t k = bands[b].first; k < bands[b].second; ++k) s += power[k];
      out[b * frames + f] = std::sqrt(s);
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> third_octave_bands(const EstoiConfig& cfg) {
  const std::size_t bins = cfg.fft_size / 2 + 1;
  auto nearest_bin = [&](double hz) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = cfg.sample_rate * static_cast<double>(k) / static_cast<double>(cfg.fft_size);
      const double d = (f - hz) * (f - hz);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };
  std::vector<std::pair<std::size_t, std::size_t>> bands;
  for (std::size_t b = 0; b < cfg.bands; ++b) {
    const double k = static_cast<double>(b);
    const double lo = cfg.min_frequency * std::pow(2.0, (2.0 * k - 1.0) / 6.0);
    const double hi = cfg.min_frequency * std::pow(2.0, (2.0 * k + 1.0) / 6.0);
    bands.emplace_back(nearest_bin(lo), nearest_bin(hi));
  }
  return bands;
}

}  // namespace

double si_sdr(std::span<const double> ref, std::span<const double> est) {
  equal_lengths("si_sdr", ref, est);
  const double rr = dot(ref, ref);
  if (!(rr > 0.0)) throw DataError("si_sdr: reference signal is all zeros");
  const double alpha = dot(est, ref) / rr;
  double signal = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double s = alpha * ref[i];
    const double e = est[i] - s;
    signal += s * s;
    noise += e * e;
  }
  // A silent estimate has no projection onto the reference at all.
  if (signal == 0.0) return -kSiSdrCap;
  if (noise == 0.0) return kSiSdrCap;
  return std::clamp(10.0 * std::log10(signal / noise), -kSiSdrCap, kSiSdrCap);
}

std::vector<double> ssnr_frames(std::span<const double> ref, std::span<const double> est) {
  equal_lengths("ssnr", ref, est);
  constexpr std::size_t kFrame = 512, kHop = 256;
  std::vector<double> out;
  for (std::size_t start = 0; start + kFrame <= ref.size(); start += kHop) {
    double er = 0.0, en = 0.0;
    for (std::size_t n = start; n < start + kFrame; ++n) {
      er += ref[n] * ref[n];
      const double d = ref[n] - est[n];
      en += d * d;
    }
    if (er == 0.0) continue;
    const double v = en == 0.0 ? kSsnrMax : 10.0 * std::log10(er / en);
    out.push_back(std::clamp(v, kSsnrMin, kSsnrMax));
  }
  return out;
}

double ssnr(std::span<const double> ref, std::span<const double> est) {
  const auto frames = ssnr_frames(ref, est);
  if (frames.empty()) {
    throw DataError("ssnr: no 512-sample frame with nonzero reference energy (length " +
                    std::to_string(ref.size()) + ")");
  }
  double total = 0.0;
  for (double v : frames) total += v;
  return total / static_cast<double>(frames.size());
}

double estoi(std::span<const double> ref, std::span<const double> est,
             const EstoiConfig& cfg) {
  equal_lengths("estoi", ref, est);
  if (cfg.sample_rate != 16000.0) {
    throw DataError("estoi: sample rate must be 16000 Hz");
  }
  std::vector<double> x, y;
  remove_silent_frames(ref, est, cfg, x, y);
  const auto bands = third_octave_bands(cfg);
  std::size_t frames = 0, frames_y = 0;
  const auto xe = band_envelopes(x, cfg, bands, frames);
  const auto ye = band_envelopes(y, cfg, bands, frames_y);
  const std::size_t n = cfg.segment, j = bands.size();
  if (frames < n) {
    throw DataError("estoi: " + std::to_string(frames) +
                    " active frames, need at least " + std::to_string(n));
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  std::vector<double> xs(j * n), ys(j * n);
  auto normalize = [&](std::vector<double>& m) {
    for (std::size_t b = 0; b < j; ++b) {  // rows: each band over time
      double mean = 0.0;
      for (std::size_t t = 0; t < n; ++t) mean += m[b * n + t];
      mean /= static_cast<double>(n);
      double norm = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        m[b * n + t] -= mean;
        norm += m[b * n + t] * m[b * n + t];
      }
      norm = std::sqrt(norm) + eps;
      for (std::size_t t = 0; t < n; ++t) m[b * n + t] /= norm;
    }
    for (std::size_t t = 0; t < n; ++t) {  // columns: each frame over bands
      double mean = 0.0;
      for (std::size_t b = 0; b < j; ++b) mean += m[b * n + t];
      mean /= static_cast<double>(j);
      double norm = 0.0;
      for (std::size_t b = 0; b < j; ++b) {
        m[b * n + t] -= mean;
        norm += m[b * n + t] * m[b * n + t];
      }
      norm = std::sqrt(norm) + eps;
      for (std::size_t b = 0; b < j; ++b) m[b * n + t] /= norm;
    }
  };
  double total = 0.0;
  const std::size_t segments = frames - n + 1;
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t b = 0; b < j; ++b)
      for (std::size_t t = 0; t < n; ++t) {
        xs[b * n + t] = xe[b * frames + s + t];
        ys[b * n + t] = ye[b * frames + s + t];
      }
    normalize(xs);
    normalize(ys);
    double d = 0.0;
    for (std::size_t i = 0; i < j * n; ++i) d += xs[i] * ys[i];
    total += d / static_cast<double>(n);
  }
  return total / static_cast<double>(segments);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  double total = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    total += v;
    ++s.count;
  }
  if (s.count == 0) {
    s.mean = s.stddev = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = total / static_cast<double>(s.count);
  double var = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) var += (v - s.mean) * (v - s.mean);
  }
  s.stddev = std::sqrt(var / static_cast<double>(s.count));
  return s;
}

void MetricReport::recompute() {
  std::vector<double> a, b, c;
  for (const auto& f : files) {
    a.push_back(f.si_sdr);
    b.push_back(f.ssnr);
    c.push_back(f.estoi);
  }
  si_sdr = summarize(a);
  ssnr = summarize(b);
  estoi = summarize(c);
}

void MetricReport::write_csv(std::ostream& out) const {
  out << "id,si_sdr,ssnr,estoi\n" << std::setprecision(17);
  for (const auto& f : files) {
    out << f.id << ',' << f.si_sdr << ',' << f.ssnr << ',' << f.estoi << '\n';
  }
  out << "mean," << si_sdr.mean << ',' << ssnr.mean << ',' << estoi.mean << '\n';
  out << "std," << si_sdr.stddev << ',' << ssnr.stddev << ',' << estoi.stddev << '\n';
}

}  // namespace mambattn::metrics
