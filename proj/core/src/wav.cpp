// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "mambattn/error.hpp"

namespace mambattn::wav {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void put16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b.data(), 2);
}

}  // namespace

std::vector<std::int16_t> read_pcm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = "wav " + path.string() + ": ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError(where + "not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw DataError(where + "truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw DataError(where + "fmt chunk too short");
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t format = le16(f);
      const std::uint16_t channels = le16(f + 2);
      const std::uint32_t rate = le32(f + 4);
      const std::uint16_t bits = le16(f + 14);
      if (format != 1) {
        throw DataError(where + "format tag " + std::to_string(format) + ", expected PCM (1)");
      }
      if (channels != 1) {
        throw DataError(where + std::to_string(channels) + " channels, expected mono");
      }
      if (rate != kSampleRate) {
        throw DataError(where + "sample rate " + std::to_string(rate) + " Hz, expected 16000");
      }
      if (bits != 16) {
        throw DataError(where + std::to_string(bits) + " bits per sample, expected 16");
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw DataError(where + "data chunk before fmt chunk");
      if (size % 2 != 0) throw DataError(where + "odd data chunk size");
      std::vector<std::int16_t> out(size / 2);
      const unsigned char* d = bytes.data() + body;
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::int16_t>(le16(d + 2 * i));
      }
      return out;
    }
    pos = body + size + (size & 1);
  }
  throw DataError(where + "no data chunk");
}

void write_pcm16(const std::filesystem::path& path, const std::vector<std::int16_t>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("wav: cannot create " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, kSampleRate);
  put32(out, kSampleRate * 2);
  put16(out, 2);
  put16(out, 16);
  out.write("data", 4);
  put32(out, data_bytes);
  for (std::int16_t s : samples) put16(out, static_cast<std::uint16_t>(s));
  if (!out) throw DataError("wav: write failed for " + path.string());
}

std::int16_t quantize(double sample) {
  if (!std::isfinite(sample)) throw NumericalError("wav: non-finite sample");
  const double scaled = std::round(std::clamp(sample, -1.0, 32767.0 / 32768.0) * 32768.0);
  return static_cast<std::int16_t>(scaled);
}

std::vector<std::int16_t> quantize(const std::vector<double>& samples) {
  std::vector<std::int16_t> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = quantize(samples[i]);
  return out;
}

std::vector<double> to_double(const std::vector<std::int16_t>& samples) {
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = samples[i] / 32768.0;
  return out;
}

std::vector<double> read(const std::filesystem::path& path) {
  return to_double(read_pcm16(path));
}

void write(const std::filesystem::path& path, const std::vector<double>& samples) {
  write_pcm16(path, quantize(samples));
}

}  // namespace mambattn::wav
