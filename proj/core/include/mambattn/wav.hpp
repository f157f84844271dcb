// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mambattn::wav {

inline constexpr std::uint32_t kSampleRate = 16000;

/// Reads a 16-bit PCM mono 16 kHz file as raw integer samples. Anything else
/// raises DataError naming the path and the offending field.
std::vector<std::int16_t> read_pcm16(const std::filesystem::path& path);
void write_pcm16(const std::filesystem::path& path, const std::vector<std::int16_t>& samples);

/// Samples scaled to [-1, 1) by 1/32768.
std::vector<double> read(const std::filesystem::path& path);
/// Rounds to the nearest integer step after clamping to [-1, 32767/32768].
void write(const std::filesystem::path& path, const std::vector<double>& samples);

std::int16_t quantize(double sample);
std::vector<std::int16_t> quantize(const std::vector<double>& samples);
std::vector<double> to_double(const std::vector<std::int16_t>& samples);

}  // namespace mambattn::wav
