// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mambattn/kv_config.hpp"
#include "mambattn/net.hpp"

namespace mambattn::checkpoint {

inline constexpr const char* kMagic = "mambattn-checkpoint";
inline constexpr int kFormatVersion = 1;

/// Writes every ModelConfig field as `<prefix><field>`.
void store_model_config(kv::Config& out, const net::ModelConfig& cfg,
                        const std::string& prefix = "");
/// Reads the fields present under `prefix`, starting from `base`.
net::ModelConfig load_model_config(const kv::Config& in, const std::string& prefix = "",
                                   net::ModelConfig base = {});

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Contents {
  int format_version = kFormatVersion;
  net::ModelConfig config;
  std::vector<TensorRecord> tensors;
};

/// Text header (magic, format_version, config.*, one `param.<name> = dims @
/// offset` line per tensor, `end`), then little-endian float32 data.
void write(const std::filesystem::path& path, const Contents& c);
Contents read(const std::filesystem::path& path);

/// Snapshot of a model's parameters in visit order (values rounded to
/// float32).
Contents capture(net::Model& model);
void save(const std::filesystem::path& path, net::Model& model);

/// Copies tensors into `model`. Throws DataError when the stored config or
/// any tensor name/shape differs from the model's.
void load_into(const Contents& c, net::Model& model);

/// Builds a model from the stored config and loads its weights.
net::Model load_model(const std::filesystem::path& path);

}  // namespace mambattn::checkpoint
