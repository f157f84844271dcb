// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mambattn/error.hpp"

namespace mambattn::checkpoint {
namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string format_shape(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out.empty() ? "scalar" : out;
}

Shape parse_shape(const std::string& text, const std::string& name) {
  Shape s;
  if (text == "scalar") return s;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      s.push_back(std::stoull(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw DataError("checkpoint: bad shape '" + text + "' for " + name);
    }
  }
  return s;
}

}  // namespace

void store_model_config(kv::Config& out, const net::ModelConfig& cfg,
                        const std::string& prefix) {
  out.set(prefix + "channels", std::to_string(cfg.channels));
  out.set(prefix + "layers", std::to_string(cfg.layers));
  out.set(prefix + "heads", std::to_string(cfg.heads));
  out.set(prefix + "expand", std::to_string(cfg.expand));
  out.set(prefix + "ssm_state", std::to_string(cfg.ssm_state));
  out.set(prefix + "conv_width", std::to_string(cfg.conv_width));
  out.set(prefix + "dense_depth", std::to_string(cfg.dense_depth));
  out.set(prefix + "compression", format_double(cfg.compression));
  out.set(prefix + "sigmoid_beta", format_double(cfg.sigmoid_beta));
  out.set(prefix + "variant", net::to_string(cfg.variant));
  out.set(prefix + "attention_bias", cfg.attention_bias ? "true" : "false");
  out.set(prefix + "zero_init_residual", cfg.zero_init_residual ? "true" : "false");
  out.set(prefix + "fft_size", std::to_string(cfg.stft.fft_size));
  out.set(prefix + "window_length", std::to_string(cfg.stft.window_length));
  out.set(prefix + "hop", std::to_string(cfg.stft.hop));
}

net::ModelConfig load_model_config(const kv::Config& in, const std::string& prefix,
                                   net::ModelConfig c) {
  c.channels = in.get_size(prefix + "channels", c.channels);
  c.layers = in.get_size(prefix + "layers", c.layers);
  c.heads = in.get_size(prefix + "heads", c.heads);
  c.expand = in.get_size(prefix + "expand", c.expand);
  c.ssm_state = in.get_size(prefix + "ssm_state", c.ssm_state);
  c.conv_width = in.get_size(prefix + "conv_width", c.conv_width);
  c.dense_depth = in.get_size(prefix + "dense_depth", c.dense_depth);
  c.compression = in.get_double(prefix + "compression", c.compression);
  c.sigmoid_beta = in.get_double(prefix + "sigmoid_beta", c.sigmoid_beta);
  if (in.has(prefix + "variant")) {
    try {
      c.variant = net::parse_variant(in.get_string(prefix + "variant", ""));
    } catch (const ShapeError& e) {
      throw DataError(e.what());
    }
  }
  c.attention_bias = in.get_bool(prefix + "attention_bias", c.attention_bias);
  c.zero_init_residual = in.get_bool(prefix + "zero_init_residual", c.zero_init_residual);
  c.stft.fft_size = in.get_size(prefix + "fft_size", c.stft.fft_size);
  c.stft.window_length = in.get_size(prefix + "window_length", c.stft.window_length);
  c.stft.hop = in.get_size(prefix + "hop", c.stft.hop);
  return c;
}

void write(const std::filesystem::path& path, const Contents& c) {
  std::ostringstream header;
  header << kMagic << '\n' << "format_version = " << c.format_version << '\n';
  kv::Config cfg;
  store_model_config(cfg, c.config, "config.");
  for (const auto& [k, v] : cfg.values()) header << k << " = " << v << '\n';
  std::size_t offset = 0;
  for (const auto& t : c.tensors) {
    if (t.values.size() != numel(t.shape)) {
      throw ShapeError("checkpoint: tensor " + t.name + " has " +
                       std::to_string(t.values.size()) + " values for shape " +
                       to_string(t.shape));
    }
    header << "param." << t.name << " = " << format_shape(t.shape) << " @ " << offset << '\n';
    offset += 4 * t.values.size();
  }
  header << "end\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot create " + path.string());
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& t : c.tensors) {
    for (float f : t.values) {
      const auto bits = std::bit_cast<std::uint32_t>(f);
      const char b[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff),
                         static_cast<char>((bits >> 24) & 0xff)};
      out.write(b, 4);
    }
  }
  if (!out) throw DataError("checkpoint: write failed for " + path.string());
}

Contents read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  const std::string where = "checkpoint " + path.string() + ": ";
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw DataError(where + "bad magic line");
  std::ostringstream header;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    header << line << '\n';
  }
  if (!ended) throw DataError(where + "header has no end marker");
  std::istringstream hs(header.str());
  const kv::Config kv = kv::Config::parse(hs, path.string());

  Contents c;
  c.format_version = static_cast<int>(kv.get_size("format_version", 0));
  if (c.format_version != kFormatVersion) {
    throw DataError(where + "unsupported format_version " + std::to_string(c.format_version));
  }
  c.config = load_model_config(kv, "config.");

  struct Pending {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Pending> pending;
  // The map is sorted by key; restore write order from the byte offsets.
  for (const auto& [k, v] : kv.values()) {
    if (k.rfind("param.", 0) != 0) continue;
    const auto at = v.find('@');
    if (at == std::string::npos) throw DataError(where + "bad tensor entry " + k);
    std::string dims = v.substr(0, at), off = v.substr(at + 1);
    while (!dims.empty() && dims.back() == ' ') dims.pop_back();
    while (!off.empty() && off.front() == ' ') off.erase(0, 1);
    kv::Config tmp;
    tmp.set(k, off);
    pending.push_back({k.substr(6), parse_shape(dims, k), tmp.get_size(k, 0)});
  }
  std::sort(pending.begin(), pending.end(),
            [](const Pending& a, const Pending& b) { return a.offset < b.offset; });

  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t expected = 0;
  for (const auto& p : pending) {
    if (p.offset != expected) throw DataError(where + "non-contiguous offset for " + p.name);
    const std::size_t n = numel(p.shape);
    if (p.offset + 4 * n > blob.size()) throw DataError(where + "truncated data for " + p.name);
    TensorRecord t{p.name, p.shape, std::vector<float>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      const auto* b = reinterpret_cast<const unsigned char*>(blob.data() + p.offset + 4 * i);
      const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                 (static_cast<std::uint32_t>(b[1]) << 8) |
                                 (static_cast<std::uint32_t>(b[2]) << 16) |
                                 (static_cast<std::uint32_t>(b[3]) << 24);
      t.values[i] = std::bit_cast<float>(bits);
    }
    expected = p.offset + 4 * n;
    c.tensors.push_back(std::move(t));
  }
  if (expected != blob.size()) throw DataError(where + "trailing bytes after tensor data");
  return c;
}

Contents capture(net::Model& model) {
  Contents c;
  c.config = model.config();
  for (auto& p : model.parameters()) {
    TensorRecord t{p.name, p.tensor.shape(), std::vector<float>(p.tensor.numel())};
    const auto d = p.tensor.data();
    for (std::size_t i = 0; i < d.size(); ++i) t.values[i] = static_cast<float>(d[i]);
    c.tensors.push_back(std::move(t));
  }
  return c;
}

void save(const std::filesystem::path& path, net::Model& model) { write(path, capture(model)); }

void load_into(const Contents& c, net::Model& model) {
  if (!(c.config == model.config())) {
    kv::Config a, b;
    store_model_config(a, c.config);
    store_model_config(b, model.config());
    for (const auto& [k, v] : a.values()) {
      if (b.get_string(k, "") != v) {
        throw DataError("checkpoint: config mismatch on '" + k + "': checkpoint has " + v +
                        ", model has " + b.get_string(k, ""));
      }
    }
    throw DataError("checkpoint: config mismatch");
  }
  auto params = model.parameters();
  if (params.size() != c.tensors.size()) {
    throw DataError("checkpoint: " + std::to_string(c.tensors.size()) +
                    " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = c.tensors[i];
    if (t.name != params[i].name || t.shape != params[i].tensor.shape()) {
      throw DataError("checkpoint: tensor " + t.name + " " + to_string(t.shape) +
                      " does not match model tensor " + params[i].name + " " +
                      to_string(params[i].tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto d = params[i].tensor.data();
    const auto& v = c.tensors[i].values;
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = static_cast<double>(v[j]);
  }
}

net::Model load_model(const std::filesystem::path& path) {
  const Contents c = read(path);
  net::Model model(c.config);
  load_into(c, model);
  return model;
}

}  // namespace mambattn::checkpoint
