// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mambattn::scaling {

struct Options {
  std::vector<std::size_t> lengths{1024, 2048, 4096, 8192, 16384};
  std::size_t d_model = 64;
  std::size_t heads = 8;
  std::size_t d_state = 16;
  double min_seconds = 0.05;  // repeat each timing until this much wall time
  std::uint64_t seed = 0;
};

struct Row {
  std::string op;  // "scan" or "attention"
  std::size_t length = 0;
  double seconds = 0.0;  // best single forward pass
};

struct Report {
  std::vector<Row> rows;
  double scan_slope = 0.0;
  double attention_slope = 0.0;
};

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Times a selective scan (1 x L x d_model, state d_state) and a multi-head
/// self-attention forward pass at each length. Lengths must ascend.
Report measure(const Options& opts);

/// op,length,seconds
void write_csv(std::ostream& out, const Report& r);

}  // namespace mambattn::scaling
