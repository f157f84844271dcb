// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mambattn/datagen.hpp"
#include "mambattn/kv_config.hpp"
#include "mambattn/losses.hpp"
#include "mambattn/net.hpp"
#include "mambattn/optim.hpp"

namespace mambattn::train {

enum class SelectMetric { kSiSdr, kEstoi };
std::string to_string(SelectMetric m);
SelectMetric parse_select_metric(const std::string& text);

struct RunConfig {
  net::ModelConfig model;
  losses::LossWeights weights;
  optim::AdamWConfig optimizer;
  double lr_decay = 0.99;      // per epoch
  std::size_t batch_size = 2;
  std::size_t crop = 32000;    // samples, a multiple of the STFT hop
  std::size_t steps = 1000;
  std::size_t eval_every = 0;  // 0: only after the last step
  SelectMetric select_metric = SelectMetric::kSiSdr;
  bool use_discriminator = true;
  std::uint64_t seed = 0;
  std::filesystem::path manifest;
  std::filesystem::path checkpoint;  // best checkpoint, empty to skip saving
  std::filesystem::path log;         // empty: log to the stream given to run()

  void validate() const;
};

/// Keys: model fields by name, weight.{time,magnitude,complex,phase,
/// consistency,adversarial}, lr, beta1, beta2, eps, weight_decay, lr_decay,
/// batch_size, crop, steps, eval_every, select_metric, use_discriminator,
/// seed, manifest, checkpoint, log.
RunConfig load_run_config(const kv::Config& in, RunConfig base = {});
void store_run_config(kv::Config& out, const RunConfig& cfg);

struct Example {
  std::string id;
  std::vector<double> clean, noisy;
};

/// Loads the clean and noisy files of one manifest split.
std::vector<Example> load_split(const datagen::CorpusManifest& manifest, const std::string& split);

struct StepLog {
  std::size_t step = 0;  // 1-based
  std::size_t epoch = 0;
  double lr = 0.0;
  double generator = 0.0;
  double time = 0.0, magnitude = 0.0, complex = 0.0, phase = 0.0, consistency = 0.0,
         adversarial = 0.0;
  double discriminator = 0.0;
};
/// One key=value line.
std::string format(const StepLog& log);

/// Enhances a single waveform (any length >= one STFT window).
std::vector<double> enhance(const net::Model& model, std::span<const double> noisy);

struct RunResult {
  std::vector<StepLog> history;
  double best_metric = 0.0;
  std::size_t best_step = 0;
};

class Trainer {
 public:
  Trainer(RunConfig cfg, std::vector<Example> train, std::vector<Example> valid = {});

  /// One generator step, preceded by a discriminator step when enabled.
  StepLog step();
  /// Mean selection metric of the enhanced validation clips.
  double validate() const;
  /// Generator loss terms averaged over whole examples, without recording
  /// or updating anything. Uses the current discriminator.
  StepLog evaluate_loss(std::span<const Example> examples) const;
  RunResult run(std::ostream& log);

  net::Model& model() { return *model_; }
  losses::Discriminator& discriminator() { return *disc_; }
  const RunConfig& config() const { return cfg_; }
  std::size_t steps_done() const { return step_; }

 private:
  Tensor next_batch(Tensor& clean);
  losses::GeneratorTerms generator_terms(const Tensor& clean, const net::SpectralFeatures& target,
                                         const net::ModelOutput& out) const;

  RunConfig cfg_;
  std::vector<Example> train_, valid_;
  std::unique_ptr<net::Model> model_;
  std::unique_ptr<losses::Discriminator> disc_;
  std::unique_ptr<optim::AdamW> g_opt_, d_opt_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  std::size_t step_ = 0;
};

}  // namespace mambattn::train
