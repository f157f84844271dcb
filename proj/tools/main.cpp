// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// mambattn: corpus generation, training, enhancement, evaluation, parameter
// audit and scan/attention timing.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "mambattn/checkpoint.hpp"
#include "mambattn/datagen.hpp"
#include "mambattn/error.hpp"
#include "mambattn/kv_config.hpp"
#include "mambattn/metrics.hpp"
#include "mambattn/net.hpp"
#include "mambattn/runtime.hpp"
#include "mambattn/scaling.hpp"
#include "mambattn/trainer.hpp"
#include "mambattn/wav.hpp"

namespace fs = std::filesystem;
using namespace mambattn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

// Flags that override config-file keys. Values stay strings so the same
// parser handles both sources.
struct Overrides {
  std::map<std::string, std::string> raw;

  void add(CLI::App* app, const std::string& flag, const std::string& key,
           const std::string& help) {
    app->add_option(flag, raw[key], help);
  }
  void apply(kv::Config& cfg) const {
    for (const auto& [k, v] : raw) {
      if (!v.empty()) cfg.set(k, v);
    }
  }
};

void add_model_flags(CLI::App* app, Overrides& o) {
  o.add(app, "--variant", "variant", "shared | unshared | attention_after | no_attention");
  o.add(app, "--channels", "channels", "model width K");
  o.add(app, "--layers", "layers", "number of blocks R");
  o.add(app, "--heads", "heads", "attention heads");
  o.add(app, "--expand", "expand", "Mamba expansion factor");
  o.add(app, "--ssm-state", "ssm_state", "state size N");
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  kv::Config tmp;
  tmp.set("SEED", s);
  return tmp.get_u64("SEED", 0);
}

std::vector<std::size_t> parse_lengths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    kv::Config tmp;
    tmp.set("length", part);
    out.push_back(tmp.get_size("length", 0));
  }
  return out;
}

int cmd_mix(const fs::path& out, std::size_t train, std::size_t valid, std::size_t test,
            double duration, std::uint64_t seed) {
  datagen::CorpusOptions opts;
  opts.out_dir = out;
  opts.train_clips = train;
  opts.valid_clips = valid;
  opts.test_clips = test;
  opts.duration_s = duration;
  opts.seed = env_seed().value_or(seed);
  const auto m = datagen::synth_desk_corpus(opts);
  std::cout << "clips=" << m.entries.size() << " manifest=" << (out / "manifest.tsv").string()
            << '\n';
  return 0;
}

train::RunConfig resolve_run_config(const std::string& config_path, const Overrides& o) {
  kv::Config cfg;
  if (!config_path.empty()) cfg = kv::Config::load(config_path);
  o.apply(cfg);
  train::RunConfig run = train::load_run_config(cfg);
  if (auto s = env_seed()) run.seed = *s;
  return run;
}

int cmd_train(const train::RunConfig& run, bool quiet) {
  if (run.manifest.empty()) throw DataError("train: --manifest is required");
  const auto manifest = datagen::read_manifest(run.manifest);
  auto train_set = train::load_split(manifest, "train");
  auto valid_set = train::load_split(manifest, "valid");
  train::Trainer trainer(run, std::move(train_set), std::move(valid_set));
  std::ostringstream sink;
  const auto result = trainer.run(quiet ? static_cast<std::ostream&>(sink) : std::cout);
  std::cout << "done steps=" << trainer.steps_done() << " best_step=" << result.best_step << ' '
            << train::to_string(run.select_metric) << '=' << std::setprecision(9)
            << result.best_metric << '\n';
  return 0;
}

net::Model load_checked(const fs::path& ckpt, const std::string& config_path,
                        const Overrides& o) {
  const auto contents = checkpoint::read(ckpt);
  net::ModelConfig cfg = contents.config;
  kv::Config kv;
  if (!config_path.empty()) kv = kv::Config::load(config_path);
  o.apply(kv);
  // Explicit model settings must agree with the checkpoint.
  cfg = checkpoint::load_model_config(kv, "", cfg);
  net::Model model(cfg);
  checkpoint::load_into(contents, model);
  return model;
}

int cmd_enhance(const net::Model& model, const fs::path& in, const fs::path& out) {
  const auto noisy = wav::read(in);
  if (noisy.size() < model.config().stft.fft_size) {
    throw DataError("enhance: " + in.string() + " is shorter than one STFT window");
  }
  const auto est = train::enhance(model, noisy);
  for (double v : est) {
    if (!std::isfinite(v)) throw NumericalError("enhance: non-finite output sample");
  }
  wav::write(out, est);
  std::cout << "wrote " << out.string() << " samples=" << est.size() << '\n';
  return 0;
}

metrics::FileScores score(const std::string& id, const std::vector<double>& ref,
                          const std::vector<double>& est) {
  return {id, metrics::si_sdr(ref, est), metrics::ssnr(ref, est), metrics::estoi(ref, est)};
}

metrics::FileScores nan_scores(const std::string& id) {
  const double nan = std::nan("");
  return {id, nan, nan, nan};
}

int cmd_evaluate(const fs::path& manifest_path, const std::string& split,
                 const std::optional<net::Model>& model, bool include_clean,
                 const std::string& out_path) {
  const auto manifest = datagen::read_manifest(manifest_path);
  const auto entries = manifest.split(split);
  if (entries.empty()) throw DataError("evaluate: split '" + split + "' is empty");
  metrics::MetricReport clean_r, noisy_r, enh_r;
  std::vector<std::string> missing;
  bool failed = false;
  for (const auto* e : entries) {
    const std::string id = fs::path(e->noisy_path).stem().string();
    std::vector<double> clean, noisy;
    try {
      clean = wav::read(manifest.root / e->clean_path);
      noisy = wav::read(manifest.root / e->noisy_path);
    } catch (const DataError& err) {
      missing.push_back(err.what());
      continue;
    }
    if (include_clean) clean_r.files.push_back(score(id, clean, clean));
    noisy_r.files.push_back(score(id, clean, noisy));
    if (!model) {
      enh_r.files.push_back(nan_scores(id));
      continue;
    }
    try {
      const auto est = train::enhance(*model, noisy);
      enh_r.files.push_back(score(id, clean, est));
    } catch (const std::exception& err) {
      std::cerr << "enhance failed for " << id << ": " << err.what() << '\n';
      enh_r.files.push_back(nan_scores(id));
      failed = true;
    }
  }
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw DataError("evaluate: cannot create " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "condition,id,si_sdr,ssnr,estoi\n" << std::setprecision(17);
  auto emit = [&](const std::string& cond, metrics::MetricReport& r) {
    r.recompute();
    for (const auto& f : r.files) {
      out << cond << ',' << f.id << ',' << f.si_sdr << ',' << f.ssnr << ',' << f.estoi << '\n';
    }
    out << cond << ",mean," << r.si_sdr.mean << ',' << r.ssnr.mean << ',' << r.estoi.mean << '\n';
    out << cond << ",std," << r.si_sdr.stddev << ',' << r.ssnr.stddev << ',' << r.estoi.stddev
        << '\n';
  };
  if (include_clean) emit("clean", clean_r);
  emit("noisy", noisy_r);
  emit("enhanced", enh_r);
  std::cerr << "pesq: unavailable\n";
  for (const auto& m : missing) std::cerr << "missing: " << m << '\n';
  if (!missing.empty()) return kExitData;
  if (failed) return kExitNumerical;
  return 0;
}

int cmd_bench(const std::string& lengths, std::size_t dim, std::size_t heads, std::size_t state,
              double min_seconds) {
  scaling::Options opts;
  opts.lengths = parse_lengths(lengths);
  opts.d_model = dim;
  opts.heads = heads;
  opts.d_state = state;
  opts.min_seconds = min_seconds;
  const auto report = scaling::measure(opts);
  scaling::write_csv(std::cout, report);
  std::cerr << std::setprecision(4) << "scan_slope=" << report.scan_slope
            << " attention_slope=" << report.attention_slope << '\n';
  return 0;
}

int cmd_params(const train::RunConfig& run, bool all) {
  auto print = [](const net::ModelConfig& cfg) {
    const auto b = net::parameter_breakdown(cfg);
    std::cout << "variant=" << net::to_string(cfg.variant) << " encoder=" << b.encoder
              << " blocks=" << b.blocks << " attention=" << b.attention
              << " mask_decoder=" << b.mask_decoder << " phase_decoder=" << b.phase_decoder
              << " total=" << b.total << '\n';
    return b.total;
  };
  if (!all) {
    print(run.model);
    return 0;
  }
  net::ModelConfig cfg = run.model;
  cfg.variant = net::Variant::kShared;
  const double shared = static_cast<double>(print(cfg));
  cfg.variant = net::Variant::kUnshared;
  print(cfg);
  cfg.variant = net::Variant::kAttentionAfter;
  print(cfg);
  cfg.variant = net::Variant::kNoAttention;
  const double none = static_cast<double>(print(cfg));
  std::cout << std::setprecision(4) << "attention_overhead_percent="
            << 100.0 * (shared - none) / none << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  mambattn::runtime::tune_allocator();
  CLI::App app{"mambattn speech enhancement toolkit"};
  app.require_subcommand(1);

  auto* mix = app.add_subcommand("mix", "generate a synthetic noisy-speech corpus");
  std::string mix_out;
  std::size_t mix_train = 32, mix_valid = 4, mix_test = 4;
  double mix_duration = 2.0;
  std::uint64_t mix_seed = 0;
  mix->add_option("--out", mix_out, "existing output directory")->required();
  mix->add_option("--clips", mix_train, "training clips");
  mix->add_option("--valid", mix_valid, "validation clips");
  mix->add_option("--test", mix_test, "test clips");
  mix->add_option("--duration", mix_duration, "clip length in seconds");
  mix->add_option("--seed", mix_seed, "base seed");

  auto* tr = app.add_subcommand("train", "train a model on a corpus manifest");
  std::string tr_config;
  bool tr_quiet = false;
  Overrides tr_over;
  tr->add_option("--config", tr_config, "key=value run configuration");
  add_model_flags(tr, tr_over);
  tr_over.add(tr, "--manifest", "manifest", "corpus manifest.tsv");
  tr_over.add(tr, "--checkpoint", "checkpoint", "where to save the best checkpoint");
  tr_over.add(tr, "--log", "log", "training log file");
  tr_over.add(tr, "--steps", "steps", "generator steps");
  tr_over.add(tr, "--batch-size", "batch_size", "clips per step");
  tr_over.add(tr, "--crop", "crop", "crop length in samples");
  tr_over.add(tr, "--eval-every", "eval_every", "validation cadence in steps");
  tr_over.add(tr, "--lr", "lr", "initial learning rate");
  tr_over.add(tr, "--select-metric", "select_metric", "si_sdr | estoi");
  tr_over.add(tr, "--use-discriminator", "use_discriminator", "true | false");
  tr_over.add(tr, "--seed", "seed", "seed (SEED in the environment wins)");
  tr->add_flag("--quiet", tr_quiet, "suppress per-step lines on stdout");

  auto* en = app.add_subcommand("enhance", "enhance one WAV file");
  std::string en_ckpt, en_in, en_out, en_config;
  Overrides en_over;
  en->add_option("checkpoint", en_ckpt, "checkpoint file")->required();
  en->add_option("input", en_in, "noisy 16 kHz mono WAV")->required();
  en->add_option("output", en_out, "enhanced WAV")->required();
  en->add_option("--config", en_config, "model settings that must match the checkpoint");
  add_model_flags(en, en_over);

  auto* ev = app.add_subcommand("evaluate", "score noisy and enhanced signals of a split");
  std::string ev_manifest, ev_ckpt, ev_split = "test", ev_out, ev_config;
  bool ev_clean = false;
  Overrides ev_over;
  ev->add_option("--manifest", ev_manifest, "corpus manifest.tsv")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint; enhanced columns are NaN without one");
  ev->add_option("--split", ev_split, "manifest split");
  ev->add_option("--out", ev_out, "CSV path (stdout by default)");
  ev->add_option("--config", ev_config, "model settings that must match the checkpoint");
  ev->add_flag("--include-clean", ev_clean, "also score clean against itself");
  add_model_flags(ev, ev_over);

  auto* be = app.add_subcommand("bench", "time scan and attention forward passes");
  std::string be_lengths = "1024,2048,4096,8192,16384";
  std::size_t be_dim = 64, be_heads = 8, be_state = 16;
  double be_min = 0.05;
  be->add_option("--lengths", be_lengths, "ascending comma-separated sequence lengths");
  be->add_option("--dim", be_dim, "model width");
  be->add_option("--heads", be_heads, "attention heads");
  be->add_option("--state", be_state, "scan state size");
  be->add_option("--min-seconds", be_min, "minimum timing budget per point");

  auto* pa = app.add_subcommand("params", "count trainable parameters");
  std::string pa_config;
  bool pa_all = false;
  Overrides pa_over;
  pa->add_option("--config", pa_config, "key=value run configuration");
  pa->add_flag("--all", pa_all, "all four variants and the attention overhead");
  add_model_flags(pa, pa_over);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (mix->parsed()) {
      return cmd_mix(mix_out, mix_train, mix_valid, mix_test, mix_duration, mix_seed);
    }
    if (tr->parsed()) return cmd_train(resolve_run_config(tr_config, tr_over), tr_quiet);
    if (en->parsed()) return cmd_enhance(load_checked(en_ckpt, en_config, en_over), en_in, en_out);
    if (ev->parsed()) {
      std::optional<net::Model> model;
      if (!ev_ckpt.empty()) model.emplace(load_checked(ev_ckpt, ev_config, ev_over));
      return cmd_evaluate(ev_manifest, ev_split, model, ev_clean, ev_out);
    }
    if (be->parsed()) return cmd_bench(be_lengths, be_dim, be_heads, be_state, be_min);
    if (pa->parsed()) return cmd_params(resolve_run_config(pa_config, pa_over), pa_all);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
