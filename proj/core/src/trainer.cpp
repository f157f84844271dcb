// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mambattn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "mambattn/checkpoint.hpp"
#include "mambattn/error.hpp"
#include "mambattn/metrics.hpp"
#include "mambattn/ops.hpp"
#include "mambattn/wav.hpp"

namespace mambattn::train {

std::string to_string(SelectMetric m) { return m == SelectMetric::kSiSdr ? "si_sdr" : "estoi"; }

SelectMetric parse_select_metric(const std::string& text) {
  if (text == "si_sdr") return SelectMetric::kSiSdr;
  if (text == "estoi") return SelectMetric::kEstoi;
  throw DataError("unknown selection metric '" + text + "' (expected si_sdr or estoi)");
}

void RunConfig::validate() const {
  model.validate();
  weights.validate();
  optimizer.validate();
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw DataError("run: lr_decay must be in (0, 1]");
  if (batch_size == 0) throw DataError("run: batch_size must be >= 1");
  if (crop < model.stft.fft_size || crop % model.stft.hop != 0) {
    throw DataError("run: crop " + std::to_string(crop) + " must be >= " +
                    std::to_string(model.stft.fft_size) + " and a multiple of hop " +
                    std::to_string(model.stft.hop));
  }
  if (steps == 0) throw DataError("run: steps must be >= 1");
}

RunConfig load_run_config(const kv::Config& in, RunConfig c) {
  c.model = checkpoint::load_model_config(in, "", c.model);
  auto& w = c.weights;
  w.time = in.get_double("weight.time", w.time);
  w.magnitude = in.get_double("weight.magnitude", w.magnitude);
  w.complex = in.get_double("weight.complex", w.complex);
  w.phase = in.get_double("weight.phase", w.phase);
  w.consistency = in.get_double("weight.consistency", w.consistency);
  w.adversarial = in.get_double("weight.adversarial", w.adversarial);
  auto& o = c.optimizer;
  o.lr = in.get_double("lr", o.lr);
  o.beta1 = in.get_double("beta1", o.beta1);
  o.beta2 = in.get_double("beta2", o.beta2);
  o.eps = in.get_double("eps", o.eps);
  o.weight_decay = in.get_double("weight_decay", o.weight_decay);
  c.lr_decay = in.get_double("lr_decay", c.lr_decay);
  c.batch_size = in.get_size("batch_size", c.batch_size);
  c.crop = in.get_size("crop", c.crop);
  c.steps = in.get_size("steps", c.steps);
  c.eval_every = in.get_size("eval_every", c.eval_every);
  if (in.has("select_metric")) {
    c.select_metric = parse_select_metric(in.get_string("select_metric", ""));
  }
  c.use_discriminator = in.get_bool("use_discriminator", c.use_discriminator);
  c.seed = in.get_u64("seed", c.seed);
  c.manifest = in.get_string("manifest", c.manifest.string());
  c.checkpoint = in.get_string("checkpoint", c.checkpoint.string());
  c.log = in.get_string("log", c.log.string());
  return c;
}

void store_run_config(kv::Config& out, const RunConfig& c) {
  auto num = [](double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
  };
  checkpoint::store_model_config(out, c.model);
  out.set("weight.time", num(c.weights.time));
  out.set("weight.magnitude", num(c.weights.magnitude));
  out.set("weight.complex", num(c.weights.complex));
  out.set("weight.phase", num(c.weights.phase));
  out.set("weight.consistency", num(c.weights.consistency));
  out.set("weight.adversarial", num(c.weights.adversarial));
  out.set("lr", num(c.optimizer.lr));
  out.set("beta1", num(c.optimizer.beta1));
  out.set("beta2", num(c.optimizer.beta2));
  out.set("eps", num(c.optimizer.eps));
  out.set("weight_decay", num(c.optimizer.weight_decay));
  out.set("lr_decay", num(c.lr_decay));
  out.set("batch_size", std::to_string(c.batch_size));
  out.set("crop", std::to_string(c.crop));
  out.set("steps", std::to_string(c.steps));
  out.set("eval_every", std::to_string(c.eval_every));
  out.set("select_metric", to_string(c.select_metric));
  out.set("use_discriminator", c.use_discriminator ? "true" : "false");
  out.set("seed", std::to_string(c.seed));
  out.set("manifest", c.manifest.string());
  out.set("checkpoint", c.checkpoint.string());
  out.set("log", c.log.string());
}

std::vector<Example> load_split(const datagen::CorpusManifest& manifest,
                                const std::string& split) {
  std::vector<Example> out;
  for (const auto* e : manifest.split(split)) {
    Example ex;
    ex.id = std::filesystem::path(e->noisy_path).stem().string();
    ex.clean = wav::read(manifest.root / e->clean_path);
    ex.noisy = wav::read(manifest.root / e->noisy_path);
    if (ex.clean.size() != ex.noisy.size()) {
      throw DataError("manifest: " + e->clean_path + " and " + e->noisy_path +
                      " differ in length");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::string format(const StepLog& s) {
  std::ostringstream os;
  os << std::setprecision(9) << "step=" << s.step << " epoch=" << s.epoch << " lr=" << s.lr
     << " loss_g=" << s.generator << " time=" << s.time << " mag=" << s.magnitude
     << " complex=" << s.complex << " phase=" << s.phase << " consistency=" << s.consistency
     << " adversarial=" << s.adversarial << " loss_d=" << s.discriminator;
  return os.str();
}

std::vector<double> enhance(const net::Model& model, std::span<const double> noisy) {
  autograd::NoGrad no_grad;
  Tensor x({1, noisy.size()}, std::vector<double>(noisy.begin(), noisy.end()));
  const net::ModelOutput out = model.forward(x);
  const auto d = out.waveform.data();
  return {d.begin(), d.end()};
}

Trainer::Trainer(RunConfig cfg, std::vector<Example> train, std::vector<Example> valid)
    : cfg_(std::move(cfg)), train_(std::move(train)), valid_(std::move(valid)) {
  cfg_.validate();
  if (train_.empty()) throw DataError("train: no training examples");
  for (const auto& e : train_) {
    if (e.clean.size() < cfg_.model.stft.fft_size) {
      throw DataError("train: example " + e.id + " is shorter than one STFT window");
    }
  }
  model_ = std::make_unique<net::Model>(cfg_.model, cfg_.seed);
  nn::Rng drng(datagen::splitmix64(cfg_.seed ^ 0x5eedd15cULL));
  disc_ = std::make_unique<losses::Discriminator>(drng);
  g_opt_ = std::make_unique<optim::AdamW>(model_->parameters(), cfg_.optimizer);
  d_opt_ = std::make_unique<optim::AdamW>(disc_->parameters(), cfg_.optimizer);
  rng_.seed(datagen::splitmix64(cfg_.seed + 1));
  order_.resize(train_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::shuffle(order_.begin(), order_.end(), rng_);
}

Tensor Trainer::next_batch(Tensor& clean) {
  const std::size_t m = cfg_.batch_size, len = cfg_.crop;
  Tensor noisy({m, len});
  clean = Tensor({m, len});
  for (std::size_t b = 0; b < m; ++b) {
    if (cursor_ == order_.size()) {
      cursor_ = 0;
      ++epoch_;
      std::shuffle(order_.begin(), order_.end(), rng_);
      g_opt_->set_lr(optim::exponential_lr(cfg_.optimizer.lr, cfg_.lr_decay, epoch_));
      d_opt_->set_lr(g_opt_->lr());
    }
    const Example& ex = train_[order_[cursor_++]];
    const std::size_t n = ex.clean.size();
    std::size_t start = 0;
    if (n > len) start = std::uniform_int_distribution<std::size_t>(0, n - len)(rng_);
    // Short clips repeat cyclically.
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t j = (start + i) % n;
      clean.data()[b * len + i] = ex.clean[j];
      noisy.data()[b * len + i] = ex.noisy[j];
    }
  }
  return noisy;
}

losses::GeneratorTerms Trainer::generator_terms(const Tensor& clean,
                                                const net::SpectralFeatures& target,
                                                const net::ModelOutput& out) const {
  const double c = cfg_.model.compression;
  losses::GeneratorTerms terms;
  terms.time = losses::loss_time(clean, out.waveform);
  terms.magnitude = losses::loss_mag(target.compressed, out.compressed);
  terms.complex = losses::loss_complex(target.real, target.imag, out.real, out.imag);
  terms.phase = losses::loss_phase(target.phase, out.phase);
  terms.consistency =
      losses::loss_consistency_compressed(out.real, out.imag, out.waveform, model_->stft(), c);
  terms.adversarial = cfg_.use_discriminator
                          ? losses::loss_adversarial_generator(
                                disc_->forward(target.compressed, out.compressed))
                          : Tensor::scalar(0.0);
  return terms;
}

StepLog Trainer::evaluate_loss(std::span<const Example> examples) const {
  autograd::NoGrad no_grad;
  StepLog acc;
  acc.step = step_;
  acc.epoch = epoch_;
  acc.lr = g_opt_->lr();
  for (const auto& ex : examples) {
    const std::size_t n = ex.clean.size();
    const Tensor clean({1, n}, ex.clean);
    const Tensor noisy({1, n}, ex.noisy);
    const net::SpectralFeatures target =
        net::analyze(model_->stft(), clean, cfg_.model.compression);
    const net::ModelOutput out = model_->forward(noisy);
    const losses::GeneratorTerms t = generator_terms(clean, target, out);
    acc.generator += losses::generator_total(t, cfg_.weights).item();
    acc.time += t.time.item();
    acc.magnitude += t.magnitude.item();
    acc.complex += t.complex.item();
    acc.phase += t.phase.item();
    acc.consistency += t.consistency.item();
    acc.adversarial += t.adversarial.item();
  }
  const double k = examples.empty() ? 1.0 : static_cast<double>(examples.size());
  for (double* v : {&acc.generator, &acc.time, &acc.magnitude, &acc.complex, &acc.phase,
                    &acc.consistency, &acc.adversarial}) {
    *v /= k;
  }
  return acc;
}

StepLog Trainer::step() {
  Tensor clean;
  const Tensor noisy = next_batch(clean);
  for (const Tensor* t : {static_cast<const Tensor*>(&clean), &noisy}) {
    for (double v : t->data()) {
      if (!std::isfinite(v)) {
        throw NumericalError("train: non-finite sample in batch " + std::to_string(step_ + 1));
      }
    }
  }
  const std::size_t m = cfg_.batch_size, len = cfg_.crop;
  const double c = cfg_.model.compression;
  const net::SpectralFeatures target = net::analyze(model_->stft(), clean, c);

  StepLog log;
  log.step = ++step_;
  log.epoch = epoch_;
  log.lr = g_opt_->lr();

  autograd::GradScope scope;
  const net::ModelOutput out = model_->forward(noisy);
  for (double v : out.waveform.data()) {
    if (!std::isfinite(v)) {
      throw NumericalError("train: non-finite model output at step " + std::to_string(log.step));
    }
  }

  if (cfg_.use_discriminator) {
    std::vector<double> quality(m);
    for (std::size_t b = 0; b < m; ++b) {
      const auto ref = clean.data().subspan(b * len, len);
      const auto est = out.waveform.data().subspan(b * len, len);
      quality[b] = losses::quality_from_si_sdr(metrics::si_sdr(ref, est));
    }
    autograd::GradScope d_scope;
    const Tensor est = out.compressed.clone();
    const Tensor ld = losses::loss_discriminator(disc_->forward(target.compressed, target.compressed),
                                                 disc_->forward(target.compressed, est), quality);
    log.discriminator = ld.item();
    if (!std::isfinite(log.discriminator)) {
      throw NumericalError("train: non-finite discriminator loss at step " +
                           std::to_string(log.step));
    }
    autograd::backward(ld);
    d_opt_->step();
    d_opt_->zero_grad();
  }

  const losses::GeneratorTerms terms = generator_terms(clean, target, out);
  const Tensor total = losses::generator_total(terms, cfg_.weights);
  log.generator = total.item();
  log.time = terms.time.item();
  log.magnitude = terms.magnitude.item();
  log.complex = terms.complex.item();
  log.phase = terms.phase.item();
  log.consistency = terms.consistency.item();
  log.adversarial = terms.adversarial.item();
  if (!std::isfinite(log.generator)) {
    throw NumericalError("train: non-finite generator loss at step " + std::to_string(log.step));
  }
  autograd::backward(total);
  g_opt_->step();
  g_opt_->zero_grad();
  disc_->zero_grad();
  return log;
}

double Trainer::validate() const {
  if (valid_.empty()) return std::nan("");
  double sum = 0.0;
  for (const auto& ex : valid_) {
    const auto est = enhance(*model_, ex.noisy);
    sum += cfg_.select_metric == SelectMetric::kSiSdr ? metrics::si_sdr(ex.clean, est)
                                                     : metrics::estoi(ex.clean, est);
  }
  return sum / static_cast<double>(valid_.size());
}

RunResult Trainer::run(std::ostream& log) {
  std::ofstream file;
  if (!cfg_.log.empty()) {
    file.open(cfg_.log);
    if (!file) throw DataError("train: cannot create log " + cfg_.log.string());
  }
  std::ostream& out = cfg_.log.empty() ? log : file;
  out << "parameters=" << model_->parameter_count() << " variant=" << net::to_string(cfg_.model.variant)
      << " seed=" << cfg_.seed << '\n';

  RunResult result;
  result.best_metric = -std::numeric_limits<double>::infinity();
  const std::string metric_name = to_string(cfg_.select_metric);
  while (step_ < cfg_.steps) {
    const StepLog s = step();
    out << format(s) << '\n';
    result.history.push_back(s);
    const bool eval_now =
        step_ == cfg_.steps || (cfg_.eval_every != 0 && step_ % cfg_.eval_every == 0);
    if (eval_now && !valid_.empty()) {
      const double score = validate();
      const bool best = score > result.best_metric;
      out << "eval step=" << step_ << ' ' << metric_name << '=' << std::setprecision(9) << score
          << " best=" << (best ? "true" : "false") << '\n';
      if (!std::isfinite(score)) {
        throw NumericalError("train: non-finite validation " + metric_name + " at step " +
                             std::to_string(step_));
      }
      if (best) {
        result.best_metric = score;
        result.best_step = step_;
        if (!cfg_.checkpoint.empty()) checkpoint::save(cfg_.checkpoint, *model_);
      }
    }
  }
  if (valid_.empty() && !cfg_.checkpoint.empty()) {
    checkpoint::save(cfg_.checkpoint, *model_);
    result.best_step = step_;
  }
  out.flush();
  return result;
}

}  // namespace mambattn::train
