// Copyright 2026 The mambattn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mambattn/checkpoint.hpp"
#include "mambattn/datagen.hpp"
#include "mambattn/error.hpp"
#include "mambattn/kv_config.hpp"
#include "mambattn/optim.hpp"
#include "mambattn/trainer.hpp"
#include "model_fixtures.hpp"
#include "test_util.hpp"

using namespace mambattn;
namespace fs = std::filesystem;

namespace {

std::vector<train::Example> tiny_examples(std::size_t n, std::size_t length) {
  std::vector<train::Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto c = datagen::make_clip(0, i, length, 1);
    out.push_back({"clip" + std::to_string(i), c.clean, c.noisy});
  }
  return out;
}

train::RunConfig tiny_run() {
  train::RunConfig cfg;
  cfg.model = testing::tiny_config();
  cfg.batch_size = 2;
  cfg.crop = 160;
  cfg.steps = 50;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("adamw matches a hand computation") {
  Tensor w = Tensor::parameter({2}, {1.0, -2.0});
  optim::AdamWConfig cfg{0.1, 0.8, 0.99, 1e-8, 0.01};
  optim::AdamW opt({{"w", w}}, cfg);
  const double g1[2] = {0.5, -0.1}, g2[2] = {-0.3, 0.4};
  double ref[2] = {1.0, -2.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 2; ++t) {
    const double* g = t == 1 ? g1 : g2;
    std::copy(g, g + 2, w.mutable_grad().begin());
    opt.step();
    opt.zero_grad();
    for (int j = 0; j < 2; ++j) {
      m[j] = 0.8 * m[j] + 0.2 * g[j];
      v[j] = 0.99 * v[j] + 0.01 * g[j] * g[j];
      const double mh = m[j] / (1 - std::pow(0.8, t)), vh = v[j] / (1 - std::pow(0.99, t));
      ref[j] -= 0.1 * (mh / (std::sqrt(vh) + 1e-8) + 0.01 * ref[j]);
    }
    CHECK(w.data()[0] == doctest::Approx(ref[0]).epsilon(1e-15));
    CHECK(w.data()[1] == doctest::Approx(ref[1]).epsilon(1e-15));
  }
  CHECK(opt.steps() == 2);
  CHECK(optim::exponential_lr(5e-4, 0.99, 3) == doctest::Approx(5e-4 * 0.99 * 0.99 * 0.99));
  cfg.beta1 = 1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("key = value config files") {
  std::istringstream in(
      "# comment\n"
      "  lr = 1e-3   \n"
      "variant=no_attention # trailing\n"
      "\n"
      "steps = 20\n"
      "use_discriminator = off\n");
  auto cfg = kv::Config::parse(in, "test.cfg");
  CHECK(cfg.get_double("lr", 0.0) == 1e-3);
  CHECK(cfg.get_string("variant", "") == "no_attention");
  CHECK(cfg.get_size("steps", 0) == 20);
  CHECK_FALSE(cfg.get_bool("use_discriminator", true));
  CHECK(cfg.get_size("missing", 7) == 7);

  auto run = train::load_run_config(cfg);
  CHECK(run.model.variant == net::Variant::kNoAttention);
  CHECK(run.optimizer.lr == 1e-3);
  CHECK(run.steps == 20);
  CHECK_FALSE(run.use_discriminator);

  std::istringstream bad("lr 0.1\n");
  try {
    kv::Config::parse(bad, "bad.cfg");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("bad.cfg:1") != std::string::npos);
  }
  std::istringstream bad_num("steps = many\n");
  auto c2 = kv::Config::parse(bad_num);
  CHECK_THROWS_AS(c2.get_size("steps", 0), DataError);
}

TEST_CASE("run config survives a store/load round trip") {
  auto run = tiny_run();
  run.model.variant = net::Variant::kAttentionAfter;
  run.weights.phase = 0.7;
  run.select_metric = train::SelectMetric::kEstoi;
  run.manifest = "corpus/manifest.tsv";
  kv::Config kv;
  train::store_run_config(kv, run);
  auto back = train::load_run_config(kv);
  CHECK(back.model == run.model);
  CHECK(back.optimizer == run.optimizer);
  CHECK(back.weights.phase == 0.7);
  CHECK(back.select_metric == train::SelectMetric::kEstoi);
  CHECK(back.crop == run.crop);
  CHECK(back.seed == run.seed);
  CHECK(back.manifest == run.manifest);
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = fs::temp_directory_path() / "mambattn_ckpt_test";
  fs::create_directories(dir);
  net::Model model(testing::tiny_config(net::Variant::kUnshared), 5);
  checkpoint::save(dir / "a.ckpt", model);
  auto loaded = checkpoint::load_model(dir / "a.ckpt");
  CHECK(loaded.config() == model.config());
  auto a = checkpoint::capture(model), b = checkpoint::capture(loaded);
  REQUIRE(a.tensors.size() == b.tensors.size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    CHECK(a.tensors[i].name == b.tensors[i].name);
    CHECK(a.tensors[i].shape == b.tensors[i].shape);
    CHECK(a.tensors[i].values == b.tensors[i].values);
  }
  SUBCASE("a second save is byte-identical") {
    checkpoint::save(dir / "b.ckpt", loaded);
    std::ifstream fa(dir / "a.ckpt", std::ios::binary), fb(dir / "b.ckpt", std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
  }
  SUBCASE("mismatched architecture is rejected") {
    net::Model other(testing::tiny_config(net::Variant::kShared), 5);
    CHECK_THROWS_AS(checkpoint::load_into(a, other), DataError);
  }
  SUBCASE("truncated files are rejected") {
    const auto size = fs::file_size(dir / "a.ckpt");
    fs::copy_file(dir / "a.ckpt", dir / "t.ckpt", fs::copy_options::overwrite_existing);
    fs::resize_file(dir / "t.ckpt", size - 3);
    CHECK_THROWS_AS(checkpoint::read(dir / "t.ckpt"), DataError);
  }
  fs::remove_all(dir);
}

TEST_CASE("trainer") {
  auto data = tiny_examples(4, 400);

  SUBCASE("same seed gives a bit-identical loss trajectory") {
    train::Trainer a(tiny_run(), data), b(tiny_run(), data);
    for (int i = 0; i < 50; ++i) {
      auto la = a.step(), lb = b.step();
      CHECK(la.generator == lb.generator);
      CHECK(la.discriminator == lb.discriminator);
    }
    auto cfg = tiny_run();
    cfg.seed = 4;
    train::Trainer c(cfg, data);
    train::Trainer d(tiny_run(), data);
    CHECK(c.step().generator != d.step().generator);
  }
  SUBCASE("non-finite input raises NumericalError") {
    auto bad = data;
    for (auto& ex : bad)
      for (std::size_t i = 0; i < ex.noisy.size(); i += 50) ex.noisy[i] = NAN;
    train::Trainer t(tiny_run(), bad);
    CHECK_THROWS_AS(t.step(), NumericalError);
  }
  SUBCASE("invalid crop is rejected") {
    auto cfg = tiny_run();
    cfg.crop = 150;
    CHECK_THROWS(train::Trainer(cfg, data));
  }
  SUBCASE("run writes a log and the best checkpoint") {
    const fs::path dir = fs::temp_directory_path() / "mambattn_run_test";
    fs::create_directories(dir);
    auto cfg = tiny_run();
    cfg.steps = 4;
    cfg.eval_every = 2;
    cfg.checkpoint = dir / "best.ckpt";
    train::Trainer t(cfg, data, tiny_examples(2, 400));
    std::ostringstream log;
    auto result = t.run(log);
    CHECK(result.history.size() == 4);
    CHECK(log.str().find("parameters=") != std::string::npos);
    CHECK(log.str().find("eval step=2") != std::string::npos);
    CHECK(fs::exists(cfg.checkpoint));
    fs::remove_all(dir);
  }
}

TEST_CASE("enhance") {
  net::Model model(testing::tiny_config(), 2);
  auto noisy = datagen::make_clip(1, 0, 777, 3).noisy;
  auto a = train::enhance(model, noisy), b = train::enhance(model, noisy);
  CHECK(a.size() == noisy.size());
  CHECK(testing::bit_identical(a, b));
}
