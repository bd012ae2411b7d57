#include <doctest.h>

#include <cmath>

#include "fedprune/codec.hpp"
#include "fedprune/errors.hpp"
#include "fedprune/federation.hpp"
#include "fedprune/report.hpp"
#include "oracles.hpp"

using namespace fedprune;

namespace {

ExperimentConfig small_experiment(Strategy strategy, double rate = 0.3) {
  ExperimentConfig c;
  c.federation.clients = 3;
  c.federation.rounds = 4;
  c.federation.local_epochs = 1;
  c.federation.warmup = 2;
  c.federation.batch_size = 16;
  c.federation.pruning_rate = rate;
  c.federation.seed = 7;
  c.federation.strategy = strategy;
  c.data.train_samples = 96;
  c.data.test_samples = 32;
  c.data.reference_samples = 8;
  c.data.classes = 4;
  c.data.image_shape = {3, 16, 16};
  return c;
}

Dataset constant_label_data(std::size_t n, const std::vector<float>& labels, Rng& rng) {
  Dataset d;
  d.images = oracle::random_tensor<float>({n, 1, 2, 2}, rng, 0.0, 1.0);
  d.labels = Tensor({n, labels.size()});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < labels.size(); ++c) d.labels[i * labels.size() + c] = labels[c];
  return d;
}

}  // namespace

TEST_CASE("aggregate: hand-evaluated weighted average") {
  const std::vector<float> w1{0.0f}, w2{1.0f};
  const auto out = aggregate({{0, w1, 1}, {1, w2, 3}});
  REQUIRE(out.size() == 1);
  CHECK(std::abs(out[0] - 0.75) <= 1e-7);
}

TEST_CASE("aggregate: identical inputs and equal sizes") {
  Rng rng(1);
  std::vector<float> w(20);
  for (auto& v : w) v = static_cast<float>(rng.normal());
  CHECK(aggregate({{0, w, 5}, {1, w, 17}, {2, w, 2}}) == w);

  std::vector<std::vector<float>> ws(4, std::vector<float>(10));
  for (auto& v : ws)
    for (auto& x : v) x = static_cast<float>(rng.normal());
  const auto mean = aggregate({{0, ws[0], 8}, {1, ws[1], 8}, {2, ws[2], 8}, {3, ws[3], 8}});
  for (std::size_t i = 0; i < 10; ++i) {
    const double expect = (static_cast<double>(ws[0][i]) + ws[1][i] + ws[2][i] + ws[3][i]) / 4.0;
    CHECK(std::abs(mean[i] - expect) <= 1e-7 * std::max(1.0, std::abs(expect)));
  }
}

TEST_CASE("aggregate: weighted sum matches exact rational weights") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + rng.below(6);
    std::vector<std::vector<float>> ws(k, std::vector<float>(8));
    std::vector<std::size_t> sizes(k);
    std::vector<ClientUpdate> ups;
    std::size_t total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      for (auto& x : ws[i]) x = static_cast<float>(rng.uniform(-2, 2));
      sizes[i] = 1 + rng.below(500);
      total += sizes[i];
      ups.push_back({i, ws[i], sizes[i]});
    }
    const auto out = aggregate(ups);
    for (std::size_t j = 0; j < 8; ++j) {
      long double expect = 0;
      for (std::size_t i = 0; i < k; ++i)
        expect += static_cast<long double>(sizes[i]) * ws[i][j] / static_cast<long double>(total);
      CHECK(std::abs(out[j] - static_cast<double>(expect)) <= 1e-7 * std::max(1.0, std::abs(static_cast<double>(expect))));
    }
  }
}

TEST_CASE("aggregate is invariant to update order") {
  Rng rng(3);
  std::vector<std::vector<float>> ws(5, std::vector<float>(16));
  for (auto& v : ws)
    for (auto& x : v) x = static_cast<float>(rng.normal());
  std::vector<ClientUpdate> ups;
  for (std::size_t i = 0; i < 5; ++i) ups.push_back({i, ws[i], 10 + 7 * i});
  const auto base = aggregate(ups);
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(ups.begin(), ups.end());
    CHECK(aggregate(ups) == base);
  }
}

TEST_CASE("aggregate errors") {
  const std::vector<float> a{1, 2}, b{1};
  CHECK_THROWS_AS(aggregate({}), InvalidArgument);
  CHECK_THROWS_AS(aggregate({{0, a, 1}, {1, b, 1}}), InvalidArgument);
  CHECK_THROWS_AS(aggregate({{0, a, 0}}), InvalidArgument);
  CHECK_THROWS_AS(aggregate({{0, a, 1}, {0, a, 1}}), InvalidArgument);
}

TEST_CASE("local_train at a stationary point leaves parameters unchanged") {
  Rng rng(4);
  const Architecture arch{{1, 2, 2}, {LayerSpec::flatten(), LayerSpec::dense(2)}};
  ClientState client{.id = 0, .data = constant_label_data(10, {1, 0}, rng)};
  // zero weights; biases saturate the sigmoid on the right side
  const std::vector<float> global{0, 0, 0, 0, 200, 0, 0, 0, 0, -200};
  local_train(client, arch, global, nullptr, {.epochs = 3, .batch_size = 4});
  CHECK(client.params == global);
}

TEST_CASE("local_train: one sample, one step matches a hand-stepped Adam") {
  Rng rng(5);
  const Architecture arch{{1, 2, 2}, {LayerSpec::flatten(), LayerSpec::dense(2)}};
  Network net(arch);
  net.init_he_uniform(rng);
  const std::vector<float> global(net.parameters().begin(), net.parameters().end());
  ClientState client{.id = 0, .data = constant_label_data(1, {0, 1}, rng)};
  local_train(client, arch, global, nullptr,
              {.epochs = 1, .batch_size = 1, .learning_rate = 0.01});

  const auto x = client.data.images.data();
  const auto y = client.data.labels.data();
  for (std::size_t j = 0; j < 2; ++j) {
    double z = global[j * 5 + 4];
    for (std::size_t k = 0; k < 4; ++k) z += static_cast<double>(global[j * 5 + k]) * x[k];
    const double gz = (1.0 / (1.0 + std::exp(-z)) - y[j]) / 2.0;
    for (std::size_t k = 0; k < 5; ++k) {
      const double g = k < 4 ? gz * x[k] : gz;
      oracle::ScalarAdam adam;
      adam.lr = 0.01;
      const double expect = adam.step(global[j * 5 + k], g);
      CHECK(std::abs(client.params[j * 5 + k] - expect) < 1e-6);
    }
  }
}

TEST_CASE("local_train with a mask returns exact zeros at masked coordinates") {
  Rng rng(6);
  const Architecture arch = default_cnn({3, 16, 16}, 4);
  Network net(arch);
  net.init_he_uniform(rng);
  const auto comps = enumerate_components(net);
  const auto mask = build_random_mask(comps, 0.3, net.parameter_count(), 3);
  const auto global = apply_mask(net.parameters(), mask);
  GeneratorConfig g{.samples = 20, .classes = 4, .image_shape = {3, 16, 16}};
  for (MaskMode mode : {MaskMode::every_step, MaskMode::at_upload}) {
    ClientState client{.id = 1, .data = generate(g)};
    local_train(client, arch, global, &mask, {.epochs = 2, .batch_size = 8, .mask_mode = mode});
    for (std::size_t i = 0; i < global.size(); ++i)
      if (!mask.keeps(i)) CHECK(client.params[i] == 0.0f);
    CHECK(client.params != global);
  }
}

TEST_CASE("local_train clamps an oversized batch and records a warning") {
  Rng rng(7);
  const Architecture arch{{1, 2, 2}, {LayerSpec::flatten(), LayerSpec::dense(2)}};
  Network net(arch);
  net.init_he_uniform(rng);
  ClientState client{.id = 0, .data = constant_label_data(3, {1, 0}, rng)};
  const std::vector<float> global(net.parameters().begin(), net.parameters().end());
  local_train(client, arch, global, nullptr, {.epochs = 1, .batch_size = 64});
  REQUIRE(client.warnings.size() == 1);
  CHECK(client.warnings[0].find("clamped to 3") != std::string::npos);

  // clamped run equals an explicit full-batch run
  ClientState full{.id = 0, .data = client.data};
  local_train(full, arch, global, nullptr, {.epochs = 1, .batch_size = 3});
  CHECK(full.params == client.params);
  CHECK(full.warnings.empty());
}

TEST_CASE("standard strategy: constant dense byte accounting, no mask") {
  const auto cfg = small_experiment(Strategy::standard);
  Federation fed(cfg);
  const std::size_t n = fed.parameter_count();
  while (!fed.done()) {
    const auto rec = fed.run_round();
    CHECK(rec.uplink_bytes == 3 * (16 + 4 * n));
    CHECK(rec.downlink_bytes == 3 * (16 + 4 * n));
    CHECK(rec.mask_digest == 0);
    CHECK(rec.pruned_fraction == 0.0);
    CHECK(rec.map >= 0.0);
    CHECK(rec.map <= 1.0);
    CHECK_FALSE(fed.server().mask.has_value());
  }
  CHECK_THROWS_AS(fed.run_round(), InvalidArgument);
}

TEST_CASE("pruned strategies: mask at warmup, sparse bytes, zeros held") {
  for (Strategy s : {Strategy::proposed, Strategy::random}) {
    const auto cfg = small_experiment(s);
    Federation fed(cfg);
    const std::size_t n = fed.parameter_count();
    std::uint64_t digest = 0;
    while (!fed.done()) {
      const auto rec = fed.run_round();
      const auto& server = fed.server();
      CHECK(server.mask.has_value() == (rec.round >= cfg.federation.warmup));
      if (rec.round < cfg.federation.warmup) {
        CHECK(rec.uplink_bytes == 3 * (16 + 4 * n));
        continue;
      }
      const PruningMask& m = *server.mask;
      CHECK(m.pruned_fraction() <= cfg.federation.pruning_rate);
      CHECK(m.pruned_fraction() > 0.0);
      for (std::size_t i = 0; i < n; ++i)
        if (!m.keeps(i)) CHECK(server.global[i] == 0.0f);
      if (rec.round == cfg.federation.warmup) {
        digest = rec.mask_digest;
        CHECK(rec.uplink_bytes == 3 * (16 + 4 * n));
        CHECK(rec.downlink_bytes == 3 * (16 + 4 * n) + 3 * (16 + (n + 7) / 8));
      } else {
        CHECK(rec.mask_digest == digest);
        CHECK(rec.uplink_bytes == 3 * (16 + 4 * m.kept_count()));
        CHECK(rec.downlink_bytes == 3 * (16 + 4 * m.kept_count()));
        // recorded bytes equal an independently serialized payload
        const auto wire = serialize_payload(encode_sparse(server.global, m, 0));
        CHECK(rec.uplink_bytes == 3 * wire.size());
      }
    }
  }
}

TEST_CASE("warmup rounds are identical across strategies") {
  std::vector<ParameterVector> standard, proposed;
  run_experiment(small_experiment(Strategy::standard), [&](const RoundRecord&, const Federation& f) {
    standard.push_back(f.server().global);
  });
  run_experiment(small_experiment(Strategy::proposed), [&](const RoundRecord&, const Federation& f) {
    proposed.push_back(f.server().global);
  });
  REQUIRE(standard.size() == 4);
  CHECK(standard[0] == proposed[0]);
  CHECK(standard[1] != proposed[1]);  // mask applied at the end of round 2
}

TEST_CASE("experiments are deterministic across runs and thread counts") {
  auto cfg = small_experiment(Strategy::proposed);
  const auto a = run_experiment(cfg);
  cfg.threads = 3;
  const auto b = run_experiment(cfg);
  const std::vector<CellResult> ra{{{Strategy::proposed, 0.3}, a.records}};
  const std::vector<CellResult> rb{{{Strategy::proposed, 0.3}, b.records}};
  CHECK(records_csv(ra, false) == records_csv(rb, false));
  CHECK(std::ranges::equal(a.final_model.parameters(), b.final_model.parameters()));
}

TEST_CASE("different seeds give different runs") {
  auto cfg = small_experiment(Strategy::standard);
  cfg.federation.rounds = 1;
  cfg.federation.warmup = 1;
  const auto a = run_experiment(cfg);
  cfg.federation.seed = 8;
  const auto b = run_experiment(cfg);
  CHECK_FALSE(std::ranges::equal(a.final_model.parameters(), b.final_model.parameters()));
}

TEST_CASE("config validation") {
  FederationConfig f;
  CHECK_NOTHROW(f.validate());
  f.warmup = 21;
  CHECK_THROWS_AS(f.validate(), InvalidArgument);
  f = {};
  f.pruning_rate = 1.0;
  CHECK_THROWS_AS(f.validate(), InvalidArgument);
  f = {};
  f.clients = 0;
  CHECK_THROWS_AS(f.validate(), InvalidArgument);
  DataConfig d;
  d.train_samples = 0;
  CHECK_THROWS_AS(d.validate(), InvalidArgument);
}

TEST_CASE("strategy names round-trip") {
  for (Strategy s : {Strategy::standard, Strategy::random, Strategy::proposed})
    CHECK(parse_strategy(to_string(s)) == s);
  CHECK_FALSE(parse_strategy("magic").has_value());
  for (MaskMode m : {MaskMode::every_step, MaskMode::at_upload}) CHECK(parse_mask_mode(to_string(m)) == m);
}
