#include "fedprune/federation.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "fedprune/codec.hpp"
#include "fedprune/errors.hpp"
#include "fedprune/loss.hpp"
#include "fedprune/parallel.hpp"
#include "fedprune/rng.hpp"

namespace fedprune {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::standard: return "standard";
    case Strategy::random: return "random";
    case Strategy::proposed: return "proposed";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view s) {
  if (s == "standard") return Strategy::standard;
  if (s == "random") return Strategy::random;
  if (s == "proposed") return Strategy::proposed;
  return std::nullopt;
}

std::string_view to_string(MaskMode m) {
  return m == MaskMode::every_step ? "every_step" : "at_upload";
}

std::optional<MaskMode> parse_mask_mode(std::string_view s) {
  if (s == "every_step") return MaskMode::every_step;
  if (s == "at_upload") return MaskMode::at_upload;
  return std::nullopt;
}

void FederationConfig::validate() const {
  if (clients < 1) throw InvalidArgument("clients must be >= 1");
  if (rounds < 1) throw InvalidArgument("rounds must be >= 1");
  if (local_epochs < 1) throw InvalidArgument("local_epochs must be >= 1");
  if (warmup < 1 || warmup > rounds) {
    throw InvalidArgument("warmup must satisfy 1 <= warmup <= rounds");
  }
  if (!(pruning_rate >= 0.0 && pruning_rate < 1.0)) {
    throw InvalidArgument("pruning_rate must lie in [0, 1)");
  }
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (!(lrp.epsilon >= 0.0)) throw InvalidArgument("lrp_epsilon must be >= 0");
}

void DataConfig::validate() const {
  if (train_samples < 1 || test_samples < 1 || reference_samples < 1) {
    throw InvalidArgument("train, test and reference sample counts must be >= 1");
  }
  if (classes < 1) throw InvalidArgument("classes must be >= 1");
  if (image_shape.size() != 3 || shape_size(image_shape) == 0) {
    throw InvalidArgument("image_shape must be [C, H, W] with positive extents");
  }
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
  if (max_positives < 1) throw InvalidArgument("max_positives must be >= 1");
  if (!(dirichlet_alpha > 0.0)) throw InvalidArgument("dirichlet_alpha must be positive");
}

Architecture ExperimentConfig::resolved_architecture() const {
  return architecture ? *architecture : default_cnn(data.image_shape, data.classes);
}

ParameterVector aggregate(std::vector<ClientUpdate> updates) {
  if (updates.empty()) throw InvalidArgument("aggregate: no client updates");
  std::ranges::sort(updates, {}, &ClientUpdate::client_id);
  for (std::size_t i = 1; i < updates.size(); ++i) {
    if (updates[i].client_id == updates[i - 1].client_id) {
      throw InvalidArgument("aggregate: duplicate update from client " +
                            std::to_string(updates[i].client_id));
    }
  }
  const std::size_t n = updates.front().params.size();
  std::uint64_t total = 0;
  for (const auto& u : updates) {
    if (u.params.size() != n) {
      throw InvalidArgument("aggregate: client " + std::to_string(u.client_id) + " sent " +
                            std::to_string(u.params.size()) + " parameters, expected " +
                            std::to_string(n));
    }
    total += u.sample_count;
  }
  if (total == 0) throw InvalidArgument("aggregate: total sample count is zero");

  std::vector<double> acc(n, 0.0);
  for (const auto& u : updates) {
    const double alpha = static_cast<double>(u.sample_count) / static_cast<double>(total);
    for (std::size_t i = 0; i < n; ++i) acc[i] += alpha * static_cast<double>(u.params[i]);
  }
  return ParameterVector(acc.begin(), acc.end());
}

void local_train(ClientState& client, const Architecture& arch,
                 std::span<const float> global, const PruningMask* mask,
                 const LocalTrainOptions& options) {
  const std::size_t m = client.data.size();
  if (m == 0) {
    throw InvalidArgument("client " + std::to_string(client.id) + " has no data");
  }
  std::size_t batch = options.batch_size;
  if (batch == 0) throw InvalidArgument("batch_size must be >= 1");
  if (batch > m) {
    client.warnings.push_back("batch_size " + std::to_string(batch) + " clamped to " +
                              std::to_string(m) + " samples");
    batch = m;
  }

  Network net(arch);
  net.set_parameters(global);
  client.optimizer = AdamState::for_size(net.parameter_count(), options.learning_rate);
  Rng rng(options.shuffle_seed);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> idx;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < m; start += batch) {
      const std::size_t stop = std::min(m, start + batch);
      idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                 order.begin() + static_cast<std::ptrdiff_t>(stop));
      const Dataset b = client.data.subset(idx);
      const Tensor logits = net.forward(b.images, true);
      const auto loss = binary_cross_entropy(logits, b.labels);
      const std::vector<float> grad = net.backward(loss.logit_grad);
      adam_step(net.parameters(), grad, client.optimizer);
      if (mask && options.mask_mode == MaskMode::every_step) {
        apply_mask_inplace(net.parameters(), *mask);
      }
    }
  }
  if (mask) apply_mask_inplace(net.parameters(), *mask);
  client.params.assign(net.parameters().begin(), net.parameters().end());
}

EvalResult evaluate(const Architecture& arch, std::span<const float> params,
                    const Dataset& test) {
  Network net(arch);
  net.set_parameters(params);
  const std::size_t n = test.size();
  const std::size_t classes = net.output_shape()[0];
  Tensor logits({n, classes});
  constexpr std::size_t kChunk = 128;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t stop = std::min(n, start + kChunk);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor out = net.forward(test.subset(idx).images, false);
    std::ranges::copy(out.data(), logits.row(start).begin());
  }
  return mean_average_precision(logits, test.labels);
}

Federation::Federation(const ExperimentConfig& config)
    : config_(config), arch_(config.resolved_architecture()) {
  const FederationConfig& fc = config_.federation;
  const DataConfig& dc = config_.data;
  fc.validate();
  dc.validate();
  const std::uint64_t seed = fc.seed;

  GeneratorConfig gen;
  gen.samples = dc.train_samples + dc.test_samples + dc.reference_samples;
  gen.classes = dc.classes;
  gen.image_shape = dc.image_shape;
  gen.prototype_seed = derive_seed(seed, {1});
  gen.sample_seed = derive_seed(seed, {2});
  gen.noise_sigma = dc.noise_sigma;
  gen.max_positives = dc.max_positives;
  const Dataset pool = generate(gen);

  auto range = [](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> v(end - begin);
    std::iota(v.begin(), v.end(), begin);
    return v;
  };
  const std::size_t a = dc.train_samples, b = a + dc.test_samples;
  const Dataset train = pool.subset(range(0, a));
  test_ = pool.subset(range(a, b));
  server_.reference = pool.subset(range(b, b + dc.reference_samples));

  auto shards = partition(train, {fc.clients, dc.dirichlet_alpha, derive_seed(seed, {3})});
  Network init(arch_);
  Rng init_rng(derive_seed(seed, {4}));
  init.init_he_uniform(init_rng);
  server_.global.assign(init.parameters().begin(), init.parameters().end());
  server_.strategy = fc.strategy;

  for (std::size_t i = 0; i < shards.size(); ++i) {
    ClientState c;
    c.id = i;
    c.data = std::move(shards[i]);
    clients_.push_back(std::move(c));
  }
}

Network Federation::global_network() const {
  Network net(arch_);
  net.set_parameters(server_.global);
  return net;
}

void Federation::build_mask() {
  const FederationConfig& fc = config_.federation;
  const std::size_t n = server_.global.size();
  if (fc.strategy == Strategy::proposed) {
    const RelevanceReport report =
        component_relevance_report(global_network(), server_.reference, fc.lrp);
    server_.mask = fedprune::build_mask(ranking_scores(report.mean_relevance, fc.ranking),
                                        report.components, fc.pruning_rate, n);
  } else {
    const auto components = enumerate_components(std::span<const LayerInfo>(infer_layers(arch_)));
    server_.mask = build_random_mask(components, fc.pruning_rate, n, derive_seed(fc.seed, {5}));
  }
  server_.mask->set_created_at_round(static_cast<std::uint32_t>(server_.round + 1));
}

RoundRecord Federation::run_round() {
  if (done()) throw InvalidArgument("all rounds already completed");
  const auto started = std::chrono::steady_clock::now();
  const FederationConfig& fc = config_.federation;
  const std::size_t round = server_.round + 1;
  const auto wire_round = static_cast<std::uint32_t>(round);
  const std::size_t n = server_.global.size();
  const PruningMask dense(n);
  const PruningMask& wire_mask = server_.mask ? *server_.mask : dense;
  const PruningMask* train_mask = server_.mask ? &*server_.mask : nullptr;

  RoundRecord rec;
  rec.round = round;
  rec.strategy = fc.strategy;
  rec.rate = fc.strategy == Strategy::standard ? 0.0 : fc.pruning_rate;

  // server -> clients
  const auto down = serialize_payload(encode_sparse(server_.global, wire_mask, wire_round));
  const ParameterVector received = decode_sparse(parse_payload(down), wire_mask);
  rec.downlink_bytes += down.size() * clients_.size();

  // local training, one independent model and PRNG stream per client
  std::vector<std::vector<std::uint8_t>> uploads(clients_.size());
  parallel_for(clients_.size(), config_.threads, [&](std::size_t i) {
    ClientState& c = clients_[i];
    LocalTrainOptions opt;
    opt.epochs = fc.local_epochs;
    opt.batch_size = fc.batch_size;
    opt.learning_rate = fc.learning_rate;
    opt.mask_mode = fc.mask_mode;
    opt.shuffle_seed = derive_seed(fc.seed, {c.id, round});
    local_train(c, arch_, received, train_mask, opt);
    uploads[i] = serialize_payload(encode_sparse(c.params, wire_mask, wire_round));
  });

  // clients -> server
  std::vector<ParameterVector> decoded;
  decoded.reserve(clients_.size());
  for (const auto& bytes : uploads) {
    rec.uplink_bytes += bytes.size();
    decoded.push_back(decode_sparse(parse_payload(bytes), wire_mask));
  }
  std::vector<ClientUpdate> updates;
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    updates.push_back({clients_[i].id, decoded[i], clients_[i].data.size()});
  }
  server_.global = aggregate(std::move(updates));

  if (round == fc.warmup && fc.strategy != Strategy::standard) {
    build_mask();
    apply_mask_inplace(server_.global, *server_.mask);
    rec.downlink_bytes += mask_transfer_bytes(*server_.mask) * clients_.size();
  } else if (round > fc.warmup && server_.mask) {
    apply_mask_inplace(server_.global, *server_.mask);
  }
  server_.round = round;

  rec.map = evaluate(arch_, server_.global, test_).map;
  if (server_.mask) {
    rec.pruned_fraction = server_.mask->pruned_fraction();
    rec.mask_digest = server_.mask->digest();
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - started).count();
  return rec;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                 const RoundObserver& observer) {
  Federation fed(config);
  std::vector<RoundRecord> records;
  while (!fed.done()) {
    records.push_back(fed.run_round());
    if (observer) observer(records.back(), fed);
  }
  return {std::move(records), fed.global_network()};
}

}  // namespace fedprune
