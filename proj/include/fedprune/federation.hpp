#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedprune/adam.hpp"
#include "fedprune/data.hpp"
#include "fedprune/lrp.hpp"
#include "fedprune/metrics.hpp"
#include "fedprune/network.hpp"
#include "fedprune/pruning.hpp"

namespace fedprune {

enum class Strategy { standard, random, proposed };
enum class MaskMode {
  every_step,  // clients re-mask after every optimizer step
  at_upload,   // clients train unmasked and mask once before upload
};

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);
std::string_view to_string(MaskMode m);
std::optional<MaskMode> parse_mask_mode(std::string_view s);

struct FederationConfig {
  std::size_t clients = 4;
  std::size_t rounds = 20;
  std::size_t local_epochs = 3;
  std::size_t warmup = 9;
  double pruning_rate = 0.2;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  Strategy strategy = Strategy::proposed;
  MaskMode mask_mode = MaskMode::every_step;
  LrpOptions lrp{};
  RelevanceRanking ranking = RelevanceRanking::magnitude;

  /// Throws InvalidArgument on out-of-range values.
  void validate() const;
};

struct DataConfig {
  std::size_t train_samples = 4096;
  std::size_t test_samples = 512;
  std::size_t reference_samples = 64;
  std::size_t classes = 8;
  Shape image_shape{3, 32, 32};
  double noise_sigma = 0.1;
  std::size_t max_positives = 3;
  double dirichlet_alpha = 0.5;

  void validate() const;
};

struct ExperimentConfig {
  FederationConfig federation;
  DataConfig data;
  /// Defaults to default_cnn(image_shape, classes).
  std::optional<Architecture> architecture;
  std::size_t threads = 1;

  Architecture resolved_architecture() const;
};

struct ClientState {
  std::size_t id = 0;
  Dataset data;
  ParameterVector params;
  AdamState optimizer;
  std::vector<std::string> warnings;
};

struct ServerState {
  ParameterVector global;
  ReferenceSet reference;
  std::optional<PruningMask> mask;
  std::size_t round = 0;  // rounds completed
  Strategy strategy = Strategy::standard;
};

struct RoundRecord {
  std::size_t round = 0;
  Strategy strategy = Strategy::standard;
  double rate = 0.0;
  double map = 0.0;
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
  double pruned_fraction = 0.0;
  double wall_ms = 0.0;
  std::uint64_t mask_digest = 0;  // 0 while no mask exists
};

struct ClientUpdate {
  std::size_t client_id = 0;
  std::span<const float> params;
  std::size_t sample_count = 0;
};

/// Sample-size weighted average sum_i (M_i / sum_j M_j) w_i, accumulated in
/// double in ascending client id order.
ParameterVector aggregate(std::vector<ClientUpdate> updates);

struct LocalTrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  MaskMode mask_mode = MaskMode::every_step;
  std::uint64_t shuffle_seed = 0;
};

/// Starts from `global`, runs epochs of shuffled mini-batch Adam (fresh
/// optimizer state) on binary cross-entropy, and stores the result in
/// client.params. With a mask, masked coordinates are exactly zero on return.
/// A batch larger than the client's data is clamped and a warning recorded.
void local_train(ClientState& client, const Architecture& arch,
                 std::span<const float> global, const PruningMask* mask,
                 const LocalTrainOptions& options);

/// Test-set mAP of `params`, evaluated in fixed-size chunks.
EvalResult evaluate(const Architecture& arch, std::span<const float> params,
                    const Dataset& test);

/// One simulated federation. Rounds are numbered from 1; the mask is built at
/// the end of round `warmup` and reused for every later round.
class Federation {
 public:
  explicit Federation(const ExperimentConfig& config);

  /// Runs the next round. Throws if all rounds are done.
  RoundRecord run_round();
  bool done() const { return server_.round >= config_.federation.rounds; }

  const ExperimentConfig& config() const noexcept { return config_; }
  const ServerState& server() const noexcept { return server_; }
  const std::vector<ClientState>& clients() const noexcept { return clients_; }
  const Dataset& test_set() const noexcept { return test_; }
  std::size_t parameter_count() const noexcept { return server_.global.size(); }
  Network global_network() const;

 private:
  void build_mask();

  ExperimentConfig config_;
  Architecture arch_;
  std::vector<ClientState> clients_;
  Dataset test_;
  ServerState server_;
};

struct ExperimentResult {
  std::vector<RoundRecord> records;
  Network final_model;
};

using RoundObserver = std::function<void(const RoundRecord&, const Federation&)>;

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RoundObserver& observer = {});

}  // namespace fedprune
