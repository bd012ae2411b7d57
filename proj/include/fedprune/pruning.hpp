#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedprune/network.hpp"

namespace fedprune {

/// One prunable unit: an output channel of a conv2d or dense layer together
/// with its fan-in weights and bias, a contiguous range in canonical order.
struct Component {
  std::size_t id = 0;
  std::size_t layer_index = 0;
  std::size_t channel_index = 0;
  std::size_t param_begin = 0;
  std::size_t param_count = 0;

  bool operator==(const Component&) const = default;
};

/// Index of the last parameterized layer (the classifier), which is never
/// pruned. Throws if the network has no parameterized layer.
std::size_t classifier_layer(std::span<const LayerInfo> layers);

/// One component per output channel of every parameterized layer except the
/// classifier, ordered by (layer, channel); ids are positions in that order.
std::vector<Component> enumerate_components(std::span<const LayerInfo> layers);

template <typename T>
std::vector<Component> enumerate_components(const BasicNetwork<T>& net) {
  return enumerate_components(std::span<const LayerInfo>(net.layers()));
}

class PruningMask {
 public:
  PruningMask() = default;
  /// All-ones mask over `n` parameters.
  explicit PruningMask(std::size_t n, double rate = 0.0, std::uint32_t round = 0);

  std::size_t size() const noexcept { return keep_.size(); }
  bool keeps(std::size_t i) const { return keep_[i] != 0; }
  std::size_t kept_count() const;
  std::size_t pruned_count() const { return size() - kept_count(); }
  double pruned_fraction() const;

  const std::vector<std::size_t>& pruned_components() const noexcept { return pruned_; }
  double rate_requested() const noexcept { return rate_; }
  std::uint32_t created_at_round() const noexcept { return round_; }
  void set_created_at_round(std::uint32_t round) noexcept { round_ = round; }

  /// Zeroes the bits of `c` and records it as pruned.
  void prune(const Component& c);

  /// Keep bits packed LSB-first, ceil(n / 8) bytes.
  std::vector<std::uint8_t> bitmap() const;
  /// FNV-1a 64 over the packed bitmap.
  std::uint64_t digest() const;

  static PruningMask from_bitmap(std::span<const std::uint8_t> bitmap, std::size_t n,
                                 double rate, std::uint32_t round);

  /// Masks compare equal when their keep bits match.
  bool operator==(const PruningMask& other) const { return keep_ == other.keep_; }

 private:
  std::vector<std::uint8_t> keep_;
  std::vector<std::size_t> pruned_;
  double rate_ = 0.0;
  std::uint32_t round_ = 0;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

/// How mean component relevance is turned into a pruning order.
enum class RelevanceRanking {
  magnitude,     // ascending |R|: components that barely move the logits go first
  signed_value,  // ascending R: strongly negative evidence goes first
};

std::vector<double> ranking_scores(std::span<const double> relevance, RelevanceRanking ranking);

/// Greedy mask construction over a ranking. Components are visited in
/// ascending `scores` (ties: lower id first). A component that would leave its
/// layer without a surviving channel is skipped; the first component whose
/// parameters would push the pruned total past rate * total_params stops the
/// scan. `scores` is indexed by component id.
PruningMask build_mask(std::span<const double> scores,
                       std::span<const Component> components, double rate,
                       std::size_t total_params);

/// Same budget and survival rules with a uniformly random ranking.
PruningMask build_random_mask(std::span<const Component> components, double rate,
                              std::size_t total_params, std::uint64_t seed);

/// Elementwise product with the keep bits; masked coordinates become exactly 0.
ParameterVector apply_mask(std::span<const float> params, const PruningMask& mask);
void apply_mask_inplace(std::span<float> params, const PruningMask& mask);

/// Bytes charged for transmitting the bitmap: 16-byte header + ceil(n / 8).
std::size_t mask_transfer_bytes(const PruningMask& mask);

/// "FPMK" | version u16 | n u64 | q f32 | created_at_round u32 |
/// bitmap ceil(n / 8) bytes LSB-first | digest u64. Little-endian.
std::vector<std::uint8_t> encode_mask(const PruningMask& mask);
PruningMask decode_mask(std::span<const std::uint8_t> bytes);
void save_mask(const PruningMask& mask, const std::string& path);
PruningMask load_mask(const std::string& path);

}  // namespace fedprune
