#include "fedprune/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedprune/binary_io.hpp"
#include "fedprune/errors.hpp"
#include "fedprune/rng.hpp"

namespace fedprune {

std::size_t classifier_layer(std::span<const LayerInfo> layers) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (layers[l].has_parameters()) return l;
  }
  throw InvalidArgument("network has no parameterized layer");
}

std::vector<Component> enumerate_components(std::span<const LayerInfo> layers) {
  std::vector<Component> out;
  const std::size_t classifier = classifier_layer(layers);
  for (std::size_t l = 0; l < classifier; ++l) {
    const LayerInfo& L = layers[l];
    if (!L.has_parameters()) continue;
    for (std::size_t c = 0; c < L.channels; ++c) {
      out.push_back({out.size(), l, c, L.param_offset + c * L.block_size(),
                     L.block_size()});
    }
  }
  return out;
}

PruningMask::PruningMask(std::size_t n, double rate, std::uint32_t round)
    : keep_(n, 1), rate_(rate), round_(round) {}

std::size_t PruningMask::kept_count() const {
  return static_cast<std::size_t>(std::count(keep_.begin(), keep_.end(), 1));
}

double PruningMask::pruned_fraction() const {
  return keep_.empty() ? 0.0
                       : static_cast<double>(pruned_count()) / static_cast<double>(size());
}

void PruningMask::prune(const Component& c) {
  if (c.param_begin + c.param_count > keep_.size()) {
    throw InvalidArgument("component " + std::to_string(c.id) +
                          " lies outside a mask of " + std::to_string(keep_.size()));
  }
  std::fill_n(keep_.begin() + static_cast<std::ptrdiff_t>(c.param_begin), c.param_count, 0);
  pruned_.insert(std::upper_bound(pruned_.begin(), pruned_.end(), c.id), c.id);
}

std::vector<std::uint8_t> PruningMask::bitmap() const {
  std::vector<std::uint8_t> bits((keep_.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < keep_.size(); ++i)
    if (keep_[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return bits;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t PruningMask::digest() const { return fnv1a64(bitmap()); }

PruningMask PruningMask::from_bitmap(std::span<const std::uint8_t> bitmap, std::size_t n,
                                     double rate, std::uint32_t round) {
  if (bitmap.size() != (n + 7) / 8) {
    throw ProtocolError("bitmap of " + std::to_string(bitmap.size()) +
                        " bytes cannot describe " + std::to_string(n) + " parameters");
  }
  PruningMask m(n, rate, round);
  for (std::size_t i = 0; i < n; ++i) m.keep_[i] = (bitmap[i / 8] >> (i % 8)) & 1u;
  return m;
}

namespace {

PruningMask greedy(std::span<const std::size_t> order, std::span<const Component> components,
                   double rate, std::size_t total_params) {
  std::vector<std::size_t> alive;  // per layer index
  for (const Component& c : components) {
    if (c.layer_index >= alive.size()) alive.resize(c.layer_index + 1, 0);
    ++alive[c.layer_index];
  }
  PruningMask mask(total_params, rate);
  const double budget = rate * static_cast<double>(total_params);
  std::size_t pruned = 0;
  for (std::size_t id : order) {
    const Component& c = components[id];
    if (alive[c.layer_index] <= 1) continue;
    if (static_cast<double>(pruned + c.param_count) > budget) break;
    mask.prune(c);
    pruned += c.param_count;
    --alive[c.layer_index];
  }
  return mask;
}

void check_inputs(std::span<const Component> components, double rate,
                  std::size_t total_params) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw InvalidArgument("pruning rate must lie in [0, 1), got " + std::to_string(rate));
  }
  for (std::size_t i = 0; i < components.size(); ++i) {
    const Component& c = components[i];
    if (c.id != i) throw InvalidArgument("component ids must equal their positions");
    if (c.param_count == 0 || c.param_begin + c.param_count > total_params) {
      throw InvalidArgument("component " + std::to_string(i) +
                            " has an invalid parameter range");
    }
  }
}

}  // namespace

std::vector<double> ranking_scores(std::span<const double> relevance, RelevanceRanking ranking) {
  std::vector<double> out(relevance.begin(), relevance.end());
  if (ranking == RelevanceRanking::magnitude) {
    for (double& v : out) v = std::abs(v);
  }
  return out;
}

PruningMask build_mask(std::span<const double> scores,
                       std::span<const Component> components, double rate,
                       std::size_t total_params) {
  check_inputs(components, rate, total_params);
  if (scores.size() != components.size()) {
    throw InvalidArgument("relevance report has " + std::to_string(scores.size()) +
                          " entries for " + std::to_string(components.size()) +
                          " components");
  }
  std::vector<std::size_t> order(components.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return greedy(order, components, rate, total_params);
}

PruningMask build_random_mask(std::span<const Component> components, double rate,
                              std::size_t total_params, std::uint64_t seed) {
  check_inputs(components, rate, total_params);
  std::vector<std::size_t> order(components.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  return greedy(order, components, rate, total_params);
}

ParameterVector apply_mask(std::span<const float> params, const PruningMask& mask) {
  ParameterVector out(params.begin(), params.end());
  apply_mask_inplace(out, mask);
  return out;
}

void apply_mask_inplace(std::span<float> params, const PruningMask& mask) {
  if (params.size() != mask.size()) {
    throw InvalidArgument("mask covers " + std::to_string(mask.size()) +
                          " parameters, vector has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!mask.keeps(i)) params[i] = 0.0f;
}

std::size_t mask_transfer_bytes(const PruningMask& mask) {
  return 16 + (mask.size() + 7) / 8;
}

namespace {
constexpr std::uint16_t kMaskVersion = 1;
}

std::vector<std::uint8_t> encode_mask(const PruningMask& mask) {
  ByteWriter w;
  w.magic("FPMK");
  w.u16(kMaskVersion);
  w.u64(mask.size());
  w.f32(static_cast<float>(mask.rate_requested()));
  w.u32(mask.created_at_round());
  const auto bits = mask.bitmap();
  w.raw(bits);
  w.u64(fnv1a64(bits));
  return w.take();
}

PruningMask decode_mask(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "mask");
  r.expect_magic("FPMK");
  const std::uint16_t version = r.u16();
  if (version != kMaskVersion) {
    throw IoError("mask: unsupported version " + std::to_string(version));
  }
  const std::uint64_t n = r.u64();
  const float q = r.f32();
  const std::uint32_t round = r.u32();
  if (n / 8 > r.remaining()) throw IoError("mask: truncated bitmap");
  const auto bits = r.raw(static_cast<std::size_t>((n + 7) / 8));
  const std::uint64_t digest = r.u64();
  r.expect_end();
  if (fnv1a64(bits) != digest) throw ProtocolError("mask: digest mismatch");
  return PruningMask::from_bitmap(bits, static_cast<std::size_t>(n), q, round);
}

void save_mask(const PruningMask& mask, const std::string& path) {
  write_file(path, encode_mask(mask));
}

PruningMask load_mask(const std::string& path) {
  try {
    return decode_mask(read_file(path));
  } catch (const Error& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace fedprune
