#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedprune/rng.hpp"
#include "fedprune/tensor.hpp"

namespace fedprune {

enum class LayerKind : std::uint8_t {
  dense = 0,
  conv2d = 1,
  relu = 2,
  maxpool2d = 3,
  globalavgpool = 4,
  flatten = 5,
};

std::string_view to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;      // output features (dense) or channels (conv2d)
  std::size_t kernel = 0;     // conv2d kernel side, odd when same_padding
  bool same_padding = true;   // conv2d zero padding keeps H and W
  std::size_t window = 0;     // maxpool2d window and stride

  static LayerSpec dense(std::size_t units) { return {LayerKind::dense, units, 0, false, 0}; }
  static LayerSpec conv2d(std::size_t channels, std::size_t kernel, bool same_padding = true) {
    return {LayerKind::conv2d, channels, kernel, same_padding, 0};
  }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0, false, 0}; }
  static LayerSpec maxpool2d(std::size_t window = 2) { return {LayerKind::maxpool2d, 0, 0, false, window}; }
  static LayerSpec global_avg_pool() { return {LayerKind::globalavgpool, 0, 0, false, 0}; }
  static LayerSpec flatten() { return {LayerKind::flatten, 0, 0, false, 0}; }

  bool operator==(const LayerSpec&) const = default;
};

struct Architecture {
  Shape input;  // per-sample shape: {C, H, W} or {features}
  std::vector<LayerSpec> layers;

  bool operator==(const Architecture&) const = default;
};

/// Resolved geometry of one layer, including where its parameters live in
/// the flat parameter vector. Parameterized layers store one contiguous block
/// per output channel: fan_in weights followed by the channel's bias.
struct LayerInfo {
  LayerSpec spec;
  Shape in_shape;
  Shape out_shape;
  std::size_t param_offset = 0;
  std::size_t channels = 0;
  std::size_t fan_in = 0;

  bool has_parameters() const {
    return spec.kind == LayerKind::dense || spec.kind == LayerKind::conv2d;
  }
  std::size_t block_size() const { return has_parameters() ? fan_in + 1 : 0; }
  std::size_t parameter_count() const { return channels * block_size(); }
};

/// Shape inference over an architecture. Throws ShapeError naming the first
/// layer whose input it cannot accept.
std::vector<LayerInfo> infer_layers(const Architecture& arch);

/// Plain conv-relu-pool CNN with a two-layer dense head, sized for 32x32
/// multi-channel inputs.
Architecture default_cnn(const Shape& input, std::size_t classes);

template <typename T>
class BasicNetwork {
 public:
  explicit BasicNetwork(Architecture arch);

  const Architecture& architecture() const noexcept { return arch_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  const LayerInfo& layer(std::size_t l) const { return layers_.at(l); }
  const std::vector<LayerInfo>& layers() const noexcept { return layers_; }
  const Shape& input_shape() const noexcept { return arch_.input; }
  const Shape& output_shape() const noexcept { return layers_.back().out_shape; }

  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<const T> parameters() const noexcept { return params_; }
  std::span<T> parameters() noexcept { return params_; }
  void set_parameters(std::span<const T> values);

  /// fan_in weights then bias of output channel `c` of layer `l`.
  std::span<const T> channel_block(std::size_t l, std::size_t c) const;

  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  void init_he_uniform(Rng& rng);

  /// Runs the batch [B, ...input] through every layer. With `cache` set the
  /// input of each layer is retained for backward and relevance propagation.
  BasicTensor<T> forward(const BasicTensor<T>& batch, bool cache = true);

  /// Gradient of the loss w.r.t. every parameter in canonical order, given
  /// the gradient w.r.t. the logits of the most recent cached forward.
  std::vector<T> backward(const BasicTensor<T>& logit_grad) const;

  bool has_cache() const noexcept { return !cache_.empty(); }
  const BasicTensor<T>& cached_input(std::size_t l) const;
  void clear_cache() noexcept { cache_.clear(); }

  template <typename U>
  BasicNetwork<U> cast() const {
    BasicNetwork<U> out(arch_);
    std::vector<U> p(params_.begin(), params_.end());
    out.set_parameters(p);
    return out;
  }

 private:
  Architecture arch_;
  std::vector<LayerInfo> layers_;
  std::vector<T> params_;
  std::vector<BasicTensor<T>> cache_;
};

using Network = BasicNetwork<float>;
using ParameterVector = std::vector<float>;

extern template class BasicNetwork<float>;
extern template class BasicNetwork<double>;

}  // namespace fedprune
