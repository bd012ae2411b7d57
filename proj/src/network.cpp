#include "fedprune/network.hpp"

#include <algorithm>
#include <cmath>

#include "fedprune/errors.hpp"
#include "kernels.hpp"

namespace fedprune {

using namespace detail;

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::globalavgpool: return "globalavgpool";
    case LayerKind::flatten: return "flatten";
  }
  return "unknown";
}

namespace {

std::string layer_name(std::size_t l, LayerKind kind) {
  return "layer " + std::to_string(l) + " (" + std::string(to_string(kind)) + ")";
}

[[noreturn]] void bad_layer(std::size_t l, LayerKind kind, const std::string& why) {
  throw ShapeError(layer_name(l, kind) + ": " + why);
}

}  // namespace

std::vector<LayerInfo> infer_layers(const Architecture& arch) {
  if (arch.input.empty() || shape_size(arch.input) == 0) {
    throw ShapeError("architecture input shape " + shape_string(arch.input) +
                     " is empty");
  }
  if (arch.layers.empty()) throw ShapeError("architecture has no layers");

  std::vector<LayerInfo> out;
  Shape shape = arch.input;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    const LayerSpec& spec = arch.layers[l];
    LayerInfo info;
    info.spec = spec;
    info.in_shape = shape;
    switch (spec.kind) {
      case LayerKind::dense:
        if (shape.size() != 1) {
          bad_layer(l, spec.kind, "expects a flat input, got " + shape_string(shape));
        }
        if (spec.units == 0) bad_layer(l, spec.kind, "zero units");
        info.channels = spec.units;
        info.fan_in = shape[0];
        shape = {spec.units};
        break;
      case LayerKind::conv2d: {
        if (shape.size() != 3) {
          bad_layer(l, spec.kind, "expects [C,H,W] input, got " + shape_string(shape));
        }
        if (spec.units == 0 || spec.kernel == 0) {
          bad_layer(l, spec.kind, "zero channels or kernel size");
        }
        if (spec.same_padding && spec.kernel % 2 == 0) {
          bad_layer(l, spec.kind, "same padding needs an odd kernel");
        }
        if (!spec.same_padding && (shape[1] < spec.kernel || shape[2] < spec.kernel)) {
          bad_layer(l, spec.kind, "kernel larger than input " + shape_string(shape));
        }
        info.channels = spec.units;
        info.fan_in = shape[0] * spec.kernel * spec.kernel;
        const std::size_t shrink = spec.same_padding ? 0 : spec.kernel - 1;
        shape = {spec.units, shape[1] - shrink, shape[2] - shrink};
        break;
      }
      case LayerKind::relu:
        break;
      case LayerKind::maxpool2d:
        if (shape.size() != 3) {
          bad_layer(l, spec.kind, "expects [C,H,W] input, got " + shape_string(shape));
        }
        if (spec.window == 0 || shape[1] < spec.window || shape[2] < spec.window) {
          bad_layer(l, spec.kind, "window does not fit input " + shape_string(shape));
        }
        shape = {shape[0], shape[1] / spec.window, shape[2] / spec.window};
        break;
      case LayerKind::globalavgpool:
        if (shape.size() != 3) {
          bad_layer(l, spec.kind, "expects [C,H,W] input, got " + shape_string(shape));
        }
        shape = {shape[0]};
        break;
      case LayerKind::flatten:
        shape = {shape_size(shape)};
        break;
      default:
        bad_layer(l, spec.kind, "unknown layer kind");
    }
    info.out_shape = shape;
    info.param_offset = offset;
    offset += info.parameter_count();
    out.push_back(std::move(info));
  }
  if (shape.size() != 1) {
    throw ShapeError("network output must be flat logits, got " + shape_string(shape));
  }
  return out;
}

Architecture default_cnn(const Shape& input, std::size_t classes) {
  return Architecture{
      input,
      {
          LayerSpec::maxpool2d(2),
          LayerSpec::conv2d(6, 3),
          LayerSpec::relu(),
          LayerSpec::maxpool2d(2),
          LayerSpec::conv2d(12, 3),
          LayerSpec::relu(),
          LayerSpec::maxpool2d(2),
          LayerSpec::flatten(),
          LayerSpec::dense(32),
          LayerSpec::relu(),
          LayerSpec::dense(classes),
      }};
}

template <typename T>
BasicNetwork<T>::BasicNetwork(Architecture arch)
    : arch_(std::move(arch)), layers_(infer_layers(arch_)) {
  std::size_t total = 0;
  for (const auto& L : layers_) total += L.parameter_count();
  params_.assign(total, T{0});
}

template <typename T>
void BasicNetwork<T>::set_parameters(std::span<const T> values) {
  if (values.size() != params_.size()) {
    throw InvalidArgument("parameter vector has " + std::to_string(values.size()) +
                          " entries, network expects " +
                          std::to_string(params_.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
}

template <typename T>
std::span<const T> BasicNetwork<T>::channel_block(std::size_t l, std::size_t c) const {
  const LayerInfo& L = layers_.at(l);
  if (!L.has_parameters() || c >= L.channels) {
    throw InvalidArgument(layer_name(l, L.spec.kind) + " has no channel " +
                          std::to_string(c));
  }
  return std::span<const T>(params_).subspan(L.param_offset + c * L.block_size(),
                                             L.block_size());
}

template <typename T>
void BasicNetwork<T>::init_he_uniform(Rng& rng) {
  for (const auto& L : layers_) {
    if (!L.has_parameters()) continue;
    const double bound = std::sqrt(6.0 / static_cast<double>(L.fan_in));
    for (std::size_t c = 0; c < L.channels; ++c) {
      T* block = params_.data() + L.param_offset + c * L.block_size();
      for (std::size_t i = 0; i < L.fan_in; ++i) {
        block[i] = static_cast<T>(rng.uniform(-bound, bound));
      }
      block[L.fan_in] = T{0};
    }
  }
}

template <typename T>
BasicTensor<T> BasicNetwork<T>::forward(const BasicTensor<T>& batch, bool cache) {
  const Shape& s = batch.shape();
  if (s.size() != arch_.input.size() + 1 ||
      !std::equal(arch_.input.begin(), arch_.input.end(), s.begin() + 1)) {
    throw ShapeError(layer_name(0, layers_[0].spec.kind) + ": expected batch of " +
                     shape_string(arch_.input) + ", got " + shape_string(s));
  }
  const std::size_t n = s[0];
  cache_.clear();
  if (cache) cache_.reserve(layers_.size());

  BasicTensor<T> x = batch;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerInfo& L = layers_[l];
    Shape out_shape{n};
    out_shape.insert(out_shape.end(), L.out_shape.begin(), L.out_shape.end());
    BasicTensor<T> y;
    const T* p = params_.data() + L.param_offset;
    switch (L.spec.kind) {
      case LayerKind::dense: {
        y = BasicTensor<T>(out_shape);
        for (std::size_t b = 0; b < n; ++b)
          dense_forward(L, p, x.row(b).data(), y.row(b).data());
        break;
      }
      case LayerKind::conv2d: {
        y = BasicTensor<T>(out_shape);
        for (std::size_t b = 0; b < n; ++b)
          conv_forward(L, p, x.row(b).data(), y.row(b).data());
        break;
      }
      case LayerKind::relu: {
        y = x;
        for (auto& v : y.data()) v = v > T{0} ? v : T{0};
        break;
      }
      case LayerKind::maxpool2d: {
        y = BasicTensor<T>(out_shape);
        for (std::size_t b = 0; b < n; ++b)
          maxpool_forward<T>(L, x.row(b).data(), y.row(b).data(), nullptr);
        break;
      }
      case LayerKind::globalavgpool: {
        y = BasicTensor<T>(out_shape);
        const std::size_t area = L.in_shape[1] * L.in_shape[2];
        for (std::size_t b = 0; b < n; ++b) {
          auto xr = x.row(b);
          auto yr = y.row(b);
          for (std::size_t c = 0; c < L.in_shape[0]; ++c) {
            T acc = 0;
            for (std::size_t i = 0; i < area; ++i) acc += xr[c * area + i];
            yr[c] = acc / static_cast<T>(area);
          }
        }
        break;
      }
      case LayerKind::flatten: {
        y = x;
        y.reshape(out_shape);
        break;
      }
    }
    if (cache) cache_.push_back(std::move(x));
    x = std::move(y);
  }
  return x;
}

template <typename T>
const BasicTensor<T>& BasicNetwork<T>::cached_input(std::size_t l) const {
  if (cache_.size() != layers_.size()) {
    throw MissingCacheError("no cached forward pass; call forward with cache set");
  }
  return cache_.at(l);
}

template <typename T>
std::vector<T> BasicNetwork<T>::backward(const BasicTensor<T>& logit_grad) const {
  if (cache_.size() != layers_.size()) {
    throw MissingCacheError("backward needs a cached forward pass");
  }
  const std::size_t n = cache_.front().dim(0);
  Shape expect{n};
  expect.insert(expect.end(), output_shape().begin(), output_shape().end());
  if (logit_grad.shape() != expect) {
    throw ShapeError("logit gradient shape " + shape_string(logit_grad.shape()) +
                     " does not match logits " + shape_string(expect));
  }

  std::vector<T> grad(params_.size(), T{0});
  BasicTensor<T> g = logit_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const LayerInfo& L = layers_[l];
    const BasicTensor<T>& x = cache_[l];
    const bool need_input_grad = l > 0;
    BasicTensor<T> gx;
    if (need_input_grad) gx = BasicTensor<T>(x.shape());
    const T* p = params_.data() + L.param_offset;
    T* gp = grad.data() + L.param_offset;
    switch (L.spec.kind) {
      case LayerKind::dense:
        for (std::size_t b = 0; b < n; ++b)
          dense_backward(L, p, x.row(b).data(), g.row(b).data(), gp,
                         need_input_grad ? gx.row(b).data() : nullptr);
        break;
      case LayerKind::conv2d:
        for (std::size_t b = 0; b < n; ++b)
          conv_backward(L, p, x.row(b).data(), g.row(b).data(), gp,
                        need_input_grad ? gx.row(b).data() : nullptr);
        break;
      case LayerKind::relu:
        if (need_input_grad) {
          for (std::size_t i = 0; i < x.size(); ++i)
            gx[i] = x[i] > T{0} ? g[i] : T{0};
        }
        break;
      case LayerKind::maxpool2d:
        if (need_input_grad) {
          std::vector<std::size_t> argmax(shape_size(L.out_shape));
          std::vector<T> scratch(argmax.size());
          for (std::size_t b = 0; b < n; ++b) {
            maxpool_forward<T>(L, x.row(b).data(), scratch.data(), argmax.data());
            auto gr = g.row(b);
            auto gxr = gx.row(b);
            for (std::size_t o = 0; o < argmax.size(); ++o) gxr[argmax[o]] += gr[o];
          }
        }
        break;
      case LayerKind::globalavgpool:
        if (need_input_grad) {
          const std::size_t area = L.in_shape[1] * L.in_shape[2];
          for (std::size_t b = 0; b < n; ++b) {
            auto gr = g.row(b);
            auto gxr = gx.row(b);
            for (std::size_t c = 0; c < L.in_shape[0]; ++c)
              for (std::size_t i = 0; i < area; ++i)
                gxr[c * area + i] = gr[c] / static_cast<T>(area);
          }
        }
        break;
      case LayerKind::flatten:
        if (need_input_grad) gx = BasicTensor<T>(x.shape(), g.values());
        break;
    }
    if (need_input_grad) g = std::move(gx);
  }
  return grad;
}

template class BasicNetwork<float>;
template class BasicNetwork<double>;

}  // namespace fedprune
