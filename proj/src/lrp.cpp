#include "fedprune/lrp.hpp"

#include <cstdio>

#include "fedprune/errors.hpp"
#include "kernels.hpp"

namespace fedprune {

namespace {

double stabilize(double denom, double eps) {
  if (eps > 0.0) denom += denom >= 0.0 ? eps : -eps;
  return denom;
}

// Layer parameters converted to double, with biases zeroed when the bias is
// kept out of the denominator.
template <typename T>
std::vector<double> layer_params(const BasicNetwork<T>& net, const LayerInfo& L,
                                 BiasMode mode) {
  auto src = net.parameters().subspan(L.param_offset, L.parameter_count());
  std::vector<double> p(src.begin(), src.end());
  if (mode == BiasMode::ignore) {
    for (std::size_t c = 0; c < L.channels; ++c) p[c * L.block_size() + L.fan_in] = 0.0;
  }
  return p;
}

void dense_relevance(const LayerInfo& L, const double* p, const double* a,
                     const double* rout, double* rin, double eps) {
  const std::size_t block = L.block_size();
  for (std::size_t j = 0; j < L.channels; ++j) {
    const double* w = p + j * block;
    double z = 0.0;
    for (std::size_t k = 0; k < L.fan_in; ++k) z += a[k] * w[k];
    const double denom = stabilize(z + w[L.fan_in], eps);
    if (denom == 0.0) continue;
    const double s = rout[j] / denom;
    for (std::size_t k = 0; k < L.fan_in; ++k) rin[k] += a[k] * w[k] * s;
  }
}

void conv_relevance(const LayerInfo& L, const double* p, const double* a,
                    const double* rout, double* rin, double eps) {
  const std::size_t out_cells = shape_size(L.out_shape);
  const std::size_t in_cells = shape_size(L.in_shape);
  std::vector<double> z(out_cells);
  detail::conv_forward(L, p, a, z.data());
  std::vector<double> s(out_cells);
  for (std::size_t i = 0; i < out_cells; ++i) {
    const double denom = stabilize(z[i], eps);
    s[i] = denom == 0.0 ? 0.0 : rout[i] / denom;
  }
  // c = W^T s is the input-gradient of a conv with output gradient s.
  std::vector<double> c(in_cells, 0.0);
  std::vector<double> scratch(L.parameter_count(), 0.0);
  detail::conv_backward(L, p, a, s.data(), scratch.data(), c.data());
  for (std::size_t i = 0; i < in_cells; ++i) rin[i] += a[i] * c[i];
}

}  // namespace

template <typename T>
RelevanceMap propagate(const BasicNetwork<T>& net, const BasicTensor<T>& output_relevance,
                       const LrpOptions& options) {
  if (!(options.epsilon >= 0.0)) throw InvalidArgument("LRP epsilon must be >= 0");
  if (!net.has_cache()) throw MissingCacheError("propagate needs a cached forward pass");
  const std::size_t n = net.cached_input(0).dim(0);
  Shape expect{n};
  expect.insert(expect.end(), net.output_shape().begin(), net.output_shape().end());
  if (output_relevance.shape() != expect) {
    throw ShapeError("output relevance " + shape_string(output_relevance.shape()) +
                     " does not match cached logits " + shape_string(expect));
  }

  const std::size_t layers = net.layer_count();
  RelevanceMap map;
  map.boundaries.resize(layers + 1);
  map.boundaries[layers] = output_relevance.template cast<double>();

  for (std::size_t l = layers; l-- > 0;) {
    const LayerInfo& L = net.layer(l);
    const BasicTensor<T>& x = net.cached_input(l);
    const BasicTensor<double>& rout = map.boundaries[l + 1];
    BasicTensor<double> rin(x.shape());
    switch (L.spec.kind) {
      case LayerKind::dense:
      case LayerKind::conv2d: {
        const auto p = layer_params(net, L, options.bias_mode);
        std::vector<double> a(x.row_size());
        for (std::size_t b = 0; b < n; ++b) {
          auto xr = x.row(b);
          std::copy(xr.begin(), xr.end(), a.begin());
          if (L.spec.kind == LayerKind::dense) {
            dense_relevance(L, p.data(), a.data(), rout.row(b).data(), rin.row(b).data(),
                            options.epsilon);
          } else {
            conv_relevance(L, p.data(), a.data(), rout.row(b).data(), rin.row(b).data(),
                           options.epsilon);
          }
        }
        break;
      }
      case LayerKind::relu:
        for (std::size_t i = 0; i < x.size(); ++i) rin[i] = x[i] > T{0} ? rout[i] : 0.0;
        break;
      case LayerKind::maxpool2d: {
        std::vector<std::size_t> argmax(shape_size(L.out_shape));
        std::vector<T> scratch(argmax.size());
        for (std::size_t b = 0; b < n; ++b) {
          detail::maxpool_forward<T>(L, x.row(b).data(), scratch.data(), argmax.data());
          auto ro = rout.row(b);
          auto ri = rin.row(b);
          for (std::size_t o = 0; o < argmax.size(); ++o) ri[argmax[o]] += ro[o];
        }
        break;
      }
      case LayerKind::globalavgpool: {
        const std::size_t area = L.in_shape[1] * L.in_shape[2];
        for (std::size_t b = 0; b < n; ++b) {
          auto xr = x.row(b);
          auto ro = rout.row(b);
          auto ri = rin.row(b);
          for (std::size_t c = 0; c < L.in_shape[0]; ++c) {
            double z = 0.0;
            for (std::size_t i = 0; i < area; ++i) z += static_cast<double>(xr[c * area + i]) / area;
            const double denom = stabilize(z, options.epsilon);
            if (denom == 0.0) continue;
            for (std::size_t i = 0; i < area; ++i)
              ri[c * area + i] = static_cast<double>(xr[c * area + i]) / area / denom * ro[c];
          }
        }
        break;
      }
      case LayerKind::flatten:
        rin = BasicTensor<double>(x.shape(), rout.values());
        break;
    }
    map.boundaries[l] = std::move(rin);
  }
  return map;
}

std::vector<double> component_relevance(const RelevanceMap& rmap,
                                        std::span<const LayerInfo> layers,
                                        std::span<const Component> components,
                                        std::size_t sample) {
  if (rmap.boundaries.size() != layers.size() + 1) {
    throw InvalidArgument("relevance map has " + std::to_string(rmap.boundaries.size()) +
                          " boundaries for a " + std::to_string(layers.size()) +
                          "-layer network");
  }
  if (sample >= rmap.sample_count()) {
    throw InvalidArgument("sample " + std::to_string(sample) + " not in relevance map");
  }
  std::vector<double> out(components.size(), 0.0);
  for (std::size_t i = 0; i < components.size(); ++i) {
    const Component& c = components[i];
    if (c.layer_index >= layers.size() || !layers[c.layer_index].has_parameters() ||
        c.channel_index >= layers[c.layer_index].channels) {
      throw InvalidArgument("component " + std::to_string(c.id) +
                            " does not belong to this network");
    }
    const LayerInfo& L = layers[c.layer_index];
    const auto r = rmap.boundaries[c.layer_index + 1].row(sample);
    const std::size_t cells = shape_size(L.out_shape) / L.channels;
    double acc = 0.0;
    for (std::size_t k = 0; k < cells; ++k) acc += r[c.channel_index * cells + k];
    out[i] = acc;
  }
  return out;
}

RelevanceReport component_relevance_report(const Network& net, const ReferenceSet& ref,
                                           const LrpOptions& options, std::size_t chunk) {
  const std::size_t m = ref.size();
  if (m == 0) throw InvalidArgument("reference set is empty");
  if (chunk == 0) chunk = 1;
  Network local = net;
  RelevanceReport report;
  report.components = enumerate_components(local);
  report.sample_count = m;
  std::vector<double> sum(report.components.size(), 0.0);

  for (std::size_t start = 0; start < m; start += chunk) {
    const std::size_t stop = std::min(m, start + chunk);
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < stop; ++i) idx.push_back(i);
    const Dataset batch = ref.subset(idx);
    Tensor seed = local.forward(batch.images, true);
    if (options.output == OutputRelevance::true_labels) {
      for (std::size_t i = 0; i < seed.size(); ++i) seed[i] *= batch.labels[i];
    }
    const RelevanceMap rmap = propagate(local, seed, options);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto scores = component_relevance(rmap, local.layers(), report.components, b);
      for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += scores[c];
    }
  }
  report.mean_relevance.resize(sum.size());
  for (std::size_t c = 0; c < sum.size(); ++c)
    report.mean_relevance[c] = sum[c] / static_cast<double>(m);
  return report;
}

std::string relevance_report_csv(const RelevanceReport& report) {
  std::string out = "component_id,layer_index,channel_index,mean_relevance\n";
  char buf[128];
  for (const Component& c : report.components) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g\n", c.id, c.layer_index,
                  c.channel_index, report.mean_relevance[c.id]);
    out += buf;
  }
  return out;
}

template RelevanceMap propagate(const Network&, const Tensor&, const LrpOptions&);
template RelevanceMap propagate(const BasicNetwork<double>&, const BasicTensor<double>&,
                                const LrpOptions&);

}  // namespace fedprune
