#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedprune/data.hpp"
#include "fedprune/network.hpp"
#include "fedprune/pruning.hpp"

namespace fedprune {

enum class BiasMode {
  absorb,  // bias enters the denominator; its share of relevance is dropped
  ignore,  // bias left out of the denominator; relevance is conserved
};

enum class OutputRelevance {
  all_logits,   // every logit seeds relevance
  true_labels,  // logits of absent classes are zeroed first
};

struct LrpOptions {
  double epsilon = 1e-9;
  BiasMode bias_mode = BiasMode::absorb;
  OutputRelevance output = OutputRelevance::all_logits;
};

/// Relevance at every layer boundary: entry l has the shape of layer l's
/// input (with batch axis); the last entry is the output relevance.
struct RelevanceMap {
  std::vector<BasicTensor<double>> boundaries;

  std::size_t sample_count() const {
    return boundaries.empty() ? 0 : boundaries.front().dim(0);
  }
  const BasicTensor<double>& input_of(std::size_t layer) const { return boundaries.at(layer); }
  const BasicTensor<double>& output() const { return boundaries.back(); }
};

/// Epsilon-rule relevance propagation over the most recent cached forward of
/// `net`. For dense and conv layers each input k receives
///   sum_j a_k w_kj / (z_j + b_j + eps * sign(z_j + b_j)) * R_j,
/// with z_j = sum_k a_k w_kj accumulated in double; a zero denominator passes
/// no relevance. ReLU forwards relevance to active inputs, max-pooling to the
/// argmax cell (lowest flat index on ties), flatten reshapes.
template <typename T>
RelevanceMap propagate(const BasicNetwork<T>& net, const BasicTensor<T>& output_relevance,
                       const LrpOptions& options = {});

/// Per-sample score of each component: the relevance summed over the
/// component's output activation cells. Indexed by component id.
std::vector<double> component_relevance(const RelevanceMap& rmap,
                                        std::span<const LayerInfo> layers,
                                        std::span<const Component> components,
                                        std::size_t sample);

struct RelevanceReport {
  std::vector<Component> components;
  std::vector<double> mean_relevance;  // indexed by component id
  std::size_t sample_count = 0;

  bool operator==(const RelevanceReport&) const = default;
};

/// Mean component relevance over the reference set. Works on a private copy
/// of the network; samples are folded in index order.
RelevanceReport component_relevance_report(const Network& net, const ReferenceSet& ref,
                                           const LrpOptions& options = {},
                                           std::size_t chunk = 32);

/// CSV with header component_id,layer_index,channel_index,mean_relevance.
std::string relevance_report_csv(const RelevanceReport& report);

extern template RelevanceMap propagate(const Network&, const Tensor&, const LrpOptions&);
extern template RelevanceMap propagate(const BasicNetwork<double>&,
                                       const BasicTensor<double>&, const LrpOptions&);

}  // namespace fedprune
