#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fedprune/tensor.hpp"

namespace fedprune {

/// Non-interpolated average precision: the mean of precision@r over the
/// ranks r of positive samples, ranking by score descending with ties
/// broken by lower sample index. Returns nullopt when there is no positive.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const int> labels);

struct EvalResult {
  /// nullopt for classes without a positive sample.
  std::vector<std::optional<double>> per_class_ap;
  double map = 0.0;
  std::size_t scored_classes = 0;
};

/// Macro mAP over classes that have at least one positive. Logits are ranked
/// directly since the sigmoid preserves order.
EvalResult mean_average_precision(const Tensor& logits, const Tensor& labels);

}  // namespace fedprune
