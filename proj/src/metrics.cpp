#include "fedprune/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "fedprune/errors.hpp"

namespace fedprune {

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw InvalidArgument("average_precision: " + std::to_string(scores.size()) +
                          " scores for " + std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const int y = labels[order[rank]];
    if (y != 0 && y != 1) throw InvalidArgument("average_precision: labels must be 0 or 1");
    if (y == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

EvalResult mean_average_precision(const Tensor& logits, const Tensor& labels) {
  if (logits.shape() != labels.shape() || logits.rank() != 2) {
    throw ShapeError("mean_average_precision: logits " + shape_string(logits.shape()) +
                     " vs labels " + shape_string(labels.shape()));
  }
  const std::size_t n = logits.dim(0), classes = logits.dim(1);
  EvalResult out;
  out.per_class_ap.resize(classes);
  std::vector<double> scores(n);
  std::vector<int> truth(n);
  double total = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = logits[i * classes + c];
      truth[i] = labels[i * classes + c] == 1.0f ? 1 : 0;
    }
    out.per_class_ap[c] = average_precision(scores, truth);
    if (out.per_class_ap[c]) {
      total += *out.per_class_ap[c];
      ++out.scored_classes;
    }
  }
  if (out.scored_classes == 0) {
    throw InvalidArgument("mean_average_precision: no class has a positive sample");
  }
  out.map = total / static_cast<double>(out.scored_classes);
  return out;
}

}  // namespace fedprune
