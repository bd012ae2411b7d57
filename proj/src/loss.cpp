#include "fedprune/loss.hpp"

#include <cmath>

#include "fedprune/errors.hpp"

namespace fedprune {

template <typename T>
LossResult<T> binary_cross_entropy(const BasicTensor<T>& logits,
                                   const BasicTensor<T>& targets) {
  if (logits.shape() != targets.shape()) {
    throw ShapeError("logits " + shape_string(logits.shape()) + " vs targets " +
                     shape_string(targets.shape()));
  }
  if (logits.empty()) throw InvalidArgument("binary_cross_entropy on empty batch");

  const std::size_t cells = logits.size();
  LossResult<T> out{0.0, BasicTensor<T>(logits.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    const double y = static_cast<double>(targets[i]);
    if (y != 0.0 && y != 1.0) {
      throw InvalidArgument("target at flat index " + std::to_string(i) +
                            " is not 0 or 1");
    }
    const double z = static_cast<double>(logits[i]);
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    // sigmoid without overflow for either sign of z
    const double e = std::exp(-std::abs(z));
    const double sig = z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    out.logit_grad[i] = static_cast<T>((sig - y) / static_cast<double>(cells));
  }
  out.loss = total / static_cast<double>(cells);
  return out;
}

template LossResult<float> binary_cross_entropy(const Tensor&, const Tensor&);
template LossResult<double> binary_cross_entropy(const BasicTensor<double>&,
                                                 const BasicTensor<double>&);

}  // namespace fedprune
