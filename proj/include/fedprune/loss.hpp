#pragma once

#include "fedprune/tensor.hpp"

namespace fedprune {

template <typename T>
struct LossResult {
  double loss = 0.0;
  BasicTensor<T> logit_grad;
};

/// Mean binary cross-entropy over every (sample, class) cell, computed from
/// logits in the stable form max(z,0) - z*y + log1p(exp(-|z|)). The gradient
/// is (sigmoid(z) - y) / cells. Targets must be exactly 0 or 1.
template <typename T>
LossResult<T> binary_cross_entropy(const BasicTensor<T>& logits,
                                   const BasicTensor<T>& targets);

extern template LossResult<float> binary_cross_entropy(const Tensor&, const Tensor&);
extern template LossResult<double> binary_cross_entropy(const BasicTensor<double>&,
                                                        const BasicTensor<double>&);

}  // namespace fedprune
