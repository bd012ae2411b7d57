#pragma once

#include <cstdint>
#include <span>

#include "fedprune/network.hpp"

namespace fedprune {

struct AdamState {
  ParameterVector first_moment;
  ParameterVector second_moment;
  std::uint64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Zero moments sized for `n` parameters.
  static AdamState for_size(std::size_t n, double learning_rate = 1e-3);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<float> params, std::span<const float> grad,
               AdamState& state);

}  // namespace fedprune
