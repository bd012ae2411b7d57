#include "fedprune/adam.hpp"

#include <cmath>

#include "fedprune/errors.hpp"

namespace fedprune {

AdamState AdamState::for_size(std::size_t n, double learning_rate) {
  AdamState s;
  s.first_moment.assign(n, 0.0f);
  s.second_moment.assign(n, 0.0f);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(std::span<float> params, std::span<const float> grad,
               AdamState& state) {
  if (params.size() != grad.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw InvalidArgument("adam_step length mismatch: params " +
                          std::to_string(params.size()) + ", grad " +
                          std::to_string(grad.size()) + ", moments " +
                          std::to_string(state.first_moment.size()));
  }
  if (!(state.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    const double m = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
    const double v = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
    state.first_moment[i] = static_cast<float>(m);
    state.second_moment[i] = static_cast<float>(v);
    const double step = state.learning_rate * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
    params[i] = static_cast<float>(params[i] - step);
  }
}

}  // namespace fedprune
