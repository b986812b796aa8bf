#pragma once

#include <utility>

#include "gcmt/matrix.hpp"

namespace gcmt {

// Per-parameter Adam optimizer state. Moments are lazily shaped on the first
// step.
struct AdamState {
    long step = 0;
    Matrix first_moment;
    Matrix second_moment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 0.00035;
};

// One Adam update with bias correction. Pure: returns the new state and the
// new parameters.
std::pair<AdamState, Matrix> adam_step(const AdamState& state, const Matrix& params, const Matrix& grads);

// In-place flavor used by the training loop; identical arithmetic.
void adam_step_inplace(AdamState& state, Matrix& params, const Matrix& grads);

}  // namespace gcmt
