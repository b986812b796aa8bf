#include "gcmt/adam.hpp"

#include <cmath>

#include "gcmt/errors.hpp"

namespace gcmt {

void adam_step_inplace(AdamState& state, Matrix& params, const Matrix& grads) {
    if (!params.same_shape(grads)) {
        throw DimensionError("adam_step shape mismatch: params " + params.shape_str() + " vs grads " + grads.shape_str());
    }
    if (state.first_moment.size() == 0) {
        state.first_moment = Matrix(params.rows(), params.cols());
        state.second_moment = Matrix(params.rows(), params.cols());
    }
    if (!state.first_moment.same_shape(params)) {
        throw DimensionError("adam_step state shape mismatch: " + state.first_moment.shape_str() + " vs " + params.shape_str());
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads.data()[i];
        double& m = state.first_moment.data()[i];
        double& v = state.second_moment.data()[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        params.data()[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

std::pair<AdamState, Matrix> adam_step(const AdamState& state, const Matrix& params, const Matrix& grads) {
    AdamState s = state;
    Matrix p = params;
    adam_step_inplace(s, p, grads);
    return {std::move(s), std::move(p)};
}

}  // namespace gcmt
