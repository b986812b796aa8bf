#pragma once

#include <functional>

#include "gcmt/matrix.hpp"

namespace gcmt {

// Central-difference check of an analytic gradient. loss_fn must be a
// deterministic, side-effect-free scalar function of the parameters. Returns
// max over coordinates of |analytic - numeric| / max(1, |numeric|).
double finite_diff_check(const std::function<double(const Matrix&)>& loss_fn,
                         const Matrix& params,
                         const Matrix& analytic,
                         double h);

}  // namespace gcmt
