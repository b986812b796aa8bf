#include "gcmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gcmt/errors.hpp"

namespace gcmt {

double finite_diff_check(const std::function<double(const Matrix&)>& loss_fn,
                         const Matrix& params,
                         const Matrix& analytic,
                         double h) {
    if (!(h > 0.0)) throw ParameterError("finite_diff_check step must be positive");
    if (!params.same_shape(analytic)) {
        throw DimensionError("finite_diff_check shape mismatch: " + params.shape_str() + " vs " + analytic.shape_str());
    }
    Matrix probe = params;
    double max_err = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe.data()[i];
        probe.data()[i] = saved + h;
        const double up = loss_fn(probe);
        probe.data()[i] = saved - h;
        const double down = loss_fn(probe);
        probe.data()[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite_diff_check: loss function returned a non-finite value");
        }
        const double numeric = (up - down) / (2.0 * h);
        const double err = std::abs(analytic.data()[i] - numeric) / std::max(1.0, std::abs(numeric));
        if (err > max_err) max_err = err;
    }
    return max_err;
}

}  // namespace gcmt
