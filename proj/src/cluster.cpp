#include "gcmt/cluster.hpp"

#include <cmath>
#include <limits>

#include "gcmt/errors.hpp"
#include "gcmt/numeric.hpp"

namespace gcmt {

namespace {

double squared_distance(const Matrix& a, int ai, const Matrix& b, int bi) {
    const double* x = a.row(ai);
    const double* y = b.row(bi);
    double acc = 0.0;
    for (int d = 0; d < a.cols(); ++d) {
        const double diff = x[d] - y[d];
        acc += diff * diff;
    }
    return acc;
}

// Nearest center per point, ties to the lower center index. Returns inertia.
double assign_points(const Matrix& x, const Matrix& centers, std::vector<int>& assign, std::vector<double>& d2) {
    double inertia = 0.0;
    for (int i = 0; i < x.rows(); ++i) {
        int best = 0;
        double best_d = squared_distance(x, i, centers, 0);
        for (int c = 1; c < centers.rows(); ++c) {
            const double d = squared_distance(x, i, centers, c);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        assign[i] = best;
        d2[i] = best_d;
        inertia += best_d;
    }
    return inertia;
}

// Member means with empty-cluster repair: an empty cluster takes over the
// point farthest from its assigned center, never draining a singleton.
void update_centers(const Matrix& x, std::vector<int>& assign, std::vector<double>& d2, Matrix& centers) {
    const int c = centers.rows();
    const int dim = x.cols();
    std::vector<int> counts(c, 0);
    Matrix sums(c, dim);
    for (int i = 0; i < x.rows(); ++i) {
        const int a = assign[i];
        ++counts[a];
        for (int d = 0; d < dim; ++d) {
            sums(a, d) += x(i, d);
        }
    }
    for (int e = 0; e < c; ++e) {
        if (counts[e] > 0) continue;
        int steal = -1;
        double steal_d = -1.0;
        for (int i = 0; i < x.rows(); ++i) {
            if (counts[assign[i]] < 2) continue;
            if (d2[i] > steal_d) {
                steal_d = d2[i];
                steal = i;
            }
        }
        if (steal < 0) {
            throw StateError("cannot repair empty cluster " + std::to_string(e));
        }
        const int from = assign[steal];
        --counts[from];
        counts[e] = 1;
        for (int d = 0; d < dim; ++d) {
            sums(from, d) -= x(steal, d);
            sums(e, d) = x(steal, d);
        }
        assign[steal] = e;
        d2[steal] = 0.0;
    }
    for (int k = 0; k < c; ++k) {
        const double inv = 1.0 / counts[k];
        for (int d = 0; d < dim; ++d) {
            centers(k, d) = sums(k, d) * inv;
        }
    }
}

Matrix seed_centers(const Matrix& x, int c, Rng& rng) {
    const int n = x.rows();
    Matrix centers(c, x.cols());
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());

    int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    for (int d = 0; d < x.cols(); ++d) centers(0, d) = x(first, d);

    for (int k = 1; k < c; ++k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(x, i, centers, k - 1));
            total += d2[i];
        }
        int pick = -1;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double cum = 0.0;
            for (int i = 0; i < n; ++i) {
                cum += d2[i];
                if (cum > r) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick < 0) {
            // Every point already coincides with a center; any pick works.
            pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        }
        for (int d = 0; d < x.cols(); ++d) centers(k, d) = x(pick, d);
    }
    return centers;
}

}  // namespace

Matrix average_teacher_features(const std::vector<Matrix>& per_teacher) {
    if (per_teacher.empty()) {
        throw DimensionError("need at least one feature matrix");
    }
    const Matrix& first = per_teacher[0];
    Matrix mean(first.rows(), first.cols());
    const double inv_m = 1.0 / static_cast<double>(per_teacher.size());
    for (const auto& f : per_teacher) {
        if (!f.same_shape(first)) {
            throw DimensionError("feature shapes differ: " + first.shape_str() + " vs " + f.shape_str());
        }
        for (std::size_t t = 0; t < f.size(); ++t) {
            mean.data()[t] += f.data()[t] * inv_m;
        }
    }
    return l2_normalize_rows(mean);
}

LloydResult lloyd_kmeans(const Matrix& features, int c, int max_iters, Rng& rng) {
    const int n = features.rows();
    if (c < 1) {
        throw ParameterError("cluster count must be positive, got " + std::to_string(c));
    }
    if (n < c) {
        throw SizeError("cannot make " + std::to_string(c) + " clusters from " + std::to_string(n) + " points");
    }
    if (max_iters < 1) {
        throw ParameterError("iteration budget must be positive, got " + std::to_string(max_iters));
    }

    LloydResult res;
    res.centers = seed_centers(features, c, rng);
    res.assignments.assign(n, -1);
    std::vector<double> d2(n, 0.0);
    std::vector<int> prev;
    for (int it = 0; it < max_iters; ++it) {
        prev = res.assignments;
        const double inertia = assign_points(features, res.centers, res.assignments, d2);
        res.inertia_trace.push_back(inertia);
        if (res.assignments == prev) {
            res.converged = true;
            break;
        }
        update_centers(features, res.assignments, d2, res.centers);
    }
    return res;
}

PseudoLabeling kmeans(const Matrix& features, int c, int max_iters, std::uint64_t seed) {
    Rng rng(seed);
    LloydResult lloyd = lloyd_kmeans(features, c, max_iters, rng);

    // Repair during the final update can change assignments, so recompute the
    // distances once more against the settled centers.
    std::vector<double> d2(features.rows(), 0.0);
    PseudoLabeling out;
    out.assignments = std::move(lloyd.assignments);
    out.inertia = assign_points(features, lloyd.centers, out.assignments, d2);
    update_centers(features, out.assignments, d2, lloyd.centers);
    out.cluster_means = l2_normalize_rows(lloyd.centers);
    return out;
}

PseudoLabeling relabel_epoch(std::vector<NetworkPair>& pairs, const Matrix& inputs, int c, int max_iters,
                             std::uint64_t seed, int epoch) {
    if (pairs.empty()) {
        throw ParameterError("need at least one network pair");
    }
    if (inputs.rows() < 1) {
        throw SizeError("cannot relabel an empty dataset");
    }
    std::vector<Matrix> per_teacher;
    per_teacher.reserve(pairs.size());
    for (const auto& pair : pairs) {
        per_teacher.push_back(forward_features_cached(pair.teacher.encoder, inputs).features);
    }
    PseudoLabeling labeling = kmeans(average_teacher_features(per_teacher), c, max_iters, seed);
    labeling.epoch = epoch;
    for (auto& pair : pairs) {
        reinit_head(pair, labeling.cluster_means);
    }
    return labeling;
}

}  // namespace gcmt
