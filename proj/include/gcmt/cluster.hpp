#pragma once

#include <cstdint>
#include <vector>

#include "gcmt/matrix.hpp"
#include "gcmt/model.hpp"
#include "gcmt/rng.hpp"

namespace gcmt {

// Epoch-level clustering output: a pseudo label per sample plus the unit-norm
// cluster means used to re-seed classifier heads.
struct PseudoLabeling {
    std::vector<int> assignments;
    Matrix cluster_means;
    double inertia = 0.0;
    int epoch = 0;
};

// Raw Lloyd output. Centers are plain member means, kept unnormalized so the
// fixpoint property (assignments stable implies centers stable) holds exactly.
struct LloydResult {
    std::vector<int> assignments;
    Matrix centers;
    std::vector<double> inertia_trace;
    bool converged = false;
};

// Mean over teachers followed by L2 row renormalization.
Matrix average_teacher_features(const std::vector<Matrix>& per_teacher);

// K-means++ seeding then Lloyd iterations until assignment fixpoint or
// max_iters. Empty clusters are repaired by stealing the point farthest from
// its assigned center. Ties always resolve to the lower index.
LloydResult lloyd_kmeans(const Matrix& features, int c, int max_iters, Rng& rng);

PseudoLabeling kmeans(const Matrix& features, int c, int max_iters, std::uint64_t seed);

// Full relabeling step: teacher features over all inputs (no augmentation),
// averaged, clustered, then every pair's heads re-seeded from the means.
PseudoLabeling relabel_epoch(std::vector<NetworkPair>& pairs, const Matrix& inputs, int c, int max_iters,
                             std::uint64_t seed, int epoch);

}  // namespace gcmt
