#pragma once

#include <string>
#include <vector>

#include "gcmt/matrix.hpp"

namespace gcmt {

// One directed edge i -> neighbor with its weight.
struct SparseEdge {
    int neighbor = 0;
    double weight = 0.0;
};

// Per-row adjacency list. Edges are sorted by neighbor index and never
// reference the row itself.
struct SparseRowGraph {
    int size = 0;
    std::vector<std::vector<SparseEdge>> rows;
};

// Full batch similarity softmax: B×B weights with zero diagonal, rows summing
// to 1. Carries the features and temperature it was built from so the loss can
// push gradients back through the softmax to the features.
struct DenseRowStochastic {
    Matrix weights;
    Matrix features;
    double beta = 1.0;
};

// K-nearest-neighbor graph under dot-product similarity. Features must have
// unit rows; ties are broken toward the smaller index. k is clamped to B-1.
SparseRowGraph build_teacher_graph(const Matrix& features, int k);

// Softmax over each row's connected entries only; support is preserved.
SparseRowGraph normalize_teacher_graph(const SparseRowGraph& g);

// Entrywise average of normalized graphs. Support of each fused row is the
// union of the per-teacher supports; rows still sum to 1.
SparseRowGraph fuse_teacher_graphs(const std::vector<SparseRowGraph>& graphs);

// Softmax at temperature beta over each row's similarities to all other rows.
DenseRowStochastic build_student_graph(const Matrix& features, double beta);

// Text form, one line "i k weight" per edge sorted by (i, k).
std::string dump_graph(const SparseRowGraph& g);

}  // namespace gcmt
