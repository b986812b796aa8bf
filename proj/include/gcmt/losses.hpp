#pragma once

#include <vector>

#include "gcmt/graphs.hpp"
#include "gcmt/matrix.hpp"

namespace gcmt {

// Probabilities below this are clamped before any log.
inline constexpr double kLogClamp = 1e-12;

struct CeResult {
    double value = 0.0;
    Matrix dlogits;
};

struct MceResult {
    double value = 0.0;
    std::vector<Matrix> dlogits;  // one B×C gradient per student
};

struct GccResult {
    double value = 0.0;
    std::vector<Matrix> dfeatures;   // one B×d gradient per student
    std::vector<Matrix> edge_grads;  // dL/dw per student, zero off the fused support
};

struct LossReport {
    double l_ce = 0.0;
    double l_mce = 0.0;
    double l_gcc = 0.0;
    double l_total = 0.0;
    double lambda_gcc = 0.0;
};

// Pseudo-label cross entropy with mean reduction over the batch.
CeResult ce_loss(const Matrix& probabilities, const std::vector<int>& labels);

// Cross entropy of each student's predictions against the averaged teacher
// distribution. Teacher terms are constants.
MceResult mce_loss(const std::vector<Matrix>& student_probs, const std::vector<Matrix>& teacher_probs);

// Graph consistency: fused teacher weights supervise every student graph.
// Gradients flow through the student softmax back to the features.
GccResult gcc_loss(const std::vector<DenseRowStochastic>& student_graphs, const SparseRowGraph& fused, int k);

LossReport total_loss(double l_ce, double l_mce, double l_gcc, double lambda_gcc);

}  // namespace gcmt
