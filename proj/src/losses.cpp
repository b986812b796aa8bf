#include "gcmt/losses.hpp"

#include <cmath>

#include "gcmt/errors.hpp"
#include "gcmt/numeric.hpp"

namespace gcmt {

namespace {

double clamped_log(double p) { return std::log(p < kLogClamp ? kLogClamp : p); }

}  // namespace

CeResult ce_loss(const Matrix& probabilities, const std::vector<int>& labels) {
    const int b = probabilities.rows();
    const int c = probabilities.cols();
    if (static_cast<int>(labels.size()) != b) {
        throw DimensionError("label count " + std::to_string(labels.size()) + " does not match batch size " +
                             std::to_string(b));
    }
    CeResult res;
    res.dlogits = Matrix(b, c);
    const double inv_b = 1.0 / b;
    for (int i = 0; i < b; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= c) {
            throw IndexError("label " + std::to_string(y) + " outside [0, " + std::to_string(c) + ") at row " +
                             std::to_string(i));
        }
        res.value -= clamped_log(probabilities(i, y));
        for (int j = 0; j < c; ++j) {
            res.dlogits(i, j) = probabilities(i, j) * inv_b;
        }
        res.dlogits(i, y) -= inv_b;
    }
    res.value *= inv_b;
    return res;
}

MceResult mce_loss(const std::vector<Matrix>& student_probs, const std::vector<Matrix>& teacher_probs) {
    const std::size_t m = student_probs.size();
    if (m == 0 || teacher_probs.size() != m) {
        throw DimensionError("need matching non-empty student and teacher lists, got " + std::to_string(m) +
                             " and " + std::to_string(teacher_probs.size()));
    }
    const Matrix& first = student_probs[0];
    for (const auto& p : student_probs) {
        if (!p.same_shape(first)) throw DimensionError("student probability shapes differ");
    }
    for (const auto& p : teacher_probs) {
        if (!p.same_shape(first)) throw DimensionError("teacher probability shape differs from student");
    }
    const int b = first.rows();
    const int c = first.cols();

    Matrix mean_teacher(b, c);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (const auto& p : teacher_probs) {
        for (std::size_t t = 0; t < p.size(); ++t) {
            mean_teacher.data()[t] += p.data()[t] * inv_m;
        }
    }

    MceResult res;
    const double inv_b = 1.0 / b;
    for (std::size_t j = 0; j < m; ++j) {
        const Matrix& p = student_probs[j];
        Matrix grad(b, c);
        for (int i = 0; i < b; ++i) {
            for (int t = 0; t < c; ++t) {
                res.value -= mean_teacher(i, t) * clamped_log(p(i, t));
                grad(i, t) = (p(i, t) - mean_teacher(i, t)) * inv_b;
            }
        }
        res.dlogits.push_back(std::move(grad));
    }
    res.value *= inv_b;
    return res;
}

GccResult gcc_loss(const std::vector<DenseRowStochastic>& student_graphs, const SparseRowGraph& fused, int k) {
    if (student_graphs.empty()) {
        throw DimensionError("need at least one student graph");
    }
    if (k < 1) {
        throw ParameterError("neighbor count must be positive, got " + std::to_string(k));
    }
    const int b = fused.size;
    for (const auto& g : student_graphs) {
        if (g.weights.rows() != b || g.weights.cols() != b) {
            throw DimensionError("student graph is " + g.weights.shape_str() + " but fused graph has size " +
                                 std::to_string(b));
        }
    }

    GccResult res;
    const double scale = 1.0 / (static_cast<double>(b) * k);
    for (const auto& g : student_graphs) {
        // Stage one: gradient at each student edge weight. Clamped logs are
        // flat, so their edges contribute nothing.
        Matrix edge_grad(b, b);
        for (int i = 0; i < b; ++i) {
            for (const auto& e : fused.rows[i]) {
                const double w = g.weights(i, e.neighbor);
                res.value -= e.weight * clamped_log(w);
                if (w >= kLogClamp) {
                    edge_grad(i, e.neighbor) = -e.weight * scale / w;
                }
            }
        }

        // Stage two: through the row softmax, then to the features. With
        // A = dS/beta, dF = (A + At)F since s_ik = f_i . f_k.
        Matrix dscaled(b, b);
        for (int i = 0; i < b; ++i) {
            double inner = 0.0;
            for (int l = 0; l < b; ++l) {
                inner += edge_grad(i, l) * g.weights(i, l);
            }
            for (int l = 0; l < b; ++l) {
                if (l != i) dscaled(i, l) = g.weights(i, l) * (edge_grad(i, l) - inner);
            }
        }
        const double inv_beta = 1.0 / g.beta;
        Matrix sym(b, b);
        for (int i = 0; i < b; ++i) {
            for (int l = 0; l < b; ++l) {
                sym(i, l) = (dscaled(i, l) + dscaled(l, i)) * inv_beta;
            }
        }
        res.dfeatures.push_back(matmul(sym, g.features));
        res.edge_grads.push_back(std::move(edge_grad));
    }
    res.value *= scale;
    return res;
}

LossReport total_loss(double l_ce, double l_mce, double l_gcc, double lambda_gcc) {
    LossReport r;
    r.l_ce = l_ce;
    r.l_mce = l_mce;
    r.l_gcc = l_gcc;
    r.lambda_gcc = lambda_gcc;
    r.l_total = l_ce + l_mce + lambda_gcc * l_gcc;
    if (!std::isfinite(r.l_total)) {
        throw NumericError("loss is not finite: ce=" + std::to_string(l_ce) + " mce=" + std::to_string(l_mce) +
                           " gcc=" + std::to_string(l_gcc));
    }
    return r;
}

}  // namespace gcmt
