#include "gcmt/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gcmt/errors.hpp"

namespace gcmt {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul shape mismatch: " + a.shape_str() + " * " + b.shape_str());
    }
    Matrix out(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    }
    return out;
}

static void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + " shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    }
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Matrix scale(const Matrix& m, double s) {
    Matrix out = m;
    for (double& v : out.data()) v *= s;
    return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add_inplace");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

Matrix col_sums(const Matrix& m) {
    Matrix out(1, m.cols());
    for (int i = 0; i < m.rows(); ++i) {
        const double* row = m.row(i);
        for (int j = 0; j < m.cols(); ++j) out(0, j) += row[j];
    }
    return out;
}

Matrix row_softmax(const Matrix& m, double temperature) {
    if (!(temperature > 0.0)) {
        throw ParameterError("softmax temperature must be positive, got " + std::to_string(temperature));
    }
    Matrix out(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i) {
        const double* in = m.row(i);
        double* o = out.row(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < m.cols(); ++j) mx = std::max(mx, in[j] / temperature);
        double sum = 0.0;
        for (int j = 0; j < m.cols(); ++j) {
            o[j] = std::exp(in[j] / temperature - mx);
            sum += o[j];
        }
        for (int j = 0; j < m.cols(); ++j) o[j] /= sum;
    }
    return out;
}

Matrix l2_normalize_rows(const Matrix& m, std::vector<double>& norms_out) {
    Matrix out(m.rows(), m.cols());
    norms_out.assign(m.rows(), 0.0);
    for (int i = 0; i < m.rows(); ++i) {
        const double* in = m.row(i);
        double sq = 0.0;
        for (int j = 0; j < m.cols(); ++j) sq += in[j] * in[j];
        const double denom = std::max(std::sqrt(sq), kNormGuard);
        norms_out[i] = denom;
        double* o = out.row(i);
        for (int j = 0; j < m.cols(); ++j) o[j] = in[j] / denom;
    }
    return out;
}

Matrix l2_normalize_rows(const Matrix& m) {
    std::vector<double> norms;
    return l2_normalize_rows(m, norms);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double mx = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a.data()[i] - b.data()[i]));
    return mx;
}

double frobenius_norm(const Matrix& m) {
    double sq = 0.0;
    for (double v : m.data()) sq += v * v;
    return std::sqrt(sq);
}

double dot_rows(const Matrix& m, int i, int j) {
    const double* a = m.row(i);
    const double* b = m.row(j);
    double s = 0.0;
    for (int c = 0; c < m.cols(); ++c) s += a[c] * b[c];
    return s;
}

double dot_rows(const Matrix& a, int i, const Matrix& b, int j) {
    if (a.cols() != b.cols()) {
        throw DimensionError("row widths differ: " + a.shape_str() + " vs " + b.shape_str());
    }
    const double* x = a.row(i);
    const double* y = b.row(j);
    double s = 0.0;
    for (int c = 0; c < a.cols(); ++c) s += x[c] * y[c];
    return s;
}

}  // namespace gcmt
