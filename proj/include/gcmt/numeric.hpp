#pragma once

#include "gcmt/matrix.hpp"

namespace gcmt {

// Standard matrix product. Throws DimensionError naming both shapes when the
// inner dimensions disagree.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
void add_inplace(Matrix& a, const Matrix& b);

// 1xC column sums.
Matrix col_sums(const Matrix& m);

// Per-row softmax of m / temperature with row-max subtraction. temperature
// must be positive.
Matrix row_softmax(const Matrix& m, double temperature);

// Each row divided by max(||row||, 1e-12). Zero rows pass through unchanged
// up to the guard.
Matrix l2_normalize_rows(const Matrix& m);

// Same, also reporting the clamped per-row denominators (needed by the
// normalization backward pass).
Matrix l2_normalize_rows(const Matrix& m, std::vector<double>& norms_out);

// Denominator guard shared by l2_normalize_rows and its gradient.
inline constexpr double kNormGuard = 1e-12;

double max_abs_diff(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);
double dot_rows(const Matrix& m, int i, int j);
double dot_rows(const Matrix& a, int i, const Matrix& b, int j);

}  // namespace gcmt
