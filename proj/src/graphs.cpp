#include "gcmt/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "gcmt/errors.hpp"
#include "gcmt/numeric.hpp"

namespace gcmt {

SparseRowGraph build_teacher_graph(const Matrix& features, int k) {
    const int b = features.rows();
    if (b < 2) {
        throw SizeError("teacher graph needs at least 2 rows, got " + std::to_string(b));
    }
    if (k < 1) {
        throw ParameterError("neighbor count must be positive, got " + std::to_string(k));
    }
    k = std::min(k, b - 1);

    SparseRowGraph g;
    g.size = b;
    g.rows.resize(b);
    std::vector<double> sims(b);
    std::vector<int> order(b);
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j < b; ++j) {
            sims[j] = dot_rows(features, i, features, j);
        }
        std::iota(order.begin(), order.end(), 0);
        // Descending similarity, ties toward the smaller index; self excluded
        // by sorting it last.
        std::sort(order.begin(), order.end(), [&](int a, int c) {
            if (a == i) return false;
            if (c == i) return true;
            if (sims[a] != sims[c]) return sims[a] > sims[c];
            return a < c;
        });
        auto& edges = g.rows[i];
        edges.reserve(k);
        for (int r = 0; r < k; ++r) {
            edges.push_back({order[r], sims[order[r]]});
        }
        std::sort(edges.begin(), edges.end(),
                  [](const SparseEdge& a, const SparseEdge& c) { return a.neighbor < c.neighbor; });
    }
    return g;
}

SparseRowGraph normalize_teacher_graph(const SparseRowGraph& g) {
    SparseRowGraph out;
    out.size = g.size;
    out.rows.resize(g.rows.size());
    for (std::size_t i = 0; i < g.rows.size(); ++i) {
        const auto& edges = g.rows[i];
        if (edges.empty()) {
            throw StateError("cannot normalize an empty graph row " + std::to_string(i));
        }
        double mx = edges[0].weight;
        for (const auto& e : edges) mx = std::max(mx, e.weight);
        double sum = 0.0;
        auto& row = out.rows[i];
        row.reserve(edges.size());
        for (const auto& e : edges) {
            const double w = std::exp(e.weight - mx);
            row.push_back({e.neighbor, w});
            sum += w;
        }
        for (auto& e : row) e.weight /= sum;
    }
    return out;
}

SparseRowGraph fuse_teacher_graphs(const std::vector<SparseRowGraph>& graphs) {
    if (graphs.empty()) {
        throw ParameterError("fusion needs at least one graph");
    }
    const int b = graphs[0].size;
    for (const auto& g : graphs) {
        if (g.size != b) {
            throw DimensionError("graph sizes differ: " + std::to_string(b) + " vs " + std::to_string(g.size));
        }
    }
    const double inv_m = 1.0 / static_cast<double>(graphs.size());

    SparseRowGraph fused;
    fused.size = b;
    fused.rows.resize(b);
    std::vector<double> acc(b);
    std::vector<char> present(b);
    for (int i = 0; i < b; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        std::fill(present.begin(), present.end(), 0);
        for (const auto& g : graphs) {
            for (const auto& e : g.rows[i]) {
                acc[e.neighbor] += e.weight;
                present[e.neighbor] = 1;
            }
        }
        auto& row = fused.rows[i];
        for (int j = 0; j < b; ++j) {
            if (present[j]) row.push_back({j, acc[j] * inv_m});
        }
    }
    return fused;
}

DenseRowStochastic build_student_graph(const Matrix& features, double beta) {
    const int b = features.rows();
    if (b < 2) {
        throw SizeError("student graph needs at least 2 rows, got " + std::to_string(b));
    }
    if (beta <= 0.0) {
        throw ParameterError("temperature must be positive, got " + std::to_string(beta));
    }

    DenseRowStochastic g;
    g.weights = Matrix(b, b);
    g.features = features;
    g.beta = beta;
    std::vector<double> scaled(b);
    for (int i = 0; i < b; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < b; ++j) {
            if (j == i) continue;
            scaled[j] = dot_rows(features, i, features, j) / beta;
            mx = std::max(mx, scaled[j]);
        }
        double sum = 0.0;
        for (int j = 0; j < b; ++j) {
            if (j == i) continue;
            const double w = std::exp(scaled[j] - mx);
            g.weights(i, j) = w;
            sum += w;
        }
        for (int j = 0; j < b; ++j) {
            if (j != i) g.weights(i, j) /= sum;
        }
    }
    return g;
}

std::string dump_graph(const SparseRowGraph& g) {
    std::string out;
    char line[64];
    for (int i = 0; i < g.size; ++i) {
        for (const auto& e : g.rows[i]) {
            std::snprintf(line, sizeof(line), "%d %d %.9g\n", i, e.neighbor, e.weight);
            out += line;
        }
    }
    return out;
}

}  // namespace gcmt
