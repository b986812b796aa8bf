#include "gcmt/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "gcmt/errors.hpp"
#include "gcmt/numeric.hpp"

namespace gcmt {

namespace {

void check_set(const RetrievalSet& s, const char* name) {
    const std::size_t n = static_cast<std::size_t>(s.features.rows());
    if (s.identities.size() != n || s.cameras.size() != n) {
        throw DimensionError(std::string(name) + " has " + std::to_string(n) + " feature rows but " +
                             std::to_string(s.identities.size()) + " identities and " +
                             std::to_string(s.cameras.size()) + " cameras");
    }
}

}  // namespace

EvalResult evaluate(const RetrievalSet& query, const RetrievalSet& gallery) {
    check_set(query, "query set");
    check_set(gallery, "gallery set");
    if (query.features.rows() < 1 || gallery.features.rows() < 1) {
        throw EvalError("evaluation needs non-empty query and gallery sets");
    }
    if (query.features.cols() != gallery.features.cols()) {
        throw DimensionError("query features are " + query.features.shape_str() + ", gallery " +
                             gallery.features.shape_str());
    }

    const int ng = gallery.features.rows();
    EvalResult res;
    res.cmc.assign(ng, 0.0);
    std::vector<double> cmc_hits(ng, 0.0);
    double ap_sum = 0.0;

    std::vector<int> valid;
    std::vector<double> sims;
    std::vector<int> order;
    for (int q = 0; q < query.features.rows(); ++q) {
        valid.clear();
        int relevant_total = 0;
        for (int g = 0; g < ng; ++g) {
            const bool same_id = gallery.identities[g] == query.identities[q];
            if (same_id && gallery.cameras[g] == query.cameras[q]) continue;
            valid.push_back(g);
            if (same_id) ++relevant_total;
        }
        if (relevant_total == 0) {
            ++res.excluded;
            continue;
        }

        sims.resize(valid.size());
        for (std::size_t v = 0; v < valid.size(); ++v) {
            sims[v] = dot_rows(query.features, q, gallery.features, valid[v]);
        }
        order.resize(valid.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (sims[a] != sims[b]) return sims[a] > sims[b];
            return valid[a] < valid[b];
        });

        int seen = 0;
        double ap = 0.0;
        int first_hit = -1;
        for (std::size_t r = 0; r < order.size(); ++r) {
            if (gallery.identities[valid[order[r]]] != query.identities[q]) continue;
            ++seen;
            ap += static_cast<double>(seen) / static_cast<double>(r + 1);
            if (first_hit < 0) first_hit = static_cast<int>(r);
            if (seen == relevant_total) break;
        }
        ap_sum += ap / relevant_total;
        cmc_hits[first_hit] += 1.0;
        ++res.query_count;
    }

    if (res.query_count == 0) {
        throw EvalError("no query had a valid relevant gallery item");
    }
    res.map = ap_sum / res.query_count;
    double running = 0.0;
    for (int k = 0; k < ng; ++k) {
        running += cmc_hits[k];
        res.cmc[k] = running / res.query_count;
    }
    return res;
}

EvalResult brute_force_oracle(const RetrievalSet& query, const RetrievalSet& gallery) {
    check_set(query, "query set");
    check_set(gallery, "gallery set");
    if (query.features.rows() < 1 || gallery.features.rows() < 1) {
        throw EvalError("evaluation needs non-empty query and gallery sets");
    }
    if (query.features.cols() != gallery.features.cols()) {
        throw DimensionError("query features are " + query.features.shape_str() + ", gallery " +
                             gallery.features.shape_str());
    }

    const int ng = gallery.features.rows();
    const int dim = gallery.features.cols();
    EvalResult res;
    res.cmc.assign(ng, 0.0);
    double ap_sum = 0.0;
    std::vector<int> first_hit_rank;

    for (int q = 0; q < query.features.rows(); ++q) {
        // Keep gallery items that survive the same-identity same-camera drop.
        std::vector<int> kept;
        for (int g = 0; g < ng; ++g) {
            if (gallery.identities[g] == query.identities[q] && gallery.cameras[g] == query.cameras[q]) {
                continue;
            }
            kept.push_back(g);
        }
        std::vector<double> sim(kept.size(), 0.0);
        for (std::size_t a = 0; a < kept.size(); ++a) {
            for (int d = 0; d < dim; ++d) {
                sim[a] += query.features(q, d) * gallery.features(kept[a], d);
            }
        }

        // Rank of each kept item = 1 + number of items strictly ahead of it,
        // where ties put the smaller gallery index ahead.
        std::vector<int> rank(kept.size(), 1);
        for (std::size_t a = 0; a < kept.size(); ++a) {
            for (std::size_t b = 0; b < kept.size(); ++b) {
                if (b == a) continue;
                if (sim[b] > sim[a] || (sim[b] == sim[a] && kept[b] < kept[a])) {
                    ++rank[a];
                }
            }
        }

        // Walk rank values in ascending order; summing AP terms in rank order
        // keeps the accumulation independent of gallery layout.
        bool any_relevant = false;
        int best_rank = ng + 1;
        double ap = 0.0;
        int relevant_count = 0;
        for (std::size_t r = 1; r <= kept.size(); ++r) {
            std::size_t at = kept.size();
            for (std::size_t a = 0; a < kept.size(); ++a) {
                if (rank[a] == static_cast<int>(r)) {
                    at = a;
                    break;
                }
            }
            if (at == kept.size() || gallery.identities[kept[at]] != query.identities[q]) continue;
            any_relevant = true;
            ++relevant_count;
            best_rank = std::min(best_rank, rank[at]);
            int relevant_at_or_before = 0;
            for (std::size_t b = 0; b < kept.size(); ++b) {
                if (gallery.identities[kept[b]] == query.identities[q] && rank[b] <= rank[at]) {
                    ++relevant_at_or_before;
                }
            }
            ap += static_cast<double>(relevant_at_or_before) / rank[at];
        }
        if (!any_relevant) {
            ++res.excluded;
            continue;
        }
        ap_sum += ap / relevant_count;
        first_hit_rank.push_back(best_rank);
        ++res.query_count;
    }

    if (res.query_count == 0) {
        throw EvalError("no query had a valid relevant gallery item");
    }
    res.map = ap_sum / res.query_count;
    for (int k = 0; k < ng; ++k) {
        int matched = 0;
        for (int r : first_hit_rank) {
            if (r <= k + 1) ++matched;
        }
        res.cmc[k] = static_cast<double>(matched) / res.query_count;
    }
    return res;
}

std::string format_eval_result(const EvalResult& r) {
    std::string out;
    char line[64];
    std::snprintf(line, sizeof(line), "map %.6f\n", r.map);
    out += line;
    const int top = std::min<int>(10, static_cast<int>(r.cmc.size()));
    for (int k = 0; k < top; ++k) {
        std::snprintf(line, sizeof(line), "cmc%d %.6f\n", k, r.cmc[k]);
        out += line;
    }
    std::snprintf(line, sizeof(line), "queries %d\n", r.query_count);
    out += line;
    std::snprintf(line, sizeof(line), "excluded %d\n", r.excluded);
    out += line;
    return out;
}

}  // namespace gcmt
