#pragma once

#include <string>
#include <vector>

#include "gcmt/matrix.hpp"

namespace gcmt {

// One side of a retrieval problem: unit-norm features with aligned identity
// and camera ids.
struct RetrievalSet {
    Matrix features;
    std::vector<int> identities;
    std::vector<int> cameras;
};

struct EvalResult {
    double map = 0.0;
    std::vector<double> cmc;  // cmc[k] = fraction matched within top k+1
    int query_count = 0;
    int excluded = 0;  // queries with no valid relevant gallery item
};

// Ranks gallery by descending dot product per query, drops gallery entries
// sharing both identity and camera with the query, then accumulates AP and
// CMC. Ties rank the lower gallery index first.
EvalResult evaluate(const RetrievalSet& query, const RetrievalSet& gallery);

// Same contract, written as a per-item rank recount with no sorting and no
// code shared with evaluate.
EvalResult brute_force_oracle(const RetrievalSet& query, const RetrievalSet& gallery);

// Text block: map then cmc0..cmc9 at 6 decimals, then query bookkeeping.
std::string format_eval_result(const EvalResult& r);

}  // namespace gcmt
