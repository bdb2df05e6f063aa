#pragma once

#include <string>
#include <vector>

#include "leadq/rng.hpp"

namespace leadq {

enum class PolicyKind {
  random,
  uncertainty,
  coreset_local,
  coreset_global,
  warmup,
  leadq,
};

PolicyKind policy_from_string(const std::string& s);
std::string to_string(PolicyKind p);

// All selectors return exactly n_q arrival positions in [0, n_u), sorted
// ascending; every tie breaks toward the lowest index.

std::vector<int> query_random(int n_u, int n_q, DetRng& rng);

// probs: one softmax row per arrival. Picks the n_q least-confident
// arrivals, confidence being the row's max class probability.
std::vector<int> query_uncertainty(const std::vector<std::vector<double>>& probs,
                                   int n_q);

// Warm-up rule: same per-sample confidence scoring as query_uncertainty.
std::vector<int> query_warmup(const std::vector<std::vector<double>>& probs,
                              int n_q);

// Greedy farthest-first: each pick maximizes the minimum Euclidean distance
// to reference + already-picked points. An empty reference on the first pick
// falls back to index 0.
std::vector<int> query_coreset(const std::vector<const double*>& candidates,
                               const std::vector<const double*>& reference,
                               int dim, int n_q);

// Server-side variant over all clients' arrivals jointly, conditioned on the
// pooled labeled set, constrained to exactly n_q picks per client. Candidate
// order (and tie order) is client-major. With an empty pooled reference,
// each client's first arrival anchors distances without being selected.
std::vector<std::vector<int>> query_coreset_global(
    const std::vector<std::vector<const double*>>& candidates,
    const std::vector<const double*>& pooled_reference, int dim, int n_q);

}  // namespace leadq
