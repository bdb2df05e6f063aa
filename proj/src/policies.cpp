#include "leadq/policies.hpp"

#include <algorithm>
#include <limits>

#include "leadq/errors.hpp"

namespace leadq {

PolicyKind policy_from_string(const std::string& s) {
  if (s == "random") return PolicyKind::random;
  if (s == "uncertainty") return PolicyKind::uncertainty;
  if (s == "coreset-local" || s == "coreset_local") {
    return PolicyKind::coreset_local;
  }
  if (s == "coreset-global" || s == "coreset_global") {
    return PolicyKind::coreset_global;
  }
  if (s == "warmup") return PolicyKind::warmup;
  if (s == "leadq") return PolicyKind::leadq;
  throw ConfigError("unknown policy '" + s + "'");
}

std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::random: return "random";
    case PolicyKind::uncertainty: return "uncertainty";
    case PolicyKind::coreset_local: return "coreset-local";
    case PolicyKind::coreset_global: return "coreset-global";
    case PolicyKind::warmup: return "warmup";
    default: return "leadq";
  }
}

namespace {

void check_budget(size_t n_u, int n_q) {
  if (n_q < 0 || static_cast<size_t>(n_q) > n_u) {
    throw BudgetError("query budget " + std::to_string(n_q) +
                      " outside pool of " + std::to_string(n_u));
  }
}

// n_q positions with the smallest scores; score ties keep the lower index.
std::vector<int> lowest_score_positions(const std::vector<double>& scores,
                                        int n_q) {
  std::vector<int> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double sa = scores[static_cast<size_t>(a)];
    double sb = scores[static_cast<size_t>(b)];
    if (sa != sb) return sa < sb;
    return a < b;
  });
  std::vector<int> out(order.begin(), order.begin() + n_q);
  std::sort(out.begin(), out.end());
  return out;
}

double dist2(const double* a, const double* b, int dim) {
  double acc = 0.0;
  for (int j = 0; j < dim; ++j) {
    double d = a[j] - b[j];
    acc += d * d;
  }
  return acc;
}

}  // namespace

std::vector<int> query_random(int n_u, int n_q, DetRng& rng) {
  check_budget(static_cast<size_t>(n_u), n_q);
  std::vector<int> picks = rng.sample_without_replacement(n_u, n_q);
  std::sort(picks.begin(), picks.end());
  return picks;
}

std::vector<int> query_uncertainty(const std::vector<std::vector<double>>& probs,
                                   int n_q) {
  check_budget(probs.size(), n_q);
  std::vector<double> confidence(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) {
    confidence[i] = *std::max_element(probs[i].begin(), probs[i].end());
  }
  return lowest_score_positions(confidence, n_q);
}

std::vector<int> query_warmup(const std::vector<std::vector<double>>& probs,
                              int n_q) {
  return query_uncertainty(probs, n_q);
}

std::vector<int> query_coreset(const std::vector<const double*>& candidates,
                               const std::vector<const double*>& reference,
                               int dim, int n_q) {
  check_budget(candidates.size(), n_q);
  size_t n = candidates.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> min_d2(n, kInf);
  std::vector<char> picked(n, 0);
  for (size_t i = 0; i < n; ++i) {
    for (const double* r : reference) {
      min_d2[i] = std::min(min_d2[i], dist2(candidates[i], r, dim));
    }
  }
  std::vector<int> selected;
  for (int t = 0; t < n_q; ++t) {
    int best = -1;
    if (reference.empty() && selected.empty()) {
      best = 0;  // cold start: no anchor yet, take the first arrival
    } else {
      double best_d = -1.0;
      for (size_t i = 0; i < n; ++i) {
        if (picked[i]) continue;
        if (min_d2[i] > best_d) {
          best_d = min_d2[i];
          best = static_cast<int>(i);
        }
      }
    }
    picked[static_cast<size_t>(best)] = 1;
    selected.push_back(best);
    for (size_t i = 0; i < n; ++i) {
      if (!picked[i]) {
        min_d2[i] = std::min(
            min_d2[i], dist2(candidates[i], candidates[static_cast<size_t>(best)], dim));
      }
    }
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

std::vector<std::vector<int>> query_coreset_global(
    const std::vector<std::vector<const double*>>& candidates,
    const std::vector<const double*>& pooled_reference, int dim, int n_q) {
  size_t k = candidates.size();
  std::vector<const double*> flat;
  std::vector<int> owner;
  for (size_t c = 0; c < k; ++c) {
    check_budget(candidates[c].size(), n_q);
    for (const double* p : candidates[c]) {
      flat.push_back(p);
      owner.push_back(static_cast<int>(c));
    }
  }
  std::vector<const double*> anchors = pooled_reference;
  if (anchors.empty()) {
    // Cold start: each client's first arrival anchors distances only.
    for (size_t c = 0; c < k; ++c) anchors.push_back(candidates[c][0]);
  }
  size_t n = flat.size();
  std::vector<double> min_d2(n);
  std::vector<char> picked(n, 0);
  for (size_t i = 0; i < n; ++i) {
    double d = std::numeric_limits<double>::infinity();
    for (const double* r : anchors) d = std::min(d, dist2(flat[i], r, dim));
    min_d2[i] = d;
  }
  std::vector<int> quota(k, n_q);
  std::vector<std::vector<int>> out(k);
  size_t remaining = k * static_cast<size_t>(n_q);
  while (remaining > 0) {
    int best = -1;
    double best_d = -1.0;
    for (size_t i = 0; i < n; ++i) {
      if (picked[i] || quota[static_cast<size_t>(owner[i])] == 0) continue;
      if (min_d2[i] > best_d) {
        best_d = min_d2[i];
        best = static_cast<int>(i);
      }
    }
    picked[static_cast<size_t>(best)] = 1;
    int c = owner[static_cast<size_t>(best)];
    quota[static_cast<size_t>(c)] -= 1;
    // Positions are client-local: strip the client-major offset.
    size_t offset = 0;
    for (int cc = 0; cc < c; ++cc) offset += candidates[static_cast<size_t>(cc)].size();
    out[static_cast<size_t>(c)].push_back(best - static_cast<int>(offset));
    for (size_t i = 0; i < n; ++i) {
      if (!picked[i]) {
        min_d2[i] = std::min(min_d2[i],
                             dist2(flat[i], flat[static_cast<size_t>(best)], dim));
      }
    }
    --remaining;
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

}  // namespace leadq
