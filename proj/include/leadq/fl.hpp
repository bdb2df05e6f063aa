#pragma once

#include <cstdint>
#include <functional>
#include <unordered_set>
#include <vector>

#include "leadq/data.hpp"
#include "leadq/nn.hpp"

namespace leadq {

enum class ResetPolicy { keep_previous, random_reinit };
enum class Aggregation { weighted, unweighted };

struct RoundConfig {
  int iterations = 30;  // server aggregation steps per querying round
  double learning_rate = 0.01;
  int local_epochs = 1;
  int batch_size = 64;
  ResetPolicy reset = ResetPolicy::random_reinit;
  Aggregation aggregation = Aggregation::weighted;
};

// A client's accumulated labeled set. Labels arrive only through the oracle;
// insertion order is preserved so runs serialize deterministically.
struct ClientTrainState {
  int id = 0;
  // Separates the minibatch-shuffle streams of different clients; tests that
  // need clients to train identically point the salts at the same value.
  uint64_t shuffle_salt = 0;
  std::vector<int> indices;
  std::vector<int> labels;
  std::unordered_set<int> index_set;
  long budget_used = 0;

  size_t size() const { return indices.size(); }
  bool has(int dataset_index) const { return index_set.count(dataset_index); }
};

// Adds oracle-revealed samples; re-inserting a known sample is a no-op.
void incorporate_labels(ClientTrainState& client,
                        const std::vector<int>& dataset_indices,
                        const std::vector<int>& revealed_labels);

struct LocalResult {
  ParamVector grad;  // (theta - theta_after) / learning_rate
  long weight = 0;   // |labeled set|
  bool skipped = false;
};

// Multi-epoch minibatch SGD from theta on the client's labeled set,
// reported as an accumulated-gradient displacement.
LocalResult local_train(const ClientTrainState& client, const Dataset& data,
                        const MlpSpec& spec, const ParamVector& theta,
                        const RoundConfig& cfg, uint64_t seed, int round,
                        int iteration);

// theta <- theta - lr * sum_k w_k g_k. Weighted mode: w_k = |L_k|/|L|;
// unweighted mode: w_k = 1. Balanced-tree summation in client-index order
// keeps identical-client aggregation exact.
void aggregate_and_update(ParamVector& theta,
                          const std::vector<LocalResult>& results, double lr,
                          Aggregation agg);

struct GlobalModel {
  MlpSpec spec;
  ParamVector params;
  int round = 0;
};

// Reset policy, then `iterations` rounds of local_train + aggregation.
// Returns false (model untouched) when every client is empty. The observer,
// when set, sees theta after each server iteration.
bool run_training_round(
    GlobalModel& model, const std::vector<ClientTrainState>& clients,
    const Dataset& data, const RoundConfig& cfg, uint64_t seed, int round,
    const std::function<void(int, const ParamVector&)>& observer = {});

}  // namespace leadq
