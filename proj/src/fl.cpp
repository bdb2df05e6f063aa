#include "leadq/fl.hpp"

#include "leadq/errors.hpp"
#include "leadq/rng.hpp"

namespace leadq {

void incorporate_labels(ClientTrainState& client,
                        const std::vector<int>& dataset_indices,
                        const std::vector<int>& revealed_labels) {
  if (dataset_indices.size() != revealed_labels.size()) {
    throw DataError("incorporate_labels: index/label count mismatch");
  }
  for (size_t i = 0; i < dataset_indices.size(); ++i) {
    int idx = dataset_indices[i];
    if (client.has(idx)) continue;
    client.indices.push_back(idx);
    client.labels.push_back(revealed_labels[i]);
    client.index_set.insert(idx);
  }
  client.budget_used += static_cast<long>(dataset_indices.size());
}

LocalResult local_train(const ClientTrainState& client, const Dataset& data,
                        const MlpSpec& spec, const ParamVector& theta,
                        const RoundConfig& cfg, uint64_t seed, int round,
                        int iteration) {
  LocalResult out;
  out.grad = ParamVector(theta.layout());
  out.weight = static_cast<long>(client.size());
  if (client.indices.empty()) {
    out.skipped = true;
    return out;
  }
  if (cfg.local_epochs == 0) return out;

  ParamVector local = theta;
  DetRng rng = rng_for(seed, "batch_order", client.shuffle_salt,
                       static_cast<uint64_t>(round),
                       static_cast<uint64_t>(iteration));
  size_t n = client.indices.size();
  std::vector<int> order(n);
  std::vector<const double*> rows;
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    for (size_t start = 0; start < n; start += static_cast<size_t>(cfg.batch_size)) {
      size_t stop = std::min(n, start + static_cast<size_t>(cfg.batch_size));
      rows.clear();
      labels.clear();
      for (size_t i = start; i < stop; ++i) {
        size_t pos = static_cast<size_t>(order[i]);
        rows.push_back(data.features(static_cast<size_t>(client.indices[pos])));
        labels.push_back(client.labels[pos]);
      }
      ParamVector g = mlp_loss_grad(spec, local, rows, labels);
      local.add_scaled(g, -cfg.learning_rate);
    }
  }
  // Displacement-as-gradient: theta - eta*g reproduces the local endpoint.
  for (size_t i = 0; i < theta.size(); ++i) {
    out.grad.data()[i] =
        (theta.data()[i] - local.data()[i]) / cfg.learning_rate;
  }
  return out;
}

void aggregate_and_update(ParamVector& theta,
                          const std::vector<LocalResult>& results, double lr,
                          Aggregation agg) {
  if (results.empty()) return;
  long total = 0;
  for (size_t k = 0; k < results.size(); ++k) {
    if (results[k].grad.size() != theta.size()) {
      throw NumericError("aggregate: gradient length mismatch from client " +
                         std::to_string(k));
    }
    total += results[k].weight;
  }
  std::vector<ParamVector> grads;
  std::vector<double> weights;
  grads.reserve(results.size());
  for (const auto& r : results) {
    grads.push_back(r.grad);
    if (agg == Aggregation::weighted) {
      weights.push_back(total > 0 ? static_cast<double>(r.weight) /
                                        static_cast<double>(total)
                                  : 0.0);
    } else {
      weights.push_back(1.0);
    }
  }
  if (agg == Aggregation::weighted && total == 0) return;
  ParamVector sum = weighted_pairwise_sum(grads, weights);
  theta.add_scaled(sum, -lr);
}

bool run_training_round(
    GlobalModel& model, const std::vector<ClientTrainState>& clients,
    const Dataset& data, const RoundConfig& cfg, uint64_t seed, int round,
    const std::function<void(int, const ParamVector&)>& observer) {
  bool any = false;
  for (const auto& c : clients) any = any || !c.indices.empty();
  if (!any) return false;

  if (cfg.reset == ResetPolicy::random_reinit) {
    DetRng rng = rng_for(seed, "model_reinit", static_cast<uint64_t>(round));
    init_mlp(model.spec, model.params, rng);
  }
  for (int t = 0; t < cfg.iterations; ++t) {
    std::vector<LocalResult> results;
    results.reserve(clients.size());
    for (const auto& c : clients) {
      results.push_back(
          local_train(c, data, model.spec, model.params, cfg, seed, round, t));
    }
    aggregate_and_update(model.params, results, cfg.learning_rate,
                         cfg.aggregation);
    if (observer) observer(t, model.params);
  }
  model.round = round;
  return true;
}

}  // namespace leadq
