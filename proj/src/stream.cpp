#include "leadq/stream.hpp"

#include "leadq/errors.hpp"
#include "leadq/rng.hpp"

namespace leadq {

LabelOracle::LabelOracle(const Dataset& train) {
  labels_.reserve(train.size());
  for (size_t i = 0; i < train.size(); ++i) labels_.push_back(train.label(i));
}

int LabelOracle::reveal(int round, int client, int dataset_index) {
  if (dataset_index < 0 ||
      dataset_index >= static_cast<int>(labels_.size())) {
    throw DataError("oracle: dataset index out of range");
  }
  if (revealed_.count(dataset_index)) {
    throw BudgetError("sample " + std::to_string(dataset_index) +
                      " already revealed");
  }
  int y = labels_[static_cast<size_t>(dataset_index)];
  log_.push_back(RevealRecord{round, client, dataset_index, y});
  revealed_[dataset_index] = y;
  return y;
}

bool LabelOracle::is_revealed(int dataset_index) const {
  return revealed_.count(dataset_index) > 0;
}

int LabelOracle::revealed_label(int dataset_index) const {
  auto it = revealed_.find(dataset_index);
  if (it == revealed_.end()) {
    throw AuditViolation("label of sample " + std::to_string(dataset_index) +
                         " read without a logged query");
  }
  return it->second;
}

void LabelOracle::restore(std::vector<RevealRecord> log) {
  revealed_.clear();
  for (const auto& r : log) revealed_[r.dataset_index] = r.label;
  log_ = std::move(log);
}

ClientStream::ClientStream(std::vector<int> order, int arrivals_per_round)
    : order_(std::move(order)), n_u_(arrivals_per_round) {
  if (n_u_ < 1) throw ConfigError("arrivals per round must be positive");
}

bool ClientStream::has_next_round() const {
  return cursor_ + static_cast<size_t>(n_u_) <= order_.size();
}

std::vector<int> ClientStream::next_arrivals() {
  if (!has_next_round()) throw DataError("stream exhausted");
  std::vector<int> out(order_.begin() + static_cast<long>(cursor_),
                       order_.begin() + static_cast<long>(cursor_) + n_u_);
  cursor_ += static_cast<size_t>(n_u_);
  return out;
}

void ClientStream::set_cursor(size_t c) {
  if (c > order_.size()) throw DataError("stream cursor out of range");
  cursor_ = c;
}

std::vector<ClientStream> make_streams(
    const std::vector<std::vector<int>>& shards, int arrivals_per_round,
    uint64_t seed) {
  std::vector<ClientStream> streams;
  streams.reserve(shards.size());
  for (size_t k = 0; k < shards.size(); ++k) {
    std::vector<int> order = shards[k];
    DetRng rng = rng_for(seed, "arrival_order", k);
    rng.shuffle(order);
    streams.emplace_back(std::move(order), arrivals_per_round);
  }
  return streams;
}

}  // namespace leadq
