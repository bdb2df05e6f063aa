#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "leadq/data.hpp"

namespace leadq {

struct RevealRecord {
  int round = 0;
  int client = 0;
  int dataset_index = 0;
  int label = 0;
};

// Sole gate between arrivals and their labels. Every reveal is logged, so the
// log length is the exact labeling budget spent; reading a label that was
// never revealed is an audit violation.
class LabelOracle {
 public:
  explicit LabelOracle(const Dataset& train);

  int reveal(int round, int client, int dataset_index);
  bool is_revealed(int dataset_index) const;
  // Label of an already-revealed sample; throws AuditViolation otherwise.
  int revealed_label(int dataset_index) const;

  const std::vector<RevealRecord>& log() const { return log_; }
  size_t total_reveals() const { return log_.size(); }

  // Checkpoint restore: replaces the log and the revealed map.
  void restore(std::vector<RevealRecord> log);

 private:
  std::vector<int> labels_;
  std::vector<RevealRecord> log_;
  std::unordered_map<int, int> revealed_;
};

// Per-client arrival sequence over training-set indices; labels stay behind
// the oracle. Rounds yield exactly arrivals_per_round samples; a final
// partial window is never served.
class ClientStream {
 public:
  ClientStream(std::vector<int> order, int arrivals_per_round);

  bool has_next_round() const;
  std::vector<int> next_arrivals();

  size_t cursor() const { return cursor_; }
  void set_cursor(size_t c);
  int arrivals_per_round() const { return n_u_; }
  const std::vector<int>& order() const { return order_; }

 private:
  std::vector<int> order_;
  int n_u_ = 0;
  size_t cursor_ = 0;
};

// Builds one stream per shard; arrival order is a seeded shuffle of the
// shard.
std::vector<ClientStream> make_streams(
    const std::vector<std::vector<int>>& shards, int arrivals_per_round,
    uint64_t seed);

}  // namespace leadq
