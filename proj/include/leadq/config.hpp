#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leadq/fl.hpp"
#include "leadq/marl.hpp"
#include "leadq/policies.hpp"

namespace leadq {

// Full run description. Flat key=value text form; CLI flags override file
// values; defaults follow the reference hyperparameter tables where stated.
struct ExperimentConfig {
  std::string dataset_kind = "synthetic";  // synthetic | csv
  int dataset_classes = 8;
  int dataset_dim = 8;
  // Sized so default K/N_u/R leaves headroom: shards must cover N_u * R.
  int dataset_per_class = 2000;
  double dataset_spread = 0.35;
  std::string dataset_csv;
  std::string dataset_manifest;
  int test_size = 2000;
  int heldout_size = 200;

  std::string partition_kind = "dirichlet";  // dirichlet | quantity
  double alpha = 0.5;
  int classes_per_client = 2;

  int clients = 10;            // K
  int arrivals_per_round = 10; // N_u
  int query_budget = 1;        // N_q
  int rounds = 100;            // R

  RoundConfig fl;

  std::vector<int> model_hidden = {32};
  Activation model_activation = Activation::relu;

  PolicyKind policy = PolicyKind::random;
  std::vector<uint64_t> seeds = {1};
  std::string out_dir = "out";
  int checkpoint_every = 0;    // extra periodic checkpoints; 0 = final only
  int stop_after_round = 0;    // checkpoint and exit after this round; 0 = off

  MarlConfig marl;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Sets one flat key; unknown keys or unparsable values raise ConfigError
// naming the key.
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

// Emits every key in sorted order; parse(serialize(cfg)) reproduces cfg.
std::string serialize_config(const ExperimentConfig& cfg);

// Raises ConfigError naming the first invalid field.
void validate_config(const ExperimentConfig& cfg);

}  // namespace leadq
