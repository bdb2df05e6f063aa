#pragma once

#include <string>
#include <vector>

#include "leadq/config.hpp"
#include "leadq/metrics.hpp"

namespace leadq {

struct SeedRunResult {
  uint64_t seed = 0;
  std::vector<RoundRecord> records;
  int rounds_done = 0;
  // True when the run covered every configured round; false after a clean
  // early stop on stream exhaustion or run.stop_after_round.
  bool completed = false;
  bool stopped_on_request = false;
};

// Runs every configured seed, writing per-seed records, decision logs,
// checkpoints, and the cross-seed summary under cfg.out.
std::vector<SeedRunResult> run_experiment(const ExperimentConfig& cfg);

// Runs the full policy suite, one subdirectory of cfg.out per policy.
void run_sweep(const ExperimentConfig& cfg);

// Continues an interrupted experiment from out_dir/config_resolved.conf and
// the per-seed checkpoints. Finished seeds are left untouched.
std::vector<SeedRunResult> resume_experiment(const std::string& out_dir);

// Parses a records CSV written by run_experiment. Used when resuming.
std::vector<RoundRecord> read_records_csv(const std::string& path);

}  // namespace leadq
