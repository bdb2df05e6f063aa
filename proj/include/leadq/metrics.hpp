#pragma once

#include <string>
#include <vector>

#include "leadq/data.hpp"
#include "leadq/nn.hpp"
#include "leadq/stream.hpp"

namespace leadq {

// Fraction of samples whose argmax logit matches the label; argmax ties go
// to the lowest class index.
double accuracy(const MlpSpec& spec, const ParamVector& params,
                const Dataset& data);

// KL(P||Q) in nats after additive smoothing and renormalization of both
// inputs. Inputs are nonnegative weight vectors (counts or proportions).
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q,
                     double eps_smooth = 1e-6);

// Normalized histogram of oracle-revealed labels; any unrevealed index
// trips the oracle's audit.
std::vector<double> label_histogram(const LabelOracle& oracle,
                                    const std::vector<int>& indices,
                                    int n_classes);

// Normalized label proportions of a dataset (the querying target).
std::vector<double> dataset_label_histogram(const Dataset& data);

struct RoundRecord {
  int round = 0;
  std::string policy;
  double test_accuracy = 0.0;
  double heldout_accuracy = 0.0;
  double reward = 0.0;
  double kl_round = 0.0;
  double kl_cumulative = 0.0;
  long labels_total = 0;
  // Wall-clock lives only in the JSONL emission; the CSV stays byte-stable
  // across reruns.
  double wall_ms = 0.0;
};

std::string fmt_double(double v);  // %.17g, round-trip exact
std::string records_csv_header();
std::string record_csv_row(const RoundRecord& r);
std::string record_jsonl_row(const RoundRecord& r);

// Per-round mean/std (sample std, 0 for a single seed) across seeds.
std::string summary_csv(const std::vector<std::vector<RoundRecord>>& per_seed);

}  // namespace leadq
