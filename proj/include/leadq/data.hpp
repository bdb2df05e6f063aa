#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace leadq {

// Row-major feature storage with integer class labels.
class Dataset {
 public:
  Dataset() = default;
  Dataset(int num_classes, int dim) : num_classes_(num_classes), dim_(dim) {}

  int num_classes() const { return num_classes_; }
  int dim() const { return dim_; }
  size_t size() const { return ys_.size(); }
  bool empty() const { return ys_.empty(); }

  const double* features(size_t i) const { return xs_.data() + i * dim_; }
  int label(size_t i) const { return ys_[i]; }

  void push(const double* f, int y);
  void reserve(size_t n);

 private:
  int num_classes_ = 0;
  int dim_ = 0;
  std::vector<double> xs_;
  std::vector<int> ys_;
};

// Isotropic Gaussian blobs: one seeded center per class in [-1,1]^dim,
// samples N(center, spread^2 I), whole dataset shuffled. The centers depend
// only on (seed), the draws also on tag, so train/test material from the same
// seed shares geometry without sharing samples.
Dataset make_synthetic_dataset(int n_classes, int dim, int per_class,
                               double spread, uint64_t seed,
                               std::string_view tag = "train");

// Per-class Dirichlet(alpha) proportions allocate samples to K clients;
// empty-client draws are retried up to 100 times before failing.
std::vector<std::vector<int>> partition_dirichlet(const Dataset& data, int k,
                                                  double alpha, uint64_t seed);

// Each client holds exactly `classes_per_client` distinct classes; every
// class lands on at least one client; each class's samples split evenly
// across its holders.
std::vector<std::vector<int>> partition_quantity(const Dataset& data, int k,
                                                 int classes_per_client,
                                                 uint64_t seed);

// Stratified split: per-class quotas by largest remainder, so the held-out
// histogram tracks the global one. Returns (rest, held).
std::pair<Dataset, Dataset> split_held_out(const Dataset& data, int held_size,
                                           uint64_t seed,
                                           std::string_view tag = "held");

// CSV (f0..fD-1,label rows with header) plus JSON manifest (dim, classes,
// count, seed) so external corpora can be swapped in.
void save_dataset_csv(const Dataset& data, const std::string& csv_path,
                      const std::string& manifest_path, uint64_t seed);
Dataset load_dataset_csv(const std::string& csv_path,
                         const std::string& manifest_path);

}  // namespace leadq
