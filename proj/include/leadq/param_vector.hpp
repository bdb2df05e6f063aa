#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace leadq {

// One named block of parameters inside a flat vector.
struct Segment {
  std::string name;
  size_t offset = 0;
  int rows = 0;
  int cols = 0;

  size_t size() const { return static_cast<size_t>(rows) * cols; }
};

// Immutable-after-construction description of a parameter vector's blocks.
// Shared between a model's parameters, its gradients, and optimizer moments
// so copies and arithmetic never disagree about shapes.
class ParamLayout {
 public:
  void add(const std::string& name, int rows, int cols);
  const Segment& segment(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<Segment>& segments() const { return segments_; }
  size_t total_size() const { return total_; }

 private:
  std::vector<Segment> segments_;
  std::unordered_map<std::string, size_t> index_;
  size_t total_ = 0;
};

using LayoutPtr = std::shared_ptr<const ParamLayout>;

// Flat vector of 64-bit reals with named segments.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(LayoutPtr layout);

  const LayoutPtr& layout() const { return layout_; }
  size_t size() const { return data_.size(); }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double* seg(const std::string& name);
  const double* seg(const std::string& name) const;

  void zero();
  void scale(double s);
  // this += s * other; layouts must match.
  void add_scaled(const ParamVector& other, double s);
  double dot(const ParamVector& other) const;

  // Name of the first segment containing a non-finite value, or "" if clean.
  std::string first_nonfinite_segment() const;

 private:
  LayoutPtr layout_;
  std::vector<double> data_;
};

// Deterministic reduction of w[i]*v[i] by balanced binary tree over index
// order. Equal inputs with power-of-two weights sum without rounding, which
// the degenerate-aggregation contract relies on.
ParamVector weighted_pairwise_sum(const std::vector<ParamVector>& vs,
                                  const std::vector<double>& ws);

}  // namespace leadq
