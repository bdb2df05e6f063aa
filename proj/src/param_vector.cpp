#include "leadq/param_vector.hpp"

#include <cmath>
#include <stdexcept>

#include "leadq/errors.hpp"

namespace leadq {

void ParamLayout::add(const std::string& name, int rows, int cols) {
  if (rows < 1 || cols < 1) {
    throw ConfigError("segment '" + name + "' has non-positive shape");
  }
  if (index_.count(name)) {
    throw ConfigError("duplicate segment '" + name + "'");
  }
  index_[name] = segments_.size();
  segments_.push_back(Segment{name, total_, rows, cols});
  total_ += static_cast<size_t>(rows) * cols;
}

const Segment& ParamLayout::segment(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ConfigError("unknown segment '" + name + "'");
  }
  return segments_[it->second];
}

bool ParamLayout::has(const std::string& name) const {
  return index_.count(name) > 0;
}

ParamVector::ParamVector(LayoutPtr layout)
    : layout_(std::move(layout)), data_(layout_->total_size(), 0.0) {}

double* ParamVector::seg(const std::string& name) {
  return data_.data() + layout_->segment(name).offset;
}

const double* ParamVector::seg(const std::string& name) const {
  return data_.data() + layout_->segment(name).offset;
}

void ParamVector::zero() {
  for (auto& v : data_) v = 0.0;
}

void ParamVector::scale(double s) {
  for (auto& v : data_) v *= s;
}

void ParamVector::add_scaled(const ParamVector& other, double s) {
  if (other.size() != size()) {
    throw NumericError("add_scaled: length mismatch");
  }
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
}

double ParamVector::dot(const ParamVector& other) const {
  if (other.size() != size()) {
    throw NumericError("dot: length mismatch");
  }
  double acc = 0.0;
  for (size_t i = 0; i < data_.size(); ++i) acc += data_[i] * other.data_[i];
  return acc;
}

std::string ParamVector::first_nonfinite_segment() const {
  if (!layout_) return "";
  for (const auto& s : layout_->segments()) {
    for (size_t i = 0; i < s.size(); ++i) {
      if (!std::isfinite(data_[s.offset + i])) return s.name;
    }
  }
  return "";
}

ParamVector weighted_pairwise_sum(const std::vector<ParamVector>& vs,
                                  const std::vector<double>& ws) {
  if (vs.empty() || vs.size() != ws.size()) {
    throw NumericError("weighted_pairwise_sum: bad operand counts");
  }
  std::vector<ParamVector> acc;
  acc.reserve(vs.size());
  for (size_t i = 0; i < vs.size(); ++i) {
    acc.push_back(vs[i]);
    acc.back().scale(ws[i]);
  }
  // In-place tree: stride doubling keeps operand order by index.
  for (size_t stride = 1; stride < acc.size(); stride *= 2) {
    for (size_t i = 0; i + stride < acc.size(); i += 2 * stride) {
      acc[i].add_scaled(acc[i + stride], 1.0);
    }
  }
  return acc[0];
}

}  // namespace leadq
