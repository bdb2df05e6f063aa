#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace leadq {

// Writes the whole file, then renames into place so readers never see a
// partial checkpoint.
void atomic_write_file(const std::string& path, const std::string& content);

// Named sections of raw doubles in a little-endian binary blob. Integers are
// stored as doubles (exact below 2^53), which keeps one code path for both.
class SectionWriter {
 public:
  void add(const std::string& name, const double* data, size_t n);
  void add(const std::string& name, const std::vector<double>& v);
  void add_scalar(const std::string& name, double v);
  // Serializes and atomically replaces path.
  void commit(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::vector<double>>> sections_;
};

class SectionReader {
 public:
  explicit SectionReader(const std::string& path);

  bool has(const std::string& name) const;
  const std::vector<double>& get(const std::string& name) const;
  double get_scalar(const std::string& name) const;

 private:
  std::map<std::string, std::vector<double>> sections_;
};

struct CheckpointManifest {
  int version = 1;
  uint64_t seed = 0;
  int round = 0;
  std::string policy;
  long csv_rows = 0;
  bool finished = false;
  std::string config_text;
};

void write_manifest(const std::string& path, const CheckpointManifest& m);
CheckpointManifest read_manifest(const std::string& path);

}  // namespace leadq
