#include "leadq/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "leadq/errors.hpp"
#include "leadq/rng.hpp"

namespace leadq {

void Dataset::push(const double* f, int y) {
  if (y < 0 || y >= num_classes_) {
    throw DataError("label " + std::to_string(y) + " out of range");
  }
  xs_.insert(xs_.end(), f, f + dim_);
  ys_.push_back(y);
}

void Dataset::reserve(size_t n) {
  xs_.reserve(n * dim_);
  ys_.reserve(n);
}

Dataset make_synthetic_dataset(int n_classes, int dim, int per_class,
                               double spread, uint64_t seed,
                               std::string_view tag) {
  if (n_classes < 2) throw ConfigError("need at least 2 classes");
  if (dim < 2) throw ConfigError("need feature dimension >= 2");
  if (spread <= 0.0) throw ConfigError("spread must be positive");
  if (per_class < 1) throw DataError("per-class count of 0 gives an empty dataset");

  DetRng center_rng = rng_for(seed, "blob_centers");
  std::vector<double> centers(static_cast<size_t>(n_classes) * dim);
  for (auto& v : centers) v = center_rng.uniform(-1.0, 1.0);

  Dataset out(n_classes, dim);
  out.reserve(static_cast<size_t>(n_classes) * per_class);
  std::vector<double> x(static_cast<size_t>(dim));
  for (int c = 0; c < n_classes; ++c) {
    DetRng rng = rng_for(seed, "blob_samples", static_cast<uint64_t>(c),
                         mix_seed(0, tag));
    const double* mu = centers.data() + static_cast<size_t>(c) * dim;
    for (int i = 0; i < per_class; ++i) {
      for (int j = 0; j < dim; ++j) x[static_cast<size_t>(j)] = mu[j] + spread * rng.normal();
      out.push(x.data(), c);
    }
  }

  // Shuffle by building a permuted copy so class blocks do not survive.
  DetRng order_rng = rng_for(seed, "dataset_order", mix_seed(0, tag));
  std::vector<int> perm(out.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  order_rng.shuffle(perm);
  Dataset shuffled(n_classes, dim);
  shuffled.reserve(out.size());
  for (int i : perm) {
    shuffled.push(out.features(static_cast<size_t>(i)),
                  out.label(static_cast<size_t>(i)));
  }
  return shuffled;
}

namespace {

std::vector<std::vector<int>> indices_by_class(const Dataset& data) {
  std::vector<std::vector<int>> by_class(static_cast<size_t>(data.num_classes()));
  for (size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<size_t>(data.label(i))].push_back(static_cast<int>(i));
  }
  return by_class;
}

// Integer quotas q_i summing to total with q_i ~ total*p_i; remainders go to
// the largest fractional parts, ties to the lowest index.
std::vector<int> largest_remainder_counts(const std::vector<double>& p,
                                          int total) {
  size_t k = p.size();
  std::vector<int> counts(k);
  std::vector<std::pair<double, size_t>> frac(k);
  int assigned = 0;
  for (size_t i = 0; i < k; ++i) {
    double want = p[i] * total;
    counts[i] = static_cast<int>(want);
    frac[i] = {want - counts[i], i};
    assigned += counts[i];
  }
  std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int r = 0; r < total - assigned; ++r) {
    counts[frac[static_cast<size_t>(r) % k].second] += 1;
  }
  return counts;
}

}  // namespace

std::vector<std::vector<int>> partition_dirichlet(const Dataset& data, int k,
                                                  double alpha,
                                                  uint64_t seed) {
  if (k < 1) throw PartitionError("client count must be positive");
  if (alpha <= 0.0) throw PartitionError("alpha must be positive");
  if (data.size() < static_cast<size_t>(k)) {
    throw PartitionError("dataset smaller than client count");
  }
  auto by_class = indices_by_class(data);
  for (int attempt = 0; attempt < 100; ++attempt) {
    DetRng rng = rng_for(seed, "dirichlet_partition",
                         static_cast<uint64_t>(attempt));
    std::vector<std::vector<int>> shards(static_cast<size_t>(k));
    for (auto& cls : by_class) {
      std::vector<int> order = cls;
      rng.shuffle(order);
      std::vector<double> p = rng.dirichlet(alpha, k);
      std::vector<int> counts =
          largest_remainder_counts(p, static_cast<int>(order.size()));
      size_t pos = 0;
      for (int c = 0; c < k; ++c) {
        for (int j = 0; j < counts[static_cast<size_t>(c)]; ++j) {
          shards[static_cast<size_t>(c)].push_back(order[pos++]);
        }
      }
    }
    bool ok = true;
    for (const auto& s : shards) ok = ok && !s.empty();
    if (ok) return shards;
  }
  throw PartitionError("no non-empty Dirichlet partition after 100 attempts");
}

std::vector<std::vector<int>> partition_quantity(const Dataset& data, int k,
                                                 int classes_per_client,
                                                 uint64_t seed) {
  int n_classes = data.num_classes();
  if (classes_per_client < 1 || classes_per_client > n_classes) {
    throw PartitionError("classes-per-client outside [1, class count]");
  }
  if (k * classes_per_client < n_classes) {
    throw PartitionError("K*C too small to cover every class");
  }
  DetRng rng = rng_for(seed, "quantity_partition");

  // Deal shuffled classes round-robin so coverage holds, then fill each
  // client to exactly C distinct classes.
  std::vector<int> class_order(static_cast<size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) class_order[static_cast<size_t>(c)] = c;
  rng.shuffle(class_order);
  std::vector<std::vector<char>> holds(
      static_cast<size_t>(k), std::vector<char>(static_cast<size_t>(n_classes), 0));
  std::vector<int> held_count(static_cast<size_t>(k), 0);
  for (int i = 0; i < n_classes; ++i) {
    int c = class_order[static_cast<size_t>(i)];
    int client = i % k;
    holds[static_cast<size_t>(client)][static_cast<size_t>(c)] = 1;
    held_count[static_cast<size_t>(client)] += 1;
  }
  for (int client = 0; client < k; ++client) {
    while (held_count[static_cast<size_t>(client)] < classes_per_client) {
      std::vector<int> missing;
      for (int c = 0; c < n_classes; ++c) {
        if (!holds[static_cast<size_t>(client)][static_cast<size_t>(c)]) {
          missing.push_back(c);
        }
      }
      int pick = missing[static_cast<size_t>(
          rng.uniform_int(static_cast<uint64_t>(missing.size())))];
      holds[static_cast<size_t>(client)][static_cast<size_t>(pick)] = 1;
      held_count[static_cast<size_t>(client)] += 1;
    }
  }

  auto by_class = indices_by_class(data);
  std::vector<std::vector<int>> shards(static_cast<size_t>(k));
  for (int c = 0; c < n_classes; ++c) {
    std::vector<int> holders;
    for (int client = 0; client < k; ++client) {
      if (holds[static_cast<size_t>(client)][static_cast<size_t>(c)]) {
        holders.push_back(client);
      }
    }
    std::vector<int> order = by_class[static_cast<size_t>(c)];
    rng.shuffle(order);
    int m = static_cast<int>(holders.size());
    int base = static_cast<int>(order.size()) / m;
    int rem = static_cast<int>(order.size()) % m;
    size_t pos = 0;
    for (int h = 0; h < m; ++h) {
      int take = base + (h < rem ? 1 : 0);
      for (int j = 0; j < take; ++j) {
        shards[static_cast<size_t>(holders[static_cast<size_t>(h)])].push_back(
            order[pos++]);
      }
    }
  }
  return shards;
}

std::pair<Dataset, Dataset> split_held_out(const Dataset& data, int held_size,
                                           uint64_t seed,
                                           std::string_view tag) {
  if (held_size < 1) {
    throw ConfigError("held-out size must be positive");
  }
  if (static_cast<size_t>(held_size) >= data.size()) {
    throw ConfigError("held-out size must be smaller than the dataset");
  }
  auto by_class = indices_by_class(data);
  std::vector<double> props(by_class.size());
  for (size_t c = 0; c < by_class.size(); ++c) {
    props[c] = static_cast<double>(by_class[c].size()) / data.size();
  }
  std::vector<int> quotas = largest_remainder_counts(props, held_size);

  std::vector<char> is_held(data.size(), 0);
  for (size_t c = 0; c < by_class.size(); ++c) {
    DetRng rng = rng_for(seed, "held_split", static_cast<uint64_t>(c),
                         mix_seed(0, tag));
    std::vector<int> order = by_class[c];
    rng.shuffle(order);
    int take = std::min<int>(quotas[c], static_cast<int>(order.size()));
    for (int j = 0; j < take; ++j) is_held[static_cast<size_t>(order[j])] = 1;
  }

  Dataset rest(data.num_classes(), data.dim());
  Dataset held(data.num_classes(), data.dim());
  for (size_t i = 0; i < data.size(); ++i) {
    (is_held[i] ? held : rest).push(data.features(i), data.label(i));
  }
  if (held.empty() || rest.empty()) {
    throw ConfigError("degenerate held-out split");
  }
  return {std::move(rest), std::move(held)};
}

void save_dataset_csv(const Dataset& data, const std::string& csv_path,
                      const std::string& manifest_path, uint64_t seed) {
  std::ofstream csv(csv_path);
  if (!csv) throw DataError("cannot write " + csv_path);
  for (int j = 0; j < data.dim(); ++j) csv << "f" << j << ",";
  csv << "label\n";
  char buf[32];
  for (size_t i = 0; i < data.size(); ++i) {
    const double* f = data.features(i);
    for (int j = 0; j < data.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", f[j]);
      csv << buf << ",";
    }
    csv << data.label(i) << "\n";
  }
  nlohmann::json manifest{{"dim", data.dim()},
                          {"classes", data.num_classes()},
                          {"count", data.size()},
                          {"seed", seed}};
  std::ofstream mf(manifest_path);
  if (!mf) throw DataError("cannot write " + manifest_path);
  mf << manifest.dump(2) << "\n";
}

Dataset load_dataset_csv(const std::string& csv_path,
                         const std::string& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw DataError("cannot read " + manifest_path);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad manifest " + manifest_path + ": " + e.what());
  }
  int dim = manifest.at("dim").get<int>();
  int classes = manifest.at("classes").get<int>();

  std::ifstream csv(csv_path);
  if (!csv) throw DataError("cannot read " + csv_path);
  Dataset out(classes, dim);
  std::string line;
  std::vector<double> x(static_cast<size_t>(dim));
  bool first = true;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("f0,", 0) == 0) continue;  // header
    }
    std::stringstream ss(line);
    std::string cell;
    for (int j = 0; j < dim; ++j) {
      if (!std::getline(ss, cell, ',')) {
        throw DataError("short row in " + csv_path);
      }
      x[static_cast<size_t>(j)] = std::stod(cell);
    }
    if (!std::getline(ss, cell, ',')) throw DataError("missing label column");
    out.push(x.data(), std::stoi(cell));
  }
  if (out.empty()) throw DataError("empty dataset in " + csv_path);
  return out;
}

}  // namespace leadq
