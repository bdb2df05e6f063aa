#include "leadq/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "leadq/errors.hpp"
#include "leadq/metrics.hpp"

namespace leadq {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected unsigned integer, got '" +
                      v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& key, const std::string& v, F parse) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(parse(key, cell));
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream ss;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) ss << ',';
    ss << xs[i];
  }
  return ss.str();
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  if (key == "dataset.kind") {
    if (value != "synthetic" && value != "csv") {
      throw ConfigError("dataset.kind must be synthetic or csv");
    }
    cfg.dataset_kind = value;
  } else if (key == "dataset.classes") {
    cfg.dataset_classes = to_int(key, value);
  } else if (key == "dataset.dim") {
    cfg.dataset_dim = to_int(key, value);
  } else if (key == "dataset.per_class") {
    cfg.dataset_per_class = to_int(key, value);
  } else if (key == "dataset.spread") {
    cfg.dataset_spread = to_double(key, value);
  } else if (key == "dataset.csv") {
    cfg.dataset_csv = value;
  } else if (key == "dataset.manifest") {
    cfg.dataset_manifest = value;
  } else if (key == "dataset.test_size") {
    cfg.test_size = to_int(key, value);
  } else if (key == "heldout.size") {
    cfg.heldout_size = to_int(key, value);
  } else if (key == "partition.kind") {
    if (value != "dirichlet" && value != "quantity") {
      throw ConfigError("partition.kind must be dirichlet or quantity");
    }
    cfg.partition_kind = value;
  } else if (key == "partition.alpha") {
    cfg.alpha = to_double(key, value);
  } else if (key == "partition.classes_per_client") {
    cfg.classes_per_client = to_int(key, value);
  } else if (key == "clients") {
    cfg.clients = to_int(key, value);
  } else if (key == "stream.arrivals_per_round") {
    cfg.arrivals_per_round = to_int(key, value);
  } else if (key == "query.budget") {
    cfg.query_budget = to_int(key, value);
  } else if (key == "rounds") {
    cfg.rounds = to_int(key, value);
  } else if (key == "fl.iterations") {
    cfg.fl.iterations = to_int(key, value);
  } else if (key == "fl.learning_rate") {
    cfg.fl.learning_rate = to_double(key, value);
  } else if (key == "fl.local_epochs") {
    cfg.fl.local_epochs = to_int(key, value);
  } else if (key == "fl.batch_size") {
    cfg.fl.batch_size = to_int(key, value);
  } else if (key == "fl.reset") {
    if (value == "keep_previous") {
      cfg.fl.reset = ResetPolicy::keep_previous;
    } else if (value == "random_reinit") {
      cfg.fl.reset = ResetPolicy::random_reinit;
    } else {
      throw ConfigError("fl.reset must be keep_previous or random_reinit");
    }
  } else if (key == "fl.aggregation") {
    if (value == "weighted") {
      cfg.fl.aggregation = Aggregation::weighted;
    } else if (value == "unweighted") {
      cfg.fl.aggregation = Aggregation::unweighted;
    } else {
      throw ConfigError("fl.aggregation must be weighted or unweighted");
    }
  } else if (key == "model.hidden") {
    cfg.model_hidden = to_list<int>(key, value, to_int);
  } else if (key == "model.activation") {
    cfg.model_activation = activation_from_string(value);
  } else if (key == "policy") {
    cfg.policy = policy_from_string(value);
  } else if (key == "seeds") {
    cfg.seeds = to_list<uint64_t>(key, value, to_u64);
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "checkpoint.every") {
    cfg.checkpoint_every = to_int(key, value);
  } else if (key == "run.stop_after_round") {
    cfg.stop_after_round = to_int(key, value);
  } else if (key == "leadq.gamma") {
    cfg.marl.gamma = to_double(key, value);
  } else if (key == "leadq.episode_length") {
    cfg.marl.episode_length = to_int(key, value);
  } else if (key == "leadq.buffer_capacity") {
    cfg.marl.buffer_capacity = to_int(key, value);
  } else if (key == "leadq.warmup_timesteps") {
    cfg.marl.warmup_timesteps = to_int(key, value);
  } else if (key == "leadq.batch_size") {
    cfg.marl.batch_size = to_int(key, value);
  } else if (key == "leadq.lr") {
    cfg.marl.lr = to_double(key, value);
  } else if (key == "leadq.max_update_steps") {
    cfg.marl.max_update_steps = to_int(key, value);
  } else if (key == "leadq.update_frequency") {
    cfg.marl.update_frequency = to_int(key, value);
  } else if (key == "leadq.target_update_period") {
    cfg.marl.target_update_period = to_int(key, value);
  } else if (key == "leadq.eps_start") {
    cfg.marl.eps_start = to_double(key, value);
  } else if (key == "leadq.eps_end") {
    cfg.marl.eps_end = to_double(key, value);
  } else if (key == "leadq.eps_decay_rounds") {
    cfg.marl.eps_decay_rounds = to_int(key, value);
  } else if (key == "leadq.agent_hidden") {
    cfg.marl.agent_hidden = to_int(key, value);
  } else if (key == "leadq.mixer_hidden") {
    cfg.marl.mixer_hidden = to_int(key, value);
  } else if (key == "leadq.exploration") {
    cfg.marl.exploration = to_bool(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    apply_override(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["dataset.kind"] = cfg.dataset_kind;
  kv["dataset.classes"] = std::to_string(cfg.dataset_classes);
  kv["dataset.dim"] = std::to_string(cfg.dataset_dim);
  kv["dataset.per_class"] = std::to_string(cfg.dataset_per_class);
  kv["dataset.spread"] = fmt_double(cfg.dataset_spread);
  kv["dataset.csv"] = cfg.dataset_csv;
  kv["dataset.manifest"] = cfg.dataset_manifest;
  kv["dataset.test_size"] = std::to_string(cfg.test_size);
  kv["heldout.size"] = std::to_string(cfg.heldout_size);
  kv["partition.kind"] = cfg.partition_kind;
  kv["partition.alpha"] = fmt_double(cfg.alpha);
  kv["partition.classes_per_client"] = std::to_string(cfg.classes_per_client);
  kv["clients"] = std::to_string(cfg.clients);
  kv["stream.arrivals_per_round"] = std::to_string(cfg.arrivals_per_round);
  kv["query.budget"] = std::to_string(cfg.query_budget);
  kv["rounds"] = std::to_string(cfg.rounds);
  kv["fl.iterations"] = std::to_string(cfg.fl.iterations);
  kv["fl.learning_rate"] = fmt_double(cfg.fl.learning_rate);
  kv["fl.local_epochs"] = std::to_string(cfg.fl.local_epochs);
  kv["fl.batch_size"] = std::to_string(cfg.fl.batch_size);
  kv["fl.reset"] = cfg.fl.reset == ResetPolicy::keep_previous
                       ? "keep_previous"
                       : "random_reinit";
  kv["fl.aggregation"] =
      cfg.fl.aggregation == Aggregation::weighted ? "weighted" : "unweighted";
  kv["model.hidden"] = join(cfg.model_hidden);
  kv["model.activation"] = to_string(cfg.model_activation);
  kv["policy"] = to_string(cfg.policy);
  kv["seeds"] = join(cfg.seeds);
  kv["out"] = cfg.out_dir;
  kv["checkpoint.every"] = std::to_string(cfg.checkpoint_every);
  kv["run.stop_after_round"] = std::to_string(cfg.stop_after_round);
  kv["leadq.gamma"] = fmt_double(cfg.marl.gamma);
  kv["leadq.episode_length"] = std::to_string(cfg.marl.episode_length);
  kv["leadq.buffer_capacity"] = std::to_string(cfg.marl.buffer_capacity);
  kv["leadq.warmup_timesteps"] = std::to_string(cfg.marl.warmup_timesteps);
  kv["leadq.batch_size"] = std::to_string(cfg.marl.batch_size);
  kv["leadq.lr"] = fmt_double(cfg.marl.lr);
  kv["leadq.max_update_steps"] = std::to_string(cfg.marl.max_update_steps);
  kv["leadq.update_frequency"] = std::to_string(cfg.marl.update_frequency);
  kv["leadq.target_update_period"] =
      std::to_string(cfg.marl.target_update_period);
  kv["leadq.eps_start"] = fmt_double(cfg.marl.eps_start);
  kv["leadq.eps_end"] = fmt_double(cfg.marl.eps_end);
  kv["leadq.eps_decay_rounds"] = std::to_string(cfg.marl.eps_decay_rounds);
  kv["leadq.agent_hidden"] = std::to_string(cfg.marl.agent_hidden);
  kv["leadq.mixer_hidden"] = std::to_string(cfg.marl.mixer_hidden);
  kv["leadq.exploration"] = cfg.marl.exploration ? "true" : "false";

  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
  return out.str();
}

void validate_config(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (cfg.dataset_kind == "synthetic") {
    if (cfg.dataset_classes < 2) fail("dataset.classes must be >= 2");
    if (cfg.dataset_dim < 2) fail("dataset.dim must be >= 2");
    if (cfg.dataset_per_class < 1) fail("dataset.per_class must be >= 1");
    if (cfg.dataset_spread <= 0.0) fail("dataset.spread must be positive");
  } else if (cfg.dataset_csv.empty() || cfg.dataset_manifest.empty()) {
    fail("dataset.csv and dataset.manifest are required for csv datasets");
  }
  if (cfg.test_size < 1) fail("dataset.test_size must be >= 1");
  if (cfg.heldout_size < 1) fail("heldout.size must be >= 1");
  if (cfg.partition_kind == "dirichlet") {
    if (cfg.alpha <= 0.0) fail("partition.alpha must be positive");
  } else {
    if (cfg.classes_per_client < 1) fail("partition.classes_per_client must be >= 1");
  }
  if (cfg.clients < 1) fail("clients must be >= 1");
  if (cfg.arrivals_per_round < 1) fail("stream.arrivals_per_round must be >= 1");
  if (cfg.query_budget < 0 || cfg.query_budget > cfg.arrivals_per_round) {
    fail("query.budget must lie in [0, stream.arrivals_per_round]");
  }
  if (cfg.rounds < 0) fail("rounds must be >= 0");
  if (cfg.fl.iterations < 1) fail("fl.iterations must be >= 1");
  if (cfg.fl.learning_rate <= 0.0) fail("fl.learning_rate must be positive");
  if (cfg.fl.local_epochs < 0) fail("fl.local_epochs must be >= 0");
  if (cfg.fl.batch_size < 1) fail("fl.batch_size must be >= 1");
  for (int w : cfg.model_hidden) {
    if (w < 1) fail("model.hidden entries must be >= 1");
  }
  if (cfg.seeds.empty()) fail("seeds must be non-empty");
  if (cfg.out_dir.empty()) fail("out must be non-empty");
  if (cfg.checkpoint_every < 0) fail("checkpoint.every must be >= 0");
  if (cfg.stop_after_round < 0) fail("run.stop_after_round must be >= 0");
  const MarlConfig& m = cfg.marl;
  if (m.gamma < 0.0 || m.gamma >= 1.0) fail("leadq.gamma must lie in [0, 1)");
  if (m.episode_length < 1) fail("leadq.episode_length must be >= 1");
  if (m.buffer_capacity < 1) fail("leadq.buffer_capacity must be >= 1");
  if (m.warmup_timesteps < 0) fail("leadq.warmup_timesteps must be >= 0");
  if (m.batch_size < 1) fail("leadq.batch_size must be >= 1");
  if (m.lr <= 0.0) fail("leadq.lr must be positive");
  if (m.max_update_steps < 0) fail("leadq.max_update_steps must be >= 0");
  if (m.update_frequency < 1) fail("leadq.update_frequency must be >= 1");
  if (m.target_update_period < 1) fail("leadq.target_update_period must be >= 1");
  if (m.eps_start < 0.0 || m.eps_start > 1.0) fail("leadq.eps_start must lie in [0, 1]");
  if (m.eps_end < 0.0 || m.eps_end > 1.0) fail("leadq.eps_end must lie in [0, 1]");
  if (m.eps_decay_rounds < 0) fail("leadq.eps_decay_rounds must be >= 0");
  if (m.agent_hidden < 1) fail("leadq.agent_hidden must be >= 1");
  if (m.mixer_hidden < 1) fail("leadq.mixer_hidden must be >= 1");
}

}  // namespace leadq
