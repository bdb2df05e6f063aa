#include "leadq/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "leadq/checkpoint.hpp"
#include "leadq/errors.hpp"
#include "leadq/marl.hpp"
#include "leadq/policies.hpp"
#include "leadq/rng.hpp"
#include "leadq/stream.hpp"

namespace leadq {
namespace {

namespace fs = std::filesystem;

struct SeedPaths {
  std::string records_csv;
  std::string records_jsonl;
  std::string marl_jsonl;
  std::string meta_json;
  std::string ckpt_dir;
  std::string manifest;
  std::string state_bin;
};

// Checkpoint identity ignores run-time-only knobs: a run stopped early by
// run.stop_after_round, or moved to another directory, still resumes.
std::string persistent_config_text(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.stop_after_round = 0;
  c.out_dir = "";
  return serialize_config(c);
}

SeedPaths seed_paths(const std::string& out, uint64_t seed) {
  const std::string tag = std::to_string(seed);
  SeedPaths p;
  p.records_csv = out + "/records_seed" + tag + ".csv";
  p.records_jsonl = out + "/records_seed" + tag + ".jsonl";
  p.marl_jsonl = out + "/marl_seed" + tag + ".jsonl";
  p.meta_json = out + "/run_meta_seed" + tag + ".json";
  p.ckpt_dir = out + "/checkpoints/seed" + tag;
  p.manifest = p.ckpt_dir + "/manifest.json";
  p.state_bin = p.ckpt_dir + "/state.bin";
  return p;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Deletes decision rows of `seed` past `round` so a resumed run appends the
// same rows an uninterrupted run would have written.
void trim_decisions(const std::string& path, uint64_t seed, int round) {
  std::ifstream in(path);
  if (!in) return;
  std::string kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    bool drop = false;
    try {
      auto j = nlohmann::json::parse(line);
      drop = j.at("seed").get<uint64_t>() == seed &&
             j.at("round").get<int>() > round;
    } catch (const std::exception&) {
      drop = false;
    }
    if (!drop) kept += line + "\n";
  }
  in.close();
  atomic_write_file(path, kept);
}

void trim_jsonl_by_round(const std::string& path, int round) {
  std::ifstream in(path);
  if (!in) return;
  std::string kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    bool drop = false;
    try {
      auto j = nlohmann::json::parse(line);
      drop = j.at("round").get<int>() > round;
    } catch (const std::exception&) {
      drop = false;
    }
    if (!drop) kept += line + "\n";
  }
  in.close();
  atomic_write_file(path, kept);
}

std::vector<double> flatten_rows(const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  if (rows.empty()) return flat;
  flat.reserve(rows.size() * rows[0].size());
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return flat;
}

class SeedRunner {
 public:
  SeedRunner(const ExperimentConfig& cfg, uint64_t seed, SeedPaths paths)
      : cfg_(cfg), seed_(seed), paths_(std::move(paths)) {}

  // Deterministic construction from (cfg, seed) alone; every policy sees the
  // same data, partition, streams, and initial model.
  void build() {
    Dataset full;
    if (cfg_.dataset_kind == "synthetic") {
      full = make_synthetic_dataset(cfg_.dataset_classes, cfg_.dataset_dim,
                                    cfg_.dataset_per_class,
                                    cfg_.dataset_spread, seed_, "train");
    } else {
      full = load_dataset_csv(cfg_.dataset_csv, cfg_.dataset_manifest);
    }
    if (static_cast<size_t>(cfg_.heldout_size) +
            static_cast<size_t>(cfg_.test_size) >=
        full.size()) {
      throw ConfigError(
          "heldout.size + test.size leaves no training data (dataset has " +
          std::to_string(full.size()) + " samples)");
    }
    auto [rest, held] = split_held_out(full, cfg_.heldout_size, seed_, "held");
    held_ = std::move(held);
    auto [train, test] = split_held_out(rest, cfg_.test_size, seed_, "test");
    train_ = std::move(train);
    test_ = std::move(test);
    target_hist_ = dataset_label_histogram(train_);

    std::vector<std::vector<int>> shards;
    if (cfg_.partition_kind == "dirichlet") {
      shards = partition_dirichlet(train_, cfg_.clients, cfg_.alpha, seed_);
    } else {
      shards = partition_quantity(train_, cfg_.clients,
                                  cfg_.classes_per_client, seed_);
    }
    streams_ = make_streams(shards, cfg_.arrivals_per_round, seed_);
    oracle_ = std::make_unique<LabelOracle>(train_);

    clients_.clear();
    for (int k = 0; k < cfg_.clients; ++k) {
      ClientTrainState c;
      c.id = k;
      c.shuffle_salt = static_cast<uint64_t>(k);
      clients_.push_back(std::move(c));
    }

    std::vector<int> widths;
    widths.push_back(train_.dim());
    widths.insert(widths.end(), cfg_.model_hidden.begin(),
                  cfg_.model_hidden.end());
    widths.push_back(train_.num_classes());
    model_.spec = MlpSpec{widths, cfg_.model_activation};
    model_.params = ParamVector(model_.spec.make_layout());
    auto rng = rng_for(seed_, "model_init");
    init_mlp(model_.spec, model_.params, rng);
    model_.round = 0;

    if (cfg_.policy == PolicyKind::leadq) {
      MarlConfig mc = cfg_.marl;
      if (mc.eps_decay_rounds == 0) {
        mc.eps_decay_rounds = std::max(1, cfg_.rounds / 5);
      }
      AgentNetSpec aspec{cfg_.arrivals_per_round, train_.num_classes(),
                         mc.agent_hidden};
      MixerSpec mspec{cfg_.clients, static_cast<int>(held_.size()),
                      mc.mixer_hidden};
      learner_ = std::make_unique<MarlLearner>(aspec, mspec, mc,
                                               cfg_.query_budget, seed_);
    }

    acc_prev_ = accuracy(model_.spec, model_.params, held_);
    cum_counts_.assign(train_.num_classes(), 0.0);
    labels_total_ = 0;
    start_round_ = 1;
  }

  void restore() {
    SectionReader st(paths_.state_bin);
    const int round = static_cast<int>(st.get_scalar("run.round"));
    model_.params.values() = st.get("model.theta");
    if (model_.params.size() != model_.params.layout()->total_size()) {
      throw CheckpointError("model.theta size mismatch");
    }
    model_.round = round;
    acc_prev_ = st.get_scalar("run.acc_prev");
    labels_total_ = static_cast<long>(st.get_scalar("run.labels_total"));
    cum_counts_ = st.get("run.cum_counts");
    if (cum_counts_.size() != static_cast<size_t>(train_.num_classes())) {
      throw CheckpointError("run.cum_counts size mismatch");
    }

    const auto& cursors = st.get("stream.cursors");
    if (cursors.size() != streams_.size()) {
      throw CheckpointError("stream.cursors size mismatch");
    }
    for (size_t k = 0; k < streams_.size(); ++k) {
      streams_[k].set_cursor(static_cast<size_t>(cursors[k]));
    }

    for (int k = 0; k < cfg_.clients; ++k) {
      const std::string pre = "client" + std::to_string(k) + ".";
      const auto& idx = st.get(pre + "indices");
      const auto& lab = st.get(pre + "labels");
      if (idx.size() != lab.size()) {
        throw CheckpointError(pre + "indices/labels size mismatch");
      }
      std::vector<int> indices(idx.size()), labels(lab.size());
      for (size_t i = 0; i < idx.size(); ++i) {
        indices[i] = static_cast<int>(idx[i]);
        labels[i] = static_cast<int>(lab[i]);
      }
      ClientTrainState& c = clients_[k];
      c.indices.clear();
      c.labels.clear();
      c.index_set.clear();
      c.budget_used = 0;
      incorporate_labels(c, indices, labels);
      c.budget_used = static_cast<long>(st.get_scalar(pre + "budget"));
    }

    const auto& orr = st.get("oracle.rounds");
    const auto& orc = st.get("oracle.clients");
    const auto& ori = st.get("oracle.indices");
    const auto& orl = st.get("oracle.labels");
    if (orr.size() != orc.size() || orr.size() != ori.size() ||
        orr.size() != orl.size()) {
      throw CheckpointError("oracle log column size mismatch");
    }
    std::vector<RevealRecord> log(orr.size());
    for (size_t i = 0; i < orr.size(); ++i) {
      log[i] = RevealRecord{static_cast<int>(orr[i]), static_cast<int>(orc[i]),
                            static_cast<int>(ori[i]), static_cast<int>(orl[i])};
    }
    oracle_->restore(std::move(log));

    if (learner_) restore_marl(st);
    rounds_done_ = round;
    start_round_ = round + 1;
  }

  SeedRunResult run(std::ofstream& rec_csv, std::ofstream& rec_jsonl,
                    std::ofstream& decisions, std::ofstream& marl_log) {
    SeedRunResult result;
    result.seed = seed_;
    const int limit = (cfg_.stop_after_round > 0 &&
                       cfg_.stop_after_round < cfg_.rounds)
                          ? cfg_.stop_after_round
                          : cfg_.rounds;
    bool exhausted = false;
    int r = start_round_;
    for (; r <= limit; ++r) {
      bool all_have = true;
      for (const auto& s : streams_) all_have = all_have && s.has_next_round();
      if (!all_have) {
        exhausted = true;
        break;
      }
      const auto t0 = std::chrono::steady_clock::now();

      std::vector<std::vector<int>> arrivals(cfg_.clients);
      for (int k = 0; k < cfg_.clients; ++k) {
        arrivals[k] = streams_[k].next_arrivals();
      }

      const int env_t = r - 1;
      std::vector<double> state_before;
      if (learner_) {
        if (env_t % learner_->config().episode_length == 0) {
          learner_->reset_episode_state();
        }
        state_before = compute_state(model_.spec, model_.params, held_);
      }

      std::vector<std::vector<double>> obs(cfg_.clients);
      std::vector<std::vector<double>> scores(cfg_.clients);
      auto positions = decide(r, arrivals, obs, scores);

      std::vector<int> round_indices;
      std::vector<std::vector<int>> selected(cfg_.clients);
      for (int k = 0; k < cfg_.clients; ++k) {
        std::vector<int> labels;
        selected[k].reserve(positions[k].size());
        for (int p : positions[k]) {
          const int idx = arrivals[k][p];
          selected[k].push_back(idx);
          labels.push_back(oracle_->reveal(r, k, idx));
          round_indices.push_back(idx);
        }
        incorporate_labels(clients_[k], selected[k], labels);
        for (int lab : labels) cum_counts_[lab] += 1.0;
      }
      labels_total_ = static_cast<long>(oracle_->total_reveals());

      for (int k = 0; k < cfg_.clients; ++k) {
        nlohmann::json j;
        j["seed"] = seed_;
        j["round"] = r;
        j["client"] = k;
        j["policy"] = to_string(cfg_.policy);
        j["positions"] = positions[k];
        j["dataset_indices"] = selected[k];
        j["scores"] = scores[k];
        decisions << j.dump() << "\n";
      }
      decisions.flush();

      run_training_round(model_, clients_, train_, cfg_.fl, seed_, r);

      const double acc_held = accuracy(model_.spec, model_.params, held_);
      const double acc_test = accuracy(model_.spec, model_.params, test_);
      const double reward = acc_held - acc_prev_;
      const auto round_hist =
          label_histogram(*oracle_, round_indices, train_.num_classes());
      const double kl_round = kl_divergence(round_hist, target_hist_);
      const double kl_cum = kl_divergence(cum_counts_, target_hist_);

      if (learner_) {
        const auto state_after =
            compute_state(model_.spec, model_.params, held_);
        const bool terminal =
            (env_t + 1) % learner_->config().episode_length == 0;
        learner_->store_transition(state_before, obs, positions, reward,
                                   state_after, terminal);
        std::vector<double> losses;
        if (r % learner_->config().update_frequency == 0) {
          losses = learner_->train(r);
        }
        nlohmann::json j;
        j["round"] = r;
        j["epsilon"] = learner_->epsilon(env_t);
        j["buffer_episodes"] = learner_->buffer().size();
        j["update_steps"] = losses.size();
        j["update_count"] = learner_->update_count();
        if (!losses.empty()) {
          double mean = 0.0;
          for (double l : losses) mean += l;
          j["mean_loss"] = mean / static_cast<double>(losses.size());
        }
        marl_log << j.dump() << "\n";
        marl_log.flush();
      }

      const auto t1 = std::chrono::steady_clock::now();
      RoundRecord rec;
      rec.round = r;
      rec.policy = to_string(cfg_.policy);
      rec.test_accuracy = acc_test;
      rec.heldout_accuracy = acc_held;
      rec.reward = reward;
      rec.kl_round = kl_round;
      rec.kl_cumulative = kl_cum;
      rec.labels_total = labels_total_;
      rec.wall_ms =
          std::chrono::duration<double, std::milli>(t1 - t0).count();
      rec_csv << record_csv_row(rec) << "\n";
      rec_csv.flush();
      rec_jsonl << record_jsonl_row(rec) << "\n";
      rec_jsonl.flush();
      result.records.push_back(rec);
      acc_prev_ = acc_held;
      rounds_done_ = r;

      if (cfg_.checkpoint_every > 0 && r % cfg_.checkpoint_every == 0 &&
          r != limit) {
        save_checkpoint(false);
      }
    }

    result.rounds_done = rounds_done_;
    result.completed = !exhausted && rounds_done_ == cfg_.rounds;
    result.stopped_on_request = !exhausted && limit < cfg_.rounds;
    // An exhausted stream cannot be continued, so its checkpoint is final.
    save_checkpoint(result.completed || exhausted);

    nlohmann::json meta;
    meta["seed"] = seed_;
    meta["rounds_done"] = rounds_done_;
    meta["status"] = result.completed
                         ? "complete"
                         : (exhausted ? "partial" : "stopped");
    atomic_write_file(paths_.meta_json, meta.dump(2) + "\n");
    return result;
  }

 private:
  std::vector<std::vector<int>> decide(
      int r, const std::vector<std::vector<int>>& arrivals,
      std::vector<std::vector<double>>& obs,
      std::vector<std::vector<double>>& scores) {
    const int n_q = cfg_.query_budget;
    std::vector<std::vector<int>> positions(cfg_.clients);
    switch (cfg_.policy) {
      case PolicyKind::random: {
        for (int k = 0; k < cfg_.clients; ++k) {
          auto rng = rng_for(seed_, "query_random", static_cast<uint64_t>(r),
                             static_cast<uint64_t>(k));
          positions[k] = query_random(cfg_.arrivals_per_round, n_q, rng);
        }
        break;
      }
      case PolicyKind::uncertainty:
      case PolicyKind::warmup: {
        for (int k = 0; k < cfg_.clients; ++k) {
          auto rows =
              prediction_rows(model_.spec, model_.params, train_, arrivals[k]);
          positions[k] = query_uncertainty(rows, n_q);
          scores[k].reserve(rows.size());
          for (const auto& row : rows) {
            scores[k].push_back(*std::max_element(row.begin(), row.end()));
          }
        }
        break;
      }
      case PolicyKind::coreset_local: {
        for (int k = 0; k < cfg_.clients; ++k) {
          std::vector<const double*> cand;
          for (int idx : arrivals[k]) cand.push_back(train_.features(idx));
          std::vector<const double*> ref;
          for (int idx : clients_[k].indices) {
            ref.push_back(train_.features(idx));
          }
          positions[k] = query_coreset(cand, ref, train_.dim(), n_q);
        }
        break;
      }
      case PolicyKind::coreset_global: {
        std::vector<std::vector<const double*>> cand(cfg_.clients);
        std::vector<const double*> pooled;
        for (int k = 0; k < cfg_.clients; ++k) {
          for (int idx : arrivals[k]) cand[k].push_back(train_.features(idx));
          for (int idx : clients_[k].indices) {
            pooled.push_back(train_.features(idx));
          }
        }
        positions = query_coreset_global(cand, pooled, train_.dim(), n_q);
        break;
      }
      case PolicyKind::leadq: {
        const int env_t = r - 1;
        for (int k = 0; k < cfg_.clients; ++k) {
          auto rows =
              prediction_rows(model_.spec, model_.params, train_, arrivals[k]);
          obs[k] = flatten_rows(rows);
          auto q = learner_->step_agent(k, obs[k]);
          if (env_t < learner_->config().warmup_timesteps) {
            positions[k] = query_warmup(rows, n_q);
          } else {
            auto rng = rng_for(seed_, "explore", static_cast<uint64_t>(r),
                               static_cast<uint64_t>(k));
            positions[k] =
                select_action(q, n_q, learner_->epsilon(env_t), rng);
          }
          learner_->commit_action(k, positions[k]);
          scores[k] = q;
        }
        break;
      }
    }
    return positions;
  }

  void save_checkpoint(bool finished) const {
    fs::create_directories(paths_.ckpt_dir);
    SectionWriter w;
    w.add_scalar("run.round", rounds_done_);
    w.add_scalar("run.acc_prev", acc_prev_);
    w.add_scalar("run.labels_total", static_cast<double>(labels_total_));
    w.add("run.cum_counts", cum_counts_);
    w.add("model.theta", model_.params.values());
    std::vector<double> cursors;
    for (const auto& s : streams_) {
      cursors.push_back(static_cast<double>(s.cursor()));
    }
    w.add("stream.cursors", cursors);
    for (int k = 0; k < cfg_.clients; ++k) {
      const std::string pre = "client" + std::to_string(k) + ".";
      const ClientTrainState& c = clients_[k];
      w.add(pre + "indices",
            std::vector<double>(c.indices.begin(), c.indices.end()));
      w.add(pre + "labels",
            std::vector<double>(c.labels.begin(), c.labels.end()));
      w.add_scalar(pre + "budget", static_cast<double>(c.budget_used));
    }
    const auto& log = oracle_->log();
    std::vector<double> orr, orc, ori, orl;
    for (const auto& rec : log) {
      orr.push_back(rec.round);
      orc.push_back(rec.client);
      ori.push_back(rec.dataset_index);
      orl.push_back(rec.label);
    }
    w.add("oracle.rounds", orr);
    w.add("oracle.clients", orc);
    w.add("oracle.indices", ori);
    w.add("oracle.labels", orl);
    if (learner_) save_marl(w);
    w.commit(paths_.state_bin);

    CheckpointManifest m;
    m.seed = seed_;
    m.round = rounds_done_;
    m.policy = to_string(cfg_.policy);
    m.csv_rows = rounds_done_;
    m.finished = finished;
    m.config_text = persistent_config_text(cfg_);
    write_manifest(paths_.manifest, m);
  }

  void add_episode(SectionWriter& w, const std::string& pre,
                   const EpisodeRecord& ep) const {
    w.add_scalar(pre + "len", ep.length);
    std::vector<double> states;
    for (const auto& s : ep.states) {
      states.insert(states.end(), s.begin(), s.end());
    }
    w.add(pre + "states", states);
    w.add(pre + "final_state", ep.final_state);
    std::vector<double> obs;
    for (const auto& per_round : ep.obs) {
      for (const auto& o : per_round) obs.insert(obs.end(), o.begin(), o.end());
    }
    w.add(pre + "obs", obs);
    std::vector<double> acts;
    for (const auto& per_round : ep.actions) {
      for (const auto& a : per_round) {
        acts.insert(acts.end(), a.begin(), a.end());
      }
    }
    w.add(pre + "actions", acts);
    w.add(pre + "rewards", ep.rewards);
  }

  EpisodeRecord read_episode(const SectionReader& st, const std::string& pre,
                             int state_dim, int obs_dim) const {
    EpisodeRecord ep;
    ep.length = static_cast<int>(st.get_scalar(pre + "len"));
    const auto& states = st.get(pre + "states");
    const auto& obs = st.get(pre + "obs");
    const auto& acts = st.get(pre + "actions");
    ep.rewards = st.get(pre + "rewards");
    ep.final_state = st.get(pre + "final_state");
    const int k = cfg_.clients;
    const int n_q = cfg_.query_budget;
    const size_t len = static_cast<size_t>(ep.length);
    if (states.size() != len * state_dim ||
        obs.size() != len * k * static_cast<size_t>(obs_dim) ||
        acts.size() != len * k * static_cast<size_t>(n_q) ||
        ep.rewards.size() != len) {
      throw CheckpointError("episode section '" + pre + "' size mismatch");
    }
    for (size_t j = 0; j < len; ++j) {
      ep.states.emplace_back(states.begin() + j * state_dim,
                             states.begin() + (j + 1) * state_dim);
      std::vector<std::vector<double>> per_round;
      std::vector<std::vector<int>> per_round_acts;
      for (int a = 0; a < k; ++a) {
        const size_t o0 = (j * k + a) * static_cast<size_t>(obs_dim);
        per_round.emplace_back(obs.begin() + o0, obs.begin() + o0 + obs_dim);
        const size_t a0 = (j * k + a) * static_cast<size_t>(n_q);
        std::vector<int> act(n_q);
        for (int i = 0; i < n_q; ++i) {
          act[i] = static_cast<int>(acts[a0 + i]);
        }
        per_round_acts.push_back(std::move(act));
      }
      ep.obs.push_back(std::move(per_round));
      ep.actions.push_back(std::move(per_round_acts));
    }
    return ep;
  }

  void save_marl(SectionWriter& w) const {
    w.add("marl.phi", learner_->phi().values());
    w.add("marl.psi", learner_->psi().values());
    w.add("marl.phi_target", learner_->phi_target().values());
    w.add("marl.psi_target", learner_->psi_target().values());
    w.add("marl.phi_opt.m", learner_->phi_opt().m.values());
    w.add("marl.phi_opt.v", learner_->phi_opt().v.values());
    w.add_scalar("marl.phi_opt.t",
                 static_cast<double>(learner_->phi_opt().step_count));
    w.add("marl.psi_opt.m", learner_->psi_opt().m.values());
    w.add("marl.psi_opt.v", learner_->psi_opt().v.values());
    w.add_scalar("marl.psi_opt.t",
                 static_cast<double>(learner_->psi_opt().step_count));
    w.add_scalar("marl.update_count",
                 static_cast<double>(learner_->update_count()));
    std::vector<double> hidden, prev;
    for (const auto& h : learner_->hiddens()) {
      hidden.insert(hidden.end(), h.begin(), h.end());
    }
    for (const auto& p : learner_->prev_actions()) {
      prev.insert(prev.end(), p.begin(), p.end());
    }
    w.add("marl.hidden", hidden);
    w.add("marl.prev_action", prev);
    const ReplayBuffer& buf = learner_->buffer();
    w.add_scalar("marl.buffer.count", static_cast<double>(buf.size()));
    w.add_scalar("marl.buffer.next_slot",
                 static_cast<double>(buf.next_slot()));
    for (size_t i = 0; i < buf.size(); ++i) {
      add_episode(w, "marl.ep" + std::to_string(i) + ".", buf.episode(i));
    }
    add_episode(w, "marl.partial.", learner_->partial_episode());
  }

  void restore_marl(const SectionReader& st) {
    const int state_dim = static_cast<int>(held_.size());
    const int obs_dim = learner_->agent_spec().n_u * train_.num_classes();
    learner_->phi().values() = st.get("marl.phi");
    learner_->psi().values() = st.get("marl.psi");
    learner_->phi_target().values() = st.get("marl.phi_target");
    learner_->psi_target().values() = st.get("marl.psi_target");
    learner_->phi_opt().m.values() = st.get("marl.phi_opt.m");
    learner_->phi_opt().v.values() = st.get("marl.phi_opt.v");
    learner_->phi_opt().step_count =
        static_cast<long>(st.get_scalar("marl.phi_opt.t"));
    learner_->psi_opt().m.values() = st.get("marl.psi_opt.m");
    learner_->psi_opt().v.values() = st.get("marl.psi_opt.v");
    learner_->psi_opt().step_count =
        static_cast<long>(st.get_scalar("marl.psi_opt.t"));
    if (learner_->phi().size() != learner_->phi().layout()->total_size() ||
        learner_->psi().size() != learner_->psi().layout()->total_size()) {
      throw CheckpointError("marl parameter size mismatch");
    }
    learner_->set_update_count(
        static_cast<long>(st.get_scalar("marl.update_count")));
    const auto& hidden = st.get("marl.hidden");
    const auto& prev = st.get("marl.prev_action");
    const int k = cfg_.clients;
    const int h = learner_->agent_spec().hidden;
    const int n_u = learner_->agent_spec().n_u;
    if (hidden.size() != static_cast<size_t>(k) * h ||
        prev.size() != static_cast<size_t>(k) * n_u) {
      throw CheckpointError("marl execution state size mismatch");
    }
    std::vector<std::vector<double>> hiddens(k), prevs(k);
    for (int a = 0; a < k; ++a) {
      hiddens[a].assign(hidden.begin() + static_cast<size_t>(a) * h,
                        hidden.begin() + static_cast<size_t>(a + 1) * h);
      prevs[a].assign(prev.begin() + static_cast<size_t>(a) * n_u,
                      prev.begin() + static_cast<size_t>(a + 1) * n_u);
    }
    learner_->set_execution_state(std::move(hiddens), std::move(prevs));
    const size_t count = static_cast<size_t>(st.get_scalar("marl.buffer.count"));
    const size_t next_slot =
        static_cast<size_t>(st.get_scalar("marl.buffer.next_slot"));
    std::vector<EpisodeRecord> eps;
    for (size_t i = 0; i < count; ++i) {
      eps.push_back(read_episode(st, "marl.ep" + std::to_string(i) + ".",
                                 state_dim, obs_dim));
    }
    learner_->buffer().restore(std::move(eps), next_slot);
    learner_->set_partial_episode(
        read_episode(st, "marl.partial.", state_dim, obs_dim));
  }

  const ExperimentConfig& cfg_;
  uint64_t seed_;
  SeedPaths paths_;
  Dataset train_, held_, test_;
  std::vector<double> target_hist_;
  std::vector<ClientTrainState> clients_;
  std::vector<ClientStream> streams_;
  std::unique_ptr<LabelOracle> oracle_;
  GlobalModel model_;
  std::unique_ptr<MarlLearner> learner_;
  double acc_prev_ = 0.0;
  std::vector<double> cum_counts_;
  long labels_total_ = 0;
  int start_round_ = 1;
  int rounds_done_ = 0;
};

long count_csv_data_rows(const std::string& path) {
  std::ifstream f(path);
  if (!f) return -1;
  std::string line;
  long rows = -1;  // header not counted
  while (std::getline(f, line)) {
    if (!line.empty()) ++rows;
  }
  return rows;
}

std::vector<std::vector<RoundRecord>> collect_all_records(
    const ExperimentConfig& cfg) {
  std::vector<std::vector<RoundRecord>> per_seed;
  for (uint64_t seed : cfg.seeds) {
    per_seed.push_back(
        read_records_csv(seed_paths(cfg.out_dir, seed).records_csv));
  }
  return per_seed;
}

void write_summary(const ExperimentConfig& cfg) {
  atomic_write_file(cfg.out_dir + "/summary.csv",
                    summary_csv(collect_all_records(cfg)));
}

SeedRunResult run_one_seed(const ExperimentConfig& cfg, uint64_t seed,
                           bool fresh, std::ofstream& decisions) {
  const SeedPaths paths = seed_paths(cfg.out_dir, seed);
  SeedRunner runner(cfg, seed, paths);
  runner.build();

  std::ios_base::openmode mode = std::ios::trunc;
  if (!fresh) {
    CheckpointManifest m = read_manifest(paths.manifest);
    if (m.seed != seed) throw CheckpointError("manifest seed mismatch");
    if (m.config_text != persistent_config_text(cfg)) {
      throw CheckpointError("checkpoint config does not match this run");
    }
    const long rows = count_csv_data_rows(paths.records_csv);
    if (rows != m.csv_rows) {
      throw CheckpointError("records CSV has " + std::to_string(rows) +
                            " rows, checkpoint expects " +
                            std::to_string(m.csv_rows));
    }
    runner.restore();
    trim_jsonl_by_round(paths.records_jsonl, m.round);
    trim_jsonl_by_round(paths.marl_jsonl, m.round);
    mode = std::ios::app;
  }

  std::ofstream rec_csv(paths.records_csv, mode);
  if (!rec_csv) throw DataError("cannot open " + paths.records_csv);
  std::ofstream rec_jsonl(paths.records_jsonl, mode);
  std::ofstream marl_log;
  if (cfg.policy == PolicyKind::leadq) {
    marl_log.open(paths.marl_jsonl, mode);
  }
  if (fresh) {
    rec_csv << records_csv_header() << "\n";
    rec_csv.flush();
  }
  return runner.run(rec_csv, rec_jsonl, decisions, marl_log);
}

}  // namespace

std::vector<RoundRecord> read_records_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open records CSV: " + path);
  std::string line;
  if (!std::getline(f, line) || line != records_csv_header()) {
    throw DataError("unexpected records CSV header in " + path);
  }
  std::vector<RoundRecord> out;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto parts = split_csv_line(line);
    if (parts.size() != 8) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected 8 fields");
    }
    try {
      RoundRecord r;
      r.round = std::stoi(parts[0]);
      r.policy = parts[1];
      r.test_accuracy = std::stod(parts[2]);
      r.heldout_accuracy = std::stod(parts[3]);
      r.reward = std::stod(parts[4]);
      r.kl_round = std::stod(parts[5]);
      r.kl_cumulative = std::stod(parts[6]);
      r.labels_total = std::stol(parts[7]);
      out.push_back(std::move(r));
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": malformed field");
    }
  }
  return out;
}

std::vector<SeedRunResult> run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  fs::create_directories(cfg.out_dir);
  // stop_after_round is a one-shot instruction to this process, not a
  // property of the experiment: resuming from the resolved config must
  // continue to cfg.rounds, not stop again.
  ExperimentConfig persist = cfg;
  persist.stop_after_round = 0;
  atomic_write_file(cfg.out_dir + "/config_resolved.conf",
                    serialize_config(persist));
  std::ofstream decisions(cfg.out_dir + "/decisions.jsonl", std::ios::trunc);
  if (!decisions) {
    throw DataError("cannot open " + cfg.out_dir + "/decisions.jsonl");
  }
  std::vector<SeedRunResult> results;
  for (uint64_t seed : cfg.seeds) {
    results.push_back(run_one_seed(cfg, seed, /*fresh=*/true, decisions));
  }
  write_summary(cfg);
  return results;
}

void run_sweep(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const std::vector<PolicyKind> suite = {
      PolicyKind::random, PolicyKind::uncertainty, PolicyKind::coreset_local,
      PolicyKind::coreset_global, PolicyKind::leadq};
  for (PolicyKind p : suite) {
    ExperimentConfig sub = cfg;
    sub.policy = p;
    sub.out_dir = cfg.out_dir + "/" + to_string(p);
    run_experiment(sub);
  }
}

std::vector<SeedRunResult> resume_experiment(const std::string& out_dir) {
  const std::string conf_path = out_dir + "/config_resolved.conf";
  if (!fs::exists(conf_path)) {
    throw CheckpointError("no config_resolved.conf under " + out_dir);
  }
  ExperimentConfig cfg = parse_config_file(conf_path);
  cfg.out_dir = out_dir;
  validate_config(cfg);

  // The decision log is rewritten before the shared append handle opens;
  // trimming it later would orphan the handle on the replaced file.
  for (uint64_t seed : cfg.seeds) {
    const SeedPaths paths = seed_paths(out_dir, seed);
    if (!fs::exists(paths.manifest)) continue;
    CheckpointManifest m = read_manifest(paths.manifest);
    if (!m.finished) {
      trim_decisions(out_dir + "/decisions.jsonl", seed, m.round);
    }
  }

  std::ofstream decisions(out_dir + "/decisions.jsonl", std::ios::app);
  if (!decisions) {
    throw DataError("cannot open " + out_dir + "/decisions.jsonl");
  }
  std::vector<SeedRunResult> results;
  for (uint64_t seed : cfg.seeds) {
    const SeedPaths paths = seed_paths(out_dir, seed);
    if (!fs::exists(paths.manifest)) {
      results.push_back(run_one_seed(cfg, seed, /*fresh=*/true, decisions));
      continue;
    }
    CheckpointManifest m = read_manifest(paths.manifest);
    if (m.finished) {
      SeedRunResult done;
      done.seed = seed;
      done.records = read_records_csv(paths.records_csv);
      done.rounds_done = m.round;
      done.completed = m.round == cfg.rounds;
      results.push_back(std::move(done));
      continue;
    }
    results.push_back(run_one_seed(cfg, seed, /*fresh=*/false, decisions));
  }
  write_summary(cfg);
  return results;
}

}  // namespace leadq
