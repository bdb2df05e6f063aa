#pragma once

#include <cstdint>
#include <vector>

#include "leadq/data.hpp"
#include "leadq/nn.hpp"
#include "leadq/optimizer.hpp"
#include "leadq/rng.hpp"

namespace leadq {

struct MarlConfig {
  double gamma = 0.99;
  int episode_length = 10;  // J querying rounds per stored episode
  int buffer_capacity = 1000;
  int warmup_timesteps = 32;
  int batch_size = 32;  // episodes per update step
  double lr = 0.01;
  int max_update_steps = 200;
  int update_frequency = 1;       // rounds between training triggers
  int target_update_period = 100; // update steps between hard target copies
  double eps_start = 1.0;
  double eps_end = 0.05;
  int eps_decay_rounds = 0;  // 0 resolves to rounds/5 at run start
  int agent_hidden = 64;
  int mixer_hidden = 32;
  bool exploration = true;
};

// Shared recurrent agent: GRU over (flattened observation || previous action
// mask), linear head emitting one Q per arrival.
struct AgentNetSpec {
  int n_u = 0;
  int n_classes = 0;
  int hidden = 0;

  int input_dim() const { return n_u * n_classes + n_u; }
  GruCellSpec gru() const { return GruCellSpec{input_dim(), hidden}; }
  LayoutPtr make_layout() const;
  void init(ParamVector& params, DetRng& rng) const;
};

// Monotone mixer: hypernetworks conditioned on the global state generate
// absolute-valued mixing weights; biases stay unconstrained.
struct MixerSpec {
  int n_agents = 0;
  int state_dim = 0;
  int hidden = 0;

  LayoutPtr make_layout() const;
  void init(ParamVector& params, DetRng& rng) const;
};

std::vector<double> compute_state(const MlpSpec& spec,
                                  const ParamVector& theta,
                                  const Dataset& held);

// Flattened n_u x classes softmax rows in arrival order.
std::vector<double> compute_observation(const MlpSpec& spec,
                                        const ParamVector& theta,
                                        const Dataset& data,
                                        const std::vector<int>& arrivals);

// Per-arrival softmax rows (shared by the confidence-scored policies).
std::vector<std::vector<double>> prediction_rows(const MlpSpec& spec,
                                                 const ParamVector& theta,
                                                 const Dataset& data,
                                                 const std::vector<int>& arrivals);

double compute_reward(const MlpSpec& spec, const ParamVector& theta_now,
                      const ParamVector& theta_prev, const Dataset& held);

struct AgentStepCache {
  GruCache gru;
  std::vector<double> h_out;
};

// One recurrent step: consumes obs and the previous action mask, updates
// hidden in place, returns the head's per-arrival Q-values.
std::vector<double> agent_q(const AgentNetSpec& spec, const ParamVector& phi,
                            const std::vector<double>& obs,
                            const std::vector<double>& prev_mask,
                            std::vector<double>& hidden,
                            AgentStepCache* cache = nullptr);

// Epsilon-greedy over n_q-subsets: greedy takes the n_q largest Q entries
// (ties to the lowest index), exploration takes a uniform subset.
std::vector<int> select_action(const std::vector<double>& q, int n_q,
                               double eps, DetRng& rng);

struct MixCache {
  std::vector<double> s, q, w1raw, b1, t, e, w2raw;
  double b2 = 0.0;
};

double mix(const MixerSpec& spec, const ParamVector& psi,
           const std::vector<double>& q, const std::vector<double>& s,
           MixCache* cache = nullptr);

// Accumulates d(loss)/d(psi) and fills dq given d(loss)/dQ_tot. The cache
// carries everything the backward pass needs.
void mix_backward(const MixerSpec& spec, const MixCache& cache, double dq_tot,
                  ParamVector& grad, std::vector<double>& dq);

// One stored episode: J transitions of a contiguous querying-round window.
// s'_j is states[j+1]; the terminal transition's successor state is
// final_state and its successor observation is never used.
struct EpisodeRecord {
  int length = 0;
  std::vector<std::vector<double>> states;             // J x state_dim
  std::vector<double> final_state;                     // state_dim
  std::vector<std::vector<std::vector<double>>> obs;   // J x K x obs_dim
  std::vector<std::vector<std::vector<int>>> actions;  // J x K x n_q
  std::vector<double> rewards;                         // J
};

// Ring of complete episodes; partial episodes never enter.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);

  void push(EpisodeRecord ep);
  size_t size() const { return store_.size(); }
  long total_transitions() const;
  const EpisodeRecord& episode(size_t i) const { return store_[i]; }
  int capacity() const { return capacity_; }
  size_t next_slot() const { return next_slot_; }
  void restore(std::vector<EpisodeRecord> eps, size_t next_slot);

 private:
  int capacity_ = 0;
  std::vector<EpisodeRecord> store_;
  size_t next_slot_ = 0;
};

struct TdResult {
  double loss = 0.0;
  ParamVector dphi;
  ParamVector dpsi;
};

// Double-Q TD over whole episodes with BPTT: action selection at the next
// step by the online agents, evaluation by the targets; terminal targets are
// the bare reward. Mean squared error over batch * episode_length terms.
TdResult td_loss(const AgentNetSpec& aspec, const MixerSpec& mspec,
                 const ParamVector& phi, const ParamVector& psi,
                 const ParamVector& phi_target, const ParamVector& psi_target,
                 const std::vector<const EpisodeRecord*>& batch, double gamma,
                 int n_q);

// Execution + training state for the learned querying policy.
class MarlLearner {
 public:
  MarlLearner(AgentNetSpec aspec, MixerSpec mspec, MarlConfig cfg, int n_q,
              uint64_t seed);

  const AgentNetSpec& agent_spec() const { return aspec_; }
  const MixerSpec& mixer_spec() const { return mspec_; }
  const MarlConfig& config() const { return cfg_; }

  // Zeroes hiddens and previous actions; call at each episode boundary.
  void reset_episode_state();

  // Recurrent advance for client k; returns per-arrival Q-values.
  std::vector<double> step_agent(int k, const std::vector<double>& obs);
  // Records the executed action as client k's next previous-action input.
  void commit_action(int k, const std::vector<int>& positions);

  double epsilon(int env_timestep) const;

  // Appends a transition to the episode under assembly; a full episode moves
  // into the replay buffer and resets the assembly.
  void store_transition(const std::vector<double>& state,
                        const std::vector<std::vector<double>>& obs,
                        const std::vector<std::vector<int>>& actions,
                        double reward, const std::vector<double>& next_state,
                        bool terminal);

  bool ready_to_train() const;
  // Up to max_update_steps Adam steps on uniformly resampled episode
  // batches; returns the per-step losses (empty when the gate fails).
  std::vector<double> train(int round);

  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  ParamVector& phi() { return phi_; }
  ParamVector& psi() { return psi_; }
  ParamVector& phi_target() { return phi_target_; }
  ParamVector& psi_target() { return psi_target_; }
  OptimizerState& phi_opt() { return phi_opt_; }
  OptimizerState& psi_opt() { return psi_opt_; }
  long update_count() const { return update_count_; }
  void set_update_count(long c) { update_count_ = c; }

  const std::vector<std::vector<double>>& hiddens() const { return hidden_; }
  const std::vector<std::vector<double>>& prev_actions() const {
    return prev_action_;
  }
  void set_execution_state(std::vector<std::vector<double>> hiddens,
                           std::vector<std::vector<double>> prev_actions);
  const EpisodeRecord& partial_episode() const { return partial_; }
  void set_partial_episode(EpisodeRecord ep);

 private:
  AgentNetSpec aspec_;
  MixerSpec mspec_;
  MarlConfig cfg_;
  int n_q_ = 1;
  uint64_t seed_ = 0;
  ParamVector phi_, psi_, phi_target_, psi_target_;
  OptimizerState phi_opt_, psi_opt_;
  long update_count_ = 0;
  ReplayBuffer buffer_;
  EpisodeRecord partial_;
  std::vector<std::vector<double>> hidden_;       // K x agent hidden
  std::vector<std::vector<double>> prev_action_;  // K x n_u masks
};

}  // namespace leadq
