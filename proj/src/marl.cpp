#include "leadq/marl.hpp"

#include <algorithm>
#include <cmath>

#include "leadq/errors.hpp"
#include "leadq/metrics.hpp"

namespace leadq {

LayoutPtr AgentNetSpec::make_layout() const {
  if (n_u < 1 || n_classes < 2 || hidden < 1) {
    throw ConfigError("agent net needs positive widths");
  }
  auto layout = std::make_shared<ParamLayout>();
  gru().add_segments(*layout, "gru");
  layout->add("head.W", n_u, hidden);
  layout->add("head.b", n_u, 1);
  return layout;
}

void AgentNetSpec::init(ParamVector& params, DetRng& rng) const {
  gru().init(params, "gru", rng);
  init_segment_uniform(params, "head.W", hidden, rng);
  init_segment_uniform(params, "head.b", hidden, rng);
}

LayoutPtr MixerSpec::make_layout() const {
  if (n_agents < 1 || state_dim < 1 || hidden < 1) {
    throw ConfigError("mixer needs positive widths");
  }
  auto layout = std::make_shared<ParamLayout>();
  layout->add("w1_hyper.W", n_agents * hidden, state_dim);
  layout->add("w1_hyper.b", n_agents * hidden, 1);
  layout->add("b1_hyper.W", hidden, state_dim);
  layout->add("b1_hyper.b", hidden, 1);
  layout->add("w2_hyper.W", hidden, state_dim);
  layout->add("w2_hyper.b", hidden, 1);
  layout->add("b2_hyper.W", 1, state_dim);
  layout->add("b2_hyper.b", 1, 1);
  return layout;
}

void MixerSpec::init(ParamVector& params, DetRng& rng) const {
  for (const char* name :
       {"w1_hyper.W", "w1_hyper.b", "b1_hyper.W", "b1_hyper.b", "w2_hyper.W",
        "w2_hyper.b", "b2_hyper.W", "b2_hyper.b"}) {
    init_segment_uniform(params, name, state_dim, rng);
  }
}

std::vector<double> compute_state(const MlpSpec& spec,
                                  const ParamVector& theta,
                                  const Dataset& held) {
  if (held.empty()) throw ConfigError("state needs a non-empty held-out set");
  std::vector<double> s(held.size());
  for (size_t i = 0; i < held.size(); ++i) {
    std::vector<double> p = softmax(forward_mlp(spec, theta, held.features(i)));
    s[i] = *std::max_element(p.begin(), p.end());
  }
  return s;
}

std::vector<std::vector<double>> prediction_rows(
    const MlpSpec& spec, const ParamVector& theta, const Dataset& data,
    const std::vector<int>& arrivals) {
  std::vector<std::vector<double>> rows;
  rows.reserve(arrivals.size());
  for (int idx : arrivals) {
    rows.push_back(
        softmax(forward_mlp(spec, theta, data.features(static_cast<size_t>(idx)))));
  }
  return rows;
}

std::vector<double> compute_observation(const MlpSpec& spec,
                                        const ParamVector& theta,
                                        const Dataset& data,
                                        const std::vector<int>& arrivals) {
  std::vector<double> flat;
  flat.reserve(arrivals.size() * static_cast<size_t>(spec.output_dim()));
  for (const auto& row : prediction_rows(spec, theta, data, arrivals)) {
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return flat;
}

double compute_reward(const MlpSpec& spec, const ParamVector& theta_now,
                      const ParamVector& theta_prev, const Dataset& held) {
  return accuracy(spec, theta_now, held) - accuracy(spec, theta_prev, held);
}

std::vector<double> agent_q(const AgentNetSpec& spec, const ParamVector& phi,
                            const std::vector<double>& obs,
                            const std::vector<double>& prev_mask,
                            std::vector<double>& hidden,
                            AgentStepCache* cache) {
  if (static_cast<int>(obs.size()) != spec.n_u * spec.n_classes ||
      static_cast<int>(prev_mask.size()) != spec.n_u ||
      static_cast<int>(hidden.size()) != spec.hidden) {
    throw ConfigError("agent_q: input shape mismatch");
  }
  std::vector<double> input;
  input.reserve(obs.size() + prev_mask.size());
  input.insert(input.end(), obs.begin(), obs.end());
  input.insert(input.end(), prev_mask.begin(), prev_mask.end());

  GruCellSpec gspec = spec.gru();
  GruView view = gru_view(phi, "gru");
  std::vector<double> hnew(static_cast<size_t>(spec.hidden));
  gru_step(gspec, view, input.data(), hidden.data(), hnew.data(),
           cache ? &cache->gru : nullptr);
  hidden = hnew;

  std::vector<double> q(static_cast<size_t>(spec.n_u));
  matvec(phi.seg("head.W"), spec.n_u, spec.hidden, hidden.data(), q.data());
  const double* b = phi.seg("head.b");
  for (int i = 0; i < spec.n_u; ++i) q[static_cast<size_t>(i)] += b[i];
  if (cache) cache->h_out = hidden;
  return q;
}

namespace {

// Largest-Q positions; value ties keep the lower index.
std::vector<int> greedy_positions(const std::vector<double>& q, int n_q) {
  std::vector<int> order(q.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double qa = q[static_cast<size_t>(a)];
    double qb = q[static_cast<size_t>(b)];
    if (qa != qb) return qa > qb;
    return a < b;
  });
  std::vector<int> out(order.begin(), order.begin() + n_q);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> action_mask(const std::vector<int>& positions, int n_u) {
  std::vector<double> m(static_cast<size_t>(n_u), 0.0);
  for (int p : positions) m[static_cast<size_t>(p)] = 1.0;
  return m;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::vector<int> select_action(const std::vector<double>& q, int n_q,
                               double eps, DetRng& rng) {
  if (n_q < 0 || static_cast<size_t>(n_q) > q.size()) {
    throw BudgetError("select_action: budget outside pool");
  }
  if (eps > 0.0 && rng.uniform01() < eps) {
    std::vector<int> picks =
        rng.sample_without_replacement(static_cast<int>(q.size()), n_q);
    std::sort(picks.begin(), picks.end());
    return picks;
  }
  return greedy_positions(q, n_q);
}

double mix(const MixerSpec& spec, const ParamVector& psi,
           const std::vector<double>& q, const std::vector<double>& s,
           MixCache* cache) {
  int k = spec.n_agents;
  int h = spec.hidden;
  int sd = spec.state_dim;
  if (static_cast<int>(q.size()) != k || static_cast<int>(s.size()) != sd) {
    throw ConfigError("mix: input shape mismatch");
  }
  std::vector<double> w1raw(static_cast<size_t>(k) * h);
  matvec(psi.seg("w1_hyper.W"), k * h, sd, s.data(), w1raw.data());
  {
    const double* b = psi.seg("w1_hyper.b");
    for (int i = 0; i < k * h; ++i) w1raw[static_cast<size_t>(i)] += b[i];
  }
  std::vector<double> b1(static_cast<size_t>(h));
  matvec(psi.seg("b1_hyper.W"), h, sd, s.data(), b1.data());
  {
    const double* b = psi.seg("b1_hyper.b");
    for (int i = 0; i < h; ++i) b1[static_cast<size_t>(i)] += b[i];
  }
  std::vector<double> t(static_cast<size_t>(h));
  for (int j = 0; j < h; ++j) {
    double acc = b1[static_cast<size_t>(j)];
    for (int a = 0; a < k; ++a) {
      acc += std::abs(w1raw[static_cast<size_t>(a) * h + j]) *
             q[static_cast<size_t>(a)];
    }
    t[static_cast<size_t>(j)] = acc;
  }
  std::vector<double> e(static_cast<size_t>(h));
  for (int j = 0; j < h; ++j) {
    double v = t[static_cast<size_t>(j)];
    e[static_cast<size_t>(j)] = v > 0.0 ? v : std::exp(v) - 1.0;
  }
  std::vector<double> w2raw(static_cast<size_t>(h));
  matvec(psi.seg("w2_hyper.W"), h, sd, s.data(), w2raw.data());
  {
    const double* b = psi.seg("w2_hyper.b");
    for (int i = 0; i < h; ++i) w2raw[static_cast<size_t>(i)] += b[i];
  }
  double b2 = psi.seg("b2_hyper.b")[0];
  {
    const double* w = psi.seg("b2_hyper.W");
    for (int j = 0; j < sd; ++j) b2 += w[j] * s[static_cast<size_t>(j)];
  }
  double out = b2;
  for (int j = 0; j < h; ++j) {
    out += std::abs(w2raw[static_cast<size_t>(j)]) * e[static_cast<size_t>(j)];
  }
  if (cache) {
    cache->s = s;
    cache->q = q;
    cache->w1raw = std::move(w1raw);
    cache->b1 = std::move(b1);
    cache->t = std::move(t);
    cache->e = std::move(e);
    cache->w2raw = std::move(w2raw);
    cache->b2 = b2;
  }
  return out;
}

void mix_backward(const MixerSpec& spec, const MixCache& cache, double dq_tot,
                  ParamVector& grad, std::vector<double>& dq) {
  int k = spec.n_agents;
  int h = spec.hidden;
  int sd = spec.state_dim;
  dq.assign(static_cast<size_t>(k), 0.0);

  grad.seg("b2_hyper.b")[0] += dq_tot;
  {
    double* gw = grad.seg("b2_hyper.W");
    for (int j = 0; j < sd; ++j) gw[j] += dq_tot * cache.s[static_cast<size_t>(j)];
  }
  double* gw2w = grad.seg("w2_hyper.W");
  double* gw2b = grad.seg("w2_hyper.b");
  double* gb1w = grad.seg("b1_hyper.W");
  double* gb1b = grad.seg("b1_hyper.b");
  double* gw1w = grad.seg("w1_hyper.W");
  double* gw1b = grad.seg("w1_hyper.b");

  for (int j = 0; j < h; ++j) {
    double w2j = cache.w2raw[static_cast<size_t>(j)];
    double de = dq_tot * std::abs(w2j);
    double dw2raw = dq_tot * cache.e[static_cast<size_t>(j)] * sign(w2j);
    gw2b[j] += dw2raw;
    for (int c = 0; c < sd; ++c) {
      gw2w[static_cast<size_t>(j) * sd + c] +=
          dw2raw * cache.s[static_cast<size_t>(c)];
    }
    double tj = cache.t[static_cast<size_t>(j)];
    double dt = de * (tj > 0.0 ? 1.0 : std::exp(tj));
    gb1b[j] += dt;
    for (int c = 0; c < sd; ++c) {
      gb1w[static_cast<size_t>(j) * sd + c] +=
          dt * cache.s[static_cast<size_t>(c)];
    }
    for (int a = 0; a < k; ++a) {
      double w1aj = cache.w1raw[static_cast<size_t>(a) * h + j];
      dq[static_cast<size_t>(a)] += std::abs(w1aj) * dt;
      double dw1raw = dt * cache.q[static_cast<size_t>(a)] * sign(w1aj);
      size_t row = static_cast<size_t>(a) * h + static_cast<size_t>(j);
      gw1b[row] += dw1raw;
      for (int c = 0; c < sd; ++c) {
        gw1w[row * sd + c] += dw1raw * cache.s[static_cast<size_t>(c)];
      }
    }
  }
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(EpisodeRecord ep) {
  if (static_cast<int>(store_.size()) < capacity_) {
    store_.push_back(std::move(ep));
    if (static_cast<int>(store_.size()) == capacity_) next_slot_ = 0;
  } else {
    store_[next_slot_] = std::move(ep);
    next_slot_ = (next_slot_ + 1) % static_cast<size_t>(capacity_);
  }
}

long ReplayBuffer::total_transitions() const {
  long n = 0;
  for (const auto& e : store_) n += e.length;
  return n;
}

void ReplayBuffer::restore(std::vector<EpisodeRecord> eps, size_t next_slot) {
  if (static_cast<int>(eps.size()) > capacity_) {
    throw CheckpointError("replay restore exceeds capacity");
  }
  store_ = std::move(eps);
  next_slot_ = next_slot;
}

namespace {

struct EpisodeForward {
  // [j][k] per-step online caches and Q rows.
  std::vector<std::vector<AgentStepCache>> caches;
  std::vector<std::vector<std::vector<double>>> q;
};

EpisodeForward forward_episode(const AgentNetSpec& aspec,
                               const ParamVector& phi, const EpisodeRecord& ep,
                               int n_agents, bool keep_caches) {
  EpisodeForward out;
  int j_len = ep.length;
  out.q.resize(static_cast<size_t>(j_len));
  if (keep_caches) out.caches.resize(static_cast<size_t>(j_len));
  std::vector<std::vector<double>> hidden(
      static_cast<size_t>(n_agents),
      std::vector<double>(static_cast<size_t>(aspec.hidden), 0.0));
  std::vector<std::vector<double>> prev(
      static_cast<size_t>(n_agents),
      std::vector<double>(static_cast<size_t>(aspec.n_u), 0.0));
  for (int j = 0; j < j_len; ++j) {
    out.q[static_cast<size_t>(j)].resize(static_cast<size_t>(n_agents));
    if (keep_caches) {
      out.caches[static_cast<size_t>(j)].resize(static_cast<size_t>(n_agents));
    }
    for (int k = 0; k < n_agents; ++k) {
      AgentStepCache* cache =
          keep_caches ? &out.caches[static_cast<size_t>(j)][static_cast<size_t>(k)]
                      : nullptr;
      out.q[static_cast<size_t>(j)][static_cast<size_t>(k)] =
          agent_q(aspec, phi, ep.obs[static_cast<size_t>(j)][static_cast<size_t>(k)],
                  prev[static_cast<size_t>(k)], hidden[static_cast<size_t>(k)],
                  cache);
      prev[static_cast<size_t>(k)] = action_mask(
          ep.actions[static_cast<size_t>(j)][static_cast<size_t>(k)], aspec.n_u);
    }
  }
  return out;
}

double sum_at(const std::vector<double>& q, const std::vector<int>& positions) {
  double acc = 0.0;
  for (int p : positions) acc += q[static_cast<size_t>(p)];
  return acc;
}

}  // namespace

TdResult td_loss(const AgentNetSpec& aspec, const MixerSpec& mspec,
                 const ParamVector& phi, const ParamVector& psi,
                 const ParamVector& phi_target, const ParamVector& psi_target,
                 const std::vector<const EpisodeRecord*>& batch, double gamma,
                 int n_q) {
  if (batch.empty()) throw DataError("td_loss: empty batch");
  TdResult res;
  res.dphi = ParamVector(phi.layout());
  res.dpsi = ParamVector(psi.layout());
  long total_terms = 0;
  for (const EpisodeRecord* ep : batch) total_terms += ep->length;
  double inv = 1.0 / static_cast<double>(total_terms);

  GruCellSpec gspec = aspec.gru();
  GruView view = gru_view(phi, "gru");
  int n_agents = mspec.n_agents;

  for (const EpisodeRecord* ep : batch) {
    int j_len = ep->length;
    EpisodeForward online = forward_episode(aspec, phi, *ep, n_agents, true);
    EpisodeForward target = forward_episode(aspec, phi_target, *ep, n_agents, false);

    std::vector<MixCache> mix_caches(static_cast<size_t>(j_len));
    std::vector<double> err(static_cast<size_t>(j_len));
    for (int j = 0; j < j_len; ++j) {
      std::vector<double> q_sel(static_cast<size_t>(n_agents));
      for (int k = 0; k < n_agents; ++k) {
        q_sel[static_cast<size_t>(k)] =
            sum_at(online.q[static_cast<size_t>(j)][static_cast<size_t>(k)],
                   ep->actions[static_cast<size_t>(j)][static_cast<size_t>(k)]);
      }
      double q_tot = mix(mspec, psi, q_sel, ep->states[static_cast<size_t>(j)],
                         &mix_caches[static_cast<size_t>(j)]);
      double y;
      if (j == j_len - 1) {
        y = ep->rewards[static_cast<size_t>(j)];
      } else {
        // Double-Q: online nets choose the next action, targets price it.
        std::vector<double> q_next(static_cast<size_t>(n_agents));
        for (int k = 0; k < n_agents; ++k) {
          std::vector<int> pick = greedy_positions(
              online.q[static_cast<size_t>(j) + 1][static_cast<size_t>(k)], n_q);
          q_next[static_cast<size_t>(k)] = sum_at(
              target.q[static_cast<size_t>(j) + 1][static_cast<size_t>(k)], pick);
        }
        double q_tot_next = mix(mspec, psi_target, q_next,
                                ep->states[static_cast<size_t>(j) + 1]);
        y = ep->rewards[static_cast<size_t>(j)] + gamma * q_tot_next;
      }
      err[static_cast<size_t>(j)] = q_tot - y;
      res.loss += err[static_cast<size_t>(j)] * err[static_cast<size_t>(j)];
    }

    // BPTT: roll gradients from the last step back to the first.
    GruViewMut gru_grads = gru_view_mut(res.dphi, "gru");
    double* ghead_w = res.dphi.seg("head.W");
    double* ghead_b = res.dphi.seg("head.b");
    std::vector<std::vector<double>> dhidden(
        static_cast<size_t>(n_agents),
        std::vector<double>(static_cast<size_t>(aspec.hidden), 0.0));
    std::vector<double> dq_sel;
    std::vector<double> dx(static_cast<size_t>(aspec.input_dim()));
    std::vector<double> dhprev(static_cast<size_t>(aspec.hidden));
    for (int j = j_len - 1; j >= 0; --j) {
      double d_tot = 2.0 * err[static_cast<size_t>(j)] * inv;
      mix_backward(mspec, mix_caches[static_cast<size_t>(j)], d_tot,
                   res.dpsi, dq_sel);
      for (int k = 0; k < n_agents; ++k) {
        const AgentStepCache& cache =
            online.caches[static_cast<size_t>(j)][static_cast<size_t>(k)];
        // Head backward: selected positions carry the mixer gradient.
        std::vector<double>& dh = dhidden[static_cast<size_t>(k)];
        for (int p :
             ep->actions[static_cast<size_t>(j)][static_cast<size_t>(k)]) {
          double dqp = dq_sel[static_cast<size_t>(k)];
          const double* w_row =
              phi.seg("head.W") + static_cast<size_t>(p) * aspec.hidden;
          double* gw_row = ghead_w + static_cast<size_t>(p) * aspec.hidden;
          for (int c = 0; c < aspec.hidden; ++c) {
            gw_row[c] += dqp * cache.h_out[static_cast<size_t>(c)];
            dh[static_cast<size_t>(c)] += dqp * w_row[c];
          }
          ghead_b[p] += dqp;
        }
        gru_backward(gspec, view, cache.gru, dh.data(), gru_grads, dx.data(),
                     dhprev.data());
        dh = dhprev;
      }
    }
  }
  res.loss *= inv;
  return res;
}

MarlLearner::MarlLearner(AgentNetSpec aspec, MixerSpec mspec, MarlConfig cfg,
                         int n_q, uint64_t seed)
    : aspec_(aspec), mspec_(mspec), cfg_(cfg), n_q_(n_q), seed_(seed),
      buffer_(cfg.buffer_capacity) {
  phi_ = ParamVector(aspec_.make_layout());
  psi_ = ParamVector(mspec_.make_layout());
  DetRng arng = rng_for(seed_, "agent_init");
  aspec_.init(phi_, arng);
  DetRng mrng = rng_for(seed_, "mixer_init");
  mspec_.init(psi_, mrng);
  phi_target_ = phi_;
  psi_target_ = psi_;
  phi_opt_ = OptimizerState::make_adam(cfg_.lr, phi_.layout());
  psi_opt_ = OptimizerState::make_adam(cfg_.lr, psi_.layout());
  hidden_.assign(static_cast<size_t>(mspec_.n_agents),
                 std::vector<double>(static_cast<size_t>(aspec_.hidden), 0.0));
  prev_action_.assign(static_cast<size_t>(mspec_.n_agents),
                      std::vector<double>(static_cast<size_t>(aspec_.n_u), 0.0));
}

void MarlLearner::reset_episode_state() {
  for (auto& h : hidden_) std::fill(h.begin(), h.end(), 0.0);
  for (auto& a : prev_action_) std::fill(a.begin(), a.end(), 0.0);
}

std::vector<double> MarlLearner::step_agent(int k,
                                            const std::vector<double>& obs) {
  return agent_q(aspec_, phi_, obs, prev_action_[static_cast<size_t>(k)],
                 hidden_[static_cast<size_t>(k)]);
}

void MarlLearner::commit_action(int k, const std::vector<int>& positions) {
  prev_action_[static_cast<size_t>(k)] = action_mask(positions, aspec_.n_u);
}

double MarlLearner::epsilon(int env_timestep) const {
  if (!cfg_.exploration) return 0.0;
  int decay = std::max(1, cfg_.eps_decay_rounds);
  double frac = std::min(1.0, static_cast<double>(env_timestep) / decay);
  return cfg_.eps_start - (cfg_.eps_start - cfg_.eps_end) * frac;
}

void MarlLearner::store_transition(
    const std::vector<double>& state,
    const std::vector<std::vector<double>>& obs,
    const std::vector<std::vector<int>>& actions, double reward,
    const std::vector<double>& next_state, bool terminal) {
  partial_.states.push_back(state);
  partial_.obs.push_back(obs);
  partial_.actions.push_back(actions);
  partial_.rewards.push_back(reward);
  partial_.final_state = next_state;
  partial_.length += 1;
  if (terminal) {
    buffer_.push(std::move(partial_));
    partial_ = EpisodeRecord{};
  }
}

bool MarlLearner::ready_to_train() const {
  // Resampling a near-empty buffer would hammer one episode; wait until a
  // batch of distinct episodes exists.
  return buffer_.size() >= static_cast<size_t>(cfg_.batch_size);
}

std::vector<double> MarlLearner::train(int round) {
  std::vector<double> losses;
  if (!ready_to_train()) return losses;
  for (int step = 0; step < cfg_.max_update_steps; ++step) {
    DetRng rng = rng_for(seed_, "replay", static_cast<uint64_t>(round),
                         static_cast<uint64_t>(step));
    std::vector<const EpisodeRecord*> batch;
    batch.reserve(static_cast<size_t>(cfg_.batch_size));
    for (int b = 0; b < cfg_.batch_size; ++b) {
      size_t pick = static_cast<size_t>(
          rng.uniform_int(static_cast<uint64_t>(buffer_.size())));
      batch.push_back(&buffer_.episode(pick));
    }
    TdResult td = td_loss(aspec_, mspec_, phi_, psi_, phi_target_, psi_target_,
                          batch, cfg_.gamma, n_q_);
    optimizer_step(phi_opt_, phi_, td.dphi);
    optimizer_step(psi_opt_, psi_, td.dpsi);
    update_count_ += 1;
    if (cfg_.target_update_period > 0 &&
        update_count_ % cfg_.target_update_period == 0) {
      phi_target_ = phi_;
      psi_target_ = psi_;
    }
    losses.push_back(td.loss);
  }
  return losses;
}

void MarlLearner::set_execution_state(
    std::vector<std::vector<double>> hiddens,
    std::vector<std::vector<double>> prev_actions) {
  hidden_ = std::move(hiddens);
  prev_action_ = std::move(prev_actions);
}

void MarlLearner::set_partial_episode(EpisodeRecord ep) {
  partial_ = std::move(ep);
}

}  // namespace leadq
