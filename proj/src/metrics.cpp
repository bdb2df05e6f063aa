#include "leadq/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "leadq/errors.hpp"

namespace leadq {

double accuracy(const MlpSpec& spec, const ParamVector& params,
                const Dataset& data) {
  if (data.empty()) throw DataError("accuracy over an empty dataset");
  size_t hits = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    std::vector<double> logits = forward_mlp(spec, params, data.features(i));
    int best = 0;
    for (int c = 1; c < static_cast<int>(logits.size()); ++c) {
      if (logits[static_cast<size_t>(c)] > logits[static_cast<size_t>(best)]) {
        best = c;
      }
    }
    if (best == data.label(i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q,
                     double eps_smooth) {
  if (p.size() != q.size() || p.empty()) {
    throw DataError("kl_divergence: class count mismatch");
  }
  auto smooth = [&](const std::vector<double>& h) {
    double total = 0.0;
    for (double v : h) {
      if (v < 0.0) throw NumericError("kl_divergence: negative histogram bin");
      total += v;
    }
    std::vector<double> out(h.size());
    if (total <= 0.0 && eps_smooth <= 0.0) {
      throw NumericError("kl_divergence: empty histogram without smoothing");
    }
    double denom = total + eps_smooth * static_cast<double>(h.size());
    for (size_t i = 0; i < h.size(); ++i) {
      double base = total > 0.0 ? h[i] : 0.0;
      out[i] = (base + eps_smooth) / denom;
    }
    return out;
  };
  std::vector<double> ps = smooth(p);
  std::vector<double> qs = smooth(q);
  double kl = 0.0;
  for (size_t i = 0; i < ps.size(); ++i) {
    if (ps[i] > 0.0) kl += ps[i] * std::log(ps[i] / qs[i]);
  }
  return kl;
}

std::vector<double> label_histogram(const LabelOracle& oracle,
                                    const std::vector<int>& indices,
                                    int n_classes) {
  if (indices.empty()) throw DataError("label_histogram: no samples");
  std::vector<double> h(static_cast<size_t>(n_classes), 0.0);
  for (int idx : indices) {
    int y = oracle.revealed_label(idx);
    if (y < 0 || y >= n_classes) throw DataError("label outside class count");
    h[static_cast<size_t>(y)] += 1.0;
  }
  for (auto& v : h) v /= static_cast<double>(indices.size());
  return h;
}

std::vector<double> dataset_label_histogram(const Dataset& data) {
  if (data.empty()) throw DataError("label histogram of empty dataset");
  std::vector<double> h(static_cast<size_t>(data.num_classes()), 0.0);
  for (size_t i = 0; i < data.size(); ++i) {
    h[static_cast<size_t>(data.label(i))] += 1.0;
  }
  for (auto& v : h) v /= static_cast<double>(data.size());
  return h;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string records_csv_header() {
  return "round,policy,test_accuracy,heldout_accuracy,reward,kl_round,"
         "kl_cumulative,labels_total";
}

std::string record_csv_row(const RoundRecord& r) {
  std::ostringstream ss;
  ss << r.round << ',' << r.policy << ',' << fmt_double(r.test_accuracy) << ','
     << fmt_double(r.heldout_accuracy) << ',' << fmt_double(r.reward) << ','
     << fmt_double(r.kl_round) << ',' << fmt_double(r.kl_cumulative) << ','
     << r.labels_total;
  return ss.str();
}

std::string record_jsonl_row(const RoundRecord& r) {
  nlohmann::json j{{"round", r.round},
                   {"policy", r.policy},
                   {"test_accuracy", r.test_accuracy},
                   {"heldout_accuracy", r.heldout_accuracy},
                   {"reward", r.reward},
                   {"kl_round", r.kl_round},
                   {"kl_cumulative", r.kl_cumulative},
                   {"labels_total", r.labels_total},
                   {"wall_ms", r.wall_ms}};
  return j.dump();
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return out;
}

}  // namespace

std::string summary_csv(const std::vector<std::vector<RoundRecord>>& per_seed) {
  std::ostringstream ss;
  ss << "round,policy,n_seeds,test_accuracy_mean,test_accuracy_std,"
        "heldout_accuracy_mean,heldout_accuracy_std,reward_mean,reward_std,"
        "kl_round_mean,kl_round_std,kl_cumulative_mean,kl_cumulative_std\n";
  size_t max_rounds = 0;
  for (const auto& s : per_seed) max_rounds = std::max(max_rounds, s.size());
  for (size_t i = 0; i < max_rounds; ++i) {
    std::vector<double> acc, hacc, rew, klr, klc;
    int round = 0;
    std::string policy;
    for (const auto& s : per_seed) {
      if (i >= s.size()) continue;
      round = s[i].round;
      policy = s[i].policy;
      acc.push_back(s[i].test_accuracy);
      hacc.push_back(s[i].heldout_accuracy);
      rew.push_back(s[i].reward);
      klr.push_back(s[i].kl_round);
      klc.push_back(s[i].kl_cumulative);
    }
    auto a = mean_std(acc), h = mean_std(hacc), r = mean_std(rew),
         kr = mean_std(klr), kc = mean_std(klc);
    ss << round << ',' << policy << ',' << acc.size() << ','
       << fmt_double(a.mean) << ',' << fmt_double(a.std) << ','
       << fmt_double(h.mean) << ',' << fmt_double(h.std) << ','
       << fmt_double(r.mean) << ',' << fmt_double(r.std) << ','
       << fmt_double(kr.mean) << ',' << fmt_double(kr.std) << ','
       << fmt_double(kc.mean) << ',' << fmt_double(kc.std) << '\n';
  }
  return ss.str();
}

}  // namespace leadq
