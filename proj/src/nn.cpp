#include "leadq/nn.hpp"

#include <algorithm>
#include <cmath>

#include "leadq/errors.hpp"

namespace leadq {

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    default: return "identity";
  }
}

LayoutPtr MlpSpec::make_layout() const {
  if (widths.size() < 2) {
    throw ConfigError("mlp needs at least input and output widths");
  }
  for (int w : widths) {
    if (w < 1) throw ConfigError("mlp widths must be positive");
  }
  auto layout = std::make_shared<ParamLayout>();
  for (int l = 0; l < num_layers(); ++l) {
    layout->add("W" + std::to_string(l), widths[l + 1], widths[l]);
    layout->add("b" + std::to_string(l), widths[l + 1], 1);
  }
  return layout;
}

void init_segment_uniform(ParamVector& params, const std::string& name,
                          int fan_in, DetRng& rng) {
  const Segment& s = params.layout()->segment(name);
  double bound = std::sqrt(1.0 / fan_in);
  double* p = params.data() + s.offset;
  for (size_t i = 0; i < s.size(); ++i) p[i] = rng.uniform(-bound, bound);
}

void init_mlp(const MlpSpec& spec, ParamVector& params, DetRng& rng) {
  for (int l = 0; l < spec.num_layers(); ++l) {
    init_segment_uniform(params, "W" + std::to_string(l), spec.widths[l], rng);
    init_segment_uniform(params, "b" + std::to_string(l), spec.widths[l], rng);
  }
}

void matvec(const double* w, int rows, int cols, const double* x, double* y) {
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* wi = w + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) acc += wi[j] * x[j];
    y[i] = acc;
  }
}

void matvec_t_accum(const double* w, int rows, int cols, const double* d,
                    double* y) {
  for (int i = 0; i < rows; ++i) {
    const double* wi = w + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) y[j] += wi[j] * d[i];
  }
}

namespace {

double apply_act(Activation a, double v) {
  switch (a) {
    case Activation::relu: return v > 0.0 ? v : 0.0;
    case Activation::tanh: return std::tanh(v);
    default: return v;
  }
}

// Derivative from the preactivation and the activation value.
double act_deriv(Activation a, double pre, double post) {
  switch (a) {
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - post * post;
    default: return 1.0;
  }
}

}  // namespace

std::vector<double> forward_mlp(const MlpSpec& spec, const ParamVector& params,
                                const double* x, MlpCache* cache) {
  int layers = spec.num_layers();
  std::vector<double> cur(x, x + spec.input_dim());
  if (cache) {
    cache->act.assign(1, cur);
    cache->pre.clear();
  }
  for (int l = 0; l < layers; ++l) {
    int in = spec.widths[l];
    int out = spec.widths[l + 1];
    std::vector<double> pre(out);
    matvec(params.seg("W" + std::to_string(l)), out, in, cur.data(),
           pre.data());
    const double* b = params.seg("b" + std::to_string(l));
    for (int i = 0; i < out; ++i) pre[i] += b[i];
    std::vector<double> post(out);
    bool last = (l == layers - 1);
    for (int i = 0; i < out; ++i) {
      post[i] = last ? pre[i] : apply_act(spec.activation, pre[i]);
    }
    if (cache) {
      cache->pre.push_back(pre);
      cache->act.push_back(post);
    }
    cur = std::move(post);
  }
  return cur;
}

std::vector<std::vector<double>> forward_mlp_batch(
    const MlpSpec& spec, const ParamVector& params,
    const std::vector<const double*>& rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const double* r : rows) out.push_back(forward_mlp(spec, params, r));
  return out;
}

void mlp_backward(const MlpSpec& spec, const ParamVector& params,
                  const MlpCache& cache, const std::vector<double>& dlogits,
                  ParamVector& grad, std::vector<double>* dinput) {
  int layers = spec.num_layers();
  if (static_cast<int>(dlogits.size()) != spec.output_dim()) {
    throw ConfigError("mlp_backward: dlogits width mismatch");
  }
  std::vector<double> d = dlogits;
  for (int l = layers - 1; l >= 0; --l) {
    int in = spec.widths[l];
    int out = spec.widths[l + 1];
    if (l != layers - 1) {
      for (int i = 0; i < out; ++i) {
        d[i] *= act_deriv(spec.activation, cache.pre[l][i], cache.act[l + 1][i]);
      }
    }
    double* gw = grad.seg("W" + std::to_string(l));
    double* gb = grad.seg("b" + std::to_string(l));
    const std::vector<double>& h = cache.act[l];
    for (int i = 0; i < out; ++i) {
      double* gwi = gw + static_cast<size_t>(i) * in;
      for (int j = 0; j < in; ++j) gwi[j] += d[i] * h[j];
      gb[i] += d[i];
    }
    if (l > 0 || dinput) {
      std::vector<double> dn(in, 0.0);
      matvec_t_accum(params.seg("W" + std::to_string(l)), out, in, d.data(),
                     dn.data());
      if (l == 0 && dinput) *dinput = dn;
      d = std::move(dn);
    }
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

namespace {

double log_sum_exp(const std::vector<double>& v) {
  double mx = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

}  // namespace

double cross_entropy_loss(const std::vector<std::vector<double>>& logits,
                          const std::vector<int>& labels) {
  if (logits.empty() || logits.size() != labels.size()) {
    throw DataError("cross_entropy_loss: batch size mismatch");
  }
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    int y = labels[i];
    if (y < 0 || y >= static_cast<int>(logits[i].size())) {
      throw DataError("cross_entropy_loss: label out of range");
    }
    total += log_sum_exp(logits[i]) - logits[i][static_cast<size_t>(y)];
  }
  return total / static_cast<double>(logits.size());
}

ParamVector mlp_loss_grad(const MlpSpec& spec, const ParamVector& params,
                          const std::vector<const double*>& rows,
                          const std::vector<int>& labels, double* loss_out) {
  if (rows.empty() || rows.size() != labels.size()) {
    throw DataError("mlp_loss_grad: batch size mismatch");
  }
  ParamVector grad(params.layout());
  double inv_n = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  MlpCache cache;
  for (size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> logits = forward_mlp(spec, params, rows[i], &cache);
    int y = labels[i];
    if (y < 0 || y >= spec.output_dim()) {
      throw DataError("mlp_loss_grad: label out of range");
    }
    loss += log_sum_exp(logits) - logits[static_cast<size_t>(y)];
    // d(mean CE)/d(logit) = (softmax - onehot) / n.
    std::vector<double> d = softmax(logits);
    d[static_cast<size_t>(y)] -= 1.0;
    for (auto& v : d) v *= inv_n;
    mlp_backward(spec, params, cache, d, grad);
  }
  if (loss_out) *loss_out = loss * inv_n;
  return grad;
}

void GruCellSpec::add_segments(ParamLayout& layout,
                               const std::string& prefix) const {
  layout.add(prefix + ".Wz", hidden_dim, input_dim);
  layout.add(prefix + ".Uz", hidden_dim, hidden_dim);
  layout.add(prefix + ".bz", hidden_dim, 1);
  layout.add(prefix + ".Wr", hidden_dim, input_dim);
  layout.add(prefix + ".Ur", hidden_dim, hidden_dim);
  layout.add(prefix + ".br", hidden_dim, 1);
  layout.add(prefix + ".Wn", hidden_dim, input_dim);
  layout.add(prefix + ".Un", hidden_dim, hidden_dim);
  layout.add(prefix + ".bn", hidden_dim, 1);
}

void GruCellSpec::init(ParamVector& params, const std::string& prefix,
                       DetRng& rng) const {
  for (const char* g : {"z", "r", "n"}) {
    init_segment_uniform(params, prefix + ".W" + g, input_dim, rng);
    init_segment_uniform(params, prefix + ".U" + g, hidden_dim, rng);
    init_segment_uniform(params, prefix + ".b" + g, input_dim, rng);
  }
}

GruView gru_view(const ParamVector& params, const std::string& prefix) {
  return GruView{params.seg(prefix + ".Wz"), params.seg(prefix + ".Uz"),
                 params.seg(prefix + ".bz"), params.seg(prefix + ".Wr"),
                 params.seg(prefix + ".Ur"), params.seg(prefix + ".br"),
                 params.seg(prefix + ".Wn"), params.seg(prefix + ".Un"),
                 params.seg(prefix + ".bn")};
}

GruViewMut gru_view_mut(ParamVector& params, const std::string& prefix) {
  return GruViewMut{params.seg(prefix + ".Wz"), params.seg(prefix + ".Uz"),
                    params.seg(prefix + ".bz"), params.seg(prefix + ".Wr"),
                    params.seg(prefix + ".Ur"), params.seg(prefix + ".br"),
                    params.seg(prefix + ".Wn"), params.seg(prefix + ".Un"),
                    params.seg(prefix + ".bn")};
}

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

void gru_step(const GruCellSpec& spec, const GruView& v, const double* x,
              const double* hprev, double* hnew, GruCache* cache) {
  int h = spec.hidden_dim;
  int in = spec.input_dim;
  std::vector<double> z(h), r(h), n(h), uh(h), tmp(h);

  matvec(v.wz, h, in, x, z.data());
  matvec(v.uz, h, h, hprev, tmp.data());
  for (int i = 0; i < h; ++i) z[i] = sigmoid(z[i] + tmp[i] + v.bz[i]);

  matvec(v.wr, h, in, x, r.data());
  matvec(v.ur, h, h, hprev, tmp.data());
  for (int i = 0; i < h; ++i) r[i] = sigmoid(r[i] + tmp[i] + v.br[i]);

  matvec(v.un, h, h, hprev, uh.data());
  matvec(v.wn, h, in, x, n.data());
  for (int i = 0; i < h; ++i) n[i] = std::tanh(n[i] + r[i] * uh[i] + v.bn[i]);

  for (int i = 0; i < h; ++i) hnew[i] = (1.0 - z[i]) * n[i] + z[i] * hprev[i];

  if (cache) {
    cache->x.assign(x, x + in);
    cache->hprev.assign(hprev, hprev + h);
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->n = std::move(n);
    cache->uh = std::move(uh);
  }
}

void gru_backward(const GruCellSpec& spec, const GruView& v,
                  const GruCache& cache, const double* dh, GruViewMut grads,
                  double* dx, double* dhprev) {
  int h = spec.hidden_dim;
  int in = spec.input_dim;
  const auto& z = cache.z;
  const auto& r = cache.r;
  const auto& n = cache.n;
  const auto& uh = cache.uh;

  std::vector<double> dan(h), dar(h), daz(h), duh(h);
  for (int i = 0; i < h; ++i) {
    double dn = dh[i] * (1.0 - z[i]);
    double dz = dh[i] * (cache.hprev[i] - n[i]);
    dan[i] = dn * (1.0 - n[i] * n[i]);
    duh[i] = dan[i] * r[i];
    double dr = dan[i] * uh[i];
    dar[i] = dr * r[i] * (1.0 - r[i]);
    daz[i] = dz * z[i] * (1.0 - z[i]);
    dhprev[i] = dh[i] * z[i];
  }
  for (int j = 0; j < in; ++j) dx[j] = 0.0;

  auto accum_gate = [&](const std::vector<double>& da, double* gw, double* gu,
                        double* gb, const double* wt, const double* ut) {
    for (int i = 0; i < h; ++i) {
      double* gwi = gw + static_cast<size_t>(i) * in;
      double* gui = gu + static_cast<size_t>(i) * h;
      for (int j = 0; j < in; ++j) gwi[j] += da[i] * cache.x[j];
      for (int j = 0; j < h; ++j) gui[j] += da[i] * cache.hprev[j];
      gb[i] += da[i];
    }
    matvec_t_accum(wt, h, in, da.data(), dx);
    matvec_t_accum(ut, h, h, da.data(), dhprev);
  };

  // n's recurrent path goes through r*uh, not a plain Un h product.
  for (int i = 0; i < h; ++i) {
    double* gwi = grads.wn + static_cast<size_t>(i) * in;
    double* gui = grads.un + static_cast<size_t>(i) * h;
    for (int j = 0; j < in; ++j) gwi[j] += dan[i] * cache.x[j];
    for (int j = 0; j < h; ++j) gui[j] += duh[i] * cache.hprev[j];
    grads.bn[i] += dan[i];
  }
  matvec_t_accum(v.wn, h, in, dan.data(), dx);
  matvec_t_accum(v.un, h, h, duh.data(), dhprev);

  accum_gate(dar, grads.wr, grads.ur, grads.br, v.wr, v.ur);
  accum_gate(daz, grads.wz, grads.uz, grads.bz, v.wz, v.uz);
}

}  // namespace leadq
