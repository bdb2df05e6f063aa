#pragma once

#include <string>
#include <vector>

#include "leadq/param_vector.hpp"
#include "leadq/rng.hpp"

namespace leadq {

enum class Activation { relu, tanh, identity };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// Fully connected stack: widths[0] inputs, widths.back() outputs, the chosen
// activation on every hidden layer, linear output.
struct MlpSpec {
  std::vector<int> widths;
  Activation activation = Activation::relu;

  int num_layers() const { return static_cast<int>(widths.size()) - 1; }
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  // Segments "W0","b0","W1","b1",... with Wl shaped widths[l+1] x widths[l].
  LayoutPtr make_layout() const;
};

// Fills every segment with uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) draws in
// segment order. fan_in of a bias is its layer's input width.
void init_mlp(const MlpSpec& spec, ParamVector& params, DetRng& rng);

// Uniform fan-in init for one segment; shared by the MARL nets.
void init_segment_uniform(ParamVector& params, const std::string& name,
                          int fan_in, DetRng& rng);

struct MlpCache {
  // act[0] is the input; act[l+1] the output of layer l. pre[l] holds layer
  // l's preactivation (needed for relu masks).
  std::vector<std::vector<double>> act;
  std::vector<std::vector<double>> pre;
};

// y = W x, W row-major rows x cols.
void matvec(const double* w, int rows, int cols, const double* x, double* y);
// y += W^T d.
void matvec_t_accum(const double* w, int rows, int cols, const double* d,
                    double* y);

std::vector<double> forward_mlp(const MlpSpec& spec, const ParamVector& params,
                                const double* x, MlpCache* cache = nullptr);

// Batched convenience: one row per input row.
std::vector<std::vector<double>> forward_mlp_batch(
    const MlpSpec& spec, const ParamVector& params,
    const std::vector<const double*>& rows);

// Accumulates d(loss)/d(params) into grad given d(loss)/d(logits); optionally
// emits d(loss)/d(input).
void mlp_backward(const MlpSpec& spec, const ParamVector& params,
                  const MlpCache& cache, const std::vector<double>& dlogits,
                  ParamVector& grad, std::vector<double>* dinput = nullptr);

std::vector<double> softmax(const std::vector<double>& logits);

// Mean negative log-probability of the true classes.
double cross_entropy_loss(const std::vector<std::vector<double>>& logits,
                          const std::vector<int>& labels);

// Gradient of cross_entropy_loss over the batch w.r.t. every parameter.
ParamVector mlp_loss_grad(const MlpSpec& spec, const ParamVector& params,
                          const std::vector<const double*>& rows,
                          const std::vector<int>& labels,
                          double* loss_out = nullptr);

// Single GRU cell. Parameters live in a host layout under a prefix:
// <p>.Wz <p>.Uz <p>.bz <p>.Wr <p>.Ur <p>.br <p>.Wn <p>.Un <p>.bn.
// Update: z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br),
// n = tanh(Wn x + r*(Un h) + bn), h' = (1-z)*n + z*h.
struct GruCellSpec {
  int input_dim = 0;
  int hidden_dim = 0;

  void add_segments(ParamLayout& layout, const std::string& prefix) const;
  void init(ParamVector& params, const std::string& prefix, DetRng& rng) const;
};

struct GruView {
  const double *wz, *uz, *bz, *wr, *ur, *br, *wn, *un, *bn;
};
struct GruViewMut {
  double *wz, *uz, *bz, *wr, *ur, *br, *wn, *un, *bn;
};

GruView gru_view(const ParamVector& params, const std::string& prefix);
GruViewMut gru_view_mut(ParamVector& params, const std::string& prefix);

struct GruCache {
  std::vector<double> x, hprev, z, r, n, uh;
};

void gru_step(const GruCellSpec& spec, const GruView& v, const double* x,
              const double* hprev, double* hnew, GruCache* cache = nullptr);

// Accumulates parameter gradients and emits dx / dhprev given dh at the
// cell's output.
void gru_backward(const GruCellSpec& spec, const GruView& v,
                  const GruCache& cache, const double* dh, GruViewMut grads,
                  double* dx, double* dhprev);

}  // namespace leadq
