#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ols/tensor.hpp"

namespace ols {

enum class LayerKind { Linear, Conv2D, ReLU, RNNCellReLU, Embedding };

/// Parameters of one layer. Shapes are validated at construction so a
/// LayerParams value is always internally consistent for its kind.
///
/// Linear:      weight [out, in], bias [out]
/// Conv2D:      weight [out_c, in_c, kh, kw], bias [out_c], geometry fields
/// ReLU:        no parameters
/// RNNCellReLU: h' = ReLU(w_ih i + w_hh h + b_h); o = w_ho h' + b_o
/// Embedding:   weight [vocab, dim]; forward mixes rows by input weights
struct LayerParams {
  LayerKind kind = LayerKind::ReLU;
  Tensor weight, bias;
  Tensor w_ih, w_hh, b_h, w_ho, b_o;
  // Conv2D geometry; output spatial size is ((in + 2*pad - k) / stride) + 1.
  std::int64_t in_c = 0, in_h = 0, in_w = 0;
  std::int64_t stride = 1, pad = 0;

  static LayerParams linear(Tensor weight, Tensor bias);
  static LayerParams conv2d(Tensor weight, Tensor bias, std::int64_t in_c, std::int64_t in_h,
                            std::int64_t in_w, std::int64_t stride, std::int64_t pad);
  static LayerParams relu();
  static LayerParams rnn_cell(Tensor w_ih, Tensor w_hh, Tensor b_h, Tensor w_ho, Tensor b_o);
  static LayerParams embedding(Tensor weight);

  std::int64_t conv_out_c() const { return weight.dim(0); }
  std::int64_t conv_out_h() const { return (in_h + 2 * pad - weight.dim(2)) / stride + 1; }
  std::int64_t conv_out_w() const { return (in_w + 2 * pad - weight.dim(3)) / stride + 1; }
  std::int64_t rnn_hidden() const { return w_hh.dim(0); }
  std::int64_t rnn_input() const { return w_ih.dim(1); }
  std::int64_t rnn_vocab() const { return w_ho.dim(0); }
};

/// Plain (untaped) conv forward, shared with the interval/MIP code paths.
Tensor conv2d_forward(const LayerParams& conv, const Tensor& input);

/// Record of one forward pass. Nodes are appended in evaluation order, so a
/// single reverse sweep visits each exactly once. Single-owner mutable.
class Tape {
 public:
  /// Place a tensor on the tape. Gradients are reported for every node;
  /// requires_grad only marks intent for callers collecting results.
  int leaf(Tensor value, bool requires_grad = true);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  int size() const { return static_cast<int>(nodes_.size()); }

  int add(int a, int b);
  int sub(int a, int b);
  int scale(int a, double s);
  int add_const(int a, const Tensor& c);
  /// Identity with shape [numel]; gradient reshapes back.
  int flatten(int a);
  int relu(int a);
  int softmax(int a);
  int log_softmax(int a);
  /// out = W x + b (all tape nodes)
  int affine(int w, int b, int x);
  int matvec(int w, int x);
  /// out[d] = sum_v a[v] M[v, d]
  int vecmat(int a, int m);
  int conv2d(int w, int b, int x, std::int64_t in_c, std::int64_t in_h, std::int64_t in_w,
             std::int64_t stride, std::int64_t pad);
  /// Embedding row select: out = M[row, :]
  int embed_row(int m, std::int64_t row);
  /// -log softmax(logits)[target], a scalar
  int cross_entropy(int logits, std::int64_t target);
  /// o[eos] - max_{z != eos} o[z], a scalar; subgradient picks the
  /// lowest-index maximizer among z != eos
  int eos_margin(int logits, std::int64_t eos_index);
  /// max(a, floor) elementwise; subgradient 0 at and below the floor
  int clip_min(int a, double floor);
  int sum_all(int a);
  int sum_scalars(const std::vector<int>& ids);

  /// Reverse sweep from `output` seeded with `seed` (same shape as the
  /// output). Returns gradients for every node id that was marked
  /// requires_grad. Fails on seed shape mismatch.
  std::unordered_map<int, Tensor> backward(int output, const Tensor& seed) const;

 private:
  struct Node {
    Tensor value;
    std::vector<int> parents;
    // Receives (output gradient, per-parent accumulators aligned with parents).
    std::function<void(const Tensor&, std::vector<Tensor*>&)> pull;
    bool requires_grad = false;
  };
  int push(Node n);
  std::vector<Node> nodes_;
};

/// Handles to one layer's parameters living on a tape.
struct TapedLayer {
  LayerKind kind;
  const LayerParams* params;
  int weight = -1, bias = -1;
  int w_ih = -1, w_hh = -1, b_h = -1, w_ho = -1, b_o = -1;
};

TapedLayer upload_layer(Tape& tape, const LayerParams& layer, bool trainable);

/// Applies a non-recurrent layer (Linear/Conv2D/ReLU/Embedding).
int apply_layer(Tape& tape, const TapedLayer& layer, int input);

/// RNNCellReLU step: returns (logits o, next state h').
std::pair<int, int> apply_rnn_cell(Tape& tape, const TapedLayer& cell, int input, int state);

/// One-shot forward of a layer over a fresh constant upload; the common path
/// for attack-side rollouts where parameters are frozen.
int layer_forward(Tape& tape, const LayerParams& layer, int input);
std::pair<int, int> rnn_cell_forward(Tape& tape, const LayerParams& cell, int input, int state);

/// A scalar function bundled with its claimed analytic gradient.
struct ScalarFn {
  std::function<double(const Tensor&)> value;
  std::function<Tensor(const Tensor&)> gradient;
};

/// Max over coordinates of |analytic - central difference| / max(1, |central|).
double finite_diff_check(const ScalarFn& f, const Tensor& point, double step = 1e-5);

}  // namespace ols
