#include "ols/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ols {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

LayerParams LayerParams::linear(Tensor weight, Tensor bias) {
  require(weight.rank() == 2, "linear: weight must be [out, in], got " + shape_str(weight.shape));
  require(bias.rank() == 1 && bias.dim(0) == weight.dim(0),
          "linear: bias " + shape_str(bias.shape) + " does not match weight " +
              shape_str(weight.shape));
  LayerParams p;
  p.kind = LayerKind::Linear;
  p.weight = std::move(weight);
  p.bias = std::move(bias);
  return p;
}

LayerParams LayerParams::conv2d(Tensor weight, Tensor bias, std::int64_t in_c, std::int64_t in_h,
                                std::int64_t in_w, std::int64_t stride, std::int64_t pad) {
  require(weight.rank() == 4, "conv2d: weight must be [out_c, in_c, kh, kw]");
  require(weight.dim(1) == in_c, "conv2d: weight in_c " + std::to_string(weight.dim(1)) +
                                     " != declared " + std::to_string(in_c));
  require(bias.rank() == 1 && bias.dim(0) == weight.dim(0), "conv2d: bias/out_c mismatch");
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(pad >= 0, "conv2d: pad must be >= 0");
  require((in_h + 2 * pad - weight.dim(2)) % stride == 0 ||
              (in_h + 2 * pad - weight.dim(2)) >= 0,
          "conv2d: kernel taller than padded input");
  require(in_h + 2 * pad >= weight.dim(2) && in_w + 2 * pad >= weight.dim(3),
          "conv2d: kernel does not fit padded input");
  LayerParams p;
  p.kind = LayerKind::Conv2D;
  p.weight = std::move(weight);
  p.bias = std::move(bias);
  p.in_c = in_c;
  p.in_h = in_h;
  p.in_w = in_w;
  p.stride = stride;
  p.pad = pad;
  return p;
}

LayerParams LayerParams::relu() {
  LayerParams p;
  p.kind = LayerKind::ReLU;
  return p;
}

LayerParams LayerParams::rnn_cell(Tensor w_ih, Tensor w_hh, Tensor b_h, Tensor w_ho, Tensor b_o) {
  require(w_ih.rank() == 2 && w_hh.rank() == 2 && w_ho.rank() == 2, "rnn_cell: matrices required");
  const std::int64_t hidden = w_hh.dim(0);
  require(w_hh.dim(1) == hidden, "rnn_cell: w_hh must be square");
  require(w_ih.dim(0) == hidden, "rnn_cell: w_ih rows " + std::to_string(w_ih.dim(0)) +
                                     " != hidden " + std::to_string(hidden));
  require(b_h.rank() == 1 && b_h.dim(0) == hidden, "rnn_cell: b_h/hidden mismatch");
  require(w_ho.dim(1) == hidden, "rnn_cell: w_ho cols/hidden mismatch");
  require(b_o.rank() == 1 && b_o.dim(0) == w_ho.dim(0), "rnn_cell: b_o/vocab mismatch");
  LayerParams p;
  p.kind = LayerKind::RNNCellReLU;
  p.w_ih = std::move(w_ih);
  p.w_hh = std::move(w_hh);
  p.b_h = std::move(b_h);
  p.w_ho = std::move(w_ho);
  p.b_o = std::move(b_o);
  return p;
}

LayerParams LayerParams::embedding(Tensor weight) {
  require(weight.rank() == 2, "embedding: weight must be [vocab, dim]");
  LayerParams p;
  p.kind = LayerKind::Embedding;
  p.weight = std::move(weight);
  return p;
}

Tensor conv2d_forward(const LayerParams& conv, const Tensor& input) {
  require(conv.kind == LayerKind::Conv2D, "conv2d_forward: wrong layer kind");
  require(input.numel() == conv.in_c * conv.in_h * conv.in_w,
          "conv2d_forward: input numel " + std::to_string(input.numel()) + " != " +
              std::to_string(conv.in_c * conv.in_h * conv.in_w));
  const std::int64_t oc = conv.conv_out_c(), oh = conv.conv_out_h(), ow = conv.conv_out_w();
  const std::int64_t kh = conv.weight.dim(2), kw = conv.weight.dim(3);
  Tensor out = Tensor::zeros({oc, oh, ow});
  for (std::int64_t c = 0; c < oc; ++c) {
    for (std::int64_t y = 0; y < oh; ++y) {
      for (std::int64_t x = 0; x < ow; ++x) {
        double acc = conv.bias.at(c);
        for (std::int64_t ci = 0; ci < conv.in_c; ++ci) {
          for (std::int64_t dy = 0; dy < kh; ++dy) {
            const std::int64_t iy = y * conv.stride + dy - conv.pad;
            if (iy < 0 || iy >= conv.in_h) continue;
            for (std::int64_t dx = 0; dx < kw; ++dx) {
              const std::int64_t ix = x * conv.stride + dx - conv.pad;
              if (ix < 0 || ix >= conv.in_w) continue;
              acc += conv.weight.at(((c * conv.in_c + ci) * kh + dy) * kw + dx) *
                     input.at((ci * conv.in_h + iy) * conv.in_w + ix);
            }
          }
        }
        out.at((c * oh + y) * ow + x) = acc;
      }
    }
  }
  return out;
}

int Tape::push(Node n) {
  n.value.require_finite("tape op");
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  Node n;
  n.value = ols::add(value(a), value(b));
  n.parents = {a, b};
  n.pull = [](const Tensor& g, std::vector<Tensor*>& ps) {
    *ps[0] = ols::add(*ps[0], g);
    *ps[1] = ols::add(*ps[1], g);
  };
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  Node n;
  n.value = ols::sub(value(a), value(b));
  n.parents = {a, b};
  n.pull = [](const Tensor& g, std::vector<Tensor*>& ps) {
    *ps[0] = ols::add(*ps[0], g);
    *ps[1] = ols::sub(*ps[1], g);
  };
  return push(std::move(n));
}

int Tape::scale(int a, double s) {
  Node n;
  n.value = ols::scale(value(a), s);
  n.parents = {a};
  n.pull = [s](const Tensor& g, std::vector<Tensor*>& ps) {
    *ps[0] = ols::add(*ps[0], ols::scale(g, s));
  };
  return push(std::move(n));
}

int Tape::add_const(int a, const Tensor& c) {
  Node n;
  n.value = ols::add(value(a), c);
  n.parents = {a};
  n.pull = [](const Tensor& g, std::vector<Tensor*>& ps) { *ps[0] = ols::add(*ps[0], g); };
  return push(std::move(n));
}

int Tape::flatten(int a) {
  Node n;
  n.value = value(a);
  n.value.shape = {n.value.numel()};
  n.parents = {a};
  const auto shape = value(a).shape;
  n.pull = [shape](const Tensor& g, std::vector<Tensor*>& ps) {
    Tensor back = g;
    back.shape = shape;
    *ps[0] = ols::add(*ps[0], back);
  };
  return push(std::move(n));
}

int Tape::relu(int a) {
  Node n;
  n.value = ols::relu(value(a));
  n.parents = {a};
  const Tensor in = value(a);
  // Subgradient at 0 is 0.
  n.pull = [in](const Tensor& g, std::vector<Tensor*>& ps) {
    Tensor d = g;
    for (std::size_t i = 0; i < d.data.size(); ++i)
      if (in.data[i] <= 0.0) d.data[i] = 0.0;
    *ps[0] = ols::add(*ps[0], d);
  };
  return push(std::move(n));
}

int Tape::softmax(int a) {
  Node n;
  n.value = ols::softmax(value(a));
  n.parents = {a};
  const Tensor y = n.value;
  n.pull = [y](const Tensor& g, std::vector<Tensor*>& ps) {
    const double gy = ols::dot(g, y);
    Tensor d = y;
    for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] = y.data[i] * (g.data[i] - gy);
    *ps[0] = ols::add(*ps[0], d);
  };
  return push(std::move(n));
}

int Tape::log_softmax(int a) {
  Node n;
  n.value = ols::log_softmax(value(a));
  n.parents = {a};
  const Tensor p = ols::softmax(value(a));
  n.pull = [p](const Tensor& g, std::vector<Tensor*>& ps) {
    const double gs = ols::sum(g);
    Tensor d = g;
    for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] -= gs * p.data[i];
    *ps[0] = ols::add(*ps[0], d);
  };
  return push(std::move(n));
}

int Tape::affine(int w, int b, int x) {
  Node n;
  n.value = ols::add(ols::matvec(value(w), value(x)), value(b));
  n.parents = {w, b, x};
  const Tensor wv = value(w), xv = value(x);
  n.pull = [wv, xv](const Tensor& g, std::vector<Tensor*>& ps) {
    *ps[0] = ols::add(*ps[0], ols::outer(g, xv));
    *ps[1] = ols::add(*ps[1], g);
    *ps[2] = ols::add(*ps[2], ols::matvec_transposed(wv, g));
  };
  return push(std::move(n));
}

int Tape::matvec(int w, int x) {
  Node n;
  n.value = ols::matvec(value(w), value(x));
  n.parents = {w, x};
  const Tensor wv = value(w), xv = value(x);
  n.pull = [wv, xv](const Tensor& g, std::vector<Tensor*>& ps) {
    *ps[0] = ols::add(*ps[0], ols::outer(g, xv));
    *ps[1] = ols::add(*ps[1], ols::matvec_transposed(wv, g));
  };
  return push(std::move(n));
}

int Tape::vecmat(int a, int m) {
  Node n;
  n.value = ols::vecmat(value(a), value(m));
  n.parents = {a, m};
  const Tensor av = value(a), mv = value(m);
  n.pull = [av, mv](const Tensor& g, std::vector<Tensor*>& ps) {
    *ps[0] = ols::add(*ps[0], ols::matvec(mv, g));
    *ps[1] = ols::add(*ps[1], ols::outer(av, g));
  };
  return push(std::move(n));
}

int Tape::conv2d(int w, int b, int x, std::int64_t in_c, std::int64_t in_h, std::int64_t in_w,
                 std::int64_t stride, std::int64_t pad) {
  LayerParams conv = LayerParams::conv2d(value(w), value(b), in_c, in_h, in_w, stride, pad);
  Node n;
  n.value = conv2d_forward(conv, value(x));
  n.parents = {w, b, x};
  const Tensor xv = value(x);
  n.pull = [conv, xv](const Tensor& g, std::vector<Tensor*>& ps) {
    const std::int64_t oc = conv.conv_out_c(), oh = conv.conv_out_h(), ow = conv.conv_out_w();
    const std::int64_t kh = conv.weight.dim(2), kw = conv.weight.dim(3);
    Tensor dw = Tensor::zeros(conv.weight.shape);
    Tensor db = Tensor::zeros(conv.bias.shape);
    Tensor dx = Tensor::zeros(xv.shape);
    for (std::int64_t c = 0; c < oc; ++c) {
      for (std::int64_t y = 0; y < oh; ++y) {
        for (std::int64_t xo = 0; xo < ow; ++xo) {
          const double go = g.at((c * oh + y) * ow + xo);
          if (go == 0.0) continue;
          db.at(c) += go;
          for (std::int64_t ci = 0; ci < conv.in_c; ++ci) {
            for (std::int64_t dy = 0; dy < kh; ++dy) {
              const std::int64_t iy = y * conv.stride + dy - conv.pad;
              if (iy < 0 || iy >= conv.in_h) continue;
              for (std::int64_t dx2 = 0; dx2 < kw; ++dx2) {
                const std::int64_t ix = xo * conv.stride + dx2 - conv.pad;
                if (ix < 0 || ix >= conv.in_w) continue;
                const std::int64_t widx = ((c * conv.in_c + ci) * kh + dy) * kw + dx2;
                const std::int64_t xidx = (ci * conv.in_h + iy) * conv.in_w + ix;
                dw.at(widx) += go * xv.at(xidx);
                dx.at(xidx) += go * conv.weight.at(widx);
              }
            }
          }
        }
      }
    }
    *ps[0] = ols::add(*ps[0], dw);
    *ps[1] = ols::add(*ps[1], db);
    *ps[2] = ols::add(*ps[2], dx);
  };
  return push(std::move(n));
}

int Tape::embed_row(int m, std::int64_t row) {
  const Tensor& mv = value(m);
  require(mv.rank() == 2 && row >= 0 && row < mv.dim(0), "embed_row: row out of range");
  const std::int64_t d = mv.dim(1);
  Tensor out = Tensor::zeros({d});
  for (std::int64_t j = 0; j < d; ++j) out.at(j) = mv.at2(row, j);
  Node n;
  n.value = std::move(out);
  n.parents = {m};
  const auto shape = mv.shape;
  n.pull = [row, shape, d](const Tensor& g, std::vector<Tensor*>& ps) {
    for (std::int64_t j = 0; j < d; ++j) ps[0]->at(row * d + j) += g.at(j);
  };
  return push(std::move(n));
}

int Tape::cross_entropy(int logits, std::int64_t target) {
  const Tensor& o = value(logits);
  require(target >= 0 && target < o.numel(), "cross_entropy: target out of range");
  const Tensor ls = ols::log_softmax(o);
  Node n;
  n.value = Tensor::scalar(-ls.at(target));
  n.parents = {logits};
  const Tensor p = ols::softmax(o);
  n.pull = [p, target](const Tensor& g, std::vector<Tensor*>& ps) {
    const double s = g.at(0);
    Tensor d = p;
    d.at(target) -= 1.0;
    *ps[0] = ols::add(*ps[0], ols::scale(d, s));
  };
  return push(std::move(n));
}

int Tape::eos_margin(int logits, std::int64_t eos_index) {
  const Tensor& o = value(logits);
  require(o.numel() >= 2, "eos_margin: need at least two logits");
  require(eos_index >= 0 && eos_index < o.numel(), "eos_margin: eos index out of range");
  std::int64_t best = -1;
  for (std::int64_t z = 0; z < o.numel(); ++z) {
    if (z == eos_index) continue;
    if (best < 0 || o.at(z) > o.at(best)) best = z;
  }
  Node n;
  n.value = Tensor::scalar(o.at(eos_index) - o.at(best));
  n.parents = {logits};
  const auto numel = o.numel();
  n.pull = [eos_index, best, numel](const Tensor& g, std::vector<Tensor*>& ps) {
    const double s = g.at(0);
    ps[0]->at(eos_index) += s;
    ps[0]->at(best) -= s;
    (void)numel;
  };
  return push(std::move(n));
}

int Tape::clip_min(int a, double floor) {
  const Tensor in = value(a);
  Tensor out = in;
  for (double& v : out.data) v = std::max(v, floor);
  Node n;
  n.value = std::move(out);
  n.parents = {a};
  n.pull = [in, floor](const Tensor& g, std::vector<Tensor*>& ps) {
    Tensor d = g;
    for (std::size_t i = 0; i < d.data.size(); ++i)
      if (in.data[i] <= floor) d.data[i] = 0.0;
    *ps[0] = ols::add(*ps[0], d);
  };
  return push(std::move(n));
}

int Tape::sum_all(int a) {
  Node n;
  n.value = Tensor::scalar(ols::sum(value(a)));
  n.parents = {a};
  const auto shape = value(a).shape;
  n.pull = [shape](const Tensor& g, std::vector<Tensor*>& ps) {
    *ps[0] = ols::add(*ps[0], Tensor::full(shape, g.at(0)));
  };
  return push(std::move(n));
}

int Tape::sum_scalars(const std::vector<int>& ids) {
  require(!ids.empty(), "sum_scalars: empty list");
  double total = 0.0;
  for (int id : ids) total += value(id).at(0);
  Node n;
  n.value = Tensor::scalar(total);
  n.parents = ids;
  n.pull = [](const Tensor& g, std::vector<Tensor*>& ps) {
    for (Tensor* p : ps) p->at(0) += g.at(0);
  };
  return push(std::move(n));
}

std::unordered_map<int, Tensor> Tape::backward(int output, const Tensor& seed) const {
  require(output >= 0 && output < size(), "backward: bad output id");
  if (!seed.same_shape(value(output))) {
    throw std::invalid_argument("backward: seed shape " + shape_str(seed.shape) +
                                " != output shape " + shape_str(value(output).shape));
  }
  std::vector<Tensor> grads(nodes_.size());
  std::vector<bool> live(nodes_.size(), false);
  grads[static_cast<std::size_t>(output)] = seed;
  live[static_cast<std::size_t>(output)] = true;
  for (int id = output; id >= 0; --id) {
    const auto idx = static_cast<std::size_t>(id);
    if (!live[idx] || nodes_[idx].parents.empty()) continue;
    std::vector<Tensor*> ps;
    ps.reserve(nodes_[idx].parents.size());
    for (int p : nodes_[idx].parents) {
      const auto pidx = static_cast<std::size_t>(p);
      if (!live[pidx]) {
        grads[pidx] = Tensor::zeros(nodes_[pidx].value.shape);
        live[pidx] = true;
      }
      ps.push_back(&grads[pidx]);
    }
    nodes_[idx].pull(grads[idx], ps);
  }
  std::unordered_map<int, Tensor> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].requires_grad) continue;
    out.emplace(static_cast<int>(i),
                live[i] ? grads[i] : Tensor::zeros(nodes_[i].value.shape));
  }
  return out;
}

TapedLayer upload_layer(Tape& tape, const LayerParams& layer, bool trainable) {
  TapedLayer t;
  t.kind = layer.kind;
  t.params = &layer;
  switch (layer.kind) {
    case LayerKind::Linear:
    case LayerKind::Embedding:
      t.weight = tape.leaf(layer.weight, trainable);
      if (layer.kind == LayerKind::Linear) t.bias = tape.leaf(layer.bias, trainable);
      break;
    case LayerKind::Conv2D:
      t.weight = tape.leaf(layer.weight, trainable);
      t.bias = tape.leaf(layer.bias, trainable);
      break;
    case LayerKind::ReLU:
      break;
    case LayerKind::RNNCellReLU:
      t.w_ih = tape.leaf(layer.w_ih, trainable);
      t.w_hh = tape.leaf(layer.w_hh, trainable);
      t.b_h = tape.leaf(layer.b_h, trainable);
      t.w_ho = tape.leaf(layer.w_ho, trainable);
      t.b_o = tape.leaf(layer.b_o, trainable);
      break;
  }
  return t;
}

int apply_layer(Tape& tape, const TapedLayer& layer, int input) {
  switch (layer.kind) {
    case LayerKind::Linear: {
      const int flat = tape.value(input).rank() > 1 ? tape.flatten(input) : input;
      return tape.affine(layer.weight, layer.bias, flat);
    }
    case LayerKind::Conv2D: {
      const LayerParams& p = *layer.params;
      return tape.conv2d(layer.weight, layer.bias, input, p.in_c, p.in_h, p.in_w, p.stride,
                         p.pad);
    }
    case LayerKind::ReLU:
      return tape.relu(input);
    case LayerKind::Embedding:
      return tape.vecmat(input, layer.weight);
    case LayerKind::RNNCellReLU:
      throw std::invalid_argument("apply_layer: RNNCellReLU takes a pair, use apply_rnn_cell");
  }
  throw std::logic_error("apply_layer: unreachable");
}

std::pair<int, int> apply_rnn_cell(Tape& tape, const TapedLayer& cell, int input, int state) {
  if (cell.kind != LayerKind::RNNCellReLU)
    throw std::invalid_argument("apply_rnn_cell: layer is not an RNN cell");
  const int pre = tape.add(tape.matvec(cell.w_ih, input), tape.affine(cell.w_hh, cell.b_h, state));
  const int next_state = tape.relu(pre);
  const int logits = tape.affine(cell.w_ho, cell.b_o, next_state);
  return {logits, next_state};
}

int layer_forward(Tape& tape, const LayerParams& layer, int input) {
  const TapedLayer t = upload_layer(tape, layer, /*trainable=*/false);
  return apply_layer(tape, t, input);
}

std::pair<int, int> rnn_cell_forward(Tape& tape, const LayerParams& cell, int input, int state) {
  const TapedLayer t = upload_layer(tape, cell, /*trainable=*/false);
  return apply_rnn_cell(tape, t, input, state);
}

double finite_diff_check(const ScalarFn& f, const Tensor& point, double step) {
  const Tensor analytic = f.gradient(point);
  if (!analytic.same_shape(point))
    throw std::invalid_argument("finite_diff_check: gradient shape mismatch");
  double worst = 0.0;
  Tensor probe = point;
  for (std::int64_t i = 0; i < point.numel(); ++i) {
    probe.at(i) = point.at(i) + step;
    const double hi = f.value(probe);
    probe.at(i) = point.at(i) - step;
    const double lo = f.value(probe);
    probe.at(i) = point.at(i);
    if (!std::isfinite(hi) || !std::isfinite(lo))
      throw std::domain_error("finite_diff_check: non-finite function value");
    const double numeric = (hi - lo) / (2.0 * step);
    const double err = std::abs(analytic.at(i) - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace ols
