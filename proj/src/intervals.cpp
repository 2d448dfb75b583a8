#include "ols/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ols {

Box::Box(Tensor lo_in, Tensor hi_in) : lo(std::move(lo_in)), hi(std::move(hi_in)) {
  if (!lo.same_shape(hi)) throw std::invalid_argument("box: lo/hi shape mismatch");
  for (std::size_t i = 0; i < lo.data.size(); ++i) {
    if (lo.data[i] > hi.data[i])
      throw std::invalid_argument("box: lower > upper at coordinate " + std::to_string(i));
  }
}

bool Box::contains(const Tensor& value, double tol) const {
  if (!value.same_shape(lo)) return false;
  for (std::size_t i = 0; i < value.data.size(); ++i) {
    if (value.data[i] < lo.data[i] - tol || value.data[i] > hi.data[i] + tol) return false;
  }
  return true;
}

double Box::width() const {
  double w = 0.0;
  for (std::size_t i = 0; i < lo.data.size(); ++i) w = std::max(w, hi.data[i] - lo.data[i]);
  return w;
}

Box interval_affine(const Tensor& w, const Tensor& b, const Box& in) {
  if (w.rank() != 2 || w.dim(1) != in.numel())
    throw std::invalid_argument("interval_affine: shape mismatch " + shape_str(w.shape) +
                                " applied to box of " + std::to_string(in.numel()));
  const std::int64_t m = w.dim(0), n = w.dim(1);
  Tensor lo = Tensor::zeros({m}), hi = Tensor::zeros({m});
  for (std::int64_t i = 0; i < m; ++i) {
    double l = b.at(i), u = b.at(i);
    const double* row = w.data.data() + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const double c = row[j];
      if (c >= 0.0) {
        l += c * in.lo.at(j);
        u += c * in.hi.at(j);
      } else {
        l += c * in.hi.at(j);
        u += c * in.lo.at(j);
      }
    }
    lo.at(i) = l;
    hi.at(i) = u;
  }
  return Box(std::move(lo), std::move(hi));
}

Box interval_conv2d(const LayerParams& conv, const Box& in) {
  if (in.numel() != conv.in_c * conv.in_h * conv.in_w)
    throw std::invalid_argument("interval_conv2d: box numel mismatch");
  const std::int64_t oc = conv.conv_out_c(), oh = conv.conv_out_h(), ow = conv.conv_out_w();
  const std::int64_t kh = conv.weight.dim(2), kw = conv.weight.dim(3);
  Tensor lo = Tensor::zeros({oc, oh, ow}), hi = Tensor::zeros({oc, oh, ow});
  for (std::int64_t c = 0; c < oc; ++c) {
    for (std::int64_t y = 0; y < oh; ++y) {
      for (std::int64_t x = 0; x < ow; ++x) {
        double l = conv.bias.at(c), u = conv.bias.at(c);
        for (std::int64_t ci = 0; ci < conv.in_c; ++ci) {
          for (std::int64_t dy = 0; dy < kh; ++dy) {
            const std::int64_t iy = y * conv.stride + dy - conv.pad;
            if (iy < 0 || iy >= conv.in_h) continue;
            for (std::int64_t dx = 0; dx < kw; ++dx) {
              const std::int64_t ix = x * conv.stride + dx - conv.pad;
              if (ix < 0 || ix >= conv.in_w) continue;
              const double cfd = conv.weight.at(((c * conv.in_c + ci) * kh + dy) * kw + dx);
              const std::int64_t xi = (ci * conv.in_h + iy) * conv.in_w + ix;
              if (cfd >= 0.0) {
                l += cfd * in.lo.at(xi);
                u += cfd * in.hi.at(xi);
              } else {
                l += cfd * in.hi.at(xi);
                u += cfd * in.lo.at(xi);
              }
            }
          }
        }
        const std::int64_t oi = (c * oh + y) * ow + x;
        lo.at(oi) = l;
        hi.at(oi) = u;
      }
    }
  }
  return Box(std::move(lo), std::move(hi));
}

Box interval_relu(const Box& in) {
  Box out = in;
  for (double& v : out.lo.data) v = std::max(v, 0.0);
  for (double& v : out.hi.data) v = std::max(v, 0.0);
  return out;
}

Box embedding_bounds(const Vocabulary& vocab) {
  const std::int64_t v = vocab.size(), d = vocab.embed_dim();
  Tensor lo = vocab.embed(0), hi = lo;
  for (std::int64_t y = 1; y < v; ++y) {
    for (std::int64_t j = 0; j < d; ++j) {
      lo.at(j) = std::min(lo.at(j), vocab.embedding.at2(y, j));
      hi.at(j) = std::max(hi.at(j), vocab.embedding.at2(y, j));
    }
  }
  return Box(std::move(lo), std::move(hi));
}

namespace {

Box flatten(const Box& b) {
  Box out = b;
  out.lo.shape = {out.lo.numel()};
  out.hi.shape = {out.hi.numel()};
  return out;
}

}  // namespace

BoundsTrace interval_rnn_unroll(const CaptionerModel& model, const Box& input_box,
                                std::int64_t steps) {
  if (steps <= 0 || steps > model.max_unroll)
    throw std::invalid_argument("interval_rnn_unroll: steps must be in [1, max_unroll]");
  if (input_box.numel() != model.input_numel())
    throw std::invalid_argument("interval_rnn_unroll: input box numel mismatch");
  BoundsTrace trace;
  trace.input = input_box;
  Box cur = input_box;
  for (const LayerParams& layer : model.encoder) {
    switch (layer.kind) {
      case LayerKind::Linear:
        cur = interval_affine(layer.weight, layer.bias, flatten(cur));
        break;
      case LayerKind::Conv2D:
        cur = interval_conv2d(layer, cur);
        break;
      case LayerKind::ReLU:
        cur = interval_relu(cur);
        break;
      default:
        throw std::invalid_argument("interval_rnn_unroll: unsupported encoder layer");
    }
    trace.encoder.push_back(cur);
  }
  const LayerParams& cell = model.decoder_cell;
  const std::int64_t hidden = cell.rnn_hidden();
  Box input = flatten(cur);
  Box state(Tensor::zeros({hidden}), Tensor::zeros({hidden}));
  const Box feedback = embedding_bounds(model.vocab);
  for (std::int64_t t = 0; t < steps; ++t) {
    StepBounds sb;
    sb.input = input;
    sb.state_in = state;
    // pre = w_ih i + w_hh h + b_h: two sign-split affine passes, bias once
    Box a = interval_affine(cell.w_ih, cell.b_h, input);
    Box b = interval_affine(cell.w_hh, Tensor::zeros({hidden}), state);
    sb.pre = Box(add(a.lo, b.lo), add(a.hi, b.hi));
    sb.state_out = interval_relu(sb.pre);
    sb.logits = interval_affine(cell.w_ho, cell.b_o, sb.state_out);
    trace.steps.push_back(sb);
    state = sb.state_out;
    input = feedback;
  }
  return trace;
}

namespace {
nlohmann::json box_to_json(const Box& b) {
  nlohmann::json pairs = nlohmann::json::array();
  for (std::int64_t i = 0; i < b.numel(); ++i)
    pairs.push_back({b.lo.at(i), b.hi.at(i)});
  return pairs;
}
}  // namespace

nlohmann::json bounds_to_json(const BoundsTrace& trace) {
  nlohmann::json j;
  j["input"] = box_to_json(trace.input);
  j["encoder"] = nlohmann::json::array();
  for (const Box& b : trace.encoder) j["encoder"].push_back(box_to_json(b));
  j["steps"] = nlohmann::json::array();
  for (const StepBounds& s : trace.steps) {
    nlohmann::json sj;
    sj["input"] = box_to_json(s.input);
    sj["state_in"] = box_to_json(s.state_in);
    sj["pre"] = box_to_json(s.pre);
    sj["state_out"] = box_to_json(s.state_out);
    sj["logits"] = box_to_json(s.logits);
    j["steps"].push_back(sj);
  }
  return j;
}

}  // namespace ols
