#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "ols/models.hpp"
#include "ols/tensor.hpp"

namespace ols {

/// Coordinate-wise [lower, upper] box over a tensor shape. Invariant:
/// lo <= hi everywhere, both finite.
struct Box {
  Tensor lo, hi;

  Box() = default;
  Box(Tensor lo_in, Tensor hi_in);
  static Box point(const Tensor& value) { return Box(value, value); }
  std::int64_t numel() const { return lo.numel(); }
  bool contains(const Tensor& value, double tol = 0.0) const;
  double width() const;  // max over coordinates of (hi - lo)
};

/// l = W+ l0 + W- u0 + b,  u = W+ u0 + W- l0 + b. Exact for affine images
/// of boxes.
Box interval_affine(const Tensor& w, const Tensor& b, const Box& in);
/// Convolution treated as its induced affine map (per-pixel sign split).
Box interval_conv2d(const LayerParams& conv, const Box& in);
Box interval_relu(const Box& in);
/// Coordinate-wise min/max over the embedding rows: the input box for a
/// feedback step whose token is unknown.
Box embedding_bounds(const Vocabulary& vocab);

struct StepBounds {
  Box input;      // i_k
  Box state_in;   // h_k
  Box pre;        // cell pre-activation
  Box state_out;  // h_{k+1}
  Box logits;     // o_k
};

struct BoundsTrace {
  Box input;                   // region box after domain clipping
  std::vector<Box> encoder;    // output of each encoder layer, in order
  std::vector<StepBounds> steps;
};

/// Propagates the input box through the encoder, then `steps` decoder
/// applications. Feedback inputs i_{k+1} use the vocabulary-wide embedding
/// box (the fed-back token is unknown to the analysis).
BoundsTrace interval_rnn_unroll(const CaptionerModel& model, const Box& input_box,
                                std::int64_t steps);

nlohmann::json bounds_to_json(const BoundsTrace& trace);

}  // namespace ols
