#include "ols/mip.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <stdexcept>

namespace ols {

int MixedIntegerProgram::add_var(std::string name, double lo, double hi, bool binary) {
  if (!(lo <= hi)) throw std::invalid_argument("add_var: lo > hi for " + name);
  Variable v;
  v.name = std::move(name);
  v.lo = lo;
  v.hi = hi;
  v.binary = binary;
  vars.push_back(std::move(v));
  return static_cast<int>(vars.size()) - 1;
}

void MixedIntegerProgram::add_con(std::string name, std::vector<LinTerm> terms, Cmp cmp,
                                  double rhs) {
  LinearConstraint c;
  c.name = std::move(name);
  c.terms = std::move(terms);
  c.cmp = cmp;
  c.rhs = rhs;
  cons.push_back(std::move(c));
}

std::int64_t MixedIntegerProgram::binary_count(bool free_only) const {
  std::int64_t n = 0;
  for (const Variable& v : vars)
    if (v.binary && (!free_only || v.lo < v.hi)) ++n;
  return n;
}

std::vector<std::string> validate(const MixedIntegerProgram& mip) {
  std::vector<std::string> problems;
  std::set<std::string> names;
  for (std::size_t i = 0; i < mip.vars.size(); ++i) {
    const Variable& v = mip.vars[i];
    if (!names.insert(v.name).second) problems.push_back("duplicate variable name: " + v.name);
    if (!std::isfinite(v.lo) || !std::isfinite(v.hi) || v.lo > v.hi)
      problems.push_back("bad bounds on " + v.name);
    if (v.binary && (v.lo < 0.0 || v.hi > 1.0))
      problems.push_back("binary " + v.name + " has bounds outside [0,1]");
  }
  const int nvars = static_cast<int>(mip.vars.size());
  auto check_terms = [&](const std::vector<LinTerm>& terms, const std::string& where) {
    std::set<int> seen;
    for (const LinTerm& t : terms) {
      if (t.var < 0 || t.var >= nvars)
        problems.push_back(where + ": reference to missing variable " + std::to_string(t.var));
      else if (!seen.insert(t.var).second)
        problems.push_back(where + ": duplicate variable " + mip.vars[t.var].name);
      if (!std::isfinite(t.coef)) problems.push_back(where + ": non-finite coefficient");
    }
  };
  for (const LinearConstraint& c : mip.cons) {
    check_terms(c.terms, "constraint " + c.name);
    if (!std::isfinite(c.rhs)) problems.push_back("constraint " + c.name + ": non-finite rhs");
  }
  check_terms(mip.objective, "objective");
  if (mip.objective.empty()) problems.push_back("objective is empty");
  return problems;
}

int MipBuilder::add_var(std::string name, double lo, double hi, bool binary) {
  return mip_.add_var(std::move(name), lo, hi, binary);
}

Box MipBuilder::var_bounds(const std::vector<int>& ids) const {
  Tensor lo = Tensor::zeros({static_cast<std::int64_t>(ids.size())});
  Tensor hi = lo;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    lo.data[i] = mip_.vars[static_cast<std::size_t>(ids[i])].lo;
    hi.data[i] = mip_.vars[static_cast<std::size_t>(ids[i])].hi;
  }
  return Box(std::move(lo), std::move(hi));
}

std::vector<int> MipBuilder::encode_affine(const Tensor& w, const Tensor& b,
                                           const std::vector<int>& in, const std::string& prefix,
                                           const std::optional<Box>& bounds) {
  if (w.rank() != 2 || w.dim(1) != static_cast<std::int64_t>(in.size()))
    throw std::invalid_argument("encode_affine: weight/input arity mismatch at " + prefix);
  const Box out_bounds = bounds ? *bounds : interval_affine(w, b, var_bounds(in));
  const std::int64_t m = w.dim(0), n = w.dim(1);
  std::vector<int> out(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    const int v = add_var(prefix + "/n" + std::to_string(i), out_bounds.lo.at(i),
                          out_bounds.hi.at(i));
    out[static_cast<std::size_t>(i)] = v;
    std::vector<LinTerm> terms;
    terms.push_back({v, 1.0});
    for (std::int64_t j = 0; j < n; ++j) {
      const double c = w.at2(i, j);
      if (c != 0.0) terms.push_back({in[static_cast<std::size_t>(j)], -c});
    }
    mip_.add_con(prefix + "/eq" + std::to_string(i), std::move(terms), Cmp::EQ, b.at(i));
  }
  return out;
}

std::vector<int> MipBuilder::encode_conv2d(const LayerParams& conv, const std::vector<int>& in,
                                           const std::string& prefix,
                                           const std::optional<Box>& bounds) {
  if (static_cast<std::int64_t>(in.size()) != conv.in_c * conv.in_h * conv.in_w)
    throw std::invalid_argument("encode_conv2d: input arity mismatch at " + prefix);
  const Box out_bounds = bounds ? *bounds : interval_conv2d(conv, var_bounds(in));
  const std::int64_t oc = conv.conv_out_c(), oh = conv.conv_out_h(), ow = conv.conv_out_w();
  const std::int64_t kh = conv.weight.dim(2), kw = conv.weight.dim(3);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(oc * oh * ow));
  for (std::int64_t c = 0; c < oc; ++c) {
    for (std::int64_t y = 0; y < oh; ++y) {
      for (std::int64_t x = 0; x < ow; ++x) {
        const std::int64_t oi = (c * oh + y) * ow + x;
        const int v = add_var(prefix + "/n" + std::to_string(oi), out_bounds.lo.at(oi),
                              out_bounds.hi.at(oi));
        out.push_back(v);
        std::vector<LinTerm> terms;
        terms.push_back({v, 1.0});
        for (std::int64_t ci = 0; ci < conv.in_c; ++ci) {
          for (std::int64_t dy = 0; dy < kh; ++dy) {
            const std::int64_t iy = y * conv.stride + dy - conv.pad;
            if (iy < 0 || iy >= conv.in_h) continue;
            for (std::int64_t dx = 0; dx < kw; ++dx) {
              const std::int64_t ix = x * conv.stride + dx - conv.pad;
              if (ix < 0 || ix >= conv.in_w) continue;
              const double cf = conv.weight.at(((c * conv.in_c + ci) * kh + dy) * kw + dx);
              if (cf == 0.0) continue;
              terms.push_back({in[static_cast<std::size_t>((ci * conv.in_h + iy) * conv.in_w + ix)],
                               -cf});
            }
          }
        }
        mip_.add_con(prefix + "/eq" + std::to_string(oi), std::move(terms), Cmp::EQ,
                     conv.bias.at(c));
      }
    }
  }
  return out;
}

MipBuilder::ReluResult MipBuilder::encode_relu_bigM(int xhat, const std::string& prefix) {
  const Variable& pre = mip_.vars[static_cast<std::size_t>(xhat)];
  const double l = pre.lo, u = pre.hi;
  if (!std::isfinite(l) || !std::isfinite(u))
    throw std::invalid_argument("encode_relu_bigM: unbounded pre-activation " + pre.name);
  ReluResult r;
  if (options_.stable_relu_elimination && u <= 0.0) {
    r.out = add_var(prefix, 0.0, 0.0);
    mip_.add_con(prefix + "/zero", {{r.out, 1.0}}, Cmp::EQ, 0.0);
    return r;
  }
  if (options_.stable_relu_elimination && l >= 0.0) {
    r.out = add_var(prefix, l, u);
    mip_.add_con(prefix + "/pass", {{r.out, 1.0}, {xhat, -1.0}}, Cmp::EQ, 0.0);
    return r;
  }
  r.out = add_var(prefix, std::max(l, 0.0), std::max(u, 0.0));
  r.delta = add_var(prefix + "/d", 0.0, 1.0, /*binary=*/true);
  mip_.add_con(prefix + "/ge0", {{r.out, 1.0}}, Cmp::GE, 0.0);
  mip_.add_con(prefix + "/gehat", {{r.out, 1.0}, {xhat, -1.0}}, Cmp::GE, 0.0);
  mip_.add_con(prefix + "/leu", {{r.out, 1.0}, {r.delta, -u}}, Cmp::LE, 0.0);
  // x <= xhat - l (1 - delta)  <=>  x - xhat - l delta <= -l
  mip_.add_con(prefix + "/lehat", {{r.out, 1.0}, {xhat, -1.0}, {r.delta, -l}}, Cmp::LE, -l);
  return r;
}

std::vector<MipBuilder::ReluResult> MipBuilder::encode_relu_layer(const std::vector<int>& xhat,
                                                                  const std::string& prefix) {
  std::vector<ReluResult> out;
  out.reserve(xhat.size());
  for (std::size_t i = 0; i < xhat.size(); ++i)
    out.push_back(encode_relu_bigM(xhat[i], prefix + "/n" + std::to_string(i)));
  return out;
}

MipBuilder::ArgmaxResult MipBuilder::encode_argmax(const std::vector<int>& o,
                                                   const std::string& prefix) {
  if (o.empty()) throw std::invalid_argument("encode_argmax: no logits at " + prefix);
  ArgmaxResult r;
  const Box b = var_bounds(o);
  if (o.size() == 1) {
    // Forced winner: delta pinned to 1, max aliases the single logit.
    r.max_var = add_var(prefix + "/max", b.lo.at(0), b.hi.at(0));
    r.deltas.push_back(add_var(prefix + "/d0", 1.0, 1.0, /*binary=*/true));
    mip_.add_con(prefix + "/alias", {{r.max_var, 1.0}, {o[0], -1.0}}, Cmp::EQ, 0.0);
    return r;
  }
  double lo_max = b.lo.at(0), hi_max = b.hi.at(0);
  for (std::int64_t i = 1; i < b.numel(); ++i) {
    lo_max = std::max(lo_max, b.lo.at(i));
    hi_max = std::max(hi_max, b.hi.at(i));
  }
  r.max_var = add_var(prefix + "/max", lo_max, hi_max);
  std::vector<LinTerm> one_hot;
  for (std::size_t y = 0; y < o.size(); ++y) {
    const int d = add_var(prefix + "/d" + std::to_string(y), 0.0, 1.0, /*binary=*/true);
    r.deltas.push_back(d);
    one_hot.push_back({d, 1.0});
    mip_.add_con(prefix + "/ge" + std::to_string(y), {{r.max_var, 1.0}, {o[y], -1.0}}, Cmp::GE,
                 0.0);
    // max <= o_y + (U - l_y)(1 - delta_y), U = max_y u_y
    const double big = hi_max - b.lo.at(static_cast<std::int64_t>(y));
    mip_.add_con(prefix + "/le" + std::to_string(y),
                 {{r.max_var, 1.0}, {o[y], -1.0}, {d, big}}, Cmp::LE, big);
  }
  mip_.add_con(prefix + "/onehot", std::move(one_hot), Cmp::EQ, 1.0);
  return r;
}

std::vector<int> MipBuilder::encode_vocab_feedback(const std::vector<int>& deltas,
                                                   const Vocabulary& vocab,
                                                   const std::string& prefix) {
  if (static_cast<std::int64_t>(deltas.size()) != vocab.size())
    throw std::invalid_argument("encode_vocab_feedback: indicator/vocabulary size mismatch");
  const Box eb = embedding_bounds(vocab);
  const std::int64_t d = vocab.embed_dim();
  std::vector<int> out(static_cast<std::size_t>(d));
  for (std::int64_t j = 0; j < d; ++j) {
    const int v = add_var(prefix + "/n" + std::to_string(j), eb.lo.at(j), eb.hi.at(j));
    out[static_cast<std::size_t>(j)] = v;
    std::vector<LinTerm> terms;
    terms.push_back({v, 1.0});
    for (std::int64_t y = 0; y < vocab.size(); ++y) {
      const double c = vocab.embedding.at2(y, j);
      if (c != 0.0) terms.push_back({deltas[static_cast<std::size_t>(y)], -c});
    }
    mip_.add_con(prefix + "/eq" + std::to_string(j), std::move(terms), Cmp::EQ, 0.0);
  }
  return out;
}

int MipBuilder::encode_min_over_steps(const std::vector<int>& margins,
                                      const std::string& prefix) {
  if (margins.empty()) throw std::invalid_argument("encode_min_over_steps: no steps");
  if (margins.size() == 1) return margins[0];
  const Box b = var_bounds(margins);
  double lo_min = b.lo.at(0), hi_min = b.hi.at(0), lo_all = b.lo.at(0);
  for (std::int64_t i = 1; i < b.numel(); ++i) {
    lo_min = std::min(lo_min, b.lo.at(i));
    hi_min = std::min(hi_min, b.hi.at(i));
    lo_all = std::min(lo_all, b.lo.at(i));
  }
  const int m = add_var(prefix + "/min", lo_min, hi_min);
  std::vector<LinTerm> one_hot;
  for (std::size_t t = 0; t < margins.size(); ++t) {
    const int g = add_var(prefix + "/g" + std::to_string(t), 0.0, 1.0, /*binary=*/true);
    one_hot.push_back({g, 1.0});
    mip_.add_con(prefix + "/le" + std::to_string(t), {{m, 1.0}, {margins[t], -1.0}}, Cmp::LE,
                 0.0);
    // m >= s_t - (u_t - L)(1 - gamma_t), L = min_t l_t
    const double big = b.hi.at(static_cast<std::int64_t>(t)) - lo_all;
    mip_.add_con(prefix + "/ge" + std::to_string(t),
                 {{m, 1.0}, {margins[t], -1.0}, {g, -big}}, Cmp::GE, -big);
  }
  mip_.add_con(prefix + "/onehot", std::move(one_hot), Cmp::EQ, 1.0);
  return m;
}

namespace {

std::uint64_t fnv1a64_bytes(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t model_weights_hash(const CaptionerModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto fold = [&h](const Tensor& t) {
    if (t.numel() == 0) return;
    h ^= fnv1a64_bytes(t.data.data(), t.data.size() * sizeof(double));
    h *= 0x100000001b3ull;
  };
  for (const LayerParams& l : model.encoder) {
    fold(l.weight);
    fold(l.bias);
  }
  fold(model.decoder_cell.w_ih);
  fold(model.decoder_cell.w_hh);
  fold(model.decoder_cell.b_h);
  fold(model.decoder_cell.w_ho);
  fold(model.decoder_cell.b_o);
  fold(model.vocab.embedding);
  return h;
}

}  // namespace

MixedIntegerProgram build_verification_mip(const CaptionerModel& model,
                                           const ContinuousBox& region, std::int64_t steps,
                                           const BuildOptions& options) {
  model.validate();
  if (steps <= 0 || steps > model.max_unroll)
    throw std::invalid_argument("build_verification_mip: steps must be in [1, max_unroll]");
  const Box input_box = region.box();
  const BoundsTrace trace = interval_rnn_unroll(model, input_box, steps);

  MipBuilder builder(options);
  std::vector<int> cur;
  cur.reserve(static_cast<std::size_t>(input_box.numel()));
  for (std::int64_t i = 0; i < input_box.numel(); ++i)
    cur.push_back(builder.add_var("x/n" + std::to_string(i), input_box.lo.at(i),
                                  input_box.hi.at(i)));

  for (std::size_t l = 0; l < model.encoder.size(); ++l) {
    const LayerParams& layer = model.encoder[l];
    const std::string prefix = "enc/L" + std::to_string(l);
    switch (layer.kind) {
      case LayerKind::Linear:
        cur = builder.encode_affine(layer.weight, layer.bias, cur, prefix, trace.encoder[l]);
        break;
      case LayerKind::Conv2D:
        cur = builder.encode_conv2d(layer, cur, prefix, trace.encoder[l]);
        break;
      case LayerKind::ReLU: {
        std::vector<int> next;
        next.reserve(cur.size());
        for (auto& rr : builder.encode_relu_layer(cur, prefix)) next.push_back(rr.out);
        cur = std::move(next);
        break;
      }
      default:
        throw std::invalid_argument("build_verification_mip: unsupported encoder layer");
    }
  }

  const LayerParams& cell = model.decoder_cell;
  const std::int64_t hidden = cell.rnn_hidden();
  const std::int64_t vocab_n = model.vocab.size();
  std::vector<int> input_vars = cur;  // i_0
  std::vector<int> state_vars;        // empty at t = 0 (h_0 = 0)
  std::vector<int> margin_vars;

  for (std::int64_t t = 0; t < steps; ++t) {
    const std::string st = "dec/t" + std::to_string(t);
    const StepBounds& sb = trace.steps[static_cast<std::size_t>(t)];
    // pre_j = w_ih[j]*i + w_hh[j]*h + b_h[j]
    std::vector<int> pre(static_cast<std::size_t>(hidden));
    for (std::int64_t j = 0; j < hidden; ++j) {
      const int v = builder.add_var(st + "/cell/pre" + std::to_string(j), sb.pre.lo.at(j),
                                    sb.pre.hi.at(j));
      pre[static_cast<std::size_t>(j)] = v;
      std::vector<LinTerm> terms;
      terms.push_back({v, 1.0});
      for (std::int64_t k = 0; k < cell.rnn_input(); ++k) {
        const double c = cell.w_ih.at2(j, k);
        if (c != 0.0) terms.push_back({input_vars[static_cast<std::size_t>(k)], -c});
      }
      if (!state_vars.empty()) {
        for (std::int64_t k = 0; k < hidden; ++k) {
          const double c = cell.w_hh.at2(j, k);
          if (c != 0.0) terms.push_back({state_vars[static_cast<std::size_t>(k)], -c});
        }
      }
      builder.program().add_con(st + "/cell/eq" + std::to_string(j), std::move(terms), Cmp::EQ,
                                cell.b_h.at(j));
    }
    std::vector<int> h_next;
    h_next.reserve(static_cast<std::size_t>(hidden));
    for (std::int64_t j = 0; j < hidden; ++j)
      h_next.push_back(
          builder.encode_relu_bigM(pre[static_cast<std::size_t>(j)],
                                   st + "/cell/h" + std::to_string(j))
              .out);
    const std::vector<int> logits =
        builder.encode_affine(cell.w_ho, cell.b_o, h_next, st + "/logit", sb.logits);

    // Greedy feedback over the full vocabulary.
    const MipBuilder::ArgmaxResult feedback = builder.encode_argmax(logits, st + "/delta");

    // Margin over z != eos.
    std::vector<int> non_eos;
    non_eos.reserve(static_cast<std::size_t>(vocab_n - 1));
    for (std::int64_t y = 0; y < vocab_n; ++y)
      if (y != model.vocab.eos_index) non_eos.push_back(logits[static_cast<std::size_t>(y)]);
    const MipBuilder::ArgmaxResult nz = builder.encode_argmax(non_eos, st + "/margin");
    const Variable& nzv = builder.program().vars[static_cast<std::size_t>(nz.max_var)];
    const Variable& ev = builder.program().vars[static_cast<std::size_t>(
        logits[static_cast<std::size_t>(model.vocab.eos_index)])];
    const int s = builder.add_var(st + "/margin/s", nzv.lo - ev.hi, nzv.hi - ev.lo);
    builder.program().add_con(
        st + "/margin/eq",
        {{s, 1.0},
         {nz.max_var, -1.0},
         {logits[static_cast<std::size_t>(model.vocab.eos_index)], 1.0}},
        Cmp::EQ, 0.0);
    margin_vars.push_back(s);

    if (t + 1 < steps)
      input_vars = builder.encode_vocab_feedback(feedback.deltas, model.vocab, st + "/emb");
    state_vars = h_next;
  }

  const int m = builder.encode_min_over_steps(margin_vars, "obj");
  MixedIntegerProgram mip = builder.take();
  mip.objective = {{m, 1.0}};
  mip.metadata["steps"] = steps;
  mip.metadata["radius"] = region.radius;
  mip.metadata["input_numel"] = input_box.numel();
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(model_weights_hash(model)));
  mip.metadata["model_hash"] = std::string(hex);
  return mip;
}

std::vector<int> input_var_ids(const MixedIntegerProgram& mip, std::int64_t input_numel) {
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(input_numel));
  for (std::int64_t i = 0; i < input_numel; ++i) {
    const std::string name = "x/n" + std::to_string(i);
    if (i >= static_cast<std::int64_t>(mip.vars.size()) || mip.vars[static_cast<std::size_t>(i)].name != name)
      throw std::invalid_argument("input_var_ids: program does not start with input variables");
    ids.push_back(static_cast<int>(i));
  }
  return ids;
}

namespace {

std::string fmt_number(double v) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::logic_error("fmt_number: to_chars failed");
  return std::string(buf, end);
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out)
    if (c == '/') c = '_';
  return out;
}

void emit_terms(std::string& out, const std::vector<LinTerm>& terms,
                const std::vector<Variable>& vars) {
  bool first = true;
  for (const LinTerm& t : terms) {
    const double c = t.coef;
    const double mag = std::abs(c);
    if (first) {
      if (c < 0.0) out += "- ";
      first = false;
    } else {
      out += c < 0.0 ? " - " : " + ";
    }
    if (mag != 1.0) {
      out += fmt_number(mag);
      out += " ";
    }
    out += sanitize(vars[static_cast<std::size_t>(t.var)].name);
  }
}

}  // namespace

std::string export_lp(const MixedIntegerProgram& mip) {
  std::string out;
  out += "Maximize\n obj: ";
  emit_terms(out, mip.objective, mip.vars);
  out += "\nSubject To\n";
  for (const LinearConstraint& c : mip.cons) {
    out += " " + sanitize(c.name) + ": ";
    emit_terms(out, c.terms, mip.vars);
    switch (c.cmp) {
      case Cmp::LE:
        out += " <= ";
        break;
      case Cmp::GE:
        out += " >= ";
        break;
      case Cmp::EQ:
        out += " = ";
        break;
    }
    out += fmt_number(c.rhs);
    out += "\n";
  }
  out += "Bounds\n";
  for (const Variable& v : mip.vars) {
    if (v.lo == v.hi) {
      out += " " + sanitize(v.name) + " = " + fmt_number(v.lo) + "\n";
    } else {
      out += " " + fmt_number(v.lo) + " <= " + sanitize(v.name) + " <= " + fmt_number(v.hi) +
             "\n";
    }
  }
  bool any_binary = false;
  for (const Variable& v : mip.vars) any_binary |= v.binary;
  if (any_binary) {
    out += "Binaries\n";
    for (const Variable& v : mip.vars)
      if (v.binary) out += " " + sanitize(v.name) + "\n";
  }
  return out;
}

}  // namespace ols
