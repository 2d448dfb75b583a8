#include "ols/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ols {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t e : shape) {
    if (e <= 0) throw std::invalid_argument("tensor extent must be positive, got " + std::to_string(e));
    n *= e;
  }
  return n;
}

std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<std::int64_t> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  require_finite("Tensor()");
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double value) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::from_vector(std::vector<double> values) {
  auto n = static_cast<std::int64_t>(values.size());
  return Tensor({n}, std::move(values));
}

Tensor Tensor::from_matrix(std::int64_t rows, std::int64_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

double& Tensor::at2(std::int64_t r, std::int64_t c) {
  return data[static_cast<std::size_t>(r * shape.at(1) + c)];
}

double Tensor::at2(std::int64_t r, std::int64_t c) const {
  return data[static_cast<std::size_t>(r * shape.at(1) + c)];
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(const char* context) const {
  if (!all_finite()) throw std::domain_error(std::string(context) + ": non-finite value in tensor");
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
  }
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.data) v *= s;
  out.require_finite("scale");
  return out;
}

Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0)) {
    throw std::invalid_argument("matvec: incompatible shapes " + shape_str(w.shape) + " * " +
                                shape_str(x.shape));
  }
  const std::int64_t m = w.dim(0), n = w.dim(1);
  Tensor out = Tensor::zeros({m});
  for (std::int64_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* row = w.data.data() + i * n;
    for (std::int64_t j = 0; j < n; ++j) acc += row[j] * x.data[static_cast<std::size_t>(j)];
    out.data[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

Tensor vecmat(const Tensor& a, const Tensor& m) {
  if (m.rank() != 2 || a.rank() != 1 || m.dim(0) != a.dim(0)) {
    throw std::invalid_argument("vecmat: incompatible shapes " + shape_str(a.shape) + " * " +
                                shape_str(m.shape));
  }
  const std::int64_t v = m.dim(0), d = m.dim(1);
  Tensor out = Tensor::zeros({d});
  for (std::int64_t r = 0; r < v; ++r) {
    const double w = a.data[static_cast<std::size_t>(r)];
    if (w == 0.0) continue;
    const double* row = m.data.data() + r * d;
    for (std::int64_t j = 0; j < d; ++j) out.data[static_cast<std::size_t>(j)] += w * row[j];
  }
  return out;
}

Tensor outer(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1) throw std::invalid_argument("outer: vectors required");
  const std::int64_t m = a.dim(0), n = b.dim(0);
  Tensor out = Tensor::zeros({m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      out.data[static_cast<std::size_t>(i * n + j)] =
          a.data[static_cast<std::size_t>(i)] * b.data[static_cast<std::size_t>(j)];
  return out;
}

Tensor matvec_transposed(const Tensor& w, const Tensor& y) {
  if (w.rank() != 2 || y.rank() != 1 || w.dim(0) != y.dim(0)) {
    throw std::invalid_argument("matvec_transposed: incompatible shapes " + shape_str(w.shape) +
                                "^T * " + shape_str(y.shape));
  }
  const std::int64_t m = w.dim(0), n = w.dim(1);
  Tensor out = Tensor::zeros({n});
  for (std::int64_t i = 0; i < m; ++i) {
    const double yi = y.data[static_cast<std::size_t>(i)];
    if (yi == 0.0) continue;
    const double* row = w.data.data() + i * n;
    for (std::int64_t j = 0; j < n; ++j) out.data[static_cast<std::size_t>(j)] += row[j] * yi;
  }
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor softmax(const Tensor& a) {
  Tensor out = a;
  const double m = *std::max_element(a.data.begin(), a.data.end());
  double z = 0.0;
  for (double& v : out.data) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : out.data) v /= z;
  return out;
}

Tensor log_softmax(const Tensor& a) {
  Tensor out = a;
  const double m = *std::max_element(a.data.begin(), a.data.end());
  double z = 0.0;
  for (double v : a.data) z += std::exp(v - m);
  const double lse = m + std::log(z);
  for (double& v : out.data) v -= lse;
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

double sum(const Tensor& a) { return std::accumulate(a.data.begin(), a.data.end(), 0.0); }

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

std::int64_t argmax_lowest(const Tensor& a) {
  if (a.data.empty()) throw std::invalid_argument("argmax_lowest: empty tensor");
  std::int64_t best = 0;
  for (std::int64_t i = 1; i < a.numel(); ++i) {
    if (a.data[static_cast<std::size_t>(i)] > a.data[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

}  // namespace ols
