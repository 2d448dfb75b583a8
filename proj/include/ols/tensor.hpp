#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ols {

/// Dense row-major array of doubles. The universal value carrier: model
/// activations, images, gradients, bounds. Every public operation keeps the
/// finiteness invariant (no NaN/Inf leaves a constructor or op).
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::int64_t> shape_in, std::vector<double> data_in);

  static Tensor zeros(std::vector<std::int64_t> shape);
  static Tensor full(std::vector<std::int64_t> shape, double value);
  static Tensor scalar(double value);
  static Tensor from_vector(std::vector<double> values);
  static Tensor from_matrix(std::int64_t rows, std::int64_t cols,
                            std::vector<double> values);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  std::size_t rank() const { return shape.size(); }
  std::int64_t dim(std::size_t i) const { return shape.at(i); }

  double& at(std::int64_t flat) { return data[static_cast<std::size_t>(flat)]; }
  double at(std::int64_t flat) const { return data[static_cast<std::size_t>(flat)]; }
  double& at2(std::int64_t r, std::int64_t c);
  double at2(std::int64_t r, std::int64_t c) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  void require_finite(const char* context) const;
};

std::int64_t shape_numel(const std::vector<std::int64_t>& shape);
std::string shape_str(const std::vector<std::int64_t>& shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

/// W [m,n] * x [n] -> [m]
Tensor matvec(const Tensor& w, const Tensor& x);
/// a [v] * M [v,d] -> [d] (row mixture)
Tensor vecmat(const Tensor& a, const Tensor& m);
/// a [m] outer b [n] -> [m,n]
Tensor outer(const Tensor& a, const Tensor& b);
/// W [m,n]^T * y [m] -> [n]
Tensor matvec_transposed(const Tensor& w, const Tensor& y);

Tensor relu(const Tensor& a);
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Argmax with ties broken toward the lowest index.
std::int64_t argmax_lowest(const Tensor& a);

}  // namespace ols
