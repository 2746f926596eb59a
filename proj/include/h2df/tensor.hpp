#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace h2df {

// Dense row-major tensor of doubles. Rank is 1 (vectors) or 2 (matrices)
// everywhere in this library.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(element_count(shape), 0.0);
  }

  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != element_count(shape))
      throw std::invalid_argument("Tensor: shape/data size mismatch");
  }

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& operator()(std::size_t r, std::size_t c) {
    return data[r * cols() + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols() + c];
  }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

using Vec = std::vector<double>;

inline void check_finite(const Vec& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw std::domain_error(std::string("non-finite value in ") + what);
}

// y = W x, W is (out x in)
inline void matvec(const Tensor& W, const Vec& x, Vec& y) {
  const std::size_t out = W.rows(), in = W.cols();
  if (x.size() != in) throw std::invalid_argument("matvec: dimension mismatch");
  y.assign(out, 0.0);
  const double* w = W.data.data();
  for (std::size_t i = 0; i < out; ++i) {
    double acc = 0.0;
    const double* row = w + i * in;
    for (std::size_t j = 0; j < in; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

// y += W^T g  (accumulates the input-side gradient)
inline void matvec_transpose_add(const Tensor& W, const Vec& g, Vec& y) {
  const std::size_t out = W.rows(), in = W.cols();
  if (g.size() != out || y.size() != in)
    throw std::invalid_argument("matvec_transpose_add: dimension mismatch");
  const double* w = W.data.data();
  for (std::size_t i = 0; i < out; ++i) {
    const double gi = g[i];
    const double* row = w + i * in;
    for (std::size_t j = 0; j < in; ++j) y[j] += row[j] * gi;
  }
}

// G += g x^T  (outer-product accumulation into a weight gradient)
inline void outer_add(Tensor& G, const Vec& g, const Vec& x) {
  const std::size_t out = G.rows(), in = G.cols();
  if (g.size() != out || x.size() != in)
    throw std::invalid_argument("outer_add: dimension mismatch");
  double* w = G.data.data();
  for (std::size_t i = 0; i < out; ++i) {
    const double gi = g[i];
    double* row = w + i * in;
    for (std::size_t j = 0; j < in; ++j) row[j] += gi * x[j];
  }
}

}  // namespace h2df
