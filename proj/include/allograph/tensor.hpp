// allograph/tensor.hpp
//
// Copyright 2026 The Allograph Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ALLOGRAPH_TENSOR_HPP_
#define ALLOGRAPH_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "allograph/common.hpp"

namespace allograph {

// Dense row-major tensor of doubles. Rank 1 and rank 2 cover everything the
// toolkit needs; a scalar is a rank-1 tensor with one element.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> s) {
    Tensor t;
    t.shape = std::move(s);
    t.data.assign(numel_of(t.shape), 0.0);
    return t;
  }

  static Tensor full(std::vector<std::size_t> s, double v) {
    Tensor t = zeros(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  static Tensor scalar(double v) {
    Tensor t;
    t.shape = {1};
    t.data = {v};
    return t;
  }

  static Tensor from(std::vector<double> values) {
    Tensor t;
    t.shape = {values.size()};
    t.data = std::move(values);
    return t;
  }

  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> values) {
    Tensor t;
    t.shape = {r, c};
    t.data = std::move(values);
    if (t.data.size() != r * c) throw_numeric("matrix literal size mismatch");
    return t;
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  std::size_t numel() const { return numel_of(shape); }
  bool is_scalar() const { return numel() == 1; }
  std::size_t rank() const { return shape.size(); }

  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const {
    return shape.size() == 2 ? shape[1] : (shape.empty() ? 0 : shape[0]);
  }

  double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline double logadd(double a, double b) {
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

}  // namespace allograph

#endif  // ALLOGRAPH_TENSOR_HPP_
