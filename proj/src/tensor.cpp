// Copyright 2026 The tnad Authors. All Rights Reserved.
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

#include "tnad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tnad/errors.hpp"

namespace tnad {
namespace {

std::string shape_string(const DenseTensor::Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

void check_shape(const DenseTensor::Shape& shape) {
  for (auto extent : shape)
    if (extent == 0) raise(ErrorKind::Dimension, "zero-length axis in shape " + shape_string(shape));
}

void check_axes(const DenseTensor& t, std::span<const std::size_t> axes, const char* name) {
  std::vector<bool> seen(t.rank(), false);
  for (auto axis : axes) {
    if (axis >= t.rank())
      raise(ErrorKind::Index, std::string("axis ") + std::to_string(axis) + " out of range for " + name +
                                  " of rank " + std::to_string(t.rank()));
    if (seen[axis]) raise(ErrorKind::Index, std::string("repeated axis ") + std::to_string(axis) + " in " + name);
    seen[axis] = true;
  }
}

void require_finite(const DenseTensor& t, const char* op) {
  if (!t.all_finite()) raise(ErrorKind::Numeric, std::string("non-finite entry produced by ") + op);
}

}  // namespace

std::size_t shape_volume(const DenseTensor::Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_volume(shape_), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_volume(shape_))
    raise(ErrorKind::Dimension, "buffer of length " + std::to_string(data_.size()) + " does not fill shape " +
                                    shape_string(shape_));
}

DenseTensor DenseTensor::vector(std::initializer_list<double> values) {
  return DenseTensor({values.size()}, std::vector<double>(values));
}

std::size_t DenseTensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) raise(ErrorKind::Index, "axis " + std::to_string(axis) + " out of range");
  return shape_[axis];
}

DenseTensor::Shape DenseTensor::strides() const {
  Shape s(shape_.size(), 1);
  for (std::size_t k = shape_.size(); k-- > 1;) s[k - 1] = s[k] * shape_[k];
  return s;
}

std::size_t DenseTensor::flat_index(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size())
    raise(ErrorKind::Index, "index of rank " + std::to_string(index.size()) + " for tensor of shape " +
                                shape_string(shape_));
  std::size_t flat = 0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= shape_[k])
      raise(ErrorKind::Index, "index " + std::to_string(index[k]) + " out of range on axis " + std::to_string(k) +
                                  " of shape " + shape_string(shape_));
    flat = flat * shape_[k] + index[k];
  }
  return flat;
}

double& DenseTensor::at(std::span<const std::size_t> index) { return data_[flat_index(index)]; }
double DenseTensor::at(std::span<const std::size_t> index) const { return data_[flat_index(index)]; }

DenseTensor DenseTensor::reshaped(Shape shape) const {
  if (shape_volume(shape) != data_.size())
    raise(ErrorKind::Dimension, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return DenseTensor(std::move(shape), data_);
}

bool DenseTensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseTensor transpose(const DenseTensor& a, std::span<const std::size_t> perm) {
  if (perm.size() != a.rank()) raise(ErrorKind::Index, "permutation rank does not match tensor rank");
  check_axes(a, perm, "permutation");
  const auto in_strides = a.strides();
  DenseTensor::Shape shape(perm.size());
  DenseTensor::Shape gather(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    shape[k] = a.shape()[perm[k]];
    gather[k] = in_strides[perm[k]];
  }
  DenseTensor out(shape);
  std::vector<std::size_t> idx(perm.size(), 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) src += idx[k] * gather[k];
    out[flat] = a[src];
    for (std::size_t k = idx.size(); k-- > 0;) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

DenseTensor contract(const DenseTensor& a, std::span<const std::size_t> axes_a, const DenseTensor& b,
                     std::span<const std::size_t> axes_b) {
  if (axes_a.size() != axes_b.size())
    raise(ErrorKind::Dimension, "contraction axis lists differ in length");
  check_axes(a, axes_a, "first operand");
  check_axes(b, axes_b, "second operand");
  for (std::size_t k = 0; k < axes_a.size(); ++k) {
    if (a.shape()[axes_a[k]] != b.shape()[axes_b[k]])
      raise(ErrorKind::Dimension, "paired axes have different extents: " + shape_string(a.shape()) + " axis " +
                                      std::to_string(axes_a[k]) + " vs " + shape_string(b.shape()) + " axis " +
                                      std::to_string(axes_b[k]));
  }

  // Bring a to [free..., contracted...] and b to [contracted..., free...] then run a matrix product.
  std::vector<std::size_t> perm_a, perm_b;
  DenseTensor::Shape out_shape;
  std::size_t rows = 1, cols = 1, inner = 1;
  for (std::size_t axis = 0; axis < a.rank(); ++axis) {
    if (std::find(axes_a.begin(), axes_a.end(), axis) == axes_a.end()) {
      perm_a.push_back(axis);
      out_shape.push_back(a.shape()[axis]);
      rows *= a.shape()[axis];
    }
  }
  for (auto axis : axes_a) {
    perm_a.push_back(axis);
    inner *= a.shape()[axis];
  }
  perm_b.assign(axes_b.begin(), axes_b.end());
  for (std::size_t axis = 0; axis < b.rank(); ++axis) {
    if (std::find(axes_b.begin(), axes_b.end(), axis) == axes_b.end()) {
      perm_b.push_back(axis);
      out_shape.push_back(b.shape()[axis]);
      cols *= b.shape()[axis];
    }
  }

  const DenseTensor lhs = transpose(a, perm_a);
  const DenseTensor rhs = transpose(b, perm_b);
  DenseTensor out(out_shape);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = lhs[i * inner + k];
      for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += aik * rhs[k * cols + j];
    }
  }
  require_finite(out, "contract");
  return out;
}

DenseTensor outer(const DenseTensor& a, const DenseTensor& b) {
  DenseTensor::Shape shape = a.shape();
  shape.insert(shape.end(), b.shape().begin(), b.shape().end());
  DenseTensor out(shape);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i * b.size() + j] = a[i] * b[j];
  require_finite(out, "outer");
  return out;
}

double norm_sq(const DenseTensor& a) {
  double sum = 0.0;
  for (double v : a.data()) sum += v * v;
  return sum;
}

DenseTensor scaled(const DenseTensor& a, double factor) {
  std::vector<double> data(a.data().begin(), a.data().end());
  for (double& v : data) v *= factor;
  DenseTensor out(a.shape(), std::move(data));
  require_finite(out, "scaled");
  return out;
}

}  // namespace tnad
