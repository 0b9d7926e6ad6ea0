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

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace tnad {

/// Dense row-major tensor of doubles.
///
/// A rank-0 tensor (empty shape) holds exactly one value. Every axis extent is
/// at least 1 and the buffer length always equals the product of the shape.
class DenseTensor {
 public:
  using Shape = std::vector<std::size_t>;

  DenseTensor() : data_(1, 0.0) {}
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<double> data);

  static DenseTensor zeros(Shape shape) { return DenseTensor(std::move(shape)); }
  static DenseTensor vector(std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;
  Shape strides() const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t flat) noexcept { return data_[flat]; }
  double operator[](std::size_t flat) const noexcept { return data_[flat]; }

  double& at(std::span<const std::size_t> index);
  double at(std::span<const std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index) { return at(std::span(index.begin(), index.size())); }
  double at(std::initializer_list<std::size_t> index) const {
    return at(std::span(index.begin(), index.size()));
  }

  /// Same data viewed with a new shape of equal element count.
  DenseTensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  std::size_t flat_index(std::span<const std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_volume(const DenseTensor::Shape& shape);

/// Pairwise contraction over the listed axis pairs.
///
/// The result carries the uncontracted axes of `a` in their original order,
/// followed by the uncontracted axes of `b`.
DenseTensor contract(const DenseTensor& a, std::span<const std::size_t> axes_a, const DenseTensor& b,
                     std::span<const std::size_t> axes_b);

inline DenseTensor contract(const DenseTensor& a, std::initializer_list<std::size_t> axes_a,
                            const DenseTensor& b, std::initializer_list<std::size_t> axes_b) {
  return contract(a, std::span(axes_a.begin(), axes_a.size()), b, std::span(axes_b.begin(), axes_b.size()));
}

DenseTensor outer(const DenseTensor& a, const DenseTensor& b);

double norm_sq(const DenseTensor& a);

/// Axis permutation: result axis k is input axis `perm[k]`.
DenseTensor transpose(const DenseTensor& a, std::span<const std::size_t> perm);

DenseTensor scaled(const DenseTensor& a, double factor);

}  // namespace tnad
