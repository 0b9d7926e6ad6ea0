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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tnad/embedding.hpp"
#include "tnad/tensor.hpp"

namespace tnad {

/// One spaced matrix product operator.
///
/// Site tensors use the axis order (phys_in, phys_out, left_bond, right_bond).
/// The chain ends carry bond 1, non-output sites carry phys_out 1.
struct SmpoLayer {
  std::size_t n_sites = 0;
  std::size_t bond = 1;
  std::size_t phys_in = 1;
  std::size_t phys_out = 1;
  std::vector<std::size_t> output_sites;  // sorted, unique
  std::vector<DenseTensor> sites;

  bool is_output(std::size_t site) const;
  std::size_t left_bond(std::size_t site) const { return site == 0 ? 1 : bond; }
  std::size_t right_bond(std::size_t site) const { return site + 1 == n_sites ? 1 : bond; }
  std::size_t out_extent(std::size_t site) const { return is_output(site) ? phys_out : 1; }
  DenseTensor::Shape site_shape(std::size_t site) const;

  /// Throws if any site tensor deviates from the boundary conventions.
  void validate() const;
};

/// Allocates a layer and fills it with a noisy identity.
SmpoLayer new_smpo(std::size_t n_sites, std::vector<std::size_t> output_sites, std::size_t bond,
                   std::size_t phys_in, std::size_t phys_out, std::uint64_t seed);

/// Allocates a zero-filled layer with the right shapes.
SmpoLayer zero_smpo(std::size_t n_sites, std::vector<std::size_t> output_sites, std::size_t bond,
                    std::size_t phys_in, std::size_t phys_out);

enum class Architecture { Smpo19to1, Csmpo19to7to1, Csmpo19to2to1, Custom };

/// "19→1", "19→7→1", "19→2→1" or "custom".
std::string architecture_tag(Architecture arch);

/// Accepts the arrow tags as well as the ASCII forms "19-1", "19-7-1", "19-2-1".
Architecture parse_architecture(const std::string& text);

struct TnModel {
  std::vector<SmpoLayer> layers;
  Ordering ordering;
  std::string label = "custom";
  std::uint64_t seed = 0;

  std::size_t input_sites() const { return layers.front().n_sites; }
  std::size_t input_phys() const { return layers.front().phys_in; }
  void validate() const;
};

/// The 19→1 SMPO with a single output at site 9.
TnModel new_smpo_model(std::size_t bond, std::size_t phys_out, std::uint64_t seed);

/// Two-layer cascade for "19→7→1" or "19→2→1".
TnModel new_csmpo(Architecture arch, std::size_t bond1, std::size_t bond2, std::size_t phys_mid, std::uint64_t seed);

/// Any of the three reference architectures at their reference dimensions.
TnModel new_reference_model(Architecture arch, std::uint64_t seed);

std::size_t param_count(const SmpoLayer& layer);
std::size_t param_count(const TnModel& model);

/// Single layer at bond b1*b2 acting exactly like the two-layer cascade.
///
/// Layer-2 weights are folded into the matching layer-1 output sites; layer-1
/// non-output sites carry the layer-2 bond through an identity. Composite
/// bonds smaller than b1*b2 (next to the chain ends) are zero-padded.
SmpoLayer flatten_cascade(const TnModel& model);

/// Wraps a single layer as a model.
TnModel single_layer_model(SmpoLayer layer, Ordering ordering, std::string label = "custom");

/// Calibration stored next to a trained model.
struct ScoreCalibration {
  double median_bkg = 0.0;
};

struct ModelFile {
  TnModel model;
  std::optional<ScoreCalibration> calibration;
};

/// One JSON header line followed by the little-endian float64 weight blob.
void save_model(const std::filesystem::path& path, const TnModel& model,
                const std::optional<ScoreCalibration>& calibration = std::nullopt);
ModelFile load_model(const std::filesystem::path& path);

std::string serialize_model(const TnModel& model, const std::optional<ScoreCalibration>& calibration = std::nullopt);
ModelFile deserialize_model(const std::string& bytes);

}  // namespace tnad
