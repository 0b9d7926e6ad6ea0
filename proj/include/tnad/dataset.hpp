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

namespace tnad {

inline constexpr const char* kBackgroundLabel = "background";

struct Dataset {
  std::vector<EventRecord> events;
  std::optional<std::vector<std::string>> labels;

  std::size_t size() const noexcept { return events.size(); }
  void validate() const;
  bool is_background(std::size_t i) const { return !labels || (*labels)[i] == kBackgroundLabel; }
  /// Distinct non-background labels in first-appearance order.
  std::vector<std::string> signal_labels() const;
  Dataset subset(std::size_t begin, std::size_t end) const;
};

enum class DataFormat { Csv, RawBin };

/// ".csv" selects CSV, anything else the raw binary layout.
DataFormat format_for_path(const std::filesystem::path& path);

/// CSV: a header row, 57 feature columns (MET, e1..e4, mu1..mu4, j1..j10; each
/// pt,eta,phi) and an optional trailing "label" column.
///
/// Raw binary: "TN19", u32 count, then per event 57 little-endian float32
/// values and one u8 label code (see label_code).
Dataset load_dataset(const std::filesystem::path& path, DataFormat format);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const Dataset& data, DataFormat format);
void save_dataset(const std::filesystem::path& path, const Dataset& data);

Dataset parse_csv(const std::string& text);
std::string to_csv(const Dataset& data);
Dataset parse_rawbin(const std::string& bytes);
std::string to_rawbin(const Dataset& data);

/// Raw-binary label codes: 0 background, 1-4 the reference signal names,
/// 5-254 "signal_<code>", 255 unlabeled.
std::uint8_t label_code(const std::string& label);
std::string label_name(std::uint8_t code);

std::vector<std::string> csv_header(bool with_label);

/// Desk-scale stand-in for the collider samples.
///
/// Background: multijet events with at least one lepton above
/// `lepton_filter_pt` and MET loosely tied to the leading lepton. Anomaly:
/// four leptons whose pt is shifted up by `anomaly_shift_sigma` standard
/// deviations of the background lepton spectrum.
struct SyntheticConfig {
  std::size_t n_background = 10000;
  std::size_t n_anomaly = 0;
  std::string anomaly_label = "A_4l";
  double lepton_filter_pt = 23.0;
  double lepton_pt_mean = 20.0;    // exponential tail above the filter
  double jet_pt_min = 30.0;
  double jet_pt_mean = 60.0;       // exponential tail above jet_pt_min
  double jet_multiplicity = 4.0;   // mean number of jets
  double extra_lepton_prob = 0.1;  // chance of each additional background lepton
  double anomaly_shift_sigma = 3.0;
  double anomaly_jet_multiplicity = 1.5;
  bool shuffle = true;
};

Dataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

}  // namespace tnad
