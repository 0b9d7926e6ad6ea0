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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tnad/contraction.hpp"
#include "tnad/dataset.hpp"
#include "tnad/embedding.hpp"
#include "tnad/model.hpp"

namespace tnad {

enum class Rounding { TruncateTowardNegInf, RoundNearest };
enum class Overflow { Wrap, Saturate };

/// Signed fixed-point format with `int_bits` integer bits (sign included).
struct FixedPointFormat {
  int total_bits = 16;
  int int_bits = 6;
  Rounding rounding = Rounding::TruncateTowardNegInf;
  Overflow overflow = Overflow::Wrap;

  int frac_bits() const noexcept { return total_bits - int_bits; }
  double resolution() const;
  double max_value() const;
  double min_value() const;
  std::int64_t max_raw() const;
  std::int64_t min_raw() const;
  void validate() const;

  /// "W,I,RND|TRN,WRAP|SAT", e.g. "16,6,TRN,WRAP".
  std::string to_string() const;
  static FixedPointFormat parse(const std::string& text);

  friend bool operator==(const FixedPointFormat&, const FixedPointFormat&) = default;
};

/// Nearest grid value per the rounding mode, then wrap or clamp.
double quantize(double x, const FixedPointFormat& fmt);

/// Integer code of quantize(x, fmt), i.e. quantize(x) = raw * 2^-frac_bits.
std::int64_t quantize_raw(double x, const FixedPointFormat& fmt);

/// Where accumulators are brought back to the compute format.
enum class Requant { PerStep, PerMac };

struct QuantConfig {
  FixedPointFormat compute{16, 6, Rounding::TruncateTowardNegInf, Overflow::Wrap};
  FixedPointFormat norm{16, 8, Rounding::TruncateTowardNegInf, Overflow::Saturate};
  Requant requant = Requant::PerStep;
  void validate() const;
};

struct FixedResult {
  double norm_sq = 0.0;
  std::int64_t raw = 0;  // in units of the norm format resolution
  std::uint64_t overflow_count = 0;
};

/// Bit-accurate emulation of the plan in fixed point. Weights and inputs are
/// quantized to the compute format, each output element of a step is
/// re-quantized (or each MAC, per `requant`), and the final squared norm is
/// accumulated into the norm format.
FixedResult execute_plan_fixed(const ContractionPlan& plan, const TnModel& model, const EmbeddedMps& mps,
                               const QuantConfig& qc);

/// Model weights and inputs prepared once for repeated fixed-point runs.
class FixedPointExecutor {
 public:
  FixedPointExecutor(const ContractionPlan& plan, const TnModel& model, const QuantConfig& qc);
  FixedResult run(const EmbeddedMps& mps) const;

 private:
  const ContractionPlan* plan_;
  const TnModel* model_;
  QuantConfig qc_;
  std::vector<std::vector<std::vector<std::int64_t>>> weights_;
};

/// Total bits {24, 22, 20, 18, 16, 14, 12} with 6 integer bits, TRN, WRAP.
std::vector<FixedPointFormat> default_scan_ladder();

struct ScanRow {
  std::string format;  // "float" for the reference row
  bool reference = false;
  double median = 0.0;
  double auc = 0.0;
  double tpr = 0.0;
  double d_auc_pct = 0.0;
  double d_tpr_pct = 0.0;
  std::uint64_t overflow_count = 0;
  std::vector<std::pair<std::string, double>> auc_by_label;
  std::vector<std::pair<std::string, double>> tpr_by_label;
};

struct ScanReport {
  std::vector<ScanRow> rows;
  double target_fpr = 1e-5;
  std::string to_csv() const;
  std::string to_json() const;
};

/// Re-evaluates a trained model at every format of the ladder. The median is
/// recalibrated on the background events of each row; AUC and TPR pool all
/// non-background labels against the background.
ScanReport quantization_scan(const TnModel& model, const Dataset& data, std::span<const FixedPointFormat> formats,
                             const QuantConfig& base = {}, double target_fpr = 1e-5);

}  // namespace tnad
