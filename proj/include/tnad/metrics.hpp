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

#include <map>
#include <span>
#include <string>
#include <vector>

namespace tnad {

/// Thresholds ascending; an event is flagged when its score >= threshold.
///
/// Point k gives the rates at thresholds[k]; an extra final point at +inf
/// (rates 0, 0) closes the curve.
struct RocCurve {
  std::vector<double> thresholds;
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;
  std::size_t n_background = 0;
  std::size_t n_signal = 0;
};

/// Ties are pooled: all events sharing a score switch together.
RocCurve roc(std::span<const double> scores_bkg, std::span<const double> scores_sig);

struct TprAtFpr {
  double tpr = 0.0;               // at the loosest threshold whose FPR <= target
  double tpr_interpolated = 0.0;  // linear interpolation to FPR == target
  double threshold = 0.0;
  double fpr = 0.0;
  bool resolution_warning = false;  // fewer than 1/target background events
};

TprAtFpr tpr_at_fpr(const RocCurve& curve, double target_fpr);

struct SignalMetrics {
  std::string label;
  std::size_t count = 0;
  double auc = 0.0;
  TprAtFpr tpr;
};

struct MetricsReport {
  double median_bkg = 0.0;
  double target_fpr = 1e-5;
  std::size_t n_background = 0;
  std::vector<SignalMetrics> signals;
  std::string to_json() const;
};

/// Per-label AUC and TPR against the background class.
MetricsReport evaluate_scores(std::span<const double> scores, std::span<const std::string> labels, double median_bkg,
                              double target_fpr = 1e-5);

}  // namespace tnad
