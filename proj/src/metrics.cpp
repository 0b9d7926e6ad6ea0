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

#include "tnad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include "json.hpp"

#include "tnad/dataset.hpp"
#include "tnad/errors.hpp"

namespace tnad {

RocCurve roc(std::span<const double> scores_bkg, std::span<const double> scores_sig) {
  if (scores_bkg.empty() || scores_sig.empty()) raise(ErrorKind::Config, "ROC needs background and signal scores");
  std::vector<double> bkg(scores_bkg.begin(), scores_bkg.end());
  std::vector<double> sig(scores_sig.begin(), scores_sig.end());
  for (double v : bkg)
    if (std::isnan(v)) raise(ErrorKind::Numeric, "NaN background score");
  for (double v : sig)
    if (std::isnan(v)) raise(ErrorKind::Numeric, "NaN signal score");
  std::sort(bkg.begin(), bkg.end());
  std::sort(sig.begin(), sig.end());

  RocCurve curve;
  curve.n_background = bkg.size();
  curve.n_signal = sig.size();
  std::vector<double> pooled;
  pooled.reserve(bkg.size() + sig.size());
  std::merge(bkg.begin(), bkg.end(), sig.begin(), sig.end(), std::back_inserter(pooled));
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
  pooled.push_back(std::numeric_limits<double>::infinity());

  const double nb = static_cast<double>(bkg.size());
  const double ns = static_cast<double>(sig.size());
  std::vector<std::uint64_t> count_b(pooled.size()), count_s(pooled.size());
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    const double t = pooled[k];
    count_b[k] = static_cast<std::uint64_t>(bkg.end() - std::lower_bound(bkg.begin(), bkg.end(), t));
    count_s[k] = static_cast<std::uint64_t>(sig.end() - std::lower_bound(sig.begin(), sig.end(), t));
  }
  curve.thresholds = pooled;
  curve.fpr.resize(pooled.size());
  curve.tpr.resize(pooled.size());
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    curve.fpr[k] = static_cast<double>(count_b[k]) / nb;
    curve.tpr[k] = static_cast<double>(count_s[k]) / ns;
  }

  // Exact trapezoid in integer counts: sum of dB * (S1 + S2) over 2 * nb * ns.
  unsigned __int128 twice_area = 0;
  for (std::size_t k = pooled.size() - 1; k-- > 0;)
    twice_area += static_cast<unsigned __int128>(count_b[k] - count_b[k + 1]) * (count_s[k] + count_s[k + 1]);
  curve.auc = static_cast<double>(twice_area) / (2.0 * nb * ns);
  return curve;
}

TprAtFpr tpr_at_fpr(const RocCurve& curve, double target_fpr) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) raise(ErrorKind::Config, "target FPR must lie in (0, 1)");
  if (curve.thresholds.empty()) raise(ErrorKind::Config, "empty ROC curve");
  TprAtFpr out;
  out.resolution_warning = static_cast<double>(curve.n_background) * target_fpr < 1.0;
  const auto it = std::find_if(curve.fpr.begin(), curve.fpr.end(), [&](double f) { return f <= target_fpr; });
  const auto k = static_cast<std::size_t>(it - curve.fpr.begin());
  out.tpr = curve.tpr[k];
  out.fpr = curve.fpr[k];
  out.threshold = curve.thresholds[k];
  out.tpr_interpolated = out.tpr;
  if (k > 0 && curve.fpr[k - 1] > curve.fpr[k]) {
    const double w = (target_fpr - curve.fpr[k]) / (curve.fpr[k - 1] - curve.fpr[k]);
    out.tpr_interpolated = curve.tpr[k] + w * (curve.tpr[k - 1] - curve.tpr[k]);
  }
  return out;
}

MetricsReport evaluate_scores(std::span<const double> scores, std::span<const std::string> labels, double median_bkg,
                              double target_fpr) {
  if (scores.size() != labels.size()) raise(ErrorKind::Dimension, "scores and labels differ in length");
  MetricsReport report;
  report.median_bkg = median_bkg;
  report.target_fpr = target_fpr;
  std::vector<double> bkg;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == kBackgroundLabel)
      bkg.push_back(scores[i]);
    else if (std::find(order.begin(), order.end(), labels[i]) == order.end())
      order.push_back(labels[i]);
  }
  report.n_background = bkg.size();
  if (bkg.empty()) raise(ErrorKind::Config, "no background events to evaluate against");
  for (const auto& label : order) {
    std::vector<double> sig;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (labels[i] == label) sig.push_back(scores[i]);
    const RocCurve curve = roc(bkg, sig);
    report.signals.push_back({label, sig.size(), curve.auc, tpr_at_fpr(curve, target_fpr)});
  }
  return report;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["median_bkg"] = median_bkg;
  j["target_fpr"] = target_fpr;
  j["n_background"] = n_background;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : signals) {
    arr.push_back({{"label", s.label},
                   {"count", s.count},
                   {"auc", s.auc},
                   {"tpr", s.tpr.tpr},
                   {"tpr_interpolated", s.tpr.tpr_interpolated},
                   {"threshold", s.tpr.threshold},
                   {"fpr", s.tpr.fpr},
                   {"resolution_warning", s.tpr.resolution_warning}});
  }
  j["signals"] = arr;
  return j.dump(2);
}

}  // namespace tnad
