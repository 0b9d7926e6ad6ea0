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

#include "tnad/quantization.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "plan_exec.hpp"
#include "tnad/errors.hpp"
#include "tnad/metrics.hpp"
#include "tnad/training.hpp"

namespace tnad {
namespace {

using i128 = __int128;

constexpr int kMaxTotalBits = 48;

// Arithmetic shift right with the format's rounding.
i128 shift_down(i128 v, int shift, Rounding rounding) {
  if (shift <= 0) return v << -shift;
  if (rounding == Rounding::RoundNearest) v += i128{1} << (shift - 1);
  return v >> shift;  // floor for signed operands
}

struct Fitted {
  std::int64_t raw;
  bool overflow;
};

Fitted fit(i128 v, const FixedPointFormat& fmt) {
  const i128 hi = fmt.max_raw(), lo = fmt.min_raw();
  if (v >= lo && v <= hi) return {static_cast<std::int64_t>(v), false};
  if (fmt.overflow == Overflow::Saturate) return {static_cast<std::int64_t>(v > hi ? hi : lo), true};
  const unsigned __int128 mask = (static_cast<unsigned __int128>(1) << fmt.total_bits) - 1;
  auto bits = static_cast<unsigned __int128>(v) & mask;
  if (bits >> (fmt.total_bits - 1)) bits |= ~mask;
  return {static_cast<std::int64_t>(static_cast<i128>(bits)), true};
}

std::string rounding_token(Rounding r) { return r == Rounding::RoundNearest ? "RND" : "TRN"; }
std::string overflow_token(Overflow o) { return o == Overflow::Saturate ? "SAT" : "WRAP"; }

}  // namespace

double FixedPointFormat::resolution() const { return std::ldexp(1.0, -frac_bits()); }
std::int64_t FixedPointFormat::max_raw() const { return (std::int64_t{1} << (total_bits - 1)) - 1; }
std::int64_t FixedPointFormat::min_raw() const { return -(std::int64_t{1} << (total_bits - 1)); }
double FixedPointFormat::max_value() const { return std::ldexp(static_cast<double>(max_raw()), -frac_bits()); }
double FixedPointFormat::min_value() const { return std::ldexp(static_cast<double>(min_raw()), -frac_bits()); }

void FixedPointFormat::validate() const {
  if (total_bits < 2 || total_bits > kMaxTotalBits)
    raise(ErrorKind::Config, "fixed-point width " + std::to_string(total_bits) + " outside [2, " +
                                 std::to_string(kMaxTotalBits) + "]");
  if (int_bits < 1 || int_bits > total_bits)
    raise(ErrorKind::Config, "integer bits " + std::to_string(int_bits) + " outside [1, " +
                                 std::to_string(total_bits) + "]");
}

std::string FixedPointFormat::to_string() const {
  return std::to_string(total_bits) + "," + std::to_string(int_bits) + "," + rounding_token(rounding) + "," +
         overflow_token(overflow);
}

FixedPointFormat FixedPointFormat::parse(const std::string& text) {
  std::vector<std::string> tokens;
  std::stringstream in(text);
  for (std::string tok; std::getline(in, tok, ',');) {
    const auto b = tok.find_first_not_of(" <>"), e = tok.find_last_not_of(" <>");
    tokens.push_back(b == std::string::npos ? "" : tok.substr(b, e - b + 1));
  }
  if (tokens.size() < 2 || tokens.size() > 4) raise(ErrorKind::Config, "bad fixed-point format '" + text + "'");
  FixedPointFormat fmt;
  try {
    std::size_t used = 0;
    fmt.total_bits = std::stoi(tokens[0], &used);
    if (used != tokens[0].size()) throw std::invalid_argument(tokens[0]);
    fmt.int_bits = std::stoi(tokens[1], &used);
    if (used != tokens[1].size()) throw std::invalid_argument(tokens[1]);
  } catch (const std::exception&) {
    raise(ErrorKind::Config, "bad fixed-point format '" + text + "'");
  }
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    std::string t = tokens[i];
    for (auto& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (t == "TRN" || t == "AP_TRN")
      fmt.rounding = Rounding::TruncateTowardNegInf;
    else if (t == "RND" || t == "AP_RND")
      fmt.rounding = Rounding::RoundNearest;
    else if (t == "WRAP" || t == "AP_WRAP")
      fmt.overflow = Overflow::Wrap;
    else if (t == "SAT" || t == "AP_SAT")
      fmt.overflow = Overflow::Saturate;
    else
      raise(ErrorKind::Config, "unknown fixed-point mode '" + tokens[i] + "'");
  }
  fmt.validate();
  return fmt;
}

std::int64_t quantize_raw(double x, const FixedPointFormat& fmt) {
  fmt.validate();
  if (std::isnan(x)) return 0;
  if (std::isinf(x)) {
    if (fmt.overflow == Overflow::Wrap) return 0;
    return x > 0 ? fmt.max_raw() : fmt.min_raw();
  }
  const double scaled = std::ldexp(x, fmt.frac_bits());
  double grid = fmt.rounding == Rounding::RoundNearest ? std::floor(scaled + 0.5) : std::floor(scaled);
  // Beyond 2^100 only the saturation direction matters; wrap keeps the low bits exactly.
  constexpr double kLimit = 0x1p100;
  if (std::abs(grid) >= kLimit) {
    if (fmt.overflow == Overflow::Saturate) return grid > 0 ? fmt.max_raw() : fmt.min_raw();
    grid = std::fmod(grid, std::ldexp(1.0, fmt.total_bits));
  }
  return fit(static_cast<i128>(grid), fmt).raw;
}

double quantize(double x, const FixedPointFormat& fmt) {
  return std::ldexp(static_cast<double>(quantize_raw(x, fmt)), -fmt.frac_bits());
}

void QuantConfig::validate() const {
  compute.validate();
  norm.validate();
}

namespace {

struct FixedPolicy {
  using value_type = std::int64_t;
  using acc_type = i128;

  const QuantConfig& qc;
  std::uint64_t overflows = 0;

  i128 zero() const { return 0; }

  void mac(i128& acc, std::int64_t a, std::int64_t b) {
    const i128 product = static_cast<i128>(a) * b;
    if (qc.requant == Requant::PerStep) {
      acc += product;
      return;
    }
    acc = store(acc + shift_down(product, qc.compute.frac_bits(), qc.compute.rounding));
  }

  std::int64_t finish(i128 acc) {
    if (qc.requant == Requant::PerMac) return static_cast<std::int64_t>(acc);
    return store(shift_down(acc, qc.compute.frac_bits(), qc.compute.rounding));
  }

  void mac_norm(i128& acc, std::int64_t a, std::int64_t b) {
    const i128 product = static_cast<i128>(a) * b;
    if (qc.requant == Requant::PerStep) {
      acc += product;
      return;
    }
    acc = to_norm(acc + shift_down(product, 2 * qc.compute.frac_bits() - qc.norm.frac_bits(), qc.norm.rounding));
  }

  std::int64_t finish_norm(i128 acc) {
    if (qc.requant == Requant::PerMac) return static_cast<std::int64_t>(acc);
    return to_norm(shift_down(acc, 2 * qc.compute.frac_bits() - qc.norm.frac_bits(), qc.norm.rounding));
  }

  void end_step(std::size_t) const {}

  std::int64_t store(i128 v) {
    const auto f = fit(v, qc.compute);
    overflows += f.overflow;
    return f.raw;
  }

  std::int64_t to_norm(i128 v) {
    const auto f = fit(v, qc.norm);
    overflows += f.overflow;
    return f.raw;
  }
};

}  // namespace

FixedPointExecutor::FixedPointExecutor(const ContractionPlan& plan, const TnModel& model, const QuantConfig& qc)
    : plan_(&plan), model_(&model), qc_(qc) {
  qc_.validate();
  detail::check_model_fits(plan, model);
  for (const auto& layer : model.layers) {
    auto& row = weights_.emplace_back();
    for (const auto& t : layer.sites) {
      auto& w = row.emplace_back();
      w.reserve(t.size());
      for (double v : t.data()) w.push_back(quantize_raw(v, qc_.compute));
    }
  }
}

FixedResult FixedPointExecutor::run(const EmbeddedMps& mps) const {
  detail::WeightTable<std::int64_t> table;
  for (const auto& layer : weights_) {
    auto& row = table.emplace_back();
    for (const auto& w : layer) row.emplace_back(w);
  }
  const FixedPointFormat& compute = qc_.compute;
  auto inputs = detail::input_slots<std::int64_t>(*plan_, mps, [&](double v) { return quantize_raw(v, compute); });
  FixedPolicy policy{qc_};
  const auto slots = detail::run_plan(*plan_, *model_, table, std::move(inputs), policy);
  FixedResult result;
  result.raw = slots[plan_->result_slot].values.front();
  result.norm_sq = std::ldexp(static_cast<double>(result.raw), -qc_.norm.frac_bits());
  result.overflow_count = policy.overflows;
  return result;
}

FixedResult execute_plan_fixed(const ContractionPlan& plan, const TnModel& model, const EmbeddedMps& mps,
                               const QuantConfig& qc) {
  return FixedPointExecutor(plan, model, qc).run(mps);
}

std::vector<FixedPointFormat> default_scan_ladder() {
  std::vector<FixedPointFormat> out;
  for (int w : {24, 22, 20, 18, 16, 14, 12}) out.push_back({w, 6, Rounding::TruncateTowardNegInf, Overflow::Wrap});
  return out;
}

namespace {

double percent_change(double x, double ref) { return ref == 0.0 ? 0.0 : 100.0 * (x - ref) / ref; }

ScanRow score_row(std::string name, std::span<const double> norm_sq, const Dataset& data, double target_fpr) {
  ScanRow row;
  row.format = std::move(name);
  std::vector<double> bkg_norms;
  for (std::size_t i = 0; i < norm_sq.size(); ++i)
    if ((*data.labels)[i] == kBackgroundLabel) bkg_norms.push_back(norm_sq[i]);
  const auto cal = calibrate(bkg_norms);
  row.median = cal.median_bkg;
  std::vector<double> bkg, sig;
  for (std::size_t i = 0; i < norm_sq.size(); ++i)
    ((*data.labels)[i] == kBackgroundLabel ? bkg : sig).push_back(anomaly_score(norm_sq[i], cal));
  const auto curve = roc(bkg, sig);
  row.auc = curve.auc;
  row.tpr = tpr_at_fpr(curve, target_fpr).tpr;
  for (const auto& label : data.signal_labels()) {
    std::vector<double> s;
    for (std::size_t i = 0; i < norm_sq.size(); ++i)
      if ((*data.labels)[i] == label) s.push_back(anomaly_score(norm_sq[i], cal));
    const auto c = roc(bkg, s);
    row.auc_by_label.emplace_back(label, c.auc);
    row.tpr_by_label.emplace_back(label, tpr_at_fpr(c, target_fpr).tpr);
  }
  return row;
}

}  // namespace

ScanReport quantization_scan(const TnModel& model, const Dataset& data, std::span<const FixedPointFormat> formats,
                             const QuantConfig& base, double target_fpr) {
  data.validate();
  if (data.events.empty()) raise(ErrorKind::Config, "quantization scan needs a nonempty dataset");
  if (!data.labels) raise(ErrorKind::Config, "quantization scan needs labeled events");
  if (data.signal_labels().empty()) raise(ErrorKind::Config, "quantization scan needs signal events");
  if (std::none_of(data.labels->begin(), data.labels->end(), [](const auto& l) { return l == kBackgroundLabel; }))
    raise(ErrorKind::Config, "quantization scan needs background events");

  const auto plan = plan_model(model);
  std::vector<EmbeddedMps> mps;
  mps.reserve(data.events.size());
  for (const auto& e : data.events) mps.push_back(embed(e, model.ordering));

  ScanReport report;
  report.target_fpr = target_fpr;
  const auto float_norms = norms(plan, model, mps);
  report.rows.push_back(score_row("float", float_norms, data, target_fpr));
  report.rows.back().reference = true;
  const ScanRow& ref = report.rows.front();
  const double ref_auc = ref.auc, ref_tpr = ref.tpr;

  for (const auto& fmt : formats) {
    QuantConfig qc = base;
    qc.compute = fmt;
    const FixedPointExecutor exec(plan, model, qc);
    std::vector<double> fixed_norms;
    fixed_norms.reserve(mps.size());
    std::uint64_t overflows = 0;
    for (const auto& m : mps) {
      const auto r = exec.run(m);
      fixed_norms.push_back(r.norm_sq);
      overflows += r.overflow_count;
    }
    ScanRow row = score_row(fmt.to_string(), fixed_norms, data, target_fpr);
    row.overflow_count = overflows;
    row.d_auc_pct = percent_change(row.auc, ref_auc);
    row.d_tpr_pct = percent_change(row.tpr, ref_tpr);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string ScanReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "format,median,auc,tpr,d_auc_pct,d_tpr_pct\n";
  for (const auto& r : rows)
    out << '"' << r.format << "\"," << r.median << ',' << r.auc << ',' << r.tpr << ',' << r.d_auc_pct << ','
        << r.d_tpr_pct << '\n';
  return out.str();
}

std::string ScanReport::to_json() const {
  nlohmann::ordered_json j;
  j["target_fpr"] = target_fpr;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["format"] = r.format;
    row["reference"] = r.reference;
    row["median"] = r.median;
    row["auc"] = r.auc;
    row["tpr"] = r.tpr;
    row["d_auc_pct"] = r.d_auc_pct;
    row["d_tpr_pct"] = r.d_tpr_pct;
    row["overflow_count"] = r.overflow_count;
    for (const auto& [label, v] : r.auc_by_label) row["auc_by_label"][label] = v;
    for (const auto& [label, v] : r.tpr_by_label) row["tpr_by_label"][label] = v;
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2);
}

}  // namespace tnad
