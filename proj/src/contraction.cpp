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

#include "tnad/contraction.hpp"

#include <algorithm>
#include "json.hpp"
#include <sstream>

#include "plan_exec.hpp"
#include "tnad/errors.hpp"

namespace tnad {

const char* to_string(StepKind kind) {
  switch (kind) {
    case StepKind::VerticalContract: return "VerticalContract";
    case StepKind::SweepLeft: return "SweepLeft";
    case StepKind::SweepRight: return "SweepRight";
    case StepKind::GroupChain: return "GroupChain";
    case StepKind::GroupAbsorb: return "GroupAbsorb";
    case StepKind::MergePass1: return "MergePass1";
    case StepKind::MergePass2: return "MergePass2";
    case StepKind::TwoSiteMerge: return "TwoSiteMerge";
    case StepKind::NormSquare: return "NormSquare";
  }
  return "?";
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::Vertical: return "vertical";
    case Phase::Horizontal: return "horizontal";
    case Phase::L1Vertical: return "l1_vertical";
    case Phase::L1Horizontal: return "l1_horizontal";
    case Phase::L2Vertical: return "l2_vertical";
    case Phase::L2Horizontal: return "l2_horizontal";
    case Phase::Norm: return "norm";
  }
  return "?";
}

namespace {

class PlanBuilder {
 public:
  PlanBuilder(std::string architecture, std::size_t n_sites, std::size_t phys) {
    plan_.architecture = std::move(architecture);
    plan_.input_sites = n_sites;
    plan_.input_phys = phys;
    plan_.slot_shapes.assign(n_sites, SiteShape{phys, 1, 1});
  }

  const SiteShape& shape(std::size_t slot) const { return plan_.slot_shapes[slot]; }

  std::size_t vertical(Phase phase, std::size_t layer_index, const SmpoLayer& layer, std::size_t site,
                       std::size_t input) {
    const SiteShape in = shape(input);
    if (in.phys != layer.phys_in)
      raise(ErrorKind::Structural, "site " + std::to_string(site) + " receives physical extent " +
                                       std::to_string(in.phys) + ", operator expects " + std::to_string(layer.phys_in));
    const SiteShape out{layer.out_extent(site), in.left * layer.left_bond(site), in.right * layer.right_bond(site)};
    ContractionStep step;
    step.kind = StepKind::VerticalContract;
    step.phase = phase;
    step.layer = layer_index;
    step.site = site;
    step.sites = {site};
    step.lhs = step.rhs = input;
    step.macs = out.volume() * in.phys;
    step.block = out;
    return push(std::move(step), out);
  }

  std::size_t bond(StepKind kind, Phase phase, std::size_t layer_index, std::size_t lhs, std::size_t rhs,
                   std::vector<std::size_t> sites, std::size_t stage, std::size_t block_bond = 0) {
    const SiteShape a = shape(lhs), b = shape(rhs);
    if (a.right != b.left || (a.phys != 1 && b.phys != 1))
      raise(ErrorKind::Structural, std::string("incompatible operands for ") + to_string(kind));
    const SiteShape out{std::max(a.phys, b.phys), a.left, b.right};
    ContractionStep step;
    step.kind = kind;
    step.phase = phase;
    step.layer = layer_index;
    step.site = sites.front();
    step.sites = std::move(sites);
    step.lhs = lhs;
    step.rhs = rhs;
    step.stage = stage;
    step.block = {out.phys, std::max(out.left, block_bond), std::max(out.right, block_bond)};
    step.macs = step.block.phys * step.block.left * a.right * step.block.right;
    return push(std::move(step), out);
  }

  void norm(std::size_t input, std::size_t layer_index) {
    ContractionStep step;
    step.kind = StepKind::NormSquare;
    step.phase = Phase::Norm;
    step.layer = layer_index;
    step.lhs = step.rhs = input;
    step.macs = shape(input).volume();
    step.block = {1, 1, 1};
    plan_.result_slot = push(std::move(step), SiteShape{1, 1, 1});
  }

  ContractionPlan finish() {
    plan_.total_macs = 0;
    for (const auto& s : plan_.steps) plan_.total_macs += s.macs;
    return std::move(plan_);
  }

 private:
  std::size_t push(ContractionStep step, SiteShape out) {
    step.out = plan_.slot_shapes.size();
    step.out_shape = out;
    plan_.slot_shapes.push_back(out);
    plan_.steps.push_back(std::move(step));
    return plan_.steps.back().out;
  }

  ContractionPlan plan_;
};

// Sweeps both wings toward `output` and merges the three remaining tensors.
std::size_t sweep_and_merge(PlanBuilder& b, Phase phase, std::size_t layer_index, const std::vector<std::size_t>& v,
                            std::size_t output) {
  const std::size_t n = v.size();
  const std::size_t left_steps = output > 1 ? output - 1 : 0;
  const std::size_t right_steps = output + 2 < n ? n - output - 2 : 0;
  std::size_t left_env = v.front();
  std::size_t right_env = v.back();
  for (std::size_t k = 0; k < std::max(left_steps, right_steps); ++k) {
    if (k < left_steps) {
      const std::size_t s = k + 1;
      left_env = b.bond(StepKind::SweepLeft, phase, layer_index, left_env, v[s], {s}, k);
    }
    if (k < right_steps) {
      const std::size_t s = n - 2 - k;
      right_env = b.bond(StepKind::SweepRight, phase, layer_index, v[s], right_env, {s}, k);
    }
  }
  const std::size_t stage = std::max(left_steps, right_steps);
  const bool has_left = output > 0;
  const bool has_right = output + 1 < n;
  if (has_left && has_right) {
    const std::size_t rc = b.bond(StepKind::MergePass1, phase, layer_index, v[output], right_env, {output}, stage);
    return b.bond(StepKind::MergePass2, phase, layer_index, left_env, rc, {output}, stage + 1);
  }
  if (has_right) return b.bond(StepKind::TwoSiteMerge, phase, layer_index, v[output], right_env, {output}, stage);
  if (has_left) return b.bond(StepKind::TwoSiteMerge, phase, layer_index, left_env, v[output], {output}, stage);
  return v[output];
}

std::size_t single_output(const SmpoLayer& layer) {
  if (layer.output_sites.size() != 1)
    raise(ErrorKind::Config, "unsupported topology: a sweep schedule needs exactly one output site, layer has " +
                                 std::to_string(layer.output_sites.size()));
  return layer.output_sites.front();
}

}  // namespace

ContractionPlan plan_smpo(const SmpoLayer& layer) {
  layer.validate();
  const std::size_t output = single_output(layer);
  PlanBuilder b("custom", layer.n_sites, layer.phys_in);
  std::vector<std::size_t> v(layer.n_sites);
  for (std::size_t s = 0; s < layer.n_sites; ++s) v[s] = b.vertical(Phase::Vertical, 0, layer, s, s);
  const std::size_t out = sweep_and_merge(b, Phase::Horizontal, 0, v, output);
  b.norm(out, 0);
  return b.finish();
}

ContractionPlan plan_smpo(const TnModel& model) {
  model.validate();
  if (model.layers.size() != 1) raise(ErrorKind::Config, "plan_smpo needs a single-layer model");
  ContractionPlan plan = plan_smpo(model.layers.front());
  plan.architecture = model.label;
  return plan;
}

ContractionPlan plan_csmpo(const TnModel& model) {
  model.validate();
  if (model.layers.size() != 2) raise(ErrorKind::Config, "plan_csmpo needs a two-layer model");
  const SmpoLayer& l1 = model.layers[0];
  const SmpoLayer& l2 = model.layers[1];
  const std::size_t l2_output = single_output(l2);
  PlanBuilder b(model.label, l1.n_sites, l1.phys_in);

  std::vector<std::size_t> v(l1.n_sites);
  for (std::size_t s = 0; s < l1.n_sites; ++s) v[s] = b.vertical(Phase::L1Vertical, 0, l1, s, s);

  // Each run of non-output sites is chained left to right and absorbed into
  // the output on its right; a trailing run is absorbed into the last output.
  // Grouped steps run on b1 x b1 blocks, zero-padded at the chain ends.
  const std::size_t blk = l1.bond;
  const auto& outs = l1.output_sites;
  std::vector<std::size_t> mid(outs.size());
  std::size_t begin = 0;
  for (std::size_t k = 0; k < outs.size(); ++k) {
    std::size_t target = v[outs[k]];
    if (outs[k] > begin) {
      std::size_t chain = v[begin];
      for (std::size_t s = begin + 1; s < outs[k]; ++s)
        chain = b.bond(StepKind::GroupChain, Phase::L1Horizontal, 0, chain, v[s], {s}, s - begin - 1, blk);
      target = b.bond(StepKind::GroupAbsorb, Phase::L1Horizontal, 0, chain, target, {outs[k]}, outs[k] - begin - 1, blk);
    }
    mid[k] = target;
    begin = outs[k] + 1;
  }
  if (begin < l1.n_sites) {
    std::size_t chain = v[begin];
    for (std::size_t s = begin + 1; s < l1.n_sites; ++s)
      chain = b.bond(StepKind::GroupChain, Phase::L1Horizontal, 0, chain, v[s], {s}, s - begin - 1, blk);
    mid.back() = b.bond(StepKind::GroupAbsorb, Phase::L1Horizontal, 0, mid.back(), chain, {outs.back()},
                        l1.n_sites - begin, blk);
  }

  std::vector<std::size_t> w(l2.n_sites);
  for (std::size_t k = 0; k < l2.n_sites; ++k) w[k] = b.vertical(Phase::L2Vertical, 1, l2, k, mid[k]);
  const std::size_t out = sweep_and_merge(b, Phase::L2Horizontal, 1, w, l2_output);
  b.norm(out, 1);
  return b.finish();
}

ContractionPlan plan_model(const TnModel& model) {
  return model.layers.size() == 1 ? plan_smpo(model) : plan_csmpo(model);
}

namespace {

struct FloatPolicy {
  using value_type = double;
  using acc_type = double;
  double zero() const { return 0.0; }
  void mac(double& acc, double a, double b) const { acc += a * b; }
  void mac_norm(double& acc, double a, double b) const { acc += a * b; }
  double finish(double acc) const { return acc; }
  double finish_norm(double acc) const { return acc; }
  void end_step(std::size_t) const {}
};

struct CountingPolicy : FloatPolicy {
  std::uint64_t count = 0;
  std::uint64_t at_step_start = 0;
  std::vector<std::uint64_t> per_step;
  void mac(double& acc, double a, double b) {
    acc += a * b;
    ++count;
  }
  void mac_norm(double& acc, double a, double b) { mac(acc, a, b); }
  void end_step(std::size_t) {
    per_step.push_back(count - at_step_start);
    at_step_start = count;
  }
};

detail::WeightTable<double> float_weights(const TnModel& model) {
  detail::WeightTable<double> table;
  for (const auto& layer : model.layers) {
    auto& row = table.emplace_back();
    for (const auto& t : layer.sites) row.push_back(t.data());
  }
  return table;
}

template <class Policy>
std::vector<detail::Slot<double>> run_float(const ContractionPlan& plan, const TnModel& model, const EmbeddedMps& mps,
                                            Policy& policy) {
  detail::check_model_fits(plan, model);
  auto inputs = detail::input_slots<double>(plan, mps, [](double v) { return v; });
  return detail::run_plan(plan, model, float_weights(model), std::move(inputs), policy);
}

}  // namespace

double execute_plan(const ContractionPlan& plan, const TnModel& model, const EmbeddedMps& mps) {
  FloatPolicy policy;
  return run_float(plan, model, mps, policy)[plan.result_slot].values.front();
}

ExecutionTrace execute_plan_instrumented(const ContractionPlan& plan, const TnModel& model, const EmbeddedMps& mps) {
  CountingPolicy policy;
  ExecutionTrace trace;
  trace.norm_sq = run_float(plan, model, mps, policy)[plan.result_slot].values.front();
  trace.mac_count = policy.count;
  trace.step_macs = std::move(policy.per_step);
  return trace;
}

std::vector<std::vector<double>> execute_plan_slots(const ContractionPlan& plan, const TnModel& model,
                                                    const EmbeddedMps& mps) {
  FloatPolicy policy;
  auto slots = run_float(plan, model, mps, policy);
  std::vector<std::vector<double>> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(s.values));
  return out;
}

MacReport count_macs(const ContractionPlan& plan) {
  MacReport report;
  report.architecture = plan.architecture;
  for (const auto& step : plan.steps) {
    report.subtotals[step.phase] += step.macs;
    report.total += step.macs;
  }
  return report;
}

std::string format_mac_report(const MacReport& report) {
  std::ostringstream out;
  out << "MAC report: " << report.architecture << "\n";
  out << "  phase            MACs\n";
  for (const auto& [phase, macs] : report.subtotals) {
    std::string name = to_string(phase);
    out << "  " << name << std::string(name.size() < 16 ? 16 - name.size() : 1, ' ') << ' ' << macs << "\n";
  }
  out << "  total            " << report.total << "\n";
  return out.str();
}

std::string mac_report_json(const MacReport& report) {
  nlohmann::ordered_json j;
  j["architecture"] = report.architecture;
  nlohmann::ordered_json sub = nlohmann::ordered_json::object();
  for (const auto& [phase, macs] : report.subtotals) sub[to_string(phase)] = macs;
  j["subtotals"] = sub;
  j["total"] = report.total;
  return j.dump(2);
}

}  // namespace tnad
