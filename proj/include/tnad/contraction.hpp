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
#include <map>
#include <string>
#include <vector>

#include "tnad/embedding.hpp"
#include "tnad/model.hpp"

namespace tnad {

enum class StepKind {
  VerticalContract,  // MPS physical leg against an operator's phys_in leg
  SweepLeft,         // left environment absorbs the next site
  SweepRight,        // right environment absorbs the previous site
  GroupChain,        // matrix-matrix product inside a run of non-output sites
  GroupAbsorb,       // chained run folded into the neighbouring output site
  MergePass1,        // output site against the right environment
  MergePass2,        // left environment against the merge-pass-1 result
  TwoSiteMerge,      // output site against its only environment
  NormSquare,        // squared norm of the final vector
};

enum class Phase { Vertical, Horizontal, L1Vertical, L1Horizontal, L2Vertical, L2Horizontal, Norm };

const char* to_string(StepKind kind);
const char* to_string(Phase phase);

/// Every intermediate is held as a 3-axis (phys, left, right) tensor.
struct SiteShape {
  std::size_t phys = 1;
  std::size_t left = 1;
  std::size_t right = 1;
  std::size_t volume() const { return phys * left * right; }
  friend bool operator==(const SiteShape&, const SiteShape&) = default;
};

/// One pairwise contraction.
///
/// Operands and result live in numbered slots; slots 0..n-1 are the input
/// MPS sites and every step writes a fresh slot. VerticalContract reads its
/// operator from `layer`/`site` of the model; NormSquare ignores `rhs`.
struct ContractionStep {
  StepKind kind{};
  Phase phase{};
  std::size_t layer = 0;
  std::size_t site = 0;
  std::vector<std::size_t> sites;  // operand site indices, for reports
  std::size_t lhs = 0;
  std::size_t rhs = 0;
  std::size_t out = 0;
  SiteShape out_shape;
  SiteShape block;  // computed extents; a fixed-size unit zero-pads past out_shape
  std::uint64_t macs = 0;
  std::size_t stage = 0;  // steps sharing a stage within a phase are independent
};

struct ContractionPlan {
  std::string architecture;
  std::size_t input_sites = 0;
  std::size_t input_phys = 0;
  std::vector<SiteShape> slot_shapes;
  std::vector<ContractionStep> steps;
  std::size_t result_slot = 0;  // holds the scalar norm, shape (1,1,1)
  std::uint64_t total_macs = 0;
};

/// Bidirectional sweep schedule for a single layer with one output site.
ContractionPlan plan_smpo(const SmpoLayer& layer);
ContractionPlan plan_smpo(const TnModel& model);

/// Grouped first-layer contraction followed by the composite-bond sweep of
/// the second layer.
ContractionPlan plan_csmpo(const TnModel& model);

/// Dispatches on the number of layers.
ContractionPlan plan_model(const TnModel& model);

/// Squared norm of the model output for one embedded event.
double execute_plan(const ContractionPlan& plan, const TnModel& model, const EmbeddedMps& mps);

struct ExecutionTrace {
  double norm_sq = 0.0;
  std::uint64_t mac_count = 0;
  std::vector<std::uint64_t> step_macs;
};

/// Same as execute_plan but counts every multiply-accumulate it performs.
ExecutionTrace execute_plan_instrumented(const ContractionPlan& plan, const TnModel& model, const EmbeddedMps& mps);

/// All slot values of one forward pass, indexed like plan slots. Each slot is
/// a flat (phys, left, right) buffer.
std::vector<std::vector<double>> execute_plan_slots(const ContractionPlan& plan, const TnModel& model,
                                                    const EmbeddedMps& mps);

struct MacReport {
  std::string architecture;
  std::map<Phase, std::uint64_t> subtotals;
  std::uint64_t total = 0;
};

MacReport count_macs(const ContractionPlan& plan);

/// Plain-text table of a plan's costs, one line per phase plus the total.
std::string format_mac_report(const MacReport& report);
std::string mac_report_json(const MacReport& report);

}  // namespace tnad
