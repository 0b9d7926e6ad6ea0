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

// Interpreter shared by the floating-point, instrumented, and fixed-point
// executors. The arithmetic policy decides how products accumulate and how an
// accumulator is turned back into a stored value.

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "tnad/contraction.hpp"
#include "tnad/errors.hpp"

namespace tnad::detail {

template <class V>
struct Slot {
  SiteShape shape;
  std::vector<V> values;
};

template <class V>
using WeightTable = std::vector<std::vector<std::span<const V>>>;

[[noreturn]] inline void plan_failure(const ContractionPlan& plan, std::size_t step_index, const std::string& what) {
  const ContractionStep& step = plan.steps[step_index];
  raise(ErrorKind::PlanIntegrity, "step " + std::to_string(step_index) + " (" + to_string(step.kind) + ", layer " +
                                      std::to_string(step.layer) + ", site " + std::to_string(step.site) + "): " + what);
}

template <class Policy>
std::vector<Slot<typename Policy::value_type>> run_plan(const ContractionPlan& plan, const TnModel& model,
                                                        const WeightTable<typename Policy::value_type>& weights,
                                                        std::vector<Slot<typename Policy::value_type>> inputs,
                                                        Policy& policy) {
  using V = typename Policy::value_type;
  using A = typename Policy::acc_type;
  std::vector<Slot<V>> slots = std::move(inputs);
  slots.resize(plan.slot_shapes.size());

  for (std::size_t si = 0; si < plan.steps.size(); ++si) {
    const ContractionStep& step = plan.steps[si];
    if (step.lhs >= slots.size() || step.out >= slots.size() || step.out < plan.input_sites)
      plan_failure(plan, si, "slot index out of range");
    const Slot<V>& a = slots[step.lhs];
    if (a.values.size() != a.shape.volume()) plan_failure(plan, si, "operand slot is empty");
    Slot<V> result;

    switch (step.kind) {
      case StepKind::VerticalContract: {
        if (step.layer >= model.layers.size() || step.site >= model.layers[step.layer].n_sites)
          plan_failure(plan, si, "operator site does not exist");
        const auto& wshape = model.layers[step.layer].sites[step.site].shape();
        const std::span<const V> w = weights[step.layer][step.site];
        const std::size_t p_in = wshape[0], p_out = wshape[1], ls_dim = wshape[2], rs_dim = wshape[3];
        if (a.shape.phys != p_in)
          plan_failure(plan, si, "MPS physical extent " + std::to_string(a.shape.phys) + " != operator phys_in " +
                                     std::to_string(p_in));
        const std::size_t lm_dim = a.shape.left, rm_dim = a.shape.right;
        result.shape = {p_out, lm_dim * ls_dim, rm_dim * rs_dim};
        result.values.resize(result.shape.volume());
        for (std::size_t po = 0; po < p_out; ++po)
          for (std::size_t lm = 0; lm < lm_dim; ++lm)
            for (std::size_t ls = 0; ls < ls_dim; ++ls)
              for (std::size_t rm = 0; rm < rm_dim; ++rm)
                for (std::size_t rs = 0; rs < rs_dim; ++rs) {
                  A acc = policy.zero();
                  for (std::size_t p = 0; p < p_in; ++p)
                    policy.mac(acc, a.values[(p * lm_dim + lm) * rm_dim + rm],
                               w[((p * p_out + po) * ls_dim + ls) * rs_dim + rs]);
                  const std::size_t l = lm * ls_dim + ls, r = rm * rs_dim + rs;
                  result.values[(po * result.shape.left + l) * result.shape.right + r] = policy.finish(acc);
                }
        break;
      }
      case StepKind::NormSquare: {
        result.shape = {1, 1, 1};
        A acc = policy.zero();
        for (const V& v : a.values) policy.mac_norm(acc, v, v);
        result.values.assign(1, policy.finish_norm(acc));
        break;
      }
      default: {
        if (step.rhs >= slots.size()) plan_failure(plan, si, "slot index out of range");
        const Slot<V>& b = slots[step.rhs];
        if (b.values.size() != b.shape.volume()) plan_failure(plan, si, "operand slot is empty");
        if (a.shape.right != b.shape.left)
          plan_failure(plan, si, "bond mismatch " + std::to_string(a.shape.right) + " vs " +
                                     std::to_string(b.shape.left));
        if (a.shape.phys != 1 && b.shape.phys != 1) plan_failure(plan, si, "both operands carry a physical leg");
        const std::size_t p_dim = std::max(a.shape.phys, b.shape.phys);
        const std::size_t l_dim = a.shape.left, m_dim = a.shape.right, r_dim = b.shape.right;
        const bool a_phys = a.shape.phys > 1;
        const bool b_phys = b.shape.phys > 1;
        result.shape = {p_dim, l_dim, r_dim};
        result.values.resize(result.shape.volume());
        // Padded block rows and columns multiply zeros and are not stored.
        const std::size_t l_blk = std::max(step.block.left, l_dim), r_blk = std::max(step.block.right, r_dim);
        const V zero_value{};
        for (std::size_t p = 0; p < p_dim; ++p) {
          const V* pa = a.values.data() + (a_phys ? p : 0) * l_dim * m_dim;
          const V* pb = b.values.data() + (b_phys ? p : 0) * m_dim * r_dim;
          for (std::size_t l = 0; l < l_blk; ++l)
            for (std::size_t r = 0; r < r_blk; ++r) {
              A acc = policy.zero();
              for (std::size_t m = 0; m < m_dim; ++m)
                policy.mac(acc, l < l_dim ? pa[l * m_dim + m] : zero_value, r < r_dim ? pb[m * r_dim + r] : zero_value);
              if (l < l_dim && r < r_dim) result.values[(p * l_dim + l) * r_dim + r] = policy.finish(acc);
            }
        }
        break;
      }
    }
    if (!(result.shape == step.out_shape))
      plan_failure(plan, si, "result shape differs from the planned shape");
    policy.end_step(si);
    slots[step.out] = std::move(result);
  }
  return slots;
}

template <class V, class Convert>
std::vector<Slot<V>> input_slots(const ContractionPlan& plan, const EmbeddedMps& mps, Convert convert) {
  if (mps.n_sites != plan.input_sites || mps.phys_dim != plan.input_phys)
    raise(ErrorKind::PlanIntegrity, "MPS with " + std::to_string(mps.n_sites) + " sites of dimension " +
                                        std::to_string(mps.phys_dim) + " does not fit a plan for " +
                                        std::to_string(plan.input_sites) + " sites of dimension " +
                                        std::to_string(plan.input_phys));
  std::vector<Slot<V>> slots(plan.input_sites);
  for (std::size_t s = 0; s < plan.input_sites; ++s) {
    slots[s].shape = {mps.phys_dim, 1, 1};
    for (double v : mps.site(s)) slots[s].values.push_back(convert(v));
  }
  return slots;
}

inline void check_model_fits(const ContractionPlan& plan, const TnModel& model) {
  if (model.layers.empty() || model.input_sites() != plan.input_sites || model.input_phys() != plan.input_phys)
    raise(ErrorKind::PlanIntegrity, "model does not match the plan's input dimensions");
}

}  // namespace tnad::detail
