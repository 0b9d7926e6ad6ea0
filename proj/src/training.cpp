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

#include "tnad/training.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"
#include <numeric>
#include <random>

#include "tnad/errors.hpp"

namespace tnad {
namespace {

constexpr double kLogClamp = 1e-30;

}  // namespace

void LossParams::validate() const {
  if (!(mu > 0.0) || !(delta > 0.0)) raise(ErrorKind::Config, "loss parameters mu and delta must be positive");
}

LossParams default_loss_params(const TnModel& model) {
  return model.layers.size() == 2 ? LossParams{50.0, 15.0} : LossParams{50.0, 25.0};
}

double loss(double norm_sq, const LossParams& params) {
  const double z = (norm_sq - params.mu) / params.delta;
  double value = params.delta * params.delta * (std::sqrt(1.0 + z * z) - 1.0);
  if (norm_sq < 1.0) {
    const double lg = std::log(std::max(norm_sq, kLogClamp) / params.mu);
    value += lg * lg;
  }
  return value;
}

double loss_derivative(double norm_sq, const LossParams& params) {
  const double z = (norm_sq - params.mu) / params.delta;
  double value = (norm_sq - params.mu) / std::sqrt(1.0 + z * z);
  if (norm_sq < 1.0 && norm_sq > kLogClamp) value += 2.0 * std::log(norm_sq / params.mu) / norm_sq;
  return value;
}

WeightBuffers zero_buffers(const TnModel& model) {
  WeightBuffers out;
  for (const auto& layer : model.layers) {
    auto& row = out.emplace_back();
    for (const auto& t : layer.sites) row.emplace_back(t.size(), 0.0);
  }
  return out;
}

LossGradient accumulate_grad(const ContractionPlan& plan, const TnModel& model, const EmbeddedMps& mps,
                             const LossParams& params, WeightBuffers& grad, double scale) {
  const auto slots = execute_plan_slots(plan, model, mps);
  LossGradient result;
  result.norm_sq = slots[plan.result_slot].front();
  if (!std::isfinite(result.norm_sq)) {
    for (std::size_t si = 0; si < plan.steps.size(); ++si) {
      const auto& values = slots[plan.steps[si].out];
      if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); }))
        raise(ErrorKind::Numeric, "non-finite value produced by step " + std::to_string(si) + " (" +
                                      to_string(plan.steps[si].kind) + ", site " +
                                      std::to_string(plan.steps[si].site) + ")");
    }
    raise(ErrorKind::Numeric, "non-finite squared norm");
  }
  result.loss = loss(result.norm_sq, params);

  std::vector<std::vector<double>> adj(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) adj[s].assign(slots[s].size(), 0.0);
  adj[plan.result_slot][0] = loss_derivative(result.norm_sq, params) * scale;

  for (std::size_t si = plan.steps.size(); si-- > 0;) {
    const ContractionStep& step = plan.steps[si];
    const std::vector<double>& g_out = adj[step.out];
    const std::vector<double>& a = slots[step.lhs];
    std::vector<double>& g_a = adj[step.lhs];
    const bool need_a = step.lhs >= plan.input_sites;

    switch (step.kind) {
      case StepKind::NormSquare: {
        for (std::size_t i = 0; i < a.size(); ++i) g_a[i] += 2.0 * a[i] * g_out[0];
        break;
      }
      case StepKind::VerticalContract: {
        const auto& wshape = model.layers[step.layer].sites[step.site].shape();
        const auto w = model.layers[step.layer].sites[step.site].data();
        std::vector<double>& g_w = grad[step.layer][step.site];
        const SiteShape in = plan.slot_shapes[step.lhs];
        const SiteShape out = step.out_shape;
        const std::size_t p_in = wshape[0], p_out = wshape[1], ls_dim = wshape[2], rs_dim = wshape[3];
        for (std::size_t p = 0; p < p_in; ++p)
          for (std::size_t po = 0; po < p_out; ++po)
            for (std::size_t lm = 0; lm < in.left; ++lm)
              for (std::size_t ls = 0; ls < ls_dim; ++ls)
                for (std::size_t rm = 0; rm < in.right; ++rm)
                  for (std::size_t rs = 0; rs < rs_dim; ++rs) {
                    const double go =
                        g_out[(po * out.left + lm * ls_dim + ls) * out.right + rm * rs_dim + rs];
                    const std::size_t wi = ((p * p_out + po) * ls_dim + ls) * rs_dim + rs;
                    const std::size_t ai = (p * in.left + lm) * in.right + rm;
                    g_w[wi] += a[ai] * go;
                    if (need_a) g_a[ai] += w[wi] * go;
                  }
        break;
      }
      default: {
        const std::vector<double>& b = slots[step.rhs];
        std::vector<double>& g_b = adj[step.rhs];
        const bool need_b = step.rhs >= plan.input_sites;
        const SiteShape sa = plan.slot_shapes[step.lhs];
        const SiteShape sb = plan.slot_shapes[step.rhs];
        const SiteShape so = step.out_shape;
        const std::size_t m_dim = sa.right;
        for (std::size_t p = 0; p < so.phys; ++p) {
          const std::size_t pa = sa.phys > 1 ? p : 0;
          const std::size_t pb = sb.phys > 1 ? p : 0;
          for (std::size_t l = 0; l < so.left; ++l)
            for (std::size_t r = 0; r < so.right; ++r) {
              const double go = g_out[(p * so.left + l) * so.right + r];
              if (go == 0.0) continue;
              for (std::size_t m = 0; m < m_dim; ++m) {
                const std::size_t ai = (pa * sa.left + l) * sa.right + m;
                const std::size_t bi = (pb * sb.left + m) * sb.right + r;
                if (need_a) g_a[ai] += go * b[bi];
                if (need_b) g_b[bi] += go * a[ai];
              }
            }
        }
        break;
      }
    }
  }
  return result;
}

WeightBuffers grad(const TnModel& model, const EmbeddedMps& mps, const LossParams& params) {
  params.validate();
  const ContractionPlan plan = plan_model(model);
  WeightBuffers g = zero_buffers(model);
  accumulate_grad(plan, model, mps, params, g);
  return g;
}

void TrainConfig::validate() const {
  if (batch_size == 0) raise(ErrorKind::Config, "batch_size must be positive");
  if (!(learning_rate > 0.0)) raise(ErrorKind::Config, "learning_rate must be positive");
  if (patience > max_epochs) raise(ErrorKind::Config, "patience exceeds max_epochs");
  if (min_delta < 0.0) raise(ErrorKind::Config, "min_delta must be non-negative");
  if (train_fraction < 0.0 || valid_fraction < 0.0 || test_fraction < 0.0 ||
      train_fraction + valid_fraction + test_fraction > 1.0 + 1e-12)
    raise(ErrorKind::Config, "split fractions must be non-negative and sum to at most 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
    raise(ErrorKind::Config, "invalid Adam hyperparameters");
}

TrainConfig default_train_config(const TnModel& model) {
  TrainConfig cfg;
  cfg.learning_rate = model.layers.size() == 2 ? 1e-2 : 4e-3;
  return cfg;
}

AdamState::AdamState(const TnModel& model, double beta1, double beta2, double epsilon)
    : m_(zero_buffers(model)), v_(zero_buffers(model)), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamState::step(TnModel& model, const WeightBuffers& grad, double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    for (std::size_t s = 0; s < model.layers[l].sites.size(); ++s) {
      auto w = model.layers[l].sites[s].data();
      const auto& g = grad[l][s];
      auto& m = m_[l][s];
      auto& v = v_[l][s];
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        w[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + epsilon_);
      }
    }
  }
}

std::string TrainHistory::to_json() const {
  nlohmann::ordered_json j;
  j["initial_valid_loss"] = initial_valid_loss;
  j["best_epoch"] = best_epoch;
  j["stopped_epoch"] = stopped_epoch;
  j["early_stopped"] = early_stopped;
  j["aborted"] = aborted;
  j["diagnostic"] = diagnostic;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : epochs)
    arr.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"valid_loss", e.valid_loss}});
  j["epochs"] = arr;
  return j.dump(2);
}

double mean_loss(const ContractionPlan& plan, const TnModel& model, std::span<const EmbeddedMps> events,
                 const LossParams& params) {
  if (events.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : events) sum += loss(execute_plan(plan, model, e), params);
  return sum / static_cast<double>(events.size());
}

TrainResult train(const TnModel& initial, std::span<const EmbeddedMps> train_events,
                  std::span<const EmbeddedMps> valid_events, const TrainConfig& cfg, const LossParams& loss_params) {
  cfg.validate();
  loss_params.validate();
  TrainResult result{initial, {}};
  if (cfg.max_epochs == 0) return result;
  if (train_events.empty() || valid_events.empty())
    raise(ErrorKind::Config, "training needs non-empty train and validation splits");

  const ContractionPlan plan = plan_model(initial);
  TnModel model = initial;
  AdamState adam(model, cfg.beta1, cfg.beta2, cfg.epsilon);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory& history = result.history;
  double best = mean_loss(plan, model, valid_events, loss_params);
  history.initial_valid_loss = best;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      WeightBuffers g = zero_buffers(model);
      const double scale = 1.0 / static_cast<double>(end - begin);
      try {
        for (std::size_t i = begin; i < end; ++i)
          epoch_loss += accumulate_grad(plan, model, train_events[order[i]], loss_params, g, scale).loss;
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::Numeric) throw;
        history.aborted = true;
        history.stopped_epoch = epoch;
        history.diagnostic = "epoch " + std::to_string(epoch) + ", batch starting at " + std::to_string(begin) +
                             ": " + err.what();
        return result;
      }
      adam.step(model, g, cfg.learning_rate);
    }
    EpochRecord record{epoch, epoch_loss / static_cast<double>(order.size()),
                       mean_loss(plan, model, valid_events, loss_params)};
    history.epochs.push_back(record);
    history.stopped_epoch = epoch;
    if (!std::isfinite(record.valid_loss) || !std::isfinite(record.train_loss)) {
      history.aborted = true;
      history.diagnostic = "loss became non-finite at epoch " + std::to_string(epoch);
      return result;
    }
    if (best - record.valid_loss > cfg.min_delta) {
      best = record.valid_loss;
      history.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      history.early_stopped = true;
      break;
    }
  }
  return result;
}

ScoreCalibration calibrate(std::span<const double> background_norms) {
  if (background_norms.empty()) raise(ErrorKind::Config, "calibration needs background events");
  std::vector<double> v(background_norms.begin(), background_norms.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double median = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (lower + median);
  }
  return {median};
}

double anomaly_score(double norm_sq, const ScoreCalibration& calibration) {
  return std::abs(norm_sq - calibration.median_bkg);
}

std::vector<double> norms(const ContractionPlan& plan, const TnModel& model, std::span<const EmbeddedMps> events) {
  std::vector<double> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(execute_plan(plan, model, e));
  return out;
}

}  // namespace tnad
