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
#include <span>
#include <string>
#include <vector>

#include "tnad/contraction.hpp"
#include "tnad/embedding.hpp"
#include "tnad/model.hpp"

namespace tnad {

/// Target squared norm and Huber smoothing scale.
struct LossParams {
  double mu = 50.0;
  double delta = 25.0;
  void validate() const;
};

/// Reference loss settings: (50, 25) for one layer, (50, 15) for a cascade.
LossParams default_loss_params(const TnModel& model);

/// Pseudo-Huber loss on the squared norm plus the collapse penalty
/// ln^2(n / mu) for n < 1. The logarithm argument is clamped at 1e-30.
double loss(double norm_sq, const LossParams& params);
double loss_derivative(double norm_sq, const LossParams& params);

/// Gradient buffers shaped like the model weights: [layer][site] -> flat buffer.
using WeightBuffers = std::vector<std::vector<std::vector<double>>>;

WeightBuffers zero_buffers(const TnModel& model);

struct LossGradient {
  double norm_sq = 0.0;
  double loss = 0.0;
};

/// Reverse-mode gradient of the loss for one event, accumulated into `grad`
/// with weight `scale`.
LossGradient accumulate_grad(const ContractionPlan& plan, const TnModel& model, const EmbeddedMps& mps,
                             const LossParams& params, WeightBuffers& grad, double scale = 1.0);

/// Convenience wrapper returning fresh buffers.
WeightBuffers grad(const TnModel& model, const EmbeddedMps& mps, const LossParams& params);

struct TrainConfig {
  std::size_t batch_size = 2048;
  double learning_rate = 4e-3;
  std::size_t max_epochs = 200;
  std::size_t patience = 50;
  double min_delta = 1e-4;
  std::uint64_t seed = 0;
  double train_fraction = 0.70;
  double valid_fraction = 0.05;
  double test_fraction = 0.25;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Reference optimizer settings: lr 4e-3 for one layer, 1e-2 for a cascade.
TrainConfig default_train_config(const TnModel& model);

class AdamState {
 public:
  AdamState(const TnModel& model, double beta1, double beta2, double epsilon);

  void step(TnModel& model, const WeightBuffers& grad, double learning_rate);
  std::uint64_t steps() const noexcept { return t_; }
  const WeightBuffers& first_moment() const noexcept { return m_; }
  const WeightBuffers& second_moment() const noexcept { return v_; }

 private:
  WeightBuffers m_;
  WeightBuffers v_;
  double beta1_, beta2_, epsilon_;
  std::uint64_t t_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  double initial_valid_loss = 0.0;
  std::size_t best_epoch = 0;  // 0 means the initial weights were never beaten
  std::size_t stopped_epoch = 0;
  bool early_stopped = false;
  bool aborted = false;
  std::string diagnostic;

  std::string to_json() const;
};

struct TrainResult {
  TnModel model;
  TrainHistory history;
};

/// Mean loss of the model over a set of embedded events.
double mean_loss(const ContractionPlan& plan, const TnModel& model, std::span<const EmbeddedMps> events,
                 const LossParams& params);

/// Minibatch Adam with early stopping on the validation loss; returns the
/// best-validation checkpoint.
TrainResult train(const TnModel& initial, std::span<const EmbeddedMps> train_events,
                  std::span<const EmbeddedMps> valid_events, const TrainConfig& cfg, const LossParams& loss_params);

/// Median of background squared norms.
ScoreCalibration calibrate(std::span<const double> background_norms);

/// |norm_sq - median_bkg|
double anomaly_score(double norm_sq, const ScoreCalibration& calibration);

/// Squared norms of many events through one plan.
std::vector<double> norms(const ContractionPlan& plan, const TnModel& model, std::span<const EmbeddedMps> events);

}  // namespace tnad
