// Copyright 2026 The AQA Desk Authors.
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
#include <functional>
#include <limits>
#include <vector>

#include "aqa/autodiff.hpp"
#include "aqa/corpus.hpp"
#include "aqa/environment.hpp"
#include "aqa/policy.hpp"

namespace aqa {

// Text sent to the environment for a rewrite: every token but the final EOS.
Tokens render_rewrite(const TokenIds& tokens, const Vocabulary& vocab);

struct Episode {
  Question q0;
  TokenIds source;
  std::vector<Rewrite> rewrites;
  std::vector<Tokens> texts;
  std::vector<RewardedAnswer> answers;

  std::size_t size() const { return answers.size(); }
  std::vector<double> rewards() const;
  double mean_reward() const;
  std::size_t failures() const;
};

// Everything a rollout needs besides the policy.
struct RolloutContext {
  const Vocabulary* vocab = nullptr;
  const Environment* env = nullptr;
  std::size_t context_snippets = 10;
};

// Queries the environment with each rewrite against q0's context and scores
// the answers against q0's gold answers.
Episode make_episode(const Question& q0, std::vector<Rewrite> rewrites, const RolloutContext& ctx);

// Same, for rewrites that did not come from the policy (no log-probabilities).
Episode make_text_episode(const Question& q0, std::vector<Tokens> texts, const RolloutContext& ctx);

Episode rollout(const Question& q0, const PolicyParameters& theta, const RolloutContext& ctx,
                std::size_t n, std::uint64_t seed);

// kIndependent draws a second batch of samples and uses its mean reward.
enum class BaselineKind { kLeaveOneOut, kBatchMean, kNone, kIndependent };

BaselineKind parse_baseline(const std::string& name);

std::vector<double> baseline(const Episode& episode, BaselineKind kind = BaselineKind::kLeaveOneOut);
// Baseline from an independent batch of samples: its mean reward for every slot.
std::vector<double> independent_baseline(const Episode& episode, const Episode& reference);

/// Surrogate whose gradient is the policy-gradient estimate:
/// mean_i log pi(q_i) * advantage_i + entropy_weight * mean_i H_i.
/// Throws when a stored log-probability no longer matches the policy.
ad::Var build_surrogate(ad::Graph& graph, const Episode& episode, const PolicyConfig& config,
                        const std::vector<double>& advantages, double entropy_weight);

// Ascent direction of the surrogate.
ad::Gradients reinforce_grad(const Episode& episode, const PolicyParameters& theta,
                             double entropy_weight, BaselineKind kind = BaselineKind::kLeaveOneOut);
ad::Gradients reinforce_grad(const Episode& episode, const PolicyParameters& theta,
                             double entropy_weight, const std::vector<double>& baselines);

struct PretrainConfig {
  std::size_t epochs = 3;
  double learning_rate = 3e-3;
  // Source groups per update; 0 means the whole corpus (full batch).
  std::size_t batch_sources = 16;
  std::uint64_t seed = 1;
};

struct PretrainResult {
  PolicyParameters theta;
  // Mean token negative log-likelihood at the start of each epoch, then once
  // more after the last one.
  std::vector<double> losses;
};

PretrainResult pretrain_supervised(const std::vector<ParaphrasePair>& pairs, const Vocabulary& vocab,
                                   PolicyParameters theta, const PretrainConfig& config);

double corpus_nll(const std::vector<ParaphrasePair>& pairs, const Vocabulary& vocab,
                  const PolicyParameters& theta);

struct TrainerConfig {
  double entropy_weight = 0.001;
  double learning_rate = 0.001;
  std::size_t batch_size = 64;
  std::size_t samples = 8;
  std::size_t max_steps = 20000;
  std::size_t validation_interval = 500;
  // Dev questions used for validation; 0 means all.
  std::size_t validation_questions = 0;
  std::uint64_t seed = 1;
  BaselineKind baseline = BaselineKind::kLeaveOneOut;
  std::size_t workers = 1;
  // Return the best-validated checkpoint; otherwise the final parameters.
  bool select_best = true;
};

struct TrainLogRow {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double mean_entropy = 0.0;
  double dev_greedy_reward = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = 0.0;
  double baseline_variance = 0.0;
};

struct TrainResult {
  PolicyParameters theta;
  std::vector<TrainLogRow> log;
  double best_dev_reward = 0.0;
  std::size_t best_step = 0;
};

double greedy_reward(const Dataset& dataset, const PolicyParameters& theta, const RolloutContext& ctx,
                     std::size_t limit = 0, std::size_t workers = 1);

TrainResult train(const Dataset& train_set, const Dataset& dev_set, const RolloutContext& ctx,
                  const PolicyParameters& theta0, const TrainerConfig& config,
                  const std::function<void(const TrainLogRow&)>& on_row = {});

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

struct VarianceSummary {
  double mean_variance = 0.0;
  std::size_t entries = 0;
  std::size_t trials = 0;
};

VarianceSummary estimator_variance(const Question& q0, const PolicyParameters& theta,
                                   const RolloutContext& ctx, std::size_t n, std::size_t trials,
                                   bool with_baseline, std::uint64_t seed);

}  // namespace aqa
