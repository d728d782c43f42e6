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

#include "aqa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "aqa/error.hpp"
#include "aqa/parallel.hpp"
#include "aqa/rng.hpp"

namespace aqa {

using ad::Graph;
using ad::Gradients;
using ad::Tensor;
using ad::Var;

namespace {

const Vocabulary& vocab_of(const RolloutContext& ctx) {
  if (ctx.vocab == nullptr || ctx.env == nullptr)
    throw PreconditionError("rollout context needs a vocabulary and an environment");
  return *ctx.vocab;
}

TokenIds encode_target(const Tokens& target, const Vocabulary& vocab, const PolicyConfig& config) {
  TokenIds ids = vocab.encode(target);
  if (ids.size() > config.max_len) ids.resize(config.max_len);
  ids.push_back(config.eos_id);
  return ids;
}

struct SourceGroup {
  TokenIds source;
  std::vector<TokenIds> targets;
};

std::vector<SourceGroup> group_pairs(const std::vector<ParaphrasePair>& pairs, const Vocabulary& vocab,
                                     const PolicyConfig& config) {
  std::vector<SourceGroup> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& p : pairs) {
    const auto [it, fresh] = index.try_emplace(join(p.source), groups.size());
    if (fresh) groups.push_back({vocab.encode(p.source), {}});
    groups[it->second].targets.push_back(encode_target(p.target, vocab, config));
  }
  return groups;
}

// Summed token NLL of one group, and its gradient when requested.
double group_nll(const SourceGroup& group, const PolicyParameters& theta, std::size_t& tokens,
                 Gradients* grads) {
  Graph g(const_cast<ad::ParameterStore*>(&theta.params));
  const ScoredBatch sb = score_batch(g, group.source, group.targets, theta.config);
  tokens += sb.scored_tokens;
  if (grads != nullptr) ad::accumulate(*grads, g.backward(sb.token_nll));
  return sb.token_nll.value().item();
}

double variance(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size());
}

}  // namespace

Tokens render_rewrite(const TokenIds& tokens, const Vocabulary& vocab) {
  Tokens out;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
    out.push_back(tokens[i] < vocab.size() ? vocab.token(tokens[i]) : vocab.token(Vocabulary::kUnk));
  return out;
}

std::vector<double> Episode::rewards() const {
  std::vector<double> r;
  r.reserve(answers.size());
  for (const auto& a : answers) r.push_back(a.reward);
  return r;
}

double Episode::mean_reward() const {
  if (answers.empty()) return 0.0;
  const auto r = rewards();
  return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
}

std::size_t Episode::failures() const {
  return static_cast<std::size_t>(std::count_if(
      answers.begin(), answers.end(), [](const RewardedAnswer& a) { return a.candidate.failed; }));
}

Episode make_text_episode(const Question& q0, std::vector<Tokens> texts, const RolloutContext& ctx) {
  const Vocabulary& vocab = vocab_of(ctx);
  Episode ep;
  ep.q0 = q0;
  ep.source = vocab.encode(q0.text);
  ep.texts = std::move(texts);
  const Tokens context = truncate_context(q0, ctx.context_snippets);
  for (const Tokens& text : ep.texts) {
    AnswerCandidate cand;
    try {
      cand = ctx.env->answer(text, context, q0.id);
    } catch (const std::exception&) {
      cand = AnswerCandidate{};
      cand.failed = true;
    }
    ep.answers.push_back(reward(cand, q0));
  }
  return ep;
}

Episode make_episode(const Question& q0, std::vector<Rewrite> rewrites, const RolloutContext& ctx) {
  const Vocabulary& vocab = vocab_of(ctx);
  std::vector<Tokens> texts;
  for (const Rewrite& r : rewrites) texts.push_back(render_rewrite(r.tokens, vocab));
  Episode ep = make_text_episode(q0, std::move(texts), ctx);
  ep.rewrites = std::move(rewrites);
  return ep;
}

Episode rollout(const Question& q0, const PolicyParameters& theta, const RolloutContext& ctx,
                std::size_t n, std::uint64_t seed) {
  if (n == 0) throw PreconditionError("rollout: n must be >= 1");
  const Vocabulary& vocab = vocab_of(ctx);
  return make_episode(q0, sample(vocab.encode(q0.text), theta, n, seed), ctx);
}

BaselineKind parse_baseline(const std::string& name) {
  if (name == "loo" || name == "leave-one-out") return BaselineKind::kLeaveOneOut;
  if (name == "mean") return BaselineKind::kBatchMean;
  if (name == "none") return BaselineKind::kNone;
  if (name == "independent") return BaselineKind::kIndependent;
  throw PreconditionError("unknown baseline '" + name + "'");
}

std::vector<double> baseline(const Episode& episode, BaselineKind kind) {
  const std::size_t n = episode.size();
  if (n == 0) throw PreconditionError("baseline: empty episode");
  const auto r = episode.rewards();
  const double total = std::accumulate(r.begin(), r.end(), 0.0);
  std::vector<double> b(n, 0.0);
  switch (kind) {
    case BaselineKind::kNone:
      break;
    case BaselineKind::kBatchMean:
      std::fill(b.begin(), b.end(), total / static_cast<double>(n));
      break;
    case BaselineKind::kLeaveOneOut:
      if (n > 1)
        for (std::size_t i = 0; i < n; ++i) b[i] = (total - r[i]) / static_cast<double>(n - 1);
      break;
    case BaselineKind::kIndependent:
      throw PreconditionError("baseline: independent baseline needs a reference episode");
  }
  return b;
}

std::vector<double> independent_baseline(const Episode& episode, const Episode& reference) {
  return std::vector<double>(episode.size(), reference.mean_reward());
}

Var build_surrogate(Graph& graph, const Episode& episode, const PolicyConfig& config,
                    const std::vector<double>& advantages, double entropy_weight) {
  const std::size_t n = episode.size();
  if (n == 0) throw PreconditionError("surrogate: empty episode");
  if (episode.rewrites.size() != n) throw PreconditionError("surrogate: episode has no policy rewrites");
  if (advantages.size() != n) throw PreconditionError("surrogate: one advantage per rewrite");
  if (entropy_weight < 0.0) throw PreconditionError("surrogate: entropy weight must be >= 0");
  std::vector<TokenIds> batch;
  for (const Rewrite& r : episode.rewrites) batch.push_back(r.tokens);
  const ScoredBatch sb = score_batch(graph, episode.source, batch, config);
  const Tensor& lp = sb.log_probs.value();
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(lp[i] - episode.rewrites[i].log_prob) > 1e-6)
      throw PreconditionError("surrogate: episode is off-policy (rewrite " + std::to_string(i) +
                              " log-prob " + std::to_string(episode.rewrites[i].log_prob) +
                              " vs " + std::to_string(lp[i]) + ")");
  const double inv_n = 1.0 / static_cast<double>(n);
  Var objective = ad::scale(ad::sum(sb.log_probs * graph.constant(Tensor::column(advantages))), inv_n);
  if (entropy_weight > 0.0)
    objective = objective + ad::scale(ad::sum(sb.entropies), entropy_weight * inv_n);
  return objective;
}

Gradients reinforce_grad(const Episode& episode, const PolicyParameters& theta, double entropy_weight,
                         const std::vector<double>& baselines) {
  const auto r = episode.rewards();
  if (baselines.size() != r.size()) throw PreconditionError("reinforce: one baseline per rewrite");
  std::vector<double> adv(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) adv[i] = r[i] - baselines[i];
  Graph g(const_cast<ad::ParameterStore*>(&theta.params));
  return g.backward(build_surrogate(g, episode, theta.config, adv, entropy_weight));
}

Gradients reinforce_grad(const Episode& episode, const PolicyParameters& theta, double entropy_weight,
                         BaselineKind kind) {
  return reinforce_grad(episode, theta, entropy_weight, baseline(episode, kind));
}

double corpus_nll(const std::vector<ParaphrasePair>& pairs, const Vocabulary& vocab,
                  const PolicyParameters& theta) {
  if (pairs.empty()) throw PreconditionError("corpus_nll: no pairs");
  std::size_t tokens = 0;
  double total = 0.0;
  for (const auto& group : group_pairs(pairs, vocab, theta.config))
    total += group_nll(group, theta, tokens, nullptr);
  return total / static_cast<double>(tokens);
}

PretrainResult pretrain_supervised(const std::vector<ParaphrasePair>& pairs, const Vocabulary& vocab,
                                   PolicyParameters theta, const PretrainConfig& config) {
  if (pairs.empty()) throw PreconditionError("pretrain: no paraphrase pairs");
  const auto groups = group_pairs(pairs, vocab, theta.config);
  const std::size_t per_batch = config.batch_sources == 0 ? groups.size() : config.batch_sources;
  ad::Adam adam(config.learning_rate);
  Rng rng(config.seed);
  PretrainResult result;
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (per_batch < groups.size()) rng.shuffle(order);
    double epoch_total = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += per_batch) {
      const std::size_t end = std::min(order.size(), begin + per_batch);
      Gradients grads;
      std::size_t tokens = 0;
      double total = 0.0;
      for (std::size_t k = begin; k < end; ++k) total += group_nll(groups[order[k]], theta, tokens, &grads);
      for (auto& [name, g] : grads)
        for (double& v : g.values()) v /= static_cast<double>(tokens);
      if (!ad::all_finite(grads))
        throw NumericError("pretrain: non-finite gradient in epoch " + std::to_string(epoch));
      adam.step(theta.params, grads);
      epoch_total += total;
      epoch_tokens += tokens;
    }
    result.losses.push_back(epoch_total / static_cast<double>(epoch_tokens));
  }
  result.losses.push_back(corpus_nll(pairs, vocab, theta));
  result.theta = std::move(theta);
  return result;
}

double greedy_reward(const Dataset& dataset, const PolicyParameters& theta, const RolloutContext& ctx,
                     std::size_t limit, std::size_t workers) {
  const Vocabulary& vocab = vocab_of(ctx);
  const std::size_t n =
      limit == 0 ? dataset.questions.size() : std::min(limit, dataset.questions.size());
  if (n == 0) return 0.0;
  std::vector<double> rewards(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const Question& q = dataset.questions[i];
    Rewrite r = greedy_decode(vocab.encode(q.text), theta);
    rewards[i] = make_episode(q, {std::move(r)}, ctx).answers[0].reward;
  });
  return std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(n);
}

TrainResult train(const Dataset& train_set, const Dataset& dev_set, const RolloutContext& ctx,
                  const PolicyParameters& theta0, const TrainerConfig& config,
                  const std::function<void(const TrainLogRow&)>& on_row) {
  if (config.entropy_weight < 0.0) throw PreconditionError("train: entropy weight must be >= 0");
  if (!(config.learning_rate > 0.0)) throw PreconditionError("train: learning rate must be positive");
  if (config.batch_size == 0 || config.samples == 0)
    throw PreconditionError("train: batch size and samples must be >= 1");
  if (config.max_steps > 0 && train_set.questions.empty())
    throw PreconditionError("train: empty training set");
  const std::size_t interval = config.validation_interval == 0 ? config.max_steps : config.validation_interval;

  TrainResult result;
  PolicyParameters theta = theta0;
  auto validate = [&] {
    if (dev_set.questions.empty()) return 0.0;
    return greedy_reward(dev_set, theta, ctx, config.validation_questions, config.workers);
  };

  TrainLogRow first;
  first.dev_greedy_reward = validate();
  result.log.push_back(first);
  if (on_row) on_row(first);
  result.best_dev_reward = first.dev_greedy_reward;
  result.theta = theta;

  Rng order_rng(config.seed);
  std::vector<std::size_t> order(train_set.questions.size());
  std::iota(order.begin(), order.end(), 0);
  order_rng.shuffle(order);
  std::size_t cursor = 0;

  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    std::vector<std::size_t> batch(config.batch_size);
    for (auto& idx : batch) {
      if (cursor == order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      idx = order[cursor++];
    }
    std::vector<Gradients> grads(batch.size());
    std::vector<double> rewards(batch.size()), entropies(batch.size());
    std::vector<std::vector<double>> baselines(batch.size());
    parallel_for(batch.size(), config.workers, [&](std::size_t b) {
      const Question& q = train_set.questions[batch[b]];
      const std::uint64_t seed = Rng::derive(config.seed, step, b);
      const Episode ep = rollout(q, theta, ctx, config.samples, seed);
      if (config.baseline == BaselineKind::kIndependent) {
        const Episode ref = rollout(q, theta, ctx, config.samples, Rng::derive(seed, 1, 0));
        baselines[b] = independent_baseline(ep, ref);
      } else {
        baselines[b] = baseline(ep, config.baseline);
      }
      grads[b] = reinforce_grad(ep, theta, config.entropy_weight, baselines[b]);
      rewards[b] = ep.mean_reward();
      double h = 0.0;
      for (const Rewrite& r : ep.rewrites)
        for (double e : r.entropies) h += e;
      entropies[b] = h / static_cast<double>(ep.size());
    });
    Gradients total;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const auto& g : grads) ad::accumulate(total, g, inv_b);
    if (!ad::all_finite(total))
      throw NumericError("train: non-finite gradient at step " + std::to_string(step));
    theta.params.axpy(config.learning_rate, total);

    TrainLogRow row;
    row.step = step;
    row.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) * inv_b;
    row.mean_entropy = std::accumulate(entropies.begin(), entropies.end(), 0.0) * inv_b;
    row.grad_norm = ad::global_norm(total);
    std::vector<double> all_baselines;
    for (const auto& b : baselines) all_baselines.insert(all_baselines.end(), b.begin(), b.end());
    row.baseline_variance = variance(all_baselines);
    if (step % interval == 0 || step == config.max_steps) {
      row.dev_greedy_reward = validate();
      if (row.dev_greedy_reward > result.best_dev_reward) {
        result.best_dev_reward = row.dev_greedy_reward;
        result.best_step = step;
        result.theta = theta;
      }
    }
    result.log.push_back(row);
    if (on_row) on_row(row);
  }
  if (!config.select_best) result.theta = std::move(theta);
  return result;
}

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "step\tmean_reward\tmean_entropy\tdev_greedy_reward\tgrad_norm\tbaseline_variance\n";
  char buf[256];
  for (const auto& r : log) {
    std::string dev = "nan";
    if (!std::isnan(r.dev_greedy_reward)) {
      std::snprintf(buf, sizeof buf, "%.6f", r.dev_greedy_reward);
      dev = buf;
    }
    std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%s\t%.6g\t%.6g\n", r.step, r.mean_reward,
                  r.mean_entropy, dev.c_str(), r.grad_norm, r.baseline_variance);
    out << buf;
  }
}

VarianceSummary estimator_variance(const Question& q0, const PolicyParameters& theta,
                                   const RolloutContext& ctx, std::size_t n, std::size_t trials,
                                   bool with_baseline, std::uint64_t seed) {
  if (trials < 2) throw PreconditionError("estimator_variance: trials must be >= 2");
  std::vector<double> mean, m2;
  for (std::size_t t = 0; t < trials; ++t) {
    const Episode ep = rollout(q0, theta, ctx, n, Rng::derive(seed, t, 0));
    const Gradients g = reinforce_grad(
        ep, theta, 0.0, with_baseline ? BaselineKind::kLeaveOneOut : BaselineKind::kNone);
    std::vector<double> flat;
    for (const auto& [name, tensor] : g) flat.insert(flat.end(), tensor.values().begin(), tensor.values().end());
    if (t == 0) {
      mean.assign(flat.size(), 0.0);
      m2.assign(flat.size(), 0.0);
    }
    const double k = static_cast<double>(t + 1);
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double d = flat[i] - mean[i];
      mean[i] += d / k;
      m2[i] += d * (flat[i] - mean[i]);
    }
  }
  VarianceSummary s;
  s.entries = mean.size();
  s.trials = trials;
  double total = 0.0;
  for (double v : m2) total += v / static_cast<double>(trials - 1);
  s.mean_variance = s.entries == 0 ? 0.0 : total / static_cast<double>(s.entries);
  return s;
}

}  // namespace aqa
