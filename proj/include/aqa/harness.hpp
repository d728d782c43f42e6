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
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aqa/config.hpp"
#include "aqa/corpus.hpp"
#include "aqa/environment.hpp"
#include "aqa/error.hpp"
#include "aqa/policy.hpp"
#include "aqa/selector.hpp"
#include "aqa/trainer.hpp"

namespace aqa {

enum class DecodeMode { kSample, kBeam, kGreedy };

DecodeMode parse_decode_mode(const std::string& name);
std::string decode_mode_name(DecodeMode mode);

// The designated top hypothesis (greedy, or the best beam) comes first.
// Sampling mode fills the remaining n - 1 slots with independent samples.
std::vector<Rewrite> generate_rewrites(const TokenIds& source, const PolicyParameters& theta, std::size_t n,
                                       DecodeMode mode, std::uint64_t seed);

enum class RewriteSource { kPolicy, kSubquery };

struct EvalConfig {
  std::size_t n = 20;
  DecodeMode decode = DecodeMode::kSample;
  std::uint64_t seed = 11;
  RewriteSource source = RewriteSource::kPolicy;
  std::size_t workers = 1;
};

struct StrategyScore {
  std::string name;
  double em = 0.0;  // percentages
  double f1 = 0.0;
  std::size_t failures = 0;
};

struct DetailRow {
  std::string id;
  std::string strategy;
  Tokens answer;
  double em = 0.0;
  double f1 = 0.0;
};

struct SplitReport {
  std::string split;
  std::size_t questions = 0;
  std::vector<StrategyScore> strategies;
  std::vector<DetailRow> details;

  const StrategyScore& at(const std::string& name) const;
};

/// Scores identity, TopHyp, Voting, MaxConf, CNN (when phi is given) and the
/// oracle over the rewrites plus the original question. With the subquery
/// source, theta may be null and the rewrites are the top-ranked subqueries.
SplitReport evaluate(const Dataset& dataset, const PolicyParameters* theta, const SelectorParameters* phi,
                     const RolloutContext& ctx, const EvalConfig& config);

struct Headroom {
  double em = 0.0;
  double f1 = 0.0;
};

Headroom headroom(const Dataset& dataset, const PolicyParameters& theta, const RolloutContext& ctx,
                  const EvalConfig& config);

// Throws when some strategy beats the oracle.
void check_oracle_dominance(const SplitReport& report);

// Table of strategy x {split EM, split F1}; rows follow the first report.
void write_eval_table(const std::vector<SplitReport>& reports, std::ostream& out);
void write_eval_details(const SplitReport& report, std::ostream& out);

struct ExperimentConfig {
  std::filesystem::path work_dir = "run";

  std::string data_source = "synthetic";
  std::filesystem::path train_path, dev_path, test_path, paraphrase_path;
  std::uint64_t data_seed = 7;
  GeneratorConfig generator;
  std::size_t vocab_max = 50000;
  double jaccard_threshold = 0.5;
  std::size_t max_per_source = 4;

  std::string environment = "reference";
  std::vector<std::string> env_command;
  std::string env_host;
  std::uint16_t env_port = 0;
  std::size_t context_snippets = 10;

  PolicyConfig policy;
  std::uint64_t policy_seed = 3;
  PretrainConfig pretrain;
  TrainerConfig rl;

  std::size_t rollout_n = 20;
  // Training questions turned into selector data; 0 means all.
  std::size_t rollout_questions = 0;
  std::uint64_t rollout_seed = 5;

  SelectorConfig selector;
  SelectorTrainConfig selector_train;
  std::uint64_t selector_seed = 9;
  std::filesystem::path embeddings;

  EvalConfig eval;
  bool eval_subquery = true;
  std::size_t prefix_k = 3;

  std::size_t workers = 1;

  // Relative paths resolve against base_dir.
  static ExperimentConfig from(const Config& config, const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);
};

const std::vector<std::string>& stage_names();

// Files under the work directory.
struct RunLayout {
  std::filesystem::path root;
  std::filesystem::path data_dir() const { return root / "data"; }
  std::filesystem::path train() const { return data_dir() / "train.jsonl"; }
  std::filesystem::path dev() const { return data_dir() / "dev.jsonl"; }
  std::filesystem::path test() const { return data_dir() / "test.jsonl"; }
  std::filesystem::path paraphrases() const { return data_dir() / "paraphrases.jsonl"; }
  std::filesystem::path vocab() const { return data_dir() / "vocab.txt"; }
  std::filesystem::path pretrained() const { return root / "policy_pretrained"; }
  std::filesystem::path pretrain_log() const { return root / "pretrain_log.tsv"; }
  std::filesystem::path policy() const { return root / "policy_rl"; }
  std::filesystem::path train_log() const { return root / "train_log.tsv"; }
  std::filesystem::path selector_train() const { return root / "selector_train.jsonl"; }
  std::filesystem::path selector_dev() const { return root / "selector_dev.jsonl"; }
  std::filesystem::path selector() const { return root / "selector"; }
  std::filesystem::path selector_log() const { return root / "selector_log.tsv"; }
  std::filesystem::path eval_table() const { return root / "eval.tsv"; }
  std::filesystem::path eval_details(const std::string& split) const {
    return root / ("eval_details_" + split + ".tsv");
  }
  std::filesystem::path subquery_table() const { return root / "misubquery.jsonl"; }
  std::filesystem::path analysis() const { return root / "analysis.tsv"; }
  std::filesystem::path report() const { return root / "report.tsv"; }
  std::filesystem::path ledger() const { return root / "stages.tsv"; }
};

class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("stage " + stage + " failed: " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

std::unique_ptr<Environment> make_environment(const ExperimentConfig& config);

class Experiment {
 public:
  explicit Experiment(ExperimentConfig config, std::ostream* log = nullptr);

  const ExperimentConfig& config() const { return config_; }
  const RunLayout& layout() const { return layout_; }

  // Stages recorded as complete in the ledger.
  std::vector<std::string> completed() const;

  // Runs one stage unconditionally and records it.
  void run_stage(const std::string& stage);
  // Runs every stage not yet completed, in order; returns the stages run.
  std::vector<std::string> run_all();

 private:
  void datagen();
  void pretrain();
  void train_rl();
  void rollout();
  void train_selector_stage();
  void evaluate_stage();
  void analyze();
  void misubquery();
  void report();

  void mark_done(const std::string& stage);
  void say(const std::string& message);
  Environment& env();
  const Vocabulary& vocab();

  ExperimentConfig config_;
  RunLayout layout_;
  std::ostream* log_;
  std::unique_ptr<Environment> env_;
  std::optional<Vocabulary> vocab_;
};

}  // namespace aqa
