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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "aqa/config.hpp"
#include "aqa/error.hpp"
#include "aqa/harness.hpp"
#include "aqa/rng.hpp"
#include "json.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kStageFailure = 2;

aqa::ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  aqa::Config c = aqa::Config::load(path);
  for (const auto& o : overrides) {
    const auto dot = o.find('.');
    const auto eq = o.find('=');
    if (dot == std::string::npos || eq == std::string::npos || dot > eq)
      throw aqa::PreconditionError("--set expects section.key=value, got '" + o + "'");
    c.set(o.substr(0, dot), o.substr(dot + 1, eq - dot - 1), o.substr(eq + 1));
  }
  return aqa::ExperimentConfig::from(c, std::filesystem::absolute(path).parent_path());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active question reformulation: data generation, policy training, answer selection and evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override a config value, section.key=value");
    return sub;
  };

  const std::map<std::string, std::string> stage_help = {
      {"datagen", "generate or import datasets, paraphrase pairs and the vocabulary"},
      {"pretrain", "supervised warm-start of the reformulation policy"},
      {"train-rl", "policy-gradient training against the environment"},
      {"rollout", "sample rewrites and build selector training data"},
      {"train-selector", "train the answer selector"},
      {"evaluate", "score every answer-selection strategy on dev and test"},
      {"misubquery", "rank mutual-information subqueries for the test set"},
      {"analyze", "question statistics for original, rewritten and subquery text"},
      {"report", "summarise evaluation and training into report.tsv"}};
  std::map<CLI::App*, std::string> stage_commands;
  for (const auto& stage : aqa::stage_names())
    stage_commands[with_config(app.add_subcommand(stage, stage_help.at(stage)))] = stage;

  auto* run = with_config(app.add_subcommand("run", "run every stage not yet completed"));

  auto* decode = with_config(app.add_subcommand("decode", "print rewrites of a split as JSONL"));
  std::string split = "test", mode = "greedy";
  std::size_t n = 1;
  decode->add_option("--split", split, "train, dev or test")->check(CLI::IsMember({"train", "dev", "test"}));
  decode->add_option("--mode", mode, "greedy, beam or sample")->check(CLI::IsMember({"greedy", "beam", "sample"}));
  decode->add_option("-n", n, "rewrites per question")->check(CLI::PositiveNumber);

  auto* serve = app.add_subcommand("serve-env", "answer JSON-lines requests on stdin with the reference environment");
  std::vector<std::string> serve_data;
  std::size_t snippets = 10;
  serve->add_option("--data", serve_data, "dataset JSONL files holding the contexts")->required()->check(CLI::ExistingFile);
  serve->add_option("--snippets", snippets, "context snippets per question")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (serve->parsed()) {
      std::map<std::string, aqa::Question> questions;
      for (const auto& path : serve_data)
        for (auto& q : aqa::load_dataset(path).questions) questions.emplace(q.id, std::move(q));
      aqa::ReferenceEnvironment env;
      aqa::serve_environment(env, questions, std::cin, std::cout, snippets);
      return kOk;
    }

    aqa::ExperimentConfig config;
    try {
      config = load_config(config_path, overrides);
    } catch (const aqa::Error& e) {
      std::cerr << "config: " << e.what() << '\n';
      return kUsage;
    }
    aqa::Experiment experiment(config, &std::cerr);

    if (run->parsed()) {
      const auto ran = experiment.run_all();
      if (ran.empty()) std::cerr << "all stages already complete\n";
      return kOk;
    }
    if (decode->parsed()) {
      const auto& layout = experiment.layout();
      const auto path = split == "train" ? layout.train() : split == "dev" ? layout.dev() : layout.test();
      const aqa::Dataset data = aqa::load_dataset(path);
      const aqa::PolicyParameters theta = aqa::load_policy(layout.policy());
      const aqa::Vocabulary vocab = aqa::Vocabulary::load(layout.vocab());
      for (std::size_t i = 0; i < data.questions.size(); ++i) {
        const auto& q = data.questions[i];
        const auto rewrites = aqa::generate_rewrites(vocab.encode(q.text), theta, n, aqa::parse_decode_mode(mode),
                                                     aqa::Rng::derive(config.eval.seed, i, 0));
        for (const auto& r : rewrites) {
          nlohmann::json j{{"id", q.id}, {"rewrite", aqa::join(aqa::render_rewrite(r.tokens, vocab))},
                           {"log_prob", r.log_prob}};
          std::cout << j.dump() << '\n';
        }
      }
      return kOk;
    }
    for (const auto& [sub, stage] : stage_commands) {
      if (!sub->parsed()) continue;
      experiment.run_stage(stage);
      return kOk;
    }
  } catch (const aqa::StageError& e) {
    std::cerr << e.what() << '\n';
    return kStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStageFailure;
  }
  return kUsage;
}
