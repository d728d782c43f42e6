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

#include "doctest.h"

#include <sstream>

#include "aqa/config.hpp"
#include "aqa/error.hpp"
#include "aqa/harness.hpp"
#include "helpers.hpp"
#include "toy_tasks.hpp"

using namespace aqa;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(
[run]
work_dir = run

[data]
seed = 7
train_questions = 60
validation_questions = 20
test_questions = 20

[policy]
embedding_dim = 8
hidden = 8
attention_dim = 8
max_len = 8

[pretrain]
epochs = 2

[rl]
learning_rate = 0.1
batch_size = 4
samples = 4
max_steps = 4
validation_interval = 2
validation_questions = 10

[rollout]
n = 6
questions = 40

[selector]
embedding_dim = 8
channels = 8
hidden = 8
epochs = 2

[eval]
n = 4
)";

ExperimentConfig tiny(const fs::path& dir, const std::string& extra = "") {
  return ExperimentConfig::from(Config::parse(std::string(kTinyConfig) + extra), dir);
}

Question question(const std::string& id, const std::string& text, const std::string& gold,
                  const std::vector<std::string>& snippets) {
  Question q;
  q.id = id;
  q.text = tokenize(text);
  q.gold_answers = {tokenize(gold)};
  for (const auto& s : snippets) q.snippets.push_back(tokenize(s));
  return q;
}

}  // namespace

TEST_CASE("config parsing") {
  const Config c = Config::parse("top = 1\n# comment\n[a]\nx = 2.5\n; other\nname = hello world\nflag = yes\n");
  CHECK(c.get("", "top", "") == "1");
  CHECK(c.get_double("a", "x", 0.0) == 2.5);
  CHECK(c.get_list("a", "name") == std::vector<std::string>{"hello", "world"});
  CHECK(c.get_bool("a", "flag", false));
  CHECK(c.get_size("a", "missing", 7) == 7);
  CHECK(c.unused().empty());

  try {
    Config::parse("[a]\nx = 1\nx = 2\n");
    FAIL("duplicate key accepted");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(Config::parse("[a\n"), ParseError);
  CHECK_THROWS_AS(Config::parse("novalue\n"), ParseError);
  CHECK_THROWS_AS(Config::parse("[a]\nn = -3\n").get_size("a", "n", 0), ParseError);
  CHECK_THROWS_AS(Config::parse("[a]\nx = abc\n").get_double("a", "x", 0), ParseError);
}

TEST_CASE("experiment config validation") {
  testing::TempDir dir;
  const ExperimentConfig c = tiny(dir.path());
  CHECK(c.work_dir == dir / "run");
  CHECK(c.eval.n == 4);
  CHECK(c.rl.entropy_weight == 0.001);
  CHECK(ExperimentConfig().eval.n == 20);
  CHECK_THROWS_AS(tiny(dir.path(), "[rl]\nmystery = 1\n"), PreconditionError);
  CHECK_THROWS_AS(tiny(dir.path(), "[eval]\ndecode = psychic\n"), PreconditionError);
  CHECK_THROWS(ExperimentConfig::from(Config::parse("[data]\nsource = files\ntrain = nowhere.jsonl\n"), dir.path()));
  CHECK_THROWS(ExperimentConfig::load(dir / "absent.ini"));
}

TEST_CASE("strategy scores are means over questions") {
  LookupEnvironment env;
  env.add(tokenize("alpha"), tokenize("right"), 1.0);
  env.add(tokenize("beta"), tokenize("wrong"), 1.0);
  Dataset data;
  data.split = Split::kTest;
  data.questions = {question("1", "alpha", "right", {"x"}), question("2", "beta", "right", {"x"})};
  const Vocabulary vocab;
  const RolloutContext ctx{&vocab, &env, 10};
  EvalConfig cfg;
  cfg.source = RewriteSource::kSubquery;
  const SplitReport r = evaluate(data, nullptr, nullptr, ctx, cfg);
  CHECK(r.split == "test");
  CHECK(r.questions == 2);
  for (const auto& s : r.strategies) {
    CHECK(s.f1 == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(s.em == doctest::Approx(50.0).epsilon(1e-12));
  }
  CHECK_THROWS(r.at("cnn"));
  check_oracle_dominance(r);
  CHECK_THROWS_AS(evaluate(data, nullptr, nullptr, ctx, EvalConfig{}), PreconditionError);
}

TEST_CASE("identity answers verbatim facts exactly") {
  const ReferenceEnvironment env;
  Dataset data;
  data.questions = {
      question("1", "capital france", "paris", {"capital france paris", "unrelated words here"}),
      question("2", "largest ocean", "pacific", {"nothing to see", "largest ocean pacific"}),
  };
  const Vocabulary vocab;
  const RolloutContext ctx{&vocab, &env, 10};
  EvalConfig cfg;
  cfg.source = RewriteSource::kSubquery;
  CHECK(evaluate(data, nullptr, nullptr, ctx, cfg).at("identity").em == 100.0);
}

TEST_CASE("single greedy rewrite collapses every strategy") {
  auto task = toy::make_task(2, {0, 1, 2, 3, 4}, 4, 1.0);
  Dataset data;
  for (int i = 0; i < 5; ++i) {
    Question q = task->q0;
    q.id = std::to_string(i);
    data.questions.push_back(q);
  }
  const SelectorParameters phi = init_selector({.embedding_dim = 4, .channels = 3, .hidden = 3, .width = 3},
                                               task->vocab, 1);
  EvalConfig cfg;
  cfg.n = 1;
  cfg.decode = DecodeMode::kGreedy;
  const SplitReport r = evaluate(data, &task->theta, &phi, task->context(), cfg);
  for (const char* name : {"voting", "maxconf", "cnn"}) {
    CHECK(r.at(name).f1 == r.at("tophyp").f1);
    CHECK(r.at(name).em == r.at("tophyp").em);
  }
  check_oracle_dominance(r);
}

TEST_CASE("headroom grows with the number of rewrites") {
  auto task = toy::make_task(2, {0, 1, 2, 3, 4, 1, 0}, 5, 1.5);
  Dataset data;
  for (int i = 0; i < 8; ++i) {
    Question q = task->q0;
    q.id = std::to_string(i);
    data.questions.push_back(q);
  }
  double prev = -1.0;
  for (std::size_t n : {1, 2, 4, 8, 16}) {
    EvalConfig cfg;
    cfg.n = n;
    const Headroom h = headroom(data, task->theta, task->context(), cfg);
    CHECK(h.f1 >= prev);
    prev = h.f1;
  }
}

TEST_CASE("report tables") {
  SplitReport dev{"validation", 1, {{"identity", 10, 20, 0}, {"oracle", 30, 40, 0}}, {}};
  SplitReport test{"test", 1, {{"identity", 1, 2.345, 0}, {"oracle", 3, 4, 0}}, {}};
  std::ostringstream out;
  write_eval_table({dev, test}, out);
  CHECK(out.str() ==
        "strategy\tvalidation_em\tvalidation_f1\ttest_em\ttest_f1\n"
        "identity\t10.00\t20.00\t1.00\t2.35\n"
        "oracle\t30.00\t40.00\t3.00\t4.00\n");
  SplitReport bad{"test", 1, {{"tophyp", 50, 50, 0}, {"oracle", 40, 60, 0}}, {}};
  CHECK_THROWS_AS(check_oracle_dominance(bad), Error);
}

TEST_CASE("pipeline runs, resumes and repeats byte for byte") {
  testing::TempDir dir;
  std::ostringstream log;
  Experiment first(tiny(dir / "a"), &log);
  CHECK(first.run_all() == stage_names());
  CHECK(first.completed() == stage_names());
  for (const fs::path& p : {first.layout().report(), first.layout().eval_table(), first.layout().train_log(),
                            first.layout().analysis(), first.layout().subquery_table()})
    CHECK(fs::exists(p));
  CHECK(first.run_all().empty());

  // A run interrupted after RL picks up at the rollout stage.
  Experiment second(tiny(dir / "b"));
  for (const char* stage : {"datagen", "pretrain", "train-rl"}) second.run_stage(stage);
  const auto ran = second.run_all();
  REQUIRE(!ran.empty());
  CHECK(ran.front() == "rollout");
  CHECK(testing::read_file(first.layout().report()) == testing::read_file(second.layout().report()));
  CHECK(testing::read_file(first.layout().eval_table()) == testing::read_file(second.layout().eval_table()));

  const std::string table = testing::read_file(first.layout().eval_table());
  CHECK(table.find("misubquery_tophyp") != std::string::npos);
  CHECK(table.find("cnn") != std::string::npos);
}

TEST_CASE("stage failures name the stage") {
  testing::TempDir dir;
  Experiment e(tiny(dir.path()));
  try {
    e.run_stage("pretrain");
    FAIL("pretrain ran without data");
  } catch (const StageError& err) {
    CHECK(err.stage() == "pretrain");
  }
  CHECK(e.completed().empty());
  CHECK_THROWS_AS(e.run_stage("dance"), PreconditionError);
}

TEST_CASE("decode modes") {
  CHECK(parse_decode_mode("beam") == DecodeMode::kBeam);
  CHECK(decode_mode_name(DecodeMode::kSample) == "sample");
  CHECK_THROWS_AS(parse_decode_mode("x"), PreconditionError);
  auto task = toy::make_task(2, {0}, 3, 1.0);
  const TokenIds src = task->source();
  const auto s = generate_rewrites(src, task->theta, 5, DecodeMode::kSample, 1);
  REQUIRE(s.size() == 5);
  CHECK(s[0].tokens == greedy_decode(src, task->theta).tokens);
  const auto b = generate_rewrites(src, task->theta, 3, DecodeMode::kBeam, 1);
  CHECK(b[0].log_prob >= s[0].log_prob);
  CHECK(generate_rewrites(src, task->theta, 5, DecodeMode::kGreedy, 1).size() == 1);
}
