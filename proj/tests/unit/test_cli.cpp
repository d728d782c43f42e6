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

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "aqa/corpus.hpp"
#include "aqa/environment.hpp"
#include "helpers.hpp"

namespace {

const char* kConfig = R"([run]
work_dir = run

[data]
train_questions = 40
validation_questions = 12
test_questions = 12

[policy]
embedding_dim = 6
hidden = 6
attention_dim = 6
max_len = 6

[pretrain]
epochs = 1

[rl]
learning_rate = 0.1
batch_size = 4
samples = 3
max_steps = 3
validation_interval = 3

[rollout]
n = 4
questions = 20

[selector]
embedding_dim = 6
channels = 6
hidden = 6
epochs = 1

[eval]
n = 3
)";

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " '" AQA_CLI "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string capture(const std::string& args) {
  testing::TempDir out;
  const std::string cmd = "'" AQA_CLI "' " + args + " > '" + (out / "stdout").string() + "' 2>/dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  return testing::read_file(out / "stdout");
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  testing::TempDir dir;
  CHECK(run("") == 1);
  CHECK(run("--help") == 0);
  CHECK(run("frobnicate") == 1);
  CHECK(run("datagen") == 1);
  CHECK(run("datagen -c '" + (dir / "missing.ini").string() + "'") == 1);
  testing::write_file(dir / "bad.ini", "[rl]\nmystery = 3\n");
  CHECK(run("datagen -c '" + (dir / "bad.ini").string() + "'") == 1);
  testing::write_file(dir / "ok.ini", kConfig);
  CHECK(run("datagen -c '" + (dir / "ok.ini").string() + "' --set nonsense") == 1);
}

TEST_CASE("stage failures exit with 2") {
  testing::TempDir dir;
  testing::write_file(dir / "c.ini", kConfig);
  CHECK(run("train-rl -c '" + (dir / "c.ini").string() + "'") == 2);
}

TEST_CASE("stages run from the command line") {
  testing::TempDir dir;
  testing::write_file(dir / "c.ini", kConfig);
  const std::string cfg = " -c '" + (dir / "c.ini").string() + "'";
  for (const char* stage : {"datagen", "pretrain", "train-rl", "rollout", "train-selector", "evaluate",
                            "misubquery", "analyze", "report"})
    CHECK(run(std::string(stage) + cfg) == 0);
  CHECK(std::filesystem::exists(dir / "run" / "report.tsv"));
  CHECK(run("run" + cfg) == 0);

  const std::string decoded = capture("decode" + cfg + " --split test -n 2 --mode sample");
  std::size_t lines = 0;
  for (char ch : decoded) lines += ch == '\n';
  CHECK(lines == 24);
  CHECK(decoded.find("\"log_prob\"") != std::string::npos);

  // Overrides and worker counts leave results unchanged where they should.
  testing::write_file(dir / "d.ini", kConfig);
  const std::string other = " -c '" + (dir / "d.ini").string() + "' --set run.work_dir=run2";
  CHECK(run("run" + other, "AQA_WORKERS=3") == 0);
  CHECK(testing::read_file(dir / "run" / "report.tsv") == testing::read_file(dir / "run2" / "report.tsv"));
}

TEST_CASE("the reference environment can be served") {
  testing::TempDir dir;
  aqa::Dataset data;
  aqa::Question q;
  q.id = "q1";
  q.text = aqa::tokenize("capital france");
  q.gold_answers = {aqa::tokenize("paris")};
  q.snippets = {aqa::tokenize("capital france paris")};
  data.questions = {q};
  aqa::save_dataset(data, dir / "d.jsonl");
  testing::write_file(dir / "req", aqa::encode_request({"q1", "capital france"}) + "\n");
  const std::string out = capture("serve-env --data '" + (dir / "d.jsonl").string() + "' < '" + (dir / "req").string() + "'");
  const aqa::WireResponse r = aqa::decode_response(out.substr(0, out.find('\n')));
  CHECK(r.qid == "q1");
  CHECK(r.answer == "paris");
}
