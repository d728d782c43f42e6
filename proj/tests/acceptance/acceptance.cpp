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

// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria. Pass criterion names as arguments to run a
// subset.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "aqa/analysis.hpp"
#include "aqa/environment.hpp"
#include "aqa/harness.hpp"
#include "aqa/misubquery.hpp"
#include "aqa/rng.hpp"
#include "aqa/selector.hpp"
#include "aqa/trainer.hpp"
#include "toy_tasks.hpp"

namespace fs = std::filesystem;
using namespace aqa;

namespace {

// Tolerances and sizes.
constexpr double kGradCheckTolerance = 1e-5;
constexpr std::size_t kGradCheckPolicies = 24;
constexpr double kGradCheckStep = 1e-4;
// Below this magnitude the relative error is taken against the floor, so a
// near-zero entry must agree to 1e-11 absolute.
constexpr double kGradCheckFloor = 1e-6;
constexpr double kUnbiasedTolerance = 0.05;
constexpr std::size_t kUnbiasedEpisodes = 100000;
constexpr std::size_t kVarianceTrials = 1000;
constexpr std::size_t kBanditSteps = 2000;
constexpr double kBanditMass = 0.9;
constexpr double kUpliftPoints = 5.0;
constexpr double kMaxConfSlack = 1.0;
constexpr std::size_t kMinTestQuestions = 500;
constexpr std::size_t kHeuristicEpisodes = 10000;
constexpr std::size_t kTreeWeightSets = 1000;
constexpr std::size_t kMiCollections = 10000;
constexpr std::size_t kMetricPairs = 10000;
constexpr double kAnalysisTolerance = 1e-9;

// Time budgets in seconds.
constexpr double kMinute = 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  double worst = 0.0;
  Rng rng(2024);
  for (std::size_t k = 0; k < kGradCheckPolicies; ++k) {
    const std::size_t max_len = 1 + k % 3;
    const std::size_t extra = k % 4;
    std::vector<std::size_t> levels;
    for (int i = 0; i < 7; ++i) levels.push_back(rng.below(5));
    auto task = toy::make_task(max_len, levels, 100 + k, 0.8, 2 + 2 * (k % 3), extra);
    const Episode ep = rollout(task->q0, task->theta, task->context(), 2 + k % 4, 7 * k + 1);
    const auto b = baseline(ep);
    std::vector<double> adv(ep.size());
    for (std::size_t i = 0; i < ep.size(); ++i) adv[i] = ep.answers[i].reward - b[i];
    ad::Graph g(&task->theta.params);
    const ad::Var objective = build_surrogate(g, ep, task->theta.config, adv, 0.01 * static_cast<double>(k % 3));
    worst = std::max(worst, g.grad_check(objective, kGradCheckStep, kGradCheckFloor));
  }
  return {worst <= kGradCheckTolerance,
          "policies=" + std::to_string(kGradCheckPolicies) + " max_rel_err=" + fmt("%.3g", worst) +
              " tol=" + fmt("%.0e", kGradCheckTolerance)};
}

Outcome unbiasedness() {
  auto task = toy::make_task(2, {0, 4, 1, 2, 3, 0, 2, 4, 1, 3, 0, 1, 4}, 31, 1.0);
  const ad::Gradients exact = task->exact_gradient();
  ad::Gradients mean;
  const RolloutContext ctx = task->context();
  const std::size_t n = 4;
  for (std::size_t e = 0; e < kUnbiasedEpisodes; ++e) {
    const Episode ep = rollout(task->q0, task->theta, ctx, n, Rng::derive(77, e));
    ad::accumulate(mean, reinforce_grad(ep, task->theta, 0.0), 1.0 / static_cast<double>(kUnbiasedEpisodes));
  }
  const double rel = toy::l2_diff(mean, exact) / toy::l2(exact);
  return {rel <= kUnbiasedTolerance, "episodes=" + std::to_string(kUnbiasedEpisodes) + " samples=" +
                                         std::to_string(n) + " rel_err=" + fmt("%.4f", rel) +
                                         " tol=" + fmt("%.2f", kUnbiasedTolerance)};
}

Outcome variance_reduction() {
  auto task = toy::make_bandit(5, 1.0);
  const auto with = estimator_variance(task->q0, task->theta, task->context(), 4, kVarianceTrials, true, 3);
  const auto without = estimator_variance(task->q0, task->theta, task->context(), 4, kVarianceTrials, false, 3);
  return {with.mean_variance < without.mean_variance,
          "trials=" + std::to_string(kVarianceTrials) + " with_baseline=" + fmt("%.4g", with.mean_variance) +
              " without=" + fmt("%.4g", without.mean_variance)};
}

struct BanditRun {
  double entropy = 0.0;
  double best_mass = 0.0;
};

BanditRun train_bandit(double entropy_weight) {
  auto task = toy::make_bandit(11, 0.1);
  Dataset data;
  data.questions = {task->q0};
  TrainerConfig cfg;
  cfg.entropy_weight = entropy_weight;
  cfg.learning_rate = 0.5;
  cfg.batch_size = 1;
  cfg.samples = 4;
  cfg.max_steps = kBanditSteps;
  cfg.validation_interval = kBanditSteps;
  cfg.seed = 5;
  cfg.select_best = false;
  const TrainResult r = train(data, data, task->context(), task->theta, cfg);
  const auto p = next_token_distribution(task->source(), {}, r.theta);
  BanditRun out;
  for (double v : p)
    if (v > 0.0) out.entropy -= v * std::log(v);
  // Best rewrite is a single token followed by EOS.
  out.best_mass = p[task->rewrites[toy::best_rewrite(*task)][0]];
  return out;
}

Outcome entropy_regularization() {
  const BanditRun none = train_bandit(0.0), small = train_bandit(0.01), large = train_bandit(0.1);
  const bool monotone = none.entropy <= small.entropy && small.entropy <= large.entropy;
  const bool converged = small.best_mass > kBanditMass;
  return {monotone && converged,
          "entropy(0, 0.01, 0.1)=" + fmt("%.4g", none.entropy) + ", " + fmt("%.4g", small.entropy) + ", " +
              fmt("%.4g", large.entropy) + " mass(0.01)=" + fmt("%.4f", small.best_mass) + " after " +
              std::to_string(kBanditSteps) + " steps"};
}

// ---------------------------------------------------------------------------
// Full pipeline runs on the desk configuration.

fs::path scratch_root() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / ("aqa-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct PipelineRun {
  fs::path root;
  double seconds = 0.0;
};

PipelineRun run_pipeline(const std::string& name) {
  ExperimentConfig cfg = ExperimentConfig::load(AQA_ACCEPTANCE_CONFIG);
  cfg.work_dir = scratch_root() / name;
  const auto start = std::chrono::steady_clock::now();
  Experiment e(cfg);
  e.run_all();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {cfg.work_dir, secs};
}

const PipelineRun& first_run() {
  static const PipelineRun run = run_pipeline("first");
  return run;
}

std::map<std::string, std::map<std::string, double>> read_eval_table(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    std::string col;
    while (std::getline(h, col, '\t')) header.push_back(col);
  }
  std::map<std::string, std::map<std::string, double>> out;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string strategy, cell;
    std::getline(row, strategy, '\t');
    for (std::size_t c = 1; std::getline(row, cell, '\t'); ++c) out[strategy][header.at(c)] = std::stod(cell);
  }
  return out;
}

Outcome end_to_end() {
  const PipelineRun& run = first_run();
  const ExperimentConfig cfg = ExperimentConfig::load(AQA_ACCEPTANCE_CONFIG);
  const Dataset test = load_dataset(RunLayout{run.root}.test(), Split::kTest);
  auto table = read_eval_table(RunLayout{run.root}.eval_table());
  const auto f1 = [&](const std::string& s) { return table.at(s).at("test_f1"); };
  const double identity = f1("identity"), tophyp = f1("tophyp"), maxconf = f1("maxconf"), cnn = f1("cnn");
  bool dominated = true;
  for (const auto& [name, cols] : table) {
    if (name.starts_with("misubquery_")) continue;
    for (const auto& [col, v] : cols) dominated = dominated && v <= table.at("oracle").at(col);
  }
  for (const auto& [name, cols] : table) {
    if (!name.starts_with("misubquery_")) continue;
    for (const auto& [col, v] : cols) dominated = dominated && v <= table.at("misubquery_oracle").at(col);
  }
  const bool pass = test.questions.size() >= kMinTestQuestions && tophyp - identity >= kUpliftPoints &&
                    cnn >= maxconf && maxconf >= tophyp - kMaxConfSlack && dominated &&
                    run.seconds < 30.0 * kMinute;
  (void)cfg;
  return {pass, "test_questions=" + std::to_string(test.questions.size()) + " identity=" + fmt("%.2f", identity) +
                    " tophyp=" + fmt("%.2f", tophyp) + " maxconf=" + fmt("%.2f", maxconf) + " cnn=" +
                    fmt("%.2f", cnn) + " oracle=" + fmt("%.2f", f1("oracle")) +
                    " oracle_dominates=" + (dominated ? "yes" : "no") + " pipeline=" + fmt("%.0fs", run.seconds)};
}

Outcome determinism() {
  const PipelineRun& a = first_run();
  const PipelineRun b = run_pipeline("second");
  std::size_t files = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(a.root)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a.root);
    ++files;
    if (!fs::exists(b.root / rel) || read_all(entry.path()) != read_all(b.root / rel))
      differing.push_back(rel.string());
  }
  std::size_t files_b = 0;
  for (const auto& entry : fs::recursive_directory_iterator(b.root)) files_b += entry.is_regular_file() ? 1 : 0;
  std::string detail = "files=" + std::to_string(files) + " differing=" + std::to_string(differing.size());
  for (const auto& d : differing) detail += " " + d;
  return {files > 0 && differing.empty() && files == files_b, detail};
}

// ---------------------------------------------------------------------------
// Brute-force references.

struct Entry {
  Tokens answer;
  double score;
  double reward;
};

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

bool is_punct_token(const std::string& t) {
  if (t.empty()) return true;
  for (char c : t)
    if (!(c >= 33 && c <= 47) && !(c >= 58 && c <= 64) && !(c >= 91 && c <= 96) && !(c >= 123 && c <= 126))
      return false;
  return true;
}

Tokens clean(const Tokens& t) {
  Tokens out;
  for (const auto& x : t)
    if (!is_punct_token(x)) out.push_back(lower(x));
  return out;
}

std::size_t brute_vote(const std::vector<Entry>& e) {
  // Group by cleaned answer; pairwise comparison of every member.
  std::size_t best = 0;
  double best_total = 0.0, best_single = 0.0;
  std::string best_key;
  bool have = false;
  for (std::size_t i = 0; i < e.size(); ++i) {
    double total = 0.0, single = -INFINITY;
    std::size_t lead = i;
    bool first_member = true;
    for (std::size_t j = 0; j < e.size(); ++j) {
      if (clean(e[j].answer) != clean(e[i].answer)) continue;
      if (j < i) first_member = false;
      total += e[j].score;
      if (e[j].score > single) {
        single = e[j].score;
        lead = j;
      }
    }
    if (!first_member) continue;
    const Tokens key_tokens = clean(e[i].answer);
    std::string key;
    for (std::size_t k = 0; k < key_tokens.size(); ++k) key += (k ? " " : "") + key_tokens[k];
    const bool better = !have || total > best_total ||
                        (total == best_total && (single > best_single || (single == best_single && key < best_key)));
    if (better) {
      have = true;
      best = lead;
      best_total = total;
      best_single = single;
      best_key = key;
    }
  }
  return best;
}

std::size_t brute_argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Outcome heuristics() {
  Rng rng(99);
  const std::vector<std::string> words{"x", "y", "X", "z", ",", "y z", "Y z", "w"};
  std::size_t mismatches = 0;
  for (std::size_t trial = 0; trial < kHeuristicEpisodes; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<Entry> entries;
    Episode ep;
    for (std::size_t i = 0; i < n; ++i) {
      Entry e{tokenize(words[rng.below(words.size())]), std::round(rng.uniform() * 6.0) / 4.0,
              std::round(rng.uniform() * 3.0) / 3.0};
      entries.push_back(e);
      RewardedAnswer a;
      a.candidate.answer = e.answer;
      a.candidate.score = e.score;
      a.reward = e.reward;
      ep.answers.push_back(a);
    }
    std::vector<double> scores, rewards;
    for (const auto& e : entries) {
      scores.push_back(e.score);
      rewards.push_back(e.reward);
    }
    mismatches += vote_index(ep) != brute_vote(entries);
    mismatches += max_conf_index(ep) != brute_argmax(scores);
    mismatches += oracle_index(ep) != brute_argmax(rewards);
  }
  return {mismatches == 0,
          "episodes=" + std::to_string(kHeuristicEpisodes) + " mismatches=" + std::to_string(mismatches)};
}

double brute_tree_mean(const std::vector<std::vector<double>>& w) {
  const std::size_t n = w.size();
  if (n < 2) return 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) edges.push_back({i, j});
  double best = -INFINITY;
  for (std::uint32_t mask = 0; mask < (1u << edges.size()); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != n - 1) continue;
    std::vector<std::size_t> comp(n);
    std::iota(comp.begin(), comp.end(), 0);
    bool acyclic = true;
    std::vector<double> chosen;
    for (std::size_t e = 0; e < edges.size() && acyclic; ++e) {
      if (!(mask >> e & 1u)) continue;
      const std::size_t a = comp[edges[e].first], b = comp[edges[e].second];
      if (a == b) {
        acyclic = false;
        break;
      }
      for (auto& c : comp)
        if (c == a) c = b;
      chosen.push_back(w[edges[e].first][edges[e].second]);
    }
    if (!acyclic) continue;
    // Same summation order as a greedy tree: largest weights first.
    std::sort(chosen.begin(), chosen.end(), std::greater<>());
    double total = 0.0;
    for (double c : chosen) total += c;
    best = std::max(best, total / static_cast<double>(n - 1));
  }
  return best;
}

Outcome misubquery_checks() {
  Rng rng(5);
  std::size_t tree_mismatch = 0, rank_mismatch = 0, mi_violations = 0;
  double worst_tree = 0.0;
  for (std::size_t trial = 0; trial < kTreeWeightSets; ++trial) {
    const std::size_t n = 2 + trial % 5;
    Tokens terms;
    for (std::size_t i = 0; i < n; ++i) terms.push_back("t" + std::to_string(i));
    std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        w[i][j] = w[j][i] = trial % 2 ? std::round(rng.uniform() * 4.0) / 4.0 : rng.uniform();
    const double got = mst_mean_weight(terms, w), want = brute_tree_mean(w);
    worst_tree = std::max(worst_tree, std::abs(got - want));
    tree_mismatch += got != want;
  }
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f", "g", "h", "i"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tokens> docs(2 + rng.below(10));
    for (auto& d : docs)
      for (const auto& v : vocab)
        if (rng.bernoulli(0.4)) d.push_back(v);
    Tokens q;
    for (std::size_t i = 1 + rng.below(8); i > 0; --i) q.push_back(vocab[rng.below(vocab.size())]);
    const auto ranked = rank_subqueries(q, docs, kMaxSubqueryCandidates);
    auto candidates = enumerate_subqueries(q);
    std::vector<std::pair<double, Tokens>> scored;
    for (auto& c : candidates) scored.push_back({score_subquery(c, docs), c});
    std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      if (x.second.size() != y.second.size()) return x.second.size() > y.second.size();
      return x.second < y.second;
    });
    if (ranked.size() != scored.size()) {
      ++rank_mismatch;
      continue;
    }
    for (std::size_t i = 0; i < scored.size(); ++i)
      rank_mismatch += ranked[i].terms != scored[i].second || ranked[i].score != scored[i].first;
  }
  for (std::size_t trial = 0; trial < kMiCollections; ++trial) {
    std::vector<Tokens> docs(1 + rng.below(12));
    for (auto& d : docs)
      for (std::size_t k = 0; k < 4; ++k)
        if (rng.bernoulli(0.5)) d.push_back(vocab[k]);
    const std::string x = vocab[rng.below(5)], y = vocab[rng.below(5)];
    const double m = mutual_information(x, y, docs);
    mi_violations += m < 0.0 || m != mutual_information(y, x, docs) || !std::isfinite(m);
  }
  return {tree_mismatch == 0 && rank_mismatch == 0 && mi_violations == 0,
          "tree_sets=" + std::to_string(kTreeWeightSets) + " tree_mismatch=" + std::to_string(tree_mismatch) +
              " (max_abs=" + fmt("%.2g", worst_tree) + ") rank_mismatch=" + std::to_string(rank_mismatch) +
              " mi_collections=" + std::to_string(kMiCollections) + " mi_violations=" + std::to_string(mi_violations)};
}

double brute_f1(const Tokens& pred, const Tokens& gold) {
  Tokens p = clean(pred), g = clean(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::sort(p.begin(), p.end());
  std::sort(g.begin(), g.end());
  Tokens common;
  std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(common));
  if (common.empty()) return 0.0;
  const double precision = static_cast<double>(common.size()) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common.size()) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

Outcome metrics() {
  Rng rng(13);
  const std::vector<std::string> words{"a", "b", "c", "A", "B", "the", ".", ",", "?!", "x1"};
  std::size_t mismatches = 0;
  for (std::size_t trial = 0; trial < kMetricPairs; ++trial) {
    Tokens x, y;
    for (std::size_t i = rng.below(6); i > 0; --i) x.push_back(words[rng.below(words.size())]);
    for (std::size_t i = rng.below(6); i > 0; --i) y.push_back(words[rng.below(words.size())]);
    mismatches += token_f1(x, y) != brute_f1(x, y);
    mismatches += exact_match(x, y) != (clean(x) == clean(y) ? 1.0 : 0.0);
  }
  const bool examples = std::abs(token_f1(tokenize("washington"), tokenize("george washington")) - 2.0 / 3.0) < 1e-15 &&
                        token_f1({}, {}) == 1.0;
  return {mismatches == 0 && examples, "pairs=" + std::to_string(kMetricPairs) +
                                           " mismatches=" + std::to_string(mismatches) +
                                           " examples=" + (examples ? "ok" : "wrong")};
}

Outcome analysis_fixtures() {
  struct Fixture {
    std::string what;
    double got, want;
  };
  auto docs = [](const std::vector<std::string>& texts) {
    std::vector<Tokens> out;
    for (const auto& t : texts) out.push_back(tokenize(t));
    return out;
  };
  std::vector<Tokens> df_docs(100, tokenize("c"));
  for (int i = 0; i < 5; ++i) df_docs[i].push_back("b");
  df_docs[0].push_back("a");
  const std::vector<Fixture> fixtures{
      {"mean_tf a b c", mean_tf(tokenize("a b c")), 1.0},
      {"mean_tf a a b", mean_tf(tokenize("a a b")), 1.5},
      {"mean_tf peace peace", mean_tf(tokenize("peace peace")), 2.0},
      {"median_df [1,5,100]", median_df(tokenize("a b c"), df_docs), 5.0},
      {"median_df [2,4]", median_df(tokenize("a b"), docs({"a b", "b", "b", "a b"})), 3.0},
      {"median_df absent", median_df(tokenize("zz"), docs({"a"})), 0.0},
      {"clarity identity", query_clarity(tokenize("a b"), docs({"a b", "b a"})), 0.0},
      {"clarity one term", query_clarity(tokenize("a"), docs({"a b", "c d"})), std::log(4.0)},
  };
  std::string failed;
  for (const auto& f : fixtures)
    if (!(std::abs(f.got - f.want) <= kAnalysisTolerance)) failed += " " + f.what;
  const bool finite = std::isfinite(query_clarity(tokenize("unseen"), docs({"a b"})));

  // Selector data builder drops exactly the all-equal episodes.
  Rng rng(3);
  std::size_t drop_errors = 0, dropped = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    Episode ep;
    ep.q0.id = std::to_string(trial);
    const std::size_t n = 1 + rng.below(5);
    for (std::size_t i = 0; i < n; ++i) {
      RewardedAnswer a;
      a.reward = std::round(rng.uniform() * 2.0) / 2.0;
      ep.answers.push_back(a);
      ep.texts.push_back(tokenize("r"));
    }
    const auto r = ep.rewards();
    const bool equal = std::all_of(r.begin(), r.end(), [&](double v) { return v == r[0]; });
    dropped += equal;
    const auto data = build_selector_data({ep});
    drop_errors += equal ? !data.empty() : data.size() != n;
  }
  return {failed.empty() && finite && drop_errors == 0,
          "fixtures=" + std::to_string(fixtures.size()) + (failed.empty() ? " all within 1e-9" : " failed:" + failed) +
              " oov_clarity_finite=" + (finite ? "yes" : "no") + " episodes=2000 all_equal=" + std::to_string(dropped) +
              " drop_errors=" + std::to_string(drop_errors)};
}

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"gradient-correctness", 1 * kMinute, gradient_check},
      {"estimator-unbiasedness", 2 * kMinute, unbiasedness},
      {"variance-reduction", 1 * kMinute, variance_reduction},
      {"entropy-regularization", 2 * kMinute, entropy_regularization},
      {"end-to-end-uplift", 30 * kMinute, end_to_end},
      {"selection-heuristics", 1 * kMinute, heuristics},
      {"misubquery", 2 * kMinute, misubquery_checks},
      {"metric-oracles", 1 * kMinute, metrics},
      {"analysis-toolkit", 1 * kMinute, analysis_fixtures},
      // Budget covers the second full pipeline run.
      {"determinism", 30 * kMinute, determinism},
  };
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.name) == wanted.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs < c.budget_seconds;
    failures += pass ? 0 : 1;
    std::printf("%s %s  %s  time=%.1fs budget=%.0fs\n", pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(),
                secs, c.budget_seconds);
    std::fflush(stdout);
  }
  fs::remove_all(scratch_root());
  return failures;
}
