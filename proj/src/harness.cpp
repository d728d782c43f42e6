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

#include "aqa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "aqa/analysis.hpp"
#include "aqa/error.hpp"
#include "aqa/misubquery.hpp"
#include "aqa/parallel.hpp"
#include "aqa/rng.hpp"
#include "json.hpp"

namespace aqa {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

const std::vector<std::string> kStrategies = {"identity", "tophyp", "voting", "maxconf", "cnn", "oracle"};

}  // namespace

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "sample") return DecodeMode::kSample;
  if (name == "beam") return DecodeMode::kBeam;
  if (name == "greedy") return DecodeMode::kGreedy;
  throw PreconditionError("unknown decode mode '" + name + "'");
}

std::string decode_mode_name(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kSample:
      return "sample";
    case DecodeMode::kBeam:
      return "beam";
    case DecodeMode::kGreedy:
      return "greedy";
  }
  return "sample";
}

std::vector<Rewrite> generate_rewrites(const TokenIds& source, const PolicyParameters& theta, std::size_t n,
                                       DecodeMode mode, std::uint64_t seed) {
  if (n == 0) throw PreconditionError("generate_rewrites: n must be >= 1");
  switch (mode) {
    case DecodeMode::kGreedy:
      return {greedy_decode(source, theta)};
    case DecodeMode::kBeam:
      return beam_decode(source, theta, n);
    case DecodeMode::kSample: {
      std::vector<Rewrite> out{greedy_decode(source, theta)};
      if (n > 1) {
        auto samples = sample(source, theta, n - 1, seed);
        for (auto& s : samples) out.push_back(std::move(s));
      }
      return out;
    }
  }
  return {};
}

const StrategyScore& SplitReport::at(const std::string& name) const {
  for (const auto& s : strategies)
    if (s.name == name) return s;
  throw PreconditionError("report has no strategy '" + name + "'");
}

SplitReport evaluate(const Dataset& dataset, const PolicyParameters* theta, const SelectorParameters* phi,
                     const RolloutContext& ctx, const EvalConfig& config) {
  if (config.source == RewriteSource::kPolicy && theta == nullptr)
    throw PreconditionError("evaluate: policy rewrites need a policy");
  if (config.n == 0) throw PreconditionError("evaluate: n must be >= 1");
  const std::size_t count = dataset.questions.size();
  std::vector<std::vector<DetailRow>> rows(count);
  std::vector<std::vector<bool>> failed(count);

  parallel_for(count, config.workers, [&](std::size_t i) {
    const Question& q = dataset.questions[i];
    const Episode identity = make_text_episode(q, {q.text}, ctx);
    Episode ep;
    if (config.source == RewriteSource::kPolicy) {
      const std::uint64_t seed = Rng::derive(config.seed, i, 0);
      ep = make_episode(q, generate_rewrites(ctx.vocab->encode(q.text), *theta, config.n, config.decode, seed),
                        ctx);
    } else {
      std::vector<Tokens> texts;
      for (auto& r : rank_subqueries(q, config.n, ctx.context_snippets)) texts.push_back(std::move(r.terms));
      ep = make_text_episode(q, std::move(texts), ctx);
    }
    auto add = [&](const std::string& name, const RewardedAnswer& ra) {
      const bool bad = ra.candidate.failed;
      rows[i].push_back({q.id, name, ra.candidate.answer, bad ? 0.0 : max_exact_match(ra.candidate.answer, q),
                         bad ? 0.0 : ra.reward});
      failed[i].push_back(bad);
    };
    add("identity", identity.answers[0]);
    add("tophyp", ep.answers[top_hyp_index(ep)]);
    add("voting", ep.answers[vote_index(ep)]);
    add("maxconf", ep.answers[max_conf_index(ep)]);
    if (phi != nullptr) add("cnn", ep.answers[select_index(ep, *phi)]);
    // Oracle over every rewrite plus the original question, maximised per metric.
    DetailRow best{q.id, "oracle", identity.answers[0].candidate.answer, rows[i][0].em, rows[i][0].f1};
    for (const auto& ra : ep.answers) {
      if (ra.candidate.failed) continue;
      if (ra.reward > best.f1) {
        best.f1 = ra.reward;
        best.answer = ra.candidate.answer;
      }
      best.em = std::max(best.em, max_exact_match(ra.candidate.answer, q));
    }
    rows[i].push_back(best);
    failed[i].push_back(false);
  });

  SplitReport report;
  report.split = std::string(split_name(dataset.split));
  report.questions = count;
  for (const auto& name : kStrategies) {
    if (name == "cnn" && phi == nullptr) continue;
    report.strategies.push_back({name, 0.0, 0.0, 0});
  }
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      StrategyScore& s = report.strategies[k];
      s.em += rows[i][k].em;
      s.f1 += rows[i][k].f1;
      s.failures += failed[i][k] ? 1 : 0;
      report.details.push_back(rows[i][k]);
    }
  }
  for (auto& s : report.strategies) {
    const double scale = count == 0 ? 0.0 : 100.0 / static_cast<double>(count);
    s.em *= scale;
    s.f1 *= scale;
  }
  return report;
}

Headroom headroom(const Dataset& dataset, const PolicyParameters& theta, const RolloutContext& ctx,
                  const EvalConfig& config) {
  const SplitReport r = evaluate(dataset, &theta, nullptr, ctx, config);
  return {r.at("oracle").em, r.at("oracle").f1};
}

void check_oracle_dominance(const SplitReport& report) {
  const StrategyScore& o = report.at("oracle");
  for (const auto& s : report.strategies)
    if (s.em > o.em || s.f1 > o.f1)
      throw Error("oracle dominance violated by '" + s.name + "' on " + report.split);
  std::map<std::string, std::pair<double, double>> oracle_rows;
  for (const auto& d : report.details)
    if (d.strategy == "oracle") oracle_rows[d.id] = {d.em, d.f1};
  for (const auto& d : report.details) {
    const auto& [em, f1] = oracle_rows.at(d.id);
    if (d.em > em || d.f1 > f1)
      throw Error("oracle dominance violated by '" + d.strategy + "' on question " + d.id);
  }
}

void write_eval_table(const std::vector<SplitReport>& reports, std::ostream& out) {
  if (reports.empty()) return;
  out << "strategy";
  for (const auto& r : reports) out << '\t' << r.split << "_em\t" << r.split << "_f1";
  out << '\n';
  for (const auto& s : reports[0].strategies) {
    out << s.name;
    for (const auto& r : reports) {
      const auto& x = r.at(s.name);
      out << '\t' << fixed(x.em) << '\t' << fixed(x.f1);
    }
    out << '\n';
  }
}

void write_eval_details(const SplitReport& report, std::ostream& out) {
  out << "id\tstrategy\tanswer\tem\tf1\n";
  for (const auto& d : report.details)
    out << d.id << '\t' << d.strategy << '\t' << join(d.answer) << '\t' << fixed(d.em, 0) << '\t'
        << fixed(d.f1, 6) << '\n';
}

ExperimentConfig ExperimentConfig::from(const Config& c, const fs::path& base_dir) {
  ExperimentConfig e;
  auto path = [&](const std::string& section, const std::string& key, const fs::path& fallback) {
    const std::string raw = c.get(section, key, "");
    if (raw.empty()) return fallback;
    const fs::path p(raw);
    return p.is_absolute() ? p : base_dir / p;
  };
  e.work_dir = path("run", "work_dir", base_dir / "run");
  e.workers = c.get_size("run", "workers", worker_count());

  e.data_source = c.get("data", "source", "synthetic");
  if (e.data_source != "synthetic" && e.data_source != "files")
    throw PreconditionError("[data] source must be synthetic or files");
  e.data_seed = c.get_size("data", "seed", e.data_seed);
  auto& g = e.generator;
  g.train_questions = c.get_size("data", "train_questions", g.train_questions);
  g.validation_questions = c.get_size("data", "validation_questions", g.validation_questions);
  g.test_questions = c.get_size("data", "test_questions", g.test_questions);
  g.distractor_rate = c.get_double("data", "distractor_rate", g.distractor_rate);
  g.inflection_rate = c.get_double("data", "inflection_rate", g.inflection_rate);
  g.min_uplift_fraction = c.get_double("data", "min_uplift_fraction", g.min_uplift_fraction);
  e.vocab_max = c.get_size("data", "vocab_max", e.vocab_max);
  e.jaccard_threshold = c.get_double("data", "jaccard_threshold", e.jaccard_threshold);
  e.max_per_source = c.get_size("data", "max_per_source", e.max_per_source);
  if (e.data_source == "files") {
    e.train_path = path("data", "train", "");
    e.dev_path = path("data", "dev", "");
    e.test_path = path("data", "test", "");
    e.paraphrase_path = path("data", "paraphrases", "");
    for (const auto& p : {e.train_path, e.dev_path, e.test_path, e.paraphrase_path})
      if (p.empty() || !fs::exists(p))
        throw PreconditionError("[data] file '" + p.string() + "' does not exist");
  }

  e.environment = c.get("environment", "kind", "reference");
  e.env_command = c.get_list("environment", "command");
  e.env_host = c.get("environment", "host", "");
  e.env_port = static_cast<std::uint16_t>(c.get_size("environment", "port", 0));
  e.context_snippets = c.get_size("environment", "context_snippets", e.context_snippets);
  if (e.environment == "external" && e.env_command.empty() && (e.env_host.empty() || e.env_port == 0))
    throw PreconditionError("[environment] external needs a command or host and port");
  if (e.environment != "reference" && e.environment != "external")
    throw PreconditionError("[environment] kind must be reference or external");

  auto& p = e.policy;
  p.embedding_dim = c.get_size("policy", "embedding_dim", p.embedding_dim);
  p.hidden = c.get_size("policy", "hidden", p.hidden);
  p.attention_dim = c.get_size("policy", "attention_dim", p.attention_dim);
  p.max_len = c.get_size("policy", "max_len", p.max_len);
  e.policy_seed = c.get_size("policy", "seed", e.policy_seed);

  auto& pt = e.pretrain;
  pt.epochs = c.get_size("pretrain", "epochs", pt.epochs);
  pt.learning_rate = c.get_double("pretrain", "learning_rate", pt.learning_rate);
  pt.batch_sources = c.get_size("pretrain", "batch_sources", pt.batch_sources);
  pt.seed = c.get_size("pretrain", "seed", pt.seed);

  auto& rl = e.rl;
  rl.entropy_weight = c.get_double("rl", "entropy_weight", rl.entropy_weight);
  rl.learning_rate = c.get_double("rl", "learning_rate", rl.learning_rate);
  rl.batch_size = c.get_size("rl", "batch_size", rl.batch_size);
  rl.samples = c.get_size("rl", "samples", rl.samples);
  rl.max_steps = c.get_size("rl", "max_steps", rl.max_steps);
  rl.validation_interval = c.get_size("rl", "validation_interval", rl.validation_interval);
  rl.validation_questions = c.get_size("rl", "validation_questions", rl.validation_questions);
  rl.seed = c.get_size("rl", "seed", rl.seed);
  rl.baseline = parse_baseline(c.get("rl", "baseline", "loo"));
  rl.workers = e.workers;

  e.rollout_n = c.get_size("rollout", "n", e.rollout_n);
  e.rollout_questions = c.get_size("rollout", "questions", e.rollout_questions);
  e.rollout_seed = c.get_size("rollout", "seed", e.rollout_seed);

  auto& s = e.selector;
  s.embedding_dim = c.get_size("selector", "embedding_dim", s.embedding_dim);
  s.channels = c.get_size("selector", "channels", s.channels);
  s.hidden = c.get_size("selector", "hidden", s.hidden);
  auto& st = e.selector_train;
  st.epochs = c.get_size("selector", "epochs", st.epochs);
  st.batch_size = c.get_size("selector", "batch_size", st.batch_size);
  st.learning_rate = c.get_double("selector", "learning_rate", st.learning_rate);
  st.seed = c.get_size("selector", "train_seed", st.seed);
  e.selector_seed = c.get_size("selector", "seed", e.selector_seed);
  e.embeddings = path("selector", "embeddings", "");

  e.eval.n = c.get_size("eval", "n", e.eval.n);
  e.eval.decode = parse_decode_mode(c.get("eval", "decode", "sample"));
  e.eval.seed = c.get_size("eval", "seed", e.eval.seed);
  e.eval.workers = e.workers;
  e.eval_subquery = c.get_bool("eval", "misubquery", e.eval_subquery);
  e.prefix_k = c.get_size("analysis", "prefix_k", e.prefix_k);

  const auto unused = c.unused();
  if (!unused.empty()) {
    std::string keys;
    for (const auto& k : unused) keys += (keys.empty() ? "" : ", ") + k;
    throw PreconditionError("unknown config keys: " + keys);
  }
  return e;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  return from(Config::load(path), fs::absolute(path).parent_path());
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"datagen",  "pretrain",   "train-rl", "rollout", "train-selector",
                                                 "evaluate", "misubquery", "analyze",  "report"};
  return names;
}

std::unique_ptr<Environment> make_environment(const ExperimentConfig& config) {
  if (config.environment == "external") {
    if (!config.env_command.empty()) return ExternalEnvironment::spawn(config.env_command);
    return ExternalEnvironment::connect(config.env_host, config.env_port);
  }
  return std::make_unique<ReferenceEnvironment>();
}

Experiment::Experiment(ExperimentConfig config, std::ostream* log)
    : config_(std::move(config)), layout_{config_.work_dir}, log_(log) {}

void Experiment::say(const std::string& message) {
  if (log_ != nullptr) *log_ << message << std::endl;
}

Environment& Experiment::env() {
  if (!env_) env_ = make_environment(config_);
  return *env_;
}

const Vocabulary& Experiment::vocab() {
  if (!vocab_) vocab_ = Vocabulary::load(layout_.vocab());
  return *vocab_;
}

std::vector<std::string> Experiment::completed() const {
  std::vector<std::string> out;
  std::ifstream in(layout_.ledger());
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

void Experiment::mark_done(const std::string& stage) {
  auto done = completed();
  if (std::find(done.begin(), done.end(), stage) != done.end()) return;
  std::ofstream out(layout_.ledger(), std::ios::app);
  out << stage << '\n';
}

void Experiment::run_stage(const std::string& stage) {
  fs::create_directories(layout_.root);
  try {
    if (stage == "datagen") datagen();
    else if (stage == "pretrain") pretrain();
    else if (stage == "train-rl") train_rl();
    else if (stage == "rollout") rollout();
    else if (stage == "train-selector") train_selector_stage();
    else if (stage == "evaluate") evaluate_stage();
    else if (stage == "misubquery") misubquery();
    else if (stage == "analyze") analyze();
    else if (stage == "report") report();
    else throw PreconditionError("unknown stage '" + stage + "'");
  } catch (const PreconditionError& e) {
    if (std::find(stage_names().begin(), stage_names().end(), stage) == stage_names().end()) throw;
    throw StageError(stage, e.what());
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
  mark_done(stage);
}

std::vector<std::string> Experiment::run_all() {
  std::vector<std::string> ran;
  const auto done = completed();
  for (const auto& stage : stage_names()) {
    if (std::find(done.begin(), done.end(), stage) != done.end()) continue;
    say("stage " + stage);
    run_stage(stage);
    ran.push_back(stage);
  }
  return ran;
}

void Experiment::datagen() {
  fs::create_directories(layout_.data_dir());
  Dataset train, dev, test;
  std::vector<ParaphrasePair> pairs;
  if (config_.data_source == "synthetic") {
    SyntheticCorpus corpus = generate_synthetic(config_.data_seed, config_.generator);
    train = std::move(corpus.train);
    dev = std::move(corpus.validation);
    test = std::move(corpus.test);
    pairs = std::move(corpus.warm_start);
  } else {
    train = load_dataset(config_.train_path, Split::kTrain);
    dev = load_dataset(config_.dev_path, Split::kValidation);
    test = load_dataset(config_.test_path, Split::kTest);
    pairs = load_paraphrases(config_.paraphrase_path);
  }
  const auto kept = filter_paraphrases(pairs, config_.jaccard_threshold, config_.max_per_source);
  if (kept.empty()) throw PreconditionError("no paraphrase pairs survive filtering");
  save_dataset(train, layout_.train());
  save_dataset(dev, layout_.dev());
  save_dataset(test, layout_.test());
  save_paraphrases(kept, layout_.paraphrases());
  vocab_ = build_vocab({&train, &dev, &test}, config_.vocab_max);
  vocab_->save(layout_.vocab());
  say("datagen: " + std::to_string(train.questions.size()) + "/" + std::to_string(dev.questions.size()) + "/" +
      std::to_string(test.questions.size()) + " questions, " + std::to_string(kept.size()) + " of " +
      std::to_string(pairs.size()) + " paraphrase pairs kept, vocabulary " + std::to_string(vocab_->size()));
}

void Experiment::pretrain() {
  PolicyConfig pc = config_.policy;
  pc.vocab_size = vocab().size();
  const auto pairs = load_paraphrases(layout_.paraphrases());
  PretrainResult r = pretrain_supervised(pairs, vocab(), init_policy(pc, config_.policy_seed), config_.pretrain);
  save_policy(r.theta, layout_.pretrained());
  std::ofstream log(layout_.pretrain_log());
  log << "epoch\tloss\n";
  for (std::size_t i = 0; i < r.losses.size(); ++i) log << i << '\t' << fixed(r.losses[i], 6) << '\n';
  say("pretrain: token nll " + fixed(r.losses.front(), 4) + " -> " + fixed(r.losses.back(), 4));
}

void Experiment::train_rl() {
  const PolicyParameters theta0 = load_policy(layout_.pretrained());
  const Dataset train = load_dataset(layout_.train(), Split::kTrain);
  const Dataset dev = load_dataset(layout_.dev(), Split::kValidation);
  const RolloutContext ctx{&vocab(), &env(), config_.context_snippets};
  const TrainResult r = aqa::train(train, dev, ctx, theta0, config_.rl, [&](const TrainLogRow& row) {
    if (!std::isnan(row.dev_greedy_reward))
      say("train-rl: step " + std::to_string(row.step) + " dev greedy reward " + fixed(row.dev_greedy_reward, 4));
  });
  save_policy(r.theta, layout_.policy());
  write_train_log(r.log, layout_.train_log());
}

void Experiment::rollout() {
  const PolicyParameters theta = load_policy(layout_.policy());
  const RolloutContext ctx{&vocab(), &env(), config_.context_snippets};
  auto build = [&](const Dataset& data, std::size_t limit, std::uint64_t salt) {
    const std::size_t n = limit == 0 ? data.questions.size() : std::min(limit, data.questions.size());
    std::vector<Episode> episodes(n);
    parallel_for(n, config_.workers, [&](std::size_t i) {
      const Question& q = data.questions[i];
      const std::uint64_t seed = Rng::derive(config_.rollout_seed, salt, i);
      episodes[i] = make_episode(
          q, generate_rewrites(vocab().encode(q.text), theta, config_.rollout_n, DecodeMode::kSample, seed), ctx);
    });
    return build_selector_data(episodes);
  };
  const auto train_data = build(load_dataset(layout_.train(), Split::kTrain), config_.rollout_questions, 0);
  const auto dev_data = build(load_dataset(layout_.dev(), Split::kValidation), 0, 1);
  save_selector_data(train_data, layout_.selector_train());
  save_selector_data(dev_data, layout_.selector_dev());
  say("rollout: " + std::to_string(train_data.size()) + " training and " + std::to_string(dev_data.size()) +
      " validation selector examples");
}

void Experiment::train_selector_stage() {
  const auto train_data = load_selector_data(layout_.selector_train());
  const auto dev_data = load_selector_data(layout_.selector_dev());
  SelectorParameters phi = init_selector(config_.selector, vocab(), config_.selector_seed);
  if (!config_.embeddings.empty()) load_embeddings(phi, config_.embeddings);
  const SelectorTrainResult r = train_selector(train_data, dev_data, std::move(phi), config_.selector_train);
  save_selector(r.phi, layout_.selector());
  std::ofstream log(layout_.selector_log());
  log << "epoch\ttrain_loss\tvalidation_accuracy\n";
  for (std::size_t e = 0; e < r.validation_accuracy.size(); ++e)
    log << e << '\t' << (e == 0 ? std::string("nan") : fixed(r.train_loss[e - 1], 6)) << '\t'
        << fixed(r.validation_accuracy[e], 6) << '\n';
  say("train-selector: best validation accuracy " + fixed(r.validation_accuracy[r.best_epoch], 4) + " at epoch " +
      std::to_string(r.best_epoch));
}

void Experiment::evaluate_stage() {
  const PolicyParameters theta = load_policy(layout_.policy());
  const SelectorParameters phi = load_selector(layout_.selector());
  const RolloutContext ctx{&vocab(), &env(), config_.context_snippets};
  std::vector<SplitReport> reports;
  for (const auto& [path, split] : {std::pair{layout_.dev(), Split::kValidation}, {layout_.test(), Split::kTest}}) {
    const Dataset data = load_dataset(path, split);
    SplitReport r = evaluate(data, &theta, &phi, ctx, config_.eval);
    check_oracle_dominance(r);
    if (config_.eval_subquery) {
      EvalConfig sub = config_.eval;
      sub.source = RewriteSource::kSubquery;
      SplitReport m = evaluate(data, nullptr, &phi, ctx, sub);
      check_oracle_dominance(m);
      for (auto s : m.strategies) {
        if (s.name == "identity") continue;
        s.name = "misubquery_" + s.name;
        r.strategies.push_back(s);
      }
    }
    std::ofstream details(layout_.eval_details(r.split));
    write_eval_details(r, details);
    reports.push_back(std::move(r));
  }
  std::ofstream out(layout_.eval_table());
  write_eval_table(reports, out);
  const auto& test = reports.back();
  say("evaluate: test F1 identity " + fixed(test.at("identity").f1) + ", tophyp " + fixed(test.at("tophyp").f1) +
      ", cnn " + fixed(test.at("cnn").f1) + ", oracle " + fixed(test.at("oracle").f1));
}

void Experiment::misubquery() {
  const Dataset test = load_dataset(layout_.test(), Split::kTest);
  std::ofstream out(layout_.subquery_table());
  for (const Question& q : test.questions) {
    const auto ranked = rank_subqueries(q, config_.eval.n, config_.context_snippets);
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      nlohmann::json j{{"id", q.id}, {"rank", r + 1}, {"subquery", join(ranked[r].terms)}, {"score", ranked[r].score}};
      out << j.dump() << '\n';
    }
  }
}

void Experiment::analyze() {
  const Dataset test = load_dataset(layout_.test(), Split::kTest);
  const PolicyParameters theta = load_policy(layout_.policy());
  const std::size_t n = test.questions.size();
  std::vector<QueryStats> original(n), rewritten(n), subquery(n);
  std::vector<Tokens> rewritten_text(n), subquery_text(n);
  parallel_for(n, config_.workers, [&](std::size_t i) {
    const Question& q = test.questions[i];
    const std::size_t k = std::min(config_.context_snippets, q.snippets.size());
    std::vector<Tokens> docs(q.snippets.begin(), q.snippets.begin() + static_cast<std::ptrdiff_t>(k));
    if (docs.empty()) docs.emplace_back();
    rewritten_text[i] = render_rewrite(greedy_decode(vocab().encode(q.text), theta).tokens, vocab());
    subquery_text[i] = rank_subqueries(q, 1, config_.context_snippets).front().terms;
    original[i] = query_stats(q.id, q.text, docs);
    // An empty rewrite has no statistics; fall back to the original question.
    rewritten[i] = query_stats(q.id, rewritten_text[i].empty() ? q.text : rewritten_text[i], docs);
    subquery[i] = query_stats(q.id, subquery_text[i], docs);
  });
  std::ofstream out(layout_.analysis());
  write_analysis_report({{"original", original}, {"aqa", rewritten}, {"misubquery", subquery}}, out);
  std::vector<Tokens> original_text;
  for (const auto& q : test.questions) original_text.push_back(q.text);
  out << "\n# prefixes k=" << config_.prefix_k << "\npopulation\tprefix\tcount\n";
  for (const auto& [name, texts] : {std::pair{std::string("original"), &original_text},
                                    {std::string("aqa"), &rewritten_text},
                                    {std::string("misubquery"), &subquery_text}}) {
    const auto table = prefix_stats(*texts, config_.prefix_k);
    for (std::size_t i = 0; i < std::min<std::size_t>(10, table.size()); ++i)
      out << name << '\t' << table[i].first << '\t' << table[i].second << '\n';
  }
}

void Experiment::report() {
  std::ifstream eval(layout_.eval_table());
  if (!eval) throw PreconditionError("missing " + layout_.eval_table().string() + "; run evaluate first");
  std::stringstream table;
  table << eval.rdbuf();
  std::ifstream tlog(layout_.train_log());
  if (!tlog) throw PreconditionError("missing " + layout_.train_log().string());
  std::string line;
  std::getline(tlog, line);
  double best = -1.0, first = -1.0;
  std::size_t best_step = 0, steps = 0;
  while (std::getline(tlog, line)) {
    std::istringstream ss(line);
    std::size_t step;
    std::string reward, entropy, dev;
    ss >> step >> reward >> entropy >> dev;
    steps = step;
    if (dev == "nan") continue;
    const double v = std::stod(dev);
    if (first < 0.0) first = v;
    if (v > best) {
      best = v;
      best_step = step;
    }
  }
  std::ofstream out(layout_.report());
  out << "# evaluation (EM/F1 x 100)\n" << table.str();
  out << "\n# policy training\nkey\tvalue\n";
  out << "rl_steps\t" << steps << '\n';
  out << "dev_greedy_reward_initial\t" << fixed(first, 4) << '\n';
  out << "dev_greedy_reward_best\t" << fixed(best, 4) << '\n';
  out << "best_step\t" << best_step << '\n';
  say("report: " + layout_.report().string());
}

}  // namespace aqa
