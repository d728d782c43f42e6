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

#include "aqa/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "aqa/checkpoint.hpp"
#include "aqa/error.hpp"
#include "aqa/rng.hpp"
#include "json.hpp"

namespace aqa {

using ad::Graph;
using ad::Tensor;
using ad::Var;
using nlohmann::json;

namespace {

void require_nonempty(const Episode& episode) {
  if (episode.size() == 0 || episode.answers.size() != episode.size())
    throw PreconditionError("selection over an empty or misaligned episode");
}

double score_of(const Episode& e, std::size_t i) { return e.answers[i].candidate.score; }

const char* kSlots[] = {"question", "rewrite", "answer"};

std::filesystem::path vocab_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".vocab");
}

}  // namespace

std::size_t top_hyp_index(const Episode& episode) {
  require_nonempty(episode);
  return 0;
}

std::size_t max_conf_index(const Episode& episode) {
  require_nonempty(episode);
  std::size_t best = 0;
  for (std::size_t i = 1; i < episode.size(); ++i)
    if (score_of(episode, i) > score_of(episode, best)) best = i;
  return best;
}

std::size_t oracle_index(const Episode& episode) {
  require_nonempty(episode);
  std::size_t best = 0;
  for (std::size_t i = 1; i < episode.size(); ++i)
    if (episode.answers[i].reward > episode.answers[best].reward) best = i;
  return best;
}

std::size_t vote_index(const Episode& episode) {
  require_nonempty(episode);
  struct Group {
    double total = 0.0;
    std::size_t best = 0;  // member with the highest score, earliest on ties
  };
  std::map<std::string, Group> groups;
  for (std::size_t i = 0; i < episode.size(); ++i) {
    const std::string key = join(normalize_answer(episode.answers[i].candidate.answer));
    auto [it, fresh] = groups.try_emplace(key, Group{0.0, i});
    it->second.total += score_of(episode, i);
    if (!fresh && score_of(episode, i) > score_of(episode, it->second.best)) it->second.best = i;
  }
  // Map order is lexicographic, so keeping the first of equal candidates
  // realises the final tie rule.
  const Group* winner = nullptr;
  for (const auto& [key, g] : groups) {
    if (winner == nullptr || g.total > winner->total ||
        (g.total == winner->total && score_of(episode, g.best) > score_of(episode, winner->best)))
      winner = &g;
  }
  return winner->best;
}

AnswerCandidate top_hyp(const Episode& e) { return e.answers[top_hyp_index(e)].candidate; }
AnswerCandidate vote(const Episode& e) { return e.answers[vote_index(e)].candidate; }
AnswerCandidate max_conf(const Episode& e) { return e.answers[max_conf_index(e)].candidate; }
AnswerCandidate oracle(const Episode& e) { return e.answers[oracle_index(e)].candidate; }

std::vector<SelectorExample> build_selector_data(const std::vector<Episode>& episodes) {
  std::vector<SelectorExample> out;
  for (const Episode& ep : episodes) {
    if (ep.size() == 0) continue;
    const auto r = ep.rewards();
    if (std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; })) continue;
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    for (std::size_t i = 0; i < ep.size(); ++i) {
      SelectorExample ex;
      ex.qid = ep.q0.id;
      ex.question = ep.q0.text;
      ex.rewrite = i < ep.texts.size() ? ep.texts[i] : Tokens{};
      ex.answer = ep.answers[i].candidate.answer;
      ex.f1 = r[i];
      ex.above = r[i] > mean;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

void save_selector_data(const std::vector<SelectorExample>& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& ex : data) {
    json j{{"qid", ex.qid},           {"question", join(ex.question)}, {"rewrite", join(ex.rewrite)},
           {"answer", join(ex.answer)}, {"f1", ex.f1},                  {"label", ex.above ? "above" : "below"}};
    out << j.dump() << '\n';
  }
}

std::vector<SelectorExample> load_selector_data(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<SelectorExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      SelectorExample ex;
      ex.qid = j.at("qid").get<std::string>();
      ex.question = tokenize(j.value("question", ""));
      ex.rewrite = tokenize(j.at("rewrite").get<std::string>());
      ex.answer = tokenize(j.at("answer").get<std::string>());
      ex.f1 = j.at("f1").get<double>();
      const std::string label = j.at("label").get<std::string>();
      if (label != "above" && label != "below") throw ParseError("label must be above or below", lineno);
      ex.above = label == "above";
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw ParseError(std::string("selector data: ") + e.what(), lineno);
    }
  }
  return out;
}

SelectorParameters zero_selector(const SelectorConfig& c, const Vocabulary& vocab) {
  if (c.embedding_dim == 0 || c.channels == 0 || c.hidden == 0 || c.width == 0 || c.width % 2 == 0)
    throw PreconditionError("selector: dimensions must be positive and the width odd");
  SelectorParameters phi;
  phi.config = c;
  phi.vocab = vocab;
  auto& p = phi.params;
  p.add("embedding", Tensor({vocab.size(), c.embedding_dim}));
  for (const char* slot : kSlots) {
    p.add(std::string("conv_") + slot + ".W", Tensor({c.width * c.embedding_dim, c.channels}));
    p.add(std::string("conv_") + slot + ".b", Tensor({1, c.channels}));
  }
  p.add("hidden.W", Tensor({3 * c.channels, c.hidden}));
  p.add("hidden.b", Tensor({1, c.hidden}));
  p.add("out.W", Tensor({c.hidden, 1}));
  p.add("out.b", Tensor({1, 1}));
  return phi;
}

SelectorParameters init_selector(const SelectorConfig& c, const Vocabulary& vocab, std::uint64_t seed) {
  SelectorParameters phi = zero_selector(c, vocab);
  Rng rng(seed);
  for (auto& [name, t] : phi.params.entries()) {
    if (name.ends_with(".b")) continue;
    const double limit = name == "embedding" ? 0.1 : 1.0 / std::sqrt(static_cast<double>(t.rows()));
    for (double& v : t.values()) v = rng.uniform(-limit, limit);
  }
  return phi;
}

std::size_t load_embeddings(SelectorParameters& phi, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  Tensor& table = phi.params.at("embedding");
  const std::size_t dim = phi.config.embedding_dim;
  std::size_t replaced = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (ss >> field) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("embedding value '" + field + "' is not a number", lineno);
      }
    }
    if (values.size() != dim)
      throw ParseError("expected " + std::to_string(dim) + " values, got " + std::to_string(values.size()),
                       lineno);
    if (!phi.vocab.contains(token)) continue;
    const std::size_t row = phi.vocab.lookup(token);
    std::copy(values.begin(), values.end(), table.data() + row * dim);
    ++replaced;
  }
  return replaced;
}

void save_selector(const SelectorParameters& phi, const std::filesystem::path& stem) {
  const auto& c = phi.config;
  ad::save_checkpoint(phi.params, stem,
                      {{"model", "selector"},
                       {"embedding_dim", c.embedding_dim},
                       {"channels", c.channels},
                       {"hidden", c.hidden},
                       {"width", c.width}});
  phi.vocab.save(vocab_path(stem));
}

SelectorParameters load_selector(const std::filesystem::path& stem) {
  ad::Checkpoint ck = ad::load_checkpoint(stem);
  if (ck.metadata.value("model", "") != "selector")
    throw ParseError(stem.string() + ": not a selector checkpoint", 0);
  SelectorConfig c;
  c.embedding_dim = ck.metadata.at("embedding_dim");
  c.channels = ck.metadata.at("channels");
  c.hidden = ck.metadata.at("hidden");
  c.width = ck.metadata.at("width");
  SelectorParameters phi = zero_selector(c, Vocabulary::load(vocab_path(stem)));
  for (const auto& [name, t] : phi.params.entries()) {
    if (!ck.params.contains(name) || ck.params.at(name).shape() != t.shape())
      throw ParseError(stem.string() + ": parameter '" + name + "' missing or misshapen", 0);
  }
  phi.params = std::move(ck.params);
  return phi;
}

Var selector_logit(Graph& g, const Tokens& question, const Tokens& rewrite, const Tokens& answer,
                   const SelectorParameters& phi) {
  const auto& c = phi.config;
  const Var table = g.param("embedding");
  const Tokens* strings[] = {&question, &rewrite, &answer};
  std::vector<Var> pooled;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::string prefix = std::string("conv_") + kSlots[s];
    const Var w = g.param(prefix + ".W");
    const Var b = g.param(prefix + ".b");
    if (strings[s]->empty()) {
      pooled.push_back(g.constant(Tensor({1, c.channels})));
      continue;
    }
    const std::size_t len = strings[s]->size();
    const std::size_t pad = c.width / 2;
    const Var x = ad::embedding(table, phi.vocab.encode(*strings[s]));
    const Var zeros = g.constant(Tensor({pad, c.embedding_dim}));
    const Var padded = ad::concat({zeros, x, zeros}, 0);
    std::vector<Var> shifted;
    for (std::size_t k = 0; k < c.width; ++k) shifted.push_back(ad::slice(padded, 0, k, k + len));
    const Var windows = c.width == 1 ? shifted[0] : ad::concat(shifted, 1);
    pooled.push_back(ad::max_pool(ad::add_bias(ad::matmul(windows, w), b)));
  }
  const Var features = ad::concat(pooled, 1);
  const Var hidden = ad::tanh(ad::add_bias(ad::matmul(features, g.param("hidden.W")), g.param("hidden.b")));
  return ad::add_bias(ad::matmul(hidden, g.param("out.W")), g.param("out.b"));
}

double selector_forward(const Tokens& question, const Tokens& rewrite, const Tokens& answer,
                        const SelectorParameters& phi) {
  Graph g(const_cast<ad::ParameterStore*>(&phi.params));
  return ad::sigmoid(selector_logit(g, question, rewrite, answer, phi)).value().item();
}

double selector_accuracy(const std::vector<SelectorExample>& data, const SelectorParameters& phi) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : data) {
    const bool predicted = selector_forward(ex.question, ex.rewrite, ex.answer, phi) > 0.5;
    correct += predicted == ex.above ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

SelectorTrainResult train_selector(const std::vector<SelectorExample>& train,
                                   const std::vector<SelectorExample>& validation,
                                   SelectorParameters init, const SelectorTrainConfig& config) {
  if (train.empty()) throw PreconditionError("train_selector: no training examples");
  const bool has_above = std::any_of(train.begin(), train.end(), [](const auto& e) { return e.above; });
  const bool has_below = std::any_of(train.begin(), train.end(), [](const auto& e) { return !e.above; });
  if (!has_above || !has_below) throw PreconditionError("train_selector: data has a single label");
  if (config.batch_size == 0) throw PreconditionError("train_selector: batch size must be >= 1");

  const auto& held_out = validation.empty() ? train : validation;
  SelectorTrainResult result;
  SelectorParameters phi = std::move(init);
  result.validation_accuracy.push_back(selector_accuracy(held_out, phi));
  result.phi = phi;
  double best = result.validation_accuracy[0];

  ad::Adam adam(config.learning_rate);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      ad::Gradients grads;
      for (std::size_t k = begin; k < end; ++k) {
        const auto& ex = train[order[k]];
        Graph g(&phi.params);
        const Var logit = selector_logit(g, ex.question, ex.rewrite, ex.answer, phi);
        // log sigmoid(z) and log(1 - sigmoid(z)) as a two-way log-softmax over [0, z].
        const Var pair = ad::log_softmax(ad::concat({g.constant(Tensor({1, 1})), logit}, 1));
        const Var loss = ad::neg(ad::pick(pair, {ex.above ? std::size_t{1} : std::size_t{0}}));
        epoch_loss += loss.value().item();
        ad::accumulate(grads, g.backward(loss), 1.0 / static_cast<double>(end - begin));
      }
      if (!ad::all_finite(grads)) throw NumericError("train_selector: non-finite gradient");
      adam.step(phi.params, grads);
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(train.size()));
    const double acc = selector_accuracy(held_out, phi);
    result.validation_accuracy.push_back(acc);
    if (acc > best) {
      best = acc;
      result.best_epoch = epoch;
      result.phi = phi;
    }
  }
  return result;
}

std::size_t select_index(const Episode& episode, const SelectorParameters& phi) {
  require_nonempty(episode);
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < episode.size(); ++i) {
    const Tokens& rewrite = i < episode.texts.size() ? episode.texts[i] : Tokens{};
    const double s = selector_forward(episode.q0.text, rewrite, episode.answers[i].candidate.answer, phi);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

AnswerCandidate select(const Episode& e, const SelectorParameters& phi) {
  return e.answers[select_index(e, phi)].candidate;
}

}  // namespace aqa
