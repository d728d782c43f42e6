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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "aqa/corpus.hpp"
#include "aqa/environment.hpp"
#include "aqa/error.hpp"
#include "aqa/rng.hpp"

namespace aqa {

namespace {

// Pseudo-words are consonant-vowel syllables plus a final consonant. The
// alphabet has no 'e', 's' or 'g', so no word ends in a table suffix and no
// inflected form can collide with another word.
std::string make_word(Rng& rng) {
  static const std::string consonants = "bdfklmnprtvz";
  static const std::string vowels = "aiou";
  static const std::string finals = "kmnprtvz";
  std::string w;
  const std::size_t syllables = 2 + rng.below(2);
  for (std::size_t i = 0; i < syllables; ++i) {
    w.push_back(consonants[rng.below(consonants.size())]);
    w.push_back(vowels[rng.below(vowels.size())]);
  }
  w.push_back(finals[rng.below(finals.size())]);
  return w;
}

std::vector<std::string> make_pool(Rng& rng, std::size_t n, std::set<std::string>& used) {
  std::vector<std::string> pool;
  while (pool.size() < n) {
    std::string w = make_word(rng);
    if (used.insert(w).second) pool.push_back(std::move(w));
  }
  return pool;
}

template <typename T>
const T& choose(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

std::string choose_other(Rng& rng, const std::vector<std::string>& pool, const std::string& avoid) {
  for (;;) {
    const std::string& w = choose(rng, pool);
    if (w != avoid) return w;
  }
}

struct Lexicon {
  std::vector<std::string> subjects, relations, objects, distractors, noise;
  std::map<std::string, std::string> inflection_base;
};

Question draft_question(Rng& rng, const Lexicon& lex, const GeneratorConfig& cfg, std::string id) {
  Question q;
  q.id = std::move(id);
  const std::string s = choose(rng, lex.subjects);
  const std::string r = choose(rng, lex.relations);
  const std::string o = choose(rng, lex.objects);
  q.gold_answers = {{o}};

  std::string r_q = r;
  if (rng.bernoulli(cfg.inflection_rate))
    r_q = r + choose(rng, inflection_suffixes());

  std::vector<std::string> distractors;
  const bool distracted = rng.bernoulli(cfg.distractor_rate);
  {
    std::vector<std::string> pool = lex.distractors;
    rng.shuffle(pool);
    const std::size_t k = std::min(cfg.distractors_per_question, pool.size());
    distractors.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  }

  q.text = {s, r_q};
  if (distracted) q.text.insert(q.text.end(), distractors.begin(), distractors.end());
  rng.shuffle(q.text);

  // Planted relevance order: fact, same-relation decoys, same-subject decoys, filler.
  q.snippets.push_back({s, r, o});
  const std::size_t n_relation_decoys = 1 + rng.below(2);
  for (std::size_t i = 0; i < n_relation_decoys; ++i)
    q.snippets.push_back({choose_other(rng, lex.subjects, s), r, choose_other(rng, lex.objects, o)});
  const std::size_t n_subject_decoys = 1 + rng.below(2);
  for (std::size_t i = 0; i < n_subject_decoys; ++i) {
    Tokens decoy;
    const std::size_t half = distractors.size() / 2;
    decoy.insert(decoy.end(), distractors.begin(), distractors.begin() + static_cast<std::ptrdiff_t>(half));
    decoy.push_back(s);
    decoy.push_back(choose_other(rng, lex.relations, r));
    decoy.push_back(choose_other(rng, lex.objects, o));
    decoy.insert(decoy.end(), distractors.begin() + static_cast<std::ptrdiff_t>(half), distractors.end());
    q.snippets.push_back(std::move(decoy));
  }
  const std::size_t total =
      cfg.min_snippets + rng.below(cfg.max_snippets - cfg.min_snippets + 1);
  while (q.snippets.size() < total) {
    Tokens filler;
    const std::size_t len = 3 + rng.below(3);
    for (std::size_t i = 0; i < len; ++i) filler.push_back(choose(rng, lex.noise));
    q.snippets.push_back(std::move(filler));
  }
  return q;
}

bool has_uplift(const Question& q, const Environment& env,
                const std::map<std::string, std::string>& inflection_base) {
  const Tokens context = truncate_context(q, 10);
  const double base = reward(env.answer(q.text, context), q).reward;
  for (const Tokens& rewrite : single_edit_rewrites(q.text, inflection_base))
    if (reward(env.answer(rewrite, context), q).reward > base) return true;
  return false;
}

Tokens paraphrase(Rng& rng, const Tokens& source, const GeneratorConfig& cfg,
                  const std::map<std::string, std::string>& inflection_base) {
  Tokens out;
  for (const std::string& t : source) {
    if (rng.bernoulli(cfg.paraphrase_drop_rate)) continue;
    std::string w = t;
    if (auto it = inflection_base.find(t);
        it != inflection_base.end() && rng.bernoulli(cfg.paraphrase_deinflect_rate))
      w = it->second;
    out.push_back(w);
    if (rng.bernoulli(cfg.paraphrase_duplicate_rate)) out.push_back(w);
  }
  if (out.empty()) out = source;
  return out;
}

}  // namespace

SyntheticCorpus generate_synthetic(std::uint64_t seed, const GeneratorConfig& cfg) {
  if (cfg.distractor_rate <= 0.0 && cfg.inflection_rate <= 0.0 && cfg.min_uplift_fraction > 0.0)
    throw PreconditionError(
        "generate_synthetic: distractor_rate and inflection_rate are both 0; reformulation "
        "uplift cannot be guaranteed");
  if (cfg.min_snippets < 3 || cfg.max_snippets < cfg.min_snippets)
    throw PreconditionError("generate_synthetic: need 3 <= min_snippets <= max_snippets");
  if (cfg.subjects < 2 || cfg.relations < 2 || cfg.objects < 2 || cfg.noise_words < 1 ||
      cfg.distractors < cfg.distractors_per_question)
    throw PreconditionError("generate_synthetic: word pools too small");
  if (cfg.min_uplift_fraction < 0.0 || cfg.min_uplift_fraction > 1.0)
    throw PreconditionError("generate_synthetic: min_uplift_fraction outside [0,1]");

  Rng rng(seed);
  Lexicon lex;
  std::set<std::string> used;
  lex.subjects = make_pool(rng, cfg.subjects, used);
  lex.relations = make_pool(rng, cfg.relations, used);
  lex.objects = make_pool(rng, cfg.objects, used);
  lex.distractors = make_pool(rng, cfg.distractors, used);
  lex.noise = make_pool(rng, cfg.noise_words, used);
  for (const std::string& r : lex.relations)
    for (const std::string& suffix : inflection_suffixes()) lex.inflection_base[r + suffix] = r;

  const ReferenceEnvironment env;
  auto make_split = [&](Split split, std::size_t count, const char* prefix) {
    Dataset ds;
    ds.split = split;
    const auto max_without =
        static_cast<std::size_t>(std::floor((1.0 - cfg.min_uplift_fraction) * static_cast<double>(count)));
    std::size_t without = 0;
    for (std::size_t i = 0; i < count; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "%s-%05zu", prefix, i);
      for (std::size_t attempt = 0;; ++attempt) {
        if (attempt > 10000)
          throw PreconditionError("generate_synthetic: cannot reach min_uplift_fraction");
        Question q = draft_question(rng, lex, cfg, id);
        const bool uplift = has_uplift(q, env, lex.inflection_base);
        if (!uplift && without >= max_without) continue;
        without += uplift ? 0 : 1;
        q.uplift = uplift;
        ds.questions.push_back(std::move(q));
        break;
      }
    }
    return ds;
  };

  SyntheticCorpus out;
  out.train = make_split(Split::kTrain, cfg.train_questions, "train");
  out.validation = make_split(Split::kValidation, cfg.validation_questions, "dev");
  out.test = make_split(Split::kTest, cfg.test_questions, "test");
  for (const Question& q : out.train.questions)
    for (std::size_t i = 0; i < cfg.paraphrases_per_question; ++i)
      out.warm_start.push_back({q.text, paraphrase(rng, q.text, cfg, lex.inflection_base)});
  out.inflection_base = lex.inflection_base;
  out.distractor_terms = lex.distractors;
  return out;
}

}  // namespace aqa
