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

#include <cmath>
#include <sstream>

#include "aqa/environment.hpp"
#include "aqa/error.hpp"
#include "aqa/rng.hpp"

using namespace aqa;

namespace {

Tokens toks(const std::string& s) { return tokenize(s); }

Tokens context_of(const std::vector<std::string>& snippets) {
  Question q;
  for (const auto& s : snippets) q.snippets.push_back(toks(s));
  return truncate_context(q, snippets.size());
}

Question with_golds(const std::vector<std::string>& golds) {
  Question q;
  q.id = "q";
  for (const auto& g : golds) q.gold_answers.push_back(toks(g));
  return q;
}

// Best recomputed score over every span the environment may return.
double rescan(const ReferenceEnvironment& env, const Tokens& question, const Tokens& context,
              bool eligible_only) {
  double best = -std::numeric_limits<double>::infinity();
  const auto snippets = split_snippets(context);
  for (std::size_t s = 0; s < snippets.size(); ++s)
    for (std::size_t a = 0; a < snippets[s].size(); ++a)
      for (std::size_t b = a + 1; b <= std::min(snippets[s].size(), a + env.config().max_span); ++b) {
        const Span span{s, a, b};
        if (eligible_only && !env.eligible(question, context, span)) continue;
        best = std::max(best, env.score_span(question, context, span));
      }
  return best;
}

}  // namespace

TEST_CASE("token F1 examples") {
  CHECK(token_f1(toks("george washington"), toks("george washington")) == 1.0);
  CHECK(token_f1(toks("washington"), toks("george washington")) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(token_f1(toks("paris"), toks("george washington")) == 0.0);
  CHECK(token_f1({}, {}) == 1.0);
  CHECK(token_f1({}, toks("x")) == 0.0);
  CHECK(token_f1(toks("x"), {}) == 0.0);
  CHECK(token_f1(toks("the , end"), toks("the end")) == 1.0);
}

TEST_CASE("exact match examples") {
  CHECK(exact_match({"Japan"}, toks("japan")) == 1.0);
  CHECK(exact_match(toks("japan china"), toks("japan")) == 0.0);
  CHECK(exact_match(toks("dirty rotten scoundrels"), toks("dirty rotten scoundrels")) == 1.0);
}

TEST_CASE("reward is the best F1 over the original question's golds") {
  AnswerCandidate c;
  c.answer = toks("japan");
  c.score = 1.0;
  CHECK(reward(c, with_golds({"japan"})).reward == 1.0);
  c.answer = toks("japan china");
  CHECK(reward(c, with_golds({"japan"})).reward == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  c.answer = toks("b");
  CHECK(reward(c, with_golds({"a", "b c"})).reward == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  c.failed = true;
  CHECK(reward(c, with_golds({"b"})).reward == 0.0);
}

TEST_CASE("F1 is symmetric and EM implies F1 of one") {
  Rng rng(5);
  const std::vector<std::string> words{"a", "b", "c", "d", "A", ","};
  for (int trial = 0; trial < 2000; ++trial) {
    Tokens x, y;
    for (std::size_t i = rng.below(5); i > 0; --i) x.push_back(words[rng.below(words.size())]);
    for (std::size_t i = rng.below(5); i > 0; --i) y.push_back(words[rng.below(words.size())]);
    const double f = token_f1(x, y);
    CHECK(f == token_f1(y, x));
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    if (exact_match(x, y) == 1.0) CHECK(f == 1.0);
  }
}

TEST_CASE("reference environment returns the matching span") {
  // Without question-term exclusion the span covering the question wins.
  ReferenceEnvironment env({.exclude_question_terms = false});
  const Tokens ctx = context_of({"the river flows north", "george washington", "cities of the plain"});
  const AnswerCandidate a = env.answer(toks("george washington"), ctx);
  CHECK(a.answer == toks("george washington"));
  CHECK(a.span == Span{1, 0, 2});
  CHECK(a.score == doctest::Approx(rescan(env, toks("george washington"), ctx, false)).epsilon(1e-12));
}

TEST_CASE("reference environment answers next to the question terms") {
  ReferenceEnvironment env;
  const Tokens ctx = context_of({"the capital of france is paris", "berlin is large", "rome is old"});
  const AnswerCandidate a = env.answer(toks("capital france"), ctx);
  CHECK(!a.answer.empty());
  CHECK(std::find(a.answer.begin(), a.answer.end(), "capital") == a.answer.end());
  CHECK(std::find(a.answer.begin(), a.answer.end(), "france") == a.answer.end());
  CHECK(a.span.snippet == 0);
}

TEST_CASE("empty inputs abstain") {
  ReferenceEnvironment env;
  const AnswerCandidate a = env.answer(toks("who"), {});
  CHECK(a.answer.empty());
  CHECK(a.score == -std::numeric_limits<double>::infinity());
  const AnswerCandidate b = env.answer({}, context_of({"some text here"}));
  CHECK(b.answer.empty());
  CHECK(b.score == -std::numeric_limits<double>::infinity());
  CHECK(reward(a, with_golds({"x"})).reward == 0.0);
}

TEST_CASE("identical spans resolve to the earliest position") {
  ReferenceEnvironment env({.exclude_question_terms = false});
  const Tokens ctx = context_of({"alpha beta", "alpha beta"});
  const AnswerCandidate a = env.answer(toks("alpha beta"), ctx);
  CHECK(a.span == Span{0, 0, 2});
  ReferenceEnvironment strict;
  const Tokens ctx2 = context_of({"key x", "key x"});
  CHECK(strict.answer(toks("key"), ctx2).span == Span{0, 1, 2});
}

TEST_CASE("returned score is auditable and maximal on random contexts") {
  Rng rng(11);
  const std::vector<std::string> words{"a", "b", "c", "d", "e", "f", "g", "h"};
  for (bool exclude : {false, true}) {
    ReferenceEnvironment env({.exclude_question_terms = exclude});
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<std::string> snippets;
      for (std::size_t s = 1 + rng.below(4); s > 0; --s) {
        std::string text;
        for (std::size_t i = 1 + rng.below(9); i > 0; --i) text += words[rng.below(words.size())] + " ";
        snippets.push_back(text);
      }
      const Tokens ctx = context_of(snippets);
      Tokens question;
      for (std::size_t i = 1 + rng.below(3); i > 0; --i) question.push_back(words[rng.below(words.size())]);
      const AnswerCandidate a = env.answer(question, ctx);
      REQUIRE(!a.answer.empty());
      CHECK(std::isfinite(a.score));
      const auto sn = split_snippets(ctx);
      CHECK(a.answer == Tokens(sn[a.span.snippet].begin() + a.span.start, sn[a.span.snippet].begin() + a.span.end));
      CHECK(a.score == env.score_span(question, ctx, a.span));
      if (!exclude || !env.eligible(question, ctx, a.span)) {
        CHECK(a.score == rescan(env, question, ctx, false));
      } else {
        CHECK(a.score == rescan(env, question, ctx, true));
      }
      const AnswerCandidate again = env.answer(question, ctx);
      CHECK(again.span == a.span);
      CHECK(again.score == a.score);
    }
  }
}

TEST_CASE("wire messages round-trip") {
  const WireRequest req{"q1", "who is \"it\""};
  const WireRequest back = decode_request(encode_request(req));
  CHECK(back.qid == req.qid);
  CHECK(back.question == req.question);
  const WireResponse resp{"q1", "paris", 0.25};
  const WireResponse rb = decode_response(encode_response(resp));
  CHECK(rb.qid == "q1");
  CHECK(rb.answer == "paris");
  CHECK(rb.score == 0.25);
  const WireResponse abstain = decode_response(encode_response({"q2", "", -std::numeric_limits<double>::infinity()}));
  CHECK(abstain.score == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(decode_response("{\"qid\": \"q\"}"), ParseError);
  CHECK_THROWS_AS(decode_request("not json"), ParseError);
}

TEST_CASE("serving answers requests by qid") {
  Question q;
  q.id = "q1";
  q.text = toks("capital france");
  q.snippets = {toks("the capital of france is paris")};
  const std::map<std::string, Question> table{{q.id, q}};
  ReferenceEnvironment env;
  std::istringstream in(encode_request({"q1", "capital france"}) + "\n\n" + "garbage\n" +
                        encode_request({"nope", "capital"}) + "\n");
  std::ostringstream out;
  CHECK(serve_environment(env, table, in, out) == 3);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  const WireResponse first = decode_response(line);
  const AnswerCandidate direct = env.answer(q.text, truncate_context(q));
  CHECK(first.answer == join(direct.answer));
  CHECK(first.score == doctest::Approx(direct.score).epsilon(1e-12));
  std::getline(lines, line);
  CHECK(decode_response(line).score == -std::numeric_limits<double>::infinity());
  std::getline(lines, line);
  const WireResponse unknown = decode_response(line);
  CHECK(unknown.qid == "nope");
  CHECK(unknown.answer.empty());
}

TEST_CASE("external process environment") {
  auto good = ExternalEnvironment::spawn(
      {"/bin/sh", "-c",
       "while read -r line; do echo '{\"qid\": \"q7\", \"answer\": \"Paris\", \"score\": 1.5}'; done"});
  const AnswerCandidate a = good->answer(toks("capital"), {}, "q7");
  CHECK(!a.failed);
  CHECK(a.answer == toks("paris"));
  CHECK(a.score == 1.5);
  CHECK(good->answer(toks("capital"), {}, "other").failed);

  auto echo = ExternalEnvironment::spawn({"/bin/cat"});
  CHECK(echo->answer(toks("x"), {}, "q").failed);

  auto dead = ExternalEnvironment::spawn({"/bin/true"});
  CHECK(dead->answer(toks("x"), {}, "q").failed);
}

TEST_CASE("lookup environment") {
  LookupEnvironment env;
  env.add(toks("a b"), toks("x y"), 2.0);
  const AnswerCandidate hit = env.answer(toks("a b"), {});
  CHECK(hit.answer == toks("x y"));
  CHECK(hit.score == 2.0);
  const AnswerCandidate miss = env.answer(toks("b a"), {});
  CHECK(miss.answer.empty());
  CHECK(miss.score == -std::numeric_limits<double>::infinity());
}
