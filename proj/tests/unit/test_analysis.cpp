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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aqa/analysis.hpp"
#include "aqa/error.hpp"
#include "aqa/rng.hpp"

using namespace aqa;

namespace {

Tokens toks(const std::string& s) { return tokenize(s); }

std::vector<Tokens> docs(const std::vector<std::string>& texts) {
  std::vector<Tokens> out;
  for (const auto& t : texts) out.push_back(toks(t));
  return out;
}

}  // namespace

TEST_CASE("mean term frequency") {
  CHECK(mean_tf(toks("a b c")) == 1.0);
  CHECK(mean_tf(toks("a a b")) == 1.5);
  CHECK(mean_tf(toks("peace peace")) == 2.0);
  CHECK_THROWS_AS(mean_tf({}), PreconditionError);
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    Tokens q;
    for (std::size_t i = 1 + rng.below(8); i > 0; --i) q.push_back(std::string(1, static_cast<char>('a' + rng.below(5))));
    Tokens sorted = q;
    std::sort(sorted.begin(), sorted.end());
    const bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    CHECK(mean_tf(q) >= 1.0);
    CHECK((mean_tf(q) == 1.0) == distinct);
  }
}

TEST_CASE("median document frequency") {
  // DFs: a in 1 doc, b in 5, c in 100.
  std::vector<Tokens> d(100, toks("c"));
  for (int i = 0; i < 5; ++i) d[i].push_back("b");
  d[0].push_back("a");
  CHECK(median_df(toks("a b c"), d) == 5.0);
  CHECK(median_df(toks("a b"), docs({"a b", "b", "b c", "a b"})) == 3.0);
  CHECK(median_df(toks("zz"), docs({"a"})) == 0.0);
  CHECK(median_df(toks("a a zz"), docs({"a", "a"})) == 1.0);
  std::vector<Tokens> reversed(d.rbegin(), d.rend());
  CHECK(median_df(toks("a b c"), reversed) == median_df(toks("a b c"), d));
  CHECK_THROWS_AS(median_df(toks("a"), {}), PreconditionError);
}

TEST_CASE("query clarity") {
  CHECK(query_clarity(toks("a b"), docs({"a", "b"})) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(query_clarity(toks("a"), docs({"a b c d"})) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  const double missing = query_clarity(toks("zz"), docs({"a b"}));
  CHECK(std::isfinite(missing));
  CHECK(missing == doctest::Approx(-std::log(1e-9 / (1.0 + 1e-9))).epsilon(1e-9));
  CHECK(query_clarity(toks("a a b"), docs({"a b a"})) <= 1e-6);
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    Tokens q;
    for (std::size_t i = 1 + rng.below(5); i > 0; --i) q.push_back(std::string(1, static_cast<char>('a' + rng.below(6))));
    std::vector<Tokens> c(1 + rng.below(4));
    for (auto& doc : c)
      for (std::size_t i = 1 + rng.below(6); i > 0; --i) doc.push_back(std::string(1, static_cast<char>('a' + rng.below(6))));
    const double v = query_clarity(q, c);
    CHECK(v >= 0.0);
    CHECK(v == query_clarity(q, c));
  }
  CHECK_THROWS_AS(query_clarity(toks("a"), {}), PreconditionError);
}

TEST_CASE("stemming and repeated stems") {
  CHECK(stem("influences") == "influence");
  CHECK(stem("influence") == "influence");
  CHECK(stem("walking") == "walk");
  CHECK(stem("quickly") == "quick");
  CHECK(stem("boxes") == "box");
  CHECK(stem("played") == "play");
  CHECK(stem("cats") == "cat");
  CHECK(stem("its") == "its");
  CHECK(stem("ring") == "ring");
  CHECK(repeated_stem(toks("influence influences")));
  CHECK_FALSE(repeated_stem(toks("peace peace")));
  CHECK_FALSE(repeated_stem(toks("war peace")));
  CHECK(repeated_stem(toks("the walk walked")));
}

TEST_CASE("prefix tables") {
  const auto same = prefix_stats({toks("what is name a"), toks("what is name b"), toks("what is name")}, 3);
  REQUIRE(same.size() == 1);
  CHECK(same[0] == std::pair<std::string, std::size_t>{"what is name", 3});
  CHECK(prefix_stats({}, 3).empty());
  const auto mixed = prefix_stats({toks("b x"), toks("a y"), toks("b z"), toks("c"), toks("a q"), toks("b b")}, 1);
  REQUIRE(mixed.size() == 3);
  CHECK(mixed[0] == std::pair<std::string, std::size_t>{"b", 3});
  CHECK(mixed[1] == std::pair<std::string, std::size_t>{"a", 2});
  CHECK(mixed[2] == std::pair<std::string, std::size_t>{"c", 1});
  CHECK(prefix_stats({toks("a")}, 2).empty());
  CHECK_THROWS_AS(prefix_stats({toks("a")}, 0), PreconditionError);
}

TEST_CASE("Welch t-test against reference values") {
  // Reference values from an independent statistics package.
  const TTest a = welch_t_test({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10, 12});
  CHECK(a.t == doctest::Approx(-2.3763541031440183).epsilon(1e-12));
  CHECK(a.p == doctest::Approx(0.04928433820673049).epsilon(1e-9));
  const TTest b = welch_t_test({0.5, 0.7, 0.2}, {0.9, 1.1});
  CHECK(b.t == doctest::Approx(-3.0237157840738185).epsilon(1e-12));
  CHECK(b.p == doctest::Approx(0.05663848377050376).epsilon(1e-9));
  CHECK(b.defined);

  const TTest same = welch_t_test({1, 2, 3}, {1, 2, 3});
  CHECK(same.t == 0.0);
  CHECK(same.p == doctest::Approx(1.0));

  const TTest flat = welch_t_test({2, 2}, {2, 2});
  CHECK_FALSE(flat.defined);
  CHECK(std::isnan(flat.p));
  CHECK(flat.t == 0.0);
  CHECK_FALSE(welch_t_test({1, 1}, {2, 2}).defined);

  CHECK_THROWS_AS(welch_t_test({1}, {1, 2}), PreconditionError);

  Rng rng(10);
  std::vector<double> x, y;
  for (int i = 0; i < 100; ++i) {
    x.push_back(rng.normal());
    y.push_back(x.back() + 10.0);
  }
  CHECK(welch_t_test(x, y).p < 1e-3);
}

TEST_CASE("population comparison and report") {
  const auto ctx = docs({"a b c", "a d", "b e"});
  std::vector<QueryStats> pa, pb;
  pa.push_back(query_stats("1", toks("a b"), ctx));
  pa.push_back(query_stats("2", toks("a a c"), ctx));
  pb.push_back(query_stats("3", toks("d e e e"), ctx));
  pb.push_back(query_stats("4", toks("walk walks b"), ctx));
  CHECK(pb[1].repeated_stem);
  CHECK(pa[1].length == 3);
  const auto tests = compare_populations(pa, pb);
  REQUIRE(tests.size() == 5);
  CHECK(tests[0].metric == "length");
  CHECK(tests[4].metric == "repeated_stem");
  for (const auto& t : compare_populations(pa, pa)) CHECK(t.t == 0.0);
  CHECK_THROWS_AS(compare_populations({pa[0]}, pb), PreconditionError);

  std::ostringstream out;
  write_analysis_report({{"original", pa}, {"rewrites", pb}}, out);
  const std::string text = out.str();
  CHECK(text.find("id\tlength\tmean_tf\tmedian_df\tquery_clarity\trepeated_stem") != std::string::npos);
  CHECK(text.find("# welch t-tests") != std::string::npos);
}
