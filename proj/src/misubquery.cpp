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

#include "aqa/misubquery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "aqa/environment.hpp"
#include "aqa/error.hpp"

namespace aqa {

namespace {

Tokens distinct_in_order(const Tokens& query) {
  Tokens out;
  std::set<std::string> seen;
  for (const auto& t : query)
    if (seen.insert(t).second) out.push_back(t);
  return out;
}

std::vector<std::set<std::string>> document_sets(const std::vector<Tokens>& documents) {
  std::vector<std::set<std::string>> sets;
  sets.reserve(documents.size());
  for (const auto& d : documents) sets.emplace_back(d.begin(), d.end());
  return sets;
}

double indicator_mi(const std::string& a, const std::string& b,
                    const std::vector<std::set<std::string>>& docs) {
  const double n = static_cast<double>(docs.size());
  double joint[2][2] = {{0, 0}, {0, 0}};
  for (const auto& d : docs) joint[d.count(a) ? 1 : 0][d.count(b) ? 1 : 0] += 1.0;
  const double pa[2] = {(joint[0][0] + joint[0][1]) / n, (joint[1][0] + joint[1][1]) / n};
  const double pb[2] = {(joint[0][0] + joint[1][0]) / n, (joint[0][1] + joint[1][1]) / n};
  if (pa[0] == 0.0 || pa[1] == 0.0 || pb[0] == 0.0 || pb[1] == 0.0) return 0.0;
  double mi = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double pij = joint[i][j] / n;
      if (pij > 0.0) mi += pij * std::log(pij / (pa[i] * pb[j]));
    }
  // Rounding can leave a tiny negative value for independent indicators.
  return std::max(0.0, mi);
}

std::vector<std::vector<double>> graph_from_sets(const Tokens& terms,
                                                 const std::vector<std::set<std::string>>& docs) {
  const std::size_t k = terms.size();
  std::vector<std::vector<double>> w(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      // Evaluate in a fixed argument order so w[i][j] == w[j][i] bit for bit.
      const auto& [lo, hi] = terms[i] < terms[j] ? std::tie(terms[i], terms[j]) : std::tie(terms[j], terms[i]);
      w[i][j] = w[j][i] = indicator_mi(lo, hi, docs);
    }
  return w;
}

}  // namespace

std::vector<Tokens> enumerate_subqueries(const Tokens& query, std::size_t min_len, std::size_t max_len) {
  if (min_len == 0 || max_len < min_len) throw PreconditionError("subqueries: need 1 <= min_len <= max_len");
  Tokens terms = distinct_in_order(query);
  if (terms.size() > kMaxSubqueryTerms) terms.resize(kMaxSubqueryTerms);
  if (terms.size() < min_len) return {query};
  const std::size_t top = std::min(max_len, terms.size());
  std::vector<Tokens> out;
  for (std::size_t len = min_len; len <= top && out.size() < kMaxSubqueryCandidates; ++len) {
    // Lexicographic walk over index combinations of size len.
    std::vector<std::size_t> idx(len);
    for (std::size_t i = 0; i < len; ++i) idx[i] = i;
    while (out.size() < kMaxSubqueryCandidates) {
      Tokens cand;
      for (std::size_t i : idx) cand.push_back(terms[i]);
      out.push_back(std::move(cand));
      std::size_t pos = len;
      while (pos > 0 && idx[pos - 1] == terms.size() - len + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t i = pos; i < len; ++i) idx[i] = idx[i - 1] + 1;
    }
  }
  return out;
}

double mutual_information(const std::string& a, const std::string& b, const std::vector<Tokens>& documents) {
  if (documents.empty()) throw PreconditionError("mutual_information: no documents");
  const auto docs = document_sets(documents);
  return a < b ? indicator_mi(a, b, docs) : indicator_mi(b, a, docs);
}

std::vector<std::vector<double>> term_graph(const Tokens& terms, const std::vector<Tokens>& documents) {
  if (documents.empty()) throw PreconditionError("term_graph: no documents");
  return graph_from_sets(terms, document_sets(documents));
}

double mst_mean_weight(const Tokens& terms, const std::vector<std::vector<double>>& weights) {
  const std::size_t k = terms.size();
  if (k < 2) return 0.0;
  struct Edge {
    double w;
    std::size_t i, j;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) edges.push_back({weights[i][j], i, j});
  // Kruskal on descending weight; equal weights fall back to the
  // lexicographic order of the edge's term pair.
  auto key = [&](const Edge& e) {
    const auto& a = terms[e.i];
    const auto& b = terms[e.j];
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  };
  std::sort(edges.begin(), edges.end(), [&](const Edge& x, const Edge& y) {
    if (x.w != y.w) return x.w > y.w;
    return key(x) < key(y);
  });
  std::vector<std::size_t> parent(k);
  for (std::size_t i = 0; i < k; ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  double total = 0.0;
  std::size_t used = 0;
  for (const Edge& e : edges) {
    const std::size_t a = find(e.i), b = find(e.j);
    if (a == b) continue;
    parent[a] = b;
    total += e.w;
    if (++used == k - 1) break;
  }
  return total / static_cast<double>(k - 1);
}

double score_subquery(const Tokens& candidate, const std::vector<Tokens>& documents) {
  const Tokens terms = distinct_in_order(candidate);
  if (terms.size() < 2) return 0.0;
  return mst_mean_weight(terms, term_graph(terms, documents));
}

std::vector<RankedSubquery> rank_subqueries(const Tokens& query, const std::vector<Tokens>& documents,
                                            std::size_t n) {
  if (n == 0) throw PreconditionError("rank_subqueries: n must be >= 1");
  if (documents.empty()) throw PreconditionError("rank_subqueries: no documents");
  const auto docs = document_sets(documents);
  // MI for every pair of query terms once; candidates index into it.
  Tokens terms = distinct_in_order(query);
  const auto full = graph_from_sets(terms, docs);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < terms.size(); ++i) pos[terms[i]] = i;

  std::vector<RankedSubquery> ranked;
  for (Tokens& cand : enumerate_subqueries(query)) {
    const Tokens distinct = distinct_in_order(cand);
    double score = 0.0;
    if (distinct.size() >= 2) {
      std::vector<std::vector<double>> w(distinct.size(), std::vector<double>(distinct.size(), 0.0));
      for (std::size_t i = 0; i < distinct.size(); ++i)
        for (std::size_t j = 0; j < distinct.size(); ++j)
          if (i != j) w[i][j] = full[pos.at(distinct[i])][pos.at(distinct[j])];
      score = mst_mean_weight(distinct, w);
    }
    ranked.push_back({std::move(cand), score});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedSubquery& a, const RankedSubquery& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.terms.size() != b.terms.size()) return a.terms.size() > b.terms.size();
    return a.terms < b.terms;
  });
  if (ranked.size() > n) ranked.resize(n);
  return ranked;
}

std::vector<RankedSubquery> rank_subqueries(const Question& q0, std::size_t n, std::size_t context_snippets) {
  const std::size_t k = std::min(context_snippets, q0.snippets.size());
  std::vector<Tokens> docs(q0.snippets.begin(), q0.snippets.begin() + static_cast<std::ptrdiff_t>(k));
  if (docs.empty()) docs.emplace_back();
  return rank_subqueries(q0.text, docs, n);
}

}  // namespace aqa
