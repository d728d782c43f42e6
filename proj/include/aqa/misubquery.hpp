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

#pragma once

#include <string>
#include <vector>

#include "aqa/corpus.hpp"

namespace aqa {

inline constexpr std::size_t kMaxSubqueryCandidates = 10000;
inline constexpr std::size_t kMaxSubqueryTerms = 20;

// Order-preserving subsequences of the distinct terms of `query` with
// length in [min_len, min(max_len, |terms|)]. Queries shorter than min_len
// come back unchanged as the only candidate.
std::vector<Tokens> enumerate_subqueries(const Tokens& query, std::size_t min_len = 3,
                                         std::size_t max_len = 6);

// Mutual information (nats) of the per-document occurrence indicators.
double mutual_information(const std::string& a, const std::string& b,
                          const std::vector<Tokens>& documents);

// Symmetric weight matrix over `terms`, zero diagonal.
std::vector<std::vector<double>> term_graph(const Tokens& terms, const std::vector<Tokens>& documents);

// Mean edge weight of a maximum spanning tree of the complete graph over the
// candidate's distinct terms; 0 below two terms.
double score_subquery(const Tokens& candidate, const std::vector<Tokens>& documents);
double mst_mean_weight(const Tokens& terms, const std::vector<std::vector<double>>& weights);

struct RankedSubquery {
  Tokens terms;
  double score = 0.0;
};

std::vector<RankedSubquery> rank_subqueries(const Question& q0, std::size_t n,
                                            std::size_t context_snippets = 10);
std::vector<RankedSubquery> rank_subqueries(const Tokens& query, const std::vector<Tokens>& documents,
                                            std::size_t n);

}  // namespace aqa
