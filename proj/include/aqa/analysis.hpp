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

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "aqa/corpus.hpp"

namespace aqa {

double mean_tf(const Tokens& question);
double median_df(const Tokens& question, const std::vector<Tokens>& contexts);
// KL divergence (nats) from the question unigram model to the collection
// model, with 1e-9 mass for question terms missing from the collection.
double query_clarity(const Tokens& question, const std::vector<Tokens>& contexts);

// Strips the longest of {s, es, ed, ing, ly, er} that leaves at least three
// characters; "es" only after s, x, z, ch or sh.
std::string stem(const std::string& token);
bool repeated_stem(const Tokens& question);

// k-token prefix counts, most frequent first (ties lexicographic). Questions
// shorter than k are skipped.
std::vector<std::pair<std::string, std::size_t>> prefix_stats(const std::vector<Tokens>& questions,
                                                              std::size_t k);

struct QueryStats {
  std::string id;
  std::size_t length = 0;
  double mean_tf = 0.0;
  double median_df = 0.0;
  double query_clarity = 0.0;
  bool repeated_stem = false;
};

QueryStats query_stats(const std::string& id, const Tokens& question, const std::vector<Tokens>& contexts);

struct TTest {
  std::string metric;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p = 0.0;
  // False when both samples have zero variance; p is NaN then.
  bool defined = true;
};

TTest welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

// One Welch test per metric: length, mean_tf, median_df, query_clarity, repeated_stem.
std::vector<TTest> compare_populations(const std::vector<QueryStats>& a, const std::vector<QueryStats>& b);

struct Population {
  std::string name;
  std::vector<QueryStats> stats;
};

void write_analysis_report(const std::vector<Population>& populations, std::ostream& out);

}  // namespace aqa
