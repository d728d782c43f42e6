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

#include "aqa/analysis.hpp"

#include <algorithm>
#include <array>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "aqa/error.hpp"

namespace aqa {

namespace {

std::map<std::string, std::size_t> counts(const Tokens& tokens) {
  std::map<std::string, std::size_t> c;
  for (const auto& t : tokens) ++c[t];
  return c;
}

void require_question(const Tokens& q, const char* what) {
  if (q.empty()) throw PreconditionError(std::string(what) + ": empty question");
}

void require_contexts(const std::vector<Tokens>& contexts, const char* what) {
  if (contexts.empty()) throw PreconditionError(std::string(what) + ": no contexts");
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs, double mean) {
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return s / static_cast<double>(xs.size() - 1);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double mean_tf(const Tokens& question) {
  require_question(question, "mean_tf");
  const auto c = counts(question);
  return static_cast<double>(question.size()) / static_cast<double>(c.size());
}

double median_df(const Tokens& question, const std::vector<Tokens>& contexts) {
  require_question(question, "median_df");
  require_contexts(contexts, "median_df");
  std::vector<std::set<std::string>> docs;
  for (const auto& c : contexts) docs.emplace_back(c.begin(), c.end());
  std::vector<double> dfs;
  for (const auto& [term, n] : counts(question)) {
    double df = 0.0;
    for (const auto& d : docs) df += d.count(term) ? 1.0 : 0.0;
    dfs.push_back(df);
  }
  std::sort(dfs.begin(), dfs.end());
  const std::size_t m = dfs.size();
  return m % 2 == 1 ? dfs[m / 2] : 0.5 * (dfs[m / 2 - 1] + dfs[m / 2]);
}

double query_clarity(const Tokens& question, const std::vector<Tokens>& contexts) {
  constexpr double kEpsilon = 1e-9;
  require_question(question, "query_clarity");
  require_contexts(contexts, "query_clarity");
  std::map<std::string, double> collection;
  double total = 0.0;
  for (const auto& c : contexts)
    for (const auto& t : c) {
      collection[t] += 1.0;
      total += 1.0;
    }
  const auto q = counts(question);
  std::size_t missing = 0;
  for (const auto& [term, n] : q) missing += collection.count(term) ? 0 : 1;
  const double z = (total > 0.0 ? 1.0 : 0.0) + kEpsilon * static_cast<double>(missing);
  double kl = 0.0;
  for (const auto& [term, n] : q) {
    const double pq = static_cast<double>(n) / static_cast<double>(question.size());
    const auto it = collection.find(term);
    const double pc = (it == collection.end() ? kEpsilon : it->second / total) / z;
    kl += pq * std::log(pq / pc);
  }
  return std::max(0.0, kl);
}

std::string stem(const std::string& token) {
  static const std::array<std::string, 6> suffixes = {"ing", "es", "ed", "ly", "er", "s"};
  std::string best = token;
  std::size_t best_len = 0;
  for (const auto& suf : suffixes) {
    if (suf.size() <= best_len || token.size() < suf.size() + 3 || !token.ends_with(suf)) continue;
    const std::string base = token.substr(0, token.size() - suf.size());
    if (suf == "es") {
      const bool sibilant = base.ends_with("s") || base.ends_with("x") || base.ends_with("z") ||
                            base.ends_with("ch") || base.ends_with("sh");
      if (!sibilant) continue;
    }
    best = base;
    best_len = suf.size();
  }
  return best;
}

bool repeated_stem(const Tokens& question) {
  require_question(question, "repeated_stem");
  std::map<std::string, std::set<std::string>> forms;
  for (const auto& t : question) forms[stem(t)].insert(t);
  return std::any_of(forms.begin(), forms.end(), [](const auto& kv) { return kv.second.size() >= 2; });
}

std::vector<std::pair<std::string, std::size_t>> prefix_stats(const std::vector<Tokens>& questions,
                                                              std::size_t k) {
  if (k == 0) throw PreconditionError("prefix_stats: k must be >= 1");
  std::map<std::string, std::size_t> tally;
  for (const auto& q : questions) {
    if (q.size() < k) continue;
    ++tally[join(Tokens(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(k)))];
  }
  std::vector<std::pair<std::string, std::size_t>> out(tally.begin(), tally.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

QueryStats query_stats(const std::string& id, const Tokens& question, const std::vector<Tokens>& contexts) {
  QueryStats s;
  s.id = id;
  s.length = question.size();
  s.mean_tf = mean_tf(question);
  s.median_df = median_df(question, contexts);
  s.query_clarity = query_clarity(question, contexts);
  s.repeated_stem = repeated_stem(question);
  return s;
}

TTest welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw PreconditionError("t-test: each sample needs >= 2 values");
  TTest r;
  r.mean_a = mean_of(a);
  r.mean_b = mean_of(b);
  const double se_a = sample_variance(a, r.mean_a) / static_cast<double>(a.size());
  const double se_b = sample_variance(b, r.mean_b) / static_cast<double>(b.size());
  const double se = se_a + se_b;
  if (se == 0.0) {
    r.defined = false;
    r.t = r.mean_a == r.mean_b ? 0.0
                               : std::copysign(std::numeric_limits<double>::infinity(), r.mean_a - r.mean_b);
    r.df = std::numeric_limits<double>::quiet_NaN();
    r.p = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.t = (r.mean_a - r.mean_b) / std::sqrt(se);
  r.df = se * se / (se_a * se_a / static_cast<double>(a.size() - 1) +
                    se_b * se_b / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

std::vector<TTest> compare_populations(const std::vector<QueryStats>& a, const std::vector<QueryStats>& b) {
  using Getter = double (*)(const QueryStats&);
  const std::pair<const char*, Getter> metrics[] = {
      {"length", [](const QueryStats& s) { return static_cast<double>(s.length); }},
      {"mean_tf", [](const QueryStats& s) { return s.mean_tf; }},
      {"median_df", [](const QueryStats& s) { return s.median_df; }},
      {"query_clarity", [](const QueryStats& s) { return s.query_clarity; }},
      {"repeated_stem", [](const QueryStats& s) { return s.repeated_stem ? 1.0 : 0.0; }},
  };
  std::vector<TTest> out;
  for (const auto& [name, get] : metrics) {
    std::vector<double> xa, xb;
    for (const auto& s : a) xa.push_back(get(s));
    for (const auto& s : b) xb.push_back(get(s));
    TTest t = welch_t_test(xa, xb);
    t.metric = name;
    out.push_back(t);
  }
  return out;
}

void write_analysis_report(const std::vector<Population>& populations, std::ostream& out) {
  out << "population\tid\tlength\tmean_tf\tmedian_df\tquery_clarity\trepeated_stem\n";
  for (const auto& pop : populations)
    for (const auto& s : pop.stats)
      out << pop.name << '\t' << s.id << '\t' << s.length << '\t' << fmt(s.mean_tf) << '\t'
          << fmt(s.median_df) << '\t' << fmt(s.query_clarity) << '\t' << (s.repeated_stem ? 1 : 0) << '\n';
  out << "\n# summary\npopulation\tcount\tlength\tmean_tf\tmedian_df\tquery_clarity\trepeated_stem\n";
  for (const auto& pop : populations) {
    double sums[5] = {0, 0, 0, 0, 0};
    for (const auto& s : pop.stats) {
      sums[0] += static_cast<double>(s.length);
      sums[1] += s.mean_tf;
      sums[2] += s.median_df;
      sums[3] += s.query_clarity;
      sums[4] += s.repeated_stem ? 1.0 : 0.0;
    }
    const double n = pop.stats.empty() ? 1.0 : static_cast<double>(pop.stats.size());
    out << pop.name << '\t' << pop.stats.size();
    for (double v : sums) out << '\t' << fmt(v / n);
    out << '\n';
  }
  out << "\n# welch t-tests\na\tb\tmetric\tt\tdf\tp\n";
  for (std::size_t i = 0; i < populations.size(); ++i)
    for (std::size_t j = i + 1; j < populations.size(); ++j) {
      if (populations[i].stats.size() < 2 || populations[j].stats.size() < 2) continue;
      for (const auto& t : compare_populations(populations[i].stats, populations[j].stats))
        out << populations[i].name << '\t' << populations[j].name << '\t' << t.metric << '\t' << fmt(t.t)
            << '\t' << fmt(t.df) << '\t' << (t.defined ? fmt(t.p) : "undefined") << '\n';
    }
}

}  // namespace aqa
