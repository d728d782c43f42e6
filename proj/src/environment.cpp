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

#include "aqa/environment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include "aqa/error.hpp"
#include "json.hpp"

namespace aqa {

std::vector<Tokens> split_snippets(const Tokens& context) {
  std::vector<Tokens> out;
  if (context.empty()) return out;
  out.emplace_back();
  for (const std::string& t : context) {
    if (t == kSnippetSeparator)
      out.emplace_back();
    else
      out.back().push_back(t);
  }
  return out;
}

namespace {

struct QueryTerms {
  std::vector<std::string> terms;  // distinct, sorted
  std::vector<double> qtf;
};

QueryTerms query_terms(const Tokens& question) {
  std::map<std::string, double> counts;
  for (const std::string& t : question)
    if (t != kSnippetSeparator) counts[t] += 1.0;
  QueryTerms q;
  for (const auto& [t, c] : counts) {
    q.terms.push_back(t);
    q.qtf.push_back(c);
  }
  return q;
}

struct Collection {
  std::vector<Tokens> snippets;
  std::vector<double> idf;  // aligned with QueryTerms::terms
  double avgdl = 1.0;
  double idf_mass = 0.0;
};

Collection collection_stats(const Tokens& context, const QueryTerms& q) {
  Collection c;
  c.snippets = split_snippets(context);
  const double n = static_cast<double>(c.snippets.size());
  double total_len = 0.0;
  for (const Tokens& s : c.snippets) total_len += static_cast<double>(s.size());
  c.avgdl = n > 0 && total_len > 0 ? total_len / n : 1.0;
  for (std::size_t i = 0; i < q.terms.size(); ++i) {
    double df = 0.0;
    for (const Tokens& s : c.snippets)
      if (std::find(s.begin(), s.end(), q.terms[i]) != s.end()) df += 1.0;
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    c.idf.push_back(idf);
    c.idf_mass += q.qtf[i] * idf;
  }
  return c;
}

double bm25_window(const ReferenceEnvironmentConfig& cfg, const QueryTerms& q,
                   const Collection& c, const Tokens& snippet, std::size_t start,
                   std::size_t end) {
  const std::size_t lo = start >= cfg.window ? start - cfg.window : 0;
  const std::size_t hi = std::min(snippet.size(), end + cfg.window);
  const double dl = static_cast<double>(hi - lo);
  double score = 0.0;
  for (std::size_t i = 0; i < q.terms.size(); ++i) {
    double tf = 0.0;
    for (std::size_t p = lo; p < hi; ++p)
      if (snippet[p] == q.terms[i]) tf += 1.0;
    if (tf == 0.0) continue;
    const double norm = cfg.k1 * (1.0 - cfg.b + cfg.b * dl / c.avgdl);
    score += q.qtf[i] * c.idf[i] * tf * (cfg.k1 + 1.0) / (tf + norm);
  }
  if (cfg.normalize && c.idf_mass > 0.0) score /= c.idf_mass;
  return score;
}

bool span_repeats_question(const QueryTerms& q, const Tokens& snippet, std::size_t start,
                           std::size_t end) {
  for (std::size_t p = start; p < end; ++p)
    if (std::binary_search(q.terms.begin(), q.terms.end(), snippet[p])) return true;
  return false;
}

}  // namespace

double ReferenceEnvironment::score_span(const Tokens& question, const Tokens& context,
                                        const Span& span) const {
  const QueryTerms q = query_terms(question);
  const Collection c = collection_stats(context, q);
  if (span.snippet >= c.snippets.size() || span.end > c.snippets[span.snippet].size() ||
      span.start >= span.end)
    throw PreconditionError("score_span: span outside context");
  return bm25_window(config_, q, c, c.snippets[span.snippet], span.start, span.end);
}

bool ReferenceEnvironment::eligible(const Tokens& question, const Tokens& context,
                                    const Span& span) const {
  const QueryTerms q = query_terms(question);
  const auto snippets = split_snippets(context);
  return !span_repeats_question(q, snippets.at(span.snippet), span.start, span.end);
}

AnswerCandidate ReferenceEnvironment::answer(const Tokens& question, const Tokens& context,
                                             std::string_view) const {
  AnswerCandidate none;
  const QueryTerms q = query_terms(question);
  if (q.terms.empty() || context.empty()) return none;
  const Collection c = collection_stats(context, q);

  struct Best {
    double score = -std::numeric_limits<double>::infinity();
    Span span;
    bool found = false;
  };
  Best restricted, any;
  for (std::size_t si = 0; si < c.snippets.size(); ++si) {
    const Tokens& s = c.snippets[si];
    for (std::size_t start = 0; start < s.size(); ++start) {
      const std::size_t max_end = std::min(s.size(), start + config_.max_span);
      // Longest first so that an equal score never displaces a longer span.
      for (std::size_t end = max_end; end > start; --end) {
        const double score = bm25_window(config_, q, c, s, start, end);
        if (!any.found || score > any.score) any = {score, {si, start, end}, true};
        if (config_.exclude_question_terms && !span_repeats_question(q, s, start, end) &&
            (!restricted.found || score > restricted.score))
          restricted = {score, {si, start, end}, true};
      }
    }
  }
  if (!any.found) return none;
  const Best& best =
      config_.exclude_question_terms && restricted.found && restricted.score > 0.0 ? restricted
                                                                                   : any;
  AnswerCandidate out;
  out.span = best.span;
  out.score = best.score;
  const Tokens& s = c.snippets[best.span.snippet];
  out.answer.assign(s.begin() + static_cast<std::ptrdiff_t>(best.span.start),
                    s.begin() + static_cast<std::ptrdiff_t>(best.span.end));
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

Tokens normalize_answer(const Tokens& tokens) {
  Tokens out;
  for (const std::string& t : tokens) {
    const bool punct = std::all_of(t.begin(), t.end(), [](char ch) {
      const auto c = static_cast<unsigned char>(ch);
      return c < 0x80 && std::ispunct(c);
    });
    if (t.empty() || punct) continue;
    std::string lower = t;
    for (char& ch : lower)
      if (static_cast<unsigned char>(ch) < 0x80) ch = static_cast<char>(std::tolower(ch));
    out.push_back(std::move(lower));
  }
  return out;
}

double token_f1(const Tokens& prediction, const Tokens& gold) {
  const Tokens p = normalize_answer(prediction);
  const Tokens g = normalize_answer(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, long> counts;
  for (const std::string& t : g) ++counts[t];
  long common = 0;
  for (const std::string& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

double exact_match(const Tokens& prediction, const Tokens& gold) {
  return normalize_answer(prediction) == normalize_answer(gold) ? 1.0 : 0.0;
}

RewardedAnswer reward(const AnswerCandidate& candidate, const Question& q0) {
  RewardedAnswer out{candidate, 0.0};
  if (candidate.failed) return out;
  for (const Tokens& gold : q0.gold_answers)
    out.reward = std::max(out.reward, token_f1(candidate.answer, gold));
  return out;
}

double max_exact_match(const Tokens& prediction, const Question& q0) {
  double em = 0.0;
  for (const Tokens& gold : q0.gold_answers) em = std::max(em, exact_match(prediction, gold));
  return em;
}

// ---------------------------------------------------------------------------
// Wire protocol

using nlohmann::json;

std::string encode_request(const WireRequest& request) {
  return json{{"qid", request.qid}, {"question", request.question}}.dump();
}

WireRequest decode_request(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("request: ") + e.what(), 0);
  }
  if (!obj.is_object() || !obj.contains("qid") || !obj["qid"].is_string() ||
      !obj.contains("question") || !obj["question"].is_string())
    throw ParseError("request: expected {\"qid\": str, \"question\": str}", 0);
  return {obj["qid"].get<std::string>(), obj["question"].get<std::string>()};
}

std::string encode_response(const WireResponse& response) {
  json obj{{"qid", response.qid}, {"answer", response.answer}};
  // JSON has no infinities; an abstention travels as null.
  if (std::isfinite(response.score))
    obj["score"] = response.score;
  else
    obj["score"] = nullptr;
  return obj.dump();
}

WireResponse decode_response(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("response: ") + e.what(), 0);
  }
  if (!obj.is_object() || !obj.contains("qid") || !obj["qid"].is_string() ||
      !obj.contains("answer") || !obj["answer"].is_string() || !obj.contains("score") ||
      !(obj["score"].is_number() || obj["score"].is_null()))
    throw ParseError("response: expected {\"qid\": str, \"answer\": str, \"score\": float}", 0);
  WireResponse r{obj["qid"].get<std::string>(), obj["answer"].get<std::string>(), 0.0};
  r.score = obj["score"].is_null() ? -std::numeric_limits<double>::infinity()
                                   : obj["score"].get<double>();
  return r;
}

std::size_t serve_environment(const Environment& env, const std::map<std::string, Question>& questions,
                              std::istream& in, std::ostream& out, std::size_t context_snippets) {
  std::size_t served = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    WireResponse response;
    try {
      const WireRequest request = decode_request(line);
      response.qid = request.qid;
      Tokens context;
      if (auto it = questions.find(request.qid); it != questions.end())
        context = truncate_context(it->second, context_snippets);
      const AnswerCandidate c = env.answer(tokenize(request.question), context, request.qid);
      response.answer = join(c.answer);
      response.score = c.score;
    } catch (const ParseError&) {
      response.answer.clear();
      response.score = -std::numeric_limits<double>::infinity();
    }
    out << encode_response(response) << '\n' << std::flush;
    ++served;
  }
  return served;
}

void LookupEnvironment::add(const Tokens& question, Tokens answer, double score) {
  table_[join(question)] = {std::move(answer), score};
}

AnswerCandidate LookupEnvironment::answer(const Tokens& question, const Tokens&,
                                          std::string_view) const {
  AnswerCandidate out;
  const auto it = table_.find(join(question));
  if (it == table_.end()) return out;
  out.answer = it->second.answer;
  out.score = it->second.score;
  return out;
}

}  // namespace aqa
