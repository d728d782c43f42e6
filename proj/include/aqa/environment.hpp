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

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "aqa/corpus.hpp"

namespace aqa {

struct Span {
  std::size_t snippet = 0;
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive, within the snippet

  bool operator==(const Span&) const = default;
};

struct AnswerCandidate {
  Tokens answer;
  double score = -std::numeric_limits<double>::infinity();
  Span span;
  // Set when an external environment failed to answer.
  bool failed = false;
};

struct RewardedAnswer {
  AnswerCandidate candidate;
  double reward = 0.0;
};

// Opaque QA system: question tokens in, one answer with a confidence out.
// `qid` identifies the original question for environments that hold their
// own documents; `context` is the truncated snippet context.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual AnswerCandidate answer(const Tokens& question, const Tokens& context,
                                 std::string_view qid = {}) const = 0;
};

struct ReferenceEnvironmentConfig {
  std::size_t max_span = 6;
  std::size_t window = 5;
  double k1 = 1.2;
  double b = 0.75;
  // Divide by the question's total idf mass so scores compare across rewrites.
  bool normalize = true;
  // Skip spans that repeat a question term, unless no such span matches at all.
  bool exclude_question_terms = true;
};

/// Extractive reference environment. Every span of up to `max_span` tokens
/// inside one snippet is scored by BM25 between the question terms and the
/// span plus `window` tokens each side; collection statistics (N, df, avgdl)
/// come from the snippets of the context. The best span wins; ties go to the
/// earliest snippet, then earliest start, then the longest span.
class ReferenceEnvironment : public Environment {
 public:
  explicit ReferenceEnvironment(ReferenceEnvironmentConfig config = {}) : config_(config) {}

  AnswerCandidate answer(const Tokens& question, const Tokens& context,
                         std::string_view qid = {}) const override;

  // Score the environment assigns to `span`, recomputed from scratch.
  double score_span(const Tokens& question, const Tokens& context, const Span& span) const;
  bool eligible(const Tokens& question, const Tokens& context, const Span& span) const;

  const ReferenceEnvironmentConfig& config() const { return config_; }

 private:
  ReferenceEnvironmentConfig config_;
};

// Answers from a fixed table keyed by the joined question text; unknown
// questions get an empty answer. Used for toy tasks with known rewards.
class LookupEnvironment : public Environment {
 public:
  struct Entry {
    Tokens answer;
    double score = 0.0;
  };

  void add(const Tokens& question, Tokens answer, double score = 0.0);
  AnswerCandidate answer(const Tokens& question, const Tokens& context,
                         std::string_view qid = {}) const override;

 private:
  std::map<std::string, Entry> table_;
};

std::vector<Tokens> split_snippets(const Tokens& context);

// Lowercased tokens with punctuation-only tokens removed.
Tokens normalize_answer(const Tokens& tokens);

/// Bag-of-tokens F1 over normalized tokens. Both empty -> 1, one empty -> 0.
double token_f1(const Tokens& prediction, const Tokens& gold);
double exact_match(const Tokens& prediction, const Tokens& gold);

/// Max token F1 over q0's gold answers. Failed candidates earn 0.
RewardedAnswer reward(const AnswerCandidate& candidate, const Question& q0);
double max_exact_match(const Tokens& prediction, const Question& q0);

// ---------------------------------------------------------------------------
// External environments speak line-delimited JSON:
//   request  {"qid": str, "question": str}
//   response {"qid": str, "answer": str, "score": float}

struct WireRequest {
  std::string qid;
  std::string question;
};

struct WireResponse {
  std::string qid;
  std::string answer;
  double score = 0.0;
};

std::string encode_request(const WireRequest& request);
WireRequest decode_request(std::string_view line);
std::string encode_response(const WireResponse& response);
WireResponse decode_response(std::string_view line);

/// Serves `env` over the wire protocol until EOF on `in`. Contexts are
/// looked up by qid in `questions`; unknown qids get an empty answer.
/// Returns the number of requests served.
std::size_t serve_environment(const Environment& env, const std::map<std::string, Question>& questions,
                              std::istream& in, std::ostream& out, std::size_t context_snippets = 10);

class LineChannel;

/// Client side of the wire protocol over a child process's stdio or a TCP
/// connection. Malformed or mismatched responses yield a failed candidate.
class ExternalEnvironment : public Environment {
 public:
  static std::unique_ptr<ExternalEnvironment> spawn(const std::vector<std::string>& argv);
  static std::unique_ptr<ExternalEnvironment> connect(const std::string& host, std::uint16_t port);
  ~ExternalEnvironment() override;

  AnswerCandidate answer(const Tokens& question, const Tokens& context,
                         std::string_view qid = {}) const override;

 private:
  explicit ExternalEnvironment(std::unique_ptr<LineChannel> channel);
  std::unique_ptr<LineChannel> channel_;
};

}  // namespace aqa
