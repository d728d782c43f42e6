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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aqa {

using Tokens = std::vector<std::string>;

// Inserted between snippets by truncate_context; never produced by tokenize.
inline constexpr std::string_view kSnippetSeparator = "<sep>";

struct Question {
  std::string id;
  Tokens text;
  std::vector<Tokens> gold_answers;
  std::vector<Tokens> snippets;
  // Set by the synthetic generator: some single-edit rewrite beats q0.
  std::optional<bool> uplift;

  bool operator==(const Question&) const = default;
};

enum class Split { kTrain, kValidation, kTest };

std::string_view split_name(Split split);

struct Dataset {
  Split split = Split::kTrain;
  std::vector<Question> questions;

  bool operator==(const Dataset&) const = default;
};

struct ParaphrasePair {
  Tokens source;
  Tokens target;

  bool operator==(const ParaphrasePair&) const = default;
};

/// Lowercases ASCII letters, splits on whitespace and emits every ASCII
/// punctuation character as its own token. Bytes >= 0x80 are kept inside
/// words so UTF-8 text passes through unchanged.
Tokens tokenize(std::string_view text);

std::string join(const Tokens& tokens);

/// Reads the dataset JSONL format. Throws ParseError naming the 1-based line
/// for malformed records and for duplicate ids.
Dataset load_dataset(const std::filesystem::path& path, Split split = Split::kTrain);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

std::vector<ParaphrasePair> load_paraphrases(const std::filesystem::path& path);
void save_paraphrases(const std::vector<ParaphrasePair>& pairs, const std::filesystem::path& path);

/// Joins the first min(k, #snippets) snippets with kSnippetSeparator.
Tokens truncate_context(const Question& q, std::size_t k = 10);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kBos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary();
  // `tokens` excludes the reserved entries; duplicates are rejected.
  explicit Vocabulary(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t lookup(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(const Tokens& tokens) const;
  // Drops reserved ids except UNK.
  Tokens decode(const std::vector<std::size_t>& ids) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Reserved tokens plus the (max_size - 4) most frequent tokens over
/// question texts and snippets; ties resolved lexicographically.
Vocabulary build_vocab(const std::vector<const Dataset*>& datasets, std::size_t max_size);
Vocabulary build_vocab(const Dataset& dataset, std::size_t max_size);

double jaccard(const Tokens& a, const Tokens& b);

/// Keeps pairs whose distinct-term Jaccard is strictly above `jaccard_min`,
/// then at most `max_per_source` per distinct source, in input order.
std::vector<ParaphrasePair> filter_paraphrases(const std::vector<ParaphrasePair>& pairs,
                                               double jaccard_min = 0.5,
                                               std::size_t max_per_source = 4);

// Fixed suffix table used for synthetic inflections.
const std::vector<std::string>& inflection_suffixes();

struct GeneratorConfig {
  std::size_t train_questions = 1500;
  std::size_t validation_questions = 300;
  std::size_t test_questions = 500;
  std::size_t subjects = 48;
  std::size_t relations = 20;
  std::size_t objects = 60;
  std::size_t distractors = 8;
  std::size_t noise_words = 40;
  // Probability a question carries injected distractor terms.
  double distractor_rate = 0.35;
  std::size_t distractors_per_question = 2;
  // Probability the relation term of a question is inflected.
  double inflection_rate = 0.6;
  std::size_t min_snippets = 6;
  std::size_t max_snippets = 12;
  std::size_t paraphrases_per_question = 3;
  double paraphrase_drop_rate = 0.15;
  double paraphrase_duplicate_rate = 0.05;
  double paraphrase_deinflect_rate = 0.3;
  double min_uplift_fraction = 0.5;
};

struct SyntheticCorpus {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::vector<ParaphrasePair> warm_start;
  // Synthetic lexicon, for inspection and tests.
  std::map<std::string, std::string> inflection_base;
  std::vector<std::string> distractor_terms;
};

class Environment;

/// Deterministic SearchQA-like generator. Every question plants a fact
/// snippet whose last token is the gold answer. Questions are built from the
/// fact's subject and relation with optional distractors and inflections,
/// then shuffled. Each question's `uplift` flag records whether some single
/// drop or de-inflect edit strictly improves the reference environment's F1.
/// Throws PreconditionError when the uplift fraction cannot be guaranteed.
SyntheticCorpus generate_synthetic(std::uint64_t seed, const GeneratorConfig& config);

/// All single-edit rewrites of `question`: drop one position, or replace one
/// inflected token by its base form.
std::vector<Tokens> single_edit_rewrites(const Tokens& question,
                                         const std::map<std::string, std::string>& inflection_base);

}  // namespace aqa
