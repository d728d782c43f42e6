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

#include "aqa/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <unordered_set>

#include "aqa/error.hpp"
#include "json.hpp"

namespace aqa {

using nlohmann::json;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : raw);
    }
  }
  flush();
  return out;
}

std::string join(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

namespace {

Tokens string_field(const json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"", line);
  if (!obj[key].is_string())
    throw ParseError(std::string("field \"") + key + "\" must be a string", line);
  return tokenize(obj[key].get<std::string>());
}

std::vector<Tokens> string_list(const json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"", line);
  const json& arr = obj[key];
  if (!arr.is_array())
    throw ParseError(std::string("field \"") + key + "\" must be an array", line);
  std::vector<Tokens> out;
  for (const json& item : arr) {
    if (!item.is_string())
      throw ParseError(std::string("field \"") + key + "\" must hold strings", line);
    out.push_back(tokenize(item.get<std::string>()));
  }
  return out;
}

template <typename F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!obj.is_object()) throw ParseError("expected a JSON object", line);
    f(obj, line);
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, Split split) {
  Dataset ds;
  ds.split = split;
  std::unordered_set<std::string> seen;
  for_each_json_line(path, [&](const json& obj, std::size_t line) {
    Question q;
    if (!obj.contains("id") || !obj["id"].is_string())
      throw ParseError("missing string field \"id\"", line);
    q.id = obj["id"].get<std::string>();
    q.text = string_field(obj, "question", line);
    q.gold_answers = string_list(obj, "gold_answers", line);
    q.snippets = string_list(obj, "snippets", line);
    if (q.text.empty()) throw ParseError("empty question text", line);
    if (q.gold_answers.empty()) throw ParseError("\"gold_answers\" is empty", line);
    for (const Tokens& g : q.gold_answers)
      if (g.empty()) throw ParseError("empty gold answer", line);
    if (obj.contains("uplift")) {
      if (!obj["uplift"].is_boolean()) throw ParseError("\"uplift\" must be a boolean", line);
      q.uplift = obj["uplift"].get<bool>();
    }
    if (!seen.insert(q.id).second) throw ParseError("duplicate id \"" + q.id + "\"", line);
    ds.questions.push_back(std::move(q));
  });
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const Question& q : dataset.questions) {
    json obj;
    obj["id"] = q.id;
    obj["question"] = join(q.text);
    obj["gold_answers"] = json::array();
    for (const Tokens& g : q.gold_answers) obj["gold_answers"].push_back(join(g));
    obj["snippets"] = json::array();
    for (const Tokens& s : q.snippets) obj["snippets"].push_back(join(s));
    if (q.uplift) obj["uplift"] = *q.uplift;
    out << obj.dump() << '\n';
  }
}

std::vector<ParaphrasePair> load_paraphrases(const std::filesystem::path& path) {
  std::vector<ParaphrasePair> pairs;
  for_each_json_line(path, [&](const json& obj, std::size_t line) {
    ParaphrasePair p{string_field(obj, "source", line), string_field(obj, "target", line)};
    if (p.source.empty() || p.target.empty()) throw ParseError("empty paraphrase side", line);
    pairs.push_back(std::move(p));
  });
  return pairs;
}

void save_paraphrases(const std::vector<ParaphrasePair>& pairs,
                      const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const ParaphrasePair& p : pairs)
    out << json{{"source", join(p.source)}, {"target", join(p.target)}}.dump() << '\n';
}

Tokens truncate_context(const Question& q, std::size_t k) {
  if (k == 0) throw PreconditionError("truncate_context: k must be >= 1");
  Tokens out;
  const std::size_t n = std::min(k, q.snippets.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out.emplace_back(kSnippetSeparator);
    out.insert(out.end(), q.snippets[i].begin(), q.snippets[i].end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

namespace {
const std::vector<std::string> kReservedTokens = {"<pad>", "<unk>", "<s>", "</s>"};
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : tokens_(kReservedTokens) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
  for (const std::string& t : tokens) {
    if (!index_.emplace(t, tokens_.size()).second)
      throw PreconditionError("duplicate vocabulary token '" + t + "'");
    tokens_.push_back(t);
  }
}

std::size_t Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(lookup(t));
  return ids;
}

Tokens Vocabulary::decode(const std::vector<std::size_t>& ids) const {
  Tokens out;
  for (std::size_t id : ids)
    if (id >= kReserved || id == kUnk) out.push_back(token(id));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = kReserved; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) tokens.push_back(line);
  return Vocabulary(tokens);
}

Vocabulary build_vocab(const std::vector<const Dataset*>& datasets, std::size_t max_size) {
  if (max_size < 5) throw PreconditionError("build_vocab: max_size must be >= 5");
  std::map<std::string, std::size_t> counts;
  for (const Dataset* ds : datasets)
    for (const Question& q : ds->questions) {
      for (const std::string& t : q.text) ++counts[t];
      for (const Tokens& s : q.snippets)
        for (const std::string& t : s) ++counts[t];
    }
  for (const std::string& r : kReservedTokens) counts.erase(r);
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already lexicographic, so a stable sort by frequency keeps ties ordered.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> keep;
  for (std::size_t i = 0; i < ranked.size() && keep.size() < max_size - Vocabulary::kReserved; ++i)
    keep.push_back(ranked[i].first);
  return Vocabulary(keep);
}

Vocabulary build_vocab(const Dataset& dataset, std::size_t max_size) {
  return build_vocab(std::vector<const Dataset*>{&dataset}, max_size);
}

// ---------------------------------------------------------------------------
// Paraphrase filtering

double jaccard(const Tokens& a, const Tokens& b) {
  const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const std::string& t : sa) inter += sb.count(t);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

std::vector<ParaphrasePair> filter_paraphrases(const std::vector<ParaphrasePair>& pairs,
                                               double jaccard_min, std::size_t max_per_source) {
  if (!(jaccard_min >= 0.0 && jaccard_min <= 1.0))
    throw PreconditionError("filter_paraphrases: jaccard_min must be in [0,1]");
  std::vector<ParaphrasePair> out;
  std::map<Tokens, std::size_t> per_source;
  for (const ParaphrasePair& p : pairs) {
    if (!(jaccard(p.source, p.target) > jaccard_min)) continue;
    std::size_t& n = per_source[p.source];
    if (n >= max_per_source) continue;
    ++n;
    out.push_back(p);
  }
  return out;
}

const std::vector<std::string>& inflection_suffixes() {
  static const std::vector<std::string> suffixes = {"s", "ed", "ing"};
  return suffixes;
}

std::vector<Tokens> single_edit_rewrites(const Tokens& question,
                                         const std::map<std::string, std::string>& inflection_base) {
  std::vector<Tokens> out;
  for (std::size_t i = 0; i < question.size(); ++i) {
    Tokens dropped = question;
    dropped.erase(dropped.begin() + static_cast<std::ptrdiff_t>(i));
    out.push_back(std::move(dropped));
    if (auto it = inflection_base.find(question[i]); it != inflection_base.end()) {
      Tokens base = question;
      base[i] = it->second;
      out.push_back(std::move(base));
    }
  }
  return out;
}

}  // namespace aqa
