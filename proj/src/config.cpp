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

#include "aqa/config.hpp"

#include <fstream>
#include <sstream>

#include "aqa/error.hpp"

namespace aqa {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Config Config::parse(std::string_view text) {
  Config c;
  std::string section;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line[0] == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", lineno);
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) throw ParseError("empty section name", lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ParseError("missing key", lineno);
    if (c.values_[section].count(key)) throw ParseError("duplicate key '" + key + "'", lineno);
    c.values_[section][key] = trim(std::string_view(line).substr(eq + 1));
    c.lines_[{section, key}] = lineno;
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

const std::string* Config::find(const std::string& section, const std::string& key) const {
  read_[{section, key}] = true;
  const auto s = values_.find(section);
  if (s == values_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

bool Config::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

void Config::set(const std::string& section, const std::string& key, std::string value) {
  values_[section][key] = std::move(value);
}

std::string Config::get(const std::string& section, const std::string& key, const std::string& fallback) const {
  const std::string* v = find(section, key);
  return v == nullptr ? fallback : *v;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
  const std::string* v = find(section, key);
  if (v == nullptr) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used == v->size()) return d;
  } catch (const std::exception&) {
  }
  const auto it = lines_.find({section, key});
  throw ParseError("[" + section + "] " + key + ": '" + *v + "' is not a number",
                   it == lines_.end() ? 0 : it->second);
}

std::size_t Config::get_size(const std::string& section, const std::string& key, std::size_t fallback) const {
  const std::string* v = find(section, key);
  if (v == nullptr) return fallback;
  try {
    std::size_t used = 0;
    const unsigned long long n = std::stoull(*v, &used);
    if (used == v->size() && (*v)[0] != '-') return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
  }
  const auto it = lines_.find({section, key});
  throw ParseError("[" + section + "] " + key + ": '" + *v + "' is not a non-negative integer",
                   it == lines_.end() ? 0 : it->second);
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const std::string* v = find(section, key);
  if (v == nullptr) return fallback;
  if (*v == "true" || *v == "yes" || *v == "1" || *v == "on") return true;
  if (*v == "false" || *v == "no" || *v == "0" || *v == "off") return false;
  const auto it = lines_.find({section, key});
  throw ParseError("[" + section + "] " + key + ": '" + *v + "' is not a boolean",
                   it == lines_.end() ? 0 : it->second);
}

std::vector<std::string> Config::get_list(const std::string& section, const std::string& key) const {
  std::vector<std::string> out;
  const std::string* v = find(section, key);
  if (v == nullptr) return out;
  std::istringstream ss(*v);
  std::string word;
  while (ss >> word) out.push_back(word);
  return out;
}

std::vector<std::string> Config::unused() const {
  std::vector<std::string> out;
  for (const auto& [section, kv] : values_)
    for (const auto& [key, value] : kv)
      if (!read_.count({section, key})) out.push_back(section.empty() ? key : section + "." + key);
  return out;
}

std::string Config::dump() const {
  std::ostringstream out;
  for (const auto& [section, kv] : values_) {
    if (!section.empty()) out << '[' << section << "]\n";
    for (const auto& [key, value] : kv) out << key << " = " << value << '\n';
  }
  return out.str();
}

}  // namespace aqa
