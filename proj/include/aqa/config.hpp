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

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace aqa {

/// Sectioned key = value text. Lines starting with '#' or ';' are comments;
/// keys before the first [section] live in the "" section.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, std::string value);

  std::string get(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& section, const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  // Whitespace-separated words.
  std::vector<std::string> get_list(const std::string& section, const std::string& key) const;

  // Keys present in the file that no getter asked for.
  std::vector<std::string> unused() const;

  std::string dump() const;

 private:
  const std::string* find(const std::string& section, const std::string& key) const;

  std::map<std::string, std::map<std::string, std::string>> values_;
  std::map<std::pair<std::string, std::string>, std::size_t> lines_;
  mutable std::map<std::pair<std::string, std::string>, bool> read_;
};

}  // namespace aqa
