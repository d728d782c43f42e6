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

#include "aqa/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "aqa/error.hpp"

namespace aqa::ad {

namespace {

constexpr char kMagic[8] = {'A', 'Q', 'A', 'P', 'A', 'R', 'A', 'M'};
constexpr std::size_t kHeaderBytes = 16;

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const ParameterStore& params, const std::filesystem::path& stem,
                     const nlohmann::json& metadata) {
  const auto bin_path = with_suffix(stem, ".bin");
  const auto json_path = with_suffix(stem, ".json");
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());

  nlohmann::json manifest;
  manifest["format"] = "aqa-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["blob"] = bin_path.filename().string();
  manifest["metadata"] = metadata;
  manifest["entries"] = nlohmann::json::array();

  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error("cannot write " + bin_path.string());
  bin.write(kMagic, sizeof kMagic);
  put_u32(bin, kCheckpointVersion);
  put_u32(bin, 0);
  std::size_t offset = kHeaderBytes;
  for (const auto& [name, tensor] : params.entries()) {
    manifest["entries"].push_back({{"name", name}, {"shape", tensor.shape()}, {"offset", offset}});
    for (double v : tensor.values()) put_f64(bin, v);
    offset += 8 * tensor.size();
  }
  if (!bin) throw Error("failed writing " + bin_path.string());

  std::ofstream js(json_path);
  if (!js) throw Error("cannot write " + json_path.string());
  js << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& stem) {
  const auto json_path = with_suffix(stem, ".json");
  std::ifstream js(json_path);
  if (!js) throw Error("cannot read " + json_path.string());
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(json_path.string() + ": " + e.what(), 0);
  }
  if (manifest.value("format", "") != "aqa-checkpoint")
    throw ParseError(json_path.string() + ": not an aqa checkpoint manifest", 0);
  if (manifest.value("version", 0) != kCheckpointVersion)
    throw ParseError(json_path.string() + ": unsupported checkpoint version", 0);

  const auto bin_path = json_path.parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error("cannot read " + bin_path.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)),
                                  std::istreambuf_iterator<char>());
  if (blob.size() < kHeaderBytes || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0)
    throw ParseError(bin_path.string() + ": bad blob header", 0);
  if (get_u32(blob.data() + 8) != kCheckpointVersion)
    throw ParseError(bin_path.string() + ": blob version mismatch", 0);

  Checkpoint out;
  out.metadata = manifest.value("metadata", nlohmann::json::object());
  for (const auto& entry : manifest.at("entries")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    Tensor t(shape);
    if (offset + 8 * t.size() > blob.size())
      throw ParseError(bin_path.string() + ": entry '" + name + "' past end of blob", 0);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f64(blob.data() + offset + 8 * i);
    out.params.add(name, std::move(t));
  }
  return out;
}

bool checkpoint_exists(const std::filesystem::path& stem) {
  return std::filesystem::exists(with_suffix(stem, ".json")) &&
         std::filesystem::exists(with_suffix(stem, ".bin"));
}

}  // namespace aqa::ad
