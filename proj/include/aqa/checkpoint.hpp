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

#include "aqa/autodiff.hpp"
#include "json.hpp"

namespace aqa::ad {

inline constexpr int kCheckpointVersion = 1;

// A checkpoint is two files: `<stem>.json`, a manifest listing
// {name, shape, offset} per tensor (offset in bytes into the blob), and
// `<stem>.bin`, a 16-byte header ("AQAPARAM", u32 version, u32 reserved)
// followed by little-endian float64 values. `metadata` is stored verbatim in
// the manifest for model hyperparameters.
void save_checkpoint(const ParameterStore& params, const std::filesystem::path& stem,
                     const nlohmann::json& metadata = nlohmann::json::object());

struct Checkpoint {
  ParameterStore params;
  nlohmann::json metadata;
};

Checkpoint load_checkpoint(const std::filesystem::path& stem);

bool checkpoint_exists(const std::filesystem::path& stem);

}  // namespace aqa::ad
