// Copyright 2026 The smf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smf/config.hpp"
#include "smf/model.hpp"
#include "smf/ranking.hpp"
#include "smf/rng.hpp"

namespace smf {

// Container layout (little-endian):
//   "SMFCKPT\0"  u32 version  u64 config digest  u32 section count
//   per section: 4-byte tag, u64 payload length, payload, u64 FNV-1a of payload
//   trailer: "SMFEND\0\0", u64 FNV-1a of every preceding byte
// Sections: CONF (config JSON), PARM (parameters), BGST (background store),
// RNGS (generator state).
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ExperimentConfig config;
  TransformerModel<float> model;
  BackgroundIndexStore store;
  RngState rng;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace smf
