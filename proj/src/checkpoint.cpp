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

#include "smf/checkpoint.hpp"

#include <array>
#include <cstring>
#include <map>

#include "smf/binary_io.hpp"

namespace smf {
namespace {

constexpr std::array<std::uint8_t, 8> kMagic{'S', 'M', 'F', 'C', 'K', 'P', 'T', 0};
constexpr std::array<std::uint8_t, 8> kTrailer{'S', 'M', 'F', 'E', 'N', 'D', 0, 0};

using Tag = std::array<char, 4>;

void put_section(ByteWriter& w, const char (&tag)[5], const std::vector<std::uint8_t>& payload) {
  w.put_bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(tag), 4));
  w.put<std::uint64_t>(payload.size());
  w.put_bytes(payload);
  w.put<std::uint64_t>(fnv1a64(payload));
}

std::vector<std::uint8_t> params_payload(const TransformerModel<float>& model) {
  ByteWriter w;
  const auto params = model.parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.put_string(p->id);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p->value.dtype()));
    w.put<std::uint8_t>(p->trainable ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.rank()));
    for (auto dim : p->value.shape()) w.put<std::uint64_t>(dim);
    w.put_array<float>(p->value.data());
  }
  return w.take();
}

void load_params(std::span<const std::uint8_t> payload, TransformerModel<float>& model) {
  ByteReader r(payload);
  std::map<std::string, Parameter<float>*> by_id;
  for (auto* p : model.parameters()) by_id[p->id] = p;
  const auto count = r.get<std::uint32_t>();
  if (count != by_id.size()) {
    throw ContractError("checkpoint holds " + std::to_string(count) + " parameters, model expects " +
                        std::to_string(by_id.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string id = r.get_string();
    const auto dtype = static_cast<DType>(r.get<std::uint8_t>());
    const bool trainable = r.get<std::uint8_t>() != 0;
    Shape shape(r.get<std::uint32_t>());
    for (auto& dim : shape) dim = r.get<std::uint64_t>();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ContractError("checkpoint parameter '" + id + "' is not part of the model");
    Parameter<float>& p = *it->second;
    if (dtype != DType::f32) throw ContractError("checkpoint parameter '" + id + "' is not f32");
    if (shape != p.value.shape()) {
      throw ShapeError("checkpoint parameter '" + id + "' has shape " + shape_string(shape) + ", model expects " +
                       shape_string(p.value.shape()));
    }
    r.get_array<float>(p.value.data());
    p.trainable = trainable;
  }
  if (!r.done()) throw ChecksumError("trailing bytes in parameter section");
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  const std::string conf = to_json(ckpt.config).dump();
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint32_t>(Checkpoint::kVersion);
  w.put<std::uint64_t>(fnv1a64(conf));
  w.put<std::uint32_t>(4);
  put_section(w, "CONF", std::vector<std::uint8_t>(conf.begin(), conf.end()));
  put_section(w, "PARM", params_payload(ckpt.model));
  put_section(w, "BGST", ckpt.store.serialize());
  ByteWriter rng;
  rng.put<std::uint64_t>(ckpt.rng.seed);
  rng.put<std::uint64_t>(ckpt.rng.stream);
  rng.put<std::uint64_t>(ckpt.rng.counter);
  put_section(w, "RNGS", rng.take());
  w.put_bytes(kTrailer);
  const std::uint64_t total = fnv1a64(w.bytes());
  w.put<std::uint64_t>(total);
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw ChecksumError("not a checkpoint file (bad magic)");
  }
  // Verify the whole-file checksum before interpreting anything else, so a
  // truncated or corrupted file never yields a partial load.
  const std::size_t tail = kTrailer.size() + sizeof(std::uint64_t);
  if (bytes.size() < kMagic.size() + tail) throw ChecksumError("checkpoint truncated");
  const auto body = bytes.first(bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
  if (std::memcmp(body.data() + body.size() - kTrailer.size(), kTrailer.data(), kTrailer.size()) != 0 ||
      fnv1a64(body) != stored) {
    throw ChecksumError("checkpoint checksum mismatch: file truncated or corrupt");
  }

  ByteReader r(body.first(body.size() - kTrailer.size()));
  r.get_bytes(kMagic.size());
  const auto version = r.get<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + ", expected " +
                       std::to_string(Checkpoint::kVersion));
  }
  const auto digest = r.get<std::uint64_t>();
  const auto n_sections = r.get<std::uint32_t>();
  std::map<std::string, std::span<const std::uint8_t>> sections;
  for (std::uint32_t i = 0; i < n_sections; ++i) {
    const auto tag = r.get_bytes(4);
    const auto len = r.get<std::uint64_t>();
    const auto payload = r.get_bytes(len);
    if (fnv1a64(payload) != r.get<std::uint64_t>()) {
      throw ChecksumError("checkpoint section '" + std::string(tag.begin(), tag.end()) + "' checksum mismatch");
    }
    sections[std::string(tag.begin(), tag.end())] = payload;
  }
  for (const char* need : {"CONF", "PARM", "BGST", "RNGS"}) {
    if (!sections.count(need)) throw ChecksumError(std::string("checkpoint is missing section ") + need);
  }

  const auto conf = sections["CONF"];
  if (fnv1a64(conf) != digest) throw ChecksumError("checkpoint config digest mismatch");
  Checkpoint ckpt;
  ckpt.config = config_from_json(Json::parse(conf.begin(), conf.end()));
  ckpt.model = init_model<float>(ckpt.config.model);
  load_params(sections["PARM"], ckpt.model);
  ckpt.store = BackgroundIndexStore::deserialize(sections["BGST"]);
  ByteReader rng(sections["RNGS"]);
  ckpt.rng.seed = rng.get<std::uint64_t>();
  ckpt.rng.stream = rng.get<std::uint64_t>();
  ckpt.rng.counter = rng.get<std::uint64_t>();
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file(path, serialize_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace smf
