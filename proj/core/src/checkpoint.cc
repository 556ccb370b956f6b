// Copyright 2026 The narp Authors.
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

#include "narp/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

namespace narp {
namespace {

constexpr char kMagic[4] = {'N', 'A', 'R', 'P'};

template <typename T>
void PutLe(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T GetLe(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw std::runtime_error("checkpoint truncated");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void WriteCheckpoint(std::ostream& out, const ParameterStore& params) {
  out.write(kMagic, 4);
  PutLe<uint32_t>(out, kCheckpointVersion);
  PutLe<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (const Parameter* p : params.all()) {
    if (p->name.size() > UINT16_MAX) throw std::length_error("parameter name too long");
    PutLe<uint16_t>(out, static_cast<uint16_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    PutLe<uint8_t>(out, static_cast<uint8_t>(p->value.rank()));
    for (int d : p->value.shape()) PutLe<uint32_t>(out, static_cast<uint32_t>(d));
    for (float v : p->value.values()) PutLe<float>(out, v);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint");
}

void SaveCheckpoint(const std::filesystem::path& path, const ParameterStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  WriteCheckpoint(out, params);
}

void ReadCheckpoint(std::istream& in, ParameterStore& params) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a NARP checkpoint");
  }
  const uint32_t version = GetLe<uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t count = GetLe<uint32_t>(in);
  std::set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = GetLe<uint16_t>(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw std::runtime_error("checkpoint truncated");
    const uint8_t rank = GetLe<uint8_t>(in);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(GetLe<uint32_t>(in));
    Parameter* p = params.Find(name);
    if (p == nullptr) throw std::runtime_error("unexpected parameter in checkpoint: " + name);
    if (p->value.shape() != shape) {
      throw std::runtime_error("shape mismatch for " + name + ": model " +
                               p->value.ShapeString());
    }
    for (float& v : p->value.values()) v = GetLe<float>(in);
    seen.insert(name);
  }
  if (seen.size() != params.size()) {
    throw std::runtime_error("checkpoint is missing " +
                             std::to_string(params.size() - seen.size()) + " parameters");
  }
}

void LoadCheckpoint(const std::filesystem::path& path, ParameterStore& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ReadCheckpoint(in, params);
}

}  // namespace narp
