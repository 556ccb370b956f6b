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

#ifndef NARP_CHECKPOINT_H_
#define NARP_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "narp/autodiff.h"

namespace narp {

// Binary parameter container:
//   "NARP" | version u32 | count u32 |
//   per parameter: name_len u16 | name | rank u8 | dims u32[rank] | f32[]
// All integers and floats little-endian.
inline constexpr uint32_t kCheckpointVersion = 1;

void WriteCheckpoint(std::ostream& out, const ParameterStore& params);
void SaveCheckpoint(const std::filesystem::path& path, const ParameterStore& params);

// Loads values into an existing store. Every stored parameter must exist in
// `params` with an identical shape, and every parameter in `params` must be
// present in the file.
void ReadCheckpoint(std::istream& in, ParameterStore& params);
void LoadCheckpoint(const std::filesystem::path& path, ParameterStore& params);

}  // namespace narp

#endif  // NARP_CHECKPOINT_H_
