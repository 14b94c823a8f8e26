// Copyright 2026 The attnvad Authors
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

#include <string>

#include "attnvad/model.h"

namespace attnvad {

// Model serialization: a text header carrying the configuration and the
// tensor directory (name + shape per line), followed by every tensor's raw
// row-major little-endian doubles in directory order. Learnables come
// first, then buffers, both in visitation order. Round-trips are bit-exact.
void save_checkpoint(const std::string& path, VadModel& model);

// Rebuilds the model from the stored config, then fills every tensor by
// name. Unknown, missing, or misshaped tensors raise DataError.
VadModel load_checkpoint(const std::string& path);

}  // namespace attnvad
