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

#include "attnvad/checkpoint.h"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

namespace attnvad {

namespace {

constexpr const char* kMagic = "AVADCKPT";
constexpr int kVersion = 1;

// Tensors in serialization order: learnables, then buffers.
std::vector<std::pair<std::string, Tensor*>> tensor_directory(VadModel& m) {
  std::vector<std::pair<std::string, Tensor*>> dir;
  auto collect = [&dir](const std::string& name, Tensor& t) {
    dir.emplace_back(name, &t);
  };
  visit_learnables(m, collect);
  visit_buffers(m, collect);
  return dir;
}

}  // namespace

void save_checkpoint(const std::string& path, VadModel& model) {
  require_little_endian();
  auto dir = tensor_directory(model);
  std::ostringstream head;
  head << kMagic << " " << kVersion << "\n";
  head << "input_dim " << model.config.input_dim << "\n";
  head << "hidden_dim " << model.config.hidden_dim << "\n";
  head << "num_layers " << model.config.num_layers << "\n";
  head << "attention " << to_string(model.config.attention) << "\n";
  head << "t_train " << model.config.t_train << "\n";
  head << "tensors " << dir.size() << "\n";
  for (const auto& [name, t] : dir) {
    head << name << " " << t->ndim();
    for (int64_t d : t->shape()) head << " " << d;
    head << "\n";
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint: " + path);
  std::string header = head.str();
  f.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, t] : dir) {
    f.write(reinterpret_cast<const char*>(t->data()),
            static_cast<std::streamsize>(t->numel() * sizeof(double)));
  }
  if (!f) throw DataError("failed writing checkpoint: " + path);
}

VadModel load_checkpoint(const std::string& path) {
  require_little_endian();
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);

  auto next_line = [&f, &path]() {
    std::string line;
    if (!std::getline(f, line)) {
      throw DataError("checkpoint header truncated: " + path);
    }
    return line;
  };
  auto header_field = [&next_line, &path](const std::string& key) {
    std::istringstream ls(next_line());
    std::string k, v;
    if (!(ls >> k >> v) || k != key) {
      throw DataError("checkpoint header missing '" + key + "': " + path);
    }
    return v;
  };

  {
    std::istringstream ls(next_line());
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != kMagic ||
        version != kVersion) {
      throw DataError("not a version-" + std::to_string(kVersion) +
                      " checkpoint: " + path);
    }
  }
  ModelConfig cfg;
  cfg.input_dim = std::stoi(header_field("input_dim"));
  cfg.hidden_dim = std::stoi(header_field("hidden_dim"));
  cfg.num_layers = std::stoi(header_field("num_layers"));
  cfg.attention = parse_attention_kind(header_field("attention"));
  cfg.t_train = std::stoi(header_field("t_train"));
  size_t n_tensors = std::stoul(header_field("tensors"));

  struct Entry {
    std::string name;
    std::vector<int64_t> shape;
  };
  std::vector<Entry> entries;
  entries.reserve(n_tensors);
  for (size_t i = 0; i < n_tensors; ++i) {
    std::istringstream ls(next_line());
    Entry e;
    int ndim = 0;
    if (!(ls >> e.name >> ndim) || ndim <= 0) {
      throw DataError("bad tensor directory line in checkpoint: " + path);
    }
    e.shape.resize(ndim);
    for (int d = 0; d < ndim; ++d) {
      if (!(ls >> e.shape[d])) {
        throw DataError("bad tensor shape in checkpoint: " + path);
      }
    }
    entries.push_back(std::move(e));
  }

  Rng rng(0);  // values are overwritten below
  VadModel model = make_model(cfg, rng);
  auto dir = tensor_directory(model);
  std::map<std::string, Tensor*> by_name(dir.begin(), dir.end());
  if (entries.size() != by_name.size()) {
    throw DataError("checkpoint lists " + std::to_string(entries.size()) +
                    " tensors, model expects " +
                    std::to_string(by_name.size()) + ": " + path);
  }
  std::set<std::string> filled;
  for (const Entry& e : entries) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) {
      throw DataError("checkpoint tensor '" + e.name +
                      "' is not part of the model: " + path);
    }
    if (!filled.insert(e.name).second) {
      throw DataError("checkpoint lists tensor '" + e.name + "' twice: " +
                      path);
    }
    Tensor* dst = it->second;
    if (dst->shape() != e.shape) {
      throw DataError("checkpoint tensor '" + e.name +
                      "' has the wrong shape in " + path);
    }
    Tensor fresh(e.shape);
    f.read(reinterpret_cast<char*>(fresh.mutable_data()),
           static_cast<std::streamsize>(fresh.numel() * sizeof(double)));
    if (f.gcount() !=
        static_cast<std::streamsize>(fresh.numel() * sizeof(double))) {
      throw DataError("checkpoint payload truncated at tensor '" + e.name +
                      "': " + path);
    }
    *dst = std::move(fresh);
  }
  return model;
}

}  // namespace attnvad
