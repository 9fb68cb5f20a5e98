/* Copyright 2026 The ALA-Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#include "alanet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alanet/config_io.hpp"
#include "alanet/error.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian hosts");

namespace alanet {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'A', 'L', 'A', 'N', 'E', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

struct Entry {
  std::string name;
  Tensor* tensor;
};

// Every tensor of the checkpoint in file order.
std::vector<Entry> collect(ALANet& model, Adam* optimizer) {
  std::vector<Entry> out;
  for (const NamedParameter& p : model.parameters()) {
    out.push_back({p.name, &p.var.node()->value});
  }
  for (auto& [name, state] : model.buffers()) {
    out.push_back({name + ".running_mean", &state->running_mean});
    out.push_back({name + ".running_var", &state->running_var});
  }
  if (optimizer) {
    auto& m = optimizer->first_moments();
    auto& v = optimizer->second_moments();
    for (std::size_t i = 0; i < m.size(); ++i) out.push_back({"adam.m." + std::to_string(i), &m[i]});
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back({"adam.v." + std::to_string(i), &v[i]});
  }
  return out;
}

struct RawFile {
  json header;
  std::vector<double> payload;
};

RawFile read_raw(const std::filesystem::path& path, bool with_payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError(path.string() + ": not a checkpoint");
  if (version != kVersion) throw IoError(path.string() + ": unsupported checkpoint version");
  if (header_len > (1u << 30)) throw IoError(path.string() + ": corrupt header");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError(path.string() + ": truncated header");
  RawFile raw;
  try {
    raw.header = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": bad header: " + e.what());
  }
  if (with_payload) {
    const std::uint64_t count = raw.header.at("payload_doubles").get<std::uint64_t>();
    raw.payload.resize(count);
    in.read(reinterpret_cast<char*>(raw.payload.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw IoError(path.string() + ": truncated payload");
  }
  return raw;
}

CheckpointInfo info_from(const json& h) {
  CheckpointInfo info;
  try {
    info.net = h.at("network").get<ALANetConfig>();
    info.train = h.at("training").get<TrainConfig>();
    info.iteration = h.at("iteration").get<int>();
    info.optimizer_steps = h.at("optimizer_steps").get<int>();
    info.has_optimizer = h.at("has_optimizer").get<bool>();
  } catch (const json::exception& e) {
    throw IoError(std::string("bad checkpoint header: ") + e.what());
  }
  return info;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, ALANet& model, const TrainConfig& train,
                     int iteration, const Adam* optimizer) {
  std::vector<Entry> entries = collect(model, const_cast<Adam*>(optimizer));
  json header;
  header["network"] = model.config();
  header["training"] = train;
  header["iteration"] = iteration;
  header["optimizer_steps"] = optimizer ? optimizer->steps() : 0;
  header["has_optimizer"] = optimizer != nullptr;
  json dir = json::array();
  std::uint64_t total = 0;
  for (const Entry& e : entries) {
    dir.push_back({{"name", e.name}, {"shape", e.tensor->shape()}});
    total += e.tensor->numel();
  }
  header["tensors"] = dir;
  header["payload_doubles"] = total;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    const std::uint64_t len = text.size();
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(len));
    for (const Entry& e : entries) {
      out.write(reinterpret_cast<const char*>(e.tensor->data()),
                static_cast<std::streamsize>(e.tensor->numel() * sizeof(double)));
    }
    if (!out) throw IoError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  return info_from(read_raw(path, false).header);
}

CheckpointInfo load_checkpoint(const std::filesystem::path& path, ALANet& model, Adam* optimizer) {
  RawFile raw = read_raw(path, true);
  CheckpointInfo info = info_from(raw.header);
  if (!(info.net == model.config())) {
    throw ConfigError(path.string() + ": checkpoint network config differs from the model config");
  }
  if (optimizer && !info.has_optimizer) {
    throw ConfigError(path.string() + ": checkpoint has no optimizer state");
  }
  std::vector<Entry> entries = collect(model, info.has_optimizer ? optimizer : nullptr);
  const json& dir = raw.header.at("tensors");
  // Optimizer moments are optional on load; the directory may be longer.
  std::size_t offset = 0;
  std::size_t di = 0;
  for (const Entry& e : entries) {
    if (di >= dir.size()) throw IoError(path.string() + ": tensor directory too short");
    const json& d = dir[di++];
    if (d.at("name").get<std::string>() != e.name || d.at("shape").get<Shape>() != e.tensor->shape()) {
      throw ConfigError(path.string() + ": tensor '" + e.name + "' does not match the model");
    }
    const std::size_t n = e.tensor->numel();
    std::copy(raw.payload.begin() + offset, raw.payload.begin() + offset + n, e.tensor->data());
    offset += n;
  }
  if (optimizer) optimizer->set_steps(info.optimizer_steps);
  return info;
}

ALANet load_model(const std::filesystem::path& path) {
  CheckpointInfo info = read_checkpoint_info(path);
  ALANet model(info.net);
  load_checkpoint(path, model);
  return model;
}

}  // namespace alanet
