#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "venation/errors.hpp"
#include "venation/model_config.hpp"
#include "venation/run_config.hpp"

namespace venation::nn {

namespace fs = std::filesystem;

// Name -> tensor; stored on disk as a pickled plain dict, the format
// produced by `torch.save({k: v for k, v in sd.items()}, path)`.
using StateDict = std::map<std::string, torch::Tensor>;

inline StateDict read_state_dict(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open weights file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  c10::IValue value;
  try {
    value = torch::pickle_load(bytes);
  } catch (const c10::Error&) {
    throw ConfigError("weights file " + path.string() + " is not a pickled tensor dict");
  }
  if (!value.isGenericDict()) {
    throw ConfigError("weights file " + path.string() + " does not hold a plain dict");
  }
  StateDict out;
  for (const auto& item : value.toGenericDict()) {
    if (item.key().isString() && item.value().isTensor()) {
      out.emplace(item.key().toStringRef(), item.value().toTensor());
    }
  }
  return out;
}

inline void write_state_dict(const fs::path& path, const StateDict& sd) {
  c10::Dict<std::string, at::Tensor> dict;
  for (const auto& [k, v] : sd) dict.insert(k, v.detach().cpu().contiguous());
  const auto bytes = torch::pickle_save(c10::IValue(dict));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed to write " + path.string());
}

inline StateDict state_dict(const torch::nn::Module& m) {
  StateDict sd;
  for (const auto& p : m.named_parameters()) sd.emplace(p.key(), p.value());
  for (const auto& b : m.named_buffers()) sd.emplace(b.key(), b.value());
  return sd;
}

// Copies every parameter and buffer of `m` from `sd`; keys in `sd` that the
// module lacks are ignored (e.g. a classifier top).
inline void load_state_dict(torch::nn::Module& m, const StateDict& sd,
                            const std::string& source) {
  torch::NoGradGuard guard;
  auto assign = [&](const std::string& name, torch::Tensor& dst) {
    const auto it = sd.find(name);
    if (it == sd.end()) {
      throw ConfigError(source + " lacks tensor '" + name + "'");
    }
    if (it->second.sizes() != dst.sizes()) {
      throw ConfigError(source + ": tensor '" + name + "' has shape " +
                        c10::str(it->second.sizes()) + ", expected " +
                        c10::str(dst.sizes()));
    }
    dst.copy_(it->second);
  };
  for (auto& p : m.named_parameters()) assign(p.key(), p.value());
  for (auto& b : m.named_buffers()) assign(b.key(), b.value());
}

}  // namespace venation::nn
