#pragma once

// Binary key-value store of named tensors.
//
// Layout (little-endian):
//   8 bytes  magic "WVICKPT\0"
//   u32      format version (1)
//   u32      entry count
//   entries, sorted by name:
//     u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values[prod(dims)]

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "wvi/adam.hpp"
#include "wvi/models.hpp"
#include "wvi/tensor.hpp"

namespace wvi {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class Checkpoint {
 public:
  void put(const std::string& name, const Tensor& value);
  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  const Tensor& get(const std::string& name) const;
  const std::map<std::string, Tensor>& entries() const { return entries_; }

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  std::map<std::string, Tensor> entries_;
};

// Architecture metadata plus every parameter under its ModelPair name.
void store_models(Checkpoint& ckpt, const ModelPair& models);
ModelPair restore_models(const Checkpoint& ckpt);

void store_optimizer(Checkpoint& ckpt, const ModelPair& models, const AdamState& state);
AdamState restore_optimizer(const Checkpoint& ckpt, const ModelPair& models);

}  // namespace wvi
