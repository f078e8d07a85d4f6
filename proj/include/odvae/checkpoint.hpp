// Versioned binary container for model parameters and training state.
//
// Layout (little-endian): "ODVAE", u32 version, u64 config length, config
// text, u64 record count, then per record: u32 name length, name, u32 rank,
// u64 extents, row-major f64 values.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "odvae/tensor.hpp"

namespace odvae {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::string config;
  std::vector<std::pair<std::string, Tensor>> records;

  void put(const std::string& name, Tensor value);
  bool has(const std::string& name) const;
  // Throws CheckpointError when the record is missing.
  const Tensor& get(const std::string& name) const;
};

std::vector<char> serialize(const Checkpoint& c);
Checkpoint deserialize(const std::vector<char>& bytes);

// Writes to a temporary file and renames it over `path`.
void write_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace odvae
