#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdgan/tensor.hpp"
#include "cdgan/training.hpp"

namespace cdgan {

// Binary checkpoint format, little-endian throughout:
//   magic   "CDGAN\0" + 1 version byte (0x01)
//   u32     tensor count
//   per tensor: u16 name length, UTF-8 name, u8 rank, rank x u32 dims,
//               raw float32 values (row-major)
//   u32     metadata length, then that many bytes of "key=value\n" lines
struct CheckpointMeta {
  std::vector<std::pair<std::string, std::string>> kv;

  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;

  void set_int(const std::string& key, std::int64_t v) { set(key, std::to_string(v)); }
  void set_float(const std::string& key, double v);
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_float(const std::string& key, double fallback) const;
};

struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  CheckpointMeta meta;

  const Tensor* find(const std::string& name) const;
};

// Writes to a temporary file and renames, so an interrupted save never
// clobbers an existing checkpoint.
void checkpoint_save(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors,
                     const CheckpointMeta& meta);

// Validates magic, version, and the per-tensor shape table as it reads;
// errors name the offending tensor. Never returns partial state.
Checkpoint checkpoint_load(const std::filesystem::path& path);

// Full trainer state: generator, discriminator, Adam moments, counters.
void save_trainer_checkpoint(const std::filesystem::path& path, const TrainerState& state,
                             const TrainConfig& cfg);
TrainerState load_trainer_checkpoint(const std::filesystem::path& path);

// Generator weights only (enough for infer/eval; training checkpoints
// qualify since they are a superset).
GeneratorParams load_generator_checkpoint(const std::filesystem::path& path);

}  // namespace cdgan
