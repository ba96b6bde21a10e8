#pragma once

// Weight archive ("LICW") and the model bundle it carries.
//
// Layout, little-endian:
//   magic "LICW" | version u32 | meta_len u32 | meta JSON (meta_len bytes) | blob
// The JSON holds "model_id", "config", and "tensors": name -> {dtype: "f32",
// shape: [...], offset: byte offset into blob}. Tensor data is f32.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adapter.hpp"
#include "codec.hpp"

namespace latentsearch::weights {

inline constexpr uint32_t kArchiveVersion = 1;

struct ModelConfig {
  int n_ch = 64;
  int m_ch = 96;
  int hz_ch = 64;
  int embed_dim = 512;
  int adapter_ch = 96;
  int fusion_hidden = 512;
  int z_min = -64;
  int z_max = 64;
  uint8_t model_id = 1;

  void validate() const;
};

struct ModelWeights {
  ModelConfig config;
  codec::CodecWeights codec;
  codec::EntropyPriors priors;
  adapter::AdapterWeights adapter;
};

struct ArchiveTensor {
  std::vector<int64_t> shape;
  std::vector<float> data;
};

struct WeightArchive {
  ModelConfig config;
  std::map<std::string, ArchiveTensor> tensors;

  std::vector<uint8_t> serialize() const;
  static WeightArchive parse(std::span<const uint8_t> bytes);

  void save(const std::filesystem::path& path) const;
  static WeightArchive load(const std::filesystem::path& path);
};

std::vector<std::string> canonical_tensor_names();

/// Throws kInvalidArgument naming every absent canonical tensor.
ModelWeights from_archive(const WeightArchive& archive);
WeightArchive to_archive(const ModelWeights& weights);

/// Seeded random initialization; identical (config, seed) gives identical floats
/// on every platform.
ModelWeights generate_random(const ModelConfig& config, uint64_t seed);

/// Hand-set codec: the first three latent channels carry centred, scaled 16x16
/// block means, the hyperprior predicts each latent from its 4x4 neighbourhood
/// average, and synthesis replicates the block means. Adapter weights are
/// seeded random.
ModelWeights generate_block_mean(const ModelConfig& config, uint64_t seed);

}  // namespace latentsearch::weights
