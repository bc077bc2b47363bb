#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bregdistill/dense_net.hpp"

namespace bregdistill {

struct CheckpointMetadata {
  std::string role;  // "generator", "score_net", "ratio_classifier", ...
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::string config_hash;
};

struct Checkpoint {
  DenseNet net;
  CheckpointMetadata metadata;
};

// JSON text with widths, activation, per-layer row-major weights and biases
// (shortest round-trip decimal representation) and a metadata block.
std::string serialize_checkpoint(const DenseNet& net, const CheckpointMetadata& meta);
Checkpoint parse_checkpoint(const std::string& text);

void write_checkpoint(const std::filesystem::path& path, const DenseNet& net,
                      const CheckpointMetadata& meta);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace bregdistill
