#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bregdistill/distiller.hpp"

namespace bregdistill {

struct DivergenceSpec {
  std::string name;
  std::optional<double> lambda;

  std::string label() const;
};

// "KL", "SBA:5", "SBA:-0.5"
DivergenceSpec parse_divergence_spec(const std::string& text);

struct ExperimentConfig {
  DistillConfig distill;
  std::filesystem::path output_dir = "runs/default";
  std::vector<DivergenceSpec> sweep_divergences{{"KL", std::nullopt}, {"SBA", 3.0}, {"SBA", 5.0}};
  std::vector<std::uint64_t> sweep_seeds{0, 1, 2};
  std::size_t eval_samples = 10000;
};

// Flat "key = value" lines; '#' starts a comment. Later lines win.
using RawConfig = std::map<std::string, std::string>;

RawConfig parse_raw_config(const std::string& text, const std::string& origin = "config");
// "key=value"
std::pair<std::string, std::string> parse_override(const std::string& text);

// Builds and validates a configuration; unknown keys are rejected.
ExperimentConfig build_config(const RawConfig& raw);
ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides = {});

// Every key with its resolved value, sorted by key.
std::string canonical_config(const ExperimentConfig& cfg);
std::uint64_t fnv1a64(const std::string& text);
// 16 lowercase hex digits of fnv1a64(canonical_config(cfg)).
std::string config_hash(const ExperimentConfig& cfg);

std::vector<std::string> known_config_keys();

}  // namespace bregdistill
