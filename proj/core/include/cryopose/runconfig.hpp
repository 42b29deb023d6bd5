#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "cryopose/phantom.hpp"
#include "cryopose/dataset.hpp"
#include "cryopose/training.hpp"

namespace cryopose {

/// Configuration for `simulate`: phantom + dataset + optics under one seed.
struct SimRunConfig {
  std::uint64_t seed = 0;
  PhantomSpec phantom;
  DatasetConfig dataset;  // dataset.seed mirrors the top-level seed
  OpticsConfig optics;    // optics.pixel_size mirrors the phantom pixel size

  void validate() const;
};

/// Configuration for `train`.
struct TrainRunConfig {
  std::uint64_t seed = 0;
  TrainConfig train;  // train.seed mirrors the top-level seed

  void validate() const;
};

// JSON parsing with a strict schema: unknown keys are rejected, missing keys
// fall back to documented defaults.
SimRunConfig parse_sim_config(const std::string& json_text);
SimRunConfig parse_sim_config_file(const std::string& path);
TrainRunConfig parse_train_config(const std::string& json_text);
TrainRunConfig parse_train_config_file(const std::string& path);

/// Canonical (key-sorted, indented) serializations; the round trip
/// parse(serialize(c)) is exact.
std::string sim_config_json(const SimRunConfig& cfg);
std::string train_config_json(const TrainRunConfig& cfg);

/// FNV-1a 64-bit hash used to fingerprint canonical configs in manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace cryopose
