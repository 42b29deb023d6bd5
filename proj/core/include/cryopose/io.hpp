#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cryopose/csv.hpp"
#include "cryopose/metrics.hpp"
#include "cryopose/mrc.hpp"
#include "cryopose/runconfig.hpp"

namespace cryopose {

inline constexpr const char* kToolVersion = "0.1.0";

/// Write-temp-then-rename; partial files never become visible.
void atomic_write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);
bool path_exists(const std::string& path);

// Dataset directory layout (produced by `simulate`, consumed by `train`):
//   images.mrc        particle stack, MRC2014 mode 2
//   metadata.csv      index,q1,q2,q3,q4,t1,t2,d1_um,d2_um,alpha_rad,sigma,snr_db
//   ground_truth.mrc  the phantom volume
//   config.json       canonical config echo
//   manifest.json     tool, version, seed, config hash
void write_dataset_dir(const std::string& dir, const ParticleStack& stack,
                       const Volume& ground_truth, const SimRunConfig& cfg, bool force);

struct LoadedDataset {
  ParticleStack stack;
  std::optional<Volume> ground_truth;
  OpticsConfig optics;
};

/// Read a dataset directory (or any external MRC stack + metadata CSV laid
/// out the same way). Optics come from config.json when present, defaults
/// otherwise.
LoadedDataset read_dataset_dir(const std::string& dir);

void write_metadata_csv(const std::string& path, const ParticleStack& stack);
std::vector<ParticleMeta> read_metadata_csv(const std::string& path,
                                            std::int64_t expected_count);

// Encoder checkpoint: 8-byte magic, u32 version, u64 manifest length, JSON
// manifest (config + tensor names/shapes), then raw little-endian float64
// payloads in manifest order.
void write_encoder_weights(const std::string& path, const EncoderWeights& weights,
                           const EncoderConfig& cfg);
std::pair<EncoderWeights, EncoderConfig> read_encoder_weights(const std::string& path);

// Pose tables. Written header: index,q1,q2,q3,q4. Reading also accepts a
// dataset metadata.csv (any table carrying q1..q4 columns).
void write_poses_csv(const std::string& path, const std::vector<so3::Quaternion>& poses);
std::vector<so3::Quaternion> read_poses_csv(const std::string& path);

// Metrics and FSC tables with their documented headers.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
void write_fsc_csv(const std::string& path, const FscCurve& curve);

/// manifest.json: tool name, version, seed, FNV-1a hash of the canonical
/// config — enough to reproduce the run byte for byte. Deterministic (no
/// timestamps).
void write_manifest(const std::string& path, const std::string& tool,
                    std::uint64_t seed, const std::string& canonical_config);

}  // namespace cryopose
