#pragma once

// Benchmark datasets: manifest-driven CSV loading, normalization into the unit
// ball, and synthetic streams realizable by one dictionary kernel.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfgmkl/baselines.hpp"
#include "sfgmkl/kernel_dict.hpp"

namespace sfgmkl {

struct Normalization {
  std::vector<double> feature_min;
  std::vector<double> feature_max;
  double row_scale = 1.0;  // 1 / sqrt(d)
  double target_min = 0.0;
  double target_max = 1.0;

  double denormalize_target(double y) const;
};

struct Dataset {
  std::string name;
  std::size_t dim = 0;
  std::vector<double> features;  // row-major, size() x dim
  std::vector<double> targets;
  std::string provenance;
  std::optional<Normalization> normalization;

  std::size_t size() const noexcept { return targets.size(); }
  StreamView view() const { return {features, targets, dim}; }
};

/// One manifest record: where a dataset lives and what shape it must have.
struct DatasetEntry {
  std::string name;
  std::filesystem::path file;  // relative paths resolve against the manifest's directory
  std::string delimiter = ",";  // single character, or "whitespace"
  bool header = false;
  std::size_t target_column = 0;               // 0-based, in the raw file
  std::vector<std::size_t> drop_columns;       // raw columns that are neither feature nor target
  std::size_t expected_rows = 0;
  std::size_t expected_features = 0;
  std::string sha256;  // lowercase hex; empty skips the check
  std::string source_url;
};

using DatasetManifest = std::map<std::string, DatasetEntry>;

/// JSON manifest: {"datasets": [{"name": ..., "file": ..., ...}, ...]}.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Parses the file named by the entry, enforcing the declared schema. Fails
/// on row or column count mismatch, non-numeric cells, or checksum mismatch;
/// never returns a partial dataset.
Dataset load_dataset(const DatasetEntry& entry);
Dataset load_dataset(const std::string& name, const std::filesystem::path& manifest_path);

/// Per-feature min-max to [0, 1] (constant columns become 0), rows scaled by
/// 1/sqrt(d) so |x| <= 1, targets min-max to [0, 1].
Dataset normalize(const Dataset& raw);

struct StreamConfig {
  std::optional<std::uint64_t> shuffle_seed;
  std::optional<std::size_t> horizon;
};

/// Optional seeded shuffle, then truncation to the horizon.
Dataset apply_stream_config(const Dataset& data, const StreamConfig& config);

struct SyntheticSpec {
  std::size_t kernel_index = 21;  // 1-based dictionary entry generating the targets
  double noise_std = 0.0;
  std::size_t input_dim = 5;
  std::size_t num_rf = 50;
  std::size_t anchors = 8;
};

struct SyntheticStream {
  Dataset data;
  std::vector<double> theta0;
  std::size_t clipped_targets = 0;
};

/// x_t uniform in the unit ball; y_t = clip(theta0.z_k(x_t) + noise, [0, 1]).
/// z_k is kernel k's map from sample_dictionary(dict, num_rf, input_dim, seed),
/// so learners sharing that seed can represent the noiseless target exactly.
/// theta0 = sum_m c_m z_k(a_m) for random anchors a_m and weights c_m >= 0 with
/// sum 0.9, a positive bump mixture.
SyntheticStream synthetic_stream(const SyntheticSpec& spec, const KernelDictionary& dict,
                                 std::uint64_t seed, std::size_t horizon);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
/// SHA-256 over the in-memory dataset (dimensions, features, targets).
std::string content_hash(const Dataset& data);

}  // namespace sfgmkl
