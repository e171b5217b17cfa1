#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "c3/augment.hpp"
#include "c3/metrics.hpp"
#include "c3/model.hpp"
#include "c3/numerics.hpp"

namespace c3 {

/// Features plus optional ground truth. Training entry points take the
/// feature matrix only; labels reach the trainer solely through an Evaluator.
struct Dataset {
  Matrix x;
  std::optional<Partition> truth;
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;  // original label spellings, by id

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
};

struct BlobSpec {
  std::uint64_t seed = 0;
  int n = 1000;
  int d = 16;
  int clusters = 4;
  double separation = 6.0;
  double sigma = 1.0;
};

/// Balanced isotropic Gaussian clusters whose centers are pairwise at least
/// separation * sigma apart, shuffled, then standardized per feature.
Dataset generate_blobs(const BlobSpec& spec);

/// Zero mean, unit (population) variance per column. Constant columns are
/// only centered.
void standardize_features(Matrix& x);

/// Reads a CSV with a header row. Every column except `label_column` must
/// be numeric. Labels are encoded 0.. in order of first appearance.
Dataset load_csv(const std::filesystem::path& path,
                 const std::optional<std::string>& label_column = std::nullopt);

/// Column names from the header row.
std::vector<std::string> read_csv_header(const std::filesystem::path& path);

/// Writes shortest round-trip decimal representations, so load_csv(save_csv(d))
/// reproduces the features bit for bit.
void save_csv(const Dataset& dataset, const std::filesystem::path& path,
              const std::string& label_column = "label");

struct TrainConfig {
  int clusters = 10;
  double zeta = 0.6;
  double gamma = 0.1;
  double tau_instance = 0.5;
  double tau_cluster = 1.0;
  int init_epochs = 100;
  int c3_epochs = 20;
  double init_lr = 3e-4;
  double c3_lr = 1e-5;
  int batch_size = 128;
  std::uint64_t seed = 0;
  ModelDims dims;  // input and clusters are filled from the data and `clusters`
  AugmentConfig augment;
  std::string label_column = "label";
  bool standardize = true;

  void validate() const;
};

/// Parses a JSON config; absent fields keep their defaults, unknown fields
/// are rejected. An empty file yields the defaults.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const TrainConfig& config);

}  // namespace c3
