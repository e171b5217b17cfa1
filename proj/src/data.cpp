#include "c3/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "c3/format.hpp"
#include "c3/rng.hpp"
#include "json.hpp"

namespace c3 {

// ---------------------------------------------------------------------------
// Synthetic blobs

void standardize_features(Matrix& x) {
  if (x.rows() == 0) return;
  const RowVector mean = x.colwise().mean();
  x.rowwise() -= mean;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(x.rows()));
    if (sd > 0.0) x.col(j) /= sd;
  }
}

Dataset generate_blobs(const BlobSpec& spec) {
  if (spec.clusters < 2) throw ConfigError("clusters", "must be >= 2");
  if (spec.n < spec.clusters) throw ConfigError("n", "must be >= clusters");
  if (spec.d < 2) throw ConfigError("d", "must be >= 2");
  if (!(spec.separation > 0.0)) throw ConfigError("separation", "must be positive");
  if (!(spec.sigma > 0.0)) throw ConfigError("sigma", "must be positive");

  const int m = spec.clusters;
  const int d = spec.d;
  const double min_dist = spec.separation * spec.sigma;
  // Two draws from N(0, r^2 I_d) lie about r * sqrt(2d) apart, so this radius
  // puts typical center gaps near the minimum. A center that keeps landing
  // too close widens the radius for its next tries.
  double radius = min_dist / std::sqrt(2.0 * d);

  std::mt19937_64 center_rng(derive_seed(spec.seed, StreamId::kCenters));
  std::normal_distribution<double> unit(0.0, 1.0);
  Matrix centers(m, d);
  constexpr int kMaxTries = 10000;
  constexpr int kTriesPerRadius = 200;
  for (int k = 0; k < m; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxTries && !placed; ++attempt) {
      if (attempt > 0 && attempt % kTriesPerRadius == 0) radius *= 1.02;
      for (int j = 0; j < d; ++j) centers(k, j) = radius * unit(center_rng);
      placed = true;
      for (int prev = 0; prev < k && placed; ++prev)
        placed = (centers.row(k) - centers.row(prev)).norm() >= min_dist;
    }
    if (!placed)
      throw Error("generate_blobs: could not place center " + std::to_string(k) + " after " +
                  std::to_string(kMaxTries) + " tries");
  }

  std::vector<int> labels(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) labels[static_cast<std::size_t>(i)] = i % m;
  std::mt19937_64 data_rng(derive_seed(spec.seed, StreamId::kData));
  std::shuffle(labels.begin(), labels.end(), data_rng);

  Dataset ds;
  ds.x.resize(spec.n, d);
  std::normal_distribution<double> noise(0.0, spec.sigma);
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < d; ++j)
      ds.x(i, j) = centers(labels[static_cast<std::size_t>(i)], j) + noise(data_rng);
  standardize_features(ds.x);
  ds.truth = Partition(std::move(labels), m);
  for (int j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  for (int k = 0; k < m; ++k) ds.label_names.push_back(std::to_string(k));
  return ds;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  if (quoted) throw ParseError(line_no, cells.size() + 1, "unterminated quoted field");
  cells.push_back(std::move(cell));
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::optional<std::string>& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());

  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (!trim(line).empty()) return true;
    }
    return false;
  };

  if (!next_line()) throw ParseError(1, 1, "missing header row");
  std::vector<std::string> header = split_csv_line(line, line_no);
  for (auto& h : header) h = trim(h);

  std::optional<std::size_t> label_idx;
  if (label_column) {
    const auto it = std::find(header.begin(), header.end(), *label_column);
    if (it == header.end())
      throw ParseError(line_no, 1, "label column '" + *label_column + "' not found in header");
    label_idx = static_cast<std::size_t>(it - header.begin());
  }

  Dataset ds;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (j != label_idx) ds.feature_names.push_back(header[j]);
  const std::size_t d = ds.feature_names.size();
  if (d == 0) throw ParseError(line_no, 1, "no feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  std::map<std::string, int> label_ids;
  std::size_t rows = 0;
  while (next_line()) {
    const auto cells = split_csv_line(line, line_no);
    if (cells.size() != header.size())
      throw ParseError(line_no, std::min(cells.size(), header.size()) + 1,
                       "expected " + std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string cell = trim(cells[j]);
      if (j == label_idx) {
        auto [it, inserted] = label_ids.try_emplace(cell, static_cast<int>(label_ids.size()));
        if (inserted) ds.label_names.push_back(cell);
        labels.push_back(it->second);
        continue;
      }
      double v = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto res = std::from_chars(first, last, v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
        throw ParseError(line_no, j + 1, "non-numeric cell '" + cell + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(line_no, 1, "dataset has no rows");

  ds.x = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(d));
  if (label_idx) ds.truth = Partition(std::move(labels), static_cast<int>(label_ids.size()));
  return ds;
}

std::vector<std::string> read_csv_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, 1, "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  auto cells = split_csv_line(line, 1);
  for (auto& c : cells) c = trim(c);
  return cells;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path,
              const std::string& label_column) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  const auto d = static_cast<std::size_t>(dataset.x.cols());
  for (std::size_t j = 0; j < d; ++j) {
    if (j) out << ',';
    out << quote_if_needed(j < dataset.feature_names.size() ? dataset.feature_names[j]
                                                             : "x" + std::to_string(j));
  }
  if (dataset.truth) out << ',' << quote_if_needed(label_column);
  out << '\n';
  for (Eigen::Index i = 0; i < dataset.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < dataset.x.cols(); ++j) {
      if (j) out << ',';
      out << format_number(dataset.x(i, j));
    }
    if (dataset.truth) {
      const int id = dataset.truth->labels[static_cast<std::size_t>(i)];
      out << ','
          << quote_if_needed(static_cast<std::size_t>(id) < dataset.label_names.size()
                                 ? dataset.label_names[static_cast<std::size_t>(id)]
                                 : std::to_string(id));
    }
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (clusters < 2) throw ConfigError("clusters", "must be >= 2");
  if (!(zeta >= -1.0 && zeta <= 1.0)) throw ConfigError("zeta", "must lie in [-1, 1]");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma", "must be positive");
  if (!(tau_instance > 0.0)) throw ConfigError("tau_instance", "must be positive");
  if (!(tau_cluster > 0.0)) throw ConfigError("tau_cluster", "must be positive");
  if (init_epochs < 0) throw ConfigError("init_epochs", "must be >= 0");
  if (c3_epochs < 0) throw ConfigError("c3_epochs", "must be >= 0");
  if (!(init_lr > 0.0)) throw ConfigError("init_lr", "must be positive");
  if (!(c3_lr > 0.0)) throw ConfigError("c3_lr", "must be positive");
  if (batch_size < 2) throw ConfigError("batch_size", "must be >= 2");
  if (dims.z_dim <= 0) throw ConfigError("model.z_dim", "must be positive");
  for (int w : dims.encoder_hidden)
    if (w <= 0) throw ConfigError("model.encoder_hidden", "widths must be positive");
  for (int w : dims.instance_hidden)
    if (w <= 0) throw ConfigError("model.instance_hidden", "widths must be positive");
  for (int w : dims.cluster_hidden)
    if (w <= 0) throw ConfigError("model.cluster_hidden", "widths must be positive");
  augment.validate();
}

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& obj, const std::string& key, const std::string& path, T& out,
                std::vector<std::string>& seen) {
  seen.push_back(key);
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError(path + key, "expected a number");
      out = it->get<double>();
    } else if constexpr (std::is_same_v<T, int>) {
      if (!it->is_number_integer()) throw ConfigError(path + key, "expected an integer");
      out = it->get<int>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
        throw ConfigError(path + key, "expected a non-negative integer");
      out = it->get<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(path + key, "expected true or false");
      out = it->get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(path + key, "expected a string");
      out = it->get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!it->is_array()) throw ConfigError(path + key, "expected an array of integers");
      out.clear();
      for (const auto& v : *it) {
        if (!v.is_number_integer()) throw ConfigError(path + key, "expected an array of integers");
        out.push_back(v.get<int>());
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(path + key, e.what());
  }
}

void reject_unknown(const json& obj, const std::string& path, const std::vector<std::string>& seen) {
  for (const auto& [key, value] : obj.items())
    if (std::find(seen.begin(), seen.end(), key) == seen.end())
      throw ConfigError(path + key, "unknown field");
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  if (trim(text).empty()) return cfg;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("<file>", "top level must be an object");

  std::vector<std::string> seen;
  read_field(root, "clusters", "", cfg.clusters, seen);
  read_field(root, "zeta", "", cfg.zeta, seen);
  read_field(root, "gamma", "", cfg.gamma, seen);
  read_field(root, "tau_instance", "", cfg.tau_instance, seen);
  read_field(root, "tau_cluster", "", cfg.tau_cluster, seen);
  read_field(root, "init_epochs", "", cfg.init_epochs, seen);
  read_field(root, "c3_epochs", "", cfg.c3_epochs, seen);
  read_field(root, "init_lr", "", cfg.init_lr, seen);
  read_field(root, "c3_lr", "", cfg.c3_lr, seen);
  read_field(root, "batch_size", "", cfg.batch_size, seen);
  read_field(root, "seed", "", cfg.seed, seen);
  read_field(root, "label_column", "", cfg.label_column, seen);
  read_field(root, "standardize", "", cfg.standardize, seen);

  seen.push_back("model");
  if (auto it = root.find("model"); it != root.end()) {
    if (!it->is_object()) throw ConfigError("model", "expected an object");
    std::vector<std::string> model_seen;
    read_field(*it, "encoder_hidden", "model.", cfg.dims.encoder_hidden, model_seen);
    read_field(*it, "instance_hidden", "model.", cfg.dims.instance_hidden, model_seen);
    read_field(*it, "z_dim", "model.", cfg.dims.z_dim, model_seen);
    read_field(*it, "cluster_hidden", "model.", cfg.dims.cluster_hidden, model_seen);
    reject_unknown(*it, "model.", model_seen);
  }
  seen.push_back("augment");
  if (auto it = root.find("augment"); it != root.end()) {
    if (!it->is_object()) throw ConfigError("augment", "expected an object");
    std::vector<std::string> aug_seen;
    read_field(*it, "noise_sigma", "augment.", cfg.augment.noise_sigma, aug_seen);
    read_field(*it, "mask_rate", "augment.", cfg.augment.mask_rate, aug_seen);
    read_field(*it, "scale_min", "augment.", cfg.augment.scale_min, aug_seen);
    read_field(*it, "scale_max", "augment.", cfg.augment.scale_max, aug_seen);
    reject_unknown(*it, "augment.", aug_seen);
  }
  reject_unknown(root, "", seen);
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const TrainConfig& c) {
  json j = {
      {"clusters", c.clusters},
      {"zeta", c.zeta},
      {"gamma", c.gamma},
      {"tau_instance", c.tau_instance},
      {"tau_cluster", c.tau_cluster},
      {"init_epochs", c.init_epochs},
      {"c3_epochs", c.c3_epochs},
      {"init_lr", c.init_lr},
      {"c3_lr", c.c3_lr},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"label_column", c.label_column},
      {"standardize", c.standardize},
      {"model",
       {{"encoder_hidden", c.dims.encoder_hidden},
        {"instance_hidden", c.dims.instance_hidden},
        {"z_dim", c.dims.z_dim},
        {"cluster_hidden", c.dims.cluster_hidden}}},
      {"augment",
       {{"noise_sigma", c.augment.noise_sigma},
        {"mask_rate", c.augment.mask_rate},
        {"scale_min", c.augment.scale_min},
        {"scale_max", c.augment.scale_max}}},
  };
  return j.dump(2);
}

}  // namespace c3
