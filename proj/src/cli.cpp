#include "c3/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "c3/checkpoint.hpp"
#include "c3/data.hpp"
#include "c3/format.hpp"
#include "c3/trainer.hpp"
#include "json.hpp"

namespace c3 {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

class UsageError : public Error {
 public:
  using Error::Error;
};

fs::path output_root() {
  if (const char* env = std::getenv("C3_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_history(const fs::path& path, const std::vector<EpochRecord>& records) {
  std::string text;
  for (const auto& r : records) text += record_to_json(r) + "\n";
  write_text(path, text);
}

// Loads the dataset the way training saw it: label column if the header has
// it (mandatory when named explicitly), optional standardization.
Dataset load_training_data(const fs::path& path, const std::string& label_column,
                           bool label_required, bool standardize) {
  const auto header = read_csv_header(path);
  const bool has_label = std::find(header.begin(), header.end(), label_column) != header.end();
  std::optional<std::string> label;
  if (has_label || label_required) label = label_column;
  Dataset ds = load_csv(path, label);
  if (standardize) standardize_features(ds.x);
  return ds;
}

// Flags given on the command line override the config file.
struct TrainOverrides {
  std::optional<int> clusters, init_epochs, c3_epochs, batch_size;
  std::optional<double> zeta, gamma, init_lr, c3_lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> label_column;

  void add_to(CLI::App& app) {
    app.add_option("--clusters", clusters, "Number of clusters M");
    app.add_option("--zeta", zeta, "Positive-pair similarity threshold");
    app.add_option("--gamma", gamma, "Weighting inverse temperature");
    app.add_option("--init-epochs", init_epochs, "Initialization-stage epochs");
    app.add_option("--c3-epochs", c3_epochs, "C3-stage epochs");
    app.add_option("--init-lr", init_lr, "Initialization-stage learning rate");
    app.add_option("--c3-lr", c3_lr, "C3-stage learning rate");
    app.add_option("--batch-size", batch_size, "Minibatch size");
    app.add_option("--seed", seed, "Master random seed");
    app.add_option("--label-column", label_column, "Name of the ground-truth column");
  }

  void apply(TrainConfig& c) const {
    if (clusters) c.clusters = *clusters;
    if (zeta) c.zeta = *zeta;
    if (gamma) c.gamma = *gamma;
    if (init_epochs) c.init_epochs = *init_epochs;
    if (c3_epochs) c.c3_epochs = *c3_epochs;
    if (init_lr) c.init_lr = *init_lr;
    if (c3_lr) c.c3_lr = *c3_lr;
    if (batch_size) c.batch_size = *batch_size;
    if (seed) c.seed = *seed;
    if (label_column) c.label_column = *label_column;
    c.validate();
  }
};

TrainConfig resolve_config(const std::string& config_path, const TrainOverrides& overrides) {
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config(config_path);
  overrides.apply(cfg);
  return cfg;
}

ordered_json summary_json(const TrainConfig& cfg, const std::string& data_path,
                          const std::vector<EpochRecord>& history, double wall_seconds) {
  ordered_json s;
  s["data"] = data_path;
  s["config"] = json::parse(config_to_json(cfg));
  s["nmi_normalizer"] = "arithmetic";
  const EpochRecord* epoch0 = nullptr;
  for (const auto& r : history)
    if (r.stage == Stage::kC3 && r.epoch == 0) epoch0 = &r;
  s["epoch0"] = epoch0 ? ordered_json(json::parse(record_to_json(*epoch0))) : ordered_json(nullptr);
  s["final"] = history.empty() ? ordered_json(nullptr) : ordered_json(json::parse(record_to_json(history.back())));
  s["wall_time_seconds"] = wall_seconds;
  return s;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  BlobSpec spec;
  std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& err) {
  if (a.spec.clusters < 2) throw UsageError("--clusters must be >= 2");
  if (a.spec.n < a.spec.clusters) throw UsageError("--n must be >= --clusters");
  if (a.spec.d < 2) throw UsageError("--d must be >= 2");
  if (!(a.spec.separation > 0.0)) throw UsageError("--sep must be positive");
  if (!(a.spec.sigma > 0.0)) throw UsageError("--sigma must be positive");
  const Dataset ds = generate_blobs(a.spec);
  if (const auto parent = fs::path(a.out).parent_path(); !parent.empty())
    fs::create_directories(parent);
  save_csv(ds, a.out);
  err << "wrote " << ds.size() << " samples to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string init_checkpoint;
  TrainOverrides overrides;
};

int cmd_train(const TrainArgs& a, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  const TrainConfig cfg = resolve_config(a.config, a.overrides);
  const Dataset ds =
      load_training_data(a.data, cfg.label_column, a.overrides.label_column.has_value(), cfg.standardize);
  const fs::path out = a.out.empty() ? output_root() / ("train-seed" + std::to_string(cfg.seed)) : fs::path(a.out);
  fs::create_directories(out);

  std::optional<Evaluator> evaluator;
  if (ds.truth) evaluator.emplace(*ds.truth);
  const Evaluator* eval = evaluator ? &*evaluator : nullptr;

  std::vector<EpochRecord> history;
  ModelParams init_model;
  if (!a.init_checkpoint.empty()) {
    init_model = load_checkpoint(a.init_checkpoint);
    err << "loaded initialization from " << a.init_checkpoint << "\n";
  } else {
    StageResult init = train_init(cfg, ds.x, eval);
    history = std::move(init.history);
    init_model = std::move(init.params);
    save_checkpoint(init_model, out / "init_checkpoint.json");
  }
  StageResult c3 = train_c3(std::move(init_model), cfg, ds.x, eval);
  history.insert(history.end(), c3.history.begin(), c3.history.end());

  save_checkpoint(c3.params, out / "checkpoint.json");
  write_history(out / "history.jsonl", history);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_text(out / "summary.json", summary_json(cfg, a.data, history, wall).dump(2) + "\n");
  const auto& last = history.back();
  err << "trained " << cfg.init_epochs << "+" << cfg.c3_epochs << " epochs in "
      << format_number(wall) << " s";
  if (last.scores)
    err << "; final acc=" << last.scores->acc << " nmi=" << last.scores->nmi
        << " ari=" << last.scores->ari;
  err << "\noutputs in " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string label_column = "label";
  bool label_explicit = false;
  bool no_standardize = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const ModelParams params = load_checkpoint(a.checkpoint);
  const Dataset ds = load_training_data(a.data, a.label_column, a.label_explicit, !a.no_standardize);
  const EvalReport report = evaluate(params, ds);
  ordered_json j;
  if (report.scores) {
    j["acc"] = report.scores->acc;
    j["nmi"] = report.scores->nmi;
    j["ari"] = report.scores->ari;
    j["nmi_normalizer"] = "arithmetic";
  } else {
    j["note"] = "dataset has no label column; acc, nmi and ari not computed";
    err << "no label column '" << a.label_column << "'; reporting cluster sizes only\n";
  }
  j["cluster_sizes"] = report.cluster_sizes;
  j["assignment_entropy"] = report.assignment_entropy;
  j["samples"] = ds.size();
  out << j.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string config;
  std::string data;
  std::string param;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::string out;
  int jobs = 1;
  bool resume = false;
  TrainOverrides overrides;
};

struct SweepRun {
  std::string id;
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string status = "pending";
  std::vector<EpochRecord> c3_history;
};

template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  std::vector<std::jthread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
}

std::vector<EpochRecord> read_history(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open history " + path.string());
  std::vector<EpochRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(line));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed history record (" +
                  e.what() + ")");
    }
  }
  return records;
}

std::string opt_number(const std::optional<ClusteringScores>& s, double ClusteringScores::*field) {
  return s ? format_number((*s).*field) : std::string();
}

int cmd_sweep(const SweepArgs& a, std::ostream& err) {
  if (a.param != "zeta" && a.param != "gamma") throw UsageError("--param must be zeta or gamma");
  if (a.values.empty()) throw UsageError("--values must not be empty");
  if (a.seeds.empty()) throw UsageError("--seeds must not be empty");
  for (double v : a.values) {
    if (a.param == "zeta" && !(v >= -1.0 && v <= 1.0))
      throw UsageError("zeta value " + format_number(v) + " outside [-1, 1]");
    if (a.param == "gamma" && !(v > 0.0))
      throw UsageError("gamma value " + format_number(v) + " must be positive");
  }
  if (a.jobs < 1) throw UsageError("--jobs must be >= 1");

  const TrainConfig base = resolve_config(a.config, a.overrides);
  const Dataset ds = load_training_data(a.data, base.label_column, a.overrides.label_column.has_value(),
                                        base.standardize);
  const fs::path root = a.out.empty() ? output_root() / ("sweep-" + a.param) : fs::path(a.out);
  fs::create_directories(root);
  std::optional<Evaluator> evaluator;
  if (ds.truth) evaluator.emplace(*ds.truth);
  const Evaluator* eval = evaluator ? &*evaluator : nullptr;
  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    std::lock_guard lock(log_mutex);
    err << msg << "\n";
  };

  // One shared initialization per seed; every swept value starts from it.
  std::vector<std::optional<ModelParams>> init_models(a.seeds.size());
  std::vector<std::vector<EpochRecord>> init_histories(a.seeds.size());
  std::vector<std::string> init_errors(a.seeds.size());
  parallel_for(a.seeds.size(), a.jobs, [&](std::size_t s) {
    const fs::path dir = root / ("init_seed_" + std::to_string(a.seeds[s]));
    try {
      fs::create_directories(dir);
      TrainConfig cfg = base;
      cfg.seed = a.seeds[s];
      if (a.resume && fs::exists(dir / "checkpoint.json") && fs::exists(dir / "history.jsonl")) {
        init_models[s] = load_checkpoint(dir / "checkpoint.json");
        init_histories[s] = read_history(dir / "history.jsonl");
        log("reusing initialization " + dir.string());
        return;
      }
      StageResult init = train_init(cfg, ds.x, eval);
      save_checkpoint(init.params, dir / "checkpoint.json");
      write_history(dir / "history.jsonl", init.history);
      init_histories[s] = std::move(init.history);
      init_models[s] = std::move(init.params);
      log("initialized seed " + std::to_string(cfg.seed));
    } catch (const std::exception& e) {
      init_errors[s] = e.what();
      log("initialization for seed " + std::to_string(a.seeds[s]) + " failed: " + e.what());
    }
  });

  std::vector<SweepRun> runs;
  for (double v : a.values)
    for (std::size_t s = 0; s < a.seeds.size(); ++s)
      runs.push_back({a.param + "_" + format_number(v) + "_seed_" + std::to_string(a.seeds[s]), v,
                      a.seeds[s], "pending", {}});

  parallel_for(runs.size(), a.jobs, [&](std::size_t r) {
    SweepRun& run = runs[r];
    const std::size_t s = static_cast<std::size_t>(
        std::find(a.seeds.begin(), a.seeds.end(), run.seed) - a.seeds.begin());
    const fs::path dir = root / run.id;
    try {
      if (a.resume && fs::exists(dir / "summary.json") && fs::exists(dir / "history.jsonl")) {
        std::vector<EpochRecord> all = read_history(dir / "history.jsonl");
        for (auto& rec : all)
          if (rec.stage == Stage::kC3) run.c3_history.push_back(rec);
        run.status = "ok";
        log("skipping completed run " + run.id);
        return;
      }
      if (!init_models[s]) throw Error("initialization failed: " + init_errors[s]);
      fs::create_directories(dir);
      const auto started = std::chrono::steady_clock::now();
      TrainConfig cfg = base;
      cfg.seed = run.seed;
      (a.param == "zeta" ? cfg.zeta : cfg.gamma) = run.value;
      cfg.validate();
      StageResult c3 = train_c3(*init_models[s], cfg, ds.x, eval);
      std::vector<EpochRecord> history = init_histories[s];
      history.insert(history.end(), c3.history.begin(), c3.history.end());
      save_checkpoint(c3.params, dir / "checkpoint.json");
      write_history(dir / "history.jsonl", history);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      // Written last: its presence marks the run as complete for --resume.
      write_text(dir / "summary.json", summary_json(cfg, a.data, history, wall).dump(2) + "\n");
      run.c3_history = std::move(c3.history);
      run.status = "ok";
      log("finished " + run.id);
    } catch (const std::exception& e) {
      run.status = std::string("failed: ") + e.what();
      log("run " + run.id + " failed: " + e.what());
    }
  });

  std::ostringstream agg;
  agg << "run_id,param,value,seed,status,epoch0_acc,final_acc,epoch0_nmi,final_nmi,final_ari,"
         "epoch0_pos_pairs,epoch1_pos_pairs,final_pos_pairs\n";
  std::ostringstream curves;
  curves << "run_id,param,value,seed,epoch,loss,pos_pairs,acc,nmi,ari\n";
  bool all_ok = true;
  for (const auto& run : runs) {
    const bool ok = run.status == "ok" && !run.c3_history.empty();
    all_ok = all_ok && ok;
    std::string status = run.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    agg << run.id << ',' << a.param << ',' << format_number(run.value) << ',' << run.seed << ','
        << status;
    if (ok) {
      const EpochRecord& e0 = run.c3_history.front();
      const EpochRecord& last = run.c3_history.back();
      const std::string e1 =
          run.c3_history.size() > 1 ? format_number(run.c3_history[1].avg_positive_pairs) : "";
      agg << ',' << opt_number(e0.scores, &ClusteringScores::acc) << ','
          << opt_number(last.scores, &ClusteringScores::acc) << ','
          << opt_number(e0.scores, &ClusteringScores::nmi) << ','
          << opt_number(last.scores, &ClusteringScores::nmi) << ','
          << opt_number(last.scores, &ClusteringScores::ari) << ','
          << format_number(e0.avg_positive_pairs) << ',' << e1 << ','
          << format_number(last.avg_positive_pairs) << '\n';
      for (const auto& rec : run.c3_history)
        curves << run.id << ',' << a.param << ',' << format_number(run.value) << ',' << run.seed
               << ',' << rec.epoch << ',' << format_number(rec.mean_loss) << ','
               << format_number(rec.avg_positive_pairs) << ','
               << opt_number(rec.scores, &ClusteringScores::acc) << ','
               << opt_number(rec.scores, &ClusteringScores::nmi) << ','
               << opt_number(rec.scores, &ClusteringScores::ari) << '\n';
    } else {
      agg << ",,,,,,,,\n";
    }
  }
  write_text(root / "aggregate.csv", agg.str());
  write_text(root / "curves.csv", curves.str());
  err << "sweep aggregate written to " << (root / "aggregate.csv").string() << "\n";
  return all_ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> histories;
  std::string out;
};

std::string run_id_for(const fs::path& p) {
  if (p.filename() == "history.jsonl" && p.has_parent_path() && !p.parent_path().filename().empty())
    return p.parent_path().filename().string();
  return p.stem().string();
}

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  if (a.histories.empty()) throw UsageError("at least one history file is required");
  const bool multi = a.histories.size() > 1;
  std::ostringstream csv;
  if (multi) csv << "run_id,";
  csv << "stage,epoch,loss,pos_pairs,acc,nmi,ari\n";
  std::size_t rows = 0;
  for (const auto& h : a.histories) {
    const auto records = read_history(h);
    const std::string id = run_id_for(h);
    for (const auto& r : records) {
      if (multi) csv << id << ',';
      csv << stage_name(r.stage) << ',' << r.epoch << ',' << format_number(r.mean_loss) << ','
          << format_number(r.avg_positive_pairs) << ','
          << opt_number(r.scores, &ClusteringScores::acc) << ','
          << opt_number(r.scores, &ClusteringScores::nmi) << ','
          << opt_number(r.scores, &ClusteringScores::ari) << '\n';
      ++rows;
    }
  }
  if (a.out.empty()) {
    out << csv.str();
  } else {
    write_text(a.out, csv.str());
    err << "wrote " << rows << " rows to " << a.out << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-instance guided contrastive clustering"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic Gaussian-blobs CSV");
  generate->add_option("--n", gen.spec.n, "Number of samples")->capture_default_str();
  generate->add_option("--d", gen.spec.d, "Feature dimension")->capture_default_str();
  generate->add_option("--clusters", gen.spec.clusters, "Number of clusters")->capture_default_str();
  generate->add_option("--sep", gen.spec.separation, "Minimum center distance in units of sigma")
      ->capture_default_str();
  generate->add_option("--sigma", gen.spec.sigma, "Cluster standard deviation")->capture_default_str();
  generate->add_option("--seed", gen.spec.seed, "Random seed")->capture_default_str();
  generate->add_option("--out", gen.out, "Output CSV path")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Run the initialization and C3 stages");
  train_cmd->add_option("--config", train.config, "JSON config file");
  train_cmd->add_option("--data", train.data, "Dataset CSV")->required();
  train_cmd->add_option("--out", train.out, "Output directory (default $C3_OUTPUT_ROOT/train-seed<N>)");
  train_cmd->add_option("--init-checkpoint", train.init_checkpoint,
                        "Start the C3 stage from this checkpoint and skip initialization");
  train.overrides.add_to(*train_cmd);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset CSV")->required();
  auto* eval_label = eval_cmd->add_option("--label-column", ev.label_column, "Ground-truth column");
  eval_cmd->add_flag("--no-standardize", ev.no_standardize, "Use features as stored");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Run C3 for several zeta or gamma values and seeds");
  sweep->add_option("--config", sw.config, "Base JSON config file");
  sweep->add_option("--data", sw.data, "Dataset CSV")->required();
  sweep->add_option("--param", sw.param, "zeta or gamma")->required();
  sweep->add_option("--values", sw.values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--seeds", sw.seeds, "Comma-separated seeds")->required()->delimiter(',');
  sweep->add_option("--out", sw.out, "Sweep directory (default $C3_OUTPUT_ROOT/sweep-<param>)");
  sweep->add_option("--jobs", sw.jobs, "Concurrent runs")->capture_default_str();
  sweep->add_flag("--resume", sw.resume, "Skip runs that already completed");
  sw.overrides.add_to(*sweep);

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Merge history files into one tidy CSV");
  report->add_option("histories", rep.histories, "history.jsonl files")->required();
  report->add_option("--out", rep.out, "Output CSV (default stdout)");

  std::vector<const char*> argv{"c3"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*generate) return cmd_generate(gen, err);
    if (*train_cmd) return cmd_train(train, err);
    if (*eval_cmd) {
      ev.label_explicit = eval_label->count() > 0;
      return cmd_eval(ev, out, err);
    }
    if (*sweep) return cmd_sweep(sw, err);
    if (*report) return cmd_report(rep, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace c3
