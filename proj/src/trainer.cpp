#include "c3/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "c3/augment.hpp"
#include "c3/rng.hpp"
#include "json.hpp"

namespace c3 {

const char* stage_name(Stage stage) { return stage == Stage::kInit ? "init" : "c3"; }

std::string record_to_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["stage"] = stage_name(r.stage);
  j["epoch"] = r.epoch;
  j["mean_loss"] = r.mean_loss;
  j["avg_positive_pairs"] = r.avg_positive_pairs;
  if (r.scores) {
    j["acc"] = r.scores->acc;
    j["nmi"] = r.scores->nmi;
    j["ari"] = r.scores->ari;
  }
  return j.dump();
}

EpochRecord record_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  EpochRecord r;
  const std::string stage = j.at("stage").get<std::string>();
  if (stage == "init") r.stage = Stage::kInit;
  else if (stage == "c3") r.stage = Stage::kC3;
  else throw Error("unknown stage '" + stage + "'");
  r.epoch = j.at("epoch").get<int>();
  r.mean_loss = j.at("mean_loss").get<double>();
  r.avg_positive_pairs = j.at("avg_positive_pairs").get<double>();
  if (j.contains("acc"))
    r.scores = ClusteringScores{j.at("acc").get<double>(), j.at("nmi").get<double>(),
                                j.at("ari").get<double>()};
  return r;
}

ClusteringScores Evaluator::score(const ModelParams& params, const Matrix& x) const {
  return score_all(predict(params, x), truth_);
}

ModelDims dims_for(const TrainConfig& config, int input_dim) {
  ModelDims dims = config.dims;
  dims.input = input_dim;
  dims.clusters = config.clusters;
  return dims;
}

namespace {

Matrix stack_views(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("views must have the same shape");
  Matrix out(2 * a.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

constexpr std::uint64_t stage_key(Stage s) { return s == Stage::kInit ? 1 : 2; }

struct EpochBatches {
  std::vector<std::vector<std::size_t>> batches;
};

// Shuffled full batches; the tail that does not fill a batch is dropped.
EpochBatches make_batches(std::uint64_t seed, Stage stage, int epoch, std::size_t n,
                          std::size_t batch_size) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, StreamId::kShuffle, {stage_key(stage), std::uint64_t(epoch)}));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t b = std::min(batch_size, n);
  EpochBatches out;
  for (std::size_t start = 0; start + b <= n; start += b)
    out.batches.emplace_back(order.begin() + start, order.begin() + start + b);
  return out;
}

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

void require_trainable(const TrainConfig& config, const Matrix& x) {
  config.validate();
  if (x.rows() < 2) throw ContractError("training needs at least two samples");
  if (!x.allFinite()) throw ContractError("training data has non-finite entries");
}

void require_finite_loss(const BatchOutcome& out, Stage stage, int epoch, std::size_t batch) {
  if (std::isfinite(out.loss)) return;
  std::ostringstream msg;
  msg << "non-finite loss in " << stage_name(stage) << " stage, epoch " << epoch << ", batch "
      << batch << ": total=" << out.loss;
  if (stage == Stage::kInit)
    msg << " instance=" << out.instance_loss << " cluster=" << out.cluster_loss;
  throw TrainingError(msg.str());
}

// Runs one epoch. With `opt` null the pass is evaluation-only.
EpochRecord run_epoch(ModelParams& params, AdamState* opt, const AdamOptions& adam,
                      const TrainConfig& config, const Matrix& x, Stage stage, int epoch,
                      const Evaluator* evaluator) {
  const auto plan = make_batches(config.seed, stage, epoch, static_cast<std::size_t>(x.rows()),
                                 static_cast<std::size_t>(config.batch_size));
  const std::uint64_t aug_key =
      derive_seed(config.seed, StreamId::kAugment, {stage_key(stage), std::uint64_t(epoch)});
  double loss_sum = 0.0;
  double pairs_sum = 0.0;
  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    const auto& rows = plan.batches[b];
    const Matrix xb = gather_rows(x, rows);
    auto [view_a, view_b] = augment_batch(aug_key, config.augment, xb, rows);
    BatchOutcome out =
        stage == Stage::kInit
            ? init_batch(params, view_a, view_b, config.tau_instance, config.tau_cluster, config.zeta)
            : c3_batch(params, view_a, view_b, config.zeta, config.gamma);
    require_finite_loss(out, stage, epoch, b);
    if (opt) adam_step(params, out.grads, *opt, adam);
    loss_sum += out.loss;
    pairs_sum += out.avg_positive_pairs;
  }
  EpochRecord rec;
  rec.stage = stage;
  rec.epoch = epoch;
  const double count = static_cast<double>(plan.batches.size());
  rec.mean_loss = loss_sum / count;
  rec.avg_positive_pairs = pairs_sum / count;
  if (evaluator) rec.scores = evaluator->score(params, x);
  return rec;
}

}  // namespace

BatchOutcome c3_batch(const ModelParams& params, const Matrix& x_a, const Matrix& x_b,
                      double zeta, double gamma, const C3Frozen* frozen) {
  const ForwardCache cache = forward(params, stack_views(x_a, x_b));
  const Matrix s = similarity_matrix(cache.z);
  BatchOutcome out;
  if (frozen) {
    out.frozen = *frozen;
  } else {
    out.frozen.mask = positive_mask(s, zeta);
    out.frozen.weights = compute_weights(s, gamma);
  }
  const auto loss = c3_loss(s, out.frozen.mask, out.frozen.weights);
  out.loss = loss.loss;
  out.avg_positive_pairs = count_positive_pairs(out.frozen.mask);
  const Matrix grad_z = chain_to_embeddings(loss.grad_s, cache.z);
  out.grads = backward(params, cache, grad_z, Matrix::Zero(cache.c.rows(), cache.c.cols()));
  return out;
}

BatchOutcome init_batch(const ModelParams& params, const Matrix& x_a, const Matrix& x_b,
                        double tau_instance, double tau_cluster, double zeta) {
  const ForwardCache cache = forward(params, stack_views(x_a, x_b));
  const Eigen::Index n = x_a.rows();
  const auto inst = init_instance_loss(cache.z, tau_instance);
  const auto clu = init_cluster_loss(cache.c.topRows(n), cache.c.bottomRows(n), tau_cluster);
  Matrix grad_c(2 * n, cache.c.cols());
  grad_c.topRows(n) = clu.grad_a;
  grad_c.bottomRows(n) = clu.grad_b;

  BatchOutcome out;
  out.instance_loss = inst.loss;
  out.cluster_loss = clu.loss;
  out.loss = inst.loss + clu.loss;
  out.avg_positive_pairs = count_positive_pairs(positive_mask(similarity_matrix(cache.z), zeta));
  out.grads = backward(params, cache, inst.grad_z, grad_c);
  return out;
}

StageResult train_init(const TrainConfig& config, const Matrix& x, const Evaluator* evaluator) {
  require_trainable(config, x);
  StageResult result{init_params(config.seed, dims_for(config, static_cast<int>(x.cols()))), {}};
  AdamState opt = AdamState::for_params(result.params);
  const AdamOptions adam{config.init_lr};
  for (int epoch = 1; epoch <= config.init_epochs; ++epoch)
    result.history.push_back(
        run_epoch(result.params, &opt, adam, config, x, Stage::kInit, epoch, evaluator));
  return result;
}

StageResult train_c3(ModelParams model, const TrainConfig& config, const Matrix& x,
                     const Evaluator* evaluator) {
  require_trainable(config, x);
  if (model.dims.input != x.cols())
    throw ShapeError("train_c3: model expects " + std::to_string(model.dims.input) +
                     " features, data has " + std::to_string(x.cols()));
  StageResult result{std::move(model), {}};
  AdamState opt = AdamState::for_params(result.params);
  const AdamOptions adam{config.c3_lr};
  result.history.push_back(
      run_epoch(result.params, nullptr, adam, config, x, Stage::kC3, 0, evaluator));
  for (int epoch = 1; epoch <= config.c3_epochs; ++epoch)
    result.history.push_back(
        run_epoch(result.params, &opt, adam, config, x, Stage::kC3, epoch, evaluator));
  return result;
}

Partition predict(const ModelParams& params, const Matrix& x, std::size_t batch_rows) {
  const Eigen::Index n = x.rows();
  const Eigen::Index step = batch_rows == 0 ? std::max<Eigen::Index>(n, 1)
                                            : static_cast<Eigen::Index>(batch_rows);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index start = 0; start < n; start += step) {
    const Eigen::Index len = std::min(step, n - start);
    const Matrix probs = cluster_probabilities(params, x.middleRows(start, len));
    for (Eigen::Index i = 0; i < len; ++i) {
      int best = 0;
      for (Eigen::Index k = 1; k < probs.cols(); ++k)
        if (probs(i, k) > probs(i, best)) best = static_cast<int>(k);
      labels[static_cast<std::size_t>(start + i)] = best;
    }
  }
  return Partition(std::move(labels), params.dims.clusters);
}

EvalReport evaluate(const ModelParams& params, const Dataset& data) {
  const Partition pred = predict(params, data.x);
  EvalReport report;
  report.cluster_sizes.assign(static_cast<std::size_t>(pred.num_clusters), 0);
  for (int label : pred.labels) ++report.cluster_sizes[static_cast<std::size_t>(label)];
  const double n = static_cast<double>(pred.size());
  for (std::int64_t count : report.cluster_sizes)
    if (count > 0) {
      const double p = static_cast<double>(count) / n;
      report.assignment_entropy -= p * std::log(p);
    }
  if (data.truth) report.scores = score_all(pred, *data.truth);
  return report;
}

}  // namespace c3
