#pragma once

#include <optional>
#include <tuple>
#include <string>
#include <vector>

#include "c3/data.hpp"
#include "c3/losses.hpp"
#include "c3/metrics.hpp"
#include "c3/model.hpp"

namespace c3 {

enum class Stage { kInit, kC3 };

const char* stage_name(Stage stage);

struct EpochRecord {
  Stage stage = Stage::kInit;
  int epoch = 0;
  double mean_loss = 0.0;
  double avg_positive_pairs = 0.0;
  std::optional<ClusteringScores> scores;

  friend bool operator==(const EpochRecord& a, const EpochRecord& b) {
    auto key = [](const EpochRecord& r) {
      return std::tuple(r.stage, r.epoch, r.mean_loss, r.avg_positive_pairs, r.scores.has_value(),
                        r.scores ? r.scores->acc : 0.0, r.scores ? r.scores->nmi : 0.0,
                        r.scores ? r.scores->ari : 0.0);
    };
    return key(a) == key(b);
  }
};

/// One JSON object per record; the acc/nmi/ari keys are present only when scored.
std::string record_to_json(const EpochRecord& record);
EpochRecord record_from_json(const std::string& line);

/// Holds the ground truth away from the training code; the trainer only ever
/// hands it predictions.
class Evaluator {
 public:
  explicit Evaluator(Partition truth) : truth_(std::move(truth)) {}
  ClusteringScores score(const ModelParams& params, const Matrix& x) const;

 private:
  Partition truth_;
};

struct StageResult {
  ModelParams params;
  std::vector<EpochRecord> history;
};

/// Initialization stage: instance NT-Xent + cluster NT-Xent with the
/// assignment-entropy term, all three networks updated. One record per epoch.
StageResult train_init(const TrainConfig& config, const Matrix& x,
                       const Evaluator* evaluator = nullptr);

/// C3 stage starting from `model`. Emits an epoch-0 record (a pass over the
/// data without updates) followed by one record per epoch. Only the encoder
/// and instance head receive gradient.
StageResult train_c3(ModelParams model, const TrainConfig& config, const Matrix& x,
                     const Evaluator* evaluator = nullptr);

/// Positive mask and negative weights held fixed for one batch.
struct C3Frozen {
  BoolMatrix mask;
  Matrix weights;
};

struct BatchOutcome {
  double loss = 0.0;
  double instance_loss = 0.0;
  double cluster_loss = 0.0;
  double avg_positive_pairs = 0.0;
  ParamGrads grads;
  C3Frozen frozen;  // C3 batches only
};

/// Loss and parameter gradients of the C3 objective on one augmented batch.
/// Mask and weights come from the batch's own embeddings unless `frozen` is
/// given, in which case those are used as-is.
BatchOutcome c3_batch(const ModelParams& params, const Matrix& x_a, const Matrix& x_b,
                      double zeta, double gamma, const C3Frozen* frozen = nullptr);

/// Loss and gradients of the initialization objective on one augmented batch.
/// `zeta` only affects the reported positive-pair count.
BatchOutcome init_batch(const ModelParams& params, const Matrix& x_a, const Matrix& x_b,
                        double tau_instance, double tau_cluster, double zeta);

/// argmax of the cluster probabilities, lowest index on ties. `batch_rows`
/// of 0 evaluates everything at once.
Partition predict(const ModelParams& params, const Matrix& x, std::size_t batch_rows = 0);

struct EvalReport {
  std::optional<ClusteringScores> scores;
  std::vector<std::int64_t> cluster_sizes;
  double assignment_entropy = 0.0;  // entropy of the predicted cluster sizes, nats
};

EvalReport evaluate(const ModelParams& params, const Dataset& data);

/// Model shape implied by `config` for `input_dim` features.
ModelDims dims_for(const TrainConfig& config, int input_dim);

}  // namespace c3
