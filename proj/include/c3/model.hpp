#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "c3/numerics.hpp"

namespace c3 {

/// Layer widths of the encoder f and the two heads g_I (instance, z-space)
/// and g_C (cluster, c-space). Hidden lists may be empty for the heads.
struct ModelDims {
  int input = 0;
  std::vector<int> encoder_hidden{128, 64};
  std::vector<int> instance_hidden{};
  int z_dim = 32;
  std::vector<int> cluster_hidden{};
  int clusters = 0;

  int feature_dim() const { return encoder_hidden.empty() ? input : encoder_hidden.back(); }
  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Affine layer y = x W + b. `weight` is in x out, `bias` is 1 x out.
struct Dense {
  Matrix weight;
  Matrix bias;
};

/// Stack of Dense layers. ReLU follows every layer except, when
/// `relu_on_output` is false, the last one.
struct Mlp {
  std::vector<Dense> layers;
  bool relu_on_output = false;
};

struct ModelParams {
  ModelDims dims;
  Mlp encoder;
  Mlp instance_head;
  Mlp cluster_head;

  /// Named views of every parameter block, in a fixed order.
  struct Block {
    std::string name;
    Matrix* value;
  };
  struct ConstBlock {
    std::string name;
    const Matrix* value;
  };
  std::vector<Block> blocks();
  std::vector<ConstBlock> blocks() const;
  std::size_t parameter_count() const;

  /// Same shape, all zeros.
  ModelParams zeros_like() const;
};

/// Gradients share the parameter layout.
using ParamGrads = ModelParams;

struct MlpCache {
  std::vector<Matrix> inputs;          // input of each layer
  std::vector<Matrix> pre_activations; // x W + b of each layer
  Matrix output;
};

struct ForwardCache {
  MlpCache encoder;
  MlpCache instance_head;
  MlpCache cluster_head;
  Matrix h;
  Matrix z_raw;
  Vector z_norms;
  Matrix z;       // unit rows
  Matrix logits;
  Matrix c;       // softmax rows
};

/// Fan-in scaled (He-uniform) weights, zero biases, deterministic in `seed`.
ModelParams init_params(std::uint64_t seed, const ModelDims& dims);

ForwardCache forward(const ModelParams& params, const Matrix& x);

/// Cluster probabilities only; skips the instance head.
Matrix cluster_probabilities(const ModelParams& params, const Matrix& x);

/// Reverse pass given upstream gradients on the normalized z and on the
/// softmax output c. Either may be all-zero.
ParamGrads backward(const ModelParams& params, const ForwardCache& cache, const Matrix& grad_z,
                    const Matrix& grad_c);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ModelParams first_moment;
  ModelParams second_moment;
  long step = 0;

  static AdamState for_params(const ModelParams& params);
};

/// One bias-corrected Adam update of a single block. `step` is the 1-based
/// step index after incrementing.
void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, long step,
                 const AdamOptions& opts);

/// Updates every block in place. Throws ContractError naming the first
/// block holding a non-finite gradient; nothing is modified in that case.
void adam_step(ModelParams& params, const ParamGrads& grads, AdamState& state,
               const AdamOptions& opts);

struct LossAndGrad {
  double loss = 0.0;
  ParamGrads grad;
};
using LossFn = std::function<LossAndGrad(const ModelParams&)>;

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t samples_per_block = 16;  // 0 checks every coordinate
  double abs_floor = 1e-6;             // denominator floor for relative error
  std::uint64_t seed = 0;
};

/// Worst relative error between the analytic gradient returned by `loss_fn`
/// and central differences of its loss, over a sampled subset of coordinates.
/// Relative error is |a - n| / max(|a|, |n|, abs_floor).
double grad_check(const ModelParams& params, const LossFn& loss_fn,
                  const GradCheckOptions& opts = {});

}  // namespace c3
