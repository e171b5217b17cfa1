#include "c3/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "c3/rng.hpp"

namespace c3 {

void ModelDims::validate() const {
  auto positive = [](int v, const std::string& what) {
    if (v <= 0) throw ShapeError("model dims: " + what + " must be positive, got " + std::to_string(v));
  };
  positive(input, "input");
  for (std::size_t i = 0; i < encoder_hidden.size(); ++i)
    positive(encoder_hidden[i], "encoder layer " + std::to_string(i));
  for (std::size_t i = 0; i < instance_hidden.size(); ++i)
    positive(instance_hidden[i], "instance head layer " + std::to_string(i));
  for (std::size_t i = 0; i < cluster_hidden.size(); ++i)
    positive(cluster_hidden[i], "cluster head layer " + std::to_string(i));
  positive(z_dim, "z_dim");
  positive(clusters, "clusters");
}

namespace {

Mlp make_mlp(std::mt19937_64& gen, int in, const std::vector<int>& hidden, int out,
             bool relu_on_output) {
  Mlp mlp;
  mlp.relu_on_output = relu_on_output;
  std::vector<int> widths{in};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  if (out > 0) widths.push_back(out);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Dense layer{Matrix(fan_in, widths[l + 1]), Matrix::Zero(1, widths[l + 1])};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(gen);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

MlpCache run_mlp(const Mlp& mlp, const Matrix& x) {
  MlpCache cache;
  Matrix act = x;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const Dense& layer = mlp.layers[l];
    if (act.cols() != layer.weight.rows())
      throw ShapeError("layer " + std::to_string(l) + " expects " +
                       std::to_string(layer.weight.rows()) + " inputs, got " +
                       std::to_string(act.cols()));
    Matrix pre = act * layer.weight;
    pre.rowwise() += layer.bias.row(0);
    const bool relu = mlp.relu_on_output || l + 1 < mlp.layers.size();
    cache.inputs.push_back(std::move(act));
    act = relu ? Matrix(pre.cwiseMax(0.0)) : pre;
    cache.pre_activations.push_back(std::move(pre));
  }
  cache.output = std::move(act);
  return cache;
}

// Accumulates layer gradients into `grads` and returns d(loss)/d(input).
Matrix backprop_mlp(const Mlp& mlp, const MlpCache& cache, Matrix grad_out, Mlp& grads) {
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    const bool relu = mlp.relu_on_output || l + 1 < mlp.layers.size();
    if (relu) grad_out = grad_out.cwiseProduct((cache.pre_activations[l].array() > 0.0).cast<double>().matrix());
    grads.layers[l].weight.noalias() += cache.inputs[l].transpose() * grad_out;
    grads.layers[l].bias.noalias() += grad_out.colwise().sum();
    grad_out = grad_out * mlp.layers[l].weight.transpose();
  }
  return grad_out;
}

Mlp zeros_like(const Mlp& mlp) {
  Mlp out;
  out.relu_on_output = mlp.relu_on_output;
  for (const Dense& layer : mlp.layers)
    out.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                          Matrix::Zero(1, layer.bias.cols())});
  return out;
}

template <typename Params, typename BlockT>
std::vector<BlockT> collect_blocks(Params& params) {
  std::vector<BlockT> out;
  auto add = [&](auto& mlp, const std::string& prefix) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      out.push_back({prefix + "." + std::to_string(l) + ".weight", &mlp.layers[l].weight});
      out.push_back({prefix + "." + std::to_string(l) + ".bias", &mlp.layers[l].bias});
    }
  };
  add(params.encoder, "encoder");
  add(params.instance_head, "instance_head");
  add(params.cluster_head, "cluster_head");
  return out;
}

}  // namespace

std::vector<ModelParams::Block> ModelParams::blocks() {
  return collect_blocks<ModelParams, Block>(*this);
}

std::vector<ModelParams::ConstBlock> ModelParams::blocks() const {
  return collect_blocks<const ModelParams, ConstBlock>(*this);
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += static_cast<std::size_t>(b.value->size());
  return n;
}

ModelParams ModelParams::zeros_like() const {
  return {dims, c3::zeros_like(encoder), c3::zeros_like(instance_head),
          c3::zeros_like(cluster_head)};
}

ModelParams init_params(std::uint64_t seed, const ModelDims& dims) {
  dims.validate();
  std::mt19937_64 gen(derive_seed(seed, StreamId::kParams));
  ModelParams params;
  params.dims = dims;
  params.encoder = make_mlp(gen, dims.input, dims.encoder_hidden, 0, true);
  params.instance_head = make_mlp(gen, dims.feature_dim(), dims.instance_hidden, dims.z_dim, false);
  params.cluster_head = make_mlp(gen, dims.feature_dim(), dims.cluster_hidden, dims.clusters, false);
  return params;
}

ForwardCache forward(const ModelParams& params, const Matrix& x) {
  if (x.cols() != params.dims.input)
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, model expects " +
                     std::to_string(params.dims.input));
  ForwardCache cache;
  cache.encoder = run_mlp(params.encoder, x);
  cache.h = cache.encoder.output;
  cache.instance_head = run_mlp(params.instance_head, cache.h);
  cache.z_raw = cache.instance_head.output;
  cache.z_norms = cache.z_raw.rowwise().norm();
  cache.z = row_l2_normalize(cache.z_raw);
  cache.cluster_head = run_mlp(params.cluster_head, cache.h);
  cache.logits = cache.cluster_head.output;
  cache.c = row_softmax(cache.logits);
  return cache;
}

Matrix cluster_probabilities(const ModelParams& params, const Matrix& x) {
  if (x.cols() != params.dims.input)
    throw ShapeError("cluster_probabilities: input has " + std::to_string(x.cols()) +
                     " columns, model expects " + std::to_string(params.dims.input));
  const MlpCache enc = run_mlp(params.encoder, x);
  return row_softmax(run_mlp(params.cluster_head, enc.output).output);
}

ParamGrads backward(const ModelParams& params, const ForwardCache& cache, const Matrix& grad_z,
                    const Matrix& grad_c) {
  if (grad_z.rows() != cache.z.rows() || grad_z.cols() != cache.z.cols())
    throw ShapeError("backward: grad_z shape does not match z");
  if (grad_c.rows() != cache.c.rows() || grad_c.cols() != cache.c.cols())
    throw ShapeError("backward: grad_c shape does not match c");

  ParamGrads grads = params.zeros_like();

  // z = r / |r|  =>  dr = (g - z <g, z>) / |r|
  const Vector gz_dot = (grad_z.cwiseProduct(cache.z)).rowwise().sum();
  Matrix grad_z_raw = grad_z - cache.z.cwiseProduct(gz_dot.replicate(1, cache.z.cols()));
  grad_z_raw.array().colwise() /= cache.z_norms.array();

  // c = softmax(l)  =>  dl = c * (g - <g, c>)
  const Vector gc_dot = (grad_c.cwiseProduct(cache.c)).rowwise().sum();
  Matrix grad_logits =
      cache.c.cwiseProduct(grad_c - gc_dot.replicate(1, cache.c.cols()));

  Matrix grad_h = backprop_mlp(params.instance_head, cache.instance_head, std::move(grad_z_raw),
                               grads.instance_head);
  grad_h += backprop_mlp(params.cluster_head, cache.cluster_head, std::move(grad_logits),
                         grads.cluster_head);
  backprop_mlp(params.encoder, cache.encoder, std::move(grad_h), grads.encoder);
  return grads;
}

AdamState AdamState::for_params(const ModelParams& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, long step,
                 const AdamOptions& opts) {
  m = opts.beta1 * m + (1.0 - opts.beta1) * grad;
  v = opts.beta2 * v + (1.0 - opts.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
  param.array() -= opts.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + opts.eps);
}

void adam_step(ModelParams& params, const ParamGrads& grads, AdamState& state,
               const AdamOptions& opts) {
  if (!(opts.lr > 0.0)) throw ConfigError("lr", "must be positive");
  auto p = params.blocks();
  const auto g = grads.blocks();
  auto m = state.first_moment.blocks();
  auto v = state.second_moment.blocks();
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
    throw ShapeError("adam_step: parameter, gradient and state layouts differ");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i].value->rows() != p[i].value->rows() || g[i].value->cols() != p[i].value->cols() ||
        m[i].value->rows() != p[i].value->rows() || m[i].value->cols() != p[i].value->cols())
      throw ShapeError("adam_step: shape mismatch in block " + p[i].name);
    if (!g[i].value->allFinite())
      throw ContractError("adam_step: non-finite gradient in block " + p[i].name);
  }
  ++state.step;
  for (std::size_t i = 0; i < p.size(); ++i)
    adam_update(*p[i].value, *g[i].value, *m[i].value, *v[i].value, state.step, opts);
}

double grad_check(const ModelParams& params, const LossFn& loss_fn, const GradCheckOptions& opts) {
  const LossAndGrad base = loss_fn(params);
  ModelParams probe = params;
  auto probe_blocks = probe.blocks();
  const auto grad_blocks = base.grad.blocks();
  std::mt19937_64 gen(opts.seed);
  double worst = 0.0;
  for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
    Matrix& block = *probe_blocks[b].value;
    const Eigen::Index n = block.size();
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
    if (opts.samples_per_block > 0 && coords.size() > opts.samples_per_block) {
      std::shuffle(coords.begin(), coords.end(), gen);
      coords.resize(opts.samples_per_block);
    }
    for (Eigen::Index k : coords) {
      const double original = block.data()[k];
      block.data()[k] = original + opts.step;
      const double up = loss_fn(probe).loss;
      block.data()[k] = original - opts.step;
      const double down = loss_fn(probe).loss;
      block.data()[k] = original;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double analytic = grad_blocks[b].value->data()[k];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), opts.abs_floor});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace c3
