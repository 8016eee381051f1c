#pragma once

#include <functional>
#include <vector>

#include "mlnet/errors.hpp"
#include "mlnet/random.hpp"
#include "mlnet/types.hpp"

namespace mlnet {

enum class Activation { Tanh, Relu, Identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
  Matrix weight;  // out_dim x in_dim
  Vector bias;    // out_dim

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }
};

struct DenseLayerGrad {
  Matrix weight;
  Vector bias;
};

// Multilayer perceptron. Hidden layers apply `activation`, the final
// layer is linear.
struct Mlp {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::Tanh;

  Index input_dim() const { return layers.front().in_dim(); }
  Index output_dim() const { return layers.back().out_dim(); }
};

// Per-layer outputs of a forward pass. post[0] is the input batch,
// post[i] the output of layer i (activated for hidden layers, raw for
// the final layer). Kept around for backprop and for feature-level
// mixup, which taps the final entry.
struct MlpActivations {
  std::vector<Matrix> post;

  const Matrix& output() const { return post.back(); }
};

struct MlpGradients {
  std::vector<DenseLayerGrad> layers;
  Matrix input_grad;  // dLoss/dInput, batch x in_dim
};

// Rows of `input` are samples.
MlpActivations mlp_forward(const Mlp& mlp, const Matrix& input);

// Exact gradients of the scalar loss whose dLoss/dOutput is `output_grad`.
// `acts` must come from mlp_forward on the same parameters.
MlpGradients mlp_backprop(const Mlp& mlp, const MlpActivations& acts,
                          const Matrix& output_grad);

// Glorot-uniform weights, zero biases; deterministic under seed.
Mlp make_mlp(Index input_dim, const std::vector<Index>& hidden_dims,
             Index output_dim, Activation activation, Rng& rng);
DenseLayer make_dense_layer(Index out_dim, Index in_dim, Rng& rng);

// Flat parameter views. The flattening order (per layer: weight row-major,
// then bias) is shared by the optimizer and the finite-difference oracle.
Index mlp_param_count(const Mlp& mlp);
void mlp_flatten(const Mlp& mlp, Vector& out, Index offset);
void mlp_unflatten(Mlp& mlp, const Vector& flat, Index offset);
Vector mlp_flatten(const Mlp& mlp);
void mlp_grad_flatten(const MlpGradients& grads, Vector& out, Index offset);

// Central-difference gradient of an arbitrary scalar function of a flat
// parameter vector: (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
// Verification oracle; independent of every analytic gradient path.
Vector finite_diff_grad(const std::function<double(const Vector&)>& loss_fn,
                        const Vector& params, double eps = 1e-5);

// base_lr * (1 + a p)^(-b); strictly decreasing in p for a, b > 0.
double inverse_schedule(double base_lr, double progress, double a = 10.0,
                        double b = 0.75);

// State for SGD with Nesterov momentum over a flat parameter vector.
// Coordinates below `extractor_count` are the feature-extractor group and
// use base_lr_extractor; the rest (classifier heads) use base_lr_heads.
struct OptimizerState {
  Vector velocity;  // same size as the flat parameter vector
  double base_lr_extractor = 0.001;
  double base_lr_heads = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double progress = 0.0;  // in [0, 1], drives the inverse schedule
  double sched_a = 10.0;
  double sched_b = 0.75;
};

// v <- mu v - lr g;  theta <- theta + mu v - lr g.
// Throws NumericError on non-finite gradient entries (step aborted).
void sgd_nesterov_step(Vector& params, const Vector& grads,
                       OptimizerState& state, Index extractor_count);

}  // namespace mlnet
