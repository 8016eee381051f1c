#include "mlnet/nn.hpp"

#include <cmath>
#include <sstream>

namespace mlnet {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw ParseError("unknown activation: " + name);
}

namespace {

Matrix apply_activation(const Matrix& pre, Activation act) {
  switch (act) {
    case Activation::Tanh: return pre.array().tanh().matrix();
    case Activation::Relu: return pre.cwiseMax(0.0);
    case Activation::Identity: return pre;
  }
  return pre;
}

// Derivative expressed through the post-activation value.
Matrix activation_grad_from_post(const Matrix& post, Activation act) {
  switch (act) {
    case Activation::Tanh: return (1.0 - post.array().square()).matrix();
    case Activation::Relu:
      return (post.array() > 0.0).cast<double>().matrix();
    case Activation::Identity: return Matrix::Ones(post.rows(), post.cols());
  }
  return Matrix::Ones(post.rows(), post.cols());
}

}  // namespace

MlpActivations mlp_forward(const Mlp& mlp, const Matrix& input) {
  if (mlp.layers.empty()) throw ShapeError("mlp_forward: empty network");
  if (input.cols() != mlp.input_dim()) {
    std::ostringstream os;
    os << "mlp_forward: input dim " << input.cols() << " != layer dim "
       << mlp.input_dim();
    throw ShapeError(os.str());
  }
  MlpActivations acts;
  acts.post.reserve(mlp.layers.size() + 1);
  acts.post.push_back(input);
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const DenseLayer& layer = mlp.layers[i];
    Matrix pre = acts.post.back() * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    const bool last = (i + 1 == mlp.layers.size());
    acts.post.push_back(last ? std::move(pre)
                             : apply_activation(pre, mlp.activation));
  }
  return acts;
}

MlpGradients mlp_backprop(const Mlp& mlp, const MlpActivations& acts,
                          const Matrix& output_grad) {
  const std::size_t n_layers = mlp.layers.size();
  if (acts.post.size() != n_layers + 1)
    throw ShapeError("mlp_backprop: activations do not match network depth");
  if (output_grad.rows() != acts.post.back().rows() ||
      output_grad.cols() != acts.post.back().cols())
    throw ShapeError("mlp_backprop: output_grad shape mismatch");

  MlpGradients grads;
  grads.layers.resize(n_layers);
  Matrix delta = output_grad;  // dLoss/dPre of the current layer
  for (std::size_t i = n_layers; i-- > 0;) {
    if (i + 1 < n_layers) {
      delta = delta.cwiseProduct(
          activation_grad_from_post(acts.post[i + 1], mlp.activation));
    }
    const Matrix& below = acts.post[i];
    if (below.cols() != mlp.layers[i].in_dim())
      throw ShapeError("mlp_backprop: stale activations");
    grads.layers[i].weight = delta.transpose() * below;
    grads.layers[i].bias = delta.colwise().sum().transpose();
    if (i > 0)
      delta = delta * mlp.layers[i].weight;
    else
      grads.input_grad = delta * mlp.layers[i].weight;
  }
  return grads;
}

DenseLayer make_dense_layer(Index out_dim, Index in_dim, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::uniform_real_distribution<double> dist(-limit, limit);
  DenseLayer layer;
  layer.weight.resize(out_dim, in_dim);
  for (Index r = 0; r < out_dim; ++r)
    for (Index c = 0; c < in_dim; ++c) layer.weight(r, c) = dist(rng);
  layer.bias = Vector::Zero(out_dim);
  return layer;
}

Mlp make_mlp(Index input_dim, const std::vector<Index>& hidden_dims,
             Index output_dim, Activation activation, Rng& rng) {
  Mlp mlp;
  mlp.activation = activation;
  Index in = input_dim;
  for (Index h : hidden_dims) {
    mlp.layers.push_back(make_dense_layer(h, in, rng));
    in = h;
  }
  mlp.layers.push_back(make_dense_layer(output_dim, in, rng));
  return mlp;
}

Index mlp_param_count(const Mlp& mlp) {
  Index n = 0;
  for (const DenseLayer& l : mlp.layers) n += l.weight.size() + l.bias.size();
  return n;
}

void mlp_flatten(const Mlp& mlp, Vector& out, Index offset) {
  for (const DenseLayer& l : mlp.layers) {
    for (Index r = 0; r < l.weight.rows(); ++r)
      for (Index c = 0; c < l.weight.cols(); ++c) out[offset++] = l.weight(r, c);
    for (Index r = 0; r < l.bias.size(); ++r) out[offset++] = l.bias[r];
  }
}

void mlp_unflatten(Mlp& mlp, const Vector& flat, Index offset) {
  for (DenseLayer& l : mlp.layers) {
    for (Index r = 0; r < l.weight.rows(); ++r)
      for (Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[offset++];
    for (Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[offset++];
  }
}

Vector mlp_flatten(const Mlp& mlp) {
  Vector out(mlp_param_count(mlp));
  mlp_flatten(mlp, out, 0);
  return out;
}

void mlp_grad_flatten(const MlpGradients& grads, Vector& out, Index offset) {
  for (const DenseLayerGrad& g : grads.layers) {
    for (Index r = 0; r < g.weight.rows(); ++r)
      for (Index c = 0; c < g.weight.cols(); ++c) out[offset++] = g.weight(r, c);
    for (Index r = 0; r < g.bias.size(); ++r) out[offset++] = g.bias[r];
  }
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& loss_fn,
                        const Vector& params, double eps) {
  if (!(eps > 0.0)) throw DomainError("finite_diff_grad: eps must be > 0");
  Vector grad(params.size());
  Vector probe = params;
  for (Index i = 0; i < params.size(); ++i) {
    probe[i] = params[i] + eps;
    const double up = loss_fn(probe);
    probe[i] = params[i] - eps;
    const double down = loss_fn(probe);
    probe[i] = params[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("finite_diff_grad: non-finite loss at perturbed point");
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double inverse_schedule(double base_lr, double progress, double a, double b) {
  if (progress < 0.0 || progress > 1.0)
    throw DomainError("inverse_schedule: progress outside [0,1]");
  return base_lr * std::pow(1.0 + a * progress, -b);
}

void sgd_nesterov_step(Vector& params, const Vector& grads,
                       OptimizerState& state, Index extractor_count) {
  if (grads.size() != params.size())
    throw ShapeError("sgd_nesterov_step: gradient size mismatch");
  if (extractor_count < 0 || extractor_count > params.size())
    throw DomainError("sgd_nesterov_step: bad extractor_count");
  if (!grads.allFinite())
    throw NumericError("sgd_nesterov_step: non-finite gradient entries");
  if (state.velocity.size() == 0) state.velocity = Vector::Zero(params.size());
  if (state.velocity.size() != params.size())
    throw ShapeError("sgd_nesterov_step: velocity size mismatch");

  const double lr_ext = inverse_schedule(state.base_lr_extractor,
                                         state.progress, state.sched_a,
                                         state.sched_b);
  const double lr_head = inverse_schedule(state.base_lr_heads, state.progress,
                                          state.sched_a, state.sched_b);
  const double mu = state.momentum;
  for (Index i = 0; i < params.size(); ++i) {
    const double lr = i < extractor_count ? lr_ext : lr_head;
    const double g = grads[i] + state.weight_decay * params[i];
    state.velocity[i] = mu * state.velocity[i] - lr * g;
    params[i] += mu * state.velocity[i] - lr * g;
  }
}

}  // namespace mlnet
