#include <cmath>

#include "doctest.h"
#include "mlnet/nn.hpp"
#include "test_support.hpp"

using namespace mlnet;
using test_support::max_rel_err;
using test_support::random_matrix;

namespace {

Mlp two_layer(Index in, Index hid, Index out, std::uint64_t seed,
              Activation act = Activation::Tanh) {
  Rng rng(seed);
  return make_mlp(in, {hid}, out, act, rng);
}

}  // namespace

TEST_CASE("mlp_forward zero parameters give zero output") {
  Mlp mlp = two_layer(4, 3, 2, 1);
  for (auto& l : mlp.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  Rng rng(7);
  Matrix x = random_matrix(5, 4, rng);
  CHECK(mlp_forward(mlp, x).output().isZero(0.0));
}

TEST_CASE("mlp_forward identity layer passes input through") {
  Mlp mlp;
  mlp.activation = Activation::Identity;
  DenseLayer l;
  l.weight = Matrix::Identity(3, 3);
  l.bias = Vector::Zero(3);
  mlp.layers.push_back(l);
  Rng rng(9);
  Matrix x = random_matrix(4, 3, rng);
  CHECK((mlp_forward(mlp, x).output() - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mlp_forward matches a straight-line recomputation") {
  Mlp mlp = two_layer(4, 6, 3, 11);
  Rng rng(12);
  Matrix x = random_matrix(3, 4, rng);
  MlpActivations acts = mlp_forward(mlp, x);

  // independent per-sample loop, no shared code with the engine
  for (Index s = 0; s < x.rows(); ++s) {
    Vector h = Vector::Zero(6);
    for (Index o = 0; o < 6; ++o) {
      double sum = mlp.layers[0].bias[o];
      for (Index i = 0; i < 4; ++i) sum += mlp.layers[0].weight(o, i) * x(s, i);
      h[o] = std::tanh(sum);
    }
    for (Index o = 0; o < 3; ++o) {
      double sum = mlp.layers[1].bias[o];
      for (Index i = 0; i < 6; ++i) sum += mlp.layers[1].weight(o, i) * h[i];
      CHECK(acts.output()(s, o) == doctest::Approx(sum).epsilon(1e-12));
    }
  }
}

TEST_CASE("mlp_forward rejects dimension mismatch") {
  Mlp mlp = two_layer(4, 3, 2, 1);
  CHECK_THROWS_AS(mlp_forward(mlp, Matrix::Zero(2, 5)), ShapeError);
}

TEST_CASE("backprop zero output gradient gives zero parameter gradients") {
  Mlp mlp = two_layer(4, 3, 2, 3);
  Rng rng(4);
  Matrix x = random_matrix(5, 4, rng);
  MlpActivations acts = mlp_forward(mlp, x);
  MlpGradients g = mlp_backprop(mlp, acts, Matrix::Zero(5, 2));
  for (const auto& lg : g.layers) {
    CHECK(lg.weight.isZero(0.0));
    CHECK(lg.bias.isZero(0.0));
  }
}

TEST_CASE("backprop single linear layer matches 2(Wx-y)x^T closed form") {
  Mlp mlp;
  mlp.activation = Activation::Identity;
  Rng rng(5);
  mlp.layers.push_back(make_dense_layer(2, 3, rng));
  mlp.layers[0].bias.setZero();

  Vector x = test_support::random_vector(3, rng);
  Vector y = test_support::random_vector(2, rng);
  MlpActivations acts = mlp_forward(mlp, x.transpose());
  Vector r = acts.output().row(0).transpose() - y;  // Wx - y

  // loss = ||Wx - y||^2, so dLoss/dOut = 2 r
  MlpGradients g = mlp_backprop(mlp, acts, (2.0 * r).transpose());
  Matrix expected = 2.0 * r * x.transpose();
  CHECK((g.layers[0].weight - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.layers[0].bias - 2.0 * r).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backprop agrees with finite differences on a tanh net") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Mlp mlp = two_layer(5, 4, 3, 100 + seed);
    Rng rng(200 + seed);
    Matrix x = random_matrix(5, 5, rng);
    Matrix target = random_matrix(5, 3, rng);

    auto loss_of = [&](const Vector& theta) {
      Mlp probe = mlp;
      mlp_unflatten(probe, theta, 0);
      const Matrix out = mlp_forward(probe, x).output();
      return (out - target).squaredNorm();
    };

    MlpActivations acts = mlp_forward(mlp, x);
    MlpGradients g =
        mlp_backprop(mlp, acts, 2.0 * (acts.output() - target));
    Vector analytic(mlp_param_count(mlp));
    mlp_grad_flatten(g, analytic, 0);
    Vector numeric = finite_diff_grad(loss_of, mlp_flatten(mlp));
    CHECK(max_rel_err(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("backprop agrees with finite differences through two hidden layers") {
  Rng rng(321);
  Mlp mlp = make_mlp(4, {6, 5}, 3, Activation::Tanh, rng);
  Matrix x = random_matrix(4, 4, rng);
  Matrix target = random_matrix(4, 3, rng);

  auto loss_of = [&](const Vector& theta) {
    Mlp probe = mlp;
    mlp_unflatten(probe, theta, 0);
    return (mlp_forward(probe, x).output() - target).squaredNorm();
  };
  MlpActivations acts = mlp_forward(mlp, x);
  MlpGradients g = mlp_backprop(mlp, acts, 2.0 * (acts.output() - target));
  Vector analytic(mlp_param_count(mlp));
  mlp_grad_flatten(g, analytic, 0);
  CHECK(max_rel_err(analytic, finite_diff_grad(loss_of, mlp_flatten(mlp))) <
        1e-4);
}

TEST_CASE("backprop rejects stale activations") {
  Mlp mlp = two_layer(4, 3, 2, 6);
  Rng rng(6);
  MlpActivations acts = mlp_forward(mlp, random_matrix(5, 4, rng));
  acts.post[0] = Matrix::Zero(5, 9);
  CHECK_THROWS_AS(mlp_backprop(mlp, acts, Matrix::Zero(5, 2)), ShapeError);
}

TEST_CASE("finite_diff_grad on a constant is zero") {
  Vector theta = Vector::Ones(4);
  Vector g = finite_diff_grad([](const Vector&) { return 3.5; }, theta);
  CHECK(g.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("finite_diff_grad of theta^2 at 3 is 6") {
  Vector theta(1);
  theta[0] = 3.0;
  Vector g = finite_diff_grad(
      [](const Vector& t) { return t[0] * t[0]; }, theta, 1e-5);
  CHECK(std::abs(g[0] - 6.0) < 1e-6);
}

TEST_CASE("finite_diff_grad rejects non-positive eps and non-finite loss") {
  Vector theta = Vector::Ones(2);
  CHECK_THROWS_AS(
      finite_diff_grad([](const Vector& t) { return t.sum(); }, theta, 0.0),
      DomainError);
  CHECK_THROWS_AS(finite_diff_grad(
                      [](const Vector& t) {
                        return t[0] > 1.0 ? std::numeric_limits<double>::quiet_NaN()
                                          : 0.0;
                      },
                      theta),
                  NumericError);
}

TEST_CASE("inverse_schedule endpoints and monotonicity") {
  CHECK(inverse_schedule(0.01, 0.0) == doctest::Approx(0.01));
  CHECK(inverse_schedule(1.0, 1.0) ==
        doctest::Approx(std::pow(11.0, -0.75)).epsilon(1e-12));
  CHECK(inverse_schedule(1.0, 1.0) == doctest::Approx(0.1656).epsilon(1e-3));
  double prev = inverse_schedule(0.01, 0.0);
  for (int i = 1; i <= 20; ++i) {
    const double lr = inverse_schedule(0.01, i / 20.0);
    CHECK(lr < prev);
    prev = lr;
  }
  CHECK_THROWS_AS(inverse_schedule(0.01, -0.1), DomainError);
  CHECK_THROWS_AS(inverse_schedule(0.01, 1.1), DomainError);
}

TEST_CASE("sgd_nesterov_step zero gradient is a fixed point") {
  Vector theta = Vector::Ones(6);
  OptimizerState st;
  for (int i = 0; i < 5; ++i) {
    sgd_nesterov_step(theta, Vector::Zero(6), st, 3);
    CHECK(theta.isApprox(Vector::Ones(6)));
    CHECK(st.velocity.isZero(0.0));
  }
}

TEST_CASE("sgd_nesterov_step with zero momentum is vanilla SGD") {
  Vector theta(2);
  theta << 1.0, 2.0;
  Vector grad(2);
  grad << 0.5, -1.0;
  OptimizerState st;
  st.momentum = 0.0;
  st.base_lr_extractor = 0.1;
  st.base_lr_heads = 0.2;
  sgd_nesterov_step(theta, grad, st, 1);
  CHECK(theta[0] == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-15));
  CHECK(theta[1] == doctest::Approx(2.0 + 0.2 * 1.0).epsilon(1e-15));
}

TEST_CASE("sgd_nesterov_step two steps match the hand-unrolled recursion") {
  const double mu = 0.9, lr = 0.05;
  double theta = 2.0;

  Vector t(1);
  t[0] = theta;
  OptimizerState st;
  st.momentum = mu;
  st.base_lr_extractor = lr;
  st.base_lr_heads = lr;

  // gradient of 0.5 theta^2 is theta
  Vector g(1);
  g[0] = t[0];
  sgd_nesterov_step(t, g, st, 1);
  double v = -lr * theta;
  double expect = theta + mu * v - lr * theta;
  CHECK(t[0] == doctest::Approx(expect).epsilon(1e-15));

  g[0] = t[0];
  sgd_nesterov_step(t, g, st, 1);
  const double g2 = expect;
  v = mu * v - lr * g2;
  expect = expect + mu * v - lr * g2;
  CHECK(t[0] == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("sgd_nesterov_step aborts on non-finite gradients") {
  Vector theta = Vector::Ones(3);
  Vector grad = Vector::Ones(3);
  grad[1] = std::numeric_limits<double>::infinity();
  OptimizerState st;
  CHECK_THROWS_AS(sgd_nesterov_step(theta, grad, st, 1), NumericError);
  CHECK(theta.isApprox(Vector::Ones(3)));  // step aborted, params untouched
}
