#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "mlnet/model.hpp"
#include "test_support.hpp"

using namespace mlnet;
using test_support::random_matrix;
using test_support::small_network;

TEST_CASE("extract_features zero-weight extractor gives zero features") {
  NetworkParams net = small_network(4, 3, 2, 1);
  for (auto& l : net.extractor.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  Rng rng(2);
  CHECK(extract_features(net, random_matrix(5, 4, rng)).isZero(0.0));
}

TEST_CASE("extract_features batch-of-one equals single-row slice") {
  NetworkParams net = small_network(4, 3, 3, 3);
  Rng rng(4);
  Matrix batch = random_matrix(6, 4, rng);
  Matrix all = extract_features(net, batch);
  for (Index r = 0; r < batch.rows(); ++r) {
    Matrix one = extract_features(net, batch.row(r));
    CHECK((one.row(0) - all.row(r)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("extract_features matches the raw engine forward pass") {
  NetworkParams net = small_network(5, 4, 2, 5);
  Rng rng(6);
  Matrix batch = random_matrix(3, 5, rng);
  Matrix direct = mlp_forward(net.extractor, batch).output();
  CHECK(extract_features(net, batch).isApprox(direct));
  CHECK_THROWS_AS(extract_features(net, Matrix::Zero(2, 7)), ShapeError);
}

TEST_CASE("closed_probs uniform on equal logits and sums to one") {
  const Index k = 5;
  NetworkParams net = small_network(4, 3, k, 7);
  net.closed_head.weight.setZero();
  net.closed_head.bias.setConstant(2.5);
  Rng rng(8);
  Matrix probs = closed_probs(net, random_matrix(4, 3, rng));
  for (Index r = 0; r < probs.rows(); ++r) {
    CHECK(probs.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (Index c = 0; c < k; ++c)
      CHECK(probs(r, c) == doctest::Approx(1.0 / k).epsilon(1e-12));
  }
}

TEST_CASE("closed softmax of logits (10,0,0)") {
  Matrix logits(1, 3);
  logits << 10.0, 0.0, 0.0;
  Matrix p = softmax_rows(logits);
  CHECK(p(0, 0) == doctest::Approx(0.999909).epsilon(1e-5));
  CHECK(p(0, 1) == doctest::Approx(4.5396e-5).epsilon(1e-4));
  CHECK(p(0, 2) == doctest::Approx(4.5396e-5).epsilon(1e-4));
}

TEST_CASE("closed_probs are shift invariant") {
  NetworkParams net = small_network(4, 3, 4, 9);
  Rng rng(10);
  Matrix z = extract_features(net, random_matrix(3, 4, rng));
  Matrix base = closed_probs(net, z);
  net.closed_head.bias.array() += 17.0;  // shifts every logit of every row
  Matrix shifted = closed_probs(net, z);
  CHECK(base.isApprox(shifted, 1e-12));
}

TEST_CASE("open_scores is 0.5 at equal logits and 0.75 at gap ln 3") {
  NetworkParams net = small_network(4, 3, 2, 11);
  net.open_heads[0].weight.setZero();
  net.open_heads[0].bias.setZero();  // pos == neg
  net.open_heads[1].weight.setZero();
  net.open_heads[1].bias << std::log(3.0), 0.0;  // gap = ln 3
  Rng rng(12);
  Matrix scores = open_scores(net, random_matrix(2, 3, rng));
  CHECK(scores(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(scores(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("open scores stay strictly inside (0,1) and pair sums to 1") {
  NetworkParams net = small_network(6, 4, 3, 13);
  Rng rng(14);
  Matrix z = extract_features(net, random_matrix(8, 6, rng, 3.0));
  Matrix scores = open_scores(net, z);
  Matrix gaps = open_logit_gaps_of(net, z);
  for (Index r = 0; r < scores.rows(); ++r) {
    for (Index c = 0; c < scores.cols(); ++c) {
      CHECK(scores(r, c) > 0.0);
      CHECK(scores(r, c) < 1.0);
      // two-way softmax: the negative component is the complement
      const double neg = stable_sigmoid(-gaps(r, c));
      CHECK(std::abs(scores(r, c) + neg - 1.0) < 1e-15);
    }
  }
}

TEST_CASE("softmax directions: closed is row-coupled, open is per-head") {
  NetworkParams net = small_network(5, 4, 3, 15);
  Rng rng(16);
  Matrix x = random_matrix(1, 5, rng);
  Matrix z = extract_features(net, x);
  Matrix closed0 = closed_probs(net, z);
  Matrix open0 = open_scores(net, z);

  NetworkParams bumped = net;
  bumped.closed_head.bias[1] += 0.3;
  Matrix closed1 = closed_probs(bumped, z);
  for (Index c = 0; c < 3; ++c)
    CHECK(std::abs(closed1(0, c) - closed0(0, c)) > 1e-9);

  bumped = net;
  bumped.open_heads[1].bias[0] += 0.3;
  Matrix open1 = open_scores(bumped, z);
  CHECK(open1(0, 0) == open0(0, 0));
  CHECK(open1(0, 2) == open0(0, 2));
  CHECK(std::abs(open1(0, 1) - open0(0, 1)) > 1e-9);
}

TEST_CASE("checkpoint round trip is exact") {
  NetworkParams net = small_network(5, 4, 3, 17);
  const std::string path =
      (std::filesystem::temp_directory_path() / "mlnet_ckpt_test.txt").string();
  save_checkpoint(path, net, 42);
  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.seed == 42);
  CHECK(loaded.net.num_classes() == 3);
  CHECK(loaded.net.feature_dim() == 4);
  CHECK(loaded.net.extractor.activation == Activation::Tanh);

  Vector a = network_flatten(net);
  Vector b = network_flatten(loaded.net);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);  // %.17g is lossless
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects foreign files") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "mlnet_bad_ckpt.txt").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("something else entirely\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("flatten and unflatten are inverse") {
  NetworkParams net = small_network(5, 4, 3, 18);
  Vector flat = network_flatten(net);
  CHECK(flat.size() == network_param_count(net));
  NetworkParams other = small_network(5, 4, 3, 19);
  network_unflatten(other, flat);
  CHECK(network_flatten(other).isApprox(flat));
  // extractor group comes first in the flat layout
  CHECK(network_extractor_param_count(net) ==
        mlp_param_count(net.extractor));
}
