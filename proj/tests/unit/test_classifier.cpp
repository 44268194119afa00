#include "doctest.h"
#include "feddiv/classifier.hpp"
#include "feddiv/dataset.hpp"
#include "feddiv/rng.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace feddiv;

TEST_CASE("zero parameters give zero logits") {
  RngStream rng(1);
  auto p = ModelParams::zeros_like(init_params(3, {5}, 4, rng));
  CHECK(forward_logits(p, Vector::Ones(3)).isZero());
}

TEST_CASE("linear model selects a weight column") {
  RngStream rng(2);
  auto p = oracle::random_params(rng, 3, {}, 3);
  Vector x = Vector::Zero(3);
  x[1] = 1.0;
  Vector expected = p.layers[0].weight.col(1) + p.layers[0].bias;
  CHECK((forward_logits(p, x) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("forward pass matches the element-wise oracle") {
  RngStream rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracle::random_params(rng, 4, {7, 5}, 3);
    Vector x(4);
    for (int j = 0; j < 4; ++j) x[j] = rng.normal();
    auto z = forward_logits(p, x);
    auto o = oracle::forward(p, x);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(z[c] - o[c]) < 1e-10);
  }
}

TEST_CASE("forward rejects a dimension mismatch") {
  RngStream rng(4);
  auto p = init_params(2, {3}, 2, rng);
  CHECK_THROWS_AS(forward_logits(p, Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("softmax cases") {
  auto u = softmax(Vector::Constant(5, 3.0));
  for (int c = 0; c < 5; ++c) CHECK(u[c] == doctest::Approx(0.2));
  Vector big(2);
  big << 1000.0, 0.0;
  auto s = softmax(big);
  CHECK(std::isfinite(s[0]));
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(s[1] < 1e-300);
  Vector z(3);
  z << 1.0, 2.0, 3.0;
  const double den = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  auto p = softmax(z);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(p[c] - std::exp(z[c]) / den) < 1e-12);
}

TEST_CASE("cross entropy cases") {
  RngStream rng(5);
  auto zero = ModelParams::zeros_like(init_params(2, {4}, 5, rng));
  for (int y = 0; y < 5; ++y) CHECK(cross_entropy(zero, Vector::Ones(2), y) == doctest::Approx(std::log(5.0)));

  auto confident = ModelParams::zeros_like(init_params(2, {}, 3, rng));
  confident.layers[0].bias[1] = 50.0;
  CHECK(cross_entropy(confident, Vector::Zero(2), 1) < 1e-12);

  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracle::random_params(rng, 2, {6}, 4);
    Vector x(2);
    x << rng.normal(), rng.normal();
    const int y = static_cast<int>(rng.index(4));
    CHECK(std::abs(cross_entropy(p, x, y) + std::log(predict_proba(p, x)[y])) < 1e-9);
  }
  CHECK_THROWS(cross_entropy(zero, Vector::Ones(2), 5));
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  Vector v(4);
  v << 1.0, 3.0, 3.0, 0.0;
  CHECK(argmax(v) == 1);
  CHECK(argmax(Vector::Zero(3)) == 0);
}

TEST_CASE("mixup endpoints") {
  Vector a = Vector::Constant(2, 1.0), b = Vector::Constant(2, -1.0);
  auto s1 = mixup_pair(a, 0, b, 2, 1.0, 3);
  CHECK(s1.x == a);
  CHECK(s1.y == Vector::Unit(3, 0));
  auto s0 = mixup_pair(a, 0, b, 2, 0.0, 3);
  CHECK(s0.x == b);
  CHECK(s0.y == Vector::Unit(3, 2));
  auto same = mixup_pair(a, 1, b, 1, 0.5, 3);
  CHECK(same.y == Vector::Unit(3, 1));
  CHECK(same.x.isZero());
}

TEST_CASE("loss and gradient vanish at the optimum") {
  RngStream rng(6);
  auto p = ModelParams::zeros_like(init_params(2, {}, 2, rng));
  p.layers[0].bias[0] = 60.0;
  std::vector<MixedSample> batch{{Vector::Zero(2), Vector::Unit(2, 0)}};
  auto lg = batch_loss(p, batch, 0.0);
  CHECK(lg.loss < 1e-12);
  CHECK(lg.grad.flatten().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("regularizer vanishes for uniform predictions") {
  RngStream rng(7);
  auto p = ModelParams::zeros_like(init_params(2, {3}, 4, rng));
  auto batch = oracle::random_batch(rng, 5, 2, 4);
  const double with = batch_loss(p, batch, 2.0).loss;
  const double without = batch_loss(p, batch, 0.0).loss;
  CHECK(std::abs(with - without) < 1e-12);
}

TEST_CASE("batch loss matches the recomputed loss") {
  RngStream rng(8);
  auto p = oracle::random_params(rng, 3, {5}, 4);
  auto batch = oracle::random_batch(rng, 6, 3, 4);
  CHECK(batch_loss(p, batch, 0.7).loss == doctest::Approx(oracle::loss(p, batch, 0.7)).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
  RngStream rng(9);
  for (int trial = 0; trial < 25; ++trial) {
    const int in = 1 + static_cast<int>(rng.index(4));
    const int classes = 2 + static_cast<int>(rng.index(4));
    std::vector<int> hidden;
    for (std::size_t h = rng.index(3); h > 0; --h) hidden.push_back(2 + static_cast<int>(rng.index(6)));
    auto p = oracle::random_params(rng, in, hidden, classes, 0.8);
    auto batch = oracle::random_batch(rng, 1 + static_cast<int>(rng.index(10)), in, classes);
    const double eta = trial % 3 == 0 ? 0.0 : rng.uniform(0.0, 3.0);
    CHECK(oracle::max_gradient_error(p, batch, eta) < 1e-5);
  }
}

TEST_CASE("zero learning rate and zero epochs are identities") {
  RngStream rng(10);
  auto data = make_blobs(60, 2, 2, 4.0, rng);
  auto p = init_params(2, {4}, 2, rng);
  TrainOptions opts;
  opts.learning_rate = 0.0;
  opts.epochs = 3;
  CHECK(local_train(p, training_pairs(data), opts, rng).flatten() == p.flatten());
  opts.learning_rate = 0.1;
  opts.epochs = 0;
  CHECK(local_train(p, training_pairs(data), opts, rng).flatten() == p.flatten());
}

TEST_CASE("local training fits separable blobs") {
  RngStream rng(11);
  auto data = make_blobs(400, 2, 2, 6.0, rng);
  auto p = init_params(2, {16}, 2, rng);
  TrainOptions opts;
  opts.epochs = 5;
  opts.learning_rate = 0.003;
  auto trained = local_train(p, training_pairs(data), opts, rng);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    hit += argmax(predict_proba(trained, data.features[i])) == data.true_labels[i];
  CHECK(static_cast<double>(hit) / data.size() >= 0.95);
}

TEST_CASE("per-sample losses") {
  RngStream rng(12);
  auto data = make_blobs(50, 3, 2, 4.0, rng);
  auto zero = ModelParams::zeros_like(init_params(2, {4}, 3, rng));
  for (double l : per_sample_losses(zero, data)) CHECK(l == doctest::Approx(std::log(3.0)));
  auto p = oracle::random_params(rng, 2, {4}, 3);
  auto losses = per_sample_losses(p, data);
  for (std::size_t i = 0; i < data.size(); ++i)
    CHECK(losses[i] == cross_entropy(p, data.features[i], data.given_labels[i]));
}

TEST_CASE("corrupted samples have larger loss after training") {
  RngStream rng(13);
  auto data = make_blobs(600, 3, 2, 6.0, rng);
  for (std::size_t i = 0; i < data.size(); i += 5) {
    data.given_labels[i] = (data.true_labels[i] + 1) % 3;
    data.clean_mask[i] = false;
  }
  TrainOptions opts;
  opts.epochs = 5;
  opts.learning_rate = 0.003;
  auto trained = local_train(init_params(2, {16}, 3, rng), training_pairs(data), opts, rng);
  auto losses = per_sample_losses(trained, data);
  double clean = 0.0, noisy = 0.0;
  std::size_t nc = 0, nn = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.clean_mask[i]) clean += losses[i], ++nc;
    else noisy += losses[i], ++nn;
  }
  CHECK(noisy / nn > clean / nc);
}

TEST_CASE("flatten and assign round-trip") {
  RngStream rng(14);
  auto p = oracle::random_params(rng, 3, {4, 2}, 5);
  auto q = ModelParams::zeros_like(p);
  q.assign_flat(p.flatten());
  CHECK(q.flatten() == p.flatten());
  CHECK(p.same_shape(q));
  CHECK(p.num_parameters() == 3 * 4 + 4 + 4 * 2 + 2 + 2 * 5 + 5);
  CHECK_THROWS(q.assign_flat(Vector::Zero(3)));
}
