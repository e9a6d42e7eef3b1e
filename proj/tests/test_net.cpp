#include "distillab/net.hpp"

#include <cmath>

#include "distillab/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace distillab;

namespace {

NetworkSpec two_layer_spec(Activation act = Activation::kTanh) {
  const int hidden[] = {6};
  return NetworkSpec::mlp(4, hidden, 3, act);
}

Matrix random_batch(Rng& rng, int n, int dim, double nudge = 0.0) {
  Matrix batch(n, dim);
  for (double& v : batch.data) {
    v = rng.uniform(-1.0, 1.0);
    if (nudge > 0.0 && std::abs(v) < nudge) v += v < 0 ? -nudge : nudge;
  }
  return batch;
}

Matrix random_targets(Rng& rng, int n, int k) {
  Matrix targets(n, k);
  for (int i = 0; i < n; ++i) {
    Vec p = testutil::random_prob(rng, k);
    std::copy(p.begin(), p.end(), targets.row(i).begin());
  }
  return targets;
}

}  // namespace

TEST_CASE("network spec validation") {
  NetworkSpec spec = two_layer_spec();
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.has_hidden_layer());

  NetworkSpec broken = spec;
  broken.layers[1].in_dim = 5;
  CHECK_THROWS_WITH_AS(broken.validate(), doctest::Contains("spec-error"),
                       DomainError);

  NetworkSpec bad_final = spec;
  bad_final.layers.back().activation = Activation::kRelu;
  CHECK_THROWS_AS(bad_final.validate(), DomainError);

  NetworkSpec wrong_k = spec;
  wrong_k.num_classes = 4;
  CHECK_THROWS_AS(wrong_k.validate(), DomainError);
}

TEST_CASE("init_model is deterministic and respects the init bound") {
  NetworkSpec spec = two_layer_spec();
  Model a = init_model(spec, 42);
  Model b = init_model(spec, 42);
  CHECK(a.parameter_hash() == b.parameter_hash());
  for (size_t l = 0; l < a.weights.size(); ++l) {
    CHECK(a.weights[l].data == b.weights[l].data);
    CHECK(a.biases[l] == b.biases[l]);
  }

  Model c = init_model(spec, 43);
  CHECK(a.parameter_hash() != c.parameter_hash());

  // dense(4,3): every weight magnitude <= sqrt(6/7), biases zero
  const int no_hidden[] = {};
  NetworkSpec tiny;
  tiny.input_dim = 4;
  tiny.num_classes = 3;
  tiny.layers.push_back({4, 3, Activation::kNone, false, 1.0});
  (void)no_hidden;
  Model m = init_model(tiny, 7);
  const double bound = std::sqrt(6.0 / 7.0);
  for (double w : m.weights[0].data) CHECK(std::abs(w) <= bound);
  for (double b2 : m.biases[0]) CHECK(b2 == 0.0);
}

TEST_CASE("forward with zero parameters gives uniform softmax") {
  NetworkSpec spec = two_layer_spec();
  Model model = init_model(spec, 1);
  for (Matrix& w : model.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  Rng rng(3);
  Matrix batch = random_batch(rng, 5, 4);
  ForwardRecord record = forward(model, batch);
  for (int i = 0; i < 5; ++i) {
    for (double z : record.logits().row(i)) CHECK(z == 0.0);
  }
}

TEST_CASE("single dense layer forward is the affine map") {
  NetworkSpec spec;
  spec.input_dim = 2;
  spec.num_classes = 2;
  spec.layers.push_back({2, 2, Activation::kNone, false, 1.0});
  Model model = init_model(spec, 0);
  model.weights[0].at(0, 0) = 1.5;
  model.weights[0].at(0, 1) = -0.5;
  model.weights[0].at(1, 0) = 0.25;
  model.weights[0].at(1, 1) = 2.0;
  model.biases[0] = {0.1, -0.2};

  Matrix batch(1, 2);
  batch.at(0, 0) = 3.0;
  batch.at(0, 1) = -1.0;
  ForwardRecord record = forward(model, batch);
  CHECK(record.logits().at(0, 0) ==
        doctest::Approx(1.5 * 3.0 + (-0.5) * (-1.0) + 0.1).epsilon(1e-15));
  CHECK(record.logits().at(0, 1) ==
        doctest::Approx(0.25 * 3.0 + 2.0 * (-1.0) - 0.2).epsilon(1e-15));
  // penultimate of a linear model is the input
  CHECK(record.penultimate().at(0, 0) == 3.0);
}

TEST_CASE("forward keeps batch order") {
  NetworkSpec spec = two_layer_spec();
  Model model = init_model(spec, 5);
  Rng rng(9);
  Matrix batch = random_batch(rng, 7, 4);
  ForwardRecord whole = forward(model, batch);
  for (int i = 0; i < batch.rows; ++i) {
    Matrix single(1, 4);
    std::copy(batch.row(i).begin(), batch.row(i).end(),
              single.row(0).begin());
    ForwardRecord one = forward(model, single);
    for (int c = 0; c < 3; ++c) {
      CHECK(whole.logits().at(i, c) == one.logits().at(0, c));
    }
  }

  Matrix wrong(2, 3);
  CHECK_THROWS_WITH_AS(forward(model, wrong), doctest::Contains("shape-error"),
                       DomainError);
}

TEST_CASE("backward: zero upstream gradient gives zero parameter gradients") {
  NetworkSpec spec = two_layer_spec();
  Model model = init_model(spec, 2);
  Rng rng(4);
  Matrix batch = random_batch(rng, 3, 4);
  ForwardRecord record = forward(model, batch);
  Matrix upstream(3, 3);
  Gradients grads = backward(model, record, upstream);
  for (const Matrix& g : grads.weights) {
    for (double v : g.data) CHECK(v == 0.0);
  }
}

TEST_CASE("backward matches finite differences on a 2-layer net") {
  NetworkSpec spec = two_layer_spec(Activation::kTanh);
  Model model = init_model(spec, 11);
  Rng rng(12);
  Matrix batch = random_batch(rng, 6, 4);
  TargetCrossEntropyLoss loss(random_targets(rng, 6, 3));
  CHECK(grad_check(model, loss, batch, 1e-5, 20, 99) <= 1e-4);
}

TEST_CASE("duplicating the whole batch leaves the mean gradient unchanged") {
  NetworkSpec spec = two_layer_spec();
  Model model = init_model(spec, 21);
  Rng rng(22);
  Matrix batch = random_batch(rng, 4, 4);
  Matrix doubled(8, 4);
  for (int i = 0; i < 8; ++i) {
    auto src = batch.row(i % 4);
    std::copy(src.begin(), src.end(), doubled.row(i).begin());
  }
  Matrix targets = random_targets(rng, 4, 3);
  TargetCrossEntropyLoss loss(targets);

  auto upstream_for = [&](const ForwardRecord& record, int n) {
    Matrix upstream(n, 3);
    for (int i = 0; i < n; ++i) {
      Vec g = loss.grad(record.logits().row(i), i % 4);
      std::copy(g.begin(), g.end(), upstream.row(i).begin());
    }
    return upstream;
  };
  ForwardRecord r1 = forward(model, batch);
  Gradients g1 = backward(model, r1, upstream_for(r1, 4));
  ForwardRecord r2 = forward(model, doubled);
  Gradients g2 = backward(model, r2, upstream_for(r2, 8));
  for (size_t l = 0; l < g1.weights.size(); ++l) {
    for (size_t i = 0; i < g1.weights[l].data.size(); ++i) {
      CHECK(g1.weights[l].data[i] ==
            doctest::Approx(g2.weights[l].data[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward rejects stale forward records") {
  NetworkSpec spec = two_layer_spec();
  Model model = init_model(spec, 31);
  Rng rng(32);
  Matrix batch = random_batch(rng, 2, 4);
  ForwardRecord record = forward(model, batch);
  Matrix upstream(2, 3, 0.1);

  Gradients grads = backward(model, record, upstream);
  SgdState state = SgdState::zeros_like(model);
  TrainConfig cfg;
  sgd_step(model, grads, state, cfg, 0);
  CHECK_THROWS_WITH_AS(backward(model, record, upstream),
                       doctest::Contains("cache-error"), DomainError);
}

TEST_CASE("sgd_step basics") {
  NetworkSpec spec = two_layer_spec();
  Model model = init_model(spec, 41);
  Model before = model;
  SgdState state = SgdState::zeros_like(model);
  Gradients grads;
  for (const LayerSpec& layer : spec.layers) {
    grads.weights.emplace_back(layer.out_dim, layer.in_dim, 0.5);
    grads.biases.emplace_back(static_cast<size_t>(layer.out_dim), 0.5);
  }

  SUBCASE("lr = 0 leaves parameters unchanged") {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    sgd_step(model, grads, state, cfg, 0);
    CHECK(model.parameter_hash() == before.parameter_hash());
    CHECK(model.revision == before.revision + 1);
  }

  SUBCASE("no momentum, no decay: w - lr*g") {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    sgd_step(model, grads, state, cfg, 0);
    CHECK(model.weights[0].data[0] ==
          doctest::Approx(before.weights[0].data[0] - 0.1 * 0.5).epsilon(1e-15));
  }

  SUBCASE("momentum buffer follows the hand recursion") {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.0;
    const double w0 = before.weights[0].data[0];
    const double g = 0.5;
    sgd_step(model, grads, state, cfg, 0);
    CHECK(model.weights[0].data[0] == doctest::Approx(w0 - 0.1 * g).epsilon(1e-15));
    sgd_step(model, grads, state, cfg, 0);
    // buffer before the second update is g*(1 + 0.9)
    CHECK(state.w_velocity[0].data[0] == doctest::Approx(1.9 * g).epsilon(1e-15));
    CHECK(model.weights[0].data[0] ==
          doctest::Approx(w0 - 0.1 * g - 0.1 * 1.9 * g).epsilon(1e-15));
  }

  SUBCASE("non-finite gradient aborts with divergence-error") {
    grads.weights[0].data[3] = std::nan("");
    TrainConfig cfg;
    CHECK_THROWS_WITH_AS(sgd_step(model, grads, state, cfg, 0),
                         doctest::Contains("divergence-error"), DomainError);
  }
}

TEST_CASE("learning rate schedule is piecewise constant") {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.decay_epochs = {10, 20};
  cfg.decay_factor = 0.1;
  CHECK(learning_rate_at(cfg, 0) == doctest::Approx(0.1));
  CHECK(learning_rate_at(cfg, 9) == doctest::Approx(0.1));
  CHECK(learning_rate_at(cfg, 10) == doctest::Approx(0.01));
  CHECK(learning_rate_at(cfg, 25) == doctest::Approx(0.001));
}

TEST_CASE("grad_check behaves as a truncation-order oracle") {
  Rng rng(52);

  SUBCASE("linear model with cross-entropy is near machine accuracy") {
    NetworkSpec spec;
    spec.input_dim = 3;
    spec.num_classes = 3;
    spec.layers.push_back({3, 3, Activation::kNone, false, 1.0});
    Model model = init_model(spec, 51);
    Matrix batch = random_batch(rng, 8, 3);
    TargetCrossEntropyLoss loss(random_targets(rng, 8, 3));
    CHECK(grad_check(model, loss, batch, 1e-5, 60, 1) <= 1e-6);
  }

  SUBCASE("relu net passes once inputs sit away from the kinks") {
    const int hidden[] = {8, 8};
    NetworkSpec spec = NetworkSpec::mlp(4, hidden, 3, Activation::kRelu);
    Model model = init_model(spec, 53);
    Matrix batch = random_batch(rng, 6, 4, /*nudge=*/0.05);
    TargetCrossEntropyLoss loss(random_targets(rng, 6, 3));
    CHECK(grad_check(model, loss, batch, 1e-5, 50, 2) <= 1e-4);
  }

  SUBCASE("larger step reports larger error on a smooth net") {
    NetworkSpec spec = two_layer_spec(Activation::kTanh);
    Model model = init_model(spec, 55);
    Matrix batch = random_batch(rng, 6, 4);
    TargetCrossEntropyLoss loss(random_targets(rng, 6, 3));
    const double coarse = grad_check(model, loss, batch, 1e-3, 40, 3);
    const double fine = grad_check(model, loss, batch, 1e-5, 40, 3);
    CHECK(coarse > fine);
  }
}

TEST_CASE("checkpoint round trip is bitwise exact") {
  const int hidden[] = {5, 4};
  NetworkSpec spec = NetworkSpec::mlp(3, hidden, 2, Activation::kRelu);
  spec.layers[1].binary_weights = true;
  spec.layers[1].activation = Activation::kBinarySign;
  Model model = init_model(spec, 77);
  const auto path = std::filesystem::temp_directory_path() / "distillab_ckpt_test.ckpt";
  save_checkpoint(model, 17, path);
  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.epoch == 17);
  CHECK(loaded.model.seed == 77);
  CHECK(loaded.model.spec.layers[1].binary_weights);
  CHECK(loaded.model.spec.layers[1].activation == Activation::kBinarySign);
  CHECK(loaded.model.parameter_hash() == model.parameter_hash());
  std::filesystem::remove(path);

  CHECK_THROWS_WITH_AS(load_checkpoint("/nonexistent/x.ckpt"),
                       doctest::Contains("data-error"), DomainError);
}
