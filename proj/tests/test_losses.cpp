#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "colonnet/losses.hpp"
#include "oracles.hpp"

using namespace colonnet;
using Tensord = Tensor<double>;

namespace {

Tensord from_values(const Shape& shape, const std::vector<double>& values) {
  Tensord t(shape);
  REQUIRE(t.size() == static_cast<Eigen::Index>(values.size()));
  std::copy(values.begin(), values.end(), t.data());
  return t;
}

std::vector<double> to_values(const Tensord& t) {
  return std::vector<double>(t.data(), t.data() + t.size());
}

FocalTverskyConfig default_ft() {
  return FocalTverskyConfig{};
}

}  // namespace

TEST_CASE("mse examples") {
  Tensord a = from_values({4}, {0.3, 0.4, 0.5, 0.6});
  CHECK(mse_loss(a, a) == 0.0);

  Tensord zeros = from_values({4}, {0, 0, 0, 0});
  Tensord ones = from_values({4}, {1, 1, 1, 1});
  CHECK(mse_loss(zeros, ones) == doctest::Approx(1.0).epsilon(1e-12));

  Tensord p = from_values({4}, {0.1, 0.2, 0.4, 0.6});
  Tensord t = from_values({4}, {0.2, 0.2, 0.5, 0.6});
  CHECK(mse_loss(p, t) == doctest::Approx(0.005).epsilon(1e-12));
}

TEST_CASE("bce examples") {
  CHECK(bce_loss(0.5, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(0.9, 0.0) == doctest::Approx(-std::log(0.1)).epsilon(1e-12));
  CHECK(bce_loss(1.0 - 1e-9, 1.0) < 1e-6);
  // Clipping keeps the loss finite at hard-wrong predictions.
  const double hard_wrong = bce_loss(0.0, 1.0);
  CHECK(std::isfinite(hard_wrong));
  CHECK(hard_wrong == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
}

TEST_CASE("focal tversky worked 2x2 example") {
  Tensord pred = from_values({2, 2}, {0.8, 0.2, 0.6, 0.1});
  Tensord truth = from_values({2, 2}, {1, 0, 1, 0});
  const auto cfg = default_ft();
  CHECK(tversky_index(pred.array(), truth.array(), cfg) ==
        doctest::Approx(0.732984432992443).epsilon(1e-12));
  CHECK(focal_tversky_loss(pred, truth, cfg) ==
        doctest::Approx(0.171942053272629).epsilon(1e-12));
}

TEST_CASE("focal tversky edge cases") {
  Tensord truth = from_values({2, 2}, {1, 0, 1, 0});
  CHECK(focal_tversky_loss(truth, truth, default_ft()) ==
        doctest::Approx(0.0).epsilon(1e-9));

  Tensord inverted = from_values({2, 2}, {0, 1, 0, 1});
  CHECK(focal_tversky_loss(inverted, truth, default_ft()) ==
        doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("loss oracle equivalence on random tensors") {
  Rng rng(77);
  const auto cfg = default_ft();
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index h = 2 + static_cast<Eigen::Index>(rng.uniform_index(5));
    const Eigen::Index w = 2 + static_cast<Eigen::Index>(rng.uniform_index(5));
    Tensord pred({h, w}), truth({h, w}), target({h, w});
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      pred[i] = rng.uniform(0.001, 0.999);
      truth[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
      target[i] = rng.uniform();
    }
    CHECK(oracles::rel_err(mse_loss(pred, target),
                           oracles::naive_mse(to_values(pred), to_values(target))) <=
          1e-12);
    CHECK(oracles::rel_err(bce_loss(pred, truth),
                           oracles::naive_bce(to_values(pred), to_values(truth))) <=
          1e-12);
    CHECK(oracles::rel_err(
              focal_tversky_loss(pred, truth, cfg),
              oracles::naive_focal_tversky(to_values(pred), to_values(truth),
                                           cfg.alpha, cfg.beta, cfg.gamma,
                                           cfg.epsilon)) <= 1e-12);
  }
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(88);
  const auto cfg = default_ft();
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.uniform_index(6));
    Tensord pred({n, n}), truth({n, n}), target({n, n});
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      pred[i] = rng.uniform(0.05, 0.95);
      truth[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      target[i] = rng.uniform();
    }

    Tensord g_mse = mse_loss_grad(pred, target);
    Tensord g_bce = bce_loss_grad(pred, truth);
    Tensord g_ft = focal_tversky_loss_grad(pred, truth, cfg);
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      auto f_mse = [&]() { return mse_loss(pred, target); };
      auto f_bce = [&]() { return bce_loss(pred, truth); };
      auto f_ft = [&]() { return focal_tversky_loss(pred, truth, cfg); };
      CHECK(oracles::rel_err(g_mse[i], oracles::central_diff(f_mse, pred[i], 1e-4)) <=
            1e-3);
      CHECK(oracles::rel_err(g_bce[i], oracles::central_diff(f_bce, pred[i], 1e-4)) <=
            1e-3);
      CHECK(oracles::rel_err(g_ft[i], oracles::central_diff(f_ft, pred[i], 1e-4)) <=
            1e-3);
    }
  }
}

TEST_CASE("focal tversky is permutation invariant") {
  Rng rng(99);
  Tensord pred({12}), truth({12});
  for (Eigen::Index i = 0; i < 12; ++i) {
    pred[i] = rng.uniform(0.01, 0.99);
    truth[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  std::vector<Eigen::Index> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm, rng);
  Tensord pred_p({12}), truth_p({12});
  for (Eigen::Index i = 0; i < 12; ++i) {
    pred_p[i] = pred[perm[static_cast<std::size_t>(i)]];
    truth_p[i] = truth[perm[static_cast<std::size_t>(i)]];
  }
  const auto cfg = default_ft();
  CHECK(focal_tversky_loss(pred, truth, cfg) ==
        doctest::Approx(focal_tversky_loss(pred_p, truth_p, cfg)).epsilon(1e-12));
}

TEST_CASE("focal tversky monotonicity") {
  Rng rng(111);
  const auto cfg = default_ft();
  for (int trial = 0; trial < 30; ++trial) {
    Tensord pred({9}), truth({9});
    for (Eigen::Index i = 0; i < 9; ++i) {
      pred[i] = rng.uniform(0.05, 0.9);
      truth[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    const double before = focal_tversky_loss(pred, truth, cfg);
    const auto k = static_cast<Eigen::Index>(rng.uniform_index(9));
    Tensord bumped = pred;
    bumped[k] = std::min(0.999, pred[k] + 0.05);
    const double after = focal_tversky_loss(bumped, truth, cfg);
    if (truth[k] == 1.0) {
      CHECK(after <= before + 1e-12);
    } else {
      CHECK(after >= before - 1e-12);
    }
  }
}

TEST_CASE("losses are non-negative and focal tversky bounded by one") {
  Rng rng(222);
  const auto cfg = default_ft();
  for (int trial = 0; trial < 30; ++trial) {
    Tensord pred({8}), truth({8}), target({8});
    for (Eigen::Index i = 0; i < 8; ++i) {
      pred[i] = rng.uniform();
      truth[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      target[i] = rng.uniform();
    }
    CHECK(mse_loss(pred, target) >= 0.0);
    CHECK(bce_loss(pred, truth) >= 0.0);
    const double ft = focal_tversky_loss(pred, truth, cfg);
    CHECK(ft >= 0.0);
    CHECK(ft <= 1.0);
  }
}

TEST_CASE("batch focal tversky averages per-image losses") {
  Rng rng(333);
  const auto cfg = default_ft();
  const Eigen::Index b = 3, h = 4, w = 5;
  Tensor<double> pred({b, h, w, 1}), truth({b, h, w});
  for (Eigen::Index i = 0; i < pred.size(); ++i) pred[i] = rng.uniform(0.05, 0.95);
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    truth[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }

  double manual = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    Tensord p({h, w}), t({h, w});
    for (Eigen::Index j = 0; j < h * w; ++j) {
      p[j] = pred[i * h * w + j];
      t[j] = truth[i * h * w + j];
    }
    manual += focal_tversky_loss(p, t, cfg);
  }
  manual /= static_cast<double>(b);
  CHECK(focal_tversky_batch_loss(pred, truth, cfg) ==
        doctest::Approx(manual).epsilon(1e-12));

  // Batch gradient agrees with finite differences through the batch loss.
  Tensord grad = focal_tversky_batch_loss_grad(pred, truth, cfg);
  auto f = [&]() { return focal_tversky_batch_loss(pred, truth, cfg); };
  for (Eigen::Index i = 0; i < pred.size(); i += 7) {
    CHECK(oracles::rel_err(grad[i], oracles::central_diff(f, pred[i], 1e-4)) <= 1e-3);
  }
}
