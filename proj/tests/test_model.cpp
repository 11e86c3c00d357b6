// iflf/tests/test_model.cpp

// Copyright 2026  IFLF Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"

#include "iflf/losses.hpp"
#include "iflf/model.hpp"
#include "iflf/nn.hpp"
#include "iflf/optim.hpp"

namespace iflf {
namespace {

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() /
           ("iflf_model_" + std::to_string(::getpid()));
  std::filesystem::create_directories(p);
  return p;
}

double rel_err(double a, double b) {
  const double denom = std::max(1.0, std::max(std::abs(a), std::abs(b)));
  return std::abs(a - b) / denom;
}

// Scalar objective for gradient checking: sum of features weighted by R.
double projected_loss(Extractor *ex, const Batch &x,
                      const Eigen::MatrixXd &r) {
  return (ex->forward(x, false, nullptr).array() * r.array()).sum();
}

Batch random_batch(std::size_t n, int channels, int len, Rng *rng) {
  Batch b;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::MatrixXd w(channels, len);
    for (Eigen::Index c = 0; c < w.rows(); ++c) {
      for (Eigen::Index t = 0; t < w.cols(); ++t) w(c, t) = rng->normal();
    }
    b.push_back(std::move(w));
  }
  return b;
}

// Central-difference check of every parameter entry against the accumulated
// analytic gradients.  Assumes grads are fresh (zero_grad + one backward).
void check_param_grads(Extractor *ex, const Batch &x,
                       const Eigen::MatrixXd &r, double tol) {
  ex->zero_grad();
  ex->forward(x, false, nullptr);
  ex->backward(r);
  for (Tensor *t : ex->params()) {
    for (Eigen::Index i = 0; i < t->value.size(); i += 7) {
      const double keep = t->value.data()[i];
      const double h = 1e-5 * std::max(1.0, std::abs(keep));
      t->value.data()[i] = keep + h;
      const double up = projected_loss(ex, x, r);
      t->value.data()[i] = keep - h;
      const double dn = projected_loss(ex, x, r);
      t->value.data()[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      INFO(t->name, " entry ", i);
      CHECK(rel_err(fd, t->grad.data()[i]) < tol);
    }
  }
}

ExtractorSpec tiny_recurrent_spec() {
  ExtractorSpec spec;
  spec.variant = "conv-recurrent";
  spec.input_channels = 2;
  spec.window_len = 12;
  spec.conv_layers = 2;
  spec.conv_channels = 3;
  spec.kernel = 3;
  spec.recurrent_layers = 2;
  spec.hidden = 4;
  spec.dropout = 0.25;
  return spec;
}

ExtractorSpec tiny_conv_spec() {
  ExtractorSpec spec;
  spec.variant = "conv-only";
  spec.input_channels = 2;
  spec.window_len = 12;
  spec.conv_layers = 2;
  spec.conv_channels = 3;
  spec.kernel = 3;
  spec.fc1 = 6;
  spec.fc2 = 5;
  return spec;
}

}  // namespace

TEST_CASE("softmax of zeros is uniform") {
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(4, 3);
  const Eigen::MatrixXd p = softmax_cols(logits);
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      CHECK(p(i, j) == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
  Eigen::MatrixXd two = Eigen::MatrixXd::Zero(2, 1);
  const Eigen::MatrixXd p2 = softmax_cols(two);
  CHECK(p2(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p2(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("softmax matches exponentiate-normalize oracle") {
  Rng rng(71);
  Eigen::MatrixXd logits(5, 7);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    logits.data()[i] = 3.0 * rng.normal();
  }
  const Eigen::MatrixXd p = softmax_cols(logits);
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    double z = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      z += std::exp(logits(i, j));
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      CHECK(std::abs(p(i, j) - std::exp(logits(i, j)) / z) < 1e-9);
      sum += p(i, j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax is shift-invariant and overflow-safe") {
  Eigen::MatrixXd logits(3, 1);
  logits << 1000.0, 1001.0, 999.0;
  const Eigen::MatrixXd p = softmax_cols(logits);
  Eigen::MatrixXd shifted(3, 1);
  shifted << 0.0, 1.0, -1.0;
  const Eigen::MatrixXd q = softmax_cols(shifted);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::isfinite(p(i, 0)));
    CHECK(p(i, 0) == doctest::Approx(q(i, 0)).epsilon(1e-12));
  }
}

TEST_CASE("cross entropy hand values") {
  Eigen::MatrixXd probs(2, 2);
  probs << 1.0, 0.5, 0.0, 0.5;
  SUBCASE("certain correct prediction and even split") {
    // Column 0 label 0: -ln 1 = 0.  Column 1 label 0: -ln 0.5 = ln 2.
    const double ce = cross_entropy(probs, {0, 0});
    CHECK(ce == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("zero probability clamps instead of inf") {
    const double ce = cross_entropy(probs, {1, 1});
    CHECK(std::isfinite(ce));
    // Clamped at 1e-12: (-ln 1e-12 - ln 0.5)/2.
    CHECK(ce == doctest::Approx(0.5 * (-std::log(1e-12) + std::log(2.0)))
                    .epsilon(1e-9));
  }
  SUBCASE("label bounds checked") {
    CHECK_THROWS(cross_entropy(probs, {0, 2}));
    CHECK_THROWS(cross_entropy(probs, {0}));
  }
}

TEST_CASE("softmax cross-entropy gradient matches finite differences") {
  Rng rng(72);
  Eigen::MatrixXd logits(4, 5);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    logits.data()[i] = rng.normal();
  }
  std::vector<int> labels = {1, 0, 3, 2, 1};
  const Eigen::MatrixXd grad =
      softmax_ce_grad(softmax_cols(logits), labels);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double keep = logits.data()[i];
    const double h = 1e-6;
    logits.data()[i] = keep + h;
    const double up = cross_entropy(softmax_cols(logits), labels);
    logits.data()[i] = keep - h;
    const double dn = cross_entropy(softmax_cols(logits), labels);
    logits.data()[i] = keep;
    CHECK(rel_err((up - dn) / (2.0 * h), grad.data()[i]) < 1e-7);
  }
}

TEST_CASE("l1 norm and subgradient") {
  Eigen::MatrixXd m(1, 2);
  m << 1.0, -1.0;
  CHECK(l1_norm(m) == 2.0);
  Eigen::MatrixXd s = l1_subgrad(m);
  CHECK(s(0, 0) == 1.0);
  CHECK(s(0, 1) == -1.0);
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 2);
  CHECK(l1_norm(z) == 0.0);
  CHECK(l1_subgrad(z).isZero(0.0));
}

TEST_CASE("triplet loss boundary and sum semantics") {
  Eigen::MatrixXd za(2, 2), zp(2, 2), zn(2, 2);
  // Triplet 0: anchor=positive, negative far -> hinge inactive with margin
  // 0.4 when |za-zn|^2 = 1 > 0.4.
  za.col(0) << 0.0, 0.0;
  zp.col(0) << 0.0, 0.0;
  zn.col(0) << 1.0, 0.0;
  // Triplet 1: positive and negative both at distance 0 -> loss = margin.
  za.col(1) << 2.0, 0.0;
  zp.col(1) << 2.0, 0.0;
  zn.col(1) << 2.0, 0.0;
  const TripletLossResult r = triplet_loss(za, zp, zn, 0.4);
  CHECK(r.loss == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(r.active == 1);
  CHECK(r.d_anchor.col(0).isZero(0.0));
  CHECK(r.d_positive.col(0).isZero(0.0));
  CHECK(r.d_negative.col(0).isZero(0.0));
  // Sum over triplets: duplicating the active triplet doubles the loss.
  Eigen::MatrixXd za2(2, 2), zp2(2, 2), zn2(2, 2);
  za2 << za.col(1), za.col(1);
  zp2 << zp.col(1), zp.col(1);
  zn2 << zn.col(1), zn.col(1);
  CHECK(triplet_loss_value(za2, zp2, zn2, 0.4) ==
        doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("triplet loss hand value") {
  Eigen::MatrixXd za(1, 1), zp(1, 1), zn(1, 1);
  za << 0.0;
  zp << 1.0;
  zn << 2.0;
  // |za-zp|^2 = 1, |za-zn|^2 = 4, margin 0.4 -> hinge at -2.6 -> 0.
  CHECK(triplet_loss_value(za, zp, zn, 0.4) == 0.0);
  // Margin 3.5 -> 1 - 4 + 3.5 = 0.5.
  CHECK(triplet_loss_value(za, zp, zn, 3.5) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("triplet gradients match finite differences away from the hinge") {
  Rng rng(73);
  Eigen::MatrixXd za(3, 6), zp(3, 6), zn(3, 6);
  for (Eigen::Index i = 0; i < za.size(); ++i) {
    za.data()[i] = rng.normal();
    zp.data()[i] = rng.normal();
    zn.data()[i] = rng.normal();
  }
  const double margin = 0.4;
  // Skip triplets whose hinge sits within 1e-3 of zero; the subgradient has
  // a kink there and finite differences straddle it.
  std::vector<bool> safe(static_cast<std::size_t>(za.cols()), true);
  for (Eigen::Index j = 0; j < za.cols(); ++j) {
    const double h = (za.col(j) - zp.col(j)).squaredNorm() -
                     (za.col(j) - zn.col(j)).squaredNorm() + margin;
    if (std::abs(h) < 1e-3) safe[static_cast<std::size_t>(j)] = false;
  }
  const TripletLossResult r = triplet_loss(za, zp, zn, margin);
  auto check_block = [&](Eigen::MatrixXd *block, const Eigen::MatrixXd &grad) {
    for (Eigen::Index j = 0; j < block->cols(); ++j) {
      if (!safe[static_cast<std::size_t>(j)]) continue;
      for (Eigen::Index i = 0; i < block->rows(); ++i) {
        const double keep = (*block)(i, j);
        const double h = 1e-6;
        (*block)(i, j) = keep + h;
        const double up = triplet_loss_value(za, zp, zn, margin);
        (*block)(i, j) = keep - h;
        const double dn = triplet_loss_value(za, zp, zn, margin);
        (*block)(i, j) = keep;
        CHECK(rel_err((up - dn) / (2.0 * h), grad(i, j)) < 1e-6);
      }
    }
  };
  check_block(&za, r.d_anchor);
  check_block(&zp, r.d_positive);
  check_block(&zn, r.d_negative);
}

TEST_CASE("adam first step follows the bias-corrected update") {
  Tensor t("p", 2, 1);
  t.value << 1.0, -2.0;
  t.grad << 0.5, -0.25;
  Adam opt(1e-2);
  opt.step({&t});
  // After one step mhat = g, vhat = g^2, so delta = lr * g / (|g| + eps).
  const double d0 = 1e-2 * 0.5 / (0.5 + 1e-8);
  const double d1 = 1e-2 * -0.25 / (0.25 + 1e-8);
  CHECK(t.value(0, 0) == doctest::Approx(1.0 - d0).epsilon(1e-12));
  CHECK(t.value(1, 0) == doctest::Approx(-2.0 - d1).epsilon(1e-12));
}

TEST_CASE("adam second step accumulates moments") {
  Tensor t("p", 1, 1);
  t.value << 0.0;
  t.grad << 1.0;
  Adam opt(0.1, 0.9, 0.999, 1e-8);
  opt.step({&t});
  opt.step({&t});
  // Constant gradient: m = (1-b1)(b1+1)g, v likewise; bias corrections are
  // 1-b1^2 and 1-b2^2, so mhat = g and vhat = g^2 again.
  const double expect = 0.0 - 0.1 * 1.0 / (1.0 + 1e-8) * 2.0;
  CHECK(t.value(0, 0) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("rmsprop first step uses the smoothed accumulator") {
  Tensor t("p", 1, 1);
  t.value << 3.0;
  t.grad << 2.0;
  RmsProp opt(1e-3, 0.9);
  opt.step({&t});
  const double acc = 0.1 * 4.0;
  const double expect = 3.0 - 1e-3 * 2.0 / (std::sqrt(acc) + 1e-8);
  CHECK(t.value(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("optimizer state is positional and size-checked") {
  Tensor a("a", 2, 2), b("b", 2, 2);
  Adam opt(1e-3);
  opt.step({&a, &b});
  CHECK_THROWS_AS(opt.step({&a}), std::invalid_argument);
  RmsProp r(1e-3);
  r.step({&a});
  CHECK_THROWS_AS(r.step({&a, &b}), std::invalid_argument);
}

TEST_CASE("glorot init is deterministic and bounded") {
  Tensor a("a", 7, 5), b("b", 7, 5);
  Rng r1(99), r2(99);
  glorot_init(&a, &r1);
  glorot_init(&b, &r2);
  CHECK(a.value == b.value);
  const double limit = std::sqrt(6.0 / (5 + 7));
  CHECK(a.value.maxCoeff() <= limit);
  CHECK(a.value.minCoeff() >= -limit);
  CHECK(a.value.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("conv1d forward hand example") {
  Rng rng(1);
  Conv1d conv(1, 1, 2, &rng, "c");
  Tensor *w = conv.params()[0];
  Tensor *b = conv.params()[1];
  w->value << 1.0, 2.0;  // taps at offsets 0 and 1
  b->value << 0.5;
  Batch x(1, Eigen::MatrixXd(1, 3));
  x[0] << 1.0, 2.0, 3.0;
  const Batch y = conv.forward(x, false, nullptr);
  REQUIRE(y.size() == 1);
  REQUIRE(y[0].rows() == 1);
  REQUIRE(y[0].cols() == 2);
  CHECK(y[0](0, 0) == doctest::Approx(1.0 + 4.0 + 0.5).epsilon(1e-12));
  CHECK(y[0](0, 1) == doctest::Approx(2.0 + 6.0 + 0.5).epsilon(1e-12));
}

TEST_CASE("conv1d input gradient matches finite differences") {
  Rng rng(5);
  Conv1d conv(2, 3, 3, &rng, "c");
  Batch x = random_batch(2, 2, 9, &rng);
  Eigen::MatrixXd r0(3, 7), r1(3, 7);
  for (Eigen::Index i = 0; i < r0.size(); ++i) {
    r0.data()[i] = rng.normal();
    r1.data()[i] = rng.normal();
  }
  auto loss = [&]() {
    const Batch y = conv.forward(x, false, nullptr);
    return (y[0].array() * r0.array()).sum() +
           (y[1].array() * r1.array()).sum();
  };
  loss();
  const Batch dx = conv.backward({r0, r1});
  REQUIRE(dx.size() == 2);
  for (std::size_t s = 0; s < 2; ++s) {
    for (Eigen::Index i = 0; i < x[s].size(); i += 3) {
      const double keep = x[s].data()[i];
      const double h = 1e-6;
      x[s].data()[i] = keep + h;
      const double up = loss();
      x[s].data()[i] = keep - h;
      const double dn = loss();
      x[s].data()[i] = keep;
      CHECK(rel_err((up - dn) / (2.0 * h), dx[s].data()[i]) < 1e-7);
    }
  }
}

TEST_CASE("lstm input gradient matches finite differences") {
  Rng rng(6);
  Lstm lstm(3, 4, &rng, "l");
  Batch x = random_batch(1, 3, 6, &rng);
  Eigen::MatrixXd r(4, 6);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.normal();
  auto loss = [&]() {
    const Batch y = lstm.forward(x, false, nullptr);
    return (y[0].array() * r.array()).sum();
  };
  loss();
  const Batch dx = lstm.backward({r});
  for (Eigen::Index i = 0; i < x[0].size(); ++i) {
    const double keep = x[0].data()[i];
    const double h = 1e-5;
    x[0].data()[i] = keep + h;
    const double up = loss();
    x[0].data()[i] = keep - h;
    const double dn = loss();
    x[0].data()[i] = keep;
    CHECK(rel_err((up - dn) / (2.0 * h), dx[0].data()[i]) < 1e-6);
  }
}

TEST_CASE("lstm forget gate bias starts at one") {
  Rng rng(7);
  Lstm lstm(2, 3, &rng, "l");
  const Tensor *b = lstm.params()[2];
  REQUIRE(b->value.rows() == 12);
  // Gate order i,f,g,o: rows [3,6) hold the forget bias.
  for (int i = 0; i < 12; ++i) {
    CHECK(b->value(i, 0) == (i >= 3 && i < 6 ? 1.0 : 0.0));
  }
}

TEST_CASE("dropout scales and masks in train mode only") {
  Dropout drop(0.5);
  Batch x(1, Eigen::MatrixXd::Ones(10, 50));
  const Batch eval_y = drop.forward(x, false, nullptr);
  CHECK(eval_y[0] == x[0]);
  Rng rng(11);
  const Batch train_y = drop.forward(x, true, &rng);
  std::size_t zeros = 0, scaled = 0;
  for (Eigen::Index i = 0; i < train_y[0].size(); ++i) {
    const double v = train_y[0].data()[i];
    if (v == 0.0) {
      zeros += 1;
    } else {
      CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
      scaled += 1;
    }
  }
  CHECK(zeros + scaled == 500);
  CHECK(zeros > 150);  // rate 0.5 over 500 draws
  CHECK(zeros < 350);
  // Backward uses the same mask.
  const Batch dy(1, Eigen::MatrixXd::Ones(10, 50));
  const Batch dx = drop.backward(dy);
  for (Eigen::Index i = 0; i < dx[0].size(); ++i) {
    const bool was_zero = train_y[0].data()[i] == 0.0;
    CHECK(dx[0].data()[i] == (was_zero ? 0.0 : 2.0));
  }
}

TEST_CASE("reduce keeps last step or averages") {
  Batch x(1, Eigen::MatrixXd(2, 3));
  x[0] << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  Reduce last(false);
  const Batch yl = last.forward(x, false, nullptr);
  CHECK(yl[0](0, 0) == 3.0);
  CHECK(yl[0](1, 0) == 6.0);
  Reduce mean(true);
  const Batch ym = mean.forward(x, false, nullptr);
  CHECK(ym[0](0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ym[0](1, 0) == doctest::Approx(5.0).epsilon(1e-12));
  // Backward scatters into the kept positions.
  Batch dy(1, Eigen::MatrixXd(2, 1));
  dy[0] << 1.0, 2.0;
  const Batch dl = last.backward(dy);
  CHECK(dl[0].col(2)(0) == 1.0);
  CHECK(dl[0].col(0).isZero(0.0));
  const Batch dm = mean.backward(dy);
  CHECK(dm[0](0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("extractor gradients match finite differences (conv-recurrent)") {
  ExtractorSpec spec = tiny_recurrent_spec();
  spec.dropout = 0.0;  // keep the graph deterministic for differencing
  Extractor ex(spec, 31);
  Rng rng(32);
  Batch x = random_batch(2, spec.input_channels, spec.window_len, &rng);
  Eigen::MatrixXd r(spec.feature_dim(), 2);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.normal();
  check_param_grads(&ex, x, r, 1e-5);
}

TEST_CASE("extractor gradients match finite differences (conv-only)") {
  const ExtractorSpec spec = tiny_conv_spec();
  Extractor ex(spec, 33);
  Rng rng(34);
  Batch x = random_batch(2, spec.input_channels, spec.window_len, &rng);
  Eigen::MatrixXd r(spec.feature_dim(), 2);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.normal();
  check_param_grads(&ex, x, r, 1e-5);
}

TEST_CASE("mean-reduce variant also differentiates cleanly") {
  ExtractorSpec spec = tiny_recurrent_spec();
  spec.dropout = 0.0;
  spec.recurrent_reduce = "mean";
  Extractor ex(spec, 35);
  Rng rng(36);
  Batch x = random_batch(1, spec.input_channels, spec.window_len, &rng);
  Eigen::MatrixXd r(spec.feature_dim(), 1);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.normal();
  check_param_grads(&ex, x, r, 1e-5);
}

TEST_CASE("spec validation rejects bad configurations") {
  ExtractorSpec spec = tiny_recurrent_spec();
  SUBCASE("unknown variant") {
    spec.variant = "transformer";
    CHECK_THROWS_AS(spec.validate(), ConfigError);
  }
  SUBCASE("window shorter than the conv stack") {
    spec.window_len = 4;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
  }
  SUBCASE("dropout out of range") {
    spec.dropout = 1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
  }
  SUBCASE("bad reduce mode") {
    spec.recurrent_reduce = "max";
    CHECK_THROWS_AS(spec.validate(), ConfigError);
  }
  SUBCASE("paper defaults differ per variant") {
    CHECK(ExtractorSpec::defaults_for("conv-recurrent").conv_layers == 4);
    CHECK(ExtractorSpec::defaults_for("conv-only").conv_layers == 5);
  }
}

TEST_CASE("build creates one head per domain deterministically") {
  ExtractorSpec spec = tiny_recurrent_spec();
  std::vector<std::pair<DomainId, std::vector<int>>> domains;
  for (int k = 0; k < 3; ++k) {
    domains.push_back({DomainId{"s" + std::to_string(k), "body"}, {0, 1, 2}});
  }
  const std::vector<std::string> names = {"a", "b", "c"};
  IflfModel m1 = IflfModel::build(spec, domains, names, 17);
  IflfModel m2 = IflfModel::build(spec, domains, names, 17);
  IflfModel m3 = IflfModel::build(spec, domains, names, 18);
  CHECK(m1.heads().size() == 3);
  std::uint64_t h1 = 0, h2 = 0, h3 = 0;
  for (const Tensor *t : m1.extractor().params()) h1 = checksum(t->value, h1);
  for (const Tensor *t : m2.extractor().params()) h2 = checksum(t->value, h2);
  for (const Tensor *t : m3.extractor().params()) h3 = checksum(t->value, h3);
  for (std::size_t k = 0; k < 3; ++k) {
    h1 = checksum(m1.heads()[k].W.value, h1);
    h2 = checksum(m2.heads()[k].W.value, h2);
    h3 = checksum(m3.heads()[k].W.value, h3);
  }
  CHECK(h1 == h2);
  CHECK(h1 != h3);
}

TEST_CASE("paper-default conv-recurrent spec yields declared dimension") {
  ExtractorSpec spec = ExtractorSpec::defaults_for("conv-recurrent");
  spec.input_channels = 6;
  spec.window_len = 200;
  spec.validate();
  CHECK(spec.feature_dim() == 128);
  CHECK(spec.conv_out_len() == 200 - 4 * 4);
  Extractor ex(spec, 3);
  Rng rng(4);
  Batch x = random_batch(1, 6, 200, &rng);
  const Eigen::MatrixXd z = ex.forward(x, false, nullptr);
  CHECK(z.rows() == 128);
  CHECK(z.cols() == 1);
}

TEST_CASE("extract returns one row per window and is repeatable") {
  ExtractorSpec spec = tiny_recurrent_spec();
  IflfModel model =
      IflfModel::build(spec, {{DomainId{"s1", "body"}, {0, 1}}}, {"a", "b"}, 5);
  Batch x(4, Eigen::MatrixXd::Zero(spec.input_channels, spec.window_len));
  const Eigen::MatrixXd z1 = model.extract(x);
  const Eigen::MatrixXd z2 = model.extract(x);
  CHECK(z1.rows() == 4);
  CHECK(z1.cols() == spec.feature_dim());
  CHECK(z1 == z2);
}

TEST_CASE("eval-mode features are independent of batch composition") {
  ExtractorSpec spec = tiny_recurrent_spec();
  IflfModel model =
      IflfModel::build(spec, {{DomainId{"s1", "body"}, {0, 1}}}, {"a", "b"}, 6);
  Rng rng(44);
  Batch batch = random_batch(5, spec.input_channels, spec.window_len, &rng);
  const Eigen::MatrixXd all = model.extract(batch);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::MatrixXd solo = model.extract({batch[i]});
    CHECK((all.row(static_cast<Eigen::Index>(i)) - solo.row(0))
              .cwiseAbs()
              .maxCoeff() < 1e-6);
  }
}

TEST_CASE("train-mode dropout perturbs features, eval mode never") {
  ExtractorSpec spec = tiny_recurrent_spec();  // dropout 0.25
  IflfModel model =
      IflfModel::build(spec, {{DomainId{"s1", "body"}, {0, 1}}}, {"a", "b"}, 7);
  Rng rng(45);
  Batch x = random_batch(2, spec.input_channels, spec.window_len, &rng);
  const Eigen::MatrixXd eval1 = model.extract(x);
  const Eigen::MatrixXd eval2 = model.extract(x);
  CHECK(eval1 == eval2);
  Rng drop_rng(46);
  const Eigen::MatrixXd train = model.extract(x, true, &drop_rng);
  CHECK((train - eval1).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("predict rows are probabilities and match the softmax oracle") {
  ExtractorSpec spec = tiny_conv_spec();
  IflfModel model = IflfModel::build(
      spec, {{DomainId{"s1", "body"}, {0, 1, 2}}}, {"a", "b", "c"}, 8);
  Rng rng(47);
  Batch x = random_batch(3, spec.input_channels, spec.window_len, &rng);
  const Eigen::MatrixXd p = model.predict(0, x);
  CHECK(p.rows() == 3);
  CHECK(p.cols() == 3);
  const Eigen::MatrixXd z = model.extract(x);
  const Head &head = model.heads()[0];
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-6);
    // Exponentiate-normalize oracle on the affine output.
    Eigen::VectorXd logits =
        head.W.value * z.row(i).transpose() + head.b.value.col(0);
    Eigen::VectorXd e = logits.array().exp();
    e /= e.sum();
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      CHECK(p(i, c) >= 0.0);
      CHECK(std::abs(p(i, c) - e(c)) < 1e-9);
    }
  }
}

TEST_CASE("all-zero head predicts uniform probabilities") {
  ExtractorSpec spec = tiny_conv_spec();
  IflfModel model = IflfModel::build(
      spec, {{DomainId{"s1", "body"}, {0, 1, 2, 3}}}, {"a", "b", "c", "d"}, 9);
  model.heads()[0].W.value.setZero();
  model.heads()[0].b.value.setZero();
  Rng rng(48);
  Batch x = random_batch(2, spec.input_channels, spec.window_len, &rng);
  const Eigen::MatrixXd p = model.predict(0, x);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    CHECK(p.data()[i] == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("predict decomposes into softmax of affine of extract") {
  ExtractorSpec spec = tiny_recurrent_spec();
  IflfModel model = IflfModel::build(
      spec, {{DomainId{"s1", "body"}, {0, 1, 2}}}, {"a", "b", "c"}, 10);
  Rng rng(49);
  Batch x = random_batch(4, spec.input_channels, spec.window_len, &rng);
  const Eigen::MatrixXd p = model.predict(0, x);
  const Eigen::MatrixXd z = model.extract(x);
  const Head &head = model.heads()[0];
  const Eigen::MatrixXd logits =
      (head.W.value * z.transpose()).colwise() +
      Eigen::VectorXd(head.b.value.col(0));
  const Eigen::MatrixXd q = softmax_cols(logits).transpose();
  CHECK((p - q).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("invalid head index is rejected") {
  ExtractorSpec spec = tiny_conv_spec();
  IflfModel model =
      IflfModel::build(spec, {{DomainId{"s1", "body"}, {0, 1}}}, {"a", "b"}, 11);
  Batch x(1, Eigen::MatrixXd::Zero(spec.input_channels, spec.window_len));
  CHECK_THROWS_AS(model.predict(1, x), ConfigError);
  CHECK_THROWS_AS(model.head_weight_stats(1), ConfigError);
}

TEST_CASE("window shape mismatches are rejected") {
  ExtractorSpec spec = tiny_conv_spec();
  IflfModel model =
      IflfModel::build(spec, {{DomainId{"s1", "body"}, {0, 1}}}, {"a", "b"}, 12);
  Batch bad(1, Eigen::MatrixXd::Zero(spec.input_channels, spec.window_len + 1));
  CHECK_THROWS_AS(model.extract(bad), DataError);
}

TEST_CASE("heads cover only present classes") {
  ExtractorSpec spec = tiny_conv_spec();
  IflfModel model = IflfModel::build(
      spec,
      {{DomainId{"s1", "body"}, {0, 1, 2}}, {DomainId{"s2", "body"}, {0, 2}}},
      {"a", "b", "c"}, 13);
  const Head &partial = model.heads()[1];
  CHECK(partial.num_classes() == 2);
  CHECK(partial.W.value.rows() == 2);
  CHECK(partial.local_index(0) == 0);
  CHECK(partial.local_index(1) == -1);
  CHECK(partial.local_index(2) == 1);
  Batch x(1, Eigen::MatrixXd::Zero(spec.input_channels, spec.window_len));
  CHECK(model.predict(1, x).cols() == 2);
  CHECK(model.head_for(DomainId{"s2", "body"}) == 1);
  CHECK(model.head_for(DomainId{"s9", "body"}) == -1);
}

TEST_CASE("head weight stats: trivial and oracle values") {
  ExtractorSpec spec = tiny_conv_spec();
  IflfModel model =
      IflfModel::build(spec, {{DomainId{"s1", "body"}, {0, 1}}}, {"a", "b"}, 14);
  SUBCASE("all-zero head") {
    model.heads()[0].W.value.setZero();
    const HeadWeightStats s = model.head_weight_stats(0);
    CHECK(s.l1 == 0.0);
    CHECK(s.variance == 0.0);
    std::int64_t total = 0;
    for (const auto c : s.histogram) total += c;
    CHECK(total == model.heads()[0].W.value.size());
  }
  SUBCASE("known weights [1, -1]") {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 1);
    w << 1.0, -1.0;
    model.heads()[0].W.value = w;
    const HeadWeightStats s = model.head_weight_stats(0);
    CHECK(std::abs(s.l1 - 2.0) < 1e-12);
    CHECK(std::abs(s.variance - 1.0) < 1e-12);
  }
  SUBCASE("random head matches the direct formulas") {
    Rng rng(50);
    Eigen::MatrixXd &w = model.heads()[0].W.value;
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
    // Bias must not contribute.
    model.heads()[0].b.value.setConstant(1e6);
    const HeadWeightStats s = model.head_weight_stats(0);
    double l1 = 0.0, mean = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      l1 += std::abs(w.data()[i]);
      mean += w.data()[i];
    }
    mean /= static_cast<double>(w.size());
    double var = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      var += (w.data()[i] - mean) * (w.data()[i] - mean);
    }
    var /= static_cast<double>(w.size());
    CHECK(std::abs(s.l1 - l1) < 1e-12 * std::max(1.0, l1));
    CHECK(std::abs(s.variance - var) < 1e-12);
    std::int64_t total = 0;
    for (const auto c : s.histogram) total += c;
    CHECK(total == w.size());
  }
  SUBCASE("explicit bin edges") {
    Eigen::MatrixXd w(2, 1);
    w << 0.25, 0.75;
    model.heads()[0].W.value = w;
    const HeadWeightStats s =
        model.head_weight_stats(0, {0.0, 0.5, 1.0});
    REQUIRE(s.histogram.size() == 2);
    CHECK(s.histogram[0] == 1);
    CHECK(s.histogram[1] == 1);
    CHECK_THROWS_AS(model.head_weight_stats(0, {1.0, 0.0}), ConfigError);
  }
}

TEST_CASE("save/load round trip is bitwise") {
  ExtractorSpec spec = tiny_recurrent_spec();
  IflfModel model = IflfModel::build(
      spec,
      {{DomainId{"s1", "body"}, {0, 1, 2}}, {DomainId{"s2", "body"}, {1, 2}}},
      {"walk", "run", "sit"}, 21);
  // Perturb away from the init so the round trip carries trained-looking
  // values, including awkward ones.
  Rng rng(51);
  for (Tensor *t : model.extractor().params()) {
    for (Eigen::Index i = 0; i < t->value.size(); ++i) {
      t->value.data()[i] += 1e-3 * rng.normal();
    }
  }
  model.heads()[0].W.value(0, 0) = 1.0 / 3.0;
  model.heads()[1].b.value(0, 0) = -2.5e-8;
  const auto path = temp_dir() / "model.json";
  model.save(path);
  IflfModel back = IflfModel::load(path);
  std::uint64_t h1 = 0, h2 = 0;
  std::size_t n1 = 0, n2 = 0;
  for (const Tensor *t : model.extractor().params()) {
    h1 = checksum(t->value, h1);
    n1 += static_cast<std::size_t>(t->value.size());
  }
  for (const Tensor *t : back.extractor().params()) {
    h2 = checksum(t->value, h2);
    n2 += static_cast<std::size_t>(t->value.size());
  }
  CHECK(n1 == n2);
  CHECK(h1 == h2);
  REQUIRE(back.heads().size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back.heads()[k].W.value == model.heads()[k].W.value);
    CHECK(back.heads()[k].b.value == model.heads()[k].b.value);
    CHECK(back.heads()[k].classes == model.heads()[k].classes);
    CHECK(back.heads()[k].domain == model.heads()[k].domain);
  }
  CHECK(back.class_names() == model.class_names());
  CHECK(back.spec().variant == spec.variant);
  // Behaviour carries over exactly.
  Rng xr(52);
  Batch x = random_batch(2, spec.input_channels, spec.window_len, &xr);
  CHECK(model.predict(0, x) == back.predict(0, x));
  std::filesystem::remove_all(temp_dir());
}

TEST_CASE("checkpoint rejects tampered containers") {
  ExtractorSpec spec = tiny_conv_spec();
  IflfModel model =
      IflfModel::build(spec, {{DomainId{"s1", "body"}, {0, 1}}}, {"a", "b"}, 22);
  nlohmann::json j = model.to_json();
  SUBCASE("missing version") {
    j.erase("version");
    CHECK_THROWS_AS(IflfModel::from_json(j), DataError);
  }
  SUBCASE("wrong format tag") {
    j["format"] = "other";
    CHECK_THROWS_AS(IflfModel::from_json(j), DataError);
  }
  SUBCASE("unknown top-level key") {
    j["extra"] = 1;
    CHECK_THROWS_AS(IflfModel::from_json(j), ConfigError);
  }
  SUBCASE("truncated parameter list") {
    j["extractor"].erase(j["extractor"].size() - 1);
    CHECK_THROWS_AS(IflfModel::from_json(j), DataError);
  }
  SUBCASE("shape mismatch") {
    j["heads"][0]["W"]["data"].push_back(0.0);
    CHECK_THROWS_AS(IflfModel::from_json(j), DataError);
  }
}

TEST_CASE("variant swap keeps the pipeline contract") {
  for (const std::string variant : {"conv-recurrent", "conv-only"}) {
    ExtractorSpec spec = variant == "conv-recurrent" ? tiny_recurrent_spec()
                                                     : tiny_conv_spec();
    IflfModel model = IflfModel::build(
        spec, {{DomainId{"s1", "body"}, {0, 1, 2}}}, {"a", "b", "c"}, 23);
    Rng rng(53);
    Batch x = random_batch(3, spec.input_channels, spec.window_len, &rng);
    const Eigen::MatrixXd z = model.extract(x);
    CHECK(z.rows() == 3);
    CHECK(z.cols() == spec.feature_dim());
    const Eigen::MatrixXd p = model.predict(0, x);
    CHECK(p.rows() == 3);
    CHECK(p.cols() == 3);
    for (Eigen::Index i = 0; i < 3; ++i) {
      CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-6);
    }
  }
}

}  // namespace iflf
