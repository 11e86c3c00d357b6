// iflf/losses.cpp

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

#include "iflf/losses.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "iflf/common.hpp"

namespace iflf {

Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd &logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    Eigen::VectorXd e = (logits.col(j).array() - mx).exp();
    p.col(j) = e / e.sum();
  }
  return p;
}

double cross_entropy(const Eigen::MatrixXd &probs,
                     const std::vector<int> &labels) {
  if (static_cast<std::size_t>(probs.cols()) != labels.size()) {
    throw std::invalid_argument("cross_entropy: labels/columns mismatch");
  }
  if (probs.cols() == 0) {
    throw std::invalid_argument("cross_entropy: empty batch");
  }
  constexpr double kClamp = 1e-12;
  bool clamped = false;
  double total = 0.0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    const int y = labels[static_cast<std::size_t>(j)];
    if (y < 0 || y >= probs.rows()) {
      throw std::invalid_argument("cross_entropy: label out of range");
    }
    double p = probs(y, j);
    if (p < kClamp) {
      p = kClamp;
      clamped = true;
    }
    total -= std::log(p);
  }
  if (clamped) {
    log_warn("cross_entropy: probability clamped at 1e-12");
  }
  return total / static_cast<double>(probs.cols());
}

Eigen::MatrixXd softmax_ce_grad(const Eigen::MatrixXd &probs,
                                const std::vector<int> &labels) {
  if (static_cast<std::size_t>(probs.cols()) != labels.size()) {
    throw std::invalid_argument("softmax_ce_grad: labels/columns mismatch");
  }
  Eigen::MatrixXd g = probs;
  const double inv_b = 1.0 / static_cast<double>(probs.cols());
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    g(labels[static_cast<std::size_t>(j)], j) -= 1.0;
  }
  return g * inv_b;
}

double l1_norm(const Eigen::MatrixXd &m) { return m.array().abs().sum(); }

Eigen::MatrixXd l1_subgrad(const Eigen::MatrixXd &m) {
  // sign with sign(0) = 0.
  return m.unaryExpr([](double v) {
    if (v > 0.0) return 1.0;
    if (v < 0.0) return -1.0;
    return 0.0;
  });
}

TripletLossResult triplet_loss(const Eigen::MatrixXd &za,
                               const Eigen::MatrixXd &zp,
                               const Eigen::MatrixXd &zn, double margin) {
  if (za.rows() != zp.rows() || za.rows() != zn.rows() ||
      za.cols() != zp.cols() || za.cols() != zn.cols()) {
    throw std::invalid_argument("triplet_loss: shape mismatch");
  }
  TripletLossResult r;
  r.d_anchor = Eigen::MatrixXd::Zero(za.rows(), za.cols());
  r.d_positive = Eigen::MatrixXd::Zero(za.rows(), za.cols());
  r.d_negative = Eigen::MatrixXd::Zero(za.rows(), za.cols());
  for (Eigen::Index j = 0; j < za.cols(); ++j) {
    const Eigen::VectorXd ap = za.col(j) - zp.col(j);
    const Eigen::VectorXd an = za.col(j) - zn.col(j);
    const double h = ap.squaredNorm() - an.squaredNorm() + margin;
    if (h > 0.0) {
      r.loss += h;
      r.active += 1;
      // d/dza |za-zp|^2 - |za-zn|^2 = 2(ap - an) = 2(zn - zp).
      r.d_anchor.col(j) = 2.0 * (zn.col(j) - zp.col(j));
      r.d_positive.col(j) = -2.0 * ap;
      r.d_negative.col(j) = 2.0 * an;
    }
  }
  return r;
}

double triplet_loss_value(const Eigen::MatrixXd &za, const Eigen::MatrixXd &zp,
                          const Eigen::MatrixXd &zn, double margin) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < za.cols(); ++j) {
    const double h = (za.col(j) - zp.col(j)).squaredNorm() -
                     (za.col(j) - zn.col(j)).squaredNorm() + margin;
    if (h > 0.0) total += h;
  }
  return total;
}

}  // namespace iflf
