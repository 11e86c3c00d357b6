// iflf/losses.hpp

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

#ifndef IFLF_LOSSES_HPP_
#define IFLF_LOSSES_HPP_

#include <vector>

#include <Eigen/Dense>

namespace iflf {

// Numerically stable column-wise softmax of [C x B] logits.
Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd &logits);

// Mean categorical cross-entropy (natural log) of [C x B] probabilities
// against per-column label indices.  Probabilities below 1e-12 are clamped
// and the clamp is logged once per call.
double cross_entropy(const Eigen::MatrixXd &probs,
                     const std::vector<int> &labels);

// Gradient of mean CE w.r.t. the logits feeding softmax: (p - onehot)/B.
Eigen::MatrixXd softmax_ce_grad(const Eigen::MatrixXd &probs,
                                const std::vector<int> &labels);

// L1 norm and its subgradient (sign with sign(0) = 0).
double l1_norm(const Eigen::MatrixXd &m);
Eigen::MatrixXd l1_subgrad(const Eigen::MatrixXd &m);

struct TripletLossResult {
  double loss = 0.0;  // sum over triplets of max(0, |za-zp|^2 - |za-zn|^2 + eps)
  std::size_t active = 0;  // triplets past the hinge
  Eigen::MatrixXd d_anchor;
  Eigen::MatrixXd d_positive;
  Eigen::MatrixXd d_negative;
};

// Columns of za/zp/zn are the triplet features.  Loss is the SUM over
// triplets (m^2 per task), matching the printed objective.
TripletLossResult triplet_loss(const Eigen::MatrixXd &za,
                               const Eigen::MatrixXd &zp,
                               const Eigen::MatrixXd &zn, double margin);

double triplet_loss_value(const Eigen::MatrixXd &za, const Eigen::MatrixXd &zp,
                          const Eigen::MatrixXd &zn, double margin);

}  // namespace iflf

#endif  // IFLF_LOSSES_HPP_
