// iflf/optim.cpp

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

#include "iflf/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace iflf {

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr <= 0.0) throw std::invalid_argument("Adam: lr must be positive");
}

void Adam::step(const std::vector<Tensor *> &params) {
  if (m_.empty()) {
    for (const Tensor *p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (params.size() != m_.size()) {
    throw std::invalid_argument("Adam: parameter group changed size");
  }
  t_ += 1;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor *p = params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p->grad;
    v_[i].array() =
        beta2_ * v_[i].array() + (1.0 - beta2_) * p->grad.array().square();
    const Eigen::ArrayXXd mhat = m_[i].array() / bc1;
    const Eigen::ArrayXXd vhat = v_[i].array() / bc2;
    p->value.array() -= lr_ * mhat / (vhat.sqrt() + eps_);
  }
}

void Adam::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

RmsProp::RmsProp(double lr, double rho, double eps)
    : lr_(lr), rho_(rho), eps_(eps) {
  if (lr <= 0.0) throw std::invalid_argument("RmsProp: lr must be positive");
}

void RmsProp::step(const std::vector<Tensor *> &params) {
  if (acc_.empty()) {
    for (const Tensor *p : params) {
      acc_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (params.size() != acc_.size()) {
    throw std::invalid_argument("RmsProp: parameter group changed size");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor *p = params[i];
    acc_[i].array() =
        rho_ * acc_[i].array() + (1.0 - rho_) * p->grad.array().square();
    p->value.array() -= lr_ * p->grad.array() / (acc_[i].array().sqrt() + eps_);
  }
}

void RmsProp::reset() { acc_.clear(); }

}  // namespace iflf
