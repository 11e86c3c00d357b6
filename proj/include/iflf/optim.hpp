// iflf/optim.hpp

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

#ifndef IFLF_OPTIM_HPP_
#define IFLF_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "iflf/nn.hpp"

namespace iflf {

// One optimizer instance owns the state for one parameter group.  step()
// must always be called with the same tensors in the same order; state is
// keyed by position.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(const std::vector<Tensor *> &params) = 0;
  virtual void reset() = 0;
};

// Adam (Kingma & Ba) with bias correction.
class Adam : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(const std::vector<Tensor *> &params) override;
  void reset() override;

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

// RMSProp with smoothing constant rho (accumulator decay).
class RmsProp : public Optimizer {
 public:
  explicit RmsProp(double lr, double rho = 0.9, double eps = 1e-8);
  void step(const std::vector<Tensor *> &params) override;
  void reset() override;

 private:
  double lr_, rho_, eps_;
  std::vector<Eigen::MatrixXd> acc_;
};

}  // namespace iflf

#endif  // IFLF_OPTIM_HPP_
