// iflf/nn.hpp

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

#ifndef IFLF_NN_HPP_
#define IFLF_NN_HPP_

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iflf/common.hpp"

namespace iflf {

// One learnable parameter with its gradient accumulator.  Biases are stored
// as [n x 1] matrices so optimizers and checkpoints see a single shape.
struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  Tensor() = default;
  Tensor(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)),
        value(Eigen::MatrixXd::Zero(rows, cols)),
        grad(Eigen::MatrixXd::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(); }
};

// Glorot uniform fill; the draw order (column-major) is part of the
// reproducibility contract.
void glorot_init(Tensor *t, Rng *rng);

// Batch of per-sample activations; each entry is [channels x time] (or a
// [dim x 1] vector after flattening).
using Batch = std::vector<Eigen::MatrixXd>;

class Layer {
 public:
  virtual ~Layer() = default;
  // train enables dropout; rng may be null in eval mode.
  virtual Batch forward(const Batch &x, bool train, Rng *rng) = 0;
  // Consumes the gradients w.r.t. the last forward's output; accumulates
  // parameter gradients and returns gradients w.r.t. the input.
  virtual Batch backward(const Batch &dy) = 0;
  virtual std::vector<Tensor *> params() { return {}; }
  virtual std::string describe() const = 0;
};

// Temporal convolution, valid padding, stride 1: [C_in x T] -> [C_out x T-k+1].
class Conv1d : public Layer {
 public:
  Conv1d(int in_channels, int out_channels, int kernel, Rng *rng,
         const std::string &name);
  Batch forward(const Batch &x, bool train, Rng *rng) override;
  Batch backward(const Batch &dy) override;
  std::vector<Tensor *> params() override { return {&W_, &b_}; }
  std::string describe() const override;

 private:
  int in_, out_, k_;
  Tensor W_;  // [out x in*k]
  Tensor b_;  // [out x 1]
  std::vector<Eigen::MatrixXd> cols_;  // cached im2col per sample
};

class ReLU : public Layer {
 public:
  Batch forward(const Batch &x, bool train, Rng *rng) override;
  Batch backward(const Batch &dy) override;
  std::string describe() const override { return "relu"; }

 private:
  Batch mask_;
};

// Single LSTM layer over [in x T] sequences, batched time-major inside.
// Forget-gate bias starts at 1.  Returns the full hidden sequence [H x T].
class Lstm : public Layer {
 public:
  Lstm(int input_dim, int hidden, Rng *rng, const std::string &name);
  Batch forward(const Batch &x, bool train, Rng *rng) override;
  Batch backward(const Batch &dy) override;
  std::vector<Tensor *> params() override { return {&Wih_, &Whh_, &b_}; }
  std::string describe() const override;

 private:
  int in_, hidden_;
  Tensor Wih_;  // [4H x in]
  Tensor Whh_;  // [4H x H]
  Tensor b_;    // [4H x 1], forget slice initialized to 1
  // Caches, time-major: each entry [.. x B].
  std::vector<Eigen::MatrixXd> xs_, is_, fs_, gs_, os_, cs_, tc_, hs_;
  Eigen::Index batch_ = 0;
  Eigen::Index steps_ = 0;
};

// Inverted dropout; identity in eval mode.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate);
  Batch forward(const Batch &x, bool train, Rng *rng) override;
  Batch backward(const Batch &dy) override;
  std::string describe() const override;

 private:
  double rate_;
  Batch mask_;
  bool identity_ = true;
};

// Fully connected on [in x 1] vectors.
class Dense : public Layer {
 public:
  Dense(int input_dim, int output_dim, Rng *rng, const std::string &name);
  Batch forward(const Batch &x, bool train, Rng *rng) override;
  Batch backward(const Batch &dy) override;
  std::vector<Tensor *> params() override { return {&W_, &b_}; }
  std::string describe() const override;

 private:
  int in_, out_;
  Tensor W_;  // [out x in]
  Tensor b_;  // [out x 1]
  Batch x_;
};

// [C x T] -> [C*T x 1], column-major flattening.
class Flatten : public Layer {
 public:
  Batch forward(const Batch &x, bool train, Rng *rng) override;
  Batch backward(const Batch &dy) override;
  std::string describe() const override { return "flatten"; }

 private:
  Eigen::Index rows_ = 0, cols_ = 0;
};

// [H x T] -> [H x 1], keeping the last time step (or the mean over steps).
class Reduce : public Layer {
 public:
  explicit Reduce(bool mean) : mean_(mean) {}
  Batch forward(const Batch &x, bool train, Rng *rng) override;
  Batch backward(const Batch &dy) override;
  std::string describe() const override { return mean_ ? "mean" : "last"; }

 private:
  bool mean_;
  Eigen::Index cols_ = 0;
};

}  // namespace iflf

#endif  // IFLF_NN_HPP_
