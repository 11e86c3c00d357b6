// iflf/nn.cpp

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

#include "iflf/nn.hpp"

#include <cmath>

namespace iflf {

void glorot_init(Tensor *t, Rng *rng) {
  const double fan_in = static_cast<double>(t->value.cols());
  const double fan_out = static_cast<double>(t->value.rows());
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index c = 0; c < t->value.cols(); ++c)
    for (Eigen::Index r = 0; r < t->value.rows(); ++r)
      t->value(r, c) = rng->uniform(-limit, limit);
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Conv1d::Conv1d(int in_channels, int out_channels, int kernel, Rng *rng,
               const std::string &name)
    : in_(in_channels),
      out_(out_channels),
      k_(kernel),
      W_(name + ".W", out_channels, in_channels * kernel),
      b_(name + ".b", out_channels, 1) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1)
    throw ConfigError("Conv1d: dimensions must be positive");
  glorot_init(&W_, rng);
}

Batch Conv1d::forward(const Batch &x, bool, Rng *) {
  Batch y(x.size());
  cols_.resize(x.size());
  for (std::size_t s = 0; s < x.size(); ++s) {
    const Eigen::MatrixXd &xi = x[s];
    if (xi.rows() != in_ || xi.cols() < k_)
      throw DataError("Conv1d: input [" + std::to_string(xi.rows()) + " x " +
                      std::to_string(xi.cols()) + "] incompatible with " +
                      describe());
    const Eigen::Index tout = xi.cols() - k_ + 1;
    Eigen::MatrixXd cols(in_ * k_, tout);
    for (Eigen::Index t = 0; t < tout; ++t)
      for (int j = 0; j < k_; ++j)
        cols.block(static_cast<Eigen::Index>(j) * in_, t, in_, 1) =
            xi.col(t + j);
    y[s] = (W_.value * cols).colwise() + b_.value.col(0);
    cols_[s] = std::move(cols);
  }
  return y;
}

Batch Conv1d::backward(const Batch &dy) {
  Batch dx(dy.size());
  for (std::size_t s = 0; s < dy.size(); ++s) {
    const Eigen::MatrixXd &g = dy[s];
    W_.grad += g * cols_[s].transpose();
    b_.grad.col(0) += g.rowwise().sum();
    const Eigen::MatrixXd dcols = W_.value.transpose() * g;  // [in*k x tout]
    const Eigen::Index tout = g.cols();
    Eigen::MatrixXd dxi = Eigen::MatrixXd::Zero(in_, tout + k_ - 1);
    for (Eigen::Index t = 0; t < tout; ++t)
      for (int j = 0; j < k_; ++j)
        dxi.col(t + j) +=
            dcols.block(static_cast<Eigen::Index>(j) * in_, t, in_, 1);
    dx[s] = std::move(dxi);
  }
  return dx;
}

std::string Conv1d::describe() const {
  return "conv1d(" + std::to_string(in_) + "->" + std::to_string(out_) +
         ", k=" + std::to_string(k_) + ")";
}

Batch ReLU::forward(const Batch &x, bool, Rng *) {
  Batch y(x.size());
  mask_.resize(x.size());
  for (std::size_t s = 0; s < x.size(); ++s) {
    mask_[s] = (x[s].array() > 0.0).cast<double>();
    y[s] = x[s].cwiseProduct(mask_[s]);
  }
  return y;
}

Batch ReLU::backward(const Batch &dy) {
  Batch dx(dy.size());
  for (std::size_t s = 0; s < dy.size(); ++s)
    dx[s] = dy[s].cwiseProduct(mask_[s]);
  return dx;
}

Lstm::Lstm(int input_dim, int hidden, Rng *rng, const std::string &name)
    : in_(input_dim),
      hidden_(hidden),
      Wih_(name + ".Wih", 4 * hidden, input_dim),
      Whh_(name + ".Whh", 4 * hidden, hidden),
      b_(name + ".b", 4 * hidden, 1) {
  if (input_dim < 1 || hidden < 1)
    throw ConfigError("Lstm: dimensions must be positive");
  glorot_init(&Wih_, rng);
  glorot_init(&Whh_, rng);
  // Forget-gate bias 1 keeps early gradients flowing. Gate order: i,f,g,o.
  b_.value.block(hidden_, 0, hidden_, 1).setConstant(1.0);
}

Batch Lstm::forward(const Batch &x, bool, Rng *) {
  if (x.empty()) throw DataError("Lstm: empty batch");
  batch_ = static_cast<Eigen::Index>(x.size());
  steps_ = x[0].cols();
  for (const auto &xi : x)
    if (xi.rows() != in_ || xi.cols() != steps_)
      throw DataError("Lstm: inconsistent input shapes in batch");

  xs_.assign(steps_, Eigen::MatrixXd(in_, batch_));
  is_.assign(steps_, Eigen::MatrixXd(hidden_, batch_));
  fs_ = is_;
  gs_ = is_;
  os_ = is_;
  cs_ = is_;
  tc_ = is_;
  hs_ = is_;

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hidden_, batch_);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(hidden_, batch_);
  for (Eigen::Index t = 0; t < steps_; ++t) {
    for (Eigen::Index s = 0; s < batch_; ++s) xs_[t].col(s) = x[s].col(t);
    Eigen::MatrixXd gates =
        (Wih_.value * xs_[t] + Whh_.value * h).colwise() + b_.value.col(0);
    for (Eigen::Index r = 0; r < hidden_; ++r)
      for (Eigen::Index s = 0; s < batch_; ++s) {
        is_[t](r, s) = sigmoid(gates(r, s));
        fs_[t](r, s) = sigmoid(gates(hidden_ + r, s));
        gs_[t](r, s) = std::tanh(gates(2 * hidden_ + r, s));
        os_[t](r, s) = sigmoid(gates(3 * hidden_ + r, s));
      }
    c = fs_[t].cwiseProduct(c) + is_[t].cwiseProduct(gs_[t]);
    cs_[t] = c;
    tc_[t] = c.array().tanh();
    h = os_[t].cwiseProduct(tc_[t]);
    hs_[t] = h;
  }

  Batch y(x.size(), Eigen::MatrixXd(hidden_, steps_));
  for (Eigen::Index s = 0; s < batch_; ++s)
    for (Eigen::Index t = 0; t < steps_; ++t) y[s].col(t) = hs_[t].col(s);
  return y;
}

Batch Lstm::backward(const Batch &dy) {
  if (static_cast<Eigen::Index>(dy.size()) != batch_)
    throw DataError("Lstm: backward batch mismatch");
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(hidden_, batch_);
  Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(hidden_, batch_);
  std::vector<Eigen::MatrixXd> dxs(steps_);

  for (Eigen::Index t = steps_ - 1; t >= 0; --t) {
    Eigen::MatrixXd dh = dh_next;
    for (Eigen::Index s = 0; s < batch_; ++s) dh.col(s) += dy[s].col(t);
    const Eigen::MatrixXd do_ = dh.cwiseProduct(tc_[t]);
    const Eigen::MatrixXd dct =
        dh.cwiseProduct(os_[t])
            .cwiseProduct((1.0 - tc_[t].array().square()).matrix()) +
        dc_next;
    const Eigen::MatrixXd c_prev =
        t == 0 ? Eigen::MatrixXd::Zero(hidden_, batch_) : cs_[t - 1];
    const Eigen::MatrixXd di = dct.cwiseProduct(gs_[t]);
    const Eigen::MatrixXd df = dct.cwiseProduct(c_prev);
    const Eigen::MatrixXd dg = dct.cwiseProduct(is_[t]);

    Eigen::MatrixXd G(4 * hidden_, batch_);
    G.topRows(hidden_) =
        di.cwiseProduct(is_[t]).cwiseProduct(
            (1.0 - is_[t].array()).matrix());
    G.middleRows(hidden_, hidden_) =
        df.cwiseProduct(fs_[t]).cwiseProduct(
            (1.0 - fs_[t].array()).matrix());
    G.middleRows(2 * hidden_, hidden_) =
        dg.cwiseProduct((1.0 - gs_[t].array().square()).matrix());
    G.bottomRows(hidden_) =
        do_.cwiseProduct(os_[t]).cwiseProduct(
            (1.0 - os_[t].array()).matrix());

    const Eigen::MatrixXd h_prev =
        t == 0 ? Eigen::MatrixXd::Zero(hidden_, batch_) : hs_[t - 1];
    Wih_.grad += G * xs_[t].transpose();
    Whh_.grad += G * h_prev.transpose();
    b_.grad.col(0) += G.rowwise().sum();

    dxs[t] = Wih_.value.transpose() * G;
    dh_next = Whh_.value.transpose() * G;
    dc_next = dct.cwiseProduct(fs_[t]);
  }

  Batch dx(static_cast<std::size_t>(batch_), Eigen::MatrixXd(in_, steps_));
  for (Eigen::Index s = 0; s < batch_; ++s)
    for (Eigen::Index t = 0; t < steps_; ++t) dx[s].col(t) = dxs[t].col(s);
  return dx;
}

std::string Lstm::describe() const {
  return "lstm(" + std::to_string(in_) + "->" + std::to_string(hidden_) + ")";
}

Dropout::Dropout(double rate) : rate_(rate) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("Dropout: rate must lie in [0, 1)");
}

Batch Dropout::forward(const Batch &x, bool train, Rng *rng) {
  if (!train || rate_ == 0.0) {
    identity_ = true;
    return x;
  }
  if (rng == nullptr) throw ConfigError("Dropout: training needs an rng");
  identity_ = false;
  const double keep = 1.0 - rate_;
  Batch y(x.size());
  mask_.resize(x.size());
  for (std::size_t s = 0; s < x.size(); ++s) {
    mask_[s].resize(x[s].rows(), x[s].cols());
    for (Eigen::Index c = 0; c < x[s].cols(); ++c)
      for (Eigen::Index r = 0; r < x[s].rows(); ++r)
        mask_[s](r, c) = rng->uniform() < keep ? 1.0 / keep : 0.0;
    y[s] = x[s].cwiseProduct(mask_[s]);
  }
  return y;
}

Batch Dropout::backward(const Batch &dy) {
  if (identity_) return dy;
  Batch dx(dy.size());
  for (std::size_t s = 0; s < dy.size(); ++s)
    dx[s] = dy[s].cwiseProduct(mask_[s]);
  return dx;
}

std::string Dropout::describe() const {
  return "dropout(" + std::to_string(rate_) + ")";
}

Dense::Dense(int input_dim, int output_dim, Rng *rng, const std::string &name)
    : in_(input_dim),
      out_(output_dim),
      W_(name + ".W", output_dim, input_dim),
      b_(name + ".b", output_dim, 1) {
  if (input_dim < 1 || output_dim < 1)
    throw ConfigError("Dense: dimensions must be positive");
  glorot_init(&W_, rng);
}

Batch Dense::forward(const Batch &x, bool, Rng *) {
  x_ = x;
  Batch y(x.size());
  for (std::size_t s = 0; s < x.size(); ++s) {
    if (x[s].rows() != in_ || x[s].cols() != 1)
      throw DataError("Dense: expected [" + std::to_string(in_) +
                      " x 1] input for " + describe());
    y[s] = W_.value * x[s] + b_.value;
  }
  return y;
}

Batch Dense::backward(const Batch &dy) {
  Batch dx(dy.size());
  for (std::size_t s = 0; s < dy.size(); ++s) {
    W_.grad += dy[s] * x_[s].transpose();
    b_.grad += dy[s];
    dx[s] = W_.value.transpose() * dy[s];
  }
  return dx;
}

std::string Dense::describe() const {
  return "dense(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
}

Batch Flatten::forward(const Batch &x, bool, Rng *) {
  Batch y(x.size());
  rows_ = x.empty() ? 0 : x[0].rows();
  cols_ = x.empty() ? 0 : x[0].cols();
  for (std::size_t s = 0; s < x.size(); ++s) {
    Eigen::MatrixXd flat(x[s].size(), 1);
    flat.col(0) = Eigen::Map<const Eigen::VectorXd>(x[s].data(), x[s].size());
    y[s] = std::move(flat);
  }
  return y;
}

Batch Flatten::backward(const Batch &dy) {
  Batch dx(dy.size());
  for (std::size_t s = 0; s < dy.size(); ++s)
    dx[s] = Eigen::Map<const Eigen::MatrixXd>(dy[s].data(), rows_, cols_);
  return dx;
}

Batch Reduce::forward(const Batch &x, bool, Rng *) {
  Batch y(x.size());
  cols_ = x.empty() ? 0 : x[0].cols();
  for (std::size_t s = 0; s < x.size(); ++s) {
    if (mean_)
      y[s] = x[s].rowwise().mean();
    else
      y[s] = x[s].col(x[s].cols() - 1);
  }
  return y;
}

Batch Reduce::backward(const Batch &dy) {
  Batch dx(dy.size());
  for (std::size_t s = 0; s < dy.size(); ++s) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dy[s].rows(), cols_);
    if (mean_)
      g = (dy[s] / static_cast<double>(cols_)).replicate(1, cols_);
    else
      g.col(cols_ - 1) = dy[s];
    dx[s] = std::move(g);
  }
  return dx;
}

}  // namespace iflf
