// Copyright 2026 The ECAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ECAM__NN_HPP_
#define ECAM__NN_HPP_

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

#include "ecam/rng.hpp"

namespace ecam::nn
{

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Param
{
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
  : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols))
  {
  }
};

using ParamVisitor = std::function<void(Param &)>;
using ConstParamVisitor = std::function<void(const Param &)>;

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform(Param & p, int fan_in, Rng & rng);

/// Affine map y = W x + b applied column-wise to a batch.
struct Linear
{
  Param weight;
  Param bias;

  Linear() = default;
  Linear(const std::string & name, int in, int out);

  int in_dim() const { return static_cast<int>(weight.value.cols()); }
  int out_dim() const { return static_cast<int>(weight.value.rows()); }

  void init(Rng & rng);
  Matrix forward(const Matrix & x) const;
  // Accumulates weight/bias gradients and returns dL/dx.
  Matrix backward(const Matrix & x, const Matrix & dy);
  void visit(const ParamVisitor & f);
  void visit(const ConstParamVisitor & f) const;
};

/// 3x3, stride-2, zero-padded convolution over square single-sample maps.
///
/// Activations are laid out as channels x (batch * size * size), sample-major
/// then row-major within a sample.
struct Conv2d
{
  Param weight;  // out x (in * 9)
  Param bias;    // out x 1
  int in_channels{0};
  int out_channels{0};

  Conv2d() = default;
  Conv2d(const std::string & name, int in, int out);

  void init(Rng & rng);
  static int output_size(int input_size) { return (input_size + 1) / 2; }

  // Fills `cols` with the im2col expansion (needed again by backward).
  Matrix forward(const Matrix & x, int batch, int size, Matrix & cols) const;
  Matrix backward(const Matrix & cols, const Matrix & dy, int batch, int size);
  void visit(const ParamVisitor & f);
  void visit(const ConstParamVisitor & f) const;
};

Matrix tanh_forward(const Matrix & pre);
// dL/dpre given the tanh output and dL/dout.
Matrix tanh_backward(const Matrix & out, const Matrix & dout);

Matrix elu_forward(const Matrix & pre);
Matrix elu_backward(const Matrix & pre, const Matrix & dout);

}  // namespace ecam::nn

#endif  // ECAM__NN_HPP_
