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

#include "ecam/nn.hpp"

#include <cmath>

namespace ecam::nn
{

namespace
{

constexpr int kKernel = 3;
constexpr int kTaps = kKernel * kKernel;

void im2col(const Matrix & x, int channels, int batch, int size, Matrix & cols)
{
  const int out = Conv2d::output_size(size);
  const Eigen::Index plane = static_cast<Eigen::Index>(size) * size;
  const Eigen::Index out_plane = static_cast<Eigen::Index>(out) * out;
  cols.setZero(static_cast<Eigen::Index>(channels) * kTaps, batch * out_plane);
  for (int b = 0; b < batch; ++b) {
    for (int oy = 0; oy < out; ++oy) {
      for (int ox = 0; ox < out; ++ox) {
        const Eigen::Index col = b * out_plane + oy * out + ox;
        for (int ky = 0; ky < kKernel; ++ky) {
          const int iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= size) {
            continue;
          }
          for (int kx = 0; kx < kKernel; ++kx) {
            const int ix = 2 * ox - 1 + kx;
            if (ix < 0 || ix >= size) {
              continue;
            }
            const Eigen::Index src = b * plane + iy * size + ix;
            for (int c = 0; c < channels; ++c) {
              cols(c * kTaps + ky * kKernel + kx, col) = x(c, src);
            }
          }
        }
      }
    }
  }
}

Matrix col2im(const Matrix & dcols, int channels, int batch, int size)
{
  const int out = Conv2d::output_size(size);
  const Eigen::Index plane = static_cast<Eigen::Index>(size) * size;
  const Eigen::Index out_plane = static_cast<Eigen::Index>(out) * out;
  Matrix dx = Matrix::Zero(channels, batch * plane);
  for (int b = 0; b < batch; ++b) {
    for (int oy = 0; oy < out; ++oy) {
      for (int ox = 0; ox < out; ++ox) {
        const Eigen::Index col = b * out_plane + oy * out + ox;
        for (int ky = 0; ky < kKernel; ++ky) {
          const int iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= size) {
            continue;
          }
          for (int kx = 0; kx < kKernel; ++kx) {
            const int ix = 2 * ox - 1 + kx;
            if (ix < 0 || ix >= size) {
              continue;
            }
            const Eigen::Index dst = b * plane + iy * size + ix;
            for (int c = 0; c < channels; ++c) {
              dx(c, dst) += dcols(c * kTaps + ky * kKernel + kx, col);
            }
          }
        }
      }
    }
  }
  return dx;
}

}  // namespace

void init_uniform(Param & p, int fan_in, Rng & rng)
{
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
      p.value(i, j) = rng.uniform(-bound, bound);
    }
  }
}

Linear::Linear(const std::string & name, int in, int out)
: weight(name + ".weight", out, in), bias(name + ".bias", out, 1)
{
}

void Linear::init(Rng & rng)
{
  init_uniform(weight, in_dim(), rng);
  init_uniform(bias, in_dim(), rng);
}

Matrix Linear::forward(const Matrix & x) const
{
  Matrix y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Matrix Linear::backward(const Matrix & x, const Matrix & dy)
{
  weight.grad.noalias() += dy * x.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
  return weight.value.transpose() * dy;
}

void Linear::visit(const ParamVisitor & f)
{
  f(weight);
  f(bias);
}

void Linear::visit(const ConstParamVisitor & f) const
{
  f(weight);
  f(bias);
}

Conv2d::Conv2d(const std::string & name, int in, int out)
: weight(name + ".weight", out, in * kTaps), bias(name + ".bias", out, 1), in_channels(in), out_channels(out)
{
}

void Conv2d::init(Rng & rng)
{
  init_uniform(weight, in_channels * kTaps, rng);
  init_uniform(bias, in_channels * kTaps, rng);
}

Matrix Conv2d::forward(const Matrix & x, int batch, int size, Matrix & cols) const
{
  im2col(x, in_channels, batch, size, cols);
  Matrix y = weight.value * cols;
  y.colwise() += bias.value.col(0);
  return y;
}

Matrix Conv2d::backward(const Matrix & cols, const Matrix & dy, int batch, int size)
{
  weight.grad.noalias() += dy * cols.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
  const Matrix dcols = weight.value.transpose() * dy;
  return col2im(dcols, in_channels, batch, size);
}

void Conv2d::visit(const ParamVisitor & f)
{
  f(weight);
  f(bias);
}

void Conv2d::visit(const ConstParamVisitor & f) const
{
  f(weight);
  f(bias);
}

Matrix tanh_forward(const Matrix & pre)
{
  return pre.array().tanh().matrix();
}

Matrix tanh_backward(const Matrix & out, const Matrix & dout)
{
  return (dout.array() * (1.0 - out.array().square())).matrix();
}

Matrix elu_forward(const Matrix & pre)
{
  return pre.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

Matrix elu_backward(const Matrix & pre, const Matrix & dout)
{
  return dout.binaryExpr(pre, [](double g, double v) { return v > 0.0 ? g : g * std::exp(v); });
}

}  // namespace ecam::nn
