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

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ecam;
using nn::Matrix;

namespace
{

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64 & gen)
{
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = n(gen);
  }
  return m;
}

// Direct 3x3 / stride 2 / pad 1 convolution.
Matrix naive_conv(const nn::Conv2d & conv, const Matrix & x, int batch, int size)
{
  const int out = nn::Conv2d::output_size(size);
  Matrix y(conv.out_channels, batch * out * out);
  for (int o = 0; o < conv.out_channels; ++o) {
    for (int b = 0; b < batch; ++b) {
      for (int oy = 0; oy < out; ++oy) {
        for (int ox = 0; ox < out; ++ox) {
          double acc = conv.bias.value(o, 0);
          for (int c = 0; c < conv.in_channels; ++c) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = 2 * oy - 1 + ky;
                const int ix = 2 * ox - 1 + kx;
                if (iy < 0 || ix < 0 || iy >= size || ix >= size) {
                  continue;
                }
                acc += conv.weight.value(o, c * 9 + ky * 3 + kx) * x(c, b * size * size + iy * size + ix);
              }
            }
          }
          y(o, b * out * out + oy * out + ox) = acc;
        }
      }
    }
  }
  return y;
}

}  // namespace

TEST_CASE("init_uniform stays within 1/sqrt(fan_in)")
{
  nn::Param p("w", 50, 40);
  Rng rng(1);
  nn::init_uniform(p, 40, rng);
  CHECK(p.value.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(40.0));
  CHECK(p.value.cwiseAbs().maxCoeff() > 0.5 / std::sqrt(40.0));
}

TEST_CASE("Linear forward and backward")
{
  std::mt19937_64 gen(2);
  nn::Linear l("l", 5, 3);
  Rng rng(3);
  l.init(rng);
  const Matrix x = random_matrix(5, 4, gen);
  const Matrix y = l.forward(x);
  CHECK((y - ((l.weight.value * x).colwise() + l.bias.value.col(0))).norm() < 1e-14);
  const Matrix dy = random_matrix(3, 4, gen);
  const Matrix dx = l.backward(x, dy);
  CHECK((dx - l.weight.value.transpose() * dy).norm() < 1e-14);
  CHECK((l.weight.grad - dy * x.transpose()).norm() < 1e-14);
  CHECK((l.bias.grad - dy.rowwise().sum()).norm() < 1e-14);
}

TEST_CASE("Conv2d matches a direct convolution for odd and even sizes")
{
  std::mt19937_64 gen(4);
  for (const int size : {32, 7, 2, 1}) {
    nn::Conv2d conv("c", 3, 4);
    Rng rng(5);
    conv.init(rng);
    const Matrix x = random_matrix(3, 2 * size * size, gen);
    Matrix cols;
    const Matrix y = conv.forward(x, 2, size, cols);
    CHECK((y - naive_conv(conv, x, 2, size)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Conv2d backward matches finite differences")
{
  std::mt19937_64 gen(6);
  const int size = 6;
  nn::Conv2d conv("c", 2, 3);
  Rng rng(7);
  conv.init(rng);
  Matrix x = random_matrix(2, 2 * size * size, gen);
  const Matrix w = random_matrix(3, 2 * 9, gen);  // objective sum(w .* y)
  Matrix cols;
  conv.forward(x, 2, size, cols);
  conv.weight.grad.setZero();
  conv.bias.grad.setZero();
  const Matrix dx = conv.backward(cols, w, 2, size);
  const auto f = [&]() {
    Matrix c2;
    return conv.forward(x, 2, size, c2).cwiseProduct(w).sum();
  };
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + eps;
    const double fp = f();
    x.data()[i] = orig - eps;
    const double fm = f();
    x.data()[i] = orig;
    CHECK(dx.data()[i] == doctest::Approx((fp - fm) / (2 * eps)).epsilon(1e-6));
  }
  for (nn::Param * p : {&conv.weight, &conv.bias}) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + eps;
      const double fp = f();
      p->value.data()[i] = orig - eps;
      const double fm = f();
      p->value.data()[i] = orig;
      CHECK(p->grad.data()[i] == doctest::Approx((fp - fm) / (2 * eps)).epsilon(1e-6));
    }
  }
}

TEST_CASE("activations and their derivatives")
{
  Matrix pre(1, 5);
  pre << -3.0, -0.5, 0.0, 0.5, 3.0;
  const Matrix e = nn::elu_forward(pre);
  CHECK(e(0, 0) == doctest::Approx(std::expm1(-3.0)));
  CHECK(e(0, 2) == 0.0);
  CHECK(e(0, 4) == 3.0);
  const Matrix ones = Matrix::Ones(1, 5);
  const Matrix de = nn::elu_backward(pre, ones);
  CHECK(de(0, 0) == doctest::Approx(std::exp(-3.0)));
  CHECK(de(0, 4) == 1.0);
  const Matrix t = nn::tanh_forward(pre);
  const Matrix dt = nn::tanh_backward(t, ones);
  CHECK(dt(0, 1) == doctest::Approx(1.0 - std::tanh(-0.5) * std::tanh(-0.5)));
}
