// Copyright 2026 The LatentFP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "latentfp/generator.hpp"
#include "latentfp/rng.hpp"
#include "test_util.hpp"

namespace latentfp {
namespace {

using testing::default_generator;
using testing::fd_column;

TEST(Generator, SameSeedGivesIdenticalOutput) {
  const Generator a = Generator::build(GeneratorSpec{});
  const Generator b = Generator::build(GeneratorSpec{});
  const Vector w = Vector::Zero(a.d_w());
  EXPECT_EQ(a.evaluate(w).pixels, b.evaluate(w).pixels);
}

TEST(Generator, DifferentSeedsDiffer) {
  GeneratorSpec s2;
  s2.seed = 2;
  const Generator a = Generator::build(GeneratorSpec{});
  const Generator b = Generator::build(s2);
  Rng rng = make_rng(3);
  const Vector w = standard_normal(rng, a.d_w());
  EXPECT_GT((a.evaluate(w).pixels - b.evaluate(w).pixels).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Generator, AffineEvaluateIsMatrixProduct) {
  const Generator gen = testing::random_affine(5, 6, 4, 3, 7);
  Rng rng = make_rng(8);
  const Vector w = standard_normal(rng, 6);
  const Matrix& A = gen.affine_matrix();
  const Vector& b = gen.affine_offset();
  // Hand-rolled product, independent of Eigen's.
  for (int i = 0; i < gen.d_x(); ++i) {
    double v = b[i];
    for (int j = 0; j < 6; ++j) v += A(i, j) * w[j];
    EXPECT_NEAR(gen.evaluate(w).pixels[i], v, 1e-12);
  }
  EXPECT_TRUE(gen.jacobian(w).isApprox(A));
  EXPECT_EQ(gen.evaluate(Vector::Zero(6)).pixels, b);
}

TEST(Generator, AffineSpecBuildsExactAffineMap) {
  GeneratorSpec s;
  s.affine = true;
  s.d_z = s.d_w = 8;
  s.image_h = s.image_w = 4;
  s.psi_identity = true;
  const Generator gen = Generator::build(s);
  const Vector z = Vector::LinSpaced(8, -1, 1);
  EXPECT_EQ(gen.map_latent(z).w, z);
  const Vector w = Vector::LinSpaced(8, 0.5, -0.3);
  const Vector expect = gen.affine_matrix() * w + gen.affine_offset();
  EXPECT_LT((gen.evaluate(w).pixels - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Generator, MapLatentAffineIdentityAtZeroGivesBias) {
  const int d = 4;
  const Generator gen = Generator::from_affine(Matrix::Identity(4, d), Vector::Zero(4),
                                               Matrix::Identity(d, d), Vector::Constant(d, 0.25), 2, 2);
  EXPECT_EQ(gen.map_latent(Vector::Zero(d)).w, Vector::Constant(d, 0.25));
}

TEST(Generator, PureFunctions) {
  const Generator& gen = default_generator();
  Rng rng = make_rng(11);
  const Vector z = standard_normal(rng, gen.d_z());
  EXPECT_EQ(gen.map_latent(z).w, gen.map_latent(z).w);
  const Vector w = gen.map_latent(z).w;
  EXPECT_EQ(gen.evaluate(w).pixels, gen.evaluate(w).pixels);
}

TEST(Generator, OutputInsideRange) {
  const Generator& gen = default_generator();
  Rng rng = make_rng(12);
  for (int k = 0; k < 20; ++k) {
    const Vector w = 5.0 * standard_normal(rng, gen.d_w());
    const ImageGrid img = gen.evaluate(w);
    EXPECT_GE(img.pixels.minCoeff(), 0.0);
    EXPECT_LE(img.pixels.maxCoeff(), 1.0);
    EXPECT_EQ(img.height, 16);
  }
}

TEST(Generator, JacobianMatchesCentralDifferences) {
  const Generator& gen = default_generator();
  Rng rng = make_rng(13);
  for (int probe = 0; probe < 5; ++probe) {
    const Vector w = gen.map_latent(standard_normal(rng, gen.d_z())).w;
    const Matrix J = gen.jacobian(w);
    for (int j = 0; j < gen.d_w(); j += 7) {
      const Vector fd = fd_column(gen, w, j);
      EXPECT_LE((fd - J.col(j)).norm() / J.col(j).norm(), 1e-4) << "column " << j;
    }
  }
}

TEST(Generator, BatchAndBackwardAgreeWithJacobian) {
  const Generator& gen = default_generator();
  Rng rng = make_rng(14);
  Matrix w(gen.d_w(), 3);
  for (int i = 0; i < 3; ++i) w.col(i) = standard_normal(rng, gen.d_w());
  const Matrix out = gen.evaluate_batch(w);
  Matrix g(gen.d_x(), 3);
  for (int i = 0; i < 3; ++i) g.col(i) = standard_normal(rng, gen.d_x());
  const Matrix back = gen.backward(gen.forward(w), g);
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT((out.col(i) - gen.evaluate(w.col(i)).pixels).norm(), 1e-12);
    const Vector expect = gen.jacobian(w.col(i)).transpose() * g.col(i);
    EXPECT_LT((back.col(i) - expect).norm(), 1e-9 * expect.norm());
  }
}

TEST(Generator, JacobianVariesOnNonlinearGenerator) {
  const Generator& gen = default_generator();
  const Vector a = Vector::Zero(gen.d_w());
  const Vector b = Vector::Constant(gen.d_w(), 0.5);
  EXPECT_GT((gen.jacobian(a) - gen.jacobian(b)).norm(), 1e-6);
}

TEST(Generator, LipschitzAlongSegment) {
  const Generator& gen = default_generator();
  Rng rng = make_rng(15);
  const Vector w = gen.map_latent(standard_normal(rng, gen.d_z())).w;
  const Vector d = 0.05 * standard_normal(rng, gen.d_w());
  double L = 0;
  for (int k = 0; k <= 20; ++k) {
    const Eigen::JacobiSVD<Matrix> svd(gen.jacobian(w + (k / 20.0) * d));
    L = std::max(L, svd.singularValues()[0]);
  }
  const double step = (gen.evaluate(w + d).pixels - gen.evaluate(w).pixels).norm();
  EXPECT_LE(step, 1.05 * L * d.norm());
}

TEST(Generator, RejectsBadSpecs) {
  GeneratorSpec s;
  s.activation = "relu";
  EXPECT_THROW(Generator::build(s), std::invalid_argument);
  s = GeneratorSpec{};
  s.activation = "bogus";
  EXPECT_THROW(Generator::build(s), std::invalid_argument);
  s = GeneratorSpec{};
  s.image_h = 0;
  EXPECT_THROW(Generator::build(s), std::invalid_argument);
  s = GeneratorSpec{};
  s.d_w = 0;
  EXPECT_THROW(Generator::build(s), std::invalid_argument);
}

TEST(Generator, DimensionMismatchThrows) {
  const Generator& gen = default_generator();
  EXPECT_THROW(gen.evaluate(Vector::Zero(3)), std::invalid_argument);
  EXPECT_THROW(gen.map_latent(Vector::Zero(3)), std::invalid_argument);
  EXPECT_THROW(gen.jacobian(Vector::Zero(3)), std::invalid_argument);
}

TEST(Generator, SmoothActivationsAllBuild) {
  for (const char* tag : {"tanh", "softplus", "sigmoid", "silu", "gelu"}) {
    GeneratorSpec s;
    s.activation = tag;
    s.layer_widths = {32};
    s.psi_layer_widths = {32};
    const Generator gen = Generator::build(s);
    const Vector w = Vector::Constant(gen.d_w(), 0.1);
    const Matrix J = gen.jacobian(w);
    EXPECT_LE((fd_column(gen, w, 3) - J.col(3)).norm() / J.col(3).norm(), 1e-4) << tag;
  }
}

}  // namespace
}  // namespace latentfp
