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

// Desk-scale latent generative model: a latent mapper psi: R^dz -> R^dw and
// a smooth generator g: R^dw -> R^dx with exact Jacobians.
//
// Both networks share a random orthonormal "semantic frame" R. The mapper's
// output layer is scaled by (1+k)^-spectrum_decay along R's k-th column, so
// the latent covariance has a decaying spectrum; the generator's input layer
// is scaled by (1+k)^-sensitivity_decay along the same column, so directions
// with large latent variance also move the image the most. Output weights
// are spatially smoothed so images carry low-frequency structure.

#ifndef LATENTFP_GENERATOR_HPP_
#define LATENTFP_GENERATOR_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "latentfp/types.hpp"

namespace latentfp {

struct GeneratorSpec {
  int d_z = 64;
  int d_w = 64;
  int image_h = 16;
  int image_w = 16;
  int channels = 1;
  std::vector<int> layer_widths = {128, 128};
  std::vector<int> psi_layer_widths = {128};
  /// One of: tanh, softplus, sigmoid, silu, gelu. Non-C1 tags are rejected.
  std::string activation = "tanh";
  std::uint64_t seed = 1;
  PixelRange output_range{0.0, 1.0};

  /// Zero hidden layers in both networks and no output squashing:
  /// psi(z) = P z + c, g(w) = A w + b.
  bool affine = false;
  /// With `affine`, psi is the identity (requires d_z == d_w).
  bool psi_identity = false;

  double spectrum_decay = 0.75;
  double sensitivity_decay = 0.5;
  /// Standard deviation, in pixels, of the spatial correlation of output
  /// weights. 0 disables smoothing.
  double output_smoothing = 1.0;
  /// Linear path added to g's output pre-activation. Frame direction k
  /// drives a spatial pattern smoothed with a width interpolated
  /// geometrically from coarse_smoothing (k = 0) to fine_smoothing
  /// (k = d_w - 1), so leading directions change large-scale structure.
  /// Its spread on p_w relative to the network path; 0 disables it.
  double coarse_path = 2.0;
  double coarse_smoothing = 4.0;
  double fine_smoothing = 0.5;

  int d_x() const { return image_h * image_w * channels; }
  bool operator==(const GeneratorSpec&) const = default;
};

enum class Activation { kTanh, kSoftplus, kSigmoid, kSilu, kGelu };

/// Throws std::invalid_argument for unknown or non-smooth tags (relu, ...).
Activation parse_activation(const std::string& tag);

/// Cached forward pass over a batch of latents (one per column).
struct ForwardPass {
  std::vector<Matrix> pre;  // pre-activation of every layer, in order
  Matrix output;            // squashed output, d_x x batch
};

class Generator {
 public:
  /// Builds g and psi from the spec. Weights are fully determined by
  /// (seed, architecture): equal specs give bit-identical generators.
  static Generator build(const GeneratorSpec& spec);

  /// Explicit affine model psi(z) = P z + c, g(w) = A w + b (no squashing).
  static Generator from_affine(Matrix A, Vector b, Matrix P, Vector c, int image_h, int image_w,
                               int channels = 1, PixelRange range = {});

  const GeneratorSpec& spec() const { return spec_; }
  int d_z() const { return spec_.d_z; }
  int d_w() const { return spec_.d_w; }
  int d_x() const { return spec_.d_x(); }
  bool is_affine() const { return spec_.affine; }
  bool squashes() const { return !spec_.affine; }

  LatentSample map_latent(const Vector& z) const;
  ImageGrid evaluate(const Vector& w) const;
  /// Exact d_x x d_w Jacobian of evaluate at w.
  Matrix jacobian(const Vector& w) const;

  /// Columnwise batch versions.
  Matrix map_latent_batch(const Matrix& z) const;
  Matrix evaluate_batch(const Matrix& w) const;
  ForwardPass forward(const Matrix& w) const;
  /// J(w_i)^T grad_i for every column i of the batch in `pass`.
  Matrix backward(const ForwardPass& pass, const Matrix& grad_output) const;

  ImageGrid to_image(const Vector& pixels) const;

  /// Fraction of pixels within 1% of the output range edges.
  double saturation_fraction(const ImageGrid& img) const;

  /// The affine map (A, b) of g; only valid when is_affine().
  const Matrix& affine_matrix() const;
  const Vector& affine_offset() const;

 private:
  struct Layer {
    Matrix weight;
    Vector bias;
    bool activated = false;
  };
  struct Weights {
    std::vector<Layer> psi;
    std::vector<Layer> g;
    Matrix skip;  // d_x x d_w, empty when disabled
  };

  Matrix run_psi(const Matrix& z) const;
  void check_latent(const Vector& w) const;

  GeneratorSpec spec_;
  Activation act_ = Activation::kTanh;
  std::shared_ptr<const Weights> weights_;
};

}  // namespace latentfp

#endif  // LATENTFP_GENERATOR_HPP_
