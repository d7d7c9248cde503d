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

#include "latentfp/generator.hpp"

#include <cmath>
#include <stdexcept>

#include "latentfp/rng.hpp"

namespace latentfp {
namespace {

constexpr int kProbeCount = 256;

// Stream indices under the spec seed.
enum Stream : std::uint64_t {
  kFrameStream = 1,
  kProbeStream = 2,
  kPsiStream = 100,
  kGenStream = 200,
};

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kSoftplus:
      return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kSilu:
      return x * sigmoid(x);
    case Activation::kGelu:
      return 0.5 * x * std::erfc(-x / std::sqrt(2.0));
  }
  return x;
}

double activate_derivative(Activation a, double x) {
  switch (a) {
    case Activation::kTanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::kSoftplus:
      return sigmoid(x);
    case Activation::kSigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::kSilu: {
      const double s = sigmoid(x);
      return s + x * s * (1.0 - s);
    }
    case Activation::kGelu:
      return 0.5 * std::erfc(-x / std::sqrt(2.0)) +
             x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  }
  return 1.0;
}

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

// Random orthonormal matrix with a deterministic sign convention.
Matrix random_frame(Rng& rng, int n) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(rng, n, n, 1.0));
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR();
  for (int k = 0; k < n; ++k)
    if (r(k, k) < 0) q.col(k) = -q.col(k);
  return q;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Separable Gaussian smoothing of every column of `m`, each column being a
// (channels, h, w) image.
Matrix smooth_columns(const Matrix& m, int channels, int h, int w, double sigma) {
  if (sigma <= 0) return m;
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0;
  for (int k = -radius; k <= radius; ++k)
    total += kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  for (double& k : kernel) k /= total;

  Matrix out(m.rows(), m.cols());
  Vector tmp(m.rows());
  for (Eigen::Index col = 0; col < m.cols(); ++col) {
    for (int c = 0; c < channels; ++c) {
      const Eigen::Index base = Eigen::Index(c) * h * w;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double acc = 0;
          for (int k = -radius; k <= radius; ++k)
            acc += kernel[k + radius] * m(base + y * w + reflect_index(x + k, w), col);
          tmp[base + y * w + x] = acc;
        }
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double acc = 0;
          for (int k = -radius; k <= radius; ++k)
            acc += kernel[k + radius] * tmp[base + reflect_index(y + k, h) * w + x];
          out(base + y * w + x, col) = acc;
        }
    }
  }
  return out;
}

double matrix_stddev(const Matrix& m) {
  const double mean = m.mean();
  return std::sqrt((m.array() - mean).square().mean());
}

void validate(const GeneratorSpec& spec) {
  if (spec.d_z <= 0 || spec.d_w <= 0)
    throw std::invalid_argument("GeneratorSpec: latent dimensions must be positive");
  if (spec.image_h <= 0 || spec.image_w <= 0 || spec.channels <= 0 || spec.d_x() == 0)
    throw std::invalid_argument("GeneratorSpec: output shape must be positive (d_x > 0)");
  for (int width : spec.layer_widths)
    if (width <= 0) throw std::invalid_argument("GeneratorSpec: layer widths must be positive");
  for (int width : spec.psi_layer_widths)
    if (width <= 0) throw std::invalid_argument("GeneratorSpec: psi widths must be positive");
  if (!(spec.coarse_path >= 0) || !(spec.coarse_smoothing >= 0) || !(spec.fine_smoothing >= 0))
    throw std::invalid_argument("GeneratorSpec: coarse path settings must be >= 0");
  if (!(spec.output_range.hi > spec.output_range.lo))
    throw std::invalid_argument("GeneratorSpec: empty output range");
  if (spec.psi_identity && (!spec.affine || spec.d_z != spec.d_w))
    throw std::invalid_argument("GeneratorSpec: psi_identity needs affine mode and d_z == d_w");
  parse_activation(spec.activation);
}

}  // namespace

Activation parse_activation(const std::string& tag) {
  if (tag == "tanh") return Activation::kTanh;
  if (tag == "softplus") return Activation::kSoftplus;
  if (tag == "sigmoid") return Activation::kSigmoid;
  if (tag == "silu" || tag == "swish") return Activation::kSilu;
  if (tag == "gelu") return Activation::kGelu;
  if (tag == "relu" || tag == "leaky_relu" || tag == "hardtanh" || tag == "abs")
    throw std::invalid_argument("activation '" + tag + "' is not continuously differentiable");
  throw std::invalid_argument("unknown activation '" + tag + "'");
}

Generator Generator::build(const GeneratorSpec& spec) {
  validate(spec);
  Generator gen;
  gen.spec_ = spec;
  gen.act_ = parse_activation(spec.activation);
  auto weights = std::make_shared<Weights>();

  const int dw = spec.d_w;
  Rng frame_rng = make_rng(derive_seed(spec.seed, kFrameStream));
  const Matrix frame = random_frame(frame_rng, dw);
  Vector latent_scale(dw), sensitivity(dw);
  for (int k = 0; k < dw; ++k) {
    latent_scale[k] = std::pow(1.0 + k, -spec.spectrum_decay);
    sensitivity[k] = std::pow(1.0 + k, -spec.sensitivity_decay);
  }
  const Matrix psi_frame = frame * latent_scale.asDiagonal();
  const Matrix g_frame = frame * sensitivity.asDiagonal() * frame.transpose();

  Rng probe_rng = make_rng(derive_seed(spec.seed, kProbeStream));
  const Matrix probe_z = gaussian_matrix(probe_rng, spec.d_z, kProbeCount, 1.0);

  if (spec.affine) {
    Layer psi_layer;
    if (spec.psi_identity) {
      psi_layer.weight = Matrix::Identity(dw, dw);
      psi_layer.bias = Vector::Zero(dw);
    } else {
      Rng rng = make_rng(derive_seed(spec.seed, kPsiStream));
      psi_layer.weight = psi_frame * gaussian_matrix(rng, dw, spec.d_z, 1.0 / std::sqrt(spec.d_z));
      psi_layer.bias = gaussian_matrix(rng, dw, 1, 0.1);
    }
    Rng rng = make_rng(derive_seed(spec.seed, kGenStream));
    Layer g_layer;
    g_layer.weight = smooth_columns(gaussian_matrix(rng, spec.d_x(), dw, 1.0 / std::sqrt(dw)),
                                    spec.channels, spec.image_h, spec.image_w,
                                    spec.output_smoothing) *
                     g_frame;
    g_layer.bias = smooth_columns(gaussian_matrix(rng, spec.d_x(), 1, 0.5), spec.channels,
                                  spec.image_h, spec.image_w, spec.output_smoothing);
    weights->psi.push_back(std::move(psi_layer));
    weights->g.push_back(std::move(g_layer));
    gen.weights_ = std::move(weights);
    return gen;
  }

  const Activation act = gen.act_;
  auto apply_act = [act](const Matrix& pre) { return pre.unaryExpr([act](double v) { return activate(act, v); }).eval(); };

  // psi: hidden layers normalized to unit pre-activation spread on the probe
  // batch, output layer normalized then mapped through the anisotropic frame.
  {
    Rng rng = make_rng(derive_seed(spec.seed, kPsiStream));
    Matrix h = probe_z;
    int fan_in = spec.d_z;
    for (int width : spec.psi_layer_widths) {
      Layer layer;
      layer.weight = gaussian_matrix(rng, width, fan_in, 1.0 / std::sqrt(fan_in));
      layer.bias = gaussian_matrix(rng, width, 1, 0.1);
      layer.activated = true;
      Matrix pre = (layer.weight * h).colwise() + layer.bias;
      const double scale = 1.0 / matrix_stddev(pre);
      layer.weight *= scale;
      layer.bias *= scale;
      pre *= scale;
      h = apply_act(pre);
      fan_in = width;
      weights->psi.push_back(std::move(layer));
    }
    Layer out;
    Matrix raw = gaussian_matrix(rng, dw, fan_in, 1.0 / std::sqrt(fan_in));
    Matrix u = raw * h;
    u = u.colwise() - u.rowwise().mean();
    raw /= matrix_stddev(u);
    out.weight = psi_frame * raw;
    out.bias = gaussian_matrix(rng, dw, 1, 0.1);
    weights->psi.push_back(std::move(out));
  }

  // Probe latents drawn from p_w, used to normalize g's layers.
  gen.weights_ = weights;
  Matrix h = gen.run_psi(probe_z);
  const Matrix h0 = h;
  {
    Rng rng = make_rng(derive_seed(spec.seed, kGenStream));
    int fan_in = dw;
    for (std::size_t li = 0; li < spec.layer_widths.size(); ++li) {
      const int width = spec.layer_widths[li];
      Layer layer;
      layer.weight = gaussian_matrix(rng, width, fan_in, 1.0 / std::sqrt(fan_in));
      if (li == 0) layer.weight = layer.weight * g_frame;
      layer.bias = gaussian_matrix(rng, width, 1, 0.1);
      layer.activated = true;
      Matrix pre = (layer.weight * h).colwise() + layer.bias;
      const double scale = 1.0 / matrix_stddev(pre);
      layer.weight *= scale;
      layer.bias *= scale;
      pre *= scale;
      h = apply_act(pre);
      fan_in = width;
      weights->g.push_back(std::move(layer));
    }
    Layer out;
    Matrix raw = gaussian_matrix(rng, spec.d_x(), fan_in, 1.0 / std::sqrt(fan_in));
    if (spec.layer_widths.empty()) raw = raw * g_frame;
    raw = smooth_columns(raw, spec.channels, spec.image_h, spec.image_w, spec.output_smoothing);
    Matrix o = raw * h;
    o = o.colwise() - o.rowwise().mean();
    raw /= matrix_stddev(o);
    out.weight = std::move(raw);
    out.bias = smooth_columns(gaussian_matrix(rng, spec.d_x(), 1, 0.5), spec.channels,
                              spec.image_h, spec.image_w, spec.output_smoothing);
    weights->g.push_back(std::move(out));

    if (spec.coarse_path > 0) {
      Matrix skip(spec.d_x(), dw);
      for (int k = 0; k < dw; ++k) {
        const double t = dw > 1 ? double(k) / (dw - 1) : 0.0;
        const double width =
            spec.coarse_smoothing > 0 && spec.fine_smoothing > 0
                ? spec.coarse_smoothing * std::pow(spec.fine_smoothing / spec.coarse_smoothing, t)
                : spec.coarse_smoothing + t * (spec.fine_smoothing - spec.coarse_smoothing);
        Vector pattern = smooth_columns(gaussian_matrix(rng, spec.d_x(), 1, 1.0), spec.channels,
                                        spec.image_h, spec.image_w, width);
        pattern.array() -= pattern.mean();
        skip.col(k) = sensitivity[k] * pattern / pattern.norm();
      }
      skip = skip * frame.transpose();
      // Match the requested spread against the network path (unit spread).
      Matrix o = skip * h0;
      o = o.colwise() - o.rowwise().mean();
      weights->skip = skip * (spec.coarse_path / matrix_stddev(o));
    }
  }
  gen.weights_ = std::move(weights);
  return gen;
}

Generator Generator::from_affine(Matrix A, Vector b, Matrix P, Vector c, int image_h, int image_w,
                                 int channels, PixelRange range) {
  if (A.rows() != Eigen::Index(image_h) * image_w * channels || b.size() != A.rows())
    throw std::invalid_argument("from_affine: A/b do not match the image shape");
  if (P.rows() != A.cols() || c.size() != P.rows())
    throw std::invalid_argument("from_affine: P/c do not match the latent dimension");
  Generator gen;
  gen.spec_.d_z = int(P.cols());
  gen.spec_.d_w = int(A.cols());
  gen.spec_.image_h = image_h;
  gen.spec_.image_w = image_w;
  gen.spec_.channels = channels;
  gen.spec_.layer_widths.clear();
  gen.spec_.psi_layer_widths.clear();
  gen.spec_.output_range = range;
  gen.spec_.affine = true;
  auto weights = std::make_shared<Weights>();
  weights->psi.push_back(Layer{std::move(P), std::move(c), false});
  weights->g.push_back(Layer{std::move(A), std::move(b), false});
  gen.weights_ = std::move(weights);
  return gen;
}

Matrix Generator::run_psi(const Matrix& z) const {
  Matrix h = z;
  for (const Layer& layer : weights_->psi) {
    Matrix pre = (layer.weight * h).colwise() + layer.bias;
    if (layer.activated) {
      const Activation act = act_;
      h = pre.unaryExpr([act](double v) { return activate(act, v); });
    } else {
      h = std::move(pre);
    }
  }
  return h;
}

void Generator::check_latent(const Vector& w) const {
  if (w.size() != d_w()) throw std::invalid_argument("latent dimension mismatch");
  if (!w.allFinite()) throw std::invalid_argument("latent has non-finite entries");
}

LatentSample Generator::map_latent(const Vector& z) const {
  if (z.size() != d_z()) throw std::invalid_argument("map_latent: seed dimension mismatch");
  if (!z.allFinite()) throw std::invalid_argument("map_latent: non-finite seed");
  return {run_psi(z), LatentSource::kMappedFromZ};
}

Matrix Generator::map_latent_batch(const Matrix& z) const {
  if (z.rows() != d_z()) throw std::invalid_argument("map_latent: seed dimension mismatch");
  return run_psi(z);
}

ForwardPass Generator::forward(const Matrix& w) const {
  if (w.rows() != d_w()) throw std::invalid_argument("evaluate: latent dimension mismatch");
  ForwardPass pass;
  pass.pre.reserve(weights_->g.size());
  Matrix h = w;
  for (const Layer& layer : weights_->g) {
    pass.pre.push_back((layer.weight * h).colwise() + layer.bias);
    if (&layer == &weights_->g.back() && weights_->skip.size()) pass.pre.back().noalias() += weights_->skip * w;
    const Matrix& pre = pass.pre.back();
    if (layer.activated) {
      const Activation act = act_;
      h = pre.unaryExpr([act](double v) { return activate(act, v); });
    } else {
      h = pre;
    }
  }
  if (squashes()) {
    const double lo = spec_.output_range.lo, width = spec_.output_range.width();
    pass.output = h.unaryExpr([lo, width](double v) { return lo + width * sigmoid(v); });
  } else {
    pass.output = std::move(h);
  }
  return pass;
}

Matrix Generator::backward(const ForwardPass& pass, const Matrix& grad_output) const {
  Matrix grad = grad_output;
  if (squashes()) {
    const double width = spec_.output_range.width();
    grad = grad.cwiseProduct(pass.pre.back().unaryExpr([width](double v) {
      const double s = sigmoid(v);
      return width * s * (1.0 - s);
    }));
  }
  Matrix skip_grad;
  if (weights_->skip.size()) skip_grad = weights_->skip.transpose() * grad;
  for (std::size_t i = weights_->g.size(); i-- > 0;) {
    const Layer& layer = weights_->g[i];
    if (layer.activated) {
      const Activation act = act_;
      grad = grad.cwiseProduct(
          pass.pre[i].unaryExpr([act](double v) { return activate_derivative(act, v); }));
    }
    grad = layer.weight.transpose() * grad;
  }
  if (skip_grad.size()) grad += skip_grad;
  return grad;
}

Matrix Generator::evaluate_batch(const Matrix& w) const { return forward(w).output; }

ImageGrid Generator::to_image(const Vector& pixels) const {
  return ImageGrid(spec_.channels, spec_.image_h, spec_.image_w, pixels);
}

ImageGrid Generator::evaluate(const Vector& w) const {
  check_latent(w);
  return to_image(forward(w).output.col(0));
}

Matrix Generator::jacobian(const Vector& w) const {
  check_latent(w);
  const ForwardPass pass = forward(w);
  // Forward-mode accumulation, right to left: M <- D_i W_i M.
  Matrix m = Matrix::Identity(d_w(), d_w());
  for (std::size_t i = 0; i < weights_->g.size(); ++i) {
    const Layer& layer = weights_->g[i];
    m = layer.weight * m;
    if (layer.activated) {
      const Activation act = act_;
      const Vector d =
          pass.pre[i].col(0).unaryExpr([act](double v) { return activate_derivative(act, v); });
      m = d.asDiagonal() * m;
    }
  }
  if (weights_->skip.size()) m += weights_->skip;
  if (squashes()) {
    const double width = spec_.output_range.width();
    const Vector d = pass.pre.back().col(0).unaryExpr([width](double v) {
      const double s = sigmoid(v);
      return width * s * (1.0 - s);
    });
    m = d.asDiagonal() * m;
  }
  return m;
}

double Generator::saturation_fraction(const ImageGrid& img) const {
  const double lo = spec_.output_range.lo, hi = spec_.output_range.hi;
  const double margin = 0.01 * spec_.output_range.width();
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < img.size(); ++i)
    if (img.pixels[i] <= lo + margin || img.pixels[i] >= hi - margin) ++count;
  return img.size() ? double(count) / double(img.size()) : 0.0;
}

const Matrix& Generator::affine_matrix() const {
  if (!is_affine()) throw std::logic_error("affine_matrix: generator is not affine");
  return weights_->g.front().weight;
}

const Vector& Generator::affine_offset() const {
  if (!is_affine()) throw std::logic_error("affine_offset: generator is not affine");
  return weights_->g.front().bias;
}

}  // namespace latentfp
