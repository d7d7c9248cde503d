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

#ifndef LATENTFP_TYPES_HPP_
#define LATENTFP_TYPES_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace latentfp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Closed interval of admissible pixel values.
struct PixelRange {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  bool operator==(const PixelRange&) const = default;
};

/// Where a latent vector came from.
enum class LatentSource { kMappedFromZ, kFingerprinted, kSyntheticGaussian };

struct LatentSample {
  Vector w;
  LatentSource source = LatentSource::kMappedFromZ;
};

enum class ImageProvenance { kGenerated, kPostprocessed };

/// A (channels, height, width) image stored flat in channel-major,
/// row-major order: index = (c * height + y) * width + x.
struct ImageGrid {
  int channels = 1;
  int height = 0;
  int width = 0;
  Vector pixels;
  ImageProvenance provenance = ImageProvenance::kGenerated;

  ImageGrid() = default;
  ImageGrid(int c, int h, int w)
      : channels(c), height(h), width(w), pixels(Vector::Zero(std::size_t(c) * h * w)) {}
  ImageGrid(int c, int h, int w, Vector values)
      : channels(c), height(h), width(w), pixels(std::move(values)) {
    if (pixels.size() != Eigen::Index(c) * h * w)
      throw std::invalid_argument("ImageGrid: pixel count does not match shape");
  }

  Eigen::Index size() const { return pixels.size(); }
  double& at(int c, int y, int x) { return pixels[(Eigen::Index(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const {
    return pixels[(Eigen::Index(c) * height + y) * width + x];
  }
  bool same_shape(const ImageGrid& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

inline void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": image shape mismatch");
}

}  // namespace latentfp

#endif  // LATENTFP_TYPES_HPP_
