// Copyright 2026 The demoselect Authors
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

#include "demoselect/metrics.hpp"

#include <cmath>
#include <string>

#include "demoselect/errors.hpp"

namespace demoselect::metrics {

BinaryMask::BinaryMask(std::size_t width, std::size_t height,
                       std::vector<bool> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width == 0 || height == 0 || bits_.size() != width * height) {
    throw Error(ErrorKind::kShapeMismatch,
                "mask of " + std::to_string(width) + "x" +
                    std::to_string(height) + " needs " +
                    std::to_string(width * height) + " bits, got " +
                    std::to_string(bits_.size()));
  }
}

BinaryMask BinaryMask::Empty(std::size_t width, std::size_t height) {
  return BinaryMask(width, height, std::vector<bool>(width * height, false));
}

BinaryMask BinaryMask::Box(std::size_t width, std::size_t height,
                           std::size_t x0, std::size_t y0, std::size_t x1,
                           std::size_t y1) {
  std::vector<bool> bits(width * height, false);
  for (std::size_t y = y0; y < std::min(y1, height); ++y) {
    for (std::size_t x = x0; x < std::min(x1, width); ++x) {
      bits[y * width + x] = true;
    }
  }
  return BinaryMask(width, height, std::move(bits));
}

PixelImage::PixelImage(std::size_t width, std::size_t height,
                       std::size_t channels, std::vector<double> values)
    : width_(width), height_(height), channels_(channels),
      values_(std::move(values)) {
  if (width == 0 || height == 0 || (channels != 1 && channels != 3) ||
      values_.size() != width * height * channels) {
    throw Error(ErrorKind::kShapeMismatch, "image dimensions do not match data");
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorKind::kParse, "pixel value outside [0,1]");
    }
  }
}

double BinaryIou(const BinaryMask& pred, const BinaryMask& truth) {
  if (pred.width() != truth.width() || pred.height() != truth.height()) {
    throw Error(ErrorKind::kShapeMismatch, "IoU of masks with different shapes");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  const auto& a = pred.bits();
  const auto& b = truth.bits();
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]);
    uni += (a[i] || b[i]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double MeanIou(const std::vector<std::pair<BinaryMask, BinaryMask>>& pairs) {
  if (pairs.empty()) throw Error(ErrorKind::kEmptyBatch, "no mask pairs");
  double sum = 0.0;
  for (const auto& [pred, truth] : pairs) sum += BinaryIou(pred, truth);
  return sum / static_cast<double>(pairs.size());
}

double MseScaled(const PixelImage& pred, const PixelImage& truth) {
  if (pred.width() != truth.width() || pred.height() != truth.height() ||
      pred.channels() != truth.channels()) {
    throw Error(ErrorKind::kShapeMismatch, "MSE of images with different shapes");
  }
  const auto& a = pred.values();
  const auto& b = truth.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return 100.0 * (sum / static_cast<double>(a.size()));
}

Utility ToUtility(double metric_value, MetricTag metric) {
  if (!std::isfinite(metric_value)) {
    throw Error(ErrorKind::kNonFinite, "metric value is not finite");
  }
  return Utility::Make(metric == MetricTag::kNegMse ? 0.0 - metric_value : metric_value,
                       metric);
}

}  // namespace demoselect::metrics
