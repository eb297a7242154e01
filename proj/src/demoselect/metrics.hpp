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

#ifndef DEMOSELECT_METRICS_HPP_
#define DEMOSELECT_METRICS_HPP_

#include <cstddef>
#include <utility>
#include <vector>

#include "demoselect/core.hpp"

namespace demoselect::metrics {

// Row-major 0/1 grid. Detection boxes are rasterized into the same type.
class BinaryMask {
 public:
  BinaryMask(std::size_t width, std::size_t height, std::vector<bool> bits);
  static BinaryMask Empty(std::size_t width, std::size_t height);
  // Filled axis-aligned box [x0, x1) x [y0, y1), clipped to the canvas.
  static BinaryMask Box(std::size_t width, std::size_t height, std::size_t x0,
                        std::size_t y0, std::size_t x1, std::size_t y1);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool at(std::size_t x, std::size_t y) const { return bits_[y * width_ + x]; }
  const std::vector<bool>& bits() const noexcept { return bits_; }

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<bool> bits_;
};

// Row-major interleaved values in [0, 1]; 1 or 3 channels.
class PixelImage {
 public:
  PixelImage(std::size_t width, std::size_t height, std::size_t channels,
             std::vector<double> values);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t channels() const noexcept { return channels_; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::size_t width_;
  std::size_t height_;
  std::size_t channels_;
  std::vector<double> values_;
};

// |pred & truth| / |pred | truth|. Two all-empty masks score 1.
double BinaryIou(const BinaryMask& pred, const BinaryMask& truth);

// Per-pair average of BinaryIou.
double MeanIou(const std::vector<std::pair<BinaryMask, BinaryMask>>& pairs);

// 100 x mean squared error over every value slot.
double MseScaled(const PixelImage& pred, const PixelImage& truth);

// Losses are negated so that every utility is higher-is-better.
Utility ToUtility(double metric_value, MetricTag metric);

}  // namespace demoselect::metrics

#endif  // DEMOSELECT_METRICS_HPP_
