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

#ifndef DEMOSELECT_INGEST_HPP_
#define DEMOSELECT_INGEST_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "demoselect/core.hpp"
#include "demoselect/metrics.hpp"
#include "demoselect/select.hpp"

namespace demoselect::harness {

// Binary PGM ("P5") with maxval 255; pixels >= 128 are foreground.
metrics::BinaryMask LoadMask(const std::filesystem::path& path);
// PPM ("P6") or PGM ("P5"), normalized by maxval.
metrics::PixelImage LoadImage(const std::filesystem::path& path);

void SaveMask(const std::filesystem::path& path, const metrics::BinaryMask& mask);

// CSV rows of "id,component,component,...". All rows share one dimension.
std::vector<select::FeatureRow> LoadFeatures(const std::filesystem::path& path);
void SaveFeatures(const std::filesystem::path& path,
                  const std::vector<select::FeatureRow>& rows);

enum class SampleRole { kAny, kCandidate, kQuery };

struct PoolSample {
  Sample sample;
  SampleRole role = SampleRole::kAny;
  std::optional<metrics::BinaryMask> mask;
  std::optional<metrics::PixelImage> image;
  std::optional<std::vector<double>> feature;
};

struct Pool {
  std::vector<PoolSample> samples;  // manifest order

  std::vector<SampleId> Ids() const;
  std::vector<SampleId> Candidates() const;  // role candidate or unset
  std::vector<SampleId> Queries() const;     // role query
  const PoolSample* Find(SampleId id) const;
  // Feature rows for `ids`, in that order; throws kMissingEntry if absent.
  std::vector<select::FeatureRow> Features(const std::vector<SampleId>& ids) const;
};

// Manifest JSON:
//   {"version":1,
//    "samples":[{"id":0,"mask":"m/0.pgm","image":"i/0.ppm","feature_row":0,
//                "width":32,"height":32,"role":"candidate"}],
//    "features":"features.csv"}
// Paths resolve against the manifest's directory. "width"/"height" are
// optional declared label dimensions; "role" is optional.
Pool IngestManifest(const std::filesystem::path& path);

}  // namespace demoselect::harness

#endif  // DEMOSELECT_INGEST_HPP_
