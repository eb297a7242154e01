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

#include "demoselect/ingest.hpp"

#include <cctype>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "demoselect/errors.hpp"
#include "demoselect/text.hpp"

namespace demoselect::harness {

using nlohmann::json;

namespace {

struct Netpbm {
  std::string magic;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t maxval = 0;
  std::string_view data;
};

Netpbm ParseNetpbm(const std::string& bytes, const std::filesystem::path& path) {
  auto fail = [&](const std::string& why) {
    return Error(ErrorKind::kParse, path.string() + ": " + why);
  };
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto token = [&] {
    skip_space();
    std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    }
    return bytes.substr(start, pos - start);
  };
  auto number = [&](const char* what) {
    auto t = token();
    auto v = text::ParseId(t);
    if (!v || *v == 0) throw fail(std::string("bad ") + what + " '" + t + "'");
    return static_cast<std::size_t>(*v);
  };

  Netpbm img;
  img.magic = token();
  if (img.magic != "P5" && img.magic != "P6") {
    throw fail("unsupported magic '" + img.magic + "'");
  }
  img.width = number("width");
  img.height = number("height");
  img.maxval = number("maxval");
  if (img.maxval > 65535) throw fail("maxval above 65535");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw fail("truncated header");
  }
  ++pos;  // single whitespace before raster
  const std::size_t channels = img.magic == "P6" ? 3 : 1;
  const std::size_t bytes_per = img.maxval > 255 ? 2 : 1;
  const std::size_t need = img.width * img.height * channels * bytes_per;
  if (bytes.size() - pos < need) throw fail("truncated raster");
  img.data = std::string_view(bytes).substr(pos, need);
  return img;
}

std::size_t Sample(const Netpbm& img, std::size_t i) {
  if (img.maxval > 255) {
    return (static_cast<unsigned char>(img.data[2 * i]) << 8) |
           static_cast<unsigned char>(img.data[2 * i + 1]);
  }
  return static_cast<unsigned char>(img.data[i]);
}

}  // namespace

metrics::BinaryMask LoadMask(const std::filesystem::path& path) {
  const std::string bytes = text::ReadFile(path);
  Netpbm img = ParseNetpbm(bytes, path);
  if (img.magic != "P5" || img.maxval != 255) {
    throw Error(ErrorKind::kParse, path.string() + ": mask must be P5 with maxval 255");
  }
  std::vector<bool> bits(img.width * img.height);
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = Sample(img, i) >= 128;
  return metrics::BinaryMask(img.width, img.height, std::move(bits));
}

metrics::PixelImage LoadImage(const std::filesystem::path& path) {
  const std::string bytes = text::ReadFile(path);
  Netpbm img = ParseNetpbm(bytes, path);
  const std::size_t channels = img.magic == "P6" ? 3 : 1;
  std::vector<double> values(img.width * img.height * channels);
  const double scale = static_cast<double>(img.maxval);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<double>(Sample(img, i)) / scale;
  }
  return metrics::PixelImage(img.width, img.height, channels, std::move(values));
}

void SaveMask(const std::filesystem::path& path, const metrics::BinaryMask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width()) + " " +
                    std::to_string(mask.height()) + "\n255\n";
  for (bool b : mask.bits()) out.push_back(b ? static_cast<char>(255) : '\0');
  text::WriteFile(path, out);
}

std::vector<select::FeatureRow> LoadFeatures(const std::filesystem::path& path) {
  const std::string content = text::ReadFile(path);
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  std::vector<select::FeatureRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::Trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto cells = text::SplitCsvLine(line);
    auto id = text::ParseId(cells[0]);
    if (!id) throw Error(ErrorKind::kParse, where + ": bad id");
    select::FeatureRow row{SampleId(*id), {}};
    for (std::size_t i = 1; i < cells.size(); ++i) {
      auto v = text::ParseDouble(cells[i]);
      if (!v) throw Error(ErrorKind::kParse, where + ": bad component");
      row.values.push_back(*v);
    }
    if (row.values.empty()) throw Error(ErrorKind::kParse, where + ": no components");
    if (!rows.empty() && rows.front().values.size() != row.values.size()) {
      throw Error(ErrorKind::kDimensionMismatch,
                  where + ": row " + std::to_string(rows.size()) + " (id " +
                      std::to_string(*id) + ") has " +
                      std::to_string(row.values.size()) + " components, expected " +
                      std::to_string(rows.front().values.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void SaveFeatures(const std::filesystem::path& path,
                  const std::vector<select::FeatureRow>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += std::to_string(row.id.value);
    for (double v : row.values) out += "," + text::FormatDouble(v);
    out += "\n";
  }
  text::WriteFile(path, out);
}

std::vector<SampleId> Pool::Ids() const {
  std::vector<SampleId> ids;
  for (const auto& s : samples) ids.push_back(s.sample.id);
  return ids;
}

std::vector<SampleId> Pool::Candidates() const {
  std::vector<SampleId> ids;
  for (const auto& s : samples) {
    if (s.role != SampleRole::kQuery) ids.push_back(s.sample.id);
  }
  return ids;
}

std::vector<SampleId> Pool::Queries() const {
  std::vector<SampleId> ids;
  for (const auto& s : samples) {
    if (s.role == SampleRole::kQuery) ids.push_back(s.sample.id);
  }
  return ids;
}

const PoolSample* Pool::Find(SampleId id) const {
  for (const auto& s : samples) {
    if (s.sample.id == id) return &s;
  }
  return nullptr;
}

std::vector<select::FeatureRow> Pool::Features(const std::vector<SampleId>& ids) const {
  std::vector<select::FeatureRow> rows;
  for (auto id : ids) {
    const PoolSample* s = Find(id);
    if (!s || !s->feature) {
      throw Error(ErrorKind::kMissingEntry,
                  "no feature vector for sample " + std::to_string(id.value));
    }
    rows.push_back({id, *s->feature});
  }
  return rows;
}

Pool IngestManifest(const std::filesystem::path& path) {
  const std::string content = text::ReadFile(path);
  json doc = json::parse(content, nullptr, false);
  const std::string where = path.string();
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorKind::kParse, where + ": not a JSON object");
  }
  if (!doc.contains("version") || doc["version"] != 1) {
    throw Error(ErrorKind::kParse, where + ": unsupported manifest version");
  }
  if (!doc.contains("samples") || !doc["samples"].is_array()) {
    throw Error(ErrorKind::kParse, where + ": missing samples array");
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  std::vector<select::FeatureRow> features;
  if (doc.contains("features")) {
    if (!doc["features"].is_string()) {
      throw Error(ErrorKind::kParse, where + ": features must be a path");
    }
    auto fpath = resolve(doc["features"].get<std::string>());
    if (!std::filesystem::exists(fpath)) {
      throw Error(ErrorKind::kMissingFile, where + ": features file " + fpath.string());
    }
    features = LoadFeatures(fpath);
  }

  Pool pool;
  std::unordered_set<SampleId> seen;
  for (const auto& entry : doc["samples"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_number_unsigned()) {
      throw Error(ErrorKind::kParse, where + ": sample without a non-negative integer id");
    }
    PoolSample ps;
    ps.sample.id = SampleId(entry["id"].get<std::uint32_t>());
    const std::string who = where + ": sample " + std::to_string(ps.sample.id.value);
    if (!seen.insert(ps.sample.id).second) {
      throw Error(ErrorKind::kParse, who + ": duplicate id");
    }
    if (entry.contains("mask") && entry.contains("image")) {
      throw Error(ErrorKind::kParse, who + ": has both mask and image labels");
    }
    auto load_label = [&](const char* key, auto loader) {
      if (!entry[key].is_string()) throw Error(ErrorKind::kParse, who + ": bad " + key);
      auto p = resolve(entry[key].get<std::string>());
      if (!std::filesystem::exists(p)) {
        throw Error(ErrorKind::kMissingFile, who + ": " + p.string());
      }
      ps.sample.label_ref = p.string();
      try {
        return loader(p);
      } catch (const Error& e) {
        throw Error(e.kind(), who + ": " + e.detail());
      }
    };
    std::size_t w = 0, h = 0;
    if (entry.contains("mask")) {
      ps.mask = load_label("mask", LoadMask);
      w = ps.mask->width();
      h = ps.mask->height();
    } else if (entry.contains("image")) {
      ps.image = load_label("image", LoadImage);
      w = ps.image->width();
      h = ps.image->height();
    }
    if (entry.contains("width") || entry.contains("height")) {
      const auto dw = entry.value("width", std::size_t{0});
      const auto dh = entry.value("height", std::size_t{0});
      if (ps.sample.label_ref && (dw != w || dh != h)) {
        throw Error(ErrorKind::kShapeMismatch,
                    who + ": declared " + std::to_string(dw) + "x" +
                        std::to_string(dh) + ", file is " + std::to_string(w) +
                        "x" + std::to_string(h));
      }
    }
    if (entry.contains("feature_row")) {
      if (!entry["feature_row"].is_number_unsigned()) {
        throw Error(ErrorKind::kParse, who + ": bad feature_row");
      }
      const auto row = entry["feature_row"].get<std::size_t>();
      if (row >= features.size()) {
        throw Error(ErrorKind::kMissingEntry,
                    who + ": feature_row " + std::to_string(row) + " not in features file");
      }
      ps.feature = features[row].values;
      ps.sample.feature_ref = "row " + std::to_string(row);
    } else {
      // Without an explicit row, match on the id column of the features file.
      for (std::size_t r = 0; r < features.size(); ++r) {
        if (features[r].id == ps.sample.id) {
          ps.feature = features[r].values;
          ps.sample.feature_ref = "row " + std::to_string(r);
          break;
        }
      }
    }
    if (entry.contains("role")) {
      if (!entry["role"].is_string()) throw Error(ErrorKind::kParse, who + ": bad role");
      const auto role = entry["role"].get<std::string>();
      if (role == "candidate") {
        ps.role = SampleRole::kCandidate;
      } else if (role == "query") {
        ps.role = SampleRole::kQuery;
      } else {
        throw Error(ErrorKind::kParse, who + ": unknown role '" + role + "'");
      }
    }
    pool.samples.push_back(std::move(ps));
  }
  return pool;
}

}  // namespace demoselect::harness
