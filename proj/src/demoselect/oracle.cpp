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

#include "demoselect/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "demoselect/errors.hpp"
#include "demoselect/text.hpp"

namespace demoselect::oracle {

using nlohmann::json;

Utility Evaluator::Evaluate(const DemoSet& demos, SampleId query) const {
  calls_.fetch_add(1, std::memory_order_relaxed);
  if (demos.empty()) {
    throw Error(ErrorKind::kEmptyInput, "cannot evaluate an empty demo set");
  }
  return DoEvaluate(demos, query);
}

std::size_t CachingView::KeyHash::operator()(const Key& k) const noexcept {
  return DemoSetHash{}(k.set) ^ (rng::Mix64(k.query.value) << 1);
}

std::size_t CachingView::cached() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

Utility CachingView::DoEvaluate(const DemoSet& demos, SampleId query) const {
  Key key{demos, query};
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  Utility u = inner_.Evaluate(demos, query);
  std::lock_guard lock(mu_);
  cache_.emplace(std::move(key), u);
  return u;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Map>
void IndexIds(const std::vector<SampleId>& ids, Map& index, const char* what) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!index.emplace(ids[i], i).second) {
      throw Error(ErrorKind::kParse, std::string("duplicate ") + what + " id " +
                                         std::to_string(ids[i].value));
    }
  }
}

}  // namespace

OneShotMatrix::OneShotMatrix(std::vector<SampleId> demo_ids,
                             std::vector<SampleId> query_ids,
                             std::vector<double> values)
    : demo_ids_(std::move(demo_ids)),
      query_ids_(std::move(query_ids)),
      values_(std::move(values)) {
  if (values_.size() != demo_ids_.size() * query_ids_.size()) {
    throw Error(ErrorKind::kShapeMismatch, "one-shot matrix value count");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kNonFinite, "one-shot matrix");
  }
  IndexIds(demo_ids_, row_, "demo");
  IndexIds(query_ids_, col_, "query");
}

OneShotMatrix OneShotMatrix::Load(const std::filesystem::path& path) {
  const std::string content = text::ReadFile(path);
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorKind::kParse, path.string() + ":" +
                                        std::to_string(line_no) + ": " + why);
  };

  std::vector<SampleId> demos;
  std::vector<SampleId> queries;
  std::vector<double> values;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::Trim(line).empty()) continue;
    auto cells = text::SplitCsvLine(line);
    if (!header_seen) {
      std::string_view first = cells[0];
      if (line_no == 1 && first.starts_with("\xEF\xBB\xBF")) first.remove_prefix(3);
      if (first != "demo\\query") throw fail("header must start with demo\\query");
      for (std::size_t i = 1; i < cells.size(); ++i) {
        auto id = text::ParseId(cells[i]);
        if (!id) throw fail("bad query id '" + std::string(cells[i]) + "'");
        queries.emplace_back(*id);
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != queries.size() + 1) {
      throw fail("expected " + std::to_string(queries.size() + 1) + " cells");
    }
    auto id = text::ParseId(cells[0]);
    if (!id) throw fail("bad demo id '" + std::string(cells[0]) + "'");
    demos.emplace_back(*id);
    for (std::size_t i = 1; i < cells.size(); ++i) {
      auto v = text::ParseDouble(cells[i]);
      if (!v) throw fail("bad utility '" + std::string(cells[i]) + "'");
      values.push_back(*v);
    }
  }
  if (!header_seen) throw fail("empty matrix file");
  try {
    return OneShotMatrix(std::move(demos), std::move(queries), std::move(values));
  } catch (const Error& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.detail());
  }
}

void OneShotMatrix::Save(const std::filesystem::path& path) const {
  std::string out = "demo\\query";
  for (auto q : query_ids_) out += "," + std::to_string(q.value);
  out += "\n";
  for (std::size_t r = 0; r < demo_ids_.size(); ++r) {
    out += std::to_string(demo_ids_[r].value);
    for (std::size_t c = 0; c < query_ids_.size(); ++c) {
      out += "," + text::FormatDouble(values_[r * query_ids_.size() + c]);
    }
    out += "\n";
  }
  text::WriteFile(path, out);
}

double OneShotMatrix::at(SampleId demo, SampleId query) const {
  auto r = row_.find(demo);
  auto c = col_.find(query);
  if (r == row_.end() || c == col_.end()) {
    throw Error(ErrorKind::kMissingEntry,
                "one-shot matrix has no entry for demo " +
                    std::to_string(demo.value) + ", query " +
                    std::to_string(query.value));
  }
  return values_[r->second * query_ids_.size() + c->second];
}

Utility OneShotMatrix::DoEvaluate(const DemoSet& demos, SampleId query) const {
  if (demos.size() != 1) {
    throw Error(ErrorKind::kCardinalityUnsupported,
                "one-shot matrix cannot score " + demos.ToString());
  }
  return Utility::Make(at(demos.members()[0], query), MetricTag::kExternal);
}

// ---------------------------------------------------------------------------

std::size_t SubsetKeyHash::operator()(const SubsetKey& k) const noexcept {
  return DemoSetHash{}(k.set) ^ (rng::Mix64(k.query.value) << 1);
}

SubsetTable SubsetTable::Load(const std::filesystem::path& path) {
  const std::string content = text::ReadFile(path);
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  SubsetTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::Trim(line).empty()) continue;
    auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorKind::kParse, where + "not a JSON object");
    }
    try {
      const auto& set = j.at("set");
      if (!set.is_array()) throw Error(ErrorKind::kParse, where + "set must be an array");
      std::vector<SampleId> ids;
      for (const auto& v : set) {
        if (!v.is_number_unsigned()) {
          throw Error(ErrorKind::kParse, where + "set ids must be non-negative integers");
        }
        ids.emplace_back(v.get<std::uint32_t>());
      }
      if (!std::is_sorted(ids.begin(), ids.end()) ||
          std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw Error(ErrorKind::kParse, where + "set ids must be strictly ascending");
      }
      const auto& q = j.at("query");
      const auto& u = j.at("utility");
      if (!q.is_number_unsigned() || !u.is_number()) {
        throw Error(ErrorKind::kParse, where + "bad query or utility");
      }
      DemoSet key = DemoSet::Canonicalize(ids);
      if (key.empty()) throw Error(ErrorKind::kParse, where + "empty set");
      const SampleId query(q.get<std::uint32_t>());
      if (table.entries_.count(SubsetKey{key, query})) {
        throw Error(ErrorKind::kParse, where + "duplicate entry for " + key.ToString() +
                                           " on query " + std::to_string(query.value));
      }
      table.Insert(key, query, u.get<double>());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, where + e.what());
    }
  }
  return table;
}

void SubsetTable::Save(const std::filesystem::path& path) const {
  std::vector<std::pair<SubsetKey, double>> rows(entries_.begin(), entries_.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.first.set.size() != b.first.set.size()) {
      return a.first.set.size() < b.first.set.size();
    }
    if (a.first.set != b.first.set) return a.first.set < b.first.set;
    return a.first.query < b.first.query;
  });
  std::string out;
  for (const auto& [key, utility] : rows) {
    out += "{\"set\":[";
    for (std::size_t i = 0; i < key.set.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(key.set.members()[i].value);
    }
    out += "],\"query\":" + std::to_string(key.query.value) +
           ",\"utility\":" + text::FormatDouble(utility) + "}\n";
  }
  text::WriteFile(path, out);
}

void SubsetTable::Insert(const DemoSet& set, SampleId query, double utility) {
  if (!std::isfinite(utility)) {
    throw Error(ErrorKind::kNonFinite, "subset table utility for " + set.ToString());
  }
  entries_[SubsetKey{set, query}] = utility;
}

std::vector<SampleId> SubsetTable::DemoIds() const {
  std::vector<SampleId> ids;
  for (const auto& [key, _] : entries_) {
    ids.insert(ids.end(), key.set.members().begin(), key.set.members().end());
  }
  return DemoSet::Canonicalize(ids).members();
}

std::vector<SampleId> SubsetTable::QueryIds() const {
  std::vector<SampleId> ids;
  for (const auto& [key, _] : entries_) ids.push_back(key.query);
  return DemoSet::Canonicalize(ids).members();
}

Utility SubsetTable::DoEvaluate(const DemoSet& demos, SampleId query) const {
  auto it = entries_.find(SubsetKey{demos, query});
  if (it == entries_.end()) {
    throw Error(ErrorKind::kMissingEntry,
                "subset table has no entry for " + demos.ToString() +
                    ", query " + std::to_string(query.value));
  }
  return Utility::Make(it->second, MetricTag::kExternal);
}

// ---------------------------------------------------------------------------

SyntheticLandscape::SyntheticLandscape(LandscapeParams params)
    : params_(std::move(params)) {
  const std::uint32_t n = params_.n_demos;
  if (n == 0) throw Error(ErrorKind::kConfig, "landscape needs at least one demo");
  if (!(params_.interaction_scale >= 0.0) || !(params_.noise_scale >= 0.0) ||
      !std::isfinite(params_.interaction_scale) || !std::isfinite(params_.noise_scale)) {
    throw Error(ErrorKind::kConfig, "lambda and sigma must be finite and >= 0");
  }
  if (params_.planted) {
    const auto& p = *params_.planted;
    if (p.demo_index >= n) {
      throw Error(ErrorKind::kConfig, "planted demo index out of range");
    }
    if (!(p.gamma > 0.0 && p.gamma <= 1.0)) {
      throw Error(ErrorKind::kConfig, "planted gamma must be in (0, 1]");
    }
    if (!(p.high_value > kBaseHigh) || !std::isfinite(p.high_value)) {
      throw Error(ErrorKind::kConfig, "planted high value must exceed 0.6");
    }
  }

  const std::uint32_t cols = n_columns();
  std::mt19937_64 engine(params_.seed);
  base_.resize(static_cast<std::size_t>(n) * cols);
  for (auto& a : base_) a = kBaseLow + (kBaseHigh - kBaseLow) * rng::UnitDouble(engine);

  interaction_.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      const double b = 2.0 * rng::UnitDouble(engine) - 1.0;
      interaction_[static_cast<std::size_t>(i) * n + j] = b;
      interaction_[static_cast<std::size_t>(j) * n + i] = b;
    }
  }

  if (params_.planted && params_.n_queries > 0) {
    const auto& p = *params_.planted;
    const std::uint32_t m = params_.n_queries;
    auto count = static_cast<std::uint32_t>(std::ceil(p.gamma * m - 1e-9));
    count = std::min(count, m);
    std::vector<std::uint32_t> cols_perm(m);
    std::iota(cols_perm.begin(), cols_perm.end(), n);
    for (std::uint32_t i = 0; i < count; ++i) {
      auto j = i + static_cast<std::uint32_t>(rng::UniformBelow(engine, m - i));
      std::swap(cols_perm[i], cols_perm[j]);
    }
    planted_columns_.assign(cols_perm.begin(), cols_perm.begin() + count);
    std::sort(planted_columns_.begin(), planted_columns_.end());
    for (auto c : planted_columns_) {
      base_[static_cast<std::size_t>(p.demo_index) * cols + c] = p.high_value;
    }
  }
}

std::vector<SampleId> SyntheticLandscape::DemoIds() const {
  std::vector<SampleId> ids;
  for (std::uint32_t i = 0; i < params_.n_demos; ++i) ids.emplace_back(i);
  return ids;
}

std::vector<SampleId> SyntheticLandscape::QueryIds() const {
  std::vector<SampleId> ids;
  for (std::uint32_t i = 0; i < params_.n_queries; ++i) {
    ids.emplace_back(params_.n_demos + i);
  }
  return ids;
}

double SyntheticLandscape::Noise(const DemoSet& demos, SampleId query,
                                 std::uint64_t seed) {
  std::uint64_t h = rng::Mix64(seed ^ 0xd1b54a32d192ed03ULL);
  for (auto id : demos.members()) h = rng::Mix64(h ^ id.value);
  h = rng::Mix64(h ^ (0x100000000ULL | query.value));
  return 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
}

Utility SyntheticLandscape::DoEvaluate(const DemoSet& demos, SampleId query) const {
  const auto& ids = demos.members();
  if (query.value >= n_columns()) {
    throw Error(ErrorKind::kIndexOutOfRange,
                "query " + std::to_string(query.value) + " outside landscape");
  }
  double agg = 0.0;
  for (auto id : ids) {
    if (id.value >= params_.n_demos) {
      throw Error(ErrorKind::kIndexOutOfRange,
                  "demo " + std::to_string(id.value) + " outside landscape");
    }
    agg += base(id.value, query.value);
  }
  if (params_.aggregator == Aggregator::kMean) {
    agg /= static_cast<double>(ids.size());
  }

  double pair_mean = 0.0;
  if (ids.size() > 1) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < ids.size(); ++a) {
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        sum += interaction(ids[a].value, ids[b].value);
        ++pairs;
      }
    }
    pair_mean = sum / static_cast<double>(pairs);
  }

  double u = agg;
  if (params_.interaction_scale != 0.0) u += params_.interaction_scale * pair_mean;
  if (params_.noise_scale != 0.0) {
    u += params_.noise_scale * Noise(demos, query, params_.seed);
  }
  return Utility::Make(u, MetricTag::kSynthetic);
}

// ---------------------------------------------------------------------------

Utility AggregateHeldoutScore(const Evaluator& oracle, const DemoSet& demos,
                              std::span<const SampleId> queries) {
  if (queries.empty()) {
    throw Error(ErrorKind::kEmptyQuerySet, "no queries to score " + demos.ToString());
  }
  if (demos.empty()) {
    throw Error(ErrorKind::kEmptyInput, "cannot score an empty demo set");
  }
  for (auto q : queries) {
    if (demos.contains(q)) {
      throw Error(ErrorKind::kOverlap, "query " + std::to_string(q.value) +
                                           " is a member of " + demos.ToString());
    }
  }
  double sum = 0.0;
  MetricTag tag = MetricTag::kExternal;
  for (auto q : queries) {
    Utility u = oracle.Evaluate(demos, q);
    tag = u.source();
    sum += u.value();
  }
  return Utility::Make(sum / static_cast<double>(queries.size()), tag);
}

BruteForceResult BruteForceBest(const Evaluator& oracle,
                                std::span<const SampleId> candidates,
                                std::span<const SampleId> queries,
                                std::optional<std::size_t> max_size) {
  std::unordered_set<SampleId> query_set(queries.begin(), queries.end());
  for (auto c : candidates) {
    if (query_set.count(c)) {
      throw Error(ErrorKind::kOverlap,
                  "candidate " + std::to_string(c.value) + " is also a query");
    }
  }
  SubsetEnumerator subsets(candidates, max_size);
  std::optional<BruteForceResult> best;
  std::uint64_t evaluated = 0;
  DemoSet s;
  while (subsets.Next(s)) {
    Utility u = AggregateHeldoutScore(oracle, s, queries);
    ++evaluated;
    if (!best || u.value() > best->utility.value()) {
      best = BruteForceResult{s, u, 0};
    }
  }
  if (!best) throw Error(ErrorKind::kEmptyPool, "no candidates to enumerate");
  best->set_evaluations = evaluated;
  return *best;
}

}  // namespace demoselect::oracle
