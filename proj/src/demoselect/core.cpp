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

#include "demoselect/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "demoselect/errors.hpp"

namespace demoselect {

std::vector<SampleId> ToIds(std::span<const std::uint32_t> raw) {
  std::vector<SampleId> ids;
  ids.reserve(raw.size());
  for (auto v : raw) ids.emplace_back(v);
  return ids;
}

std::vector<std::uint32_t> FromIds(std::span<const SampleId> ids) {
  std::vector<std::uint32_t> raw;
  raw.reserve(ids.size());
  for (auto id : ids) raw.push_back(id.value);
  return raw;
}

DemoSet DemoSet::Canonicalize(std::span<const SampleId> ids) {
  DemoSet set;
  set.members_.assign(ids.begin(), ids.end());
  std::sort(set.members_.begin(), set.members_.end());
  set.members_.erase(std::unique(set.members_.begin(), set.members_.end()),
                     set.members_.end());
  return set;
}

DemoSet DemoSet::Of(std::initializer_list<std::uint32_t> ids) {
  std::vector<std::uint32_t> raw(ids);
  return Canonicalize(ToIds(raw));
}

bool DemoSet::contains(SampleId id) const {
  return std::binary_search(members_.begin(), members_.end(), id);
}

DemoSet DemoSet::With(SampleId id) const {
  DemoSet out = *this;
  auto it = std::lower_bound(out.members_.begin(), out.members_.end(), id);
  if (it == out.members_.end() || *it != id) out.members_.insert(it, id);
  return out;
}

std::string DemoSet::ToString() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (i) os << ',';
    os << members_[i].value;
  }
  os << '}';
  return os.str();
}

std::size_t DemoSetHash::operator()(const DemoSet& s) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (auto id : s.members()) h = rng::Mix64(h ^ id.value);
  return static_cast<std::size_t>(h);
}

std::string_view MetricTagName(MetricTag tag) {
  switch (tag) {
    case MetricTag::kIou: return "iou";
    case MetricTag::kNegMse: return "neg_mse";
    case MetricTag::kSynthetic: return "synthetic";
    case MetricTag::kExternal: return "external";
  }
  return "unknown";
}

Utility Utility::Make(double value, MetricTag source) {
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::kNonFinite, "utility value is not finite");
  }
  return Utility(value, source);
}

std::uint64_t CountSubsets(std::size_t n, std::size_t max_size) {
  std::uint64_t total = 0;
  std::uint64_t binom = 1;  // C(n, 0)
  for (std::size_t k = 1; k <= std::min(n, max_size); ++k) {
    binom = binom * (n - k + 1) / k;
    total += binom;
  }
  return total;
}

SubsetEnumerator::SubsetEnumerator(std::span<const SampleId> ids,
                                   std::optional<std::size_t> max_size)
    : pool_(DemoSet::Canonicalize(ids).members()) {
  if (pool_.size() > kMaxEnumerablePool) {
    throw Error(ErrorKind::kPoolTooLarge,
                "cannot enumerate subsets of " + std::to_string(pool_.size()) +
                    " ids (limit 24)");
  }
  max_size_ = max_size.value_or(pool_.size());
  if (max_size_ > pool_.size()) {
    throw Error(ErrorKind::kUsage, "max_size exceeds pool size");
  }
  total_ = CountSubsets(pool_.size(), max_size_);
}

bool SubsetEnumerator::Next(DemoSet& out) {
  const std::size_t n = pool_.size();
  if (size_ == 0) {
    if (max_size_ == 0 || n == 0) return false;
    size_ = 1;
    index_ = {0};
  } else {
    // Advance to the next combination of the current size.
    std::size_t k = size_;
    std::size_t i = k;
    while (i > 0 && index_[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) {
      if (size_ == max_size_) return false;
      ++size_;
      index_.resize(size_);
      std::iota(index_.begin(), index_.end(), std::size_t{0});
    } else {
      ++index_[i - 1];
      for (std::size_t j = i; j < k; ++j) index_[j] = index_[j - 1] + 1;
    }
  }
  std::vector<SampleId> members;
  members.reserve(size_);
  for (auto i : index_) members.push_back(pool_[i]);
  out = DemoSet::Canonicalize(members);
  return true;
}

std::vector<DemoSet> EnumerateSubsets(std::span<const SampleId> ids,
                                      std::optional<std::size_t> max_size) {
  SubsetEnumerator it(ids, max_size);
  std::vector<DemoSet> out;
  out.reserve(static_cast<std::size_t>(it.total()));
  DemoSet s;
  while (it.Next(s)) out.push_back(s);
  return out;
}

SplitSpec MakeSplit(std::span<const SampleId> pool, std::size_t n_prime,
                    std::uint64_t seed) {
  const std::size_t n = pool.size();
  if (n_prime < 1 || n_prime >= n) {
    throw Error(ErrorKind::kBadSplit,
                "n_prime=" + std::to_string(n_prime) + " must be in [1, " +
                    std::to_string(n) + ")");
  }
  std::unordered_set<SampleId> seen(pool.begin(), pool.end());
  if (seen.size() != n) {
    throw Error(ErrorKind::kBadSplit, "pool ids are not distinct");
  }

  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  std::mt19937_64 engine(seed);
  for (std::size_t i = 0; i < n_prime; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng::UniformBelow(engine, n - i));
    std::swap(positions[i], positions[j]);
  }
  std::vector<bool> is_candidate(n, false);
  for (std::size_t i = 0; i < n_prime; ++i) is_candidate[positions[i]] = true;

  SplitSpec split;
  split.seed = seed;
  split.pool_ids.assign(pool.begin(), pool.end());
  for (std::size_t i = 0; i < n; ++i) {
    (is_candidate[i] ? split.candidate_ids : split.heldout_ids).push_back(pool[i]);
  }
  return split;
}

namespace rng {

std::uint64_t UniformBelow(std::mt19937_64& engine, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t reject_from =
      std::numeric_limits<std::uint64_t>::max() -
      (std::numeric_limits<std::uint64_t>::max() % bound + 1) % bound;
  std::uint64_t x;
  do {
    x = engine();
  } while (x > reject_from);
  return x % bound;
}

double UnitDouble(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace rng

}  // namespace demoselect
