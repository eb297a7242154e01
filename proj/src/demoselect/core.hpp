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

#ifndef DEMOSELECT_CORE_HPP_
#define DEMOSELECT_CORE_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace demoselect {

// Identifier of one labeled sample within a pool.
struct SampleId {
  std::uint32_t value = 0;

  constexpr SampleId() = default;
  constexpr explicit SampleId(std::uint32_t v) : value(v) {}

  friend constexpr auto operator<=>(SampleId, SampleId) = default;
};

std::vector<SampleId> ToIds(std::span<const std::uint32_t> raw);
std::vector<std::uint32_t> FromIds(std::span<const SampleId> ids);

struct Sample {
  SampleId id;
  std::optional<std::string> label_ref;
  std::optional<std::string> feature_ref;
};

// An unordered set of demonstrations, held as a strictly ascending id list.
// Two sets compare equal iff their member lists are equal.
class DemoSet {
 public:
  DemoSet() = default;

  // Sorts and deduplicates.
  static DemoSet Canonicalize(std::span<const SampleId> ids);
  static DemoSet Of(std::initializer_list<std::uint32_t> ids);

  const std::vector<SampleId>& members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }
  bool contains(SampleId id) const;

  // Returns a new set with `id` added.
  DemoSet With(SampleId id) const;

  std::string ToString() const;

  friend bool operator==(const DemoSet&, const DemoSet&) = default;
  friend auto operator<=>(const DemoSet& a, const DemoSet& b) {
    return a.members_ <=> b.members_;
  }

 private:
  std::vector<SampleId> members_;
};

struct DemoSetHash {
  std::size_t operator()(const DemoSet& s) const noexcept;
};

enum class MetricTag { kIou, kNegMse, kSynthetic, kExternal };

std::string_view MetricTagName(MetricTag tag);

// Canonical higher-is-better score. Always finite.
class Utility {
 public:
  Utility() = default;

  // Throws kNonFinite for NaN or infinities.
  static Utility Make(double value, MetricTag source);

  double value() const noexcept { return value_; }
  MetricTag source() const noexcept { return source_; }

 private:
  Utility(double value, MetricTag source) : value_(value), source_(source) {}

  double value_ = 0.0;
  MetricTag source_ = MetricTag::kSynthetic;
};

inline constexpr std::size_t kMaxEnumerablePool = 24;

// Number of non-empty subsets of an n-pool with size at most max_size.
std::uint64_t CountSubsets(std::size_t n, std::size_t max_size);

// Streams every non-empty subset of a pool, by ascending size and then
// lexicographically by member list.
class SubsetEnumerator {
 public:
  // Throws kPoolTooLarge when the deduplicated pool exceeds 24 ids, and
  // kUsage when max_size exceeds the pool size.
  explicit SubsetEnumerator(std::span<const SampleId> ids,
                            std::optional<std::size_t> max_size = {});

  bool Next(DemoSet& out);
  std::uint64_t total() const noexcept { return total_; }

 private:
  std::vector<SampleId> pool_;
  std::size_t max_size_;
  std::size_t size_ = 0;
  std::vector<std::size_t> index_;
  std::uint64_t total_;
};

std::vector<DemoSet> EnumerateSubsets(std::span<const SampleId> ids,
                                      std::optional<std::size_t> max_size = {});

struct SplitSpec {
  std::vector<SampleId> pool_ids;
  std::vector<SampleId> candidate_ids;
  std::vector<SampleId> heldout_ids;
  std::uint64_t seed = 0;
};

// Draws a uniform n_prime-subset of the pool as candidates; both halves keep
// pool order. Throws kBadSplit unless 1 <= n_prime < |pool| with distinct ids.
SplitSpec MakeSplit(std::span<const SampleId> pool, std::size_t n_prime,
                    std::uint64_t seed);

// Seeded randomness is drawn from std::mt19937_64 through these mappings so
// that draws are reproducible independent of the standard library vendor.
namespace rng {

// Uniform integer in [0, bound) by rejection sampling.
std::uint64_t UniformBelow(std::mt19937_64& engine, std::uint64_t bound);

// Uniform double in [0, 1) with 53 random bits.
double UnitDouble(std::mt19937_64& engine);

// SplitMix64 finalizer, used as a stateless hash.
std::uint64_t Mix64(std::uint64_t x);

}  // namespace rng

}  // namespace demoselect

template <>
struct std::hash<demoselect::SampleId> {
  std::size_t operator()(demoselect::SampleId id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};

#endif  // DEMOSELECT_CORE_HPP_
