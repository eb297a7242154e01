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

#ifndef DEMOSELECT_ORACLE_HPP_
#define DEMOSELECT_ORACLE_HPP_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "demoselect/core.hpp"

namespace demoselect::oracle {

// Scores a demonstration set on one query. Implementations fold the frozen
// model and the task loss into a single call and must be pure within a run.
class Evaluator {
 public:
  Evaluator() = default;
  // Copies start with a fresh call counter.
  Evaluator(const Evaluator&) noexcept {}
  Evaluator& operator=(const Evaluator&) noexcept { return *this; }
  virtual ~Evaluator() = default;

  // Counts the call, then rejects an empty set with kEmptyInput.
  Utility Evaluate(const DemoSet& demos, SampleId query) const;

  std::uint64_t calls() const noexcept {
    return calls_.load(std::memory_order_relaxed);
  }

  // Whether Evaluate may be called from several threads at once.
  virtual bool thread_safe() const noexcept { return true; }

 protected:
  virtual Utility DoEvaluate(const DemoSet& demos, SampleId query) const = 0;

 private:
  mutable std::atomic<std::uint64_t> calls_{0};
};

// Forwards to a shared backend while keeping its own call counter, so
// concurrent experiment cells can be audited independently.
class CountingView final : public Evaluator {
 public:
  explicit CountingView(const Evaluator& inner) : inner_(inner) {}
  bool thread_safe() const noexcept override { return inner_.thread_safe(); }

 protected:
  Utility DoEvaluate(const DemoSet& demos, SampleId query) const override {
    return inner_.Evaluate(demos, query);
  }

 private:
  const Evaluator& inner_;
};

// Memoizes a pure backend. Repeated (set, query) pairs reach the backend once;
// this view still counts every call made through it.
class CachingView final : public Evaluator {
 public:
  explicit CachingView(const Evaluator& inner) : inner_(inner) {}
  bool thread_safe() const noexcept override { return inner_.thread_safe(); }
  std::size_t cached() const;

 protected:
  Utility DoEvaluate(const DemoSet& demos, SampleId query) const override;

 private:
  struct Key {
    DemoSet set;
    SampleId query;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  const Evaluator& inner_;
  mutable std::mutex mu_;
  mutable std::unordered_map<Key, Utility, KeyHash> cache_;
};

// ---------------------------------------------------------------------------
// Tabulated backends.

class OneShotMatrix final : public Evaluator {
 public:
  OneShotMatrix(std::vector<SampleId> demo_ids, std::vector<SampleId> query_ids,
                std::vector<double> values);

  // CSV: header "demo\query,<query ids...>", then "<demo id>,<utilities...>".
  static OneShotMatrix Load(const std::filesystem::path& path);
  void Save(const std::filesystem::path& path) const;

  const std::vector<SampleId>& demo_ids() const noexcept { return demo_ids_; }
  const std::vector<SampleId>& query_ids() const noexcept { return query_ids_; }
  double at(SampleId demo, SampleId query) const;

 protected:
  Utility DoEvaluate(const DemoSet& demos, SampleId query) const override;

 private:
  std::vector<SampleId> demo_ids_;
  std::vector<SampleId> query_ids_;
  std::vector<double> values_;  // row-major, demos x queries
  std::unordered_map<SampleId, std::size_t> row_;
  std::unordered_map<SampleId, std::size_t> col_;
};

struct SubsetKey {
  DemoSet set;
  SampleId query;
  friend bool operator==(const SubsetKey&, const SubsetKey&) = default;
};

struct SubsetKeyHash {
  std::size_t operator()(const SubsetKey& k) const noexcept;
};

class SubsetTable final : public Evaluator {
 public:
  SubsetTable() = default;

  // One JSON object per line: {"set":[ids ascending],"query":id,"utility":x}.
  static SubsetTable Load(const std::filesystem::path& path);
  // Entries are written sorted by (set, query).
  void Save(const std::filesystem::path& path) const;

  void Insert(const DemoSet& set, SampleId query, double utility);
  std::size_t size() const noexcept { return entries_.size(); }

  // Distinct members of any set, ascending, and distinct queries, ascending.
  std::vector<SampleId> DemoIds() const;
  std::vector<SampleId> QueryIds() const;

 protected:
  Utility DoEvaluate(const DemoSet& demos, SampleId query) const override;

 private:
  std::unordered_map<SubsetKey, double, SubsetKeyHash> entries_;
};

// ---------------------------------------------------------------------------
// Synthetic landscape.

enum class Aggregator { kSum, kMean };

struct PlantedDemo {
  std::uint32_t demo_index = 0;
  double gamma = 0.3;
  double high_value = 0.9;
};

struct LandscapeParams {
  std::uint32_t n_demos = 6;
  std::uint32_t n_queries = 10;
  std::uint64_t seed = 0;
  Aggregator aggregator = Aggregator::kSum;
  double interaction_scale = 0.0;
  double noise_scale = 0.0;
  std::optional<PlantedDemo> planted;
};

inline constexpr double kBaseLow = 0.2;
inline constexpr double kBaseHigh = 0.6;

// Demo ids are 0..n_demos-1, query ids follow at n_demos..n_demos+n_queries-1.
// The base matrix has a column for every id so that demo-block ids can also
// act as validation queries.
//
// u(P, q) = AGG_{i in P} A[i][q] + lambda * pairmean_{i<j in P} B[i][j]
//           + sigma * eta(P, q, seed)
//
// A ~ U[0.2, 0.6) drawn row-major, then B ~ U[-1, 1) over the strict upper
// triangle row-major, then planted columns by partial Fisher-Yates over the
// query block, all from one mt19937_64 seeded with `seed`. eta is a hash of
// (P, q, seed) mapped to [-1, 1).
class SyntheticLandscape final : public Evaluator {
 public:
  explicit SyntheticLandscape(LandscapeParams params);

  const LandscapeParams& params() const noexcept { return params_; }
  std::uint32_t n_columns() const noexcept {
    return params_.n_demos + params_.n_queries;
  }
  double base(std::uint32_t demo, std::uint32_t column) const {
    return base_[static_cast<std::size_t>(demo) * n_columns() + column];
  }
  double interaction(std::uint32_t a, std::uint32_t b) const {
    return interaction_[static_cast<std::size_t>(a) * params_.n_demos + b];
  }
  const std::vector<std::uint32_t>& planted_columns() const noexcept {
    return planted_columns_;
  }
  std::vector<SampleId> DemoIds() const;
  std::vector<SampleId> QueryIds() const;

  static double Noise(const DemoSet& demos, SampleId query, std::uint64_t seed);

 protected:
  Utility DoEvaluate(const DemoSet& demos, SampleId query) const override;

 private:
  LandscapeParams params_;
  std::vector<double> base_;
  std::vector<double> interaction_;
  std::vector<std::uint32_t> planted_columns_;  // ascending
};

// ---------------------------------------------------------------------------
// Operations over any backend.

// Mean utility of `demos` over `queries`; exactly |queries| oracle calls.
Utility AggregateHeldoutScore(const Evaluator& oracle, const DemoSet& demos,
                              std::span<const SampleId> queries);

struct BruteForceResult {
  DemoSet best;
  Utility utility;
  std::uint64_t set_evaluations;
};

// Scores every enumerated subset; first maximum in enumeration order wins.
BruteForceResult BruteForceBest(const Evaluator& oracle,
                                std::span<const SampleId> candidates,
                                std::span<const SampleId> queries,
                                std::optional<std::size_t> max_size = {});

}  // namespace demoselect::oracle

#endif  // DEMOSELECT_ORACLE_HPP_
