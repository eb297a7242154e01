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

#ifndef DEMOSELECT_SELECT_HPP_
#define DEMOSELECT_SELECT_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "demoselect/core.hpp"
#include "demoselect/oracle.hpp"

namespace demoselect::select {

enum class Strategy { kRandom, kTopK, kGreedy, kExhaustive, kNearestNeighbor };

std::string_view StrategyName(Strategy s);
std::optional<Strategy> ParseStrategy(std::string_view name);

// kFixed scores every candidate set on the same frozen query set.
// kLoocv scores a set P while adding x on (candidates - P - {x}), followed by
// any extra queries in Holdout::queries.
enum class HoldoutMode { kFixed, kLoocv };

std::string_view HoldoutModeName(HoldoutMode m);
std::optional<HoldoutMode> ParseHoldoutMode(std::string_view name);

struct Holdout {
  HoldoutMode mode = HoldoutMode::kFixed;
  std::vector<SampleId> queries;
};

enum class StepKind { kConsidered, kAccepted, kRejected };

std::string_view StepKindName(StepKind k);

struct TraceStep {
  std::size_t step = 0;
  StepKind kind = StepKind::kConsidered;
  SampleId candidate;
  DemoSet set;
  double utility = 0.0;
};

struct SelectionResult {
  Strategy strategy = Strategy::kGreedy;
  HoldoutMode holdout_mode = HoldoutMode::kFixed;
  DemoSet chosen;
  // Empty only when no query remains to score the final set (loocv with every
  // candidate chosen and no extra queries).
  std::optional<Utility> validation_utility;
  std::vector<TraceStep> trace;
  // Set-evaluations made while searching; each costs one oracle call per
  // query in its query set.
  std::uint64_t set_evaluations = 0;
  // Evaluator counter delta over the whole run, including final scoring.
  std::uint64_t oracle_calls = 0;
  // Part of oracle_calls spent scoring the final set after the search.
  std::uint64_t scoring_calls = 0;
};

struct RunOptions {
  // Worker threads for scoring the candidates of one sweep. Only used when
  // the evaluator is thread-safe; results are reduced in candidate order.
  std::size_t jobs = 1;
};

struct TopKOptions {
  RunOptions run;
  // Re-run the singleton argmax after each insertion over the shrinking pool
  // instead of sorting one sweep of scores. Only differs in loocv mode.
  bool iterative = false;
};

struct GreedyOptions {
  RunOptions run;
  // In loocv mode, recompute the incumbent's score on the new candidate's
  // (smaller) query set before comparing.
  bool fair_loocv = false;
};

SelectionResult SelectTopK(const oracle::Evaluator& oracle,
                           std::span<const SampleId> candidates,
                           const Holdout& holdout, std::size_t k,
                           const TopKOptions& options = {});

SelectionResult SelectGreedy(const oracle::Evaluator& oracle,
                             std::span<const SampleId> candidates,
                             const Holdout& holdout,
                             const GreedyOptions& options = {});

struct RandomBaseline {
  Utility mean;
  std::vector<std::pair<DemoSet, double>> per_subset;  // enumeration order
  std::uint64_t set_evaluations = 0;
  std::uint64_t oracle_calls = 0;
};

// Average over every enumerated subset. Fixed holdout only.
RandomBaseline SelectRandomBaseline(const oracle::Evaluator& oracle,
                                    std::span<const SampleId> candidates,
                                    const Holdout& holdout,
                                    std::optional<std::size_t> max_size = {});

// Exhaustive best subset on the holdout. Fixed holdout only.
SelectionResult SelectExhaustive(const oracle::Evaluator& oracle,
                                 std::span<const SampleId> candidates,
                                 const Holdout& holdout,
                                 std::optional<std::size_t> max_size = {});

struct FeatureRow {
  SampleId id;
  std::vector<double> values;
};

double CosineSimilarity(std::span<const double> a, std::span<const double> b);

// Top-k candidates by cosine similarity to the query; first in candidate
// order wins ties. Makes no oracle calls.
DemoSet SelectNearestNeighbor(std::span<const FeatureRow> candidates,
                              std::span<const double> query_feature,
                              std::size_t k);

}  // namespace demoselect::select

#endif  // DEMOSELECT_SELECT_HPP_
