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

#include "demoselect/select.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <string>
#include <unordered_set>

#include "demoselect/errors.hpp"

namespace demoselect::select {

using oracle::AggregateHeldoutScore;
using oracle::Evaluator;

std::string_view StrategyName(Strategy s) {
  switch (s) {
    case Strategy::kRandom: return "random";
    case Strategy::kTopK: return "topk";
    case Strategy::kGreedy: return "greedy";
    case Strategy::kExhaustive: return "exhaustive";
    case Strategy::kNearestNeighbor: return "nn";
  }
  return "unknown";
}

std::optional<Strategy> ParseStrategy(std::string_view name) {
  for (auto s : {Strategy::kRandom, Strategy::kTopK, Strategy::kGreedy,
                 Strategy::kExhaustive, Strategy::kNearestNeighbor}) {
    if (StrategyName(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view HoldoutModeName(HoldoutMode m) {
  return m == HoldoutMode::kFixed ? "fixed" : "loocv";
}

std::optional<HoldoutMode> ParseHoldoutMode(std::string_view name) {
  if (name == "fixed") return HoldoutMode::kFixed;
  if (name == "loocv") return HoldoutMode::kLoocv;
  return std::nullopt;
}

std::string_view StepKindName(StepKind k) {
  switch (k) {
    case StepKind::kConsidered: return "considered";
    case StepKind::kAccepted: return "accepted";
    case StepKind::kRejected: return "rejected";
  }
  return "unknown";
}

namespace {

void CheckCandidates(std::span<const SampleId> candidates, const Holdout& holdout) {
  if (candidates.empty()) throw Error(ErrorKind::kEmptyPool, "no candidates");
  std::unordered_set<SampleId> seen;
  for (auto c : candidates) {
    if (!seen.insert(c).second) {
      throw Error(ErrorKind::kUsage,
                  "duplicate candidate " + std::to_string(c.value));
    }
  }
  for (auto q : holdout.queries) {
    if (seen.count(q)) {
      throw Error(ErrorKind::kOverlap,
                  "holdout query " + std::to_string(q.value) + " is a candidate");
    }
  }
  if (holdout.mode == HoldoutMode::kFixed && holdout.queries.empty()) {
    throw Error(ErrorKind::kEmptyQuerySet, "fixed holdout has no queries");
  }
}

// Queries that score `set` under the holdout mode; `set` already includes the
// candidate under consideration.
std::vector<SampleId> QueriesFor(const DemoSet& set,
                                 std::span<const SampleId> candidates,
                                 const Holdout& holdout) {
  if (holdout.mode == HoldoutMode::kFixed) return holdout.queries;
  std::vector<SampleId> qs;
  for (auto c : candidates) {
    if (!set.contains(c)) qs.push_back(c);
  }
  qs.insert(qs.end(), holdout.queries.begin(), holdout.queries.end());
  return qs;
}

struct Job {
  DemoSet set;
  std::vector<SampleId> queries;
};

// Scores jobs, in parallel when allowed; results stay in job order.
std::vector<Utility> ScoreAll(const Evaluator& oracle, const std::vector<Job>& jobs,
                              const RunOptions& run) {
  std::vector<Utility> out(jobs.size());
  const std::size_t workers =
      oracle.thread_safe() ? std::min(run.jobs, jobs.size()) : std::size_t{1};
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      out[i] = AggregateHeldoutScore(oracle, jobs[i].set, jobs[i].queries);
    }
    return out;
  }
  std::vector<std::future<void>> futures;
  for (std::size_t w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < jobs.size(); i += workers) {
        out[i] = AggregateHeldoutScore(oracle, jobs[i].set, jobs[i].queries);
      }
    }));
  }
  for (auto& f : futures) f.get();
  return out;
}

// First index holding the maximum.
std::size_t ArgMax(const std::vector<Utility>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].value() > scores[best].value()) best = i;
  }
  return best;
}

}  // namespace

SelectionResult SelectTopK(const Evaluator& oracle,
                           std::span<const SampleId> candidates,
                           const Holdout& holdout, std::size_t k,
                           const TopKOptions& options) {
  if (k < 1 || k > candidates.size()) {
    throw Error(ErrorKind::kBadK, "K=" + std::to_string(k) + " with " +
                                      std::to_string(candidates.size()) +
                                      " candidates");
  }
  CheckCandidates(candidates, holdout);
  const std::uint64_t calls_before = oracle.calls();

  SelectionResult result;
  result.strategy = Strategy::kTopK;
  result.holdout_mode = holdout.mode;

  std::vector<SampleId> picked;
  std::optional<Utility> top_score;
  if (!options.iterative) {
    std::vector<Job> jobs;
    for (auto x : candidates) {
      DemoSet single = DemoSet::Canonicalize(std::span(&x, 1));
      jobs.push_back({single, QueriesFor(single, candidates, holdout)});
    }
    auto scores = ScoreAll(oracle, jobs, options.run);
    result.set_evaluations = jobs.size();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      result.trace.push_back({0, StepKind::kConsidered, candidates[i],
                              jobs[i].set, scores[i].value()});
    }
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores[a].value() > scores[b].value();
    });
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t i = order[r];
      picked.push_back(candidates[i]);
      result.trace.push_back({r + 1, StepKind::kAccepted, candidates[i],
                              jobs[i].set, scores[i].value()});
    }
    top_score = scores[order[0]];
  } else {
    // Loop form: argmax over the remaining pool, scored on what remains.
    std::vector<SampleId> remaining(candidates.begin(), candidates.end());
    for (std::size_t step = 1; step <= k; ++step) {
      std::vector<Job> jobs;
      for (auto x : remaining) {
        DemoSet single = DemoSet::Canonicalize(std::span(&x, 1));
        jobs.push_back({single, QueriesFor(single, remaining, holdout)});
        if (jobs.back().queries.empty()) {
          throw Error(ErrorKind::kEmptyQuerySet,
                      "no queries left to rank candidate " + std::to_string(x.value));
        }
      }
      auto scores = ScoreAll(oracle, jobs, options.run);
      result.set_evaluations += jobs.size();
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        result.trace.push_back({step, StepKind::kConsidered, remaining[i],
                                jobs[i].set, scores[i].value()});
      }
      const std::size_t best = ArgMax(scores);
      result.trace.push_back({step, StepKind::kAccepted, remaining[best],
                              jobs[best].set, scores[best].value()});
      if (step == 1) top_score = scores[best];
      picked.push_back(remaining[best]);
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    }
  }

  result.chosen = DemoSet::Canonicalize(picked);
  const std::uint64_t search_calls = oracle.calls() - calls_before;
  if (k == 1) {
    result.validation_utility = top_score;
  } else {
    auto final_queries = QueriesFor(result.chosen, candidates, holdout);
    // A one-shot oracle can rank singletons but cannot score the K-set.
    if (!final_queries.empty()) {
      try {
        result.validation_utility =
            AggregateHeldoutScore(oracle, result.chosen, final_queries);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kCardinalityUnsupported) throw;
      }
    }
  }
  result.oracle_calls = oracle.calls() - calls_before;
  result.scoring_calls = result.oracle_calls - search_calls;
  return result;
}

SelectionResult SelectGreedy(const Evaluator& oracle,
                             std::span<const SampleId> candidates,
                             const Holdout& holdout, const GreedyOptions& options) {
  CheckCandidates(candidates, holdout);
  const std::uint64_t calls_before = oracle.calls();

  SelectionResult result;
  result.strategy = Strategy::kGreedy;
  result.holdout_mode = holdout.mode;

  DemoSet current;
  std::optional<Utility> incumbent;  // a_ori
  std::vector<SampleId> remaining(candidates.begin(), candidates.end());
  std::size_t step = 0;
  while (!remaining.empty()) {
    ++step;
    std::vector<Job> jobs;
    for (auto x : remaining) {
      DemoSet next = current.With(x);
      jobs.push_back({next, QueriesFor(next, candidates, holdout)});
    }
    // In loocv mode the last candidate can leave nothing to score against.
    if (jobs.front().queries.empty()) {
      if (!incumbent) {
        throw Error(ErrorKind::kEmptyQuerySet,
                    "loocv with one candidate needs extra holdout queries");
      }
      break;
    }
    auto scores = ScoreAll(oracle, jobs, options.run);
    result.set_evaluations += jobs.size();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      result.trace.push_back({step, StepKind::kConsidered, remaining[i],
                              jobs[i].set, scores[i].value()});
    }
    const std::size_t best = ArgMax(scores);
    const Utility candidate_score = scores[best];  // a_new

    bool accept = true;
    if (incumbent) {
      double baseline = incumbent->value();
      if (options.fair_loocv && holdout.mode == HoldoutMode::kLoocv) {
        baseline = AggregateHeldoutScore(oracle, current, jobs[best].queries).value();
        ++result.set_evaluations;
      }
      accept = candidate_score.value() >= baseline;
    }
    if (!accept) {
      result.trace.push_back({step, StepKind::kRejected, remaining[best],
                              jobs[best].set, candidate_score.value()});
      break;
    }
    result.trace.push_back({step, StepKind::kAccepted, remaining[best],
                            jobs[best].set, candidate_score.value()});
    current = jobs[best].set;
    incumbent = candidate_score;
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }

  result.chosen = current;
  result.validation_utility = incumbent;
  result.oracle_calls = oracle.calls() - calls_before;
  return result;
}

RandomBaseline SelectRandomBaseline(const Evaluator& oracle,
                                    std::span<const SampleId> candidates,
                                    const Holdout& holdout,
                                    std::optional<std::size_t> max_size) {
  if (holdout.mode != HoldoutMode::kFixed) {
    throw Error(ErrorKind::kUsage, "random baseline requires a fixed holdout");
  }
  CheckCandidates(candidates, holdout);
  const std::uint64_t calls_before = oracle.calls();
  SubsetEnumerator subsets(candidates, max_size);
  RandomBaseline out;
  out.per_subset.reserve(static_cast<std::size_t>(subsets.total()));
  double sum = 0.0;
  DemoSet s;
  MetricTag tag = MetricTag::kSynthetic;
  while (subsets.Next(s)) {
    Utility u = AggregateHeldoutScore(oracle, s, holdout.queries);
    tag = u.source();
    sum += u.value();
    out.per_subset.emplace_back(s, u.value());
  }
  out.set_evaluations = out.per_subset.size();
  out.mean = Utility::Make(sum / static_cast<double>(out.per_subset.size()), tag);
  out.oracle_calls = oracle.calls() - calls_before;
  return out;
}

SelectionResult SelectExhaustive(const Evaluator& oracle,
                                 std::span<const SampleId> candidates,
                                 const Holdout& holdout,
                                 std::optional<std::size_t> max_size) {
  if (holdout.mode != HoldoutMode::kFixed) {
    throw Error(ErrorKind::kUsage, "exhaustive search requires a fixed holdout");
  }
  CheckCandidates(candidates, holdout);
  const std::uint64_t calls_before = oracle.calls();
  auto best = oracle::BruteForceBest(oracle, candidates, holdout.queries, max_size);

  SelectionResult result;
  result.strategy = Strategy::kExhaustive;
  result.holdout_mode = HoldoutMode::kFixed;
  result.chosen = best.best;
  result.validation_utility = best.utility;
  result.set_evaluations = best.set_evaluations;
  result.trace.push_back({1, StepKind::kAccepted,
                          best.best.members().front(), best.best,
                          best.utility.value()});
  result.oracle_calls = oracle.calls() - calls_before;
  return result;
}

double CosineSimilarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorKind::kZeroVector, "cosine similarity of a zero vector");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

DemoSet SelectNearestNeighbor(std::span<const FeatureRow> candidates,
                              std::span<const double> query_feature, std::size_t k) {
  if (k < 1 || k > candidates.size()) {
    throw Error(ErrorKind::kBadK, "K=" + std::to_string(k) + " with " +
                                      std::to_string(candidates.size()) +
                                      " candidates");
  }
  std::vector<double> sims;
  sims.reserve(candidates.size());
  for (const auto& row : candidates) {
    if (row.values.size() != query_feature.size()) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "feature of sample " + std::to_string(row.id.value) + " has " +
                      std::to_string(row.values.size()) + " components, query has " +
                      std::to_string(query_feature.size()));
    }
    sims.push_back(CosineSimilarity(row.values, query_feature));
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
  std::vector<SampleId> ids;
  for (std::size_t r = 0; r < k; ++r) ids.push_back(candidates[order[r]].id);
  return DemoSet::Canonicalize(ids);
}

}  // namespace demoselect::select
