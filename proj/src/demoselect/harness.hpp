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

#ifndef DEMOSELECT_HARNESS_HPP_
#define DEMOSELECT_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "demoselect/core.hpp"
#include "demoselect/external.hpp"
#include "demoselect/ingest.hpp"
#include "demoselect/oracle.hpp"
#include "demoselect/select.hpp"

namespace demoselect::harness {

inline constexpr int kReportFormatVersion = 1;

// ---------------------------------------------------------------------------
// Oracle construction.

enum class Backend { kMatrix, kTable, kSynthetic, kExternal };

struct OracleSpec {
  Backend backend = Backend::kSynthetic;
  std::filesystem::path path;  // matrix / table
  oracle::LandscapeParams landscape;
  oracle::ExternalConfig external;
};

// An evaluator together with the ids it naturally offers as demonstrations
// and as queries (matrix rows/columns, landscape blocks, ...).
struct OracleHandle {
  std::unique_ptr<oracle::Evaluator> evaluator;
  std::vector<SampleId> demo_ids;
  std::vector<SampleId> query_ids;
};

OracleHandle OpenOracle(const OracleSpec& spec);

// JSON: {"backend":"synthetic","n_demos":..,"n_queries":..,"seed":..,
// "aggregator":"sum","lambda":..,"sigma":..,"planted":{...}} or
// {"backend":"matrix"|"table","path":..} or
// {"backend":"external","command":[..],"timeout_ms":..}.
OracleSpec ParseOracleSpec(const nlohmann::json& j, const std::filesystem::path& base);

// ---------------------------------------------------------------------------
// Experiment configuration.

struct StrategySpec {
  select::Strategy strategy = select::Strategy::kGreedy;
  select::HoldoutMode holdout = select::HoldoutMode::kFixed;
  std::size_t k = 1;
  std::optional<std::size_t> max_size;
  bool fair_loocv = false;
  bool iterative = false;
  // Exhaustive only: pick the subset on the test queries (the upper-bound
  // reference) rather than on the validation holdout.
  bool select_on_test = true;

  std::string Label() const;
};

enum class AnalysisCandidates { kSplit, kPool };

struct AnalysisSpec {
  bool all_subsets = false;  // coincidence over every subset, not singletons
  AnalysisCandidates candidates = AnalysisCandidates::kSplit;
  std::optional<std::size_t> max_size;
};

struct ExperimentConfig {
  OracleSpec oracle;
  std::optional<std::filesystem::path> manifest;
  std::vector<SampleId> pool;          // resolved, size n
  std::size_t n_prime = 6;
  std::vector<std::uint64_t> seeds;
  std::vector<StrategySpec> strategies;
  std::vector<SampleId> test_queries;  // resolved
  std::filesystem::path output_dir;
  std::size_t jobs = 1;
  AnalysisSpec analysis;
  std::string config_hash;             // sha256 of the canonical config JSON
};

// Parses and validates a config file; relative paths resolve against its
// directory. Missing pool/test ids are taken from the manifest roles or the
// oracle's natural demo/query ids.
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path);
ExperimentConfig ParseExperimentConfig(const nlohmann::json& j,
                                       const std::filesystem::path& base);

// ---------------------------------------------------------------------------
// Report.

struct CellResult {
  std::uint64_t seed = 0;
  std::string label;
  select::Strategy strategy = select::Strategy::kGreedy;
  std::vector<SampleId> candidates;
  DemoSet chosen;  // empty for random and nn
  std::optional<double> validation_utility;
  double test_utility = 0.0;
  std::uint64_t set_evaluations = 0;
  std::uint64_t oracle_calls = 0;
  std::uint64_t scoring_calls = 0;
  // nn only: test query -> retrieved set
  std::vector<std::pair<SampleId, DemoSet>> per_query;
};

struct AggregateRow {
  std::string label;
  std::size_t runs = 0;
  std::optional<double> validation_mean;
  std::optional<double> validation_std;
  double test_mean = 0.0;
  std::optional<double> test_std;  // needs >= 2 seeds
};

struct AuditRow {
  std::string label;
  std::uint64_t seed = 0;
  std::uint64_t measured = 0;
  std::string formula;
  std::string relation;  // "==" or "<="
  std::uint64_t bound = 0;
  bool pass = true;
};

struct Report {
  std::string config_hash;
  std::size_t n = 0;
  std::size_t n_prime = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<StrategySpec> strategies;
  std::vector<CellResult> cells;  // seed-major, then strategy order
  std::vector<AggregateRow> aggregate;
  std::vector<AuditRow> audit;
};

Report RunExperiment(const ExperimentConfig& config);

// Mean and sample standard deviation (n - 1 denominator).
AggregateRow Summarize(const std::string& label, const std::vector<CellResult>& cells);

std::vector<AuditRow> AuditCalls(const Report& report);

nlohmann::ordered_json ReportToJson(const Report& report);
Report ReportFromJson(const nlohmann::json& j);
// Human-readable table, two decimals, "mean ± std".
std::string RenderReport(const Report& report);
std::string RenderAudit(const std::vector<AuditRow>& audit);

// ---------------------------------------------------------------------------
// Analyses.

struct CoincidenceResult {
  DemoSet task_best;
  double task_best_mean = 0.0;
  double fraction = 0.0;
  std::vector<std::pair<SampleId, DemoSet>> per_query_best;
};

// Per-query argmax over candidate_sets, the task-level argmax of the mean,
// and the share of queries whose own best is the task-level best.
CoincidenceResult CoincidenceAnalysis(const oracle::Evaluator& oracle,
                                      const std::vector<DemoSet>& candidate_sets,
                                      std::span<const SampleId> test_queries);

struct RankHistogram {
  std::size_t max_rank = 0;
  std::vector<std::uint64_t> counts;  // counts[r - 1] for rank r
  std::vector<std::pair<SampleId, std::size_t>> per_query_rank;
  // Queries on which no enumerated set beats the chosen one.
  std::uint64_t best_hits = 0;
};

// Rank of each query's chosen set among all_sets on that query: 1 is worst,
// |all_sets| is best, ties share the lower rank.
RankHistogram RankFrequency(const oracle::Evaluator& oracle,
                            const std::vector<std::pair<SampleId, DemoSet>>& chosen_per_query,
                            const std::vector<DemoSet>& all_sets);

// Runs the strategies of each seed and renders both analyses into
// analysis.json and rank_histograms.csv under output_dir.
nlohmann::ordered_json RunAnalysis(const ExperimentConfig& config);
std::string RenderAnalysis(const nlohmann::ordered_json& analysis);

// ---------------------------------------------------------------------------
// Single selection runs.

nlohmann::ordered_json SelectionResultToJson(const select::SelectionResult& r);

// Runs one strategy described by a JSON request (see demoselect.h) and
// returns the result document including the full trace.
nlohmann::ordered_json RunSelectionRequest(const OracleHandle& oracle,
                                           const nlohmann::json& request);

// ---------------------------------------------------------------------------
// Landscape materialization.

struct GenOptions {
  oracle::LandscapeParams landscape;
  std::filesystem::path out_dir;
  std::optional<std::size_t> table_max_size;  // default: every size
  bool demo_columns = false;  // add demo ids as query columns (for loocv)
  std::size_t feature_dim = 8;
};

struct GenSummary {
  std::filesystem::path matrix;
  std::filesystem::path table;
  std::filesystem::path manifest;
  std::filesystem::path features;
  std::filesystem::path landscape;
  std::size_t table_entries = 0;
  std::size_t planted_columns = 0;
};

GenSummary GenerateLandscapeFiles(const GenOptions& options);

std::string Sha256Hex(std::string_view data);

}  // namespace demoselect::harness

#endif  // DEMOSELECT_HARNESS_HPP_
