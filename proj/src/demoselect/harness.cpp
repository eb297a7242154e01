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

#include "demoselect/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <random>
#include <thread>
#include <type_traits>
#include <unordered_set>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "demoselect/errors.hpp"
#include "demoselect/log.hpp"
#include "demoselect/text.hpp"

namespace demoselect::harness {

using nlohmann::json;
using nlohmann::ordered_json;
using select::HoldoutMode;
using select::Strategy;

std::string Sha256Hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "sha256 failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

namespace {

[[noreturn]] void ConfigFail(const std::string& why) {
  throw Error(ErrorKind::kConfig, why);
}

bool IsNonNegativeInteger(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

std::vector<SampleId> IdList(const json& j, const std::string& what) {
  if (!j.is_array()) ConfigFail(what + " must be an array of ids");
  std::vector<SampleId> ids;
  for (const auto& v : j) {
    if (!IsNonNegativeInteger(v) || v.get<std::uint64_t>() > UINT32_MAX) {
      ConfigFail(what + " must hold ids in [0, 2^32)");
    }
    ids.emplace_back(v.get<std::uint32_t>());
  }
  return ids;
}

template <typename T>
T Get(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  const auto& v = j[key];
  if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!IsNonNegativeInteger(v) ||
        v.get<std::uint64_t>() > std::numeric_limits<T>::max()) {
      ConfigFail(std::string("'") + key + "' must be a non-negative integer in range");
    }
  }
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    ConfigFail(std::string("bad value for '") + key + "'");
  }
}

std::optional<std::size_t> OptSize(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return Get<std::size_t>(j, key, 0);
}

std::vector<SampleId> Minus(const std::vector<SampleId>& a, const std::vector<SampleId>& b) {
  std::unordered_set<SampleId> drop(b.begin(), b.end());
  std::vector<SampleId> out;
  for (auto id : a) {
    if (!drop.count(id)) out.push_back(id);
  }
  return out;
}


}  // namespace

// ---------------------------------------------------------------------------

OracleSpec ParseOracleSpec(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) ConfigFail("oracle must be an object");
  OracleSpec spec;
  const std::string backend = Get<std::string>(j, "backend", "");
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  if (backend == "matrix" || backend == "table") {
    spec.backend = backend == "matrix" ? Backend::kMatrix : Backend::kTable;
    const auto path = Get<std::string>(j, "path", "");
    if (path.empty()) ConfigFail(backend + " oracle needs a path");
    spec.path = resolve(path);
  } else if (backend == "synthetic") {
    spec.backend = Backend::kSynthetic;
    auto& p = spec.landscape;
    p.n_demos = Get<std::uint32_t>(j, "n_demos", 0);
    p.n_queries = Get<std::uint32_t>(j, "n_queries", 0);
    p.seed = Get<std::uint64_t>(j, "seed", 0);
    const auto agg = Get<std::string>(j, "aggregator", "sum");
    if (agg == "sum") {
      p.aggregator = oracle::Aggregator::kSum;
    } else if (agg == "mean") {
      p.aggregator = oracle::Aggregator::kMean;
    } else {
      ConfigFail("aggregator must be sum or mean");
    }
    p.interaction_scale = Get<double>(j, "lambda", 0.0);
    p.noise_scale = Get<double>(j, "sigma", 0.0);
    if (j.contains("planted") && !j["planted"].is_null()) {
      const auto& pl = j["planted"];
      oracle::PlantedDemo planted;
      planted.demo_index = Get<std::uint32_t>(pl, "demo_index", 0);
      planted.gamma = Get<double>(pl, "gamma", 0.3);
      planted.high_value = Get<double>(pl, "high_value", 0.9);
      p.planted = planted;
    }
  } else if (backend == "external") {
    spec.backend = Backend::kExternal;
    if (!j.contains("command") || !j["command"].is_array() || j["command"].empty()) {
      ConfigFail("external oracle needs a non-empty command array");
    }
    for (const auto& a : j["command"]) {
      if (!a.is_string()) ConfigFail("command entries must be strings");
      spec.external.command.push_back(a.get<std::string>());
    }
    spec.external.request_timeout =
        std::chrono::milliseconds(Get<std::uint64_t>(j, "timeout_ms", 60'000));
  } else {
    ConfigFail("unknown oracle backend '" + backend + "'");
  }
  return spec;
}

OracleHandle OpenOracle(const OracleSpec& spec) {
  OracleHandle h;
  switch (spec.backend) {
    case Backend::kMatrix: {
      auto m = std::make_unique<oracle::OneShotMatrix>(oracle::OneShotMatrix::Load(spec.path));
      h.demo_ids = m->demo_ids();
      h.query_ids = Minus(m->query_ids(), m->demo_ids());
      h.evaluator = std::move(m);
      break;
    }
    case Backend::kTable: {
      auto t = std::make_unique<oracle::SubsetTable>(oracle::SubsetTable::Load(spec.path));
      h.demo_ids = t->DemoIds();
      h.query_ids = Minus(t->QueryIds(), h.demo_ids);
      h.evaluator = std::move(t);
      break;
    }
    case Backend::kSynthetic: {
      auto s = std::make_unique<oracle::SyntheticLandscape>(spec.landscape);
      h.demo_ids = s->DemoIds();
      h.query_ids = s->QueryIds();
      h.evaluator = std::move(s);
      break;
    }
    case Backend::kExternal:
      h.evaluator = std::make_unique<oracle::ExternalEvaluator>(spec.external);
      break;
  }
  return h;
}

// ---------------------------------------------------------------------------

std::string StrategySpec::Label() const {
  std::vector<std::string> opts;
  switch (strategy) {
    case Strategy::kTopK:
    case Strategy::kNearestNeighbor:
      opts.push_back("k=" + std::to_string(k));
      break;
    default:
      break;
  }
  if (iterative && strategy == Strategy::kTopK) opts.push_back("iter");
  if (max_size && (strategy == Strategy::kExhaustive || strategy == Strategy::kRandom)) {
    opts.push_back("max=" + std::to_string(*max_size));
  }
  if (strategy == Strategy::kExhaustive && !select_on_test) opts.push_back("val");
  std::string label(select::StrategyName(strategy));
  if (!opts.empty()) {
    label += "(";
    for (std::size_t i = 0; i < opts.size(); ++i) label += (i ? "," : "") + opts[i];
    label += ")";
  }
  if (holdout == HoldoutMode::kLoocv &&
      (strategy == Strategy::kTopK || strategy == Strategy::kGreedy)) {
    label += fair_loocv && strategy == Strategy::kGreedy ? "[loocv,fair]" : "[loocv]";
  }
  return label;
}

namespace {

StrategySpec ParseStrategySpec(const json& j) {
  if (!j.is_object()) ConfigFail("strategy entries must be objects");
  StrategySpec s;
  const auto name = Get<std::string>(j, "name", "");
  auto parsed = select::ParseStrategy(name);
  if (!parsed) ConfigFail("unknown strategy '" + name + "'");
  s.strategy = *parsed;
  auto mode = select::ParseHoldoutMode(Get<std::string>(j, "holdout", "fixed"));
  if (!mode) ConfigFail("holdout must be fixed or loocv");
  s.holdout = *mode;
  if ((s.strategy == Strategy::kTopK || s.strategy == Strategy::kNearestNeighbor) &&
      !j.contains("k")) {
    ConfigFail(name + " needs k");
  }
  s.k = Get<std::size_t>(j, "k", 1);
  s.max_size = OptSize(j, "max_size");
  s.fair_loocv = Get<bool>(j, "fair_loocv", false);
  s.iterative = Get<bool>(j, "iterative", false);
  const auto on = Get<std::string>(j, "select_on", "test");
  if (on != "test" && on != "validation") ConfigFail("select_on must be test or validation");
  s.select_on_test = on == "test";
  if (s.holdout == HoldoutMode::kLoocv &&
      (s.strategy == Strategy::kRandom || s.strategy == Strategy::kExhaustive)) {
    ConfigFail(name + " supports only the fixed holdout");
  }
  return s;
}

ordered_json StrategySpecJson(const StrategySpec& s) {
  ordered_json j;
  j["label"] = s.Label();
  j["name"] = select::StrategyName(s.strategy);
  j["holdout"] = select::HoldoutModeName(s.holdout);
  j["k"] = s.k;
  j["max_size"] = s.max_size ? ordered_json(*s.max_size) : ordered_json(nullptr);
  j["fair_loocv"] = s.fair_loocv;
  j["iterative"] = s.iterative;
  j["select_on"] = s.select_on_test ? "test" : "validation";
  return j;
}

}  // namespace

ExperimentConfig ParseExperimentConfig(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) ConfigFail("config must be a JSON object");
  ExperimentConfig c;
  if (!j.contains("oracle")) ConfigFail("config needs an oracle");
  c.oracle = ParseOracleSpec(j["oracle"], base);

  std::optional<Pool> manifest;
  if (j.contains("manifest") && !j["manifest"].is_null()) {
    std::filesystem::path mp(Get<std::string>(j, "manifest", ""));
    c.manifest = mp.is_absolute() ? mp : base / mp;
    manifest = IngestManifest(*c.manifest);
  }

  std::vector<SampleId> natural_demos, natural_queries;
  const bool need_pool = !j.contains("pool");
  const bool need_test = !j.contains("test_queries");
  if ((need_pool && !manifest) || (need_test && !manifest)) {
    if (c.oracle.backend == Backend::kExternal) {
      ConfigFail("external oracle needs pool and test_queries, or a manifest with roles");
    }
    auto h = OpenOracle(c.oracle);
    natural_demos = h.demo_ids;
    natural_queries = h.query_ids;
  }

  if (!need_pool) {
    c.pool = IdList(j["pool"], "pool");
  } else if (manifest) {
    c.pool = manifest->Candidates();
  } else {
    c.pool = natural_demos;
  }
  if (j.contains("n") && !j["n"].is_null()) {
    const auto n = Get<std::size_t>(j, "n", 0);
    if (n > c.pool.size()) {
      ConfigFail("n=" + std::to_string(n) + " but only " + std::to_string(c.pool.size()) +
                 " pool ids are available");
    }
    c.pool.resize(n);
  }
  c.n_prime = Get<std::size_t>(j, "n_prime", 6);
  if (c.n_prime < 1 || c.n_prime >= c.pool.size()) {
    ConfigFail("n_prime must satisfy 1 <= n_prime < n (n=" + std::to_string(c.pool.size()) + ")");
  }
  if (c.n_prime > kMaxEnumerablePool) ConfigFail("n_prime above 24 cannot be enumerated");

  if (!j.contains("seeds") || !j["seeds"].is_array() || j["seeds"].empty()) {
    ConfigFail("seeds must be a non-empty array");
  }
  for (const auto& s : j["seeds"]) {
    if (!IsNonNegativeInteger(s)) ConfigFail("seeds must be non-negative integers");
    c.seeds.push_back(s.get<std::uint64_t>());
  }

  if (!j.contains("strategies") || !j["strategies"].is_array() || j["strategies"].empty()) {
    ConfigFail("strategies must be a non-empty array");
  }
  std::unordered_set<std::string> labels;
  for (const auto& s : j["strategies"]) {
    c.strategies.push_back(ParseStrategySpec(s));
    if (!labels.insert(c.strategies.back().Label()).second) {
      ConfigFail("duplicate strategy " + c.strategies.back().Label());
    }
  }

  if (!need_test) {
    c.test_queries = IdList(j["test_queries"], "test_queries");
  } else if (manifest) {
    c.test_queries = manifest->Queries();
  } else {
    c.test_queries = Minus(natural_queries, c.pool);
  }
  if (c.test_queries.empty()) ConfigFail("no test queries");
  {
    std::unordered_set<SampleId> pool_set(c.pool.begin(), c.pool.end());
    for (auto q : c.test_queries) {
      if (pool_set.count(q)) {
        ConfigFail("test query " + std::to_string(q.value) + " is in the pool");
      }
    }
  }

  c.output_dir = base / Get<std::string>(j, "output_dir", "out");
  c.jobs = std::max<std::size_t>(1, Get<std::size_t>(j, "jobs", 1));

  if (j.contains("analysis") && j["analysis"].is_object()) {
    const auto& a = j["analysis"];
    const auto sets = Get<std::string>(a, "candidate_sets", "singletons");
    if (sets != "singletons" && sets != "all") ConfigFail("candidate_sets must be singletons or all");
    c.analysis.all_subsets = sets == "all";
    const auto from = Get<std::string>(a, "candidates", "split");
    if (from != "split" && from != "pool") ConfigFail("analysis candidates must be split or pool");
    c.analysis.candidates = from == "pool" ? AnalysisCandidates::kPool : AnalysisCandidates::kSplit;
    c.analysis.max_size = OptSize(a, "max_size");
  }

  c.config_hash = Sha256Hex(j.dump());
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path) {
  const std::string content = text::ReadFile(path);
  json j = json::parse(content, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::kConfig, path.string() + ": invalid JSON");
  return ParseExperimentConfig(j, path.parent_path());
}

// ---------------------------------------------------------------------------

namespace {

struct CellContext {
  const oracle::Evaluator& backend;
  const std::optional<Pool>& pool;
  const std::vector<SampleId>& test_queries;
};

double MeanPerQuery(const oracle::Evaluator& oracle,
                    const std::vector<std::pair<SampleId, DemoSet>>& per_query) {
  double sum = 0.0;
  for (const auto& [q, set] : per_query) {
    sum += oracle::AggregateHeldoutScore(oracle, set, std::span(&q, 1)).value();
  }
  return sum / static_cast<double>(per_query.size());
}

std::vector<std::pair<SampleId, DemoSet>> NearestPerQuery(
    const Pool& pool, const std::vector<select::FeatureRow>& candidates,
    const std::vector<SampleId>& queries, std::size_t k) {
  std::vector<std::pair<SampleId, DemoSet>> out;
  for (auto q : queries) {
    auto qf = pool.Features({q});
    out.emplace_back(q, select::SelectNearestNeighbor(candidates, qf.front().values, k));
  }
  return out;
}

CellResult RunCell(const CellContext& ctx, const StrategySpec& spec, const SplitSpec& split) {
  oracle::CountingView view(ctx.backend);
  oracle::CountingView test_view(ctx.backend);
  CellResult cell;
  cell.seed = split.seed;
  cell.label = spec.Label();
  cell.strategy = spec.strategy;
  cell.candidates = split.candidate_ids;
  select::Holdout holdout{spec.holdout, split.heldout_ids};

  auto take = [&](const select::SelectionResult& r) {
    cell.chosen = r.chosen;
    if (r.validation_utility) cell.validation_utility = r.validation_utility->value();
    cell.set_evaluations = r.set_evaluations;
    cell.oracle_calls = r.oracle_calls;
    cell.scoring_calls = r.scoring_calls;
    cell.test_utility =
        oracle::AggregateHeldoutScore(test_view, cell.chosen, ctx.test_queries).value();
  };

  switch (spec.strategy) {
    case Strategy::kTopK: {
      select::TopKOptions opts;
      opts.iterative = spec.iterative;
      take(select::SelectTopK(view, split.candidate_ids, holdout, spec.k, opts));
      break;
    }
    case Strategy::kGreedy: {
      select::GreedyOptions opts;
      opts.fair_loocv = spec.fair_loocv;
      take(select::SelectGreedy(view, split.candidate_ids, holdout, opts));
      break;
    }
    case Strategy::kExhaustive: {
      select::Holdout on{HoldoutMode::kFixed,
                         spec.select_on_test ? ctx.test_queries : split.heldout_ids};
      auto r = select::SelectExhaustive(view, split.candidate_ids, on, spec.max_size);
      if (spec.select_on_test) {
        const auto before = view.calls();
        r.validation_utility =
            oracle::AggregateHeldoutScore(view, r.chosen, split.heldout_ids);
        r.scoring_calls = view.calls() - before;
        r.oracle_calls += r.scoring_calls;
      }
      take(r);
      break;
    }
    case Strategy::kRandom: {
      auto val = select::SelectRandomBaseline(view, split.candidate_ids, holdout, spec.max_size);
      auto test = select::SelectRandomBaseline(
          test_view, split.candidate_ids, {HoldoutMode::kFixed, ctx.test_queries},
          spec.max_size);
      cell.validation_utility = val.mean.value();
      cell.test_utility = test.mean.value();
      cell.set_evaluations = val.set_evaluations;
      cell.oracle_calls = val.oracle_calls;
      break;
    }
    case Strategy::kNearestNeighbor: {
      if (!ctx.pool) throw Error(ErrorKind::kConfig, "nn needs a manifest with features");
      auto feats = ctx.pool->Features(split.candidate_ids);
      if (spec.k < 1 || spec.k > feats.size()) {
        throw Error(ErrorKind::kBadK, "K=" + std::to_string(spec.k));
      }
      auto val = NearestPerQuery(*ctx.pool, feats, split.heldout_ids, spec.k);
      cell.per_query = NearestPerQuery(*ctx.pool, feats, ctx.test_queries, spec.k);
      cell.validation_utility = MeanPerQuery(view, val);
      cell.scoring_calls = view.calls();
      cell.oracle_calls = view.calls();
      cell.test_utility = MeanPerQuery(test_view, cell.per_query);
      break;
    }
  }
  return cell;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// failure in index order.
template <typename Fn>
void ParallelFor(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      body(i);
      if (errors[i]) break;
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < std::min(jobs, n); ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      });
    }
    for (auto& t : workers) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::optional<Pool> LoadPool(const ExperimentConfig& config) {
  if (!config.manifest) return std::nullopt;
  return IngestManifest(*config.manifest);
}

}  // namespace

AggregateRow Summarize(const std::string& label, const std::vector<CellResult>& cells) {
  AggregateRow row;
  row.label = label;
  std::vector<double> val, test;
  for (const auto& c : cells) {
    if (c.label != label) continue;
    ++row.runs;
    if (c.validation_utility) val.push_back(*c.validation_utility);
    test.push_back(c.test_utility);
  }
  auto mean = [](const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };
  auto stdev = [](const std::vector<double>& xs, double m) -> std::optional<double> {
    if (xs.size() < 2) return std::nullopt;
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
  };
  if (!test.empty()) {
    row.test_mean = mean(test);
    row.test_std = stdev(test, row.test_mean);
  }
  if (!val.empty() && val.size() == row.runs) {
    row.validation_mean = mean(val);
    row.validation_std = stdev(val, *row.validation_mean);
  }
  return row;
}

Report RunExperiment(const ExperimentConfig& config) {
  OracleHandle h = OpenOracle(config.oracle);
  const auto pool = LoadPool(config);

  Report report;
  report.config_hash = config.config_hash;
  report.n = config.pool.size();
  report.n_prime = config.n_prime;
  report.seeds = config.seeds;
  report.strategies = config.strategies;

  std::vector<SplitSpec> splits;
  for (auto seed : config.seeds) splits.push_back(MakeSplit(config.pool, config.n_prime, seed));

  const std::size_t per_seed = config.strategies.size();
  const std::size_t n_cells = splits.size() * per_seed;
  report.cells.resize(n_cells);
  CellContext ctx{*h.evaluator, pool, config.test_queries};
  const std::size_t jobs = h.evaluator->thread_safe() ? config.jobs : 1;
  ParallelFor(n_cells, jobs, [&](std::size_t i) {
    const auto& split = splits[i / per_seed];
    const auto& spec = config.strategies[i % per_seed];
    Log().debug("seed {} strategy {}: start", split.seed, spec.Label());
    try {
      report.cells[i] = RunCell(ctx, spec, split);
    } catch (const Error& e) {
      throw Error(e.kind(), "seed " + std::to_string(split.seed) + ", strategy " +
                                spec.Label() + ": " + e.detail());
    }
    Log().info("seed {} strategy {}: chosen {} ({} set-evaluations)", split.seed,
               spec.Label(), report.cells[i].chosen.ToString(),
               report.cells[i].set_evaluations);
  });

  for (const auto& spec : config.strategies) {
    report.aggregate.push_back(Summarize(spec.Label(), report.cells));
  }
  report.audit = AuditCalls(report);
  return report;
}

// ---------------------------------------------------------------------------

std::vector<AuditRow> AuditCalls(const Report& report) {
  std::vector<AuditRow> rows;
  const std::uint64_t np = report.n_prime;
  for (const auto& cell : report.cells) {
    auto spec_it = std::find_if(report.strategies.begin(), report.strategies.end(),
                                [&](const auto& s) { return s.Label() == cell.label; });
    if (spec_it == report.strategies.end()) continue;
    const auto& spec = *spec_it;
    AuditRow row;
    row.label = cell.label;
    row.seed = cell.seed;
    row.measured = cell.set_evaluations;
    switch (spec.strategy) {
      case Strategy::kTopK:
        if (spec.iterative) {
          row.formula = "sum_{i<K}(N'-i)";
          for (std::uint64_t i = 0; i < spec.k; ++i) row.bound += np - i;
        } else {
          row.formula = "N'";
          row.bound = np;
        }
        row.relation = "==";
        break;
      case Strategy::kGreedy:
        row.formula = "N'(N'+1)/2";
        row.bound = np * (np + 1) / 2;
        if (spec.fair_loocv && spec.holdout == HoldoutMode::kLoocv) {
          row.formula += "+N'-1";
          row.bound += np - 1;
        }
        row.relation = "<=";
        break;
      case Strategy::kExhaustive:
      case Strategy::kRandom:
        if (spec.max_size && *spec.max_size < np) {
          row.formula = "sum_{k<=" + std::to_string(*spec.max_size) + "} C(N',k)";
        } else {
          row.formula = "2^N'-1";
        }
        row.bound = CountSubsets(np, spec.max_size.value_or(np));
        row.relation = "==";
        break;
      case Strategy::kNearestNeighbor:
        row.formula = "0";
        row.bound = 0;
        row.relation = "==";
        break;
    }
    row.pass = row.relation == "==" ? row.measured == row.bound : row.measured <= row.bound;
    rows.push_back(row);
  }
  return rows;
}

namespace {

ordered_json OptNum(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> NumOpt(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

ordered_json ReportToJson(const Report& report) {
  ordered_json j;
  j["format_version"] = kReportFormatVersion;
  j["config_hash"] = report.config_hash;
  j["n"] = report.n;
  j["n_prime"] = report.n_prime;
  j["seeds"] = report.seeds;
  j["strategies"] = ordered_json::array();
  for (const auto& s : report.strategies) j["strategies"].push_back(StrategySpecJson(s));
  j["rows"] = ordered_json::array();
  for (const auto& c : report.cells) {
    ordered_json row;
    row["seed"] = c.seed;
    row["strategy"] = c.label;
    row["candidates"] = FromIds(c.candidates);
    row["chosen"] = FromIds(c.chosen.members());
    row["validation_utility"] = OptNum(c.validation_utility);
    row["test_utility"] = c.test_utility;
    row["set_evaluations"] = c.set_evaluations;
    row["oracle_calls"] = c.oracle_calls;
    row["scoring_calls"] = c.scoring_calls;
    if (!c.per_query.empty()) {
      row["per_query"] = ordered_json::array();
      for (const auto& [q, set] : c.per_query) {
        row["per_query"].push_back({{"query", q.value}, {"chosen", FromIds(set.members())}});
      }
    }
    j["rows"].push_back(row);
  }
  j["aggregate"] = ordered_json::array();
  for (const auto& a : report.aggregate) {
    ordered_json row;
    row["strategy"] = a.label;
    row["runs"] = a.runs;
    row["validation_mean"] = OptNum(a.validation_mean);
    row["validation_std"] = OptNum(a.validation_std);
    row["test_mean"] = a.test_mean;
    row["test_std"] = OptNum(a.test_std);
    j["aggregate"].push_back(row);
  }
  j["audit"] = ordered_json::array();
  for (const auto& a : report.audit) {
    ordered_json row;
    row["strategy"] = a.label;
    row["seed"] = a.seed;
    row["measured"] = a.measured;
    row["formula"] = a.formula;
    row["relation"] = a.relation;
    row["bound"] = a.bound;
    row["pass"] = a.pass;
    j["audit"].push_back(row);
  }
  return j;
}

Report ReportFromJson(const json& j) {
  try {
    if (j.value("format_version", 0) != kReportFormatVersion) {
      throw Error(ErrorKind::kParse, "unsupported report format version");
    }
    Report r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.n = j.at("n").get<std::size_t>();
    r.n_prime = j.at("n_prime").get<std::size_t>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& s : j.at("strategies")) r.strategies.push_back(ParseStrategySpec(s));
    for (const auto& row : j.at("rows")) {
      CellResult c;
      c.seed = row.at("seed").get<std::uint64_t>();
      c.label = row.at("strategy").get<std::string>();
      c.candidates = ToIds(row.at("candidates").get<std::vector<std::uint32_t>>());
      c.chosen = DemoSet::Canonicalize(ToIds(row.at("chosen").get<std::vector<std::uint32_t>>()));
      c.validation_utility = NumOpt(row, "validation_utility");
      c.test_utility = row.at("test_utility").get<double>();
      c.set_evaluations = row.at("set_evaluations").get<std::uint64_t>();
      c.oracle_calls = row.at("oracle_calls").get<std::uint64_t>();
      c.scoring_calls = row.at("scoring_calls").get<std::uint64_t>();
      for (const auto& s : r.strategies) {
        if (s.Label() == c.label) c.strategy = s.strategy;
      }
      r.cells.push_back(std::move(c));
    }
    for (const auto& s : r.strategies) r.aggregate.push_back(Summarize(s.Label(), r.cells));
    r.audit = AuditCalls(r);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("report: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw Error(ErrorKind::kParse, e.detail());
    throw;
  }
}

namespace {

std::string MeanStd(const std::optional<double>& mean, const std::optional<double>& sd) {
  if (!mean) return "-";
  if (!sd) return fmt::format("{:.2f}", *mean);
  return fmt::format("{:.2f} ± {:.2f}", *mean, *sd);
}

}  // namespace

std::string RenderReport(const Report& report) {
  std::string seeds;
  for (std::size_t i = 0; i < report.seeds.size(); ++i) {
    seeds += (i ? "," : "") + std::to_string(report.seeds[i]);
  }
  std::string out = fmt::format("config {}  N={}  N'={}  seeds={}\n",
                                report.config_hash.substr(0, 12), report.n,
                                report.n_prime, seeds);
  out += fmt::format("{:<24} {:>4}  {:<16} {:<16} {:>9}\n", "strategy", "runs",
                     "validation", "test", "set-evals");
  for (const auto& a : report.aggregate) {
    double evals = 0.0;
    std::size_t n = 0;
    for (const auto& c : report.cells) {
      if (c.label == a.label) {
        evals += static_cast<double>(c.set_evaluations);
        ++n;
      }
    }
    // "±" is two bytes in UTF-8; pad by display width.
    auto cell = [](const std::string& s) {
      const std::size_t extra = s.find("±") != std::string::npos ? 1 : 0;
      return fmt::format("{:<{}}", s, 16 + extra);
    };
    out += fmt::format("{:<24} {:>4}  {} {} {:>9.2f}\n", a.label, a.runs,
                       cell(MeanStd(a.validation_mean, a.validation_std)),
                       cell(MeanStd(a.test_mean, a.test_std)),
                       n ? evals / static_cast<double>(n) : 0.0);
  }
  return out;
}

std::string RenderAudit(const std::vector<AuditRow>& audit) {
  std::string out = fmt::format("{:<24} {:>6} {:>9} {:>3} {:<22} {:>9} {}\n", "strategy",
                                "seed", "measured", "", "bound", "value", "status");
  for (const auto& a : audit) {
    out += fmt::format("{:<24} {:>6} {:>9} {:>3} {:<22} {:>9} {}\n", a.label, a.seed,
                       a.measured, a.relation, a.formula, a.bound,
                       a.pass ? "ok" : "EXCEEDED");
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void CheckDisjoint(const DemoSet& set, std::span<const SampleId> queries) {
  for (auto q : queries) {
    if (set.contains(q)) {
      throw Error(ErrorKind::kOverlap, "query " + std::to_string(q.value) +
                                           " is a member of " + set.ToString());
    }
  }
}

}  // namespace

CoincidenceResult CoincidenceAnalysis(const oracle::Evaluator& oracle,
                                      const std::vector<DemoSet>& candidate_sets,
                                      std::span<const SampleId> test_queries) {
  if (candidate_sets.empty()) throw Error(ErrorKind::kEmptyInput, "no candidate sets");
  if (test_queries.empty()) throw Error(ErrorKind::kEmptyInput, "no test queries");
  for (const auto& s : candidate_sets) CheckDisjoint(s, test_queries);

  const std::size_t ns = candidate_sets.size();
  const std::size_t nq = test_queries.size();
  std::vector<double> grid(ns * nq);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t q = 0; q < nq; ++q) {
      grid[s * nq + q] = oracle.Evaluate(candidate_sets[s], test_queries[q]).value();
    }
  }

  CoincidenceResult result;
  std::size_t task_best = 0;
  double best_mean = 0.0;
  for (std::size_t s = 0; s < ns; ++s) {
    double sum = 0.0;
    for (std::size_t q = 0; q < nq; ++q) sum += grid[s * nq + q];
    const double mean = sum / static_cast<double>(nq);
    if (s == 0 || mean > best_mean) {
      best_mean = mean;
      task_best = s;
    }
  }
  result.task_best = candidate_sets[task_best];
  result.task_best_mean = best_mean;

  std::size_t hits = 0;
  for (std::size_t q = 0; q < nq; ++q) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < ns; ++s) {
      if (grid[s * nq + q] > grid[best * nq + q]) best = s;
    }
    result.per_query_best.emplace_back(test_queries[q], candidate_sets[best]);
    hits += best == task_best;
  }
  result.fraction = static_cast<double>(hits) / static_cast<double>(nq);
  return result;
}

RankHistogram RankFrequency(const oracle::Evaluator& oracle,
                            const std::vector<std::pair<SampleId, DemoSet>>& chosen_per_query,
                            const std::vector<DemoSet>& all_sets) {
  if (chosen_per_query.empty()) throw Error(ErrorKind::kEmptyInput, "no test queries");
  if (all_sets.empty()) throw Error(ErrorKind::kEmptyInput, "no candidate sets");
  RankHistogram hist;
  hist.max_rank = all_sets.size();
  hist.counts.assign(all_sets.size(), 0);
  for (const auto& [q, chosen] : chosen_per_query) {
    auto it = std::find(all_sets.begin(), all_sets.end(), chosen);
    if (it == all_sets.end()) {
      throw Error(ErrorKind::kChosenSetNotEnumerated,
                  chosen.ToString() + " (query " + std::to_string(q.value) + ")");
    }
    std::vector<double> us;
    us.reserve(all_sets.size());
    for (const auto& s : all_sets) {
      CheckDisjoint(s, std::span(&q, 1));
      us.push_back(oracle.Evaluate(s, q).value());
    }
    const double mine = us[static_cast<std::size_t>(it - all_sets.begin())];
    std::size_t below = 0;
    std::size_t above = 0;
    for (double u : us) {
      below += u < mine;
      above += u > mine;
    }
    const std::size_t rank = below + 1;
    hist.best_hits += above == 0;
    ++hist.counts[rank - 1];
    hist.per_query_rank.emplace_back(q, rank);
  }
  return hist;
}

ordered_json RunAnalysis(const ExperimentConfig& config) {
  OracleHandle h = OpenOracle(config.oracle);
  oracle::CachingView cache(*h.evaluator);
  const auto pool = LoadPool(config);
  CellContext ctx{cache, pool, config.test_queries};

  ordered_json out;
  out["format_version"] = kReportFormatVersion;
  out["config_hash"] = config.config_hash;
  out["candidate_sets"] = config.analysis.all_subsets ? "all" : "singletons";
  out["seeds"] = ordered_json::array();
  std::string csv = "seed,strategy,rank,count\n";

  double fraction_sum = 0.0;
  std::map<std::string, std::pair<double, std::size_t>> hit_sums;
  for (auto seed : config.seeds) {
    const SplitSpec split = MakeSplit(config.pool, config.n_prime, seed);
    const auto& cands = config.analysis.candidates == AnalysisCandidates::kPool
                            ? config.pool
                            : split.candidate_ids;
    std::vector<DemoSet> coincidence_sets;
    if (config.analysis.all_subsets) {
      coincidence_sets = EnumerateSubsets(cands, config.analysis.max_size);
    } else {
      for (auto c : cands) coincidence_sets.push_back(DemoSet::Canonicalize(std::span(&c, 1)));
    }
    const auto co = CoincidenceAnalysis(cache, coincidence_sets, config.test_queries);
    fraction_sum += co.fraction;

    ordered_json seed_j;
    seed_j["seed"] = seed;
    seed_j["candidates"] = FromIds(cands);
    ordered_json co_j;
    co_j["task_best"] = FromIds(co.task_best.members());
    co_j["task_best_mean"] = co.task_best_mean;
    co_j["fraction"] = co.fraction;
    co_j["per_query_best"] = ordered_json::array();
    for (const auto& [q, s] : co.per_query_best) {
      co_j["per_query_best"].push_back({{"query", q.value}, {"best", FromIds(s.members())}});
    }
    seed_j["coincidence"] = co_j;

    const auto all_sets = EnumerateSubsets(split.candidate_ids, config.analysis.max_size);
    seed_j["strategies"] = ordered_json::array();
    for (const auto& spec : config.strategies) {
      if (spec.strategy == Strategy::kRandom) continue;
      CellResult cell;
      try {
        cell = RunCell(ctx, spec, split);
      } catch (const Error& e) {
        throw Error(e.kind(), "seed " + std::to_string(seed) + ", strategy " +
                                  spec.Label() + ": " + e.detail());
      }
      std::vector<std::pair<SampleId, DemoSet>> chosen = cell.per_query;
      if (chosen.empty()) {
        for (auto q : config.test_queries) chosen.emplace_back(q, cell.chosen);
      }
      const auto hist = RankFrequency(cache, chosen, all_sets);
      const double hit_fraction = static_cast<double>(hist.best_hits) /
                                  static_cast<double>(hist.per_query_rank.size());
      auto& acc = hit_sums[spec.Label()];
      acc.first += hit_fraction;
      ++acc.second;

      ordered_json sj;
      sj["strategy"] = spec.Label();
      sj["best_hit_fraction"] = hit_fraction;
      sj["max_rank"] = hist.max_rank;
      sj["histogram"] = hist.counts;
      seed_j["strategies"].push_back(sj);
      for (std::size_t r = 0; r < hist.counts.size(); ++r) {
        csv += fmt::format("{},{},{},{}\n", seed, spec.Label(), r + 1, hist.counts[r]);
      }
    }
    out["seeds"].push_back(seed_j);
  }
  ordered_json summary;
  summary["coincidence_fraction_mean"] =
      fraction_sum / static_cast<double>(config.seeds.size());
  summary["best_hit_fraction_mean"] = ordered_json::object();
  for (const auto& spec : config.strategies) {
    auto it = hit_sums.find(spec.Label());
    if (it == hit_sums.end()) continue;
    summary["best_hit_fraction_mean"][spec.Label()] =
        it->second.first / static_cast<double>(it->second.second);
  }
  out["summary"] = summary;

  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + config.output_dir.string());
  text::WriteFile(config.output_dir / "analysis.json", out.dump(2) + "\n");
  text::WriteFile(config.output_dir / "rank_histograms.csv", csv);
  return out;
}

std::string RenderAnalysis(const ordered_json& analysis) {
  std::string out = fmt::format("coincidence over {} candidate sets\n",
                                analysis["candidate_sets"].get<std::string>());
  for (const auto& s : analysis["seeds"]) {
    const auto& co = s["coincidence"];
    std::string best;
    for (const auto& id : co["task_best"]) best += (best.empty() ? "" : ",") + id.dump();
    out += fmt::format("seed {:<4} task-best {{{}}}  fraction {:.2f}%\n",
                       s["seed"].get<std::uint64_t>(), best,
                       100.0 * co["fraction"].get<double>());
    for (const auto& st : s["strategies"]) {
      out += fmt::format("  {:<22} per-query best found for {:.2f}% of queries\n",
                         st["strategy"].get<std::string>(),
                         100.0 * st["best_hit_fraction"].get<double>());
    }
  }
  out += fmt::format("mean coincidence fraction {:.2f}%\n",
                     100.0 * analysis["summary"]["coincidence_fraction_mean"].get<double>());
  return out;
}

// ---------------------------------------------------------------------------

ordered_json SelectionResultToJson(const select::SelectionResult& r) {
  ordered_json j;
  j["strategy"] = select::StrategyName(r.strategy);
  j["holdout"] = select::HoldoutModeName(r.holdout_mode);
  j["chosen"] = FromIds(r.chosen.members());
  j["validation_utility"] = r.validation_utility
                                ? ordered_json(r.validation_utility->value())
                                : ordered_json(nullptr);
  j["set_evaluations"] = r.set_evaluations;
  j["oracle_calls"] = r.oracle_calls;
  j["scoring_calls"] = r.scoring_calls;
  j["trace"] = ordered_json::array();
  for (const auto& t : r.trace) {
    ordered_json step;
    step["step"] = t.step;
    step["kind"] = select::StepKindName(t.kind);
    step["candidate"] = t.candidate.value;
    step["set"] = FromIds(t.set.members());
    step["utility"] = t.utility;
    j["trace"].push_back(step);
  }
  return j;
}

ordered_json RunSelectionRequest(const OracleHandle& oracle, const json& request) {
  if (!request.is_object()) throw Error(ErrorKind::kUsage, "request must be an object");
  const auto name = Get<std::string>(request, "strategy", "");
  const auto strategy = select::ParseStrategy(name);
  if (!strategy) throw Error(ErrorKind::kUsage, "unknown strategy '" + name + "'");
  const auto mode = select::ParseHoldoutMode(Get<std::string>(request, "holdout", "fixed"));
  if (!mode) throw Error(ErrorKind::kUsage, "holdout must be fixed or loocv");
  if ((*strategy == Strategy::kTopK || *strategy == Strategy::kNearestNeighbor) &&
      (!request.contains("k") || request["k"].is_null())) {
    throw Error(ErrorKind::kUsage, name + " requires k");
  }
  const auto k = Get<std::size_t>(request, "k", 1);
  const auto max_size = OptSize(request, "max_size");

  std::optional<Pool> pool;
  if (request.contains("manifest") && !request["manifest"].is_null()) {
    pool = IngestManifest(Get<std::string>(request, "manifest", ""));
  }
  std::vector<SampleId> candidates, queries;
  if (request.contains("candidates")) {
    candidates = IdList(request["candidates"], "candidates");
  } else if (pool && !pool->Queries().empty()) {
    candidates = pool->Candidates();
  } else {
    candidates = oracle.demo_ids;
  }
  if (request.contains("queries")) {
    queries = IdList(request["queries"], "queries");
  } else if (pool && !pool->Queries().empty()) {
    queries = pool->Queries();
  } else {
    queries = Minus(oracle.query_ids, candidates);
  }
  if (candidates.empty()) throw Error(ErrorKind::kUsage, "no candidates available");

  select::RunOptions run;
  run.jobs = std::max<std::size_t>(1, Get<std::size_t>(request, "jobs", 1));
  const select::Holdout holdout{*mode, queries};
  const auto& ev = *oracle.evaluator;

  switch (*strategy) {
    case Strategy::kTopK: {
      select::TopKOptions opts;
      opts.run = run;
      opts.iterative = Get<bool>(request, "iterative", false);
      return SelectionResultToJson(select::SelectTopK(ev, candidates, holdout, k, opts));
    }
    case Strategy::kGreedy: {
      select::GreedyOptions opts;
      opts.run = run;
      opts.fair_loocv = Get<bool>(request, "fair_loocv", false);
      return SelectionResultToJson(select::SelectGreedy(ev, candidates, holdout, opts));
    }
    case Strategy::kExhaustive:
      return SelectionResultToJson(select::SelectExhaustive(ev, candidates, holdout, max_size));
    case Strategy::kRandom: {
      auto rb = select::SelectRandomBaseline(ev, candidates, holdout, max_size);
      ordered_json j;
      j["strategy"] = "random";
      j["holdout"] = "fixed";
      j["mean_utility"] = rb.mean.value();
      j["set_evaluations"] = rb.set_evaluations;
      j["oracle_calls"] = rb.oracle_calls;
      j["per_subset"] = ordered_json::array();
      for (const auto& [set, u] : rb.per_subset) {
        j["per_subset"].push_back({{"set", FromIds(set.members())}, {"utility", u}});
      }
      return j;
    }
    case Strategy::kNearestNeighbor: {
      if (!pool) throw Error(ErrorKind::kUsage, "nn requires a manifest with features");
      if (queries.empty()) throw Error(ErrorKind::kEmptyQuerySet, "nn needs queries");
      const auto feats = pool->Features(candidates);
      const auto before = ev.calls();
      ordered_json j;
      j["strategy"] = "nn";
      j["k"] = k;
      j["per_query"] = ordered_json::array();
      double sum = 0.0;
      for (const auto& [q, set] : NearestPerQuery(*pool, feats, queries, k)) {
        const double u = oracle::AggregateHeldoutScore(ev, set, std::span(&q, 1)).value();
        sum += u;
        j["per_query"].push_back(
            {{"query", q.value}, {"chosen", FromIds(set.members())}, {"utility", u}});
      }
      j["validation_utility"] = sum / static_cast<double>(queries.size());
      j["set_evaluations"] = 0;
      j["oracle_calls"] = ev.calls() - before;
      return j;
    }
  }
  throw Error(ErrorKind::kUsage, "unhandled strategy");
}

// ---------------------------------------------------------------------------

GenSummary GenerateLandscapeFiles(const GenOptions& options) {
  oracle::SyntheticLandscape land(options.landscape);
  const auto& p = land.params();
  const std::size_t max_size = options.table_max_size.value_or(p.n_demos);
  if (max_size > p.n_demos) throw Error(ErrorKind::kUsage, "table size cap exceeds n_demos");
  if (p.n_demos > kMaxEnumerablePool) {
    throw Error(ErrorKind::kPoolTooLarge, "n_demos above 24 cannot be tabulated");
  }
  if (options.feature_dim == 0) throw Error(ErrorKind::kUsage, "feature dimension must be positive");

  std::vector<SampleId> columns;
  if (options.demo_columns) columns = land.DemoIds();
  for (auto q : land.QueryIds()) columns.push_back(q);
  const auto demos = land.DemoIds();

  const std::uint64_t entries = CountSubsets(p.n_demos, max_size) * columns.size();
  if (entries > 20'000'000) {
    throw Error(ErrorKind::kUsage, fmt::format("subset table would hold {} entries; lower the size cap", entries));
  }

  std::error_code ec;
  std::filesystem::create_directories(options.out_dir, ec);
  if (ec || !std::filesystem::is_directory(options.out_dir)) {
    throw Error(ErrorKind::kIo, "cannot create " + options.out_dir.string());
  }

  GenSummary summary;
  summary.planted_columns = land.planted_columns().size();

  std::vector<double> values;
  for (auto d : demos) {
    const DemoSet single = DemoSet::Canonicalize(std::span(&d, 1));
    for (auto c : columns) values.push_back(land.Evaluate(single, c).value());
  }
  oracle::OneShotMatrix matrix(demos, columns, std::move(values));
  summary.matrix = options.out_dir / "matrix.csv";
  matrix.Save(summary.matrix);

  oracle::SubsetTable table;
  SubsetEnumerator subsets(demos, max_size);
  DemoSet s;
  while (subsets.Next(s)) {
    for (auto c : columns) {
      if (s.contains(c)) continue;
      table.Insert(s, c, land.Evaluate(s, c).value());
    }
  }
  summary.table = options.out_dir / "subsets.jsonl";
  summary.table_entries = table.size();
  table.Save(summary.table);

  std::mt19937_64 engine(rng::Mix64(p.seed ^ 0xfea7u));
  std::vector<select::FeatureRow> features;
  ordered_json manifest;
  manifest["version"] = 1;
  manifest["features"] = "features.csv";
  manifest["samples"] = ordered_json::array();
  auto add = [&](SampleId id, const char* role) {
    select::FeatureRow row{id, {}};
    for (std::size_t i = 0; i < options.feature_dim; ++i) {
      row.values.push_back(2.0 * rng::UnitDouble(engine) - 1.0);
    }
    manifest["samples"].push_back(
        {{"id", id.value}, {"feature_row", features.size()}, {"role", role}});
    features.push_back(std::move(row));
  };
  for (auto d : demos) add(d, "candidate");
  for (auto q : land.QueryIds()) add(q, "query");
  summary.features = options.out_dir / "features.csv";
  SaveFeatures(summary.features, features);
  summary.manifest = options.out_dir / "manifest.json";
  text::WriteFile(summary.manifest, manifest.dump(2) + "\n");

  ordered_json lj;
  lj["backend"] = "synthetic";
  lj["n_demos"] = p.n_demos;
  lj["n_queries"] = p.n_queries;
  lj["seed"] = p.seed;
  lj["aggregator"] = p.aggregator == oracle::Aggregator::kSum ? "sum" : "mean";
  lj["lambda"] = p.interaction_scale;
  lj["sigma"] = p.noise_scale;
  if (p.planted) {
    lj["planted"] = {{"demo_index", p.planted->demo_index},
                     {"gamma", p.planted->gamma},
                     {"high_value", p.planted->high_value}};
  }
  lj["planted_columns"] = land.planted_columns();
  summary.landscape = options.out_dir / "landscape.json";
  text::WriteFile(summary.landscape, lj.dump(2) + "\n");
  return summary;
}

}  // namespace demoselect::harness
