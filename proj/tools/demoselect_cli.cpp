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

// Command-line frontend. Talks to the engine only through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "demoselect/demoselect.h"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Owns a string returned by the library.
struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { ds_string_free(ptr); }
  std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

struct EvaluatorDeleter {
  void operator()(ds_evaluator* e) const { ds_evaluator_free(e); }
};
using EvaluatorPtr = std::unique_ptr<ds_evaluator, EvaluatorDeleter>;

// Thrown to leave a subcommand with a specific exit code.
struct Exit {
  int code;
};

void Check(ds_status status) {
  if (status == DS_OK) return;
  std::cerr << "error: " << ds_last_error() << "\n";
  throw Exit{static_cast<int>(status)};
}

[[noreturn]] void UsageError(const std::string& message) {
  std::cerr << "usage error: " << message << "\n";
  throw Exit{DS_ERR_USAGE};
}

void WriteText(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    throw Exit{DS_ERR_DATA};
  }
}

std::vector<std::string> SplitWords(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string JoinIds(const json& ids) {
  std::string out = "{";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(ids[i].get<unsigned>());
  }
  return out + "}";
}

std::string Num(const json& v) {
  if (v.is_null()) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v.get<double>());
  return buf;
}

// ---------------------------------------------------------------------------

struct LandscapeFlags {
  unsigned n_demos = 6;
  unsigned n_queries = 10;
  std::uint64_t seed = 0;
  std::string agg = "sum";
  double lambda = 0.0;
  double sigma = 0.0;
  std::optional<double> planted_gamma;
  double planted_high = 0.9;
  unsigned planted_demo = 0;

  void Add(CLI::App* cmd) {
    cmd->add_option("--n-demos", n_demos, "Number of candidate demonstrations")
        ->capture_default_str();
    cmd->add_option("--n-queries", n_queries, "Number of query columns")->capture_default_str();
    cmd->add_option("--seed", seed, "Seed for every random draw")->capture_default_str();
    cmd->add_option("--agg", agg, "Aggregation of per-demo scores")
        ->check(CLI::IsMember({"sum", "mean"}))
        ->capture_default_str();
    cmd->add_option("--lambda", lambda, "Pairwise interaction scale")->capture_default_str();
    cmd->add_option("--sigma", sigma, "Deterministic noise scale")->capture_default_str();
    cmd->add_option("--planted-gamma", planted_gamma,
                    "Fraction of queries where the planted demo dominates");
    cmd->add_option("--planted-high", planted_high, "Planted utility value")
        ->capture_default_str();
    cmd->add_option("--planted-demo", planted_demo, "Index of the planted demo")
        ->capture_default_str();
  }

  ds_landscape_params Params() const {
    ds_landscape_params p;
    ds_landscape_params_default(&p);
    p.n_demos = n_demos;
    p.n_queries = n_queries;
    p.seed = seed;
    p.aggregator = agg == "mean" ? DS_AGG_MEAN : DS_AGG_SUM;
    p.interaction_scale = lambda;
    p.noise_scale = sigma;
    if (planted_gamma) {
      p.planted = 1;
      p.planted_demo = planted_demo;
      p.planted_gamma = *planted_gamma;
      p.planted_high = planted_high;
    }
    return p;
  }
};

// ---------------------------------------------------------------------------
// gen

struct GenCmd {
  std::string out;
  LandscapeFlags landscape;
  std::optional<std::size_t> table_max_size;
  bool demo_columns = false;
  std::size_t feature_dim = 8;

  void Add(CLI::App& app) {
    auto* cmd = app.add_subcommand("gen", "Materialize a synthetic landscape as files");
    cmd->add_option("--out", out, "Output directory")->required();
    landscape.Add(cmd);
    cmd->add_option("--table-max-size", table_max_size,
                    "Largest subset size written to the subset table (default: all)");
    cmd->add_flag("--demo-columns", demo_columns,
                  "Also write matrix columns for demo ids (needed for loocv on files)");
    cmd->add_option("--feature-dim", feature_dim, "Dimension of the synthetic features")
        ->capture_default_str();
    cmd->callback([this] { Run(); });
  }

  void Run() {
    json req;
    req["out"] = out;
    req["n_demos"] = landscape.n_demos;
    req["n_queries"] = landscape.n_queries;
    req["seed"] = landscape.seed;
    req["aggregator"] = landscape.agg;
    req["lambda"] = landscape.lambda;
    req["sigma"] = landscape.sigma;
    if (landscape.planted_gamma) {
      req["planted_gamma"] = *landscape.planted_gamma;
      req["planted_high"] = landscape.planted_high;
      req["planted_demo"] = landscape.planted_demo;
    }
    if (table_max_size) req["table_max_size"] = *table_max_size;
    req["demo_columns"] = demo_columns;
    req["feature_dim"] = feature_dim;
    OwnedString summary;
    Check(ds_generate(req.dump().c_str(), &summary.ptr));
    const json s = json::parse(summary.str());
    std::cout << "matrix     " << s["matrix"].get<std::string>() << " (" << landscape.n_demos
              << " demos x " << landscape.n_queries << " queries)\n"
              << "table      " << s["table"].get<std::string>() << " ("
              << s["table_entries"].get<std::size_t>() << " entries)\n"
              << "manifest   " << s["manifest"].get<std::string>() << "\n"
              << "features   " << s["features"].get<std::string>() << "\n"
              << "landscape  " << s["landscape"].get<std::string>() << " ("
              << s["planted_columns"].get<std::size_t>() << " planted columns)\n";
  }
};

// ---------------------------------------------------------------------------
// select

struct SelectCmd {
  std::string oracle;
  std::string strategy;
  std::optional<std::size_t> k;
  std::string holdout = "fixed";
  std::string manifest;
  std::string out = "selection.json";
  std::string matrix;
  std::string table;
  std::string command;
  unsigned timeout_ms = 60'000;
  std::vector<unsigned> candidates;
  std::vector<unsigned> queries;
  std::optional<std::size_t> max_size;
  bool fair_loocv = false;
  bool iterative = false;
  std::size_t jobs = 1;
  LandscapeFlags landscape;

  void Add(CLI::App& app) {
    auto* cmd = app.add_subcommand("select", "Run one selection strategy against an oracle");
    cmd->add_option("--oracle", oracle, "Oracle backend")
        ->required()
        ->check(CLI::IsMember({"matrix", "table", "synthetic", "external"}));
    cmd->add_option("--strategy", strategy, "Selection strategy")
        ->required()
        ->check(CLI::IsMember({"topk", "greedy", "random", "exhaustive", "nn"}));
    cmd->add_option("--k", k, "Number of demos (required for topk and nn)");
    cmd->add_option("--holdout", holdout, "Validation query policy")
        ->check(CLI::IsMember({"fixed", "loocv"}))
        ->capture_default_str();
    cmd->add_option("--manifest", manifest, "Sample manifest (roles and features)");
    cmd->add_option("--out", out, "Path of the result JSON")->capture_default_str();
    cmd->add_option("--matrix", matrix, "One-shot matrix CSV (--oracle matrix)");
    cmd->add_option("--table", table, "Subset table JSONL (--oracle table)");
    cmd->add_option("--command", command,
                    "Evaluator command line, split on whitespace (--oracle external)");
    cmd->add_option("--timeout-ms", timeout_ms, "Per-request timeout for external evaluators")
        ->capture_default_str();
    cmd->add_option("--candidates", candidates, "Candidate ids (comma separated)")
        ->delimiter(',');
    cmd->add_option("--queries", queries, "Validation query ids (comma separated)")
        ->delimiter(',');
    cmd->add_option("--max-size", max_size, "Largest subset size for random/exhaustive");
    cmd->add_flag("--fair-loocv", fair_loocv,
                  "Greedy in loocv: rescore the incumbent on the shrunken query set");
    cmd->add_flag("--iterative", iterative, "Top-K: re-sweep remaining candidates each round");
    cmd->add_option("--jobs", jobs, "Worker threads for thread-safe oracles")
        ->capture_default_str();
    landscape.Add(cmd);
    cmd->callback([this] { Run(); });
  }

  EvaluatorPtr Open() {
    ds_evaluator* ev = nullptr;
    if (oracle == "matrix") {
      if (matrix.empty()) UsageError("--oracle matrix requires --matrix");
      Check(ds_evaluator_open_matrix(matrix.c_str(), &ev));
    } else if (oracle == "table") {
      if (table.empty()) UsageError("--oracle table requires --table");
      Check(ds_evaluator_open_table(table.c_str(), &ev));
    } else if (oracle == "synthetic") {
      const auto params = landscape.Params();
      Check(ds_evaluator_open_synthetic(&params, &ev));
    } else {
      const auto words = SplitWords(command);
      if (words.empty()) UsageError("--oracle external requires --command");
      std::vector<const char*> argv;
      for (const auto& w : words) argv.push_back(w.c_str());
      Check(ds_evaluator_open_external(argv.data(), argv.size(), timeout_ms, &ev));
    }
    return EvaluatorPtr(ev);
  }

  void Run() {
    if ((strategy == "topk" || strategy == "nn") && !k) {
      UsageError("--strategy " + strategy + " requires --k");
    }
    if (strategy == "nn" && manifest.empty()) UsageError("--strategy nn requires --manifest");
    json req;
    req["strategy"] = strategy;
    req["holdout"] = holdout;
    if (k) req["k"] = *k;
    if (!manifest.empty()) req["manifest"] = manifest;
    if (!candidates.empty()) req["candidates"] = candidates;
    if (!queries.empty()) req["queries"] = queries;
    if (max_size) req["max_size"] = *max_size;
    req["fair_loocv"] = fair_loocv;
    req["iterative"] = iterative;
    req["jobs"] = jobs;

    auto ev = Open();
    OwnedString result;
    Check(ds_select(ev.get(), req.dump().c_str(), &result.ptr));
    if (oracle == "external") {
      int code = 0;
      Check(ds_evaluator_shutdown(ev.get(), &code));
      if (code != 0) std::cerr << "warning: evaluator exited with code " << code << "\n";
    }
    WriteText(out, result.str() + "\n");
    Summarize(json::parse(result.str()));
  }

  void Summarize(const json& r) {
    std::cout << "strategy         " << r["strategy"].get<std::string>();
    if (r.contains("holdout")) std::cout << " [" << r["holdout"].get<std::string>() << "]";
    std::cout << "\n";
    if (r.contains("chosen")) std::cout << "chosen           " << JoinIds(r["chosen"]) << "\n";
    if (r.contains("validation_utility")) {
      std::cout << "validation       " << Num(r["validation_utility"]) << "\n";
    }
    if (r.contains("mean_utility")) {
      std::cout << "mean utility     " << Num(r["mean_utility"]) << " over "
                << r["per_subset"].size() << " subsets\n";
    }
    if (r.contains("per_query")) {
      std::cout << "queries          " << r["per_query"].size() << "\n";
    }
    std::cout << "set evaluations  " << r["set_evaluations"].get<std::uint64_t>() << "\n"
              << "oracle calls     " << r["oracle_calls"].get<std::uint64_t>() << "\n"
              << "result           " << out << "\n";
  }
};

// ---------------------------------------------------------------------------
// compare / analyze / audit

struct CompareCmd {
  std::string config;
  std::string out;

  void Add(CLI::App& app) {
    auto* cmd = app.add_subcommand("compare", "Run every strategy over every seed");
    cmd->add_option("--config", config, "Experiment config JSON")->required();
    cmd->add_option("--out", out, "Output directory (default: the config's output_dir)");
    cmd->callback([this] { Run(); });
  }

  void Run() {
    OwnedString report, table;
    Check(ds_compare(config.c_str(), out.empty() ? nullptr : out.c_str(), &report.ptr,
                     &table.ptr));
    std::cout << table.str();
  }
};

struct AnalyzeCmd {
  std::string config;
  std::string out;

  void Add(CLI::App& app) {
    auto* cmd = app.add_subcommand("analyze", "Coincidence and rank-frequency analyses");
    cmd->add_option("--config", config, "Experiment config JSON")->required();
    cmd->add_option("--out", out, "Output directory (default: the config's output_dir)");
    cmd->callback([this] { Run(); });
  }

  void Run() {
    OwnedString analysis, text;
    Check(ds_analyze(config.c_str(), out.empty() ? nullptr : out.c_str(), &analysis.ptr,
                     &text.ptr));
    std::cout << text.str();
  }
};

struct AuditCmd {
  std::string config;
  std::string report;
  std::string out;

  void Add(CLI::App& app) {
    auto* cmd = app.add_subcommand("audit", "Check oracle-call counts of a compare report");
    auto* c = cmd->add_option("--config", config,
                              "Experiment config; reads report.json from its output_dir");
    auto* r = cmd->add_option("--report", report, "Report JSON written by compare");
    c->excludes(r);
    cmd->add_option("--out", out, "Directory for audit.json (default: next to the report)");
    cmd->callback([this] { Run(); });
  }

  void Run() {
    std::string report_path = report;
    std::string dir = out;
    if (report_path.empty()) {
      if (config.empty()) UsageError("audit requires --config or --report");
      OwnedString cfg_dir;
      Check(ds_config_output_dir(config.c_str(), &cfg_dir.ptr));
      report_path = cfg_dir.str() + "/report.json";
      if (dir.empty()) dir = cfg_dir.str();
    }
    if (dir.empty()) {
      const auto slash = report_path.find_last_of('/');
      dir = slash == std::string::npos ? "." : report_path.substr(0, slash);
    }
    std::ifstream in(report_path, std::ios::binary);
    if (!in) {
      std::cerr << "error: cannot read " << report_path << "\n";
      throw Exit{DS_ERR_DATA};
    }
    std::stringstream buf;
    buf << in.rdbuf();
    OwnedString audit, table;
    int all_pass = 0;
    Check(ds_audit_report(buf.str().c_str(), &audit.ptr, &table.ptr, &all_pass));
    WriteText(dir + "/audit.json", audit.str());
    std::cout << table.str();
    if (!all_pass) {
      std::cerr << "audit: at least one strategy exceeded its call bound\n";
      throw Exit{DS_ERR_ORACLE};
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demonstration selection for in-context visual models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ds_version()));

  GenCmd gen;
  SelectCmd select;
  CompareCmd compare;
  AnalyzeCmd analyze;
  AuditCmd audit;
  gen.Add(app);
  select.Add(app);
  compare.Add(app);
  analyze.Add(app);
  audit.Add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return DS_ERR_USAGE;
  } catch (const Exit& e) {
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return DS_ERR_DATA;
  }
  return 0;
}
