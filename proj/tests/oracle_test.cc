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

#include <cmath>
#include <fstream>
#include <thread>

#include "gtest/gtest.h"
#include "demoselect/text.hpp"
#include "test_util.hpp"

namespace demoselect::oracle {
namespace {

using testing::Ids;
using testing::KindOf;
using testing::Range;
using testing::TempDir;

SampleId Q(std::uint32_t v) { return SampleId(v); }

// Scores a set by a lookup keyed on its string form; counts nothing itself.
class MapEvaluator : public Evaluator {
 public:
  explicit MapEvaluator(std::map<std::string, double> m) : m_(std::move(m)) {}

 protected:
  Utility DoEvaluate(const DemoSet& demos, SampleId) const override {
    return Utility::Make(m_.at(demos.ToString()), MetricTag::kSynthetic);
  }

 private:
  std::map<std::string, double> m_;
};

TEST(EvaluatorTest, CountsEveryCallIncludingRejected) {
  MapEvaluator ev({{"{1}", 0.5}});
  ev.Evaluate(DemoSet::Of({1}), Q(9));
  EXPECT_EQ(KindOf([&] { ev.Evaluate(DemoSet(), Q(9)); }), ErrorKind::kEmptyInput);
  EXPECT_EQ(ev.calls(), 2u);
}

TEST(EvaluatorTest, ViewsCountSeparately) {
  MapEvaluator ev({{"{1}", 0.5}});
  CountingView a(ev);
  CountingView b(ev);
  a.Evaluate(DemoSet::Of({1}), Q(9));
  b.Evaluate(DemoSet::Of({1}), Q(9));
  b.Evaluate(DemoSet::Of({1}), Q(9));
  EXPECT_EQ(a.calls(), 1u);
  EXPECT_EQ(b.calls(), 2u);
  EXPECT_EQ(ev.calls(), 3u);
}

TEST(EvaluatorTest, CachingViewForwardsOnce) {
  MapEvaluator ev({{"{1}", 0.5}, {"{2}", 0.25}});
  CachingView cache(ev);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(cache.Evaluate(DemoSet::Of({1}), Q(9)).value(), 0.5);
    EXPECT_EQ(cache.Evaluate(DemoSet::Of({2}), Q(9)).value(), 0.25);
  }
  EXPECT_EQ(cache.calls(), 6u);
  EXPECT_EQ(ev.calls(), 2u);
  EXPECT_EQ(cache.cached(), 2u);
}

TEST(AggregateTest, SingleQuery) {
  SubsetTable t;
  t.Insert(DemoSet::Of({1}), Q(7), 0.37);
  auto qs = Ids({7});
  EXPECT_EQ(AggregateHeldoutScore(t, DemoSet::Of({1}), qs).value(), 0.37);
}

TEST(AggregateTest, MeanOfTwo) {
  SubsetTable t;
  t.Insert(DemoSet::Of({1}), Q(7), 0.2);
  t.Insert(DemoSet::Of({1}), Q(8), 0.4);
  auto qs = Ids({7, 8});
  EXPECT_NEAR(AggregateHeldoutScore(t, DemoSet::Of({1}), qs).value(), 0.3, 1e-15);
}

TEST(AggregateTest, Errors) {
  SubsetTable t;
  t.Insert(DemoSet::Of({1}), Q(7), 0.2);
  EXPECT_EQ(KindOf([&] { AggregateHeldoutScore(t, DemoSet::Of({1}), {}); }),
            ErrorKind::kEmptyQuerySet);
  auto qs = Ids({7});
  EXPECT_EQ(KindOf([&] { AggregateHeldoutScore(t, DemoSet(), qs); }), ErrorKind::kEmptyInput);
  auto overlap = Ids({1});
  EXPECT_EQ(KindOf([&] { AggregateHeldoutScore(t, DemoSet::Of({1}), overlap); }),
            ErrorKind::kOverlap);
}

TEST(SyntheticTest, SingletonIsBaseEntry) {
  SyntheticLandscape land({.n_demos = 6, .n_queries = 10, .seed = 3});
  for (std::uint32_t i = 0; i < 6; ++i) {
    for (std::uint32_t q = 6; q < 16; ++q) {
      EXPECT_EQ(land.Evaluate(DemoSet::Of({i}), Q(q)).value(), land.base(i, q));
    }
  }
}

TEST(SyntheticTest, PairIsSumOfBaseEntries) {
  SyntheticLandscape land({.n_demos = 6, .n_queries = 10, .seed = 4});
  for (std::uint32_t i = 0; i < 6; ++i) {
    for (std::uint32_t j = i + 1; j < 6; ++j) {
      EXPECT_EQ(land.Evaluate(DemoSet::Of({i, j}), Q(9)).value(),
                land.base(i, 9) + land.base(j, 9));
    }
  }
}

TEST(SyntheticTest, BaseEntriesInRange) {
  SyntheticLandscape land({.n_demos = 5, .n_queries = 40, .seed = 1});
  for (std::uint32_t i = 0; i < 5; ++i) {
    for (std::uint32_t c = 0; c < land.n_columns(); ++c) {
      EXPECT_GE(land.base(i, c), kBaseLow);
      EXPECT_LT(land.base(i, c), kBaseHigh);
    }
  }
}

TEST(SyntheticTest, InteractionAndNoiseTerms) {
  LandscapeParams p{.n_demos = 4, .n_queries = 3, .seed = 8};
  p.interaction_scale = 0.5;
  p.noise_scale = 0.1;
  SyntheticLandscape land(p);
  const auto set = DemoSet::Of({0, 2, 3});
  const double pair_mean =
      (land.interaction(0, 2) + land.interaction(0, 3) + land.interaction(2, 3)) / 3.0;
  const double expected = land.base(0, 5) + land.base(2, 5) + land.base(3, 5) +
                          0.5 * pair_mean + 0.1 * SyntheticLandscape::Noise(set, Q(5), 8);
  EXPECT_DOUBLE_EQ(land.Evaluate(set, Q(5)).value(), expected);
  EXPECT_EQ(land.interaction(1, 1), 0.0);
  EXPECT_EQ(land.interaction(1, 3), land.interaction(3, 1));
}

TEST(SyntheticTest, NoiseIsBoundedAndDeterministic) {
  for (std::uint32_t q = 0; q < 200; ++q) {
    const double n = SyntheticLandscape::Noise(DemoSet::Of({1, q}), Q(q), 5);
    EXPECT_GE(n, -1.0);
    EXPECT_LT(n, 1.0);
    EXPECT_EQ(n, SyntheticLandscape::Noise(DemoSet::Of({1, q}), Q(q), 5));
  }
}

TEST(SyntheticTest, MeanAggregator) {
  LandscapeParams p{.n_demos = 3, .n_queries = 2, .seed = 2};
  p.aggregator = Aggregator::kMean;
  SyntheticLandscape land(p);
  EXPECT_DOUBLE_EQ(land.Evaluate(DemoSet::Of({0, 1}), Q(3)).value(),
                   (land.base(0, 3) + land.base(1, 3)) / 2.0);
}

TEST(SyntheticTest, PlantedColumnCount) {
  LandscapeParams p{.n_demos = 6, .n_queries = 10, .seed = 0};
  p.planted = PlantedDemo{2, 0.3, 0.9};
  SyntheticLandscape land(p);
  ASSERT_EQ(land.planted_columns().size(), 3u);
  for (auto c : land.planted_columns()) {
    EXPECT_GE(c, 6u);
    EXPECT_EQ(land.base(2, c), 0.9);
  }
  p.n_queries = 7;  // 0.3 * 7 = 2.1 -> 3
  EXPECT_EQ(SyntheticLandscape(p).planted_columns().size(), 3u);
}

TEST(SyntheticTest, ConfigErrors) {
  EXPECT_EQ(KindOf([] { SyntheticLandscape({.n_demos = 0}); }), ErrorKind::kConfig);
  LandscapeParams p;
  p.interaction_scale = -1;
  EXPECT_EQ(KindOf([&] { SyntheticLandscape{p}; }), ErrorKind::kConfig);
  p = {};
  p.planted = PlantedDemo{9, 0.3, 0.9};
  EXPECT_EQ(KindOf([&] { SyntheticLandscape{p}; }), ErrorKind::kConfig);
  p.planted = PlantedDemo{0, 0.3, 0.5};
  EXPECT_EQ(KindOf([&] { SyntheticLandscape{p}; }), ErrorKind::kConfig);
}

TEST(SyntheticTest, OutOfRangeIds) {
  SyntheticLandscape land({.n_demos = 3, .n_queries = 2});
  EXPECT_EQ(KindOf([&] { land.Evaluate(DemoSet::Of({3}), Q(4)); }),
            ErrorKind::kIndexOutOfRange);
  EXPECT_EQ(KindOf([&] { land.Evaluate(DemoSet::Of({0}), Q(5)); }),
            ErrorKind::kIndexOutOfRange);
}

TEST(BruteForceTest, HandEnumerated) {
  SubsetTable t;
  t.Insert(DemoSet::Of({1}), Q(9), 0.3);
  t.Insert(DemoSet::Of({2}), Q(9), 0.5);
  t.Insert(DemoSet::Of({1, 2}), Q(9), 0.4);
  auto cands = Ids({1, 2});
  auto qs = Ids({9});
  const auto r = BruteForceBest(t, cands, qs);
  EXPECT_EQ(r.best, DemoSet::Of({2}));
  EXPECT_EQ(r.utility.value(), 0.5);
  EXPECT_EQ(r.set_evaluations, 3u);
}

TEST(BruteForceTest, ModularPicksEverything) {
  SyntheticLandscape land({.n_demos = 6, .n_queries = 10, .seed = 11});
  auto cands = land.DemoIds();
  auto qs = land.QueryIds();
  EXPECT_EQ(BruteForceBest(land, cands, qs).best.size(), 6u);
}

TEST(BruteForceTest, TieGoesToEnumerationOrder) {
  SubsetTable t;
  t.Insert(DemoSet::Of({1}), Q(9), 0.5);
  t.Insert(DemoSet::Of({2}), Q(9), 0.5);
  t.Insert(DemoSet::Of({1, 2}), Q(9), 0.1);
  auto cands = Ids({2, 1});
  auto qs = Ids({9});
  EXPECT_EQ(BruteForceBest(t, cands, qs).best, DemoSet::Of({1}));
}

TEST(BruteForceTest, Errors) {
  SubsetTable t;
  auto cands = Ids({1, 2});
  auto overlap = Ids({2});
  EXPECT_EQ(KindOf([&] { BruteForceBest(t, cands, overlap); }), ErrorKind::kOverlap);
  auto qs = Ids({9});
  EXPECT_EQ(KindOf([&] { BruteForceBest(t, {}, qs); }), ErrorKind::kEmptyPool);
}

TEST(OneShotMatrixTest, LookupAndCardinality) {
  OneShotMatrix m(Ids({4, 5}), Ids({9, 10}), {0.37, 0.1, 0.2, 0.3});
  EXPECT_EQ(m.Evaluate(DemoSet::Of({4}), Q(9)).value(), 0.37);
  EXPECT_EQ(m.at(Q(5), Q(10)), 0.3);
  EXPECT_EQ(KindOf([&] { m.Evaluate(DemoSet::Of({4, 5}), Q(9)); }),
            ErrorKind::kCardinalityUnsupported);
  EXPECT_EQ(KindOf([&] { m.Evaluate(DemoSet::Of({6}), Q(9)); }), ErrorKind::kMissingEntry);
}

TEST(OneShotMatrixTest, RoundTripIsExact) {
  TempDir dir;
  std::vector<double> values;
  for (int i = 0; i < 6; ++i) values.push_back(0.1 * i + 1.0 / 3.0);
  OneShotMatrix m(Ids({0, 1}), Ids({2, 3, 4}), values);
  m.Save(dir / "m.csv");
  const auto back = OneShotMatrix::Load(dir / "m.csv");
  for (auto d : m.demo_ids()) {
    for (auto q : m.query_ids()) EXPECT_EQ(back.at(d, q), m.at(d, q));
  }
}

TEST(OneShotMatrixTest, ParseErrors) {
  TempDir dir;
  auto load = [&](const std::string& body) {
    text::WriteFile(dir / "m.csv", body);
    return KindOf([&] { OneShotMatrix::Load(dir / "m.csv"); });
  };
  EXPECT_EQ(load(""), ErrorKind::kParse);
  EXPECT_EQ(load("demo,1\n0,0.5\n"), ErrorKind::kParse);
  EXPECT_EQ(load("demo\\query,1,2\n0,0.5\n"), ErrorKind::kParse);
  EXPECT_EQ(load("demo\\query,1\n0,abc\n"), ErrorKind::kParse);
  EXPECT_EQ(load("demo\\query,1\n0,0.5\n0,0.6\n"), ErrorKind::kParse);
  EXPECT_EQ(load("\xEF\xBB\xBF" "demo\\query,1\n0,0.5\n"), std::nullopt);
  EXPECT_EQ(KindOf([&] { OneShotMatrix::Load(dir / "absent.csv"); }),
            ErrorKind::kMissingFile);
}

TEST(SubsetTableTest, MissingEntryNeverDefaults) {
  SubsetTable t;
  t.Insert(DemoSet::Of({1}), Q(7), 0.3);
  EXPECT_EQ(KindOf([&] { t.Evaluate(DemoSet::Of({1, 3}), Q(7)); }), ErrorKind::kMissingEntry);
}

TEST(SubsetTableTest, RoundTripIsExact) {
  TempDir dir;
  SubsetTable t;
  t.Insert(DemoSet::Of({2}), Q(7), 0.1 + 0.2);
  t.Insert(DemoSet::Of({1, 2}), Q(7), -1.0 / 7.0);
  t.Insert(DemoSet::Of({1}), Q(8), 1e-300);
  t.Save(dir / "t.jsonl");
  const auto back = SubsetTable::Load(dir / "t.jsonl");
  EXPECT_EQ(back.size(), 3u);
  EXPECT_EQ(back.Evaluate(DemoSet::Of({2}), Q(7)).value(), 0.1 + 0.2);
  EXPECT_EQ(back.Evaluate(DemoSet::Of({1, 2}), Q(7)).value(), -1.0 / 7.0);
  EXPECT_EQ(back.Evaluate(DemoSet::Of({1}), Q(8)).value(), 1e-300);
  EXPECT_EQ(back.DemoIds(), Ids({1, 2}));
  EXPECT_EQ(back.QueryIds(), Ids({7, 8}));
  const auto first = text::ReadFile(dir / "t.jsonl");
  back.Save(dir / "t2.jsonl");
  EXPECT_EQ(text::ReadFile(dir / "t2.jsonl"), first);
}

TEST(SubsetTableTest, ParseErrors) {
  TempDir dir;
  auto load = [&](const std::string& body) {
    text::WriteFile(dir / "t.jsonl", body);
    return KindOf([&] { SubsetTable::Load(dir / "t.jsonl"); });
  };
  EXPECT_EQ(load("{\"set\":[2,1],\"query\":7,\"utility\":0.1}\n"), ErrorKind::kParse);
  EXPECT_EQ(load("{\"set\":[],\"query\":7,\"utility\":0.1}\n"), ErrorKind::kParse);
  EXPECT_EQ(load("{\"set\":[1],\"query\":7}\n"), ErrorKind::kParse);
  EXPECT_EQ(load("not json\n"), ErrorKind::kParse);
  EXPECT_EQ(load("{\"set\":[1],\"query\":7,\"utility\":0.1}\n"
                 "{\"set\":[1],\"query\":7,\"utility\":0.2}\n"),
            ErrorKind::kParse);
  EXPECT_EQ(load("{\"set\":[1],\"query\":7,\"utility\":0.1}\n\n"), std::nullopt);
}

TEST(PurityTest, ConcurrentReplayMatches) {
  LandscapeParams p{.n_demos = 8, .n_queries = 8, .seed = 21};
  p.interaction_scale = 0.5;
  p.noise_scale = 0.1;
  SyntheticLandscape land(p);
  auto cands = land.DemoIds();
  const auto sets = EnumerateSubsets(cands, 3);
  std::vector<double> serial;
  for (const auto& s : sets) serial.push_back(land.Evaluate(s, Q(10)).value());
  std::vector<double> parallel(sets.size());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < sets.size(); i += 4) {
        parallel[i] = land.Evaluate(sets[i], Q(10)).value();
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(serial, parallel);
}

}  // namespace
}  // namespace demoselect::oracle
