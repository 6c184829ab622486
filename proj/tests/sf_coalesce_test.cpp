#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "vidplan/sf_coalesce.hpp"
#include "oracles.hpp"

using namespace vidplan;
using namespace vidplan::oracle;

TEST(SfCoalesce, GoldenIsKnobwiseMaxWithCheapestCoding) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(k, reference_operators());
  auto d = demands_for(store, all_consumers(store));
  Coalescer co(store, d, kDisk);
  auto g = co.golden_sf();
  FidelityOption join = d.front().fidelity;
  for (const auto& x : d) join = knobwise_max(join, x.fidelity);
  EXPECT_EQ(g.format.fidelity, join);
  EXPECT_TRUE(g.golden);
  EXPECT_FALSE(g.format.coding.bypass);
  for (const auto& c : k.codings()) {
    EXPECT_LE(g.bitrate, store.coding_entry(join, c)->bitrate);
  }
  EXPECT_EQ(g.format.coding.speed_step, 0);
  EXPECT_EQ(g.format.coding.keyframe, k.keyframe.richest());
}

TEST(SfCoalesce, GoldenOfSingleAndPairOfCfs) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(k, reference_operators());
  std::vector<CfDemand> one{{{1, 2, 1, 2}, {{{"nn", 0.7}, 0.1}}}};
  EXPECT_EQ(Coalescer(store, one, kDisk).golden_sf().format.fidelity, one[0].fidelity);
  std::vector<CfDemand> two{{{1, 3, 1, 2}, {{{"nn", 0.7}, 0.1}}},
                            {{1, 2, 1, 3}, {{{"nn", 0.8}, 0.1}}}};
  const auto g = Coalescer(store, two, kDisk).golden_sf().format.fidelity;
  EXPECT_EQ(g.quality, 3);
  EXPECT_EQ(g.resolution, 3);
}

TEST(SfCoalesce, CoalescePairBasics) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(k, reference_operators());
  std::vector<CfDemand> d{{{2, 3, 2, 3}, {{{"nn", 0.9}, 0.5}}},
                          {{2, 3, 2, 3}, {{{"ocr", 0.9}, 2.0}}}};
  Coalescer co(store, d, kDisk);
  auto init = co.initial_set();
  const auto& a = init.formats[0];
  auto self = co.coalesce(a, a);
  ASSERT_TRUE(self);
  EXPECT_EQ(self->format, a.format);

  auto both = co.coalesce(init.formats[0], init.formats[1]);
  ASSERT_TRUE(both);
  EXPECT_EQ(both->format.fidelity, d[0].fidelity);
  // Cheapest coding serving both consumer sets, by direct scan.
  std::optional<std::pair<double, CodingOption>> best;
  for (const auto& c : k.codings()) {
    if (c.bypass) continue;
    StorageFormat sf{d[0].fidelity, c};
    if (oracle_speed(store, sf, d[0].fidelity) < 0.5) continue;
    if (oracle_speed(store, sf, d[1].fidelity) < 2.0) continue;
    const double b = store.coding_entry(sf.fidelity, c)->bitrate;
    if (!best || b < best->first) best = {b, c};
  }
  ASSERT_TRUE(best);
  EXPECT_EQ(both->format.coding, best->second);
}

TEST(SfCoalesce, FastFilterGetsRawAndSlowDiskIsInfeasible) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(k, reference_operators());
  const FidelityOption f{2, 2, 1, 3};
  double fastest_decode = 0;
  for (const auto& c : k.codings()) {
    if (!c.bypass) fastest_decode = std::max(fastest_decode, store.coding_entry(f, c)->decode_speed);
  }
  std::vector<CfDemand> d{{f, {{{"diff", 0.7}, fastest_decode * 1.5}}}};
  Coalescer co(store, d, kDisk);
  auto set = co.initial_set();
  EXPECT_TRUE(set.formats[0].format.coding.bypass);

  Coalescer slow(store, d, 0.001);
  try {
    slow.initial_set();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Infeasible);
  }
}

TEST(SfCoalesce, ReferenceScenarioShape) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(k, reference_operators());
  auto consumers = all_consumers(store);
  auto d = demands_for(store, consumers);
  EXPECT_LT(d.size(), consumers.size());
  auto res = derive_sfs_heuristic(store, d, kDisk);
  EXPECT_GE(res.set.formats.size(), 3u);
  EXPECT_LE(res.set.formats.size(), 6u);
  std::size_t golden = 0;
  std::size_t raw = 0;
  for (const auto& f : res.set.formats) {
    golden += f.golden;
    raw += f.format.coding.bypass;
  }
  EXPECT_EQ(golden, 1u);
  EXPECT_GE(raw, 1u);
  EXPECT_TRUE(check_requirements(res.set, d, store, kDisk).empty());
  const auto recomputed = storage_and_ingestion_cost(res.set, store);
  EXPECT_NEAR(recomputed.storage_cost, res.costs.storage_cost, 1e-9);
  EXPECT_NEAR(recomputed.ingestion_cost, res.costs.ingestion_cost, 1e-9);
}

TEST(SfCoalesce, FreeMergesNeverIncreaseStorage) {
  const auto k = default_knob_space();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto store = generate_synthetic(k, reference_like_operators(seed));
    auto d = demands_for(store, all_consumers(store));
    Coalescer co(store, d, kDisk);
    const double initial = summarize(co.initial_set()).storage_cost;
    auto res = derive_sfs_heuristic(store, d, kDisk);
    EXPECT_LE(res.costs.storage_cost, initial + 1e-12);
    EXPECT_TRUE(check_requirements(res.set, d, store, kDisk).empty());
  }
}

TEST(SfCoalesce, FreeMergeReducesIngestion) {
  const auto k = default_knob_space();
  std::size_t free_merges = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto store = generate_synthetic(k, reference_like_operators(seed));
    auto d = demands_for(store, all_consumers(store));
    Coalescer co(store, d, kDisk);
    auto set = co.initial_set();
    for (std::size_t i = 0; i < set.formats.size(); ++i) {
      for (std::size_t j = i + 1; j < set.formats.size(); ++j) {
        const auto& a = set.formats[i];
        const auto& b = set.formats[j];
        auto m = co.coalesce(a, b);
        if (!m || m->bitrate > a.bitrate + b.bitrate) continue;
        ++free_merges;
        EXPECT_LT(m->encode_cost, a.encode_cost + b.encode_cost)
            << k.describe(a.format) << " + " << k.describe(b.format);
      }
    }
  }
  EXPECT_GT(free_merges, 0u);
}

TEST(SfCoalesce, HeuristicMatchesPartitionOracle) {
  const auto k = default_knob_space();
  std::size_t cases = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto store = generate_synthetic(k, reference_like_operators(seed));
    auto consumers = all_consumers(store);
    std::mt19937_64 rng(seed * 7 + 1);
    std::shuffle(consumers.begin(), consumers.end(), rng);
    consumers.resize(3 + seed % 4);
    auto d = demands_for(store, consumers);
    ASSERT_LE(d.size(), 6u);
    auto res = derive_sfs_heuristic(store, d, kDisk);
    EXPECT_EQ(res.set.format_set(), partition_oracle(store, d)) << "seed " << seed;
    ++cases;
  }
  EXPECT_GE(cases, 20u);
}

TEST(SfCoalesce, DistanceMergesIdenticalFirst) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(k, reference_operators());
  const FidelityOption f{2, 2, 2, 3};
  std::vector<CfDemand> d{{f, {{{"nn", 0.8}, 0.1}}},
                          {f, {{{"ocr", 0.8}, 0.1}}},
                          {{0, 4, 2, 3}, {{{"nn", 0.7}, 0.1}}},
                          {{4, 0, 0, 0}, {{{"ocr", 0.7}, 0.1}}}};
  auto res = derive_sfs_distance(store, d, kDisk, {}, 4);
  ASSERT_EQ(res.log.size(), 1u);
  ASSERT_EQ(res.set.formats.size(), 4u);
  std::size_t at_f = 0;
  for (const auto& sf : res.set.formats) {
    if (sf.format.fidelity == f) {
      ++at_f;
      EXPECT_EQ(sf.members, (std::vector<std::size_t>{0, 1}));
    }
  }
  EXPECT_EQ(at_f, 1u);
  EXPECT_TRUE(check_requirements(res.set, d, store, kDisk).empty());
}

TEST(SfCoalesce, DistanceCostsMoreStorageAndFewerRuns) {
  const auto k = default_knob_space();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto base = generate_synthetic(k, reference_like_operators(seed));
    auto d = demands_for(base, all_consumers(base));
    auto hs = base.fork();
    auto ds = base.fork();
    auto h = derive_sfs_heuristic(hs, d, kDisk);
    auto dd = derive_sfs_distance(ds, d, kDisk);
    EXPECT_GE(dd.costs.storage_cost, h.costs.storage_cost) << "seed " << seed;
    EXPECT_LT(dd.runs, h.runs) << "seed " << seed;
    EXPECT_TRUE(check_requirements(dd.set, d, ds, kDisk).empty());
  }
}

TEST(SfCoalesce, BudgetPhaseReducesIngestion) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(k, reference_operators());
  auto d = demands_for(store, all_consumers(store));
  auto free_only = derive_sfs_heuristic(store, d, kDisk);
  const double golden_only = Coalescer(store, d, kDisk).golden_sf().encode_cost;
  const double budget = golden_only + 0.5 * (free_only.costs.ingestion_cost - golden_only);
  auto res = derive_sfs_heuristic(store, d, kDisk, {budget});
  EXPECT_LE(res.costs.ingestion_cost, budget);
  EXPECT_GE(res.costs.storage_cost, free_only.costs.storage_cost);
  EXPECT_TRUE(check_requirements(res.set, d, store, kDisk).empty());
  try {
    derive_sfs_heuristic(store, d, kDisk, {golden_only * 0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetInfeasible);
  }
}

TEST(SfCoalesce, CostsOfEmptyAndGoldenOnly) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(k, reference_operators());
  SFSet empty;
  EXPECT_EQ(storage_cost(empty, store), 0.0);
  EXPECT_EQ(ingestion_cost(empty, store), 0.0);
  std::vector<CfDemand> d{{k.richest(), {{{"nn", 1.0}, 0.1}}}};
  SFSet g;
  g.formats.push_back(Coalescer(store, d, kDisk).golden_sf());
  const auto row = *store.coding_entry(g.formats[0].format.fidelity,
                                       g.formats[0].format.coding);
  EXPECT_EQ(storage_cost(g, store), row.bitrate);
  EXPECT_EQ(ingestion_cost(g, store), row.encode_cost);
}

TEST(SfCoalesce, MemoizationBoundsRuns) {
  const auto k = default_knob_space();
  auto store = generate_synthetic(k, reference_operators());
  auto d = demands_for(store, all_consumers(store));
  auto res = derive_sfs_heuristic(store, d, kDisk);
  EXPECT_LE(res.runs, k.format_count());
  // A second derivation on the same store reuses every profiled format.
  auto again = derive_sfs_heuristic(store, d, kDisk);
  EXPECT_EQ(again.runs, 0u);
  EXPECT_EQ(again.set.format_set(), res.set.format_set());
}
