#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "vidplan/planner.hpp"
#include "oracles.hpp"

using namespace vidplan;
using namespace vidplan::oracle;

namespace {

Workload small_workload() {
  Workload w;
  w.fps = 30;
  w.istreams = {{"motion", 0.1, 3.0, 1e5}, {"ocr", 0.25, 6.0, 5e4}};
  w.queries = {{"q", 1.0, {{0, 1.0}, {1, 0.3}}}};
  w.temperatures = {{"hot", 86400, 0.7}, {"cold", 6 * 86400, 0.3}};
  return w;
}

HardwareCatalog small_catalog() {
  HardwareCatalog c;
  c.slots = {{"fast", {{"nvme", 2000, 1000, 300, 400}, {"sata", 500, 400, 500, 150}}},
             {"bulk", {{"hdd", 150, 150, 4000, 100}, {"hdd2", 200, 200, 8000, 180}}}};
  c.codecs = {{"cpu", 120, 90, 50}, {"gpu", 900, 600, 500}};
  return c;
}

}  // namespace

TEST(Planner, EnumerateSetupsCounts) {
  HardwareCatalog one;
  one.slots = {{"only", {{"ssd", 1, 1, 1, 10}}}};
  one.codecs = {{"c", 1, 1, 5}};
  one.budget = 100;
  ASSERT_EQ(enumerate_setups(one).size(), 1u);
  EXPECT_EQ(enumerate_setups(one)[0].cost, 15.0);

  HardwareCatalog three;
  three.slots = {{"s", {{"a", 1, 1, 1, 10}, {"b", 1, 1, 1, 20}, {"c", 1, 1, 1, 30}}}};
  three.codecs = {{"x", 1, 1, 1}, {"y", 1, 1, 2}};
  EXPECT_EQ(enumerate_setups(three).size(), 6u);

  auto c = small_catalog();
  std::size_t expected = 0;
  c.budget = 800;
  for (const auto& f : c.slots[0].options) {
    for (const auto& b : c.slots[1].options) {
      for (const auto& k : c.codecs) expected += f.cost + b.cost + k.cost <= 800;
    }
  }
  EXPECT_EQ(enumerate_setups(c).size(), expected);
  EXPECT_LT(expected, 8u);
  c.budget = 1;
  try {
    enumerate_setups(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyFeasibleSet);
  }
}

TEST(Planner, ParetoSmallCases) {
  auto f = pareto_frontier({{0, 3.0, 7.0}});
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].index, 0u);
  f = pareto_frontier({{0, 1.0, 5.0}, {1, 2.0, 4.0}, {2, 3.0, 9.0}, {3, 3.0, 9.0}});
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].index, 0u);
  EXPECT_EQ(f[1].index, 2u);
}

TEST(Planner, ParetoMatchesDominanceOracle) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int set = 0; set < 50; ++set) {
    std::vector<ParetoPoint> pts;
    for (std::size_t k = 0; k < 200; ++k) {
      // Coarse values on some sets to exercise ties.
      double c = u(rng) * 1000;
      double v = u(rng) * 100;
      if (set % 5 == 0) {
        c = std::floor(c / 100);
        v = std::floor(v / 10);
      }
      pts.push_back({k, c, v});
    }
    auto frontier = pareto_frontier(pts);
    std::vector<std::size_t> got;
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      got.push_back(frontier[k].index);
      if (k > 0) {
        EXPECT_GT(frontier[k].cost, frontier[k - 1].cost);
        EXPECT_GT(frontier[k].utility, frontier[k - 1].utility);
      }
    }
    auto want = dominance_oracle(pts);
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, want) << "set " << set;
  }
}

TEST(Planner, HardwarePlanFrontier) {
  auto plan = plan_hardware(small_catalog(), small_workload());
  EXPECT_EQ(plan.setups.size(), 8u);
  std::vector<ParetoPoint> pts;
  for (std::size_t k = 0; k < plan.setups.size(); ++k) {
    if (plan.setups[k].feasible) pts.push_back({k, plan.setups[k].setup.cost, plan.setups[k].utility});
  }
  std::vector<std::size_t> got;
  for (const auto& p : plan.frontier) got.push_back(p.index);
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, dominance_oracle(pts));
  EXPECT_GE(plan.frontier.size(), 2u);
}

TEST(Planner, WhatIfDirections) {
  const auto c = small_catalog();
  const auto w = small_workload();
  auto same = whatif_report(c, w, {1.0, 1.0});
  ASSERT_EQ(same.original.frontier.size(), same.scaled.frontier.size());
  for (std::size_t k = 0; k < same.original.frontier.size(); ++k) {
    EXPECT_EQ(same.original.frontier[k].index, same.scaled.frontier[k].index);
    EXPECT_EQ(same.original.frontier[k].utility, same.scaled.frontier[k].utility);
  }
  auto cheap = whatif_report(c, w, {0.5, 1.0});
  EXPECT_TRUE(cheap.weakly_dominates);
  for (const auto& p : cheap.original.frontier) {
    EXPECT_GE(utility_at(cheap.scaled.frontier, p.cost), p.utility);
  }
  auto fast = whatif_report(c, w, {1.0, 2.0});
  EXPECT_TRUE(fast.weakly_dominates);
  EXPECT_THROW(whatif_report(c, w, {0.0, 1.0}), Error);
}

TEST(Planner, DiffOfIdenticalPoliciesIsEmpty) {
  auto w = small_workload();
  auto hw = enumerate_setups(small_catalog())[0].spec;
  auto p = solve(w, hw).policy;
  EXPECT_TRUE(diff_policies(p, p, w, hw).empty());
}

TEST(Planner, DiffWorkedExample) {
  Workload w;
  w.istreams = {{"a", 0.2, 4.0, 100}};
  w.queries = {{"q", 1.0, {{0, 1.0}}}};
  w.temperatures = {{"warm", 1000, 1.0}};
  HardwareSpec hw{{{"t1", 100, 100, 1000, 0}, {"t2", 200, 50, 1000, 0}, {"t3", 50, 50, 1000, 0}},
                  {"c", 300, 300, 0}};
  PlacementPolicy old_p(1, 1, 3);
  PlacementPolicy new_p(1, 1, 3);
  const double a[3] = {0.2, 0.2, 0.6};
  const double b[3] = {0.1, 0.3, 0.6};
  for (std::size_t s = 0; s < 3; ++s) {
    old_p.set(0, 0, s, a[s], true);
    new_p.set(0, 0, s, b[s], true);
  }
  auto tasks = diff_policies(old_p, new_p, w, hw);
  ASSERT_EQ(tasks.size(), 1u);
  EXPECT_EQ(tasks[0].src, 0u);
  EXPECT_EQ(tasks[0].dst, 1u);
  EXPECT_NEAR(tasks[0].fraction, 0.1, 1e-12);
  EXPECT_FALSE(tasks[0].transcode);
  // 100 video-seconds limited by t2's write: 50 MB/s / 0.2 MB per video-second.
  EXPECT_NEAR(tasks[0].duration, 100.0 / 250.0, 1e-12);
  EXPECT_NEAR(tasks[0].volume_gb, 100 * 0.2 / 1000.0, 1e-15);
  EXPECT_NEAR(tasks[0].reward, t_all(new_p, w, hw) - t_all(old_p, w, hw), 1e-12);
}

TEST(Planner, TaskDurationBottlenecks) {
  Workload w;
  w.istreams = {{"a", 0.5, 5.0, 100}};
  w.queries = {{"q", 1.0, {{0, 1.0}}}};
  w.temperatures = {{"hot", 3600, 1.0}};
  HardwareSpec hw{{{"x", 1000, 1000, 1e6, 0}, {"y", 1000, 1000, 1e6, 0}}, {"c", 60, 45, 0}};
  PlacementPolicy old_p(1, 1, 2);
  PlacementPolicy new_p(1, 1, 2);
  old_p.set(0, 0, 0, 1.0, true);
  new_p.set(0, 0, 1, 1.0, false);
  auto tasks = diff_policies(old_p, new_p, w, hw);
  ASSERT_EQ(tasks.size(), 1u);
  EXPECT_TRUE(tasks[0].transcode);
  // Decoding to raw at 60 fps = 2 video-seconds per second, far below disks.
  EXPECT_NEAR(tasks[0].duration, 3600.0 / 2.0, 1e-9);
}

TEST(Planner, ApplyingTasksInAnyOrderReachesNewPolicy) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto w = small_workload();
  w.temperatures = {{"hot", 86400, 0.5}, {"warm", 86400, 0.3}, {"cold", 86400, 0.2}};
  HardwareSpec hw{{{"a", 900, 500, 1e5, 0}, {"b", 300, 200, 1e5, 0}, {"c", 100, 100, 1e5, 0}},
                  {"k", 500, 500, 0}};
  auto random_p = [&] {
    PlacementPolicy p(2, 3, 3);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t t = 0; t < 3; ++t) {
        double x[3] = {u(rng) < 0.3 ? 0.0 : u(rng), u(rng), u(rng)};
        const double sum = x[0] + x[1] + x[2];
        for (std::size_t s = 0; s < 3; ++s) p.set(i, t, s, x[s] / sum, u(rng) < 0.5);
      }
    }
    return p;
  };
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_p();
    auto b = random_p();
    auto tasks = diff_policies(a, b, w, hw);
    // Conservation per (istream, temperature, tier, coding).
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t t = 0; t < 3; ++t) {
        double moved = 0.0;
        double positive = 0.0;
        for (std::size_t s = 0; s < 3; ++s) {
          for (bool e : {true, false}) {
            double out = 0.0;
            double in = 0.0;
            for (const auto& x : tasks) {
              if (x.istream != i || x.temperature != t) continue;
              if (x.src == s && x.src_encoded == e) out += x.fraction;
              if (x.dst == s && x.dst_encoded == e) in += x.fraction;
            }
            EXPECT_NEAR(out - in, a.part(i, t, s, e) - b.part(i, t, s, e), 1e-12);
            positive += std::max(0.0, a.part(i, t, s, e) - b.part(i, t, s, e));
          }
        }
        for (const auto& x : tasks) {
          if (x.istream == i && x.temperature == t) moved += x.fraction;
        }
        EXPECT_NEAR(moved, positive, 1e-12);
      }
    }
    std::shuffle(tasks.begin(), tasks.end(), rng);
    auto p = a;
    for (const auto& x : tasks) apply_task(p, x);
    for (std::size_t k = 0; k < p.raw_parts().size(); ++k) {
      EXPECT_NEAR(p.raw_parts()[k], b.raw_parts()[k], 1e-12);
    }
    for (const auto& x : tasks) EXPECT_GT(x.duration, 0.0);
  }
}

TEST(Planner, GreedyTwoTaskHandIntegration) {
  // Scores 3 and 1 with unit durations: greedy runs the first one first.
  std::vector<MigrationTask> tasks{task(1.0, 1.0), task(1.0, 3.0)};
  auto s = schedule_greedy(tasks);
  ASSERT_EQ(s.order.size(), 2u);
  EXPECT_EQ(s.order[0].task, 1u);
  // Utility 0 on [0,1), 3 on [1,2): area 3; the reverse order gives 1.
  EXPECT_DOUBLE_EQ(integrated_utility(s, 2.0), 3.0);
  MigrationSchedule reverse;
  reverse.trajectory = {{0.0, 0.0}, {1.0, 1.0}, {2.0, 4.0}};
  EXPECT_DOUBLE_EQ(integrated_utility(reverse, 2.0), 1.0);
  EXPECT_GE(integrated_utility(s, 2.0), integrated_utility(reverse, 2.0));

  auto single = schedule_greedy({task(2.0, 5.0)});
  ASSERT_EQ(single.order.size(), 1u);
  EXPECT_EQ(single.order[0].task, 0u);
  EXPECT_EQ(single.makespan, 2.0);
}

TEST(Planner, GreedyMatchesBestSerialPermutation) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < 50; ++c) {
    std::vector<MigrationTask> tasks;
    const std::size_t n = 2 + c % 6;
    for (std::size_t k = 0; k < n; ++k) tasks.push_back(task(0.1 + 10 * u(rng), 5 * u(rng)));
    auto s = schedule_greedy(tasks, 1.0);
    const double h = horizon_of(tasks);
    EXPECT_NEAR(integrated_utility(s, h), h * 1.0 + best_serial(tasks), 1e-9 * h * 10);
    for (std::size_t k = 1; k < s.trajectory.size(); ++k) {
      EXPECT_GE(s.trajectory[k].second, s.trajectory[k - 1].second);
    }
  }
}

TEST(Planner, NegativeTasksGoLast) {
  std::vector<MigrationTask> tasks{task(1.0, -5.0), task(2.0, 1.0), task(1.0, -0.5), task(1.0, 0.0)};
  auto s = schedule_greedy(tasks);
  std::vector<std::size_t> order;
  for (const auto& x : s.order) order.push_back(x.task);
  EXPECT_EQ(order, (std::vector<std::size_t>{1, 3, 2, 0}));
  EXPECT_EQ(monotonicity_violations(tasks), (std::vector<std::size_t>{0, 2}));
}

TEST(Planner, OracleOnDisjointAndSharedTiers) {
  EXPECT_EQ(schedule_knapsack_oracle({}, 3).value, 0.0);
  std::vector<MigrationTask> nine(9, task(1, 1));
  EXPECT_THROW(schedule_knapsack_oracle(nine, 3), Error);
  EXPECT_THROW(schedule_knapsack_oracle({task(1, 1)}, 6), Error);

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Disjoint tier pairs can run side by side.
  for (int c = 0; c < 10; ++c) {
    std::vector<MigrationTask> tasks{task(1 + u(rng), u(rng), 0, 1), task(1 + u(rng), u(rng), 2, 3),
                                     task(1 + u(rng), u(rng), 0, 1), task(1 + u(rng), u(rng), 2, 3)};
    const double h = horizon_of(tasks);
    const double greedy = integrated_utility(schedule_greedy(tasks), h);
    EXPECT_GE(schedule_knapsack_oracle(tasks, 4).value, greedy - 1e-9);
  }
  // With three tiers any two tasks share one, so nothing overlaps.
  for (int c = 0; c < 20; ++c) {
    std::vector<MigrationTask> tasks;
    const std::size_t n = 3 + c % 5;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t src = k % 3;
      const std::size_t dst = (src + 1 + (u(rng) < 0.5)) % 3;
      tasks.push_back(task(0.5 + 5 * u(rng), 3 * u(rng), src, dst));
    }
    const double h = horizon_of(tasks);
    const double greedy = integrated_utility(schedule_greedy(tasks), h);
    const auto oracle = schedule_knapsack_oracle(tasks, 3);
    EXPECT_NEAR(oracle.value, greedy, 1e-9 * std::max(1.0, greedy));
  }
}

TEST(Planner, BufferCoversSwapOnFullTiers) {
  Workload w;
  w.istreams = {{"a", 1.0, 1.0, 100}, {"b", 1.0, 1.0, 100}};
  w.queries = {{"q", 1.0, {{0, 1.0}, {1, 1.0}}}};
  w.temperatures = {{"hot", 1000, 1.0}};
  HardwareSpec hw{{{"x", 100, 100, 1.0, 0}, {"y", 100, 100, 1.0, 0}}, {"c", 300, 300, 0}};
  PlacementPolicy old_p(2, 1, 2);
  PlacementPolicy new_p(2, 1, 2);
  old_p.set(0, 0, 0, 1.0, true);
  old_p.set(1, 0, 1, 1.0, true);
  new_p.set(0, 0, 1, 1.0, true);
  new_p.set(1, 0, 0, 1.0, true);
  auto plan = plan_migration(old_p, new_p, w, hw);
  EXPECT_EQ(plan.tasks.size(), 2u);
  EXPECT_NEAR(plan.buffer_gb, 1.0, 1e-12);
}
