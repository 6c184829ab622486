#pragma once

// Hardware purchase planning over a Pareto frontier of enumerated setups, and
// migration planning between placement policies: task extraction, ratio-rule
// serial scheduling and an exhaustive parallel oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "vidplan/error.hpp"
#include "vidplan/perfmodel.hpp"

namespace vidplan {

struct TierSlot {
  std::string name;
  std::vector<Tier> options;
};

struct HardwareCatalog {
  std::vector<TierSlot> slots;
  std::vector<Codec> codecs;
  double budget = std::numeric_limits<double>::infinity();
};

struct Setup {
  HardwareSpec spec;
  double cost = 0.0;
  std::vector<std::size_t> choice;  // option per slot
  std::size_t codec = 0;

  std::string label() const {
    std::string s;
    for (const auto& t : spec.tiers) s += (s.empty() ? "" : "+") + t.name;
    return s + "+" + spec.codec.name;
  }
};

/// Every combination of one option per slot and one codec within budget, in
/// mixed-radix order (first slot slowest, codec fastest).
inline std::vector<Setup> enumerate_setups(const HardwareCatalog& catalog) {
  if (catalog.slots.empty() || catalog.codecs.empty()) {
    throw Error(ErrorCode::EmptyFeasibleSet, "catalog has no tier slots or no codecs");
  }
  for (const auto& s : catalog.slots) {
    if (s.options.empty()) throw Error(ErrorCode::EmptyFeasibleSet, "tier slot " + s.name + " has no options");
  }
  std::vector<Setup> out;
  std::vector<std::size_t> idx(catalog.slots.size(), 0);
  while (true) {
    for (std::size_t c = 0; c < catalog.codecs.size(); ++c) {
      Setup st;
      st.choice = idx;
      st.codec = c;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        Tier t = catalog.slots[k].options[idx[k]];
        st.spec.tiers.push_back(t);
      }
      st.spec.codec = catalog.codecs[c];
      st.cost = st.spec.cost();
      if (st.cost <= catalog.budget) out.push_back(std::move(st));
    }
    bool more = false;
    for (std::size_t k = idx.size(); k-- > 0;) {
      if (++idx[k] < catalog.slots[k].options.size()) {
        more = true;
        break;
      }
      idx[k] = 0;
    }
    if (!more) break;
  }
  if (out.empty()) {
    throw Error(ErrorCode::EmptyFeasibleSet, "no setup fits the budget of " + text::fixed(catalog.budget, 2));
  }
  return out;
}

struct ParetoPoint {
  std::size_t index = 0;  // caller's identifier
  double cost = 0.0;
  double utility = 0.0;
};

/// Points not beaten on both cost and utility, by cost ascending with
/// strictly increasing utility. Exact duplicates keep the lowest index.
inline std::vector<ParetoPoint> pareto_frontier(std::vector<ParetoPoint> points) {
  std::sort(points.begin(), points.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.utility != b.utility) return a.utility > b.utility;
    return a.index < b.index;
  });
  std::vector<ParetoPoint> out;
  for (const auto& p : points) {
    if (out.empty() || p.utility > out.back().utility) out.push_back(p);
  }
  return out;
}

/// Best utility reachable at or below `cost` along a frontier.
inline double utility_at(const std::vector<ParetoPoint>& frontier, double cost) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : frontier) {
    if (p.cost <= cost) best = std::max(best, p.utility);
  }
  return best;
}

struct EvaluatedSetup {
  Setup setup;
  bool feasible = false;
  double utility = 0.0;
  PlacementPolicy policy;
};

struct HardwarePlan {
  std::vector<EvaluatedSetup> setups;
  std::vector<ParetoPoint> frontier;  // index into setups
};

inline SolveOptions planning_solve_options() {
  SolveOptions o;
  o.refine = false;
  return o;
}

/// Solves the placement model per setup; infeasible setups stay off the
/// frontier.
inline HardwarePlan plan_hardware(const HardwareCatalog& catalog, const Workload& w,
                                  const SolveOptions& opt = planning_solve_options()) {
  HardwarePlan plan;
  std::vector<ParetoPoint> pts;
  for (auto& s : enumerate_setups(catalog)) {
    EvaluatedSetup e;
    e.setup = std::move(s);
    try {
      auto r = solve(w, e.setup.spec, opt);
      e.feasible = true;
      e.utility = r.utility;
      e.policy = std::move(r.policy);
      pts.push_back({plan.setups.size(), e.setup.cost, e.utility});
    } catch (const Error& err) {
      if (err.code() != ErrorCode::Infeasible) throw;
    }
    plan.setups.push_back(std::move(e));
  }
  plan.frontier = pareto_frontier(std::move(pts));
  return plan;
}

struct WhatIfScale {
  double decoder_cost_factor = 1.0;
  double tier_speed_factor = 1.0;
};

struct WhatIfReport {
  HardwarePlan original;
  HardwarePlan scaled;
  bool weakly_dominates = true;  // scaled utility >= original at every cost
};

inline HardwareCatalog scale_catalog(HardwareCatalog c, const WhatIfScale& f) {
  if (!(f.decoder_cost_factor > 0 && f.tier_speed_factor > 0)) {
    throw Error(ErrorCode::DomainError, "what-if factors must be positive");
  }
  for (auto& codec : c.codecs) codec.cost *= f.decoder_cost_factor;
  for (auto& slot : c.slots) {
    for (auto& t : slot.options) {
      t.read_bw *= f.tier_speed_factor;
      t.write_bw *= f.tier_speed_factor;
    }
  }
  return c;
}

inline WhatIfReport whatif_report(const HardwareCatalog& catalog, const Workload& w,
                                  const WhatIfScale& scale,
                                  const SolveOptions& opt = planning_solve_options()) {
  WhatIfReport r;
  r.original = plan_hardware(catalog, w, opt);
  r.scaled = plan_hardware(scale_catalog(catalog, scale), w, opt);
  for (const auto* f : {&r.original.frontier, &r.scaled.frontier}) {
    for (const auto& p : *f) {
      if (utility_at(r.scaled.frontier, p.cost) < utility_at(r.original.frontier, p.cost)) {
        r.weakly_dominates = false;
      }
    }
  }
  return r;
}

struct MigrationTask {
  std::size_t istream = 0;
  std::size_t temperature = 0;
  std::size_t src = 0;
  bool src_encoded = true;
  std::size_t dst = 0;
  bool dst_encoded = true;
  double fraction = 0.0;
  double volume_gb = 0.0;
  bool transcode = false;
  double duration = 0.0;  // seconds
  double reward = 0.0;    // utility change when applied in extraction order
};

namespace detail {

inline double migration_rate(const MigrationTask& x, const Workload& w, const HardwareSpec& hw) {
  const auto& is = w.istreams[x.istream];
  const double b_src = detail::stored_bitrate(is, x.src_encoded);
  const double b_dst = detail::stored_bitrate(is, x.dst_encoded);
  // Video-seconds per second through each device on the path.
  double rate = std::min(per_second(hw.tiers[x.src].read_bw, b_src),
                         per_second(hw.tiers[x.dst].write_bw, b_dst));
  if (x.transcode) {
    const double codec = x.dst_encoded ? hw.codec.transcode_bw : hw.codec.decode_bw;
    rate = std::min(rate, codec / w.fps);
  }
  return rate;
}

}  // namespace detail

inline void apply_task(PlacementPolicy& p, const MigrationTask& x) {
  auto& from = p.part(x.istream, x.temperature, x.src, x.src_encoded);
  from -= x.fraction;
  if (std::abs(from) < 1e-12) from = 0.0;
  p.part(x.istream, x.temperature, x.dst, x.dst_encoded) += x.fraction;
}

/// Moves turning `old_p` into `new_p`, per (istream, temperature), from the
/// largest surplus (tier, coding) to the largest deficit. Rewards are the
/// utility change of each task applied to the policy left by its
/// predecessors.
inline std::vector<MigrationTask> diff_policies(const PlacementPolicy& old_p, const PlacementPolicy& new_p,
                                                const Workload& w, const HardwareSpec& hw) {
  const std::size_t S = hw.tiers.size();
  std::vector<MigrationTask> tasks;
  PlacementPolicy interim = old_p;
  double before = t_all(interim, w, hw);
  for (std::size_t i = 0; i < w.istreams.size(); ++i) {
    for (std::size_t t = 0; t < w.temperatures.size(); ++t) {
      // Node k = tier k/2, encoded when k is even.
      std::vector<double> delta(2 * S);
      for (std::size_t k = 0; k < 2 * S; ++k) {
        const bool e = k % 2 == 0;
        delta[k] = old_p.part(i, t, k / 2, e) - new_p.part(i, t, k / 2, e);
      }
      while (true) {
        std::size_t src = 0;
        std::size_t dst = 0;
        for (std::size_t k = 1; k < 2 * S; ++k) {
          if (delta[k] > delta[src]) src = k;
          if (delta[k] < delta[dst]) dst = k;
        }
        if (delta[src] <= 1e-12 || delta[dst] >= -1e-12) break;
        const double m = std::min(delta[src], -delta[dst]);
        delta[src] -= m;
        delta[dst] += m;
        MigrationTask x;
        x.istream = i;
        x.temperature = t;
        x.src = src / 2;
        x.src_encoded = src % 2 == 0;
        x.dst = dst / 2;
        x.dst_encoded = dst % 2 == 0;
        x.fraction = m;
        x.transcode = x.src_encoded != x.dst_encoded;
        x.volume_gb = m * w.temperatures[t].span * detail::stored_bitrate(w.istreams[i], x.src_encoded) / 1000.0;
        x.duration = m * w.temperatures[t].span / detail::migration_rate(x, w, hw);
        apply_task(interim, x);
        const double after = t_all(interim, w, hw);
        x.reward = after - before;
        before = after;
        tasks.push_back(x);
      }
    }
  }
  return tasks;
}

struct ScheduledTask {
  std::size_t task = 0;
  double start = 0.0;
  double end = 0.0;
};

struct MigrationSchedule {
  std::vector<ScheduledTask> order;
  std::vector<std::pair<double, double>> trajectory;  // (time, utility)
  double makespan = 0.0;
};

/// Tasks run back to back in the given order.
inline MigrationSchedule schedule_in_order(const std::vector<MigrationTask>& tasks,
                                           const std::vector<std::size_t>& order, double start_utility = 0.0) {
  MigrationSchedule s;
  double now = 0.0;
  double u = start_utility;
  s.trajectory.push_back({0.0, u});
  for (auto k : order) {
    s.order.push_back({k, now, now + tasks.at(k).duration});
    now += tasks[k].duration;
    u += tasks[k].reward;
    s.trajectory.push_back({now, u});
  }
  s.makespan = now;
  return s;
}

/// Non-negative tasks by reward per second, highest first, run back to back;
/// negative tasks follow in the same order.
inline MigrationSchedule schedule_greedy(const std::vector<MigrationTask>& tasks,
                                         double start_utility = 0.0) {
  std::vector<std::size_t> idx(tasks.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto score = [&](std::size_t k) { return tasks[k].reward / tasks[k].duration; };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const bool na = tasks[a].reward < 0;
    const bool nb = tasks[b].reward < 0;
    if (na != nb) return nb;
    return score(a) > score(b);
  });
  return schedule_in_order(tasks, idx, start_utility);
}

/// Area under the step trajectory over [0, horizon].
inline double integrated_utility(const MigrationSchedule& s, double horizon) {
  double area = 0.0;
  for (std::size_t k = 0; k < s.trajectory.size(); ++k) {
    const double from = s.trajectory[k].first;
    const double to = k + 1 < s.trajectory.size() ? s.trajectory[k + 1].first : horizon;
    if (from >= horizon) break;
    area += s.trajectory[k].second * (std::min(to, horizon) - from);
  }
  return area;
}

/// Tasks with negative reward, which break the assumption that utility grows
/// as migration proceeds.
inline std::vector<std::size_t> monotonicity_violations(const std::vector<MigrationTask>& tasks) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (tasks[k].reward < 0) out.push_back(k);
  }
  return out;
}

/// Extra capacity (GB) a tier needs while tasks run in `schedule` order: a
/// task holds its data on both tiers until it finishes.
inline double migration_buffer_gb(const PlacementPolicy& old_p, const std::vector<MigrationTask>& tasks,
                                  const MigrationSchedule& schedule, const Workload& w,
                                  const HardwareSpec& hw) {
  const std::size_t S = hw.tiers.size();
  std::vector<double> used(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t i = 0; i < w.istreams.size(); ++i) {
      for (std::size_t t = 0; t < w.temperatures.size(); ++t) {
        for (bool e : {true, false}) {
          used[s] += w.temperatures[t].span * old_p.part(i, t, s, e) * detail::stored_bitrate(w.istreams[i], e) / 1000.0;
        }
      }
    }
  }
  double worst = 0.0;
  auto note = [&] {
    for (std::size_t s = 0; s < S; ++s) worst = std::max(worst, used[s] - hw.tiers[s].capacity);
  };
  note();
  for (const auto& st : schedule.order) {
    const auto& x = tasks[st.task];
    const double span = w.temperatures[x.temperature].span * x.fraction / 1000.0;
    used[x.dst] += span * detail::stored_bitrate(w.istreams[x.istream], x.dst_encoded);
    note();
    used[x.src] -= span * detail::stored_bitrate(w.istreams[x.istream], x.src_encoded);
  }
  return std::max(0.0, worst);
}

struct MigrationPlan {
  std::vector<MigrationTask> tasks;
  MigrationSchedule schedule;
  double buffer_gb = 0.0;
  std::vector<std::size_t> negative_tasks;
  double old_utility = 0.0;
  double new_utility = 0.0;
};

inline MigrationPlan plan_migration(const PlacementPolicy& old_p, const PlacementPolicy& new_p,
                                    const Workload& w, const HardwareSpec& hw) {
  MigrationPlan m;
  m.old_utility = t_all(old_p, w, hw);
  m.new_utility = t_all(new_p, w, hw);
  m.tasks = diff_policies(old_p, new_p, w, hw);
  m.schedule = schedule_greedy(m.tasks, m.old_utility);
  m.buffer_gb = migration_buffer_gb(old_p, m.tasks, m.schedule, w, hw);
  m.negative_tasks = monotonicity_violations(m.tasks);
  return m;
}

struct OracleSchedule {
  std::vector<ScheduledTask> placement;
  double value = 0.0;  // integrated utility over the serial makespan
};

/// Exhaustive temporal-knapsack optimum: every priority order of the tasks,
/// each started as soon as its tiers (and the codec when transcoding) are
/// free, with no two tasks sharing a device at once.
inline OracleSchedule schedule_knapsack_oracle(const std::vector<MigrationTask>& tasks,
                                               std::size_t n_tiers, double start_utility = 0.0) {
  if (tasks.size() > 8 || n_tiers > 5) {
    throw Error(ErrorCode::TooLarge, "oracle handles at most 8 tasks on 5 tiers");
  }
  OracleSchedule best;
  if (tasks.empty()) return best;
  double horizon = 0.0;
  for (const auto& x : tasks) horizon += x.duration;
  std::vector<std::size_t> perm(tasks.size());
  std::iota(perm.begin(), perm.end(), 0);
  bool first = true;
  do {
    std::vector<double> free_at(n_tiers + 1, 0.0);  // last slot is the codec
    std::vector<ScheduledTask> placed;
    double value = start_utility * horizon;
    for (auto k : perm) {
      const auto& x = tasks[k];
      double start = std::max(free_at[x.src], free_at[x.dst]);
      if (x.transcode) start = std::max(start, free_at[n_tiers]);
      const double end = start + x.duration;
      free_at[x.src] = end;
      free_at[x.dst] = end;
      if (x.transcode) free_at[n_tiers] = end;
      placed.push_back({k, start, end});
      value += x.reward * (horizon - end);
    }
    if (first || value > best.value) {
      best.value = value;
      best.placement = std::move(placed);
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace vidplan
