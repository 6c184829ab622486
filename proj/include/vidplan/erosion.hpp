#pragma once

// Age-based erosion: storage formats lose a growing fraction of their old
// segments and consumers fall back to richer ancestors, with the overall
// (max-min fair) speed following (1 - P_min) * age^-k + P_min.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vidplan/error.hpp"
#include "vidplan/sf_coalesce.hpp"

namespace vidplan {

/// Speed of a consumer, relative to its un-eroded speed, when a fraction `p`
/// of its format's segments is served from a parent at relative speed alpha.
inline double relative_speed(double alpha, double p) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::DomainError, "alpha must lie in (0, 1], got " + text::fixed(alpha));
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::DomainError, "deleted fraction must lie in [0, 1], got " + text::fixed(p));
  }
  return alpha / ((1.0 - p) * alpha + p);
}

struct FallbackConsumer {
  Consumer consumer;
  std::size_t cf = 0;    // index into the demand list
  std::size_t node = 0;  // storage format it subscribes to
  double demand = 0.0;   // consumption speed
  std::vector<std::size_t> chain;  // node, parent, ..., golden
  std::vector<double> speeds;      // min(demand, retrieval) along the chain
  double alpha = 1.0;              // parent speed / own speed
};

struct FallbackTree {
  std::vector<StoredFormat> nodes;
  std::vector<std::optional<std::size_t>> parent;
  std::size_t root = 0;
  std::vector<FallbackConsumer> consumers;

  std::size_t size() const { return nodes.size(); }
};

namespace detail {

inline FidelityOption member_join(const StoredFormat& sf, const std::vector<CfDemand>& demands) {
  if (sf.golden || sf.members.empty()) return sf.format.fidelity;
  FidelityOption j = demands[sf.members.front()].fidelity;
  for (auto m : sf.members) j = knobwise_max(j, demands[m].fidelity);
  return j;
}

}  // namespace detail

/// Each non-golden format falls back to the cheapest-storage format that can
/// serve all of its consumption formats and covers strictly more (the golden
/// format always qualifies).
inline FallbackTree build_fallback_tree(const SFSet& set, const std::vector<CfDemand>& demands,
                                        const ProfileStore& store, double disk_read_bw) {
  FallbackTree t;
  t.nodes = set.formats;
  t.root = set.golden_index();
  t.parent.assign(t.nodes.size(), std::nullopt);
  std::vector<FidelityOption> joins;
  for (const auto& n : t.nodes) joins.push_back(detail::member_join(n, demands));

  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    if (i == t.root) continue;
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < t.nodes.size(); ++j) {
      if (j == i) continue;
      bool ok = j == t.root || compare_fidelity(joins[j], joins[i]) == Ordering::Richer;
      for (auto m : t.nodes[i].members) {
        ok = ok && can_degrade(t.nodes[j].format.fidelity, demands[m].fidelity);
      }
      if (!ok) continue;
      if (!best || t.nodes[j].bitrate < t.nodes[*best].bitrate) best = j;
    }
    t.parent[i] = best ? *best : t.root;
  }

  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    for (auto m : t.nodes[i].members) {
      for (const auto& c : demands[m].consumers) {
        FallbackConsumer fc;
        fc.consumer = c.consumer;
        fc.cf = m;
        fc.node = i;
        fc.demand = c.consumption_speed;
        std::optional<std::size_t> n = i;
        while (n) {
          fc.chain.push_back(*n);
          const double v =
              retrieval_speed(store, t.nodes[*n].format, demands[m].fidelity, disk_read_bw);
          fc.speeds.push_back(std::min(c.consumption_speed, v));
          n = t.parent[*n];
        }
        if (fc.speeds.size() > 1) {
          fc.alpha = std::clamp(fc.speeds[1] / fc.speeds[0], 1e-12, 1.0);
        }
        t.consumers.push_back(std::move(fc));
      }
    }
  }
  return t;
}

/// Relative speed of one consumer: a segment resolves at the first ancestor
/// that still holds it, and the per-segment times add up.
inline double consumer_speed(const FallbackConsumer& c, const std::vector<double>& p) {
  double reach = 1.0;
  double time = 0.0;
  for (std::size_t l = 0; l < c.chain.size(); ++l) {
    const double deleted = l + 1 < c.chain.size() ? p[c.chain[l]] : 0.0;
    time += reach * (1.0 - deleted) / c.speeds[l];
    reach *= deleted;
  }
  return (1.0 / time) / c.speeds[0];
}

inline double overall_speed(const FallbackTree& t, const std::vector<double>& p) {
  double s = 1.0;
  for (const auto& c : t.consumers) s = std::min(s, consumer_speed(c, p));
  return s;
}

/// Overall speed with every non-golden format fully eroded.
inline double min_overall_speed(const FallbackTree& t) {
  std::vector<double> p(t.size(), 1.0);
  p[t.root] = 0.0;
  return overall_speed(t, p);
}

inline constexpr int kErosionSteps = 100;

/// The fair-scheduler deletion order, one 1% step per state, starting from
/// no deletion and ending with every non-golden format gone.
struct ErosionPath {
  std::vector<std::vector<double>> states;
  std::vector<double> speeds;

  /// First state whose overall speed is at or below `target`; a target at
  /// the floor erodes everything.
  std::size_t index_for(double target) const {
    const double floor = speeds.back();
    if (floor < 1.0 && target <= floor + 1e-9) return speeds.size() - 1;
    for (std::size_t i = 0; i < speeds.size(); ++i) {
      if (speeds[i] <= target) return i;
    }
    return speeds.size() - 1;
  }
};

inline ErosionPath erosion_path(const FallbackTree& t) {
  ErosionPath path;
  std::vector<int> steps(t.size(), 0);
  auto as_fraction = [&] {
    std::vector<double> p(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) p[i] = steps[i] / double(kErosionSteps);
    return p;
  };
  std::vector<double> p = as_fraction();
  path.states.push_back(p);
  path.speeds.push_back(overall_speed(t, p));

  while (true) {
    std::optional<std::size_t> q;
    double q_speed = 0.0;
    for (std::size_t c = 0; c < t.consumers.size(); ++c) {
      const double s = consumer_speed(t.consumers[c], p);
      if (!q || s < q_speed) {
        q = c;
        q_speed = s;
      }
    }
    std::optional<std::size_t> pick;
    double pick_drop = 0.0;
    double pick_left = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i == t.root || steps[i] >= kErosionSteps) continue;
      double drop = 0.0;
      if (q) {
        auto trial = p;
        trial[i] = (steps[i] + 1) / double(kErosionSteps);
        drop = q_speed - consumer_speed(t.consumers[*q], trial);
      }
      const double left = t.nodes[i].bitrate * (1.0 - p[i]);
      if (!pick || drop < pick_drop - 1e-12 ||
          (std::abs(drop - pick_drop) <= 1e-12 && left > pick_left)) {
        pick = i;
        pick_drop = drop;
        pick_left = left;
      }
    }
    if (!pick) break;
    ++steps[*pick];
    p = as_fraction();
    path.states.push_back(p);
    path.speeds.push_back(overall_speed(t, p));
  }
  return path;
}

/// Per-format deleted fractions bringing the overall speed down to `target`.
inline std::vector<double> plan_age(const FallbackTree& t, double target) {
  const auto path = erosion_path(t);
  return path.states[path.index_for(target)];
}

struct ErosionPlan {
  double k = 0.0;
  double p_min = 1.0;
  std::size_t lifespan = 0;
  std::vector<double> targets;              // per age
  std::vector<std::vector<double>> deleted;  // [age - 1][node]
  std::vector<double> remaining;             // stored size per age
  double accumulated = 0.0;
  double full_size = 0.0;
  double budget = 0.0;
};

inline double decay_target(double k, double p_min, std::size_t age) {
  return (1.0 - p_min) * std::pow(static_cast<double>(age), -k) + p_min;
}

namespace detail {

inline ErosionPlan plan_for_k(const FallbackTree& t, const ErosionPath& path, double p_min,
                              double k, std::size_t lifespan,
                              const std::vector<double>& per_age_size) {
  ErosionPlan plan;
  plan.k = k;
  plan.p_min = p_min;
  plan.lifespan = lifespan;
  for (std::size_t age = 1; age <= lifespan; ++age) {
    const double target = decay_target(k, p_min, age);
    const auto& p = path.states[path.index_for(target)];
    double kept = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) kept += per_age_size[i] * (1.0 - p[i]);
    plan.targets.push_back(target);
    plan.deleted.push_back(p);
    plan.remaining.push_back(kept);
    plan.accumulated += kept;
  }
  for (double s : per_age_size) plan.full_size += s * static_cast<double>(lifespan);
  return plan;
}

}  // namespace detail

/// The plan a fixed decay exponent yields, without a budget.
inline ErosionPlan plan_for_decay(const FallbackTree& t, double k, std::size_t lifespan_days,
                                  const std::vector<double>& per_age_size) {
  return detail::plan_for_k(t, erosion_path(t), min_overall_speed(t), k, lifespan_days,
                            per_age_size);
}

/// Storage held when every non-golden format is eroded as fast as the decay
/// curve allows: the first day stays whole, later days keep only the golden.
inline double erosion_floor(const FallbackTree& t, std::size_t lifespan,
                            const std::vector<double>& per_age_size) {
  double day_one = 0.0;
  for (double s : per_age_size) day_one += s;
  return day_one + per_age_size[t.root] * static_cast<double>(lifespan - 1);
}

inline constexpr double kMaxDecay = 32.0;

/// Smallest decay exponent (to 1e-3) whose per-age targets keep accumulated
/// storage within `storage_budget`. `per_age_size[i]` is one day of node i.
inline ErosionPlan plan_erosion(const FallbackTree& t, std::size_t lifespan_days,
                                double storage_budget, const std::vector<double>& per_age_size) {
  if (lifespan_days == 0) throw Error(ErrorCode::DomainError, "lifespan must be at least one day");
  if (per_age_size.size() != t.size()) {
    throw Error(ErrorCode::DomainError, "per-age sizes must match the storage formats");
  }
  const double p_min = min_overall_speed(t);
  const auto path = erosion_path(t);
  auto at = [&](double k) {
    auto plan = detail::plan_for_k(t, path, p_min, k, lifespan_days, per_age_size);
    plan.budget = storage_budget;
    return plan;
  };
  // Sums over days and formats differ in the last bits depending on order.
  const double limit = storage_budget * (1.0 + 1e-12);
  auto none = at(0.0);
  if (none.accumulated <= limit) return none;
  auto steepest = at(kMaxDecay);
  if (steepest.accumulated > limit) {
    throw Error(ErrorCode::BudgetInfeasible,
                "storage budget " + text::fixed(storage_budget, 3) +
                    " is below the erosion floor " + text::fixed(steepest.accumulated, 3));
  }
  double lo = 0.0;
  double hi = kMaxDecay;
  ErosionPlan best = std::move(steepest);
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    auto plan = at(mid);
    if (plan.accumulated <= limit) {
      hi = mid;
      best = std::move(plan);
    } else {
      lo = mid;
    }
  }
  return best;
}

}  // namespace vidplan
