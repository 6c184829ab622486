#pragma once

// Storage-format derivation: start with one storage format per consumption
// format plus a golden format, then coalesce pairs (knob-wise max fidelity,
// re-chosen coding) either greedily by storage saving or by fidelity
// distance, subject to an optional ingestion budget.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "vidplan/cf_search.hpp"
#include "vidplan/error.hpp"
#include "vidplan/knobspace.hpp"
#include "vidplan/profiles.hpp"

namespace vidplan {

struct ConsumerDemand {
  Consumer consumer;
  double consumption_speed = 0.0;
};

/// One consumption format and the consumers reading it.
struct CfDemand {
  FidelityOption fidelity;
  std::vector<ConsumerDemand> consumers;
};

struct StoredFormat {
  StorageFormat format;
  bool golden = false;
  double bitrate = 0.0;      // MB per video-second
  double encode_cost = 0.0;  // cores per ingested stream
  std::vector<std::size_t> members;  // indices into the demand list
};

struct SFSet {
  std::vector<StoredFormat> formats;

  /// CF index -> index into `formats`.
  std::map<std::size_t, std::size_t> subscription() const {
    std::map<std::size_t, std::size_t> out;
    for (std::size_t i = 0; i < formats.size(); ++i) {
      for (auto m : formats[i].members) out[m] = i;
    }
    return out;
  }

  std::size_t golden_index() const {
    for (std::size_t i = 0; i < formats.size(); ++i) {
      if (formats[i].golden) return i;
    }
    throw Error(ErrorCode::DomainError, "storage format set has no golden format");
  }

  std::set<StorageFormat> format_set() const {
    std::set<StorageFormat> out;
    for (const auto& f : formats) out.insert(f.format);
    return out;
  }
};

struct CostSummary {
  double storage_cost = 0.0;    // MB per video-second
  double ingestion_cost = 0.0;  // cores per ingested stream
};

struct Budgets {
  std::optional<double> ingestion_cores;
};

struct CoalesceResult {
  SFSet set;
  CostSummary costs;
  std::size_t runs = 0;  // coding profiling runs
  std::vector<std::string> log;
};

/// Groups derived consumers by consumption format, in fidelity order.
inline std::vector<CfDemand> group_demands(const DeriveAllResult& derived) {
  std::map<FidelityOption, std::vector<ConsumerDemand>> by_cf;
  for (const auto& [consumer, report] : derived.per_consumer) {
    by_cf[report.chosen.fidelity].push_back({consumer, report.consumption_speed});
  }
  std::vector<CfDemand> out;
  for (auto& [f, cs] : by_cf) out.push_back({f, std::move(cs)});
  return out;
}

/// Frames of a storage format between two frames a consumer reads.
inline double sampling_interval(const KnobSpace& k, const FidelityOption& stored,
                                const FidelityOption& consumed) {
  return k.sampling.values[stored.sampling] / k.sampling.values[consumed.sampling];
}

/// Retrieval speed (x realtime) of a storage format for a consumer reading
/// `consumed`: decode speed at that sampling interval, capped by disk reads.
inline double retrieval_speed(const ProfileStore& store, const StorageFormat& sf,
                              const FidelityOption& consumed, double disk_read_bw) {
  const double n = sampling_interval(store.space(), sf.fidelity, consumed);
  const CodingPoint p = store.query_coding(sf.fidelity, sf.coding, n);
  const double disk = p.bitrate > 0 ? disk_read_bw / p.bitrate : kInfiniteSpeed;
  return std::min(p.decode_speed, disk);
}

inline CostSummary summarize(const SFSet& set) {
  CostSummary c;
  for (const auto& f : set.formats) {
    c.storage_cost += f.bitrate;
    c.ingestion_cost += f.encode_cost;
  }
  return c;
}

/// Storage and ingestion cost recomputed from the profile store.
inline CostSummary storage_and_ingestion_cost(const SFSet& set,
                                              const ProfileStore& store) {
  CostSummary c;
  for (const auto& f : set.formats) {
    const auto p = store.query_coding(f.format.fidelity, f.format.coding);
    c.storage_cost += p.bitrate;
    c.ingestion_cost += p.encode_cost;
  }
  return c;
}

inline double storage_cost(const SFSet& set, const ProfileStore& store) {
  return storage_and_ingestion_cost(set, store).storage_cost;
}

inline double ingestion_cost(const SFSet& set, const ProfileStore& store) {
  return storage_and_ingestion_cost(set, store).ingestion_cost;
}

/// Fidelity and retrieval-speed checks per subscription edge; returns the
/// violations found.
inline std::vector<std::string> check_requirements(const SFSet& set,
                                                   const std::vector<CfDemand>& demands,
                                                   const ProfileStore& store,
                                                   double disk_read_bw) {
  const auto& k = store.space();
  std::vector<std::string> out;
  std::size_t goldens = 0;
  FidelityOption join{0, 0, 0, 0};
  for (const auto& d : demands) join = knobwise_max(join, d.fidelity);
  for (const auto& sf : set.formats) {
    if (sf.golden) {
      ++goldens;
      if (!demands.empty() && sf.format.fidelity != join) {
        out.push_back("golden fidelity is not the knob-wise maximum");
      }
    }
  }
  if (goldens != 1) out.push_back("expected exactly one golden format");
  const auto sub = set.subscription();
  for (std::size_t i = 0; i < demands.size(); ++i) {
    auto it = sub.find(i);
    if (it == sub.end()) {
      out.push_back("CF " + k.describe(demands[i].fidelity) + " has no storage format");
      continue;
    }
    const auto& sf = set.formats[it->second].format;
    if (!can_degrade(sf.fidelity, demands[i].fidelity)) {
      out.push_back("fidelity: " + k.describe(sf) + " cannot serve " +
                    k.describe(demands[i].fidelity));
    }
    const double speed = retrieval_speed(store, sf, demands[i].fidelity, disk_read_bw);
    for (const auto& c : demands[i].consumers) {
      if (speed < c.consumption_speed) {
        out.push_back("speed: " + k.describe(sf) + " retrieves at " +
                      text::fixed(speed, 3) + "x for " + c.consumer.operator_id +
                      " consuming at " + text::fixed(c.consumption_speed, 3) + "x");
      }
    }
  }
  return out;
}

enum class Strategy { Heuristic, Distance };

inline const char* to_string(Strategy s) {
  return s == Strategy::Heuristic ? "heuristic" : "distance";
}

/// Shared machinery of both strategies: coding choice, pair merging and the
/// initial set.
class Coalescer {
 public:
  Coalescer(const ProfileStore& store, const std::vector<CfDemand>& demands,
            double disk_read_bw)
      : store_(store), demands_(demands), disk_(disk_read_bw) {
    if (demands_.empty()) {
      throw Error(ErrorCode::DomainError, "no consumption formats to store");
    }
  }

  const ProfileStore& store() const { return store_; }

  FidelityOption golden_fidelity() const {
    FidelityOption f = demands_.front().fidelity;
    for (const auto& d : demands_) f = knobwise_max(f, d.fidelity);
    return f;
  }

  /// Minimum-bitrate encoded coding at `f` (slowest, sparsest keyframes when
  /// the model behaves as expected), found by scanning every coding.
  StoredFormat golden_sf() const {
    const FidelityOption f = golden_fidelity();
    StoredFormat out;
    out.golden = true;
    pick_coding(f, {}, out);
    return out;
  }

  /// Cheapest-storage coding at `f` serving every consumer in `members`;
  /// raw when no encoded coding is fast enough. Returns false when even raw
  /// is too slow.
  bool pick_coding(const FidelityOption& f, const std::vector<std::size_t>& members,
                   StoredFormat& out) const {
    std::optional<std::tuple<double, double, CodingOption>> best;
    for (const auto& c : store_.space().codings()) {
      if (c.bypass) continue;
      const CodingPoint p = store_.query_coding(f, c);
      if (!serves({f, c}, members)) continue;
      auto key = std::make_tuple(p.bitrate, p.encode_cost, c);
      if (!best || key < *best) best = key;
    }
    CodingOption chosen;
    FidelityOption stored = f;
    if (best) {
      chosen = std::get<2>(*best);
    } else {
      // Raw frames carry no compression loss, so raw storage sits at the
      // richest quality; its size does not depend on quality.
      stored.quality = store_.space().quality.richest();
      if (!serves({stored, CodingOption::raw()}, members)) return false;
      chosen = CodingOption::raw();
    }
    const CodingPoint p = store_.query_coding(stored, chosen);
    out.format = {stored, chosen};
    out.bitrate = p.bitrate;
    out.encode_cost = p.encode_cost;
    out.members = members;
    std::sort(out.members.begin(), out.members.end());
    return true;
  }

  bool serves(const StorageFormat& sf, const std::vector<std::size_t>& members) const {
    for (auto m : members) {
      const auto& d = demands_[m];
      const double speed = retrieval_speed(store_, sf, d.fidelity, disk_);
      for (const auto& c : d.consumers) {
        if (speed < c.consumption_speed) return false;
      }
    }
    return true;
  }

  std::optional<StoredFormat> coalesce(const StoredFormat& a,
                                       const StoredFormat& b) const {
    StoredFormat out;
    out.golden = a.golden || b.golden;
    std::vector<std::size_t> members = a.members;
    members.insert(members.end(), b.members.begin(), b.members.end());
    const FidelityOption f = knobwise_max(a.format.fidelity, b.format.fidelity);
    // The golden format keeps its lowest-storage coding; it absorbs only
    // consumers that coding already serves.
    if (out.golden) {
      const StoredFormat& g = a.golden ? a : b;
      if (!serves(g.format, members)) return std::nullopt;
      out = g;
      out.members = members;
      std::sort(out.members.begin(), out.members.end());
      return out;
    }
    if (!pick_coding(f, members, out)) return std::nullopt;
    return out;
  }

  SFSet initial_set() const {
    SFSet set;
    for (std::size_t i = 0; i < demands_.size(); ++i) {
      StoredFormat sf;
      if (!pick_coding(demands_[i].fidelity, {i}, sf)) {
        throw Error(ErrorCode::Infeasible,
                    "even raw storage of " + store_.space().describe(demands_[i].fidelity) +
                        " is slower than its consumers");
      }
      set.formats.push_back(std::move(sf));
    }
    set.formats.push_back(golden_sf());
    return set;
  }

  /// Re-codes one storage format to the cheapest-to-encode coding that still
  /// serves its consumers, if that lowers ingestion cost.
  std::optional<StoredFormat> cheaper_encode(const StoredFormat& sf) const {
    std::optional<std::tuple<double, double, CodingOption>> best;
    for (const auto& c : store_.space().codings()) {
      StorageFormat cand{sf.format.fidelity, c};
      if (c.bypass) cand.fidelity.quality = store_.space().quality.richest();
      const CodingPoint p = store_.query_coding(cand.fidelity, c);
      if (!(p.encode_cost < sf.encode_cost)) continue;
      if (!serves(cand, sf.members)) continue;
      auto key = std::make_tuple(p.bitrate, p.encode_cost, c);
      if (!best || key < *best) best = key;
    }
    if (!best) return std::nullopt;
    StoredFormat out = sf;
    out.format.coding = std::get<2>(*best);
    if (out.format.coding.bypass) {
      out.format.fidelity.quality = store_.space().quality.richest();
    }
    out.bitrate = std::get<0>(*best);
    out.encode_cost = std::get<1>(*best);
    return out;
  }

  double disk_read_bw() const { return disk_; }
  const std::vector<CfDemand>& demands() const { return demands_; }

 private:
  const ProfileStore& store_;
  const std::vector<CfDemand>& demands_;
  double disk_;
};

namespace detail {

inline void apply_merge(SFSet& set, std::size_t i, std::size_t j, StoredFormat merged) {
  if (i > j) std::swap(i, j);
  set.formats.erase(set.formats.begin() + static_cast<std::ptrdiff_t>(j));
  set.formats.erase(set.formats.begin() + static_cast<std::ptrdiff_t>(i));
  set.formats.push_back(std::move(merged));
  std::sort(set.formats.begin(), set.formats.end(),
            [](const StoredFormat& a, const StoredFormat& b) {
              return std::tie(a.format, a.golden) < std::tie(b.format, b.golden);
            });
}

}  // namespace detail

/// Greedy coalescing. Phase 1 takes the largest storage saving among merges
/// that do not grow storage; phase 2, while over the ingestion budget, takes
/// the ingestion-reducing step (merge or re-coding) with the smallest storage
/// increase.
inline CoalesceResult derive_sfs_heuristic(const ProfileStore& store,
                                           const std::vector<CfDemand>& demands,
                                           double disk_read_bw,
                                           const Budgets& budgets = {}) {
  const std::size_t runs_before = store.coding_runs();
  Coalescer co(store, demands, disk_read_bw);
  CoalesceResult result;
  SFSet set = co.initial_set();
  const auto& k = store.space();

  while (set.formats.size() > 1) {
    std::optional<std::tuple<double, StorageFormat, StorageFormat, std::size_t,
                             std::size_t>>
        pick;
    std::optional<StoredFormat> pick_sf;
    for (std::size_t i = 0; i < set.formats.size(); ++i) {
      for (std::size_t j = i + 1; j < set.formats.size(); ++j) {
        auto merged = co.coalesce(set.formats[i], set.formats[j]);
        if (!merged) continue;
        const double saving =
            set.formats[i].bitrate + set.formats[j].bitrate - merged->bitrate;
        if (saving < 0) continue;
        auto key = std::make_tuple(-saving, set.formats[i].format,
                                   set.formats[j].format, i, j);
        if (!pick || key < *pick) {
          pick = key;
          pick_sf = std::move(merged);
        }
      }
    }
    if (!pick) break;
    const auto i = std::get<3>(*pick);
    const auto j = std::get<4>(*pick);
    result.log.push_back("free merge " + k.describe(set.formats[i].format) + " + " +
                         k.describe(set.formats[j].format) + " -> " +
                         k.describe(pick_sf->format));
    detail::apply_merge(set, i, j, std::move(*pick_sf));
  }

  if (budgets.ingestion_cores) {
    const double budget = *budgets.ingestion_cores;
    while (summarize(set).ingestion_cost > budget) {
      const double ingest_now = summarize(set).ingestion_cost;
      // (storage increase, kind, formats...) with kind 0 = merge, 1 = re-code.
      std::optional<std::tuple<double, int, StorageFormat, StorageFormat>> pick;
      std::optional<StoredFormat> pick_sf;
      std::size_t pi = 0;
      std::size_t pj = 0;
      for (std::size_t i = 0; i < set.formats.size(); ++i) {
        for (std::size_t j = i + 1; j < set.formats.size(); ++j) {
          auto merged = co.coalesce(set.formats[i], set.formats[j]);
          if (!merged) continue;
          const double ingest_after = ingest_now - set.formats[i].encode_cost -
                                      set.formats[j].encode_cost +
                                      merged->encode_cost;
          if (!(ingest_after < ingest_now)) continue;
          const double increase =
              merged->bitrate - set.formats[i].bitrate - set.formats[j].bitrate;
          auto key = std::make_tuple(increase, 0, set.formats[i].format,
                                     set.formats[j].format);
          if (!pick || key < *pick) {
            pick = key;
            pick_sf = std::move(merged);
            pi = i;
            pj = j;
          }
        }
        if (set.formats[i].golden) continue;
        auto recoded = co.cheaper_encode(set.formats[i]);
        if (!recoded) continue;
        const double increase = recoded->bitrate - set.formats[i].bitrate;
        auto key = std::make_tuple(increase, 1, set.formats[i].format,
                                   set.formats[i].format);
        if (!pick || key < *pick) {
          pick = key;
          pick_sf = std::move(recoded);
          pi = i;
          pj = i;
        }
      }
      if (!pick) {
        throw Error(ErrorCode::BudgetInfeasible,
                    "ingestion cost " + text::fixed(ingest_now, 3) +
                        " cores cannot be reduced to the budget of " +
                        text::fixed(budget, 3));
      }
      if (pi == pj) {
        result.log.push_back("re-code " + k.describe(set.formats[pi].format) +
                             " -> " + k.describe(pick_sf->format));
        set.formats[pi] = std::move(*pick_sf);
      } else {
        result.log.push_back("budget merge " + k.describe(set.formats[pi].format) +
                             " + " + k.describe(set.formats[pj].format) + " -> " +
                             k.describe(pick_sf->format));
        detail::apply_merge(set, pi, pj, std::move(*pick_sf));
      }
    }
  }

  result.set = std::move(set);
  result.costs = summarize(result.set);
  result.runs = store.coding_runs() - runs_before;
  return result;
}

inline double fidelity_distance(const KnobSpace& k, const FidelityOption& a,
                                const FidelityOption& b) {
  const auto x = k.coordinates(a);
  const auto y = k.coordinates(b);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

/// Distance-based coalescing: repeatedly merge the closest pair of fidelities
/// (skipping pairs no coding can serve) until the ingestion budget is met, or
/// without a budget until `target_count` formats remain.
inline CoalesceResult derive_sfs_distance(const ProfileStore& store,
                                          const std::vector<CfDemand>& demands,
                                          double disk_read_bw,
                                          const Budgets& budgets = {},
                                          std::size_t target_count = 4) {
  const std::size_t runs_before = store.coding_runs();
  Coalescer co(store, demands, disk_read_bw);
  CoalesceResult result;
  const auto& k = store.space();
  SFSet set = co.initial_set();

  auto done = [&] {
    if (budgets.ingestion_cores) {
      return summarize(set).ingestion_cost <= *budgets.ingestion_cores;
    }
    return set.formats.size() <= std::max<std::size_t>(target_count, 1);
  };

  while (!done() && set.formats.size() > 1) {
    std::vector<std::tuple<double, StorageFormat, StorageFormat, std::size_t,
                           std::size_t>>
        pairs;
    for (std::size_t i = 0; i < set.formats.size(); ++i) {
      for (std::size_t j = i + 1; j < set.formats.size(); ++j) {
        pairs.emplace_back(fidelity_distance(k, set.formats[i].format.fidelity,
                                             set.formats[j].format.fidelity),
                           set.formats[i].format, set.formats[j].format, i, j);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    bool merged_any = false;
    for (const auto& p : pairs) {
      const auto i = std::get<3>(p);
      const auto j = std::get<4>(p);
      auto merged = co.coalesce(set.formats[i], set.formats[j]);
      if (!merged) continue;
      result.log.push_back("distance merge " + k.describe(set.formats[i].format) +
                           " + " + k.describe(set.formats[j].format) + " -> " +
                           k.describe(merged->format));
      detail::apply_merge(set, i, j, std::move(*merged));
      merged_any = true;
      break;
    }
    if (!merged_any) break;
  }

  if (budgets.ingestion_cores && summarize(set).ingestion_cost > *budgets.ingestion_cores) {
    throw Error(ErrorCode::BudgetInfeasible,
                "distance coalescing cannot meet the ingestion budget of " +
                    text::fixed(*budgets.ingestion_cores, 3) + " cores");
  }
  result.set = std::move(set);
  result.costs = summarize(result.set);
  result.runs = store.coding_runs() - runs_before;
  return result;
}

inline CoalesceResult derive_sfs(Strategy s, const ProfileStore& store,
                                 const std::vector<CfDemand>& demands,
                                 double disk_read_bw, const Budgets& budgets = {},
                                 std::size_t target_count = 4) {
  if (s == Strategy::Heuristic) {
    return derive_sfs_heuristic(store, demands, disk_read_bw, budgets);
  }
  return derive_sfs_distance(store, demands, disk_read_bw, budgets, target_count);
}

}  // namespace vidplan
