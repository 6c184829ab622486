#pragma once

// Consumption-format search: per consumer, the fidelity with adequate
// accuracy and the highest consumption speed, found by walking the accuracy
// boundary of each (sampling x resolution) slab instead of profiling the
// whole fidelity space.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "vidplan/error.hpp"
#include "vidplan/knobspace.hpp"
#include "vidplan/profiles.hpp"

namespace vidplan {

struct BoundaryPoint {
  FidelityOption fidelity;
  double accuracy = 0.0;
  double consumption_speed = 0.0;
  // Not profiled: adequacy follows from a poorer profiled point in the same
  // column, whose accuracy/speed are copied here as lower/upper bounds.
  bool inferred = false;
};

struct SlabReport {
  int crop = 0;
  int quality = 0;
  std::vector<BoundaryPoint> boundary;
  std::size_t evaluations = 0;
  bool adequate = true;
};

struct SearchReport {
  Consumer consumer;
  ConsumptionFormat chosen;
  double accuracy = 0.0;
  double consumption_speed = 0.0;
  std::size_t runs = 0;  // new profiling runs charged to this search
  std::vector<SlabReport> slabs;
  std::vector<std::string> violations;
};

namespace detail {

struct SlabProbe {
  FidelityOption fidelity;
  OperatorPoint point;
};

inline void check_pairwise(const KnobSpace& space, const std::string& op,
                           const std::vector<SlabProbe>& probes,
                           std::vector<std::string>& out) {
  for (std::size_t i = 0; i < probes.size(); ++i) {
    for (std::size_t j = 0; j < probes.size(); ++j) {
      if (i == j) continue;
      const auto& a = probes[i];
      const auto& b = probes[j];
      if (compare_fidelity(a.fidelity, b.fidelity) != Ordering::Richer) continue;
      if (a.point.accuracy < b.point.accuracy) {
        out.push_back(op + ": " + space.describe(a.fidelity) +
                      " less accurate than poorer " + space.describe(b.fidelity));
      }
    }
  }
}

}  // namespace detail

/// Saddleback walk over one slab: rows are resolutions (poorest first),
/// columns sampling rates. Starts at the poorest resolution and richest
/// sampling; adequate moves to a poorer sampling, inadequate to a richer
/// resolution. Returns, for each resolution row that has an adequate point,
/// the poorest adequate sampling. Throws NoAdequatePoint when the slab's
/// richest corner is inadequate.
inline SlabReport boundary_search_2d(const ProfileStore& store,
                                     const std::string& op, double target,
                                     int crop, int quality,
                                     std::vector<std::string>* violations = nullptr) {
  const auto& k = store.space();
  const int rows = static_cast<int>(k.resolution.size());
  const int cols = static_cast<int>(k.sampling.size());
  SlabReport report;
  report.crop = crop;
  report.quality = quality;

  std::vector<detail::SlabProbe> probes;
  auto probe = [&](int r, int c) {
    FidelityOption f{c, r, crop, quality};
    OperatorPoint p = store.query_operator(op, f);
    ++report.evaluations;
    probes.push_back({f, p});
    return p;
  };

  // Each probe either moves one column poorer or one row richer, so a slab
  // costs at most rows + cols evaluations.
  std::optional<std::size_t> last;  // latest adequate probe
  int c = cols - 1;
  for (int r = 0; r < rows; ++r) {
    std::optional<std::size_t> row_best;
    while (c >= 0) {
      const OperatorPoint p = probe(r, c);
      if (p.accuracy < target) break;
      row_best = probes.size() - 1;
      last = row_best;
      --c;
    }
    if (row_best) {
      const auto& pr = probes[*row_best];
      report.boundary.push_back(
          {pr.fidelity, pr.point.accuracy, pr.point.consumption_speed, false});
    } else if (last) {
      // (r, c) is inadequate or off the left edge, and the poorer row proved
      // the column to its right adequate.
      const auto& pr = probes[*last];
      report.boundary.push_back({FidelityOption{pr.fidelity.sampling, r, crop, quality},
                                 pr.point.accuracy, pr.point.consumption_speed,
                                 true});
    }
  }

  if (violations) detail::check_pairwise(k, op, probes, *violations);

  if (report.boundary.empty()) {
    report.adequate = false;
    throw Error(ErrorCode::NoAdequatePoint,
                "operator '" + op + "' cannot reach accuracy in slab crop=" +
                    k.crop.labels[crop] + " quality=" + k.quality.labels[quality]);
  }
  return report;
}

/// Fastest adequate fidelity for one consumer; ties prefer lower resolution,
/// then lower sampling, then lower crop. Quality is lowered afterwards while
/// accuracy stays adequate.
inline SearchReport derive_cf(const ProfileStore& store, const Consumer& consumer) {
  const auto& k = store.space();
  const std::string& op = consumer.operator_id;
  const double target = consumer.target_accuracy;
  if (!store.has_operator(op)) {
    throw Error(ErrorCode::UnknownOperator, "operator '" + op + "'");
  }
  const std::size_t runs_before = store.operator_runs();
  SearchReport report;
  report.consumer = consumer;
  const int qmax = k.quality.richest();

  std::optional<BoundaryPoint> best;
  auto better = [](const BoundaryPoint& a, const BoundaryPoint& b) {
    if (a.consumption_speed != b.consumption_speed) {
      return a.consumption_speed > b.consumption_speed;
    }
    return std::tie(a.fidelity.resolution, a.fidelity.sampling, a.fidelity.crop) <
           std::tie(b.fidelity.resolution, b.fidelity.sampling, b.fidelity.crop);
  };
  for (int crop = 0; crop < static_cast<int>(k.crop.size()); ++crop) {
    try {
      auto slab = boundary_search_2d(store, op, target, crop, qmax,
                                     &report.violations);
      for (const auto& bp : slab.boundary) {
        if (bp.inferred) continue;
        if (!best || better(bp, *best)) best = bp;
      }
      report.slabs.push_back(std::move(slab));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoAdequatePoint) throw;
      SlabReport empty;
      empty.crop = crop;
      empty.quality = qmax;
      empty.adequate = false;
      report.slabs.push_back(std::move(empty));
    }
  }
  if (!best) {
    throw Error(ErrorCode::NoAdequatePoint,
                "operator '" + op + "' cannot reach accuracy " +
                    text::fixed(target) + " at any fidelity");
  }

  FidelityOption f = best->fidelity;
  double acc = best->accuracy;
  double speed = best->consumption_speed;
  double prev_acc = acc;
  while (f.quality > 0) {
    FidelityOption g = f;
    --g.quality;
    const OperatorPoint p = store.query_operator(op, g);
    if (p.accuracy > prev_acc) {
      report.violations.push_back(op + ": " + k.describe(g) +
                                  " more accurate than richer quality");
    }
    prev_acc = p.accuracy;
    if (p.accuracy < target) break;
    f = g;
    acc = p.accuracy;
    speed = p.consumption_speed;
  }

  report.chosen = {f};
  report.accuracy = acc;
  report.consumption_speed = speed;
  report.runs = store.operator_runs() - runs_before;
  return report;
}

struct DeriveAllResult {
  std::map<Consumer, SearchReport> per_consumer;
  std::size_t total_runs = 0;
};

/// Consumers share the store's cache, so accuracies of one operator reuse
/// each other's profiling runs.
inline DeriveAllResult derive_all(const ProfileStore& store,
                                  const std::vector<Consumer>& consumers) {
  DeriveAllResult out;
  const std::size_t before = store.operator_runs();
  for (const auto& c : consumers) {
    if (out.per_consumer.count(c)) continue;
    out.per_consumer.emplace(c, derive_cf(store, c));
  }
  out.total_runs = store.operator_runs() - before;
  return out;
}

/// Exhaustive reference: the maximum consumption speed among all adequate
/// fidelities. Uses the raw tables, so no profiling runs are charged.
inline std::optional<double> exhaustive_best_speed(const ProfileStore& store,
                                                   const Consumer& consumer) {
  std::optional<double> best;
  for (const auto& f : store.space().fidelities()) {
    const auto& p = store.operator_entry(consumer.operator_id, f);
    if (!p || p->accuracy < consumer.target_accuracy) continue;
    if (!best || p->consumption_speed > *best) best = p->consumption_speed;
  }
  return best;
}

}  // namespace vidplan
