#pragma once

// Tier-placement performance model: placement constraints (write bandwidth,
// codec rate, capacity), the throughput objective over istreams, queries and
// temperatures, and a grid solver for the best placement.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "vidplan/error.hpp"
#include "vidplan/text.hpp"

namespace vidplan {

struct Tier {
  std::string name;
  double read_bw = 0.0;   // MB/s
  double write_bw = 0.0;  // MB/s
  double capacity = 0.0;  // GB
  double cost = 0.0;      // dollars
};

struct Codec {
  std::string name = "codec";
  double decode_bw = 0.0;     // fps
  double transcode_bw = 0.0;  // fps
  double cost = 0.0;
};

struct HardwareSpec {
  std::vector<Tier> tiers;
  Codec codec;

  double cost() const {
    double c = codec.cost;
    for (const auto& t : tiers) c += t.cost;
    return c;
  }

  void validate() const {
    if (tiers.empty()) throw Error(ErrorCode::DomainError, "hardware has no storage tiers");
    std::set<std::string> names;
    for (const auto& t : tiers) {
      if (!(t.read_bw > 0 && t.write_bw > 0 && t.capacity > 0)) {
        throw Error(ErrorCode::DomainError, "tier " + t.name + " needs positive bandwidths and capacity");
      }
      if (!names.insert(t.name).second) {
        throw Error(ErrorCode::DomainError, "duplicate tier name " + t.name);
      }
    }
    if (!(codec.decode_bw > 0 && codec.transcode_bw > 0)) {
      throw Error(ErrorCode::DomainError, "codec needs positive decode and transcode rates");
    }
  }
};

struct IStream {
  std::string name;
  double encoded_bitrate = 0.0;  // MB per video-second
  double raw_bitrate = 0.0;      // MB per video-second
  double compute_fps = 0.0;      // operator throughput
};

struct Stage {
  std::size_t istream = 0;
  double activation = 1.0;  // fraction of chunks reaching this stage
};

struct Query {
  std::string name;
  double weight = 1.0;
  std::vector<Stage> stages;
};

struct Temperature {
  std::string name;
  double span = 0.0;  // video-seconds
  double weight = 0.0;
};

struct Workload {
  double n_cam = 1.0;
  double fps = 30.0;
  std::vector<IStream> istreams;
  std::vector<Query> queries;
  std::vector<Temperature> temperatures;  // hottest first

  void validate() const {
    if (istreams.empty() || queries.empty() || temperatures.empty()) {
      throw Error(ErrorCode::DomainError, "workload needs istreams, queries and temperatures");
    }
    double tw = 0.0;
    for (const auto& t : temperatures) {
      if (t.span < 0 || t.weight < 0) throw Error(ErrorCode::DomainError, "negative temperature span or weight");
      tw += t.weight;
    }
    if (std::abs(tw - 1.0) > 1e-9) throw Error(ErrorCode::DomainError, "temperature weights must sum to 1");
    double qw = 0.0;
    for (const auto& q : queries) {
      qw += q.weight;
      if (q.stages.empty()) throw Error(ErrorCode::DomainError, "query " + q.name + " has no stages");
      if (std::abs(q.stages.front().activation - 1.0) > 1e-12) {
        throw Error(ErrorCode::DomainError, "first stage of " + q.name + " must run on every chunk");
      }
      for (std::size_t k = 0; k < q.stages.size(); ++k) {
        const auto& s = q.stages[k];
        if (s.istream >= istreams.size()) throw Error(ErrorCode::DomainError, "query " + q.name + " names an unknown istream");
        if (s.activation < 0 || s.activation > 1) throw Error(ErrorCode::DomainError, "activation outside [0, 1]");
        if (k > 0 && s.activation > q.stages[k - 1].activation + 1e-12) {
          throw Error(ErrorCode::DomainError, "activations must not grow along " + q.name);
        }
      }
    }
    if (std::abs(qw - 1.0) > 1e-9) throw Error(ErrorCode::DomainError, "query weights must sum to 1");
    for (const auto& i : istreams) {
      if (i.encoded_bitrate < 0 || i.raw_bitrate < 0 || !(i.compute_fps > 0)) {
        throw Error(ErrorCode::DomainError, "istream " + i.name + " has invalid rates");
      }
    }
  }
};

/// Fractions of each (istream, temperature) held per tier, split into encoded
/// and raw parts. A settled policy keeps one coding per tier; interim states
/// during migration may hold both.
class PlacementPolicy {
 public:
  PlacementPolicy() = default;
  PlacementPolicy(std::size_t istreams, std::size_t temperatures, std::size_t tiers)
      : ni_(istreams), nt_(temperatures), ns_(tiers), parts_(istreams * temperatures * tiers * 2, 0.0) {}

  std::size_t istreams() const { return ni_; }
  std::size_t temperatures() const { return nt_; }
  std::size_t tiers() const { return ns_; }

  double part(std::size_t i, std::size_t t, std::size_t s, bool encoded) const {
    return parts_[at(i, t, s) + (encoded ? 0 : 1)];
  }
  double& part(std::size_t i, std::size_t t, std::size_t s, bool encoded) {
    return parts_[at(i, t, s) + (encoded ? 0 : 1)];
  }

  double D(std::size_t i, std::size_t t, std::size_t s) const {
    return part(i, t, s, true) + part(i, t, s, false);
  }
  bool En(std::size_t i, std::size_t t, std::size_t s) const { return part(i, t, s, false) == 0.0; }

  void set(std::size_t i, std::size_t t, std::size_t s, double d, bool encoded) {
    part(i, t, s, true) = encoded ? d : 0.0;
    part(i, t, s, false) = encoded ? 0.0 : d;
  }

  void validate() const {
    for (std::size_t i = 0; i < ni_; ++i) {
      for (std::size_t t = 0; t < nt_; ++t) {
        double sum = 0.0;
        for (std::size_t s = 0; s < ns_; ++s) {
          for (bool e : {true, false}) {
            const double x = part(i, t, s, e);
            if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::DomainError, "placement fraction outside [0, 1]");
          }
          sum += D(i, t, s);
        }
        if (std::abs(sum - 1.0) > 1e-9) {
          throw Error(ErrorCode::DomainError, "placement fractions of istream " + std::to_string(i) +
                                                  " temperature " + std::to_string(t) + " sum to " +
                                                  text::fixed(sum));
        }
      }
    }
  }

  const std::vector<double>& raw_parts() const { return parts_; }

  bool operator==(const PlacementPolicy&) const = default;

 private:
  std::size_t at(std::size_t i, std::size_t t, std::size_t s) const {
    return ((i * nt_ + t) * ns_ + s) * 2;
  }

  std::size_t ni_ = 0;
  std::size_t nt_ = 0;
  std::size_t ns_ = 0;
  std::vector<double> parts_;
};

inline double per_second(double bw, double bitrate) {
  return bitrate > 0 ? bw / bitrate : std::numeric_limits<double>::infinity();
}

/// Frames per second one tier delivers for an istream.
inline double t_io_tier(const IStream& is, const Tier& tier, bool encoded, const Codec& codec,
                        double fps) {
  if (encoded) return std::min(codec.decode_bw, per_second(tier.read_bw, is.encoded_bitrate) * fps);
  return per_second(tier.read_bw, is.raw_bitrate) * fps;
}

/// Loading a temperature span is bound by its slowest tier share.
inline double t_io(const PlacementPolicy& p, const Workload& w, const HardwareSpec& hw,
                   std::size_t i, std::size_t t) {
  double worst = 0.0;
  for (std::size_t s = 0; s < hw.tiers.size(); ++s) {
    for (bool e : {true, false}) {
      const double d = p.part(i, t, s, e);
      if (d <= 0) continue;
      worst = std::max(worst, d / t_io_tier(w.istreams[i], hw.tiers[s], e, hw.codec, w.fps));
    }
  }
  return worst > 0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
}

inline double t_op(const PlacementPolicy& p, const Workload& w, const HardwareSpec& hw,
                   std::size_t i, std::size_t t) {
  return std::min(w.istreams[i].compute_fps, t_io(p, w, hw, i, t));
}

inline double t_query(const PlacementPolicy& p, const Workload& w, const HardwareSpec& hw,
                      std::size_t q, std::size_t t) {
  double inv = 0.0;
  for (const auto& st : w.queries[q].stages) {
    if (st.activation > 0) inv += st.activation / t_op(p, w, hw, st.istream, t);
  }
  return inv > 0 ? 1.0 / inv : std::numeric_limits<double>::infinity();
}

inline double t_all(const PlacementPolicy& p, const Workload& w, const HardwareSpec& hw) {
  double total = 0.0;
  for (std::size_t q = 0; q < w.queries.size(); ++q) {
    double per_q = 0.0;
    for (std::size_t t = 0; t < w.temperatures.size(); ++t) {
      per_q += w.temperatures[t].weight * t_query(p, w, hw, q, t);
    }
    total += w.queries[q].weight * per_q;
  }
  return total;
}

struct ConstraintCheck {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  double slack = 0.0;  // limit - value
  bool ok = true;
};

struct ConstraintReport {
  std::vector<ConstraintCheck> checks;

  bool feasible() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.ok; });
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
      if (!c.ok) out.push_back(c.name + ": " + text::fixed(c.value, 3) + " > " + text::fixed(c.limit, 3));
    }
    return out;
  }
};

namespace detail {

inline ConstraintCheck make_check(std::string name, double value, double limit) {
  ConstraintCheck c{std::move(name), value, limit, limit - value, true};
  c.ok = c.slack >= -1e-9 * std::max(1.0, std::abs(limit));
  return c;
}

inline double stored_bitrate(const IStream& is, bool encoded) {
  return encoded ? is.encoded_bitrate : is.raw_bitrate;
}

}  // namespace detail

/// Hot-tier write bandwidth, codec ingest rate and per-tier capacity, each
/// with its slack.
inline ConstraintReport check_constraints(const PlacementPolicy& p, const Workload& w,
                                          const HardwareSpec& hw) {
  ConstraintReport r;
  const std::size_t S = hw.tiers.size();
  for (std::size_t s = 0; s < S; ++s) {
    double write = 0.0;
    for (std::size_t i = 0; i < w.istreams.size(); ++i) {
      for (bool e : {true, false}) write += p.part(i, 0, s, e) * detail::stored_bitrate(w.istreams[i], e);
    }
    r.checks.push_back(detail::make_check("write " + hw.tiers[s].name, write, hw.tiers[s].write_bw));
  }
  const double ingest = w.fps * w.n_cam;
  for (std::size_t i = 0; i < w.istreams.size(); ++i) {
    for (std::size_t t = 0; t < w.temperatures.size(); ++t) {
      bool enc = false;
      bool raw = false;
      for (std::size_t s = 0; s < S; ++s) {
        enc = enc || p.part(i, t, s, true) > 0;
        raw = raw || p.part(i, t, s, false) > 0;
      }
      const std::string cell = w.istreams[i].name + "/" + w.temperatures[t].name;
      if (enc) r.checks.push_back(detail::make_check("transcode " + cell, ingest, hw.codec.transcode_bw));
      if (raw) r.checks.push_back(detail::make_check("decode " + cell, ingest, hw.codec.decode_bw));
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    double gb = 0.0;
    for (std::size_t t = 0; t < w.temperatures.size(); ++t) {
      for (std::size_t i = 0; i < w.istreams.size(); ++i) {
        for (bool e : {true, false}) {
          gb += w.temperatures[t].span * p.part(i, t, s, e) *
                detail::stored_bitrate(w.istreams[i], e) / 1000.0;
        }
      }
    }
    r.checks.push_back(detail::make_check("capacity " + hw.tiers[s].name, gb, hw.tiers[s].capacity));
  }
  return r;
}

inline void write_policy_csv(const PlacementPolicy& p, const Workload& w, const HardwareSpec& hw,
                             std::ostream& os) {
  os << "istream,temperature,tier,fraction,encoded\n";
  for (std::size_t i = 0; i < p.istreams(); ++i) {
    for (std::size_t t = 0; t < p.temperatures(); ++t) {
      for (std::size_t s = 0; s < p.tiers(); ++s) {
        for (bool e : {true, false}) {
          const double d = p.part(i, t, s, e);
          if (d <= 0) continue;
          os << w.istreams[i].name << ',' << w.temperatures[t].name << ',' << hw.tiers[s].name << ','
             << text::fixed(d, 6) << ',' << (e ? 1 : 0) << '\n';
        }
      }
    }
  }
}

struct SolveOptions {
  double grid_step = 0.05;
  std::size_t exact_limit = 20000;      // joint options per temperature
  std::size_t merge_limit = 4000000;    // candidate pairs per temperature merge
  bool refine = true;
};

struct SolveResult {
  PlacementPolicy policy;
  double utility = 0.0;
  double grid_utility = 0.0;  // before refinement
  bool exact = false;         // grid optimum certified by enumeration
};

namespace detail {

struct CellOption {
  std::vector<double> d;
  std::vector<char> en;
  double t_op = 0.0;
  std::vector<double> res;  // capacity GB per tier, then hot write MB/s per tier
};

inline std::vector<std::vector<int>> compositions(int n, std::size_t parts) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(parts, 0);
  auto rec = [&](auto&& self, std::size_t k, int left) -> void {
    if (k + 1 == parts) {
      cur[k] = left;
      out.push_back(cur);
      return;
    }
    for (int x = left; x >= 0; --x) {
      cur[k] = x;
      self(self, k + 1, left - x);
    }
  };
  rec(rec, 0, n);
  return out;
}

class GridModel {
 public:
  GridModel(const Workload& w, const HardwareSpec& hw, double step) : w_(w), hw_(hw) {
    const std::size_t S = hw.tiers.size();
    const int n = static_cast<int>(std::lround(1.0 / step));
    if (n < 1 || std::abs(n * step - 1.0) > 1e-9) {
      throw Error(ErrorCode::DomainError, "grid step must divide 1");
    }
    const double ingest = w.fps * w.n_cam;
    const bool enc_ok = hw.codec.transcode_bw >= ingest;
    const bool raw_ok = hw.codec.decode_bw >= ingest;
    const auto comps = compositions(n, S);
    options_.resize(w.istreams.size() * w.temperatures.size());
    for (std::size_t i = 0; i < w.istreams.size(); ++i) {
      for (std::size_t t = 0; t < w.temperatures.size(); ++t) {
        auto& list = options_[i * w.temperatures.size() + t];
        for (const auto& c : comps) {
          std::vector<std::size_t> used;
          for (std::size_t s = 0; s < S; ++s) {
            if (c[s] > 0) used.push_back(s);
          }
          // Encoded on every used tier first, then raw patterns.
          for (std::uint32_t mask = 0; mask < (1u << used.size()); ++mask) {
            CellOption o;
            o.d.assign(S, 0.0);
            o.en.assign(S, 1);
            bool ok = true;
            for (std::size_t k = 0; k < used.size(); ++k) {
              const bool raw = mask & (1u << k);
              o.en[used[k]] = raw ? 0 : 1;
              ok = ok && (raw ? raw_ok : enc_ok);
            }
            if (!ok) continue;
            double worst = 0.0;
            o.res.assign(2 * S, 0.0);
            for (std::size_t s = 0; s < S; ++s) {
              o.d[s] = c[s] / double(n);
              if (c[s] == 0) continue;
              const bool e = o.en[s];
              worst = std::max(worst, o.d[s] / t_io_tier(w.istreams[i], hw.tiers[s], e, hw.codec, w.fps));
              const double b = stored_bitrate(w.istreams[i], e);
              o.res[s] = w.temperatures[t].span * o.d[s] * b / 1000.0;
              if (t == 0) o.res[S + s] = o.d[s] * b;
            }
            const double io = worst > 0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
            o.t_op = std::min(w.istreams[i].compute_fps, io);
            list.push_back(std::move(o));
          }
        }
        if (list.empty()) {
          throw Error(ErrorCode::Infeasible, "the codec cannot keep up with ingestion in any coding");
        }
      }
    }
    limits_.assign(2 * S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      limits_[s] = hw.tiers[s].capacity;
      limits_[S + s] = hw.tiers[s].write_bw;
    }
  }

  const std::vector<CellOption>& cell(std::size_t i, std::size_t t) const {
    return options_[i * w_.temperatures.size() + t];
  }
  const std::vector<double>& limits() const { return limits_; }

  bool fits(const std::vector<double>& res) const {
    for (std::size_t k = 0; k < res.size(); ++k) {
      if (res[k] > limits_[k] * (1 + 1e-12) + 1e-12) return false;
    }
    return true;
  }

  /// Weighted query throughput of one temperature given per-istream T_op.
  double temperature_utility(std::size_t t, const std::vector<double>& ops) const {
    double u = 0.0;
    for (const auto& q : w_.queries) {
      double inv = 0.0;
      for (const auto& st : q.stages) {
        if (st.activation > 0) inv += st.activation / ops[st.istream];
      }
      u += q.weight * (inv > 0 ? 1.0 / inv : std::numeric_limits<double>::infinity());
    }
    return w_.temperatures[t].weight * u;
  }

  PlacementPolicy build(const std::vector<std::vector<std::size_t>>& choice) const {
    PlacementPolicy p(w_.istreams.size(), w_.temperatures.size(), hw_.tiers.size());
    for (std::size_t i = 0; i < w_.istreams.size(); ++i) {
      for (std::size_t t = 0; t < w_.temperatures.size(); ++t) {
        const auto& o = cell(i, t)[choice[i][t]];
        for (std::size_t s = 0; s < hw_.tiers.size(); ++s) p.set(i, t, s, o.d[s], o.en[s]);
      }
    }
    return p;
  }

 private:
  const Workload& w_;
  const HardwareSpec& hw_;
  std::vector<std::vector<CellOption>> options_;
  std::vector<double> limits_;
};

struct Partial {
  std::vector<double> res;
  double util = 0.0;
  std::vector<std::size_t> code;  // joint option index per temperature
};

inline void pareto_prune(std::vector<Partial>& xs) {
  std::stable_sort(xs.begin(), xs.end(),
                   [](const Partial& a, const Partial& b) { return a.util > b.util; });
  std::vector<Partial> kept;
  for (auto& x : xs) {
    bool dominated = false;
    for (const auto& k : kept) {
      bool le = true;
      for (std::size_t r = 0; r < x.res.size() && le; ++r) le = k.res[r] <= x.res[r] + 1e-12;
      if (le) {
        dominated = true;
        break;
      }
    }
    if (!dominated) kept.push_back(std::move(x));
  }
  xs = std::move(kept);
}

inline double violation(const std::vector<double>& res, const std::vector<double>& limits) {
  double v = 0.0;
  for (std::size_t k = 0; k < res.size(); ++k) v += std::max(0.0, res[k] - limits[k]) / limits[k];
  return v;
}

// Steepest-ascent moves of `fine` between tiers, or coding flips, that keep
// the policy feasible.
inline PlacementPolicy refine_policy(PlacementPolicy p, const Workload& w, const HardwareSpec& hw,
                                     double fine) {
  const std::size_t S = hw.tiers.size();
  const double ingest = w.fps * w.n_cam;
  const bool enc_ok = hw.codec.transcode_bw >= ingest;
  const bool raw_ok = hw.codec.decode_bw >= ingest;
  double best = t_all(p, w, hw);
  for (int iter = 0; iter < 5000; ++iter) {
    std::optional<PlacementPolicy> pick;
    double pick_u = best;
    auto consider = [&](const PlacementPolicy& cand) {
      const double u = t_all(cand, w, hw);
      if (u > pick_u + 1e-12 * std::max(1.0, std::abs(pick_u)) &&
          check_constraints(cand, w, hw).feasible()) {
        pick = cand;
        pick_u = u;
      }
    };
    for (std::size_t i = 0; i < w.istreams.size(); ++i) {
      for (std::size_t t = 0; t < w.temperatures.size(); ++t) {
        for (std::size_t a = 0; a < S; ++a) {
          const double da = p.D(i, t, a);
          if (da <= 0) continue;
          const bool ea = p.En(i, t, a);
          if (ea ? raw_ok : enc_ok) {
            auto cand = p;
            cand.set(i, t, a, da, !ea);
            consider(cand);
          }
          const double delta = std::min(fine, da);
          for (std::size_t b = 0; b < S; ++b) {
            if (b == a) continue;
            const double db = p.D(i, t, b);
            for (bool eb : {true, false}) {
              if (db > 0 && eb != p.En(i, t, b)) continue;
              if (!(eb ? enc_ok : raw_ok)) continue;
              auto cand = p;
              const double left = da - delta;
              cand.set(i, t, a, left < 1e-12 ? 0.0 : left, ea);
              cand.set(i, t, b, db + delta, eb);
              consider(cand);
            }
          }
        }
      }
    }
    if (!pick) break;
    p = std::move(*pick);
    best = pick_u;
  }
  return p;
}

inline std::vector<std::vector<std::size_t>> descend(const GridModel& g, const Workload& w,
                                                     std::vector<std::vector<std::size_t>> choice) {
  const std::size_t I = w.istreams.size();
  const std::size_t T = w.temperatures.size();
  const std::size_t R = g.limits().size();
  auto score = [&](const std::vector<std::vector<std::size_t>>& c) {
    std::vector<double> res(R, 0.0);
    double util = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> ops(I);
      for (std::size_t i = 0; i < I; ++i) {
        const auto& o = g.cell(i, t)[c[i][t]];
        ops[i] = o.t_op;
        for (std::size_t r = 0; r < R; ++r) res[r] += o.res[r];
      }
      util += g.temperature_utility(t, ops);
    }
    return std::make_pair(violation(res, g.limits()), util);
  };
  auto better = [](std::pair<double, double> a, std::pair<double, double> b) {
    if (a.first < b.first - 1e-12) return true;
    if (a.first > b.first + 1e-12) return false;
    return a.second > b.second + 1e-12 * std::max(1.0, std::abs(b.second));
  };
  auto cur = score(choice);
  for (int round = 0; round < 200; ++round) {
    bool changed = false;
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t keep = choice[i][t];
        std::size_t best_o = keep;
        auto best_s = cur;
        for (std::size_t o = 0; o < g.cell(i, t).size(); ++o) {
          if (o == keep) continue;
          choice[i][t] = o;
          auto s = score(choice);
          if (better(s, best_s)) {
            best_s = s;
            best_o = o;
          }
        }
        choice[i][t] = best_o;
        if (best_o != keep) {
          cur = best_s;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  return choice;
}

}  // namespace detail

/// Best feasible placement on a simplex grid of `grid_step`, found exactly by
/// per-temperature enumeration and Pareto merging when small enough and by
/// coordinate descent otherwise, then refined at step/5.
inline SolveResult solve(const Workload& w, const HardwareSpec& hw, const SolveOptions& opt = {}) {
  w.validate();
  hw.validate();
  const std::size_t I = w.istreams.size();
  const std::size_t T = w.temperatures.size();
  const detail::GridModel g(w, hw, opt.grid_step);
  const std::size_t R = g.limits().size();

  bool exact = true;
  for (std::size_t t = 0; t < T && exact; ++t) {
    double joint = 1.0;
    for (std::size_t i = 0; i < I; ++i) joint *= double(g.cell(i, t).size());
    exact = joint <= double(opt.exact_limit);
  }

  std::vector<std::vector<std::size_t>> choice(I, std::vector<std::size_t>(T, 0));
  std::vector<std::vector<std::vector<std::size_t>>> joint_index(T);
  if (exact) {
    std::vector<std::vector<detail::Partial>> per_t(T);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<std::size_t> idx(I, 0);
      while (true) {
        detail::Partial x;
        x.res.assign(R, 0.0);
        std::vector<double> ops(I);
        for (std::size_t i = 0; i < I; ++i) {
          const auto& o = g.cell(i, t)[idx[i]];
          ops[i] = o.t_op;
          for (std::size_t r = 0; r < R; ++r) x.res[r] += o.res[r];
        }
        if (g.fits(x.res)) {
          x.util = g.temperature_utility(t, ops);
          x.code = {joint_index[t].size()};
          joint_index[t].push_back(idx);
          per_t[t].push_back(std::move(x));
        }
        bool more = false;
        for (std::size_t k = I; k-- > 0;) {
          if (++idx[k] < g.cell(k, t).size()) {
            more = true;
            break;
          }
          idx[k] = 0;
        }
        if (!more) break;
      }
      if (per_t[t].empty()) throw Error(ErrorCode::Infeasible, "no placement fits temperature " + w.temperatures[t].name);
      detail::pareto_prune(per_t[t]);
    }
    std::vector<detail::Partial> acc = std::move(per_t[0]);
    for (std::size_t t = 1; t < T && exact; ++t) {
      if (double(acc.size()) * double(per_t[t].size()) > double(opt.merge_limit)) {
        exact = false;
        break;
      }
      std::vector<detail::Partial> next;
      for (const auto& a : acc) {
        for (const auto& b : per_t[t]) {
          detail::Partial x;
          x.res.resize(R);
          for (std::size_t r = 0; r < R; ++r) x.res[r] = a.res[r] + b.res[r];
          if (!g.fits(x.res)) continue;
          x.util = a.util + b.util;
          x.code = a.code;
          x.code.push_back(b.code.front());
          next.push_back(std::move(x));
        }
      }
      if (next.empty()) throw Error(ErrorCode::Infeasible, "no placement satisfies the capacity and write limits");
      if (t + 1 < T) detail::pareto_prune(next);
      acc = std::move(next);
    }
    if (exact) {
      const detail::Partial* best = nullptr;
      for (const auto& x : acc) {
        if (!best || x.util > best->util) best = &x;
      }
      for (std::size_t t = 0; t < T; ++t) {
        const auto& idx = joint_index[t][best->code[t]];
        for (std::size_t i = 0; i < I; ++i) choice[i][t] = idx[i];
      }
    }
  }
  if (!exact) {
    // Start from the option with the smallest relative footprint per cell.
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t t = 0; t < T; ++t) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < g.cell(i, t).size(); ++o) {
          double f = 0.0;
          for (std::size_t r = 0; r < R; ++r) f = std::max(f, g.cell(i, t)[o].res[r] / g.limits()[r]);
          if (f < best) {
            best = f;
            choice[i][t] = o;
          }
        }
      }
    }
    choice = detail::descend(g, w, std::move(choice));
  }

  SolveResult out;
  out.exact = exact;
  out.policy = g.build(choice);
  if (!check_constraints(out.policy, w, hw).feasible()) {
    throw Error(ErrorCode::Infeasible, "no placement satisfies the capacity and write limits");
  }
  out.grid_utility = t_all(out.policy, w, hw);
  if (opt.refine) out.policy = detail::refine_policy(out.policy, w, hw, opt.grid_step / 5.0);
  out.utility = t_all(out.policy, w, hw);
  return out;
}

}  // namespace vidplan
