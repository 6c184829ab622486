#pragma once

// Discrete-event model of the store at runtime. Ingestion, retrieval and
// migration requests are cut into chunk-sized tasks that hold tier and codec
// devices; a scheduler dispatches them by class-weighted priority, paces
// retrieval by per-query watermarks and protects the ingestion buffer.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vidplan/error.hpp"
#include "vidplan/perfmodel.hpp"
#include "vidplan/planner.hpp"
#include "vidplan/text.hpp"

namespace vidplan {

enum class Service { Migration = 1, Retrieval = 2, Ingestion = 3 };
enum class Op { Load, Store, Decode, Encode };

inline const char* service_name(Service s) {
  switch (s) {
    case Service::Migration: return "migration";
    case Service::Retrieval: return "retrieval";
    case Service::Ingestion: return "ingestion";
  }
  return "?";
}

struct SimWeights {
  double service = 1e9;
  double resource = 1e3;

  void validate() const {
    if (!(resource > 0 && std::isfinite(service) && service >= 1000 * resource)) {
      throw Error(ErrorCode::WeightViolation, "service weight must be at least 1000x the resource weight");
    }
  }
};

struct PrimitiveTask {
  Service service = Service::Migration;
  std::vector<std::pair<Op, std::size_t>> steps;  // operation and device
  std::size_t owner = 0;                         // feed, query input or migration job
  std::size_t chunk = 0;
  double size_mb = 0.0;
  double duration = 0.0;
  std::uint64_t t = 0;  // arrival order, from 1
};

/// P = T_s * W_service + T_r * W_resource - t.
inline double priority(const PrimitiveTask& x, bool device_idle, const SimWeights& w) {
  w.validate();
  return static_cast<double>(static_cast<int>(x.service)) * w.service + (device_idle ? w.resource : 0.0) -
         static_cast<double>(x.t);
}

struct IngestFeed {
  std::size_t istream = 0;
  std::size_t tier = 0;
  bool encoded = true;
};

struct StreamSource {
  std::size_t istream = 0;
  std::size_t tier = 0;
  bool encoded = true;
};

struct RetrievalQuery {
  std::string name;
  std::vector<StreamSource> inputs;
  double footage = 0.0;  // video-seconds read from each input
  double start = 0.0;
};

struct MigrationJob {
  std::size_t istream = 0;
  std::size_t src = 0;
  bool src_encoded = true;
  std::size_t dst = 0;
  bool dst_encoded = true;
  double seconds = 0.0;  // video-seconds moved
  double release = 0.0;
};

struct SimPolicy {
  SimWeights weights;
  double pause_chunks = 2;          // retrieval pauses this far ahead of the most lagged input
  std::size_t ingest_buffer_chunks = 4;  // backlog above this reserves devices for ingestion
  std::size_t outstanding_target = 2;    // dispatched requests kept per device
};

struct Scenario {
  HardwareSpec hw;
  std::vector<IStream> istreams;
  double fps = 30;
  double chunk_seconds = 8;
  std::vector<IngestFeed> ingest;
  std::vector<RetrievalQuery> queries;
  std::vector<MigrationJob> migrations;
  bool serial_migration = true;
  double arrival_jitter = 0.0;  // seconds, uniform per ingested chunk
  std::uint64_t seed = 0;
  SimPolicy policy;

  std::size_t codec_device() const { return hw.tiers.size(); }

  std::string device_name(std::size_t d) const {
    return d < hw.tiers.size() ? hw.tiers[d].name : hw.codec.name;
  }

  void validate() const {
    auto bad = [](const std::string& m) { return Error(ErrorCode::ScenarioInvalid, m); };
    if (hw.tiers.empty()) throw bad("scenario has no tiers");
    for (const auto& t : hw.tiers) {
      if (!(t.read_bw > 0 && t.write_bw > 0)) throw bad("tier " + t.name + " needs positive bandwidth");
    }
    if (!(fps > 0 && chunk_seconds > 0 && arrival_jitter >= 0)) throw bad("fps, chunk length and jitter out of range");
    if (!(policy.pause_chunks >= 0) || policy.outstanding_target == 0) throw bad("scheduler policy out of range");
    policy.weights.validate();
    for (const auto& is : istreams) {
      if (!(is.encoded_bitrate > 0 && is.raw_bitrate > 0)) throw bad("istream " + is.name + " needs positive bitrates");
    }
    const bool has_decode = hw.codec.decode_bw > 0;
    const bool has_encode = hw.codec.transcode_bw > 0;
    auto check = [&](std::size_t is, std::size_t tier, const std::string& what) {
      if (is >= istreams.size()) throw bad(what + " references istream " + std::to_string(is));
      if (tier >= hw.tiers.size()) throw bad(what + " references tier " + std::to_string(tier));
    };
    for (const auto& f : ingest) {
      check(f.istream, f.tier, "ingest feed");
      if (!f.encoded && !has_decode) throw bad("raw ingest needs a decoder");
    }
    for (const auto& q : queries) {
      if (q.inputs.empty() || !(q.footage > 0) || !(q.start >= 0)) throw bad("query " + q.name + " is empty");
      for (const auto& s : q.inputs) check(s.istream, s.tier, "query " + q.name);
    }
    for (const auto& m : migrations) {
      check(m.istream, m.src, "migration");
      check(m.istream, m.dst, "migration");
      if (!(m.seconds > 0 && m.release >= 0)) throw bad("migration volume must be positive");
      if (m.src_encoded && !m.dst_encoded && !has_decode) throw bad("migration to raw needs a decoder");
      if (!m.src_encoded && m.dst_encoded && !has_encode) throw bad("migration to encoded needs an encoder");
      if (m.src == m.dst && m.src_encoded == m.dst_encoded) throw bad("migration onto itself");
    }
  }
};

struct SimMetrics {
  double ingest_buffer_peak_mb = 0.0;
  std::size_t ingest_backlog_peak = 0;  // chunks
  double ingest_latency_peak = 0.0;     // arrival to stored, seconds
  std::vector<double> watermark_spread;  // per query, video-seconds
  std::vector<std::optional<double>> query_completion;
  std::vector<std::optional<double>> migration_start;
  std::vector<std::optional<double>> migration_completion;
  std::vector<double> utilization;         // per device over the horizon
  std::array<std::size_t, 3> completed{};  // migration, retrieval, ingestion
  std::size_t events = 0;
  std::size_t device_overlaps = 0;
  std::size_t class_inversions = 0;

  bool operator==(const SimMetrics&) const = default;
};

struct TraceEntry {
  std::size_t device = 0;
  Service service = Service::Migration;
  std::size_t owner = 0;
  std::size_t chunk = 0;
  std::uint64_t t = 0;
  double start = 0.0;
  double end = 0.0;
};

struct SimResult {
  SimMetrics metrics;
  std::vector<TraceEntry> trace;
};

namespace detail {

class Simulator {
 public:
  Simulator(const Scenario& sc, double horizon, bool trace) : sc_(sc), horizon_(horizon), tracing_(trace) {
    sc.validate();
    if (!(horizon > 0)) throw Error(ErrorCode::ScenarioInvalid, "horizon must be positive");
    devices_.resize(sc.hw.tiers.size() + 1);
    for (const auto& q : sc.queries) {
      std::vector<Input> in(q.inputs.size());
      for (auto& x : in) {
        x.chunks = chunk_count(q.footage);
        x.done.assign(x.chunks, false);
      }
      inputs_.push_back(std::move(in));
    }
    jobs_.resize(sc.migrations.size());
    for (std::size_t j = 0; j < jobs_.size(); ++j) jobs_[j].chunks = chunk_count(sc.migrations[j].seconds);
    auto& m = result_.metrics;
    m.watermark_spread.assign(sc.queries.size(), 0.0);
    m.query_completion.assign(sc.queries.size(), std::nullopt);
    m.migration_start.assign(sc.migrations.size(), std::nullopt);
    m.migration_completion.assign(sc.migrations.size(), std::nullopt);
    m.utilization.assign(devices_.size(), 0.0);
  }

  SimResult run() {
    std::mt19937_64 rng(sc_.seed);
    for (std::size_t f = 0; f < sc_.ingest.size(); ++f) {
      for (std::size_t k = 0; (k + 1) * sc_.chunk_seconds <= horizon_; ++k) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        push(static_cast<double>(k + 1) * sc_.chunk_seconds + u * sc_.arrival_jitter, Kind::Arrival, f, k);
      }
    }
    for (std::size_t q = 0; q < sc_.queries.size(); ++q) push(sc_.queries[q].start, Kind::QueryStart, q, 0);
    for (std::size_t j = 0; j < sc_.migrations.size(); ++j) push(sc_.migrations[j].release, Kind::Release, j, 0);

    while (!events_.empty() && events_.top().time <= horizon_) {
      now_ = events_.top().time;
      while (!events_.empty() && events_.top().time == now_) {
        const Event e = events_.top();
        events_.pop();
        handle(e);
        ++result_.metrics.events;
      }
      dispatch_round();
      start_round();
      check_invariants();
    }
    for (auto id : active_) {
      const auto& x = tasks_[id];
      for (const auto& [op, d] : x.steps) devices_[d].busy += std::max(0.0, horizon_ - start_[id]);
    }
    for (std::size_t d = 0; d < devices_.size(); ++d) {
      result_.metrics.utilization[d] = devices_[d].busy / horizon_;
    }
    return std::move(result_);
  }

 private:
  enum class Kind { Arrival, QueryStart, Release, Complete };
  enum class State { Ready, Waiting, Active, Done };

  struct Event {
    double time;
    std::uint64_t seq;
    Kind kind;
    std::size_t a;
    std::size_t b;
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };

  struct Device {
    std::optional<std::size_t> active;
    std::vector<std::size_t> waiting;
    double busy = 0.0;
  };

  struct Input {
    std::size_t chunks = 0;
    std::size_t next = 0;       // next chunk to request
    std::size_t watermark = 0;  // contiguous loaded chunks
    std::vector<bool> done;
  };

  struct Job {
    std::size_t chunks = 0;
    std::size_t next = 0;
    std::size_t completed = 0;
    bool released = false;
    bool active = false;
  };

  std::size_t chunk_count(double seconds) const {
    return static_cast<std::size_t>(std::ceil(seconds / sc_.chunk_seconds - 1e-9));
  }

  double chunk_length(double total, std::size_t k) const {
    return std::min(sc_.chunk_seconds, total - static_cast<double>(k) * sc_.chunk_seconds);
  }

  void push(double time, Kind kind, std::size_t a, std::size_t b) {
    events_.push({time, seq_++, kind, a, b});
  }

  double op_time(Op op, std::size_t device, std::size_t is, bool encoded, double seconds) const {
    const double mb = seconds * detail::stored_bitrate(sc_.istreams[is], encoded);
    switch (op) {
      case Op::Load: return mb / sc_.hw.tiers[device].read_bw;
      case Op::Store: return mb / sc_.hw.tiers[device].write_bw;
      case Op::Decode: return seconds * sc_.fps / sc_.hw.codec.decode_bw;
      case Op::Encode: return seconds * sc_.fps / sc_.hw.codec.transcode_bw;
    }
    return 0.0;
  }

  // Steps sharing a device run on it together, so a device appears once and
  // the task lasts as long as its slowest step.
  std::size_t make_task(Service s, std::size_t owner, std::size_t chunk, double size_mb,
                        const std::vector<std::pair<Op, std::size_t>>& steps, const std::vector<double>& times) {
    PrimitiveTask x;
    x.service = s;
    x.owner = owner;
    x.chunk = chunk;
    x.size_mb = size_mb;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      x.duration = std::max(x.duration, times[k]);
      const bool seen = std::any_of(x.steps.begin(), x.steps.end(),
                                    [&](const auto& st) { return st.second == steps[k].second; });
      if (!seen) x.steps.push_back(steps[k]);
    }
    x.t = next_t_++;
    if (static_cast<double>(x.t) >= sc_.policy.weights.service - sc_.policy.weights.resource) {
      throw Error(ErrorCode::ScenarioInvalid, "request count exceeds the priority weight separation");
    }
    tasks_.push_back(std::move(x));
    state_.push_back(State::Ready);
    key_.push_back(0.0);
    arrival_.push_back(now_);
    start_.push_back(0.0);
    spawned_.push_back(false);
    ready_.push_back(tasks_.size() - 1);
    return tasks_.size() - 1;
  }

  void spawn_ingest(std::size_t f, std::size_t k) {
    const auto& feed = sc_.ingest[f];
    const double len = sc_.chunk_seconds;
    const double mb = len * sc_.istreams[feed.istream].encoded_bitrate;
    std::vector<std::pair<Op, std::size_t>> steps;
    std::vector<double> times;
    if (!feed.encoded) {
      steps.push_back({Op::Decode, sc_.codec_device()});
      times.push_back(op_time(Op::Decode, sc_.codec_device(), feed.istream, true, len));
    }
    steps.push_back({Op::Store, feed.tier});
    times.push_back(op_time(Op::Store, feed.tier, feed.istream, feed.encoded, len));
    make_task(Service::Ingestion, f, k, mb, steps, times);
    ++backlog_;
    buffer_mb_ += mb;
    auto& m = result_.metrics;
    m.ingest_backlog_peak = std::max(m.ingest_backlog_peak, backlog_);
    m.ingest_buffer_peak_mb = std::max(m.ingest_buffer_peak_mb, buffer_mb_);
  }

  std::size_t input_owner(std::size_t q, std::size_t i) const {
    std::size_t base = 0;
    for (std::size_t k = 0; k < q; ++k) base += sc_.queries[k].inputs.size();
    return base + i;
  }

  std::pair<std::size_t, std::size_t> input_of(std::size_t owner) const {
    for (std::size_t q = 0; q < sc_.queries.size(); ++q) {
      if (owner < sc_.queries[q].inputs.size()) return {q, owner};
      owner -= sc_.queries[q].inputs.size();
    }
    return {sc_.queries.size(), 0};
  }

  void spawn_retrieval(std::size_t q, std::size_t i) {
    auto& in = inputs_[q][i];
    if (in.next >= in.chunks) return;
    const auto& src = sc_.queries[q].inputs[i];
    const double len = chunk_length(sc_.queries[q].footage, in.next);
    const double mb = len * detail::stored_bitrate(sc_.istreams[src.istream], src.encoded);
    make_task(Service::Retrieval, input_owner(q, i), in.next, mb, {{Op::Load, src.tier}},
              {op_time(Op::Load, src.tier, src.istream, src.encoded, len)});
    ++in.next;
  }

  void spawn_migration(std::size_t j) {
    auto& job = jobs_[j];
    if (job.next >= job.chunks) return;
    const auto& m = sc_.migrations[j];
    const double len = chunk_length(m.seconds, job.next);
    std::vector<std::pair<Op, std::size_t>> steps{{Op::Load, m.src}};
    std::vector<double> times{op_time(Op::Load, m.src, m.istream, m.src_encoded, len)};
    if (m.src_encoded != m.dst_encoded) {
      const Op op = m.src_encoded ? Op::Decode : Op::Encode;
      steps.push_back({op, sc_.codec_device()});
      times.push_back(op_time(op, sc_.codec_device(), m.istream, m.src_encoded, len));
    }
    steps.push_back({Op::Store, m.dst});
    times.push_back(op_time(Op::Store, m.dst, m.istream, m.dst_encoded, len));
    const double mb = len * detail::stored_bitrate(sc_.istreams[m.istream], m.src_encoded);
    make_task(Service::Migration, j, job.next, mb, steps, times);
    ++job.next;
  }

  void try_activate(std::size_t j) {
    auto& job = jobs_[j];
    if (!job.released || job.active) return;
    if (sc_.serial_migration && j > 0 && !result_.metrics.migration_completion[j - 1]) return;
    job.active = true;
    result_.metrics.migration_start[j] = now_;
    spawn_migration(j);
  }

  void handle(const Event& e) {
    switch (e.kind) {
      case Kind::Arrival: spawn_ingest(e.a, e.b); break;
      case Kind::QueryStart:
        query_started_.push_back(e.a);
        for (std::size_t i = 0; i < sc_.queries[e.a].inputs.size(); ++i) spawn_retrieval(e.a, i);
        break;
      case Kind::Release:
        jobs_[e.a].released = true;
        try_activate(e.a);
        break;
      case Kind::Complete: complete(e.a); break;
    }
  }

  void complete(std::size_t id) {
    const auto& x = tasks_[id];
    state_[id] = State::Done;
    active_.erase(std::find(active_.begin(), active_.end(), id));
    for (const auto& [op, d] : x.steps) {
      devices_[d].active.reset();
      devices_[d].busy += std::min(now_, horizon_) - start_[id];
    }
    auto& m = result_.metrics;
    ++m.completed[static_cast<int>(x.service) - 1];
    if (x.service == Service::Ingestion) {
      --backlog_;
      m.ingest_latency_peak = std::max(m.ingest_latency_peak, now_ - arrival_[id]);
      buffer_mb_ = backlog_ == 0 ? 0.0 : buffer_mb_ - x.size_mb;
    } else if (x.service == Service::Retrieval) {
      const auto [q, i] = input_of(x.owner);
      auto& in = inputs_[q][i];
      in.done[x.chunk] = true;
      while (in.watermark < in.chunks && in.done[in.watermark]) ++in.watermark;
      bool all = true;
      for (const auto& other : inputs_[q]) all = all && other.watermark == other.chunks;
      if (all) m.query_completion[q] = now_;
    } else {
      auto& job = jobs_[x.owner];
      if (++job.completed == job.chunks) {
        m.migration_completion[x.owner] = now_;
        if (sc_.serial_migration && x.owner + 1 < jobs_.size()) try_activate(x.owner + 1);
      }
    }
  }

  double watermark_seconds(std::size_t q, std::size_t i) const {
    return std::min(sc_.queries[q].footage, static_cast<double>(inputs_[q][i].watermark) * sc_.chunk_seconds);
  }

  double lagged_watermark(std::size_t q) const {
    double w = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inputs_[q].size(); ++i) w = std::min(w, watermark_seconds(q, i));
    return w;
  }

  bool urgent() const { return backlog_ > sc_.policy.ingest_buffer_chunks; }

  std::vector<bool> ingest_devices() const {
    std::vector<bool> out(devices_.size(), false);
    for (auto id : ready_) {
      if (tasks_[id].service != Service::Ingestion) continue;
      for (const auto& st : tasks_[id].steps) out[st.second] = true;
    }
    return out;
  }

  bool eligible(std::size_t id, bool urgent_mode, const std::vector<bool>& reserved) const {
    const auto& x = tasks_[id];
    if (x.service == Service::Retrieval) {
      const auto [q, i] = input_of(x.owner);
      const double from = static_cast<double>(x.chunk) * sc_.chunk_seconds;
      if (from - lagged_watermark(q) > sc_.policy.pause_chunks * sc_.chunk_seconds + 1e-9) return false;
    }
    if (urgent_mode && x.service != Service::Ingestion) {
      for (const auto& st : x.steps) {
        if (reserved[st.second]) return false;
      }
    }
    return true;
  }

  std::size_t occupancy(std::size_t d) const {
    return (devices_[d].active ? 1 : 0) + devices_[d].waiting.size();
  }

  std::optional<std::size_t> evictable(std::size_t d, Service s) const {
    std::optional<std::size_t> out;
    for (auto w : devices_[d].waiting) {
      if (tasks_[w].service >= s) continue;
      if (!out || key_[w] < key_[*out]) out = w;
    }
    return out;
  }

  bool dispatchable(std::size_t id) const {
    for (const auto& [op, d] : tasks_[id].steps) {
      if (occupancy(d) < sc_.policy.outstanding_target) continue;
      if (!evictable(d, tasks_[id].service)) return false;
    }
    return true;
  }

  bool devices_idle(std::size_t id) const {
    for (const auto& st : tasks_[id].steps) {
      if (devices_[st.second].active) return false;
    }
    return true;
  }

  void unqueue(std::size_t id) {
    for (const auto& st : tasks_[id].steps) {
      auto& w = devices_[st.second].waiting;
      w.erase(std::find(w.begin(), w.end(), id));
    }
  }

  void dispatch(std::size_t id, double p) {
    for (const auto& [op, d] : tasks_[id].steps) {
      if (occupancy(d) < sc_.policy.outstanding_target) continue;
      const auto victim = *evictable(d, tasks_[id].service);
      unqueue(victim);
      state_[victim] = State::Ready;
      ready_.push_back(victim);
    }
    ready_.erase(std::find(ready_.begin(), ready_.end(), id));
    for (const auto& st : tasks_[id].steps) devices_[st.second].waiting.push_back(id);
    state_[id] = State::Waiting;
    key_[id] = p;
    if (!spawned_[id]) {
      spawned_[id] = true;
      const auto& x = tasks_[id];
      if (x.service == Service::Retrieval) {
        const auto [q, i] = input_of(x.owner);
        spawn_retrieval(q, i);
      } else if (x.service == Service::Migration) {
        spawn_migration(x.owner);
      }
    }
  }

  void dispatch_round() {
    while (true) {
      const bool u = urgent();
      const auto reserved = u ? ingest_devices() : std::vector<bool>(devices_.size(), false);
      std::optional<std::size_t> best;
      double best_p = 0.0;
      for (auto id : ready_) {
        if (!eligible(id, u, reserved) || !dispatchable(id)) continue;
        const double p = priority(tasks_[id], devices_idle(id), sc_.policy.weights);
        if (!best || p > best_p || (p == best_p && id < *best)) {
          best = id;
          best_p = p;
        }
      }
      if (!best) break;
      dispatch(*best, best_p);
    }
  }

  // A ready, eligible task of a higher class that needs one of these devices.
  bool outranked(std::size_t id) const {
    const bool u = urgent();
    const auto reserved = u ? ingest_devices() : std::vector<bool>(devices_.size(), false);
    for (auto r : ready_) {
      if (tasks_[r].service <= tasks_[id].service || !eligible(r, u, reserved)) continue;
      for (const auto& a : tasks_[r].steps) {
        for (const auto& b : tasks_[id].steps) {
          if (a.second == b.second) return true;
        }
      }
    }
    return false;
  }

  bool heads_all(std::size_t id) const {
    for (const auto& st : tasks_[id].steps) {
      const auto& d = devices_[st.second];
      if (d.active) return false;
      for (auto w : d.waiting) {
        if (w != id && (key_[w] > key_[id] || (key_[w] == key_[id] && w < id))) return false;
      }
    }
    return true;
  }

  void start_round() {
    std::vector<std::size_t> waiting;
    for (const auto& d : devices_) waiting.insert(waiting.end(), d.waiting.begin(), d.waiting.end());
    std::sort(waiting.begin(), waiting.end());
    waiting.erase(std::unique(waiting.begin(), waiting.end()), waiting.end());
    std::sort(waiting.begin(), waiting.end(), [&](std::size_t a, std::size_t b) {
      return key_[a] != key_[b] ? key_[a] > key_[b] : a < b;
    });
    for (auto id : waiting) {
      if (!heads_all(id) || outranked(id)) continue;
      unqueue(id);
      state_[id] = State::Active;
      start_[id] = now_;
      active_.push_back(id);
      const auto& x = tasks_[id];
      for (const auto& [op, d] : x.steps) {
        devices_[d].active = id;
        if (tracing_) result_.trace.push_back({d, x.service, x.owner, x.chunk, x.t, now_, now_ + x.duration});
      }
      push(now_ + x.duration, Kind::Complete, id, 0);
    }
  }

  void check_invariants() {
    auto& m = result_.metrics;
    std::vector<std::size_t> holders(devices_.size(), 0);
    for (auto id : active_) {
      for (const auto& st : tasks_[id].steps) ++holders[st.second];
    }
    for (auto h : holders) m.device_overlaps += h > 1;
    for (auto id : active_) {
      if (start_[id] == now_ && outranked(id)) ++m.class_inversions;
    }
    for (auto q : query_started_) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = 0.0;
      for (std::size_t i = 0; i < inputs_[q].size(); ++i) {
        lo = std::min(lo, watermark_seconds(q, i));
        hi = std::max(hi, watermark_seconds(q, i));
      }
      m.watermark_spread[q] = std::max(m.watermark_spread[q], hi - lo);
    }
  }

  const Scenario& sc_;
  double horizon_;
  bool tracing_;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
  std::uint64_t next_t_ = 1;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::vector<PrimitiveTask> tasks_;
  std::vector<State> state_;
  std::vector<double> key_;
  std::vector<double> start_;
  std::vector<double> arrival_;
  std::vector<bool> spawned_;
  std::vector<std::size_t> ready_;
  std::vector<std::size_t> active_;
  std::vector<Device> devices_;
  std::vector<std::vector<Input>> inputs_;
  std::vector<std::size_t> query_started_;
  std::vector<Job> jobs_;
  std::size_t backlog_ = 0;
  double buffer_mb_ = 0.0;
  SimResult result_;
};

}  // namespace detail

inline SimResult simulate(const Scenario& sc, double horizon, bool trace = false) {
  return detail::Simulator(sc, horizon, trace).run();
}

inline SimMetrics run(const Scenario& sc, double horizon) { return simulate(sc, horizon).metrics; }

inline std::string metrics_csv(const SimMetrics& m, const Scenario& sc) {
  std::ostringstream out;
  auto opt = [](const std::optional<double>& v) { return v ? text::fixed(*v, 6) : std::string("NA"); };
  out << "metric,key,value\n";
  out << "ingest_buffer_peak_mb,," << text::fixed(m.ingest_buffer_peak_mb, 6) << "\n";
  out << "ingest_backlog_peak,," << m.ingest_backlog_peak << "\n";
  out << "ingest_latency_peak,," << text::fixed(m.ingest_latency_peak, 6) << "\n";
  for (std::size_t q = 0; q < m.watermark_spread.size(); ++q) {
    out << "watermark_spread," << sc.queries[q].name << "," << text::fixed(m.watermark_spread[q], 6) << "\n";
  }
  for (std::size_t q = 0; q < m.query_completion.size(); ++q) {
    out << "query_completion," << sc.queries[q].name << "," << opt(m.query_completion[q]) << "\n";
  }
  for (std::size_t j = 0; j < m.migration_completion.size(); ++j) {
    out << "migration_start," << j << "," << opt(m.migration_start[j]) << "\n";
    out << "migration_completion," << j << "," << opt(m.migration_completion[j]) << "\n";
  }
  for (std::size_t d = 0; d < m.utilization.size(); ++d) {
    out << "utilization," << sc.device_name(d) << "," << text::fixed(m.utilization[d], 6) << "\n";
  }
  for (auto s : {Service::Ingestion, Service::Retrieval, Service::Migration}) {
    out << "completed," << service_name(s) << "," << m.completed[static_cast<int>(s) - 1] << "\n";
  }
  out << "events,," << m.events << "\n";
  out << "device_overlaps,," << m.device_overlaps << "\n";
  out << "class_inversions,," << m.class_inversions << "\n";
  return out.str();
}

struct ReplayReport {
  std::vector<double> planned_duration;  // in schedule order
  std::vector<double> simulated_duration;
  std::vector<double> planned_end;
  std::vector<double> simulated_end;
  double max_duration_error = 0.0;  // relative
  double max_completion_error = 0.0;
  bool order_matches = true;
  std::vector<std::pair<double, double>> trajectory;  // simulated (time, utility)
  double planned_integrated = 0.0;
  double simulated_integrated = 0.0;  // both over the planned makespan
};

/// Replays a serial migration schedule on the simulator.
inline ReplayReport validate_schedule(const std::vector<MigrationTask>& tasks, const MigrationSchedule& schedule,
                                      const Workload& w, const HardwareSpec& hw, double start_utility = 0.0,
                                      const SimPolicy& policy = {}) {
  auto bad = [](const std::string& m) { return Error(ErrorCode::MappingError, m); };
  Scenario sc;
  sc.hw = hw;
  sc.istreams = w.istreams;
  sc.fps = w.fps;
  sc.policy = policy;
  std::vector<bool> seen(tasks.size(), false);
  for (const auto& st : schedule.order) {
    if (st.task >= tasks.size() || seen[st.task]) throw bad("schedule entry " + std::to_string(st.task) + " does not map to a task");
    seen[st.task] = true;
    const auto& x = tasks[st.task];
    if (x.istream >= w.istreams.size() || x.temperature >= w.temperatures.size()) throw bad("task outside the workload");
    if (x.src >= hw.tiers.size() || x.dst >= hw.tiers.size()) throw bad("task tier outside the hardware");
    if (x.transcode && !((x.dst_encoded ? hw.codec.transcode_bw : hw.codec.decode_bw) > 0)) {
      throw bad("transcoding task without a codec");
    }
    sc.migrations.push_back({x.istream, x.src, x.src_encoded, x.dst, x.dst_encoded,
                             x.fraction * w.temperatures[x.temperature].span, 0.0});
  }
  ReplayReport r;
  if (schedule.order.empty()) return r;
  try {
    sc.validate();
  } catch (const Error& e) {
    throw bad(e.what());
  }
  const double horizon = 2 * schedule.makespan + 2 * sc.chunk_seconds;
  const auto m = run(sc, horizon);
  double u = start_utility;
  r.trajectory.push_back({0.0, u});
  double last_end = 0.0;
  for (std::size_t k = 0; k < schedule.order.size(); ++k) {
    const auto& st = schedule.order[k];
    if (!m.migration_completion[k]) throw bad("task " + std::to_string(st.task) + " did not finish");
    const double start = *m.migration_start[k];
    const double end = *m.migration_completion[k];
    r.planned_duration.push_back(st.end - st.start);
    r.simulated_duration.push_back(end - start);
    r.planned_end.push_back(st.end);
    r.simulated_end.push_back(end);
    r.max_duration_error = std::max(r.max_duration_error, std::abs(end - start - (st.end - st.start)) / (st.end - st.start));
    r.max_completion_error = std::max(r.max_completion_error, std::abs(end - st.end) / st.end);
    if (end < last_end) r.order_matches = false;
    last_end = end;
    u += tasks[st.task].reward;
    r.trajectory.push_back({end, u});
  }
  MigrationSchedule sim;
  sim.trajectory = r.trajectory;
  r.planned_integrated = integrated_utility(schedule, schedule.makespan);
  r.simulated_integrated = integrated_utility(sim, schedule.makespan);
  return r;
}

}  // namespace vidplan
