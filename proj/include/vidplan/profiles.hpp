#pragma once

// Profile tables for operators (accuracy, consumption speed per fidelity) and
// codecs (encode cost, decode speed, bitrate per storage format), with
// memoized query accounting, a synthetic generator and a CSV file format.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vidplan/error.hpp"
#include "vidplan/knobspace.hpp"
#include "vidplan/text.hpp"

namespace vidplan {

inline constexpr double kInfiniteSpeed = std::numeric_limits<double>::infinity();

struct OperatorPoint {
  double accuracy = 0.0;
  double consumption_speed = 0.0;  // x realtime

  bool operator==(const OperatorPoint&) const = default;
};

/// Decode speed is stored at sampling interval 1 and adjusted on query.
struct CodingPoint {
  double encode_cost = 0.0;   // cores per ingested stream
  double decode_speed = 0.0;  // x realtime, +inf for raw
  double bitrate = 0.0;       // MB per video-second

  bool operator==(const CodingPoint&) const = default;
};

/// Parameters of the cost model that are shared by every store: the ingest
/// frame rate and the cap on the keyframe-skip decoding gain.
struct CodecModel {
  double ingest_fps = 30.0;
  double max_skip_gain = 6.0;
};

/// Keyframe skipping: a consumer that samples every `sampling_interval`-th
/// stored frame can skip whole chunks once the interval reaches the keyframe
/// interval.
inline double skip_gain(double sampling_interval, double keyframe_interval,
                        double max_gain) {
  if (sampling_interval < keyframe_interval) return 1.0;
  return std::clamp(sampling_interval / keyframe_interval, 1.0, max_gain);
}

class ProfileStore {
 public:
  ProfileStore(KnobSpace space, CodecModel model = {})
      : tables_(std::make_shared<Tables>()), cache_(std::make_unique<Cache>()) {
    space.validate();
    tables_->space = std::move(space);
    tables_->model = model;
    tables_->coding.assign(
        tables_->space.fidelity_count() *
            (tables_->space.encoded_coding_count() + 1),
        std::nullopt);
  }

  ProfileStore(const ProfileStore&) = delete;
  ProfileStore& operator=(const ProfileStore&) = delete;
  ProfileStore(ProfileStore&&) noexcept = default;
  ProfileStore& operator=(ProfileStore&&) noexcept = default;

  /// Same tables, empty cache and zeroed run counters.
  ProfileStore fork() const {
    ProfileStore out(tables_);
    std::lock_guard lock(cache_->mu);
    out.cache_->memoize = cache_->memoize;
    return out;
  }

  const KnobSpace& space() const { return tables_->space; }
  const CodecModel& model() const { return tables_->model; }

  std::vector<std::string> operators() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : tables_->ops) out.push_back(id);
    return out;
  }

  bool has_operator(const std::string& id) const {
    return tables_->ops.count(id) != 0;
  }

  void set_operator_point(const std::string& id, const FidelityOption& f,
                          const OperatorPoint& p) {
    detach();
    auto& table = tables_->ops[id];
    if (table.empty()) table.assign(space().fidelity_count(), std::nullopt);
    table.at(space().fidelity_index(f)) = p;
  }

  /// Registers an operator with no points (file-backed stores may do this).
  void add_operator(const std::string& id) {
    detach();
    auto& table = tables_->ops[id];
    if (table.empty()) table.assign(space().fidelity_count(), std::nullopt);
  }

  void set_coding_point(const FidelityOption& f, const CodingOption& c,
                        const CodingPoint& p) {
    detach();
    tables_->coding.at(coding_slot(f, c)) = p;
  }

  OperatorPoint query_operator(const std::string& id,
                               const FidelityOption& f) const {
    auto it = tables_->ops.find(id);
    if (it == tables_->ops.end()) {
      throw Error(ErrorCode::UnknownOperator, "operator '" + id + "'");
    }
    if (!space().contains(f)) {
      throw Error(ErrorCode::DomainMismatch, "fidelity outside knob domains");
    }
    const auto& slot = it->second[space().fidelity_index(f)];
    if (!slot) {
      throw Error(ErrorCode::MissingProfilePoint,
                  "operator '" + id + "' at " + space().describe(f));
    }
    {
      std::lock_guard lock(cache_->mu);
      auto key = std::make_pair(id, space().fidelity_index(f));
      if (!cache_->memoize || cache_->operator_seen.insert(key).second) {
        ++cache_->operator_runs;
      }
    }
    return *slot;
  }

  /// Encode cost, effective decode speed at the given sampling interval (in
  /// stored frames) and bitrate. One profiling run per distinct format.
  CodingPoint query_coding(const FidelityOption& f, const CodingOption& c,
                           double sampling_interval = 1.0) const {
    if (!space().contains(f) || !space().contains(c)) {
      throw Error(ErrorCode::DomainMismatch, "format outside knob domains");
    }
    const auto slot_index = coding_slot(f, c);
    const auto& slot = tables_->coding[slot_index];
    if (!slot) {
      throw Error(ErrorCode::MissingProfilePoint,
                  "coding profile for " +
                      space().describe(StorageFormat{f, c.canonical()}));
    }
    {
      std::lock_guard lock(cache_->mu);
      if (!cache_->memoize || cache_->coding_seen.insert(slot_index).second) {
        ++cache_->coding_runs;
      }
    }
    CodingPoint out = *slot;
    if (!c.bypass) {
      out.decode_speed *=
          skip_gain(std::max(sampling_interval, 1.0),
                    space().keyframe.values[c.keyframe], model().max_skip_gain);
    }
    return out;
  }

  bool has_coding_point(const FidelityOption& f, const CodingOption& c) const {
    return tables_->coding.at(coding_slot(f, c)).has_value();
  }

  std::size_t operator_runs() const {
    std::lock_guard lock(cache_->mu);
    return cache_->operator_runs;
  }

  std::size_t coding_runs() const {
    std::lock_guard lock(cache_->mu);
    return cache_->coding_runs;
  }

  void clear_cache() {
    std::lock_guard lock(cache_->mu);
    cache_->operator_seen.clear();
    cache_->coding_seen.clear();
    cache_->operator_runs = 0;
    cache_->coding_runs = 0;
  }

  /// With memoization off every query counts as a profiling run.
  void set_memoize(bool on) {
    std::lock_guard lock(cache_->mu);
    cache_->memoize = on;
  }

  /// Raw table access for serialization and validation; no run accounting.
  const std::optional<OperatorPoint>& operator_entry(
      const std::string& id, const FidelityOption& f) const {
    return tables_->ops.at(id).at(space().fidelity_index(f));
  }

  const std::optional<CodingPoint>& coding_entry(const FidelityOption& f,
                                                 const CodingOption& c) const {
    return tables_->coding.at(coding_slot(f, c));
  }

  const std::vector<std::string>& warnings() const { return warnings_; }
  void set_warnings(std::vector<std::string> w) { warnings_ = std::move(w); }

 private:
  struct Tables {
    KnobSpace space;
    CodecModel model;
    std::map<std::string, std::vector<std::optional<OperatorPoint>>> ops;
    std::vector<std::optional<CodingPoint>> coding;
  };

  struct Cache {
    std::mutex mu;
    bool memoize = true;
    std::set<std::pair<std::string, std::size_t>> operator_seen;
    std::set<std::size_t> coding_seen;
    std::size_t operator_runs = 0;
    std::size_t coding_runs = 0;
  };

  explicit ProfileStore(std::shared_ptr<Tables> tables)
      : tables_(std::move(tables)), cache_(std::make_unique<Cache>()) {}

  std::size_t coding_slot(const FidelityOption& f, const CodingOption& c) const {
    return space().fidelity_index(f) * (space().encoded_coding_count() + 1) +
           space().coding_index(c.canonical());
  }

  // Copy-on-write: forks share tables until one of them is edited.
  void detach() {
    if (tables_.use_count() > 1) tables_ = std::make_shared<Tables>(*tables_);
  }

  std::shared_ptr<Tables> tables_;
  std::unique_ptr<Cache> cache_;
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Synthetic profiles

/// Accuracy = prod_k (1 - beta_k (1 - x_k)^gamma_k) * (1 - eta (1-x_q)(1-x_r)),
/// x_k the normalized knob position; speed = S0 / (pixels * crop * sampling)
/// relative to the richest option.
struct SyntheticOperatorSpec {
  std::string id;
  double base_speed = 1.0;  // consumption speed at the richest fidelity
  // sampling, resolution, crop, quality
  std::array<double, 4> beta{0.4, 0.4, 0.3, 0.15};
  std::array<double, 4> gamma{2.0, 2.0, 2.0, 2.0};
  double interaction = 0.4;
};

/// Codec-side synthetic parameters (decoder/encoder throughput, compression).
struct SyntheticCodecSpec {
  double bytes_per_pixel = 1.5;
  double decoder_mpix_per_s = 600.0;
  double encoder_mpix_per_core = 4.0;
  double ingest_decode_cores = 0.25;
  double best_quality_ratio = 0.015;
  double quality_step_ratio = 2.5;
  double speed_bitrate_exponent = 0.25;
  double speed_decode_exponent = 0.15;
  double keyframe_overhead = 6.0;
};

inline double synthetic_accuracy(const KnobSpace& k,
                                 const SyntheticOperatorSpec& op,
                                 const FidelityOption& f) {
  const std::array<double, 4> x = k.coordinates(f);
  double acc = 1.0;
  for (std::size_t i = 0; i < 4; ++i) {
    acc *= 1.0 - op.beta[i] * std::pow(1.0 - x[i], op.gamma[i]);
  }
  acc *= 1.0 - op.interaction * (1.0 - x[3]) * (1.0 - x[1]);
  return std::clamp(acc, 0.0, 1.0);
}

inline double synthetic_speed(const KnobSpace& k,
                              const SyntheticOperatorSpec& op,
                              const FidelityOption& f) {
  const double pixels = k.resolution.values[f.resolution] /
                        k.resolution.values.back();
  const double crop = k.crop.values[f.crop] / k.crop.values.back();
  const double sampling = k.sampling.values[f.sampling] /
                          k.sampling.values.back();
  return op.base_speed / (pixels * crop * sampling);
}

inline CodingPoint synthetic_coding(const KnobSpace& k, const CodecModel& m,
                                    const SyntheticCodecSpec& cs,
                                    const FidelityOption& f,
                                    const CodingOption& c) {
  const double frames = m.ingest_fps * k.sampling.values[f.sampling];
  const double res_pixels = k.resolution.values[f.resolution];
  const double pixels = res_pixels * k.crop.values[f.crop];
  const double raw_bitrate = frames * pixels * cs.bytes_per_pixel / 1e6;
  const double mpix_rate = frames * pixels / 1e6;
  if (c.bypass) {
    return {cs.ingest_decode_cores, kInfiniteSpeed, raw_bitrate};
  }
  const double speed = k.speed_step.values[c.speed_step];
  const double kf = k.keyframe.values[c.keyframe];
  const double quality_ratio =
      cs.best_quality_ratio *
      std::pow(cs.quality_step_ratio,
               k.quality.values[f.quality] - k.quality.values.back());
  const double bitrate = raw_bitrate * quality_ratio *
                         std::pow(speed, cs.speed_bitrate_exponent) *
                         (1.0 + cs.keyframe_overhead / kf);
  const double encode =
      cs.ingest_decode_cores + mpix_rate / (cs.encoder_mpix_per_core * speed);
  const double decode = cs.decoder_mpix_per_s *
                        std::pow(speed, cs.speed_decode_exponent) /
                        (frames * res_pixels / 1e6);
  return {encode, decode, bitrate};
}

/// Draws one operator's parameters. Ranges keep the generated tables
/// monotone and keep the quality/resolution interaction visible.
inline SyntheticOperatorSpec random_operator_spec(std::mt19937_64& rng,
                                                  std::string id) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  SyntheticOperatorSpec op;
  op.id = std::move(id);
  op.base_speed = std::exp(in(std::log(0.5), std::log(20.0)));
  op.beta = {in(0.2, 0.6), in(0.2, 0.6), in(0.1, 0.5), in(0.05, 0.2)};
  op.gamma = {in(1.0, 3.0), in(1.0, 3.0), in(1.0, 3.0), in(1.0, 3.0)};
  op.interaction = in(0.3, 0.6);
  return op;
}

/// Six operators shaped like a two-cascade deployment: cheap filters (diff,
/// motion), mid-cost detectors (snn, license) and expensive stages (nn, ocr).
inline std::vector<SyntheticOperatorSpec> reference_operators() {
  return {
      {"diff", 12.9, {0.49, 0.57, 0.40, 0.10}, {1.26, 2.38, 2.18, 1.12}, 0.48},
      {"snn", 1.24, {0.46, 0.48, 0.28, 0.09}, {1.37, 1.63, 2.77, 2.36}, 0.34},
      {"nn", 1.05, {0.26, 0.31, 0.39, 0.06}, {2.33, 1.07, 1.11, 2.85}, 0.34},
      {"motion", 7.3, {0.41, 0.37, 0.29, 0.09}, {2.49, 2.02, 2.65, 2.67}, 0.45},
      {"license", 1.87, {0.33, 0.43, 0.16, 0.08}, {1.48, 1.29, 1.61, 1.23}, 0.46},
      {"ocr", 0.8, {0.49, 0.53, 0.41, 0.10}, {2.58, 1.20, 1.78, 1.20}, 0.40},
  };
}

/// Random operators with the same six roles: accuracy parameters drawn as in
/// random_operator_spec, base speeds drawn from per-role ranges.
inline std::vector<SyntheticOperatorSpec> reference_like_operators(std::uint64_t seed) {
  static constexpr const char* kNames[6] = {"diff", "snn", "nn",
                                            "motion", "license", "ocr"};
  static constexpr double kLo[6] = {4, 0.8, 0.2, 4, 0.3, 0.3};
  static constexpr double kHi[6] = {20, 6, 2, 20, 3, 3};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SyntheticOperatorSpec> ops;
  for (int i = 0; i < 6; ++i) {
    auto op = random_operator_spec(rng, kNames[i]);
    op.base_speed = kLo[i] + (kHi[i] - kLo[i]) * u(rng);
    ops.push_back(op);
  }
  return ops;
}

inline ProfileStore generate_synthetic(
    const KnobSpace& space, const std::vector<SyntheticOperatorSpec>& ops,
    const CodecModel& model = {}, const SyntheticCodecSpec& codec = {}) {
  ProfileStore store(space, model);
  const auto fids = space.fidelities();
  for (const auto& op : ops) {
    store.add_operator(op.id);
    for (const auto& f : fids) {
      store.set_operator_point(
          op.id, f,
          {synthetic_accuracy(space, op, f), synthetic_speed(space, op, f)});
    }
  }
  const auto codings = space.codings();
  for (const auto& f : fids) {
    for (const auto& c : codings) {
      store.set_coding_point(f, c, synthetic_coding(space, model, codec, f, c));
    }
  }
  return store;
}

/// `count` random operators named op0..opN-1, deterministic in `seed`.
inline ProfileStore generate_synthetic(std::uint64_t seed,
                                       const KnobSpace& space,
                                       std::size_t count,
                                       const CodecModel& model = {}) {
  std::mt19937_64 rng(seed);
  std::vector<SyntheticOperatorSpec> ops;
  for (std::size_t i = 0; i < count; ++i) {
    ops.push_back(random_operator_spec(rng, "op" + std::to_string(i)));
  }
  return generate_synthetic(space, ops, model);
}

// ---------------------------------------------------------------------------
// Monotonicity validation

/// Lists single-knob steps where accuracy drops, speed rises on a quantity
/// knob, or speed changes with quality.
inline std::vector<std::string> check_monotonicity(const ProfileStore& store) {
  std::vector<std::string> out;
  const auto& k = store.space();
  for (const auto& id : store.operators()) {
    for (const auto& f : k.fidelities()) {
      const auto& here = store.operator_entry(id, f);
      if (!here) continue;
      for (int knob = 0; knob < 4; ++knob) {
        FidelityOption g = f;
        int* field[4] = {&g.sampling, &g.resolution, &g.crop, &g.quality};
        *field[knob] += 1;
        if (!k.contains(g)) continue;
        const auto& next = store.operator_entry(id, g);
        if (!next) continue;
        const std::string where =
            id + ": " + k.describe(f) + " -> " + k.describe(g);
        if (next->accuracy < here->accuracy) {
          out.push_back(where + " accuracy decreases");
        }
        if (knob == 3) {
          if (next->consumption_speed != here->consumption_speed) {
            out.push_back(where + " speed depends on quality");
          }
        } else if (next->consumption_speed > here->consumption_speed) {
          out.push_back(where + " speed increases with richer fidelity");
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV file format
//
// kind,operator,sampling,resolution,crop,quality,speed_step,keyframe,
//   accuracy,consumption_speed,encode_cost,decode_speed,bitrate
//
// Operator rows leave the coding columns empty; coding rows leave the
// operator columns empty. Raw coding rows use "raw" for both coding knobs and
// "inf" for decode_speed.

inline constexpr const char* kProfileHeader =
    "kind,operator,sampling,resolution,crop,quality,speed_step,keyframe,"
    "accuracy,consumption_speed,encode_cost,decode_speed,bitrate";

inline void save_profiles(const ProfileStore& store, std::ostream& os) {
  const auto& k = store.space();
  os << kProfileHeader << '\n';
  const auto fids = k.fidelities();
  auto fid_cols = [&](const FidelityOption& f) {
    return k.sampling.labels[f.sampling] + "," +
           k.resolution.labels[f.resolution] + "," + k.crop.labels[f.crop] +
           "," + k.quality.labels[f.quality];
  };
  for (const auto& id : store.operators()) {
    for (const auto& f : fids) {
      const auto& p = store.operator_entry(id, f);
      if (!p) continue;
      os << "operator," << id << ',' << fid_cols(f) << ",,,"
         << text::fixed(p->accuracy) << ',' << text::fixed(p->consumption_speed)
         << ",,,\n";
    }
  }
  for (const auto& f : fids) {
    for (const auto& c : k.codings()) {
      const auto& p = store.coding_entry(f, c);
      if (!p) continue;
      os << "coding,," << fid_cols(f) << ','
         << (c.bypass ? "raw" : k.speed_step.labels[c.speed_step]) << ','
         << (c.bypass ? "raw" : k.keyframe.labels[c.keyframe]) << ",,,"
         << text::fixed(p->encode_cost) << ',' << text::fixed(p->decode_speed)
         << ',' << text::fixed(p->bitrate) << '\n';
    }
  }
}

inline void save_profiles(const ProfileStore& store, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::ParseError, "cannot write '" + path + "'");
  save_profiles(store, os);
}

inline ProfileStore load_profiles(std::istream& is, const KnobSpace& space,
                                  const CodecModel& model = {}) {
  ProfileStore store(space, model);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(is, line)) fail("missing header");
  ++line_no;
  if (text::trim(line) != kProfileHeader) fail("unexpected header");
  while (std::getline(is, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto cols = text::split(text::trim(line), ',');
    if (cols.size() != 13) fail("expected 13 columns");
    auto number = [&](std::size_t i, const char* name) {
      double v = 0;
      if (!text::parse_double(text::trim(cols[i]), v)) {
        fail(std::string("bad number in column '") + name + "'");
      }
      return v;
    };
    FidelityOption f;
    try {
      f = {space.sampling.index_of(cols[2]), space.resolution.index_of(cols[3]),
           space.crop.index_of(cols[4]), space.quality.index_of(cols[5])};
    } catch (const Error& e) {
      throw Error(ErrorCode::DomainMismatch,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (cols[0] == "operator") {
      if (cols[1].empty()) fail("operator row without operator id");
      store.add_operator(cols[1]);
      store.set_operator_point(
          cols[1], f,
          {number(8, "accuracy"), number(9, "consumption_speed")});
    } else if (cols[0] == "coding") {
      CodingOption c;
      if (cols[6] == "raw" || cols[7] == "raw") {
        c = CodingOption::raw();
      } else {
        try {
          c = {space.speed_step.index_of(cols[6]),
               space.keyframe.index_of(cols[7]), false};
        } catch (const Error& e) {
          throw Error(ErrorCode::DomainMismatch,
                      "line " + std::to_string(line_no) + ": " + e.what());
        }
      }
      store.set_coding_point(f, c,
                             {number(10, "encode_cost"),
                              number(11, "decode_speed"), number(12, "bitrate")});
    } else {
      fail("unknown row kind '" + cols[0] + "'");
    }
  }
  store.set_warnings(check_monotonicity(store));
  return store;
}

inline ProfileStore load_profiles(const std::string& path,
                                  const KnobSpace& space,
                                  const CodecModel& model = {}) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
  return load_profiles(is, space, model);
}

}  // namespace vidplan
