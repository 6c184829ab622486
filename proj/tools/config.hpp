#pragma once

// Planner configuration file: JSON with comments. Every section is optional
// until a command needs it.

#include <openssl/evp.h>

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vidplan/knobspace.hpp"
#include "vidplan/perfmodel.hpp"
#include "vidplan/planner.hpp"
#include "vidplan/profiles.hpp"
#include "vidplan/simstore.hpp"

namespace vidplan::cli {

using nlohmann::json;

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::ConfigError, "SHA-256 unavailable");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct ConsumerSpec {
  std::string op;
  std::vector<double> accuracies;
};

struct SimulationSpec {
  double horizon = 600;
  Scenario scenario;  // hardware and istreams filled from the main sections
};

struct MigrationSpec {
  PlacementPolicy from;
  std::optional<PlacementPolicy> to;  // absent: solve for the best policy
};

struct PlannerConfig {
  std::string sha256;
  KnobSpace knobs = default_knob_space();
  CodecModel codec_model;
  std::vector<ConsumerSpec> consumers;
  std::optional<std::vector<SyntheticOperatorSpec>> synthetic;
  std::optional<std::size_t> synthetic_random;
  double disk_read_bw = 3000;
  std::string strategy = "heuristic";
  std::size_t distance_target = 4;
  std::optional<double> ingestion_cores;
  std::optional<double> storage_gb;
  std::size_t lifespan_days = 10;
  double streams = 1;
  std::optional<HardwareSpec> hardware;
  std::optional<HardwareCatalog> catalog;
  std::optional<WhatIfScale> whatif;
  std::optional<Workload> workload;
  std::optional<MigrationSpec> migration;
  std::optional<SimulationSpec> simulation;
  std::uint64_t seed = 0;

  std::vector<Consumer> consumer_list() const {
    std::vector<Consumer> out;
    for (const auto& c : consumers) {
      for (double a : c.accuracies) out.push_back({c.op, a});
    }
    return out;
  }

  const HardwareSpec& need_hardware() const {
    if (!hardware) throw Error(ErrorCode::ConfigError, "config has no 'hardware' section");
    return *hardware;
  }

  const Workload& need_workload() const {
    if (!workload) throw Error(ErrorCode::ConfigError, "config has no 'workload' section");
    return *workload;
  }
};

namespace detail {

[[noreturn]] inline void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ConfigError, where + ": " + what);
}

inline const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad(where, "missing '" + key + "'");
  return j.at(key);
}

template <class T>
T as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    bad(where, "wrong type");
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  return as<T>(field(j, key, where), where + "." + key);
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return as<T>(j.at(key), where + "." + key);
}

inline KnobDomain knob(const json& j, KnobDomain fallback, const std::string& where) {
  if (!j.contains(fallback.name)) return fallback;
  const auto& k = j.at(fallback.name);
  const std::string w = where + "." + fallback.name;
  KnobDomain d{fallback.name, get<std::vector<std::string>>(k, "labels", w), get<std::vector<double>>(k, "values", w)};
  try {
    d.validate();
  } catch (const Error& e) {
    bad(w, e.what());
  }
  return d;
}

inline Tier tier(const json& j, const std::string& w) {
  return {get<std::string>(j, "name", w), get<double>(j, "read_bw", w), get<double>(j, "write_bw", w),
          get<double>(j, "capacity_gb", w), get_or<double>(j, "cost", 0.0, w)};
}

inline Codec codec(const json& j, const std::string& w) {
  return {get_or<std::string>(j, "name", "codec", w), get<double>(j, "decode_fps", w),
          get<double>(j, "transcode_fps", w), get_or<double>(j, "cost", 0.0, w)};
}

inline HardwareSpec hardware(const json& j) {
  HardwareSpec hw;
  const auto& tiers = field(j, "tiers", "hardware");
  for (std::size_t k = 0; k < tiers.size(); ++k) hw.tiers.push_back(tier(tiers[k], "hardware.tiers[" + std::to_string(k) + "]"));
  hw.codec = codec(field(j, "codec", "hardware"), "hardware.codec");
  try {
    hw.validate();
  } catch (const Error& e) {
    bad("hardware", e.what());
  }
  return hw;
}

template <class T>
std::size_t index_by_name(const std::vector<T>& items, const std::string& name, const std::string& where) {
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (items[k].name == name) return k;
  }
  bad(where, "unknown name '" + name + "'");
}

inline Workload workload(const json& j) {
  Workload w;
  w.n_cam = get_or<double>(j, "n_cam", 1.0, "workload");
  w.fps = get_or<double>(j, "fps", 30.0, "workload");
  for (const auto& s : field(j, "istreams", "workload")) {
    w.istreams.push_back({get<std::string>(s, "name", "workload.istreams"), get<double>(s, "encoded_bitrate", "workload.istreams"),
                          get<double>(s, "raw_bitrate", "workload.istreams"), get<double>(s, "compute_fps", "workload.istreams")});
  }
  for (const auto& q : field(j, "queries", "workload")) {
    Query query{get<std::string>(q, "name", "workload.queries"), get<double>(q, "weight", "workload.queries"), {}};
    for (const auto& st : field(q, "stages", "workload.queries")) {
      const std::string w_at = "workload.queries." + query.name;
      query.stages.push_back({index_by_name(w.istreams, get<std::string>(st, "istream", w_at), w_at),
                              get_or<double>(st, "activation", 1.0, w_at)});
    }
    w.queries.push_back(std::move(query));
  }
  for (const auto& t : field(j, "temperatures", "workload")) {
    w.temperatures.push_back({get<std::string>(t, "name", "workload.temperatures"), get<double>(t, "span", "workload.temperatures"),
                              get<double>(t, "weight", "workload.temperatures")});
  }
  try {
    w.validate();
  } catch (const Error& e) {
    bad("workload", e.what());
  }
  return w;
}

inline PlacementPolicy policy(const json& j, const Workload& w, const HardwareSpec& hw, const std::string& where) {
  PlacementPolicy p(w.istreams.size(), w.temperatures.size(), hw.tiers.size());
  for (const auto& e : j) {
    const auto i = index_by_name(w.istreams, get<std::string>(e, "istream", where), where);
    const auto t = index_by_name(w.temperatures, get<std::string>(e, "temperature", where), where);
    const auto s = index_by_name(hw.tiers, get<std::string>(e, "tier", where), where);
    p.part(i, t, s, get_or<bool>(e, "encoded", true, where)) += get<double>(e, "fraction", where);
  }
  try {
    p.validate();
  } catch (const Error& e) {
    bad(where, e.what());
  }
  return p;
}

inline SyntheticOperatorSpec operator_spec(const json& j, const std::string& w) {
  SyntheticOperatorSpec s;
  s.id = get<std::string>(j, "id", w);
  s.base_speed = get<double>(j, "base_speed", w);
  s.beta = get_or<std::array<double, 4>>(j, "beta", s.beta, w);
  s.gamma = get_or<std::array<double, 4>>(j, "gamma", s.gamma, w);
  s.interaction = get_or<double>(j, "interaction", s.interaction, w);
  return s;
}

inline SimulationSpec simulation(const json& j, const HardwareSpec& hw, const Workload& w) {
  const std::string at = "simulation";
  SimulationSpec out;
  out.horizon = get_or<double>(j, "horizon", 600.0, at);
  auto& sc = out.scenario;
  sc.hw = hw;
  sc.istreams = w.istreams;
  sc.fps = w.fps;
  sc.chunk_seconds = get_or<double>(j, "chunk_seconds", 8.0, at);
  sc.arrival_jitter = get_or<double>(j, "arrival_jitter", 0.0, at);
  sc.serial_migration = get_or<bool>(j, "serial_migration", true, at);
  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    const std::string pw = at + ".policy";
    sc.policy.weights.service = get_or<double>(p, "w_service", sc.policy.weights.service, pw);
    sc.policy.weights.resource = get_or<double>(p, "w_resource", sc.policy.weights.resource, pw);
    sc.policy.pause_chunks = get_or<double>(p, "pause_chunks", sc.policy.pause_chunks, pw);
    sc.policy.ingest_buffer_chunks = get_or<std::size_t>(p, "ingest_buffer_chunks", sc.policy.ingest_buffer_chunks, pw);
    sc.policy.outstanding_target = get_or<std::size_t>(p, "outstanding_target", sc.policy.outstanding_target, pw);
  }
  for (const auto& f : j.value("ingest", json::array())) {
    sc.ingest.push_back({index_by_name(w.istreams, get<std::string>(f, "istream", at), at),
                         index_by_name(hw.tiers, get<std::string>(f, "tier", at), at), get_or<bool>(f, "encoded", true, at)});
  }
  for (const auto& q : j.value("queries", json::array())) {
    RetrievalQuery rq{get<std::string>(q, "name", at), {}, get<double>(q, "footage", at), get_or<double>(q, "start", 0.0, at)};
    for (const auto& in : field(q, "inputs", at)) {
      rq.inputs.push_back({index_by_name(w.istreams, get<std::string>(in, "istream", at), at),
                           index_by_name(hw.tiers, get<std::string>(in, "tier", at), at), get_or<bool>(in, "encoded", true, at)});
    }
    sc.queries.push_back(std::move(rq));
  }
  for (const auto& m : j.value("migrations", json::array())) {
    sc.migrations.push_back({index_by_name(w.istreams, get<std::string>(m, "istream", at), at),
                             index_by_name(hw.tiers, get<std::string>(m, "src", at), at), get_or<bool>(m, "src_encoded", true, at),
                             index_by_name(hw.tiers, get<std::string>(m, "dst", at), at), get_or<bool>(m, "dst_encoded", true, at),
                             get<double>(m, "seconds", at), get_or<double>(m, "release", 0.0, at)});
  }
  return out;
}

}  // namespace detail

inline PlannerConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  namespace d = detail;
  PlannerConfig c;
  c.sha256 = sha256_hex(text);
  if (j.contains("knobs")) {
    const auto& k = j.at("knobs");
    c.knobs.sampling = d::knob(k, c.knobs.sampling, "knobs");
    c.knobs.resolution = d::knob(k, c.knobs.resolution, "knobs");
    c.knobs.crop = d::knob(k, c.knobs.crop, "knobs");
    c.knobs.quality = d::knob(k, c.knobs.quality, "knobs");
    c.knobs.speed_step = d::knob(k, c.knobs.speed_step, "knobs");
    c.knobs.keyframe = d::knob(k, c.knobs.keyframe, "knobs");
  }
  if (j.contains("codec_model")) {
    const auto& m = j.at("codec_model");
    c.codec_model.ingest_fps = d::get_or<double>(m, "ingest_fps", c.codec_model.ingest_fps, "codec_model");
    c.codec_model.max_skip_gain = d::get_or<double>(m, "max_skip_gain", c.codec_model.max_skip_gain, "codec_model");
  }
  for (const auto& e : j.value("consumers", json::array())) {
    ConsumerSpec s{d::get<std::string>(e, "operator", "consumers"), d::get<std::vector<double>>(e, "accuracies", "consumers")};
    for (double a : s.accuracies) {
      if (!(a > 0 && a <= 1)) d::bad("consumers." + s.op, "accuracy targets must lie in (0, 1]");
    }
    c.consumers.push_back(std::move(s));
  }
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    const auto& ops = d::field(s, "operators", "synthetic");
    if (ops.is_string()) {
      const auto kind = ops.get<std::string>();
      if (kind == "reference") {
        c.synthetic = reference_operators();
      } else if (kind == "random") {
        c.synthetic_random = d::get_or<std::size_t>(s, "count", 6, "synthetic");
      } else {
        d::bad("synthetic.operators", "expected 'reference', 'random' or a list");
      }
    } else {
      std::vector<SyntheticOperatorSpec> list;
      for (const auto& o : ops) list.push_back(d::operator_spec(o, "synthetic.operators"));
      c.synthetic = std::move(list);
    }
  }
  c.disk_read_bw = d::get_or<double>(j, "disk_read_bw", c.disk_read_bw, "config");
  if (!(c.disk_read_bw > 0)) d::bad("disk_read_bw", "must be positive");
  c.strategy = d::get_or<std::string>(j, "strategy", c.strategy, "config");
  c.distance_target = d::get_or<std::size_t>(j, "distance_target", c.distance_target, "config");
  if (j.contains("budgets")) {
    const auto& b = j.at("budgets");
    if (b.contains("ingestion_cores") && !b.at("ingestion_cores").is_null()) {
      c.ingestion_cores = d::get<double>(b, "ingestion_cores", "budgets");
    }
    if (b.contains("storage_gb") && !b.at("storage_gb").is_null()) c.storage_gb = d::get<double>(b, "storage_gb", "budgets");
  }
  if (j.contains("erosion")) {
    const auto& e = j.at("erosion");
    c.lifespan_days = d::get_or<std::size_t>(e, "lifespan_days", c.lifespan_days, "erosion");
    c.streams = d::get_or<double>(e, "streams", c.streams, "erosion");
  }
  if (j.contains("hardware")) c.hardware = d::hardware(j.at("hardware"));
  if (j.contains("catalog")) {
    const auto& k = j.at("catalog");
    HardwareCatalog cat;
    if (k.contains("budget") && !k.at("budget").is_null()) cat.budget = d::get<double>(k, "budget", "catalog");
    for (const auto& slot : d::field(k, "slots", "catalog")) {
      TierSlot ts{d::get<std::string>(slot, "name", "catalog.slots"), {}};
      for (const auto& o : d::field(slot, "options", "catalog.slots")) ts.options.push_back(d::tier(o, "catalog.slots." + ts.name));
      cat.slots.push_back(std::move(ts));
    }
    for (const auto& cd : d::field(k, "codecs", "catalog")) cat.codecs.push_back(d::codec(cd, "catalog.codecs"));
    c.catalog = std::move(cat);
  }
  if (j.contains("whatif")) {
    const auto& w = j.at("whatif");
    c.whatif = WhatIfScale{d::get_or<double>(w, "decoder_cost_factor", 1.0, "whatif"),
                           d::get_or<double>(w, "tier_speed_factor", 1.0, "whatif")};
  }
  if (j.contains("workload")) c.workload = d::workload(j.at("workload"));
  if (j.contains("migration")) {
    const auto& hw = c.need_hardware();
    const auto& w = c.need_workload();
    const auto& m = j.at("migration");
    MigrationSpec spec{d::policy(d::field(m, "from", "migration"), w, hw, "migration.from"), std::nullopt};
    if (m.contains("to") && !(m.at("to").is_string() && m.at("to").get<std::string>() == "optimal")) {
      spec.to = d::policy(m.at("to"), w, hw, "migration.to");
    }
    c.migration = std::move(spec);
  }
  if (j.contains("simulation")) c.simulation = d::simulation(j.at("simulation"), c.need_hardware(), c.need_workload());
  c.seed = d::get_or<std::uint64_t>(j, "seed", 0, "config");
  return c;
}

inline PlannerConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

}  // namespace vidplan::cli
