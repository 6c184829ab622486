#pragma once

// Subcommands. Each reads the configuration, runs one planner and writes its
// artifacts under the output directory; JSON reports carry the config hash.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "config.hpp"
#include "svg.hpp"
#include "vidplan/cf_search.hpp"
#include "vidplan/erosion.hpp"
#include "vidplan/sf_coalesce.hpp"

namespace vidplan::cli {

struct Options {
  std::string config;
  std::string profiles;
  std::string strategy;
  std::optional<double> budget_ingest;
  std::optional<double> budget_storage;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

namespace detail {

inline std::filesystem::path out_path(const Options& o, const std::string& name) {
  std::filesystem::create_directories(o.out_dir);
  return std::filesystem::path(o.out_dir) / name;
}

inline void write_text(const Options& o, const std::string& name, const std::string& body) {
  const auto p = out_path(o, name);
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error(ErrorCode::ParseError, "cannot write '" + p.string() + "'");
  os << body;
}

inline void write_json(const Options& o, const std::string& name, const json& j) {
  write_text(o, name, j.dump(2) + "\n");
}

inline PlannerConfig config_for(const Options& o) {
  if (o.config.empty()) throw Error(ErrorCode::ConfigError, "--config is required");
  return load_config(o.config);
}

inline std::uint64_t seed_for(const Options& o, const PlannerConfig& c) { return o.seed.value_or(c.seed); }

inline ProfileStore store_for(const Options& o, const PlannerConfig& c) {
  if (!o.profiles.empty()) return load_profiles(o.profiles, c.knobs, c.codec_model);
  if (c.synthetic) return generate_synthetic(c.knobs, *c.synthetic, c.codec_model);
  if (c.synthetic_random) return generate_synthetic(seed_for(o, c), c.knobs, *c.synthetic_random, c.codec_model);
  throw Error(ErrorCode::ConfigError, "no --profiles given and the config has no 'synthetic' section");
}

inline json fidelity_json(const KnobSpace& k, const FidelityOption& f) {
  return {{"sampling", k.sampling.labels[f.sampling]},
          {"resolution", k.resolution.labels[f.resolution]},
          {"crop", k.crop.labels[f.crop]},
          {"quality", k.quality.labels[f.quality]},
          {"index", {f.sampling, f.resolution, f.crop, f.quality}}};
}

inline json coding_json(const KnobSpace& k, const CodingOption& c) {
  if (c.bypass) return {{"raw", true}};
  return {{"raw", false},
          {"speed_step", k.speed_step.labels[c.speed_step]},
          {"keyframe", k.keyframe.labels[c.keyframe]},
          {"index", {c.speed_step, c.keyframe}}};
}

inline FidelityOption fidelity_from(const json& j) {
  const auto idx = j.at("index").get<std::array<int, 4>>();
  return {idx[0], idx[1], idx[2], idx[3]};
}

inline CodingOption coding_from(const json& j) {
  if (j.at("raw").get<bool>()) return CodingOption::raw();
  const auto idx = j.at("index").get<std::array<int, 2>>();
  return {idx[0], idx[1], false};
}

inline Strategy strategy_for(const Options& o, const PlannerConfig& c) {
  const std::string s = o.strategy.empty() ? c.strategy : o.strategy;
  if (s == "heuristic") return Strategy::Heuristic;
  if (s == "distance") return Strategy::Distance;
  throw Error(ErrorCode::ConfigError, "unknown strategy '" + s + "'");
}

inline std::string coding_label(bool encoded) { return encoded ? "encoded" : "raw"; }

}  // namespace detail

inline int cmd_gen_profiles(const Options& o, std::ostream& out) {
  PlannerConfig c;
  if (!o.config.empty()) c = load_config(o.config);
  if (!c.synthetic && !c.synthetic_random) c.synthetic = reference_operators();
  const auto store = detail::store_for(Options{o.config, "", "", {}, {}, o.seed, o.out_dir}, c);
  std::ostringstream csv;
  save_profiles(store, csv);
  detail::write_text(o, "profiles.csv", csv.str());
  out << "wrote " << store.operators().size() << " operators over " << store.space().fidelity_count()
      << " fidelities to " << detail::out_path(o, "profiles.csv").string() << "\n";
  return 0;
}

inline int cmd_derive(const Options& o, std::ostream& out) {
  const auto c = detail::config_for(o);
  const auto store = detail::store_for(o, c);
  const auto consumers = c.consumer_list();
  if (consumers.empty()) throw Error(ErrorCode::ConfigError, "config lists no consumers");
  for (const auto& cs : c.consumers) {
    if (!store.has_operator(cs.op)) throw Error(ErrorCode::ConfigError, "operator '" + cs.op + "' has no profile coverage");
  }
  const auto strategy = detail::strategy_for(o, c);
  Budgets budgets;
  budgets.ingestion_cores = o.budget_ingest ? o.budget_ingest : c.ingestion_cores;
  const auto derived = derive_all(store, consumers);
  const auto demands = group_demands(derived);
  const auto result = derive_sfs(strategy, store, demands, c.disk_read_bw, budgets, c.distance_target);
  const auto violations = check_requirements(result.set, demands, store, c.disk_read_bw);
  const auto& k = store.space();

  std::map<FidelityOption, std::size_t> cf_index;
  for (std::size_t i = 0; i < demands.size(); ++i) cf_index[demands[i].fidelity] = i;
  const auto sub = result.set.subscription();

  json j;
  j["command"] = "derive";
  j["config_sha256"] = c.sha256;
  j["strategy"] = to_string(strategy);
  j["disk_read_bw"] = c.disk_read_bw;
  j["consumer_count"] = consumers.size();
  j["unique_cfs"] = demands.size();
  j["duplicate_cfs"] = consumers.size() - demands.size();
  json cons = json::array();
  std::ostringstream cf_csv;
  cf_csv << "operator,accuracy,cf,sf,sampling,resolution,crop,quality,achieved_accuracy,consumption_speed,runs\n";
  for (const auto& cn : consumers) {
    const auto& r = derived.per_consumer.at(cn);
    const std::size_t cf = cf_index.at(r.chosen.fidelity);
    cons.push_back({{"operator", cn.operator_id},
                    {"accuracy", cn.target_accuracy},
                    {"cf", cf},
                    {"achieved_accuracy", r.accuracy},
                    {"consumption_speed", r.consumption_speed},
                    {"runs", r.runs}});
    const auto& f = r.chosen.fidelity;
    cf_csv << cn.operator_id << ',' << text::fixed(cn.target_accuracy, 4) << ',' << cf << ',' << sub.at(cf) << ','
           << k.sampling.labels[f.sampling] << ',' << k.resolution.labels[f.resolution] << ',' << k.crop.labels[f.crop]
           << ',' << k.quality.labels[f.quality] << ',' << text::fixed(r.accuracy, 6) << ','
           << text::fixed(r.consumption_speed, 6) << ',' << r.runs << '\n';
  }
  j["consumers"] = cons;
  json cfs = json::array();
  for (std::size_t i = 0; i < demands.size(); ++i) {
    json members = json::array();
    for (const auto& d : demands[i].consumers) {
      members.push_back({{"operator", d.consumer.operator_id},
                         {"accuracy", d.consumer.target_accuracy},
                         {"consumption_speed", d.consumption_speed}});
    }
    cfs.push_back({{"index", i},
                   {"label", k.describe(demands[i].fidelity)},
                   {"fidelity", detail::fidelity_json(k, demands[i].fidelity)},
                   {"consumers", members},
                   {"sf", sub.at(i)}});
  }
  j["cfs"] = cfs;
  json sfs = json::array();
  std::ostringstream sf_csv;
  sf_csv << "sf,golden,format,coding,bitrate_mb_per_s,encode_cores,cfs\n";
  for (std::size_t s = 0; s < result.set.formats.size(); ++s) {
    const auto& f = result.set.formats[s];
    sfs.push_back({{"index", s},
                   {"label", k.describe(f.format)},
                   {"golden", f.golden},
                   {"fidelity", detail::fidelity_json(k, f.format.fidelity)},
                   {"coding", detail::coding_json(k, f.format.coding)},
                   {"bitrate", f.bitrate},
                   {"encode_cost", f.encode_cost},
                   {"members", f.members}});
    std::string members;
    for (auto m : f.members) members += (members.empty() ? "" : " ") + std::to_string(m);
    sf_csv << s << ',' << (f.golden ? 1 : 0) << ',' << k.describe(f.format.fidelity) << ','
           << k.describe(f.format.coding) << ',' << text::fixed(f.bitrate, 6) << ',' << text::fixed(f.encode_cost, 6)
           << ',' << members << '\n';
  }
  j["sfs"] = sfs;
  j["costs"] = {{"storage_mb_per_s", result.costs.storage_cost}, {"ingestion_cores", result.costs.ingestion_cost}};
  if (budgets.ingestion_cores) j["costs"]["ingestion_budget"] = *budgets.ingestion_cores;
  j["profiling_runs"] = {{"operator", derived.total_runs},
                         {"operator_exhaustive", consumers.size() * k.fidelity_count()},
                         {"coding", result.runs}};
  j["checks"] = {{"passed", violations.empty()}, {"violations", violations}};
  j["log"] = result.log;
  detail::write_json(o, "configuration.json", j);
  detail::write_text(o, "cfs.csv", cf_csv.str());
  detail::write_text(o, "sfs.csv", sf_csv.str());

  out << "strategy " << to_string(strategy) << ": " << consumers.size() << " consumers, " << demands.size()
      << " unique CFs, " << result.set.formats.size() << " SFs\n";
  for (std::size_t s = 0; s < result.set.formats.size(); ++s) {
    const auto& f = result.set.formats[s];
    out << "  SF" << s << (f.golden ? " (golden)" : "") << "  " << k.describe(f.format) << "  "
        << text::fixed(f.bitrate, 4) << " MB/s  serves " << f.members.size() << " CFs\n";
  }
  out << "storage " << text::fixed(result.costs.storage_cost, 4) << " MB per video-second, ingestion "
      << text::fixed(result.costs.ingestion_cost, 3) << " cores\n";
  out << "profiling runs " << derived.total_runs << " of " << consumers.size() * k.fidelity_count()
      << " exhaustive, coding runs " << result.runs << "\n";
  if (!violations.empty()) {
    for (const auto& v : violations) out << "violation: " << v << "\n";
    return 3;
  }
  out << "all fidelity and retrieval-speed checks pass\n";
  return 0;
}

inline int cmd_erode(const Options& o, std::ostream& out) {
  const auto c = detail::config_for(o);
  const auto path = detail::out_path(o, "configuration.json");
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::ConfigError, "no derived configuration at '" + path.string() + "'; run derive first");
  }
  json d;
  try {
    d = json::parse(read_file(path.string()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("derived configuration: ") + e.what());
  }
  const auto store = detail::store_for(o, c);
  const auto& k = store.space();
  std::vector<CfDemand> demands;
  SFSet set;
  try {
    for (const auto& cf : d.at("cfs")) {
      CfDemand dem{detail::fidelity_from(cf.at("fidelity")), {}};
      for (const auto& m : cf.at("consumers")) {
        dem.consumers.push_back({{m.at("operator").get<std::string>(), m.at("accuracy").get<double>()},
                                 m.at("consumption_speed").get<double>()});
      }
      demands.push_back(std::move(dem));
    }
    for (const auto& sf : d.at("sfs")) {
      StoredFormat f;
      f.format = {detail::fidelity_from(sf.at("fidelity")), detail::coding_from(sf.at("coding"))};
      f.golden = sf.at("golden").get<bool>();
      f.bitrate = sf.at("bitrate").get<double>();
      f.encode_cost = sf.at("encode_cost").get<double>();
      f.members = sf.at("members").get<std::vector<std::size_t>>();
      set.formats.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("derived configuration: ") + e.what());
  }
  const double disk = d.value("disk_read_bw", c.disk_read_bw);
  const auto tree = build_fallback_tree(set, demands, store, disk);
  std::vector<double> per_day;
  for (const auto& f : tree.nodes) per_day.push_back(f.bitrate * 86400.0 * c.streams / 1000.0);
  double full = 0.0;
  for (double s : per_day) full += s * static_cast<double>(c.lifespan_days);
  const double budget = o.budget_storage ? *o.budget_storage : c.storage_gb.value_or(full);
  const auto plan = plan_erosion(tree, c.lifespan_days, budget, per_day);

  std::ostringstream csv;
  csv << "age,target_speed,remaining_gb";
  for (std::size_t s = 0; s < tree.size(); ++s) csv << ",sf" << s << "_deleted";
  csv << '\n';
  for (std::size_t a = 0; a < plan.lifespan; ++a) {
    csv << a + 1 << ',' << text::fixed(plan.targets[a], 6) << ',' << text::fixed(plan.remaining[a], 6);
    for (double p : plan.deleted[a]) csv << ',' << text::fixed(p, 6);
    csv << '\n';
  }
  detail::write_text(o, "erosion.csv", csv.str());

  Plot plot{"Age-based erosion (k = " + text::fixed(plan.k, 3) + ")", "age (days)", "fraction", {}, {}};
  Series target{"target speed", {}, Style::Line};
  for (std::size_t a = 0; a < plan.lifespan; ++a) target.points.push_back({static_cast<double>(a + 1), plan.targets[a]});
  plot.series.push_back(target);
  for (std::size_t s = 0; s < tree.size(); ++s) {
    if (s == tree.root) continue;
    Series kept{"SF" + std::to_string(s) + " kept", {}, Style::Step};
    for (std::size_t a = 0; a < plan.lifespan; ++a) {
      kept.points.push_back({static_cast<double>(a + 1), 1.0 - plan.deleted[a][s]});
    }
    plot.series.push_back(kept);
  }
  detail::write_text(o, "erosion.svg", plot.render());

  json parents = json::array();
  for (const auto& p : tree.parent) parents.push_back(p ? json(*p) : json(nullptr));
  json j{{"command", "erode"},
         {"config_sha256", c.sha256},
         {"k", plan.k},
         {"p_min", plan.p_min},
         {"lifespan_days", plan.lifespan},
         {"budget_gb", budget},
         {"accumulated_gb", plan.accumulated},
         {"full_size_gb", plan.full_size},
         {"floor_gb", erosion_floor(tree, c.lifespan_days, per_day)},
         {"per_day_gb", per_day},
         {"golden", tree.root},
         {"parents", parents}};
  detail::write_json(o, "erosion_report.json", j);
  out << "decay exponent k = " << text::fixed(plan.k, 3) << ", P_min = " << text::fixed(plan.p_min, 4) << "\n";
  out << "storage " << text::fixed(plan.accumulated, 2) << " GB of budget " << text::fixed(budget, 2) << " GB (full "
      << text::fixed(plan.full_size, 2) << " GB)\n";
  (void)k;
  return 0;
}

inline int cmd_plan_hw(const Options& o, std::ostream& out) {
  const auto c = detail::config_for(o);
  if (!c.catalog) throw Error(ErrorCode::ConfigError, "config has no 'catalog' section");
  auto catalog = *c.catalog;
  if (o.budget_storage) catalog.budget = *o.budget_storage;
  const auto& w = c.need_workload();
  const auto plan = plan_hardware(catalog, w);

  std::vector<bool> on(plan.setups.size(), false);
  for (const auto& p : plan.frontier) on[p.index] = true;
  std::ostringstream setups;
  setups << "index,label,cost,feasible,utility,on_frontier\n";
  for (std::size_t s = 0; s < plan.setups.size(); ++s) {
    const auto& e = plan.setups[s];
    setups << s << ',' << e.setup.label() << ',' << text::fixed(e.setup.cost, 2) << ',' << (e.feasible ? 1 : 0) << ','
           << (e.feasible ? text::fixed(e.utility, 6) : std::string("NA")) << ',' << (on[s] ? 1 : 0) << '\n';
  }
  detail::write_text(o, "setups.csv", setups.str());
  auto frontier_csv = [&](const HardwarePlan& hp) {
    std::ostringstream f;
    f << "index,label,cost,utility\n";
    for (const auto& p : hp.frontier) {
      f << p.index << ',' << hp.setups[p.index].setup.label() << ',' << text::fixed(p.cost, 2) << ','
        << text::fixed(p.utility, 6) << '\n';
    }
    return f.str();
  };
  detail::write_text(o, "frontier.csv", frontier_csv(plan));

  Plot plot{"Hardware setups: cost vs utility", "cost", "utility (x realtime)", {}, {}};
  Series all{"setups", {}, Style::Points};
  for (const auto& e : plan.setups) {
    if (e.feasible) all.points.push_back({e.setup.cost, e.utility});
  }
  Series front{"frontier", {}, Style::Step};
  for (const auto& p : plan.frontier) front.points.push_back({p.cost, p.utility});
  plot.series = {all, front};

  json j{{"command", "plan-hw"},
         {"config_sha256", c.sha256},
         {"setups", plan.setups.size()},
         {"feasible", std::count_if(plan.setups.begin(), plan.setups.end(), [](const auto& e) { return e.feasible; })}};
  json fr = json::array();
  for (const auto& p : plan.frontier) {
    fr.push_back({{"index", p.index}, {"label", plan.setups[p.index].setup.label()}, {"cost", p.cost}, {"utility", p.utility}});
  }
  j["frontier"] = fr;
  out << plan.setups.size() << " setups, " << plan.frontier.size() << " on the frontier\n";
  for (const auto& p : plan.frontier) {
    out << "  " << plan.setups[p.index].setup.label() << "  cost " << text::fixed(p.cost, 2) << "  utility "
        << text::fixed(p.utility, 3) << "\n";
  }
  if (c.whatif) {
    const auto r = whatif_report(catalog, w, *c.whatif);
    detail::write_text(o, "whatif_frontier.csv", frontier_csv(r.scaled));
    Series scaled{"what-if frontier", {}, Style::Step};
    for (const auto& p : r.scaled.frontier) scaled.points.push_back({p.cost, p.utility});
    plot.series.push_back(scaled);
    j["whatif"] = {{"decoder_cost_factor", c.whatif->decoder_cost_factor},
                   {"tier_speed_factor", c.whatif->tier_speed_factor},
                   {"frontier_size", r.scaled.frontier.size()},
                   {"weakly_dominates", r.weakly_dominates}};
    out << "what-if frontier " << (r.weakly_dominates ? "weakly dominates" : "does not dominate") << " the original\n";
  }
  detail::write_text(o, "pareto.svg", plot.render());
  detail::write_json(o, "plan_hw_report.json", j);
  return 0;
}

inline int cmd_plan_migrate(const Options& o, std::ostream& out) {
  const auto c = detail::config_for(o);
  if (!c.migration) throw Error(ErrorCode::ConfigError, "config has no 'migration' section");
  const auto& w = c.need_workload();
  const auto& hw = c.need_hardware();
  const auto& from = c.migration->from;
  const PlacementPolicy to = c.migration->to ? *c.migration->to : solve(w, hw).policy;
  const auto plan = plan_migration(from, to, w, hw);
  const auto replay = validate_schedule(plan.tasks, plan.schedule, w, hw, plan.old_utility);

  std::ostringstream tasks;
  tasks << "task,istream,temperature,src,src_coding,dst,dst_coding,fraction,volume_gb,transcode,duration_s,reward\n";
  for (std::size_t k = 0; k < plan.tasks.size(); ++k) {
    const auto& x = plan.tasks[k];
    tasks << k << ',' << w.istreams[x.istream].name << ',' << w.temperatures[x.temperature].name << ','
          << hw.tiers[x.src].name << ',' << detail::coding_label(x.src_encoded) << ',' << hw.tiers[x.dst].name << ','
          << detail::coding_label(x.dst_encoded) << ',' << text::fixed(x.fraction, 6) << ','
          << text::fixed(x.volume_gb, 6) << ',' << (x.transcode ? 1 : 0) << ',' << text::fixed(x.duration, 6) << ','
          << text::fixed(x.reward, 6) << '\n';
  }
  detail::write_text(o, "migration_tasks.csv", tasks.str());
  std::ostringstream sched;
  sched << "position,task,start_s,end_s,utility_after,simulated_end_s\n";
  for (std::size_t k = 0; k < plan.schedule.order.size(); ++k) {
    const auto& st = plan.schedule.order[k];
    sched << k << ',' << st.task << ',' << text::fixed(st.start, 6) << ',' << text::fixed(st.end, 6) << ','
          << text::fixed(plan.schedule.trajectory[k + 1].second, 6) << ',' << text::fixed(replay.simulated_end[k], 6)
          << '\n';
  }
  detail::write_text(o, "migration_schedule.csv", sched.str());
  std::ostringstream pol;
  write_policy_csv(to, w, hw, pol);
  detail::write_text(o, "target_policy.csv", pol.str());

  Plot plot{"Utility during migration", "time (s)", "utility (x realtime)", {}, {}};
  Series planned{"planned", plan.schedule.trajectory, Style::Step};
  Series simulated{"simulated", replay.trajectory, Style::Step};
  plot.series = {planned, simulated};
  detail::write_text(o, "trajectory.svg", plot.render());

  const double horizon = plan.schedule.makespan;
  json j{{"command", "plan-migrate"},
         {"config_sha256", c.sha256},
         {"old_utility", plan.old_utility},
         {"new_utility", plan.new_utility},
         {"tasks", plan.tasks.size()},
         {"makespan_s", horizon},
         {"buffer_gb", plan.buffer_gb},
         {"negative_reward_tasks", plan.negative_tasks},
         {"integrated_utility", integrated_utility(plan.schedule, horizon)},
         {"replay",
          {{"max_duration_error", replay.max_duration_error},
           {"max_completion_error", replay.max_completion_error},
           {"order_matches", replay.order_matches},
           {"integrated_utility", replay.simulated_integrated}}}};
  if (!plan.tasks.empty() && plan.tasks.size() <= 8 && hw.tiers.size() <= 5) {
    j["oracle_integrated_utility"] = schedule_knapsack_oracle(plan.tasks, hw.tiers.size(), plan.old_utility).value;
  }
  detail::write_json(o, "migration_report.json", j);
  out << plan.tasks.size() << " migration tasks, makespan " << text::fixed(horizon, 1) << " s, utility "
      << text::fixed(plan.old_utility, 3) << " -> " << text::fixed(plan.new_utility, 3) << "\n";
  out << "buffer " << text::fixed(plan.buffer_gb, 3) << " GB, " << plan.negative_tasks.size()
      << " tasks with negative reward, replay error " << text::fixed(100 * replay.max_completion_error, 2) << "%\n";
  return 0;
}

inline int cmd_simulate(const Options& o, std::ostream& out) {
  const auto c = detail::config_for(o);
  if (!c.simulation) throw Error(ErrorCode::ConfigError, "config has no 'simulation' section");
  auto sc = c.simulation->scenario;
  sc.seed = detail::seed_for(o, c);
  const auto m = run(sc, c.simulation->horizon);
  detail::write_text(o, "sim_metrics.csv", metrics_csv(m, sc));
  Plot plot{"Device utilization", "device", "busy fraction", {}, {}};
  Series util{"utilization", {}, Style::Bars};
  for (std::size_t d = 0; d < m.utilization.size(); ++d) {
    util.points.push_back({static_cast<double>(d), m.utilization[d]});
    plot.categories.push_back(sc.device_name(d));
  }
  plot.series = {util};
  detail::write_text(o, "sim_metrics.svg", plot.render());
  json j{{"command", "simulate"},
         {"config_sha256", c.sha256},
         {"seed", sc.seed},
         {"horizon_s", c.simulation->horizon},
         {"events", m.events},
         {"device_overlaps", m.device_overlaps},
         {"class_inversions", m.class_inversions},
         {"watermark_spread", m.watermark_spread},
         {"spread_bound", (sc.policy.pause_chunks + 1) * sc.chunk_seconds}};
  detail::write_json(o, "sim_report.json", j);
  out << m.events << " events over " << text::fixed(c.simulation->horizon, 1) << " s; ingest buffer peak "
      << text::fixed(m.ingest_buffer_peak_mb, 2) << " MB; overlaps " << m.device_overlaps << ", inversions "
      << m.class_inversions << "\n";
  return 0;
}

}  // namespace vidplan::cli
