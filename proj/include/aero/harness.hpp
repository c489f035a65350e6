// Experiment driver: instance synthesis, the three scaling scenarios,
// seeded replication across a worker pool, metric aggregation, and
// CSV / JSON / SVG emission.
#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "aero/allocate.hpp"
#include "aero/io.hpp"
#include "aero/model.hpp"
#include "aero/orchestrator.hpp"

#include "json.hpp"

namespace aero::harness {

// ---------------------------------------------------------------------------
// Instance synthesis: desk-scale instances shaped like the reference
// parameter table (capacities, energies, ranges), fully determined by the
// seed.

struct SynthParams {
  int rows = 4, cols = 4;
  int rsus = 3;
  int uavs = 2;
  int channels = 4;
  int services = 4;
  int functions_per_service = 2;
  int function_pool = 6;
  int ue_count = 12;
  int max_service_duration = 3;
  int slots_per_frame = 10;
  int total_frames = 200;
  double arrival_rate = 3.0;
  int max_hops = 4;
  std::uint64_t master_seed = 1;
};

inline model::Instance make_instance(const SynthParams& p) {
  model::Instance inst;
  inst.seeds = SeedStreams(p.master_seed);
  // one named stream per entity class, so resizing one class never
  // perturbs another class's draws
  Rng node_rng = inst.seeds.stream("synth-nodes");
  Rng link_rng = inst.seeds.stream("synth-links");
  Rng service_rng = inst.seeds.stream("synth-services");
  Rng channel_rng = inst.seeds.stream("synth-channels");

  inst.topology.grid = model::build_grid(p.rows, p.cols, 0.2, 0.8, inst.seeds.stream_seed("grid"));
  inst.time.total_frames = p.total_frames;
  inst.time.slots_per_frame = p.slots_per_frame;
  inst.ue_count = p.ue_count;
  inst.arrival_rate = p.arrival_rate;
  inst.max_hops = p.max_hops;

  const int areas = inst.topology.grid.area_count();
  int next_node = 0;

  model::NodeSpec core;
  core.id = next_node++;
  core.kind = model::NodeKind::core;
  core.processing_capacity = node_rng.uniform(50.0, 70.0);
  core.deploy_energy = node_rng.uniform(12.0, 18.0);
  core.fixed_area = 0;
  inst.topology.nodes.push_back(core);

  for (int i = 0; i < p.rsus; ++i) {
    model::NodeSpec rsu;
    rsu.id = next_node++;
    rsu.kind = model::NodeKind::rsu;
    rsu.processing_capacity = node_rng.uniform(25.0, 70.0);
    rsu.deploy_energy = node_rng.uniform(12.0, 36.0);
    rsu.fixed_area = (i * areas) / std::max(1, p.rsus) % areas;
    inst.topology.nodes.push_back(rsu);
  }
  for (int i = 0; i < p.uavs; ++i) {
    model::NodeSpec uav;
    uav.id = next_node++;
    uav.kind = model::NodeKind::uav;
    uav.processing_capacity = node_rng.uniform(25.0, 70.0);
    uav.deploy_energy = node_rng.uniform(12.0, 36.0);
    model::UavParams params;
    params.weight_kg = node_rng.uniform(4.0, 6.0);
    params.velocity_mps = node_rng.uniform(8.0, 12.0);
    uav.uav = params;
    uav.initial_area = node_rng.uniform_int(0, areas - 1);
    inst.topology.nodes.push_back(uav);
  }

  int next_link = 0;
  auto add_link = [&](int a, int b) {
    model::LinkSpec l;
    l.id = next_link++;
    l.node_a = a;
    l.node_b = b;
    l.bandwidth_capacity = link_rng.uniform(10.0, 30.0);
    l.transmit_energy = link_rng.uniform(5.0, 8.0);
    l.base_latency_ms = link_rng.uniform(4.0, 16.0);
    inst.topology.links.push_back(l);
  };
  // wired core<->rsu backbone, wireless uav<->rsu and uav<->uav
  for (const auto& n : inst.topology.nodes)
    if (n.kind == model::NodeKind::rsu) add_link(core.id, n.id);
  for (const auto& a : inst.topology.nodes) {
    if (!a.is_uav()) continue;
    for (const auto& b : inst.topology.nodes) {
      if (b.kind == model::NodeKind::rsu) add_link(a.id, b.id);
      if (b.is_uav() && b.id > a.id) add_link(a.id, b.id);
    }
  }

  for (int s = 0; s < p.services; ++s) {
    model::ServiceSpec svc;
    svc.id = s;
    for (int i = 0; i < p.functions_per_service; ++i)
      svc.functions.push_back(service_rng.uniform_int(0, p.function_pool - 1));
    svc.duration_frames = service_rng.uniform_int(1, p.max_service_duration);
    inst.services.push_back(svc);
  }

  for (int c = 0; c < p.channels; ++c) {
    model::ChannelSpec ch;
    ch.id = c;
    ch.use_energy = channel_rng.uniform(2.0, 8.0);
    ch.phys.rayleigh_sigma = channel_rng.uniform(0.2, 0.8);
    inst.channels.push_back(ch);
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Run configuration

enum class Scenario { single, requests_sweep, network_sweep, channels_sweep };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::single: return "single";
    case Scenario::requests_sweep: return "requests-sweep";
    case Scenario::network_sweep: return "network-sweep";
    case Scenario::channels_sweep: return "channels-sweep";
  }
  return "?";
}

inline std::optional<Scenario> scenario_from_string(const std::string& s) {
  if (s == "single") return Scenario::single;
  if (s == "requests-sweep" || s == "requests_sweep") return Scenario::requests_sweep;
  if (s == "network-sweep" || s == "network_sweep") return Scenario::network_sweep;
  if (s == "channels-sweep" || s == "channels_sweep") return Scenario::channels_sweep;
  return std::nullopt;
}

struct RunConfig {
  model::Instance base;
  std::vector<orchestrator::PolicyKind> policies = {orchestrator::PolicyKind::perfect,
                                                    orchestrator::PolicyKind::random};
  std::vector<std::uint64_t> seeds = {1};
  int horizon = 0;  // 0 = use the instance's total_frames
  Scenario scenario = Scenario::single;
  std::vector<double> sweep;  // strictly increasing sweep points
  std::string out_dir = "out";
  std::string trace_dir;      // when set, one NDJSON trace per episode
  bool emit_plots = true;
  bool oracle_ratio = false;  // compute the oracle ratio on micro points
  orchestrator::OrchestratorConfig orch;

  void validate() const {
    if (seeds.empty()) throw std::invalid_argument("run config: at least one seed required");
    for (std::size_t i = 1; i < sweep.size(); ++i)
      if (sweep[i] <= sweep[i - 1])
        throw std::invalid_argument("run config: sweep values must be strictly increasing");
    if (scenario != Scenario::single && sweep.empty())
      throw std::invalid_argument("run config: sweep scenario needs sweep values");
  }
};

// [run] section overlayed on an instance document.
inline RunConfig run_config_from_document(const io::Document& doc) {
  RunConfig config;
  config.base = io::instance_from_document(doc);
  auto it = doc.find("run");
  if (it == doc.end()) return config;
  const io::Section& run = it->second;
  if (run.has("policies")) {
    config.policies.clear();
    std::istringstream in(run.text("policies"));
    std::string token;
    while (std::getline(in, token, ',')) {
      token = io::detail::trim(token);
      auto policy = orchestrator::policy_from_string(token);
      if (!policy) throw io::ParseError("unknown policy: " + token);
      config.policies.push_back(*policy);
    }
  }
  if (run.has("seeds")) {
    config.seeds.clear();
    for (double v : run.list("seeds")) config.seeds.push_back(std::uint64_t(v));
  }
  config.horizon = run.integer("horizon", 0);
  if (run.has("scenario")) {
    auto scenario = scenario_from_string(run.text("scenario"));
    if (!scenario) throw io::ParseError("unknown scenario: " + run.text("scenario"));
    config.scenario = *scenario;
  }
  if (run.has("sweep")) config.sweep = run.list("sweep");
  config.out_dir = run.text("out_dir", config.out_dir);
  config.emit_plots = run.integer("emit_plots", 1) != 0;
  config.oracle_ratio = run.integer("oracle_ratio", 0) != 0;
  auto& orch = config.orch;
  orch.alpha = run.num("alpha", orch.alpha);
  orch.chi = run.num("chi", orch.chi);
  orch.kappa = run.num("kappa", orch.kappa);
  orch.belief_lambda = run.num("belief_lambda", orch.belief_lambda);
  orch.history = run.integer("history", orch.history);
  orch.batch_size = run.integer("batch_size", orch.batch_size);
  orch.learning_rate = run.num("learning_rate", orch.learning_rate);
  orch.discount = run.num("discount", orch.discount);
  orch.sync_period = run.integer("sync_period", orch.sync_period);
  orch.eps_decrement = run.num("eps_decrement", orch.eps_decrement);
  orch.eps_floor = run.num("eps_floor", orch.eps_floor);
  orch.phase_boundary_fraction = run.num("phase_boundary", orch.phase_boundary_fraction);
  orch.input_scale = run.num("input_scale", orch.input_scale);
  orch.route_penalty = run.num("route_penalty", orch.route_penalty);
  if (run.has("predictor")) {
    const std::string mode = run.text("predictor");
    if (mode != "reference")
      throw io::ParseError("predictor mode '" + mode + "' is not available; use 'reference'");
  }
  if (run.has("hidden")) {
    orch.hidden.clear();
    for (double v : run.list("hidden")) orch.hidden.push_back(int(v));
  }
  return config;
}

inline RunConfig read_run_config(const std::string& path) {
  return run_config_from_document(io::parse_document(path));
}

// ---------------------------------------------------------------------------
// Sweep application: derive the instance for one scenario point.

inline model::Instance apply_sweep(const model::Instance& base, Scenario scenario, double value) {
  model::Instance inst = base;
  switch (scenario) {
    case Scenario::single:
      break;
    case Scenario::requests_sweep:
      inst.arrival_rate = value;
      break;
    case Scenario::channels_sweep: {
      const int count = int(value);
      Rng rng = base.seeds.fork("channels-sweep", std::uint64_t(count)).stream("channels");
      const model::ChannelPhys phys =
          base.channels.empty() ? model::ChannelPhys{} : base.channels.front().phys;
      inst.channels.clear();
      for (int c = 0; c < count; ++c) {
        model::ChannelSpec ch;
        ch.id = c;
        ch.use_energy = rng.uniform(2.0, 8.0);
        ch.phys = phys;
        ch.phys.rayleigh_sigma = rng.uniform(0.2, 0.8);
        inst.channels.push_back(ch);
      }
      break;
    }
    case Scenario::network_sweep: {
      const int target = int(value);
      Rng rng = base.seeds.fork("network-sweep", std::uint64_t(target)).stream("nodes");
      // rebuild the edge tier at the requested size: the core is kept and the
      // remainder splits into roadside units (spread over the grid) and UAVs
      model::Instance rebuilt = base;
      rebuilt.topology.nodes.clear();
      rebuilt.topology.links.clear();
      std::vector<int> rsu_ids;
      int next_id = 0;
      for (const auto& n : base.topology.nodes) {
        if (n.kind != model::NodeKind::core) continue;
        model::NodeSpec copy = n;
        copy.id = next_id++;
        rebuilt.topology.nodes.push_back(copy);
      }
      const int areas = base.area_count();
      const int edge_count = std::max(0, target - next_id);
      const int rsu_count = (edge_count + 1) / 2;
      for (int i = 0; i < rsu_count; ++i) {
        model::NodeSpec rsu;
        rsu.id = next_id++;
        rsu.kind = model::NodeKind::rsu;
        rsu.processing_capacity = rng.uniform(25.0, 70.0);
        rsu.deploy_energy = rng.uniform(12.0, 36.0);
        rsu.fixed_area = (i * areas) / std::max(1, rsu_count) % areas;
        rsu_ids.push_back(rsu.id);
        rebuilt.topology.nodes.push_back(rsu);
      }
      const int uav_count = edge_count - rsu_count;
      std::vector<int> uav_ids;
      for (int i = 0; i < uav_count; ++i) {
        model::NodeSpec uav;
        uav.id = next_id++;
        uav.kind = model::NodeKind::uav;
        uav.processing_capacity = rng.uniform(25.0, 70.0);
        uav.deploy_energy = rng.uniform(12.0, 36.0);
        model::UavParams params;
        params.weight_kg = rng.uniform(4.0, 6.0);
        params.velocity_mps = rng.uniform(8.0, 12.0);
        uav.uav = params;
        uav.initial_area = rng.uniform_int(0, areas - 1);
        rebuilt.topology.nodes.push_back(uav);
        uav_ids.push_back(uav.id);
      }
      int next_link = 0;
      auto add_link = [&](int a, int b) {
        model::LinkSpec l;
        l.id = next_link++;
        l.node_a = a;
        l.node_b = b;
        l.bandwidth_capacity = rng.uniform(10.0, 30.0);
        l.transmit_energy = rng.uniform(5.0, 8.0);
        l.base_latency_ms = rng.uniform(4.0, 16.0);
        rebuilt.topology.links.push_back(l);
      };
      for (const auto& n : rebuilt.topology.nodes)
        if (n.kind == model::NodeKind::rsu) add_link(0, n.id);  // node 0 stays the core
      for (int uav : uav_ids) {
        for (int rsu : rsu_ids) add_link(uav, rsu);
        for (int other : uav_ids)
          if (other > uav) add_link(uav, other);
      }
      inst = rebuilt;
      break;
    }
  }
  return inst;
}

// Replication instance for one (point, seed): same structure, reseeded
// environment streams shared by every policy.
inline model::Instance instance_for_seed(const model::Instance& point_instance,
                                         std::uint64_t seed, int horizon) {
  model::Instance inst = point_instance;
  inst.seeds = point_instance.seeds.fork("experiment", seed);
  inst.seed_overrides.clear();
  if (horizon > 0) inst.time.total_frames = horizon;
  return inst;
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricsRow {
  double scenario_point = 0.0;
  std::string policy;
  double acceptance_mean = 0.0, acceptance_std = 0.0;
  double energy_mean = 0.0, energy_std = 0.0;
  double latency_mean = 0.0, latency_std = 0.0;
  std::optional<double> oracle_ratio;
};

struct RunOutput {
  std::vector<MetricsRow> rows;
  // per (point, policy, seed) episode summaries in task order
  struct EpisodeSummary {
    double scenario_point;
    std::string policy;
    std::uint64_t seed;
    double acceptance_pct;
    double energy_per_request;
    double latency_ms;
    double objective;
    int accepted;
    int total_requests;
  };
  std::vector<EpisodeSummary> episodes;
};

inline std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= double(values.size());
  return {mean, std::sqrt(var)};
}

inline int worker_count() {
  if (const char* env = std::getenv("AERO_ORCH_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

inline void write_trace(const orchestrator::EpisodeResult& episode, std::ostream& out);

inline orchestrator::EpisodeResult run_episode(const model::Instance& inst,
                                               orchestrator::PolicyKind policy,
                                               const orchestrator::OrchestratorConfig& orch,
                                               const model::Allocation* certificate = nullptr) {
  environment::World world(inst);
  for (int t = 1; t < inst.time.total_frames; ++t) world.advance();
  std::optional<model::Allocation> solved;
  if (policy == orchestrator::PolicyKind::oracle_replay && !certificate) {
    solved = allocate::oracle_solve(world, orch.alpha).best;
    certificate = &*solved;
  }
  orchestrator::Orchestrator driver(world, policy, orch, certificate);
  auto result = driver.run();
  return result;
}

inline RunOutput run_scenario(const RunConfig& config) {
  config.validate();
  RunOutput output;
  const std::vector<double> points =
      config.scenario == Scenario::single ? std::vector<double>{0.0} : config.sweep;

  struct Task {
    std::size_t index;
    double point;
    orchestrator::PolicyKind policy;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (double point : points)
    for (auto policy : config.policies)
      for (auto seed : config.seeds) tasks.push_back({tasks.size(), point, policy, seed});

  std::vector<RunOutput::EpisodeSummary> summaries(tasks.size());
  if (!config.trace_dir.empty()) std::filesystem::create_directories(config.trace_dir);

  // precompute point instances once; per-seed reseeding happens per task
  std::map<double, model::Instance> point_instances;
  for (double point : points)
    point_instances.emplace(point, apply_sweep(config.base, config.scenario, point));

  const int workers = std::min<int>(worker_count(), int(tasks.size()) == 0 ? 1 : int(tasks.size()));
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      const auto inst =
          instance_for_seed(point_instances.at(task.point), task.seed, config.horizon);
      const auto episode = run_episode(inst, task.policy, config.orch);
      if (!config.trace_dir.empty()) {
        std::ostringstream name;
        name << config.trace_dir << "/point_" << task.point << '_'
             << orchestrator::to_string(task.policy) << "_seed_" << task.seed << ".ndjson";
        std::ofstream trace(name.str());
        write_trace(episode, trace);
      }
      RunOutput::EpisodeSummary s;
      s.scenario_point = task.point;
      s.policy = orchestrator::to_string(task.policy);
      s.seed = task.seed;
      s.acceptance_pct = episode.acceptance_pct;
      s.energy_per_request =
          episode.accepted > 0 ? episode.total_energy / episode.accepted : episode.total_energy;
      s.latency_ms = episode.mean_latency_ms;
      s.objective = episode.objective;
      s.accepted = episode.accepted;
      s.total_requests = episode.total_requests;
      summaries[i] = std::move(s);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  output.episodes = summaries;

  for (double point : points) {
    for (auto policy : config.policies) {
      MetricsRow row;
      row.scenario_point = point;
      row.policy = orchestrator::to_string(policy);
      std::vector<double> acc, energy, latency, objective;
      for (const auto& s : summaries) {
        if (s.scenario_point != point || s.policy != row.policy) continue;
        acc.push_back(s.acceptance_pct);
        energy.push_back(s.energy_per_request);
        latency.push_back(s.latency_ms);
        objective.push_back(s.objective);
      }
      std::tie(row.acceptance_mean, row.acceptance_std) = mean_std(acc);
      std::tie(row.energy_mean, row.energy_std) = mean_std(energy);
      std::tie(row.latency_mean, row.latency_std) = mean_std(latency);

      if (config.oracle_ratio) {
        // only meaningful when each seed instance fits the oracle limits
        double policy_sum = 0.0, oracle_sum = 0.0;
        bool ok = true;
        for (auto seed : config.seeds) {
          const auto inst =
              instance_for_seed(point_instances.at(point), seed, config.horizon);
          try {
            environment::World world(inst);
            for (int t = 1; t < inst.time.total_frames; ++t) world.advance();
            const auto oracle = allocate::oracle_solve(world, config.orch.alpha);
            oracle_sum += oracle.report.objective_value;
          } catch (const allocate::OracleSizeError&) {
            ok = false;
            break;
          }
        }
        for (const auto& s : summaries)
          if (s.scenario_point == point && s.policy == row.policy) policy_sum += s.objective;
        if (ok && oracle_sum > 0.0) row.oracle_ratio = policy_sum / oracle_sum;
      }
      output.rows.push_back(std::move(row));
    }
  }
  return output;
}

// ---------------------------------------------------------------------------
// Emission: metrics.csv, summary.json, and one SVG line plot per metric.

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline void emit_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << "scenario_point,policy,acceptance_mean,acceptance_std,energy_mean,energy_std,"
         "latency_mean,latency_std,oracle_ratio\n";
  for (const auto& r : rows) {
    out << fmt(r.scenario_point) << ',' << r.policy << ',' << fmt(r.acceptance_mean) << ','
        << fmt(r.acceptance_std) << ',' << fmt(r.energy_mean) << ',' << fmt(r.energy_std) << ','
        << fmt(r.latency_mean) << ',' << fmt(r.latency_std) << ','
        << (r.oracle_ratio ? fmt(*r.oracle_ratio) : "") << '\n';
  }
}

inline std::vector<MetricsRow> read_csv(std::istream& in) {
  std::vector<MetricsRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    cells.resize(9);
    MetricsRow r;
    r.scenario_point = std::stod(cells[0]);
    r.policy = cells[1];
    r.acceptance_mean = std::stod(cells[2]);
    r.acceptance_std = std::stod(cells[3]);
    r.energy_mean = std::stod(cells[4]);
    r.energy_std = std::stod(cells[5]);
    r.latency_mean = std::stod(cells[6]);
    r.latency_std = std::stod(cells[7]);
    if (!cells[8].empty()) r.oracle_ratio = std::stod(cells[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// Minimal SVG line plot: one series per policy with a +-1 std band.
inline void emit_svg_plot(const std::vector<MetricsRow>& rows, const std::string& metric,
                          const std::string& title, std::ostream& out) {
  auto value_of = [&](const MetricsRow& r) {
    if (metric == "acceptance") return std::pair{r.acceptance_mean, r.acceptance_std};
    if (metric == "energy") return std::pair{r.energy_mean, r.energy_std};
    return std::pair{r.latency_mean, r.latency_std};
  };
  std::vector<std::string> policies;
  std::vector<double> points;
  for (const auto& r : rows) {
    if (std::find(policies.begin(), policies.end(), r.policy) == policies.end())
      policies.push_back(r.policy);
    if (std::find(points.begin(), points.end(), r.scenario_point) == points.end())
      points.push_back(r.scenario_point);
  }
  std::sort(points.begin(), points.end());

  double lo = 0.0, hi = 1.0;
  bool first = true;
  for (const auto& r : rows) {
    const auto [mean, sd] = value_of(r);
    if (first) {
      lo = mean - sd;
      hi = mean + sd;
      first = false;
    }
    lo = std::min(lo, mean - sd);
    hi = std::max(hi, mean + sd);
  }
  if (hi - lo < 1e-9) hi = lo + 1.0;

  const double width = 640, height = 400, ml = 60, mr = 20, mt = 40, mb = 40;
  auto xpos = [&](double p) {
    if (points.size() < 2) return ml + (width - ml - mr) / 2;
    return ml + (width - ml - mr) * (p - points.front()) / (points.back() - points.front());
  };
  auto ypos = [&](double v) { return height - mb - (height - mt - mb) * (v - lo) / (hi - lo); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << width / 2 << "' y='20' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";
  out << "<line x1='" << ml << "' y1='" << height - mb << "' x2='" << width - mr << "' y2='"
      << height - mb << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << height - mb
      << "' stroke='black'/>\n";
  out << "<text x='" << ml - 8 << "' y='" << ypos(lo) << "' text-anchor='end' font-size='10'>"
      << fmt_label(lo) << "</text>\n";
  out << "<text x='" << ml - 8 << "' y='" << ypos(hi) << "' text-anchor='end' font-size='10'>"
      << fmt_label(hi) << "</text>\n";
  for (double p : points)
    out << "<text x='" << xpos(p) << "' y='" << height - mb + 16
        << "' text-anchor='middle' font-size='10'>" << p << "</text>\n";

  int color_index = 0;
  for (const auto& policy : policies) {
    const char* color = colors[color_index % 5];
    // band polygon
    std::ostringstream band, line;
    std::vector<const MetricsRow*> series;
    for (double p : points)
      for (const auto& r : rows)
        if (r.policy == policy && r.scenario_point == p) series.push_back(&r);
    for (const auto* r : series) {
      const auto [mean, sd] = value_of(*r);
      band << xpos(r->scenario_point) << ',' << ypos(mean + sd) << ' ';
    }
    for (auto it = series.rbegin(); it != series.rend(); ++it) {
      const auto [mean, sd] = value_of(**it);
      band << xpos((*it)->scenario_point) << ',' << ypos(mean - sd) << ' ';
    }
    for (const auto* r : series) {
      const auto [mean, sd] = value_of(*r);
      line << xpos(r->scenario_point) << ',' << ypos(mean) << ' ';
    }
    out << "<polygon points='" << band.str() << "' fill='" << color << "' opacity='0.15'/>\n";
    out << "<polyline points='" << line.str() << "' fill='none' stroke='" << color
        << "' stroke-width='2'/>\n";
    out << "<text x='" << width - mr - 120 << "' y='" << mt + 16 * color_index
        << "' font-size='12' fill='" << color << "'>" << policy << "</text>\n";
    ++color_index;
  }
  out << "</svg>\n";
}

inline void emit_outputs(const RunOutput& output, const std::string& dir, bool plots = true) {
  if (output.rows.empty()) throw std::invalid_argument("emit_outputs: no rows");
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream csv(dir + "/metrics.csv");
    if (!csv) throw std::runtime_error("emit_outputs: cannot write " + dir + "/metrics.csv");
    emit_csv(output.rows, csv);
  }
  {
    nlohmann::json summary;
    summary["rows"] = nlohmann::json::array();
    for (const auto& r : output.rows) {
      nlohmann::json jr;
      jr["scenario_point"] = r.scenario_point;
      jr["policy"] = r.policy;
      jr["acceptance_mean"] = r.acceptance_mean;
      jr["acceptance_std"] = r.acceptance_std;
      jr["energy_mean"] = r.energy_mean;
      jr["energy_std"] = r.energy_std;
      jr["latency_mean"] = r.latency_mean;
      jr["latency_std"] = r.latency_std;
      if (r.oracle_ratio) jr["oracle_ratio"] = *r.oracle_ratio;
      summary["rows"].push_back(jr);
    }
    summary["episodes"] = nlohmann::json::array();
    for (const auto& e : output.episodes) {
      nlohmann::json je;
      je["scenario_point"] = e.scenario_point;
      je["policy"] = e.policy;
      je["seed"] = e.seed;
      je["acceptance_pct"] = e.acceptance_pct;
      je["energy_per_request"] = e.energy_per_request;
      je["latency_ms"] = e.latency_ms;
      je["objective"] = e.objective;
      je["accepted"] = e.accepted;
      je["total_requests"] = e.total_requests;
      summary["episodes"].push_back(je);
    }
    std::ofstream js(dir + "/summary.json");
    js << summary.dump(2) << "\n";
  }
  if (plots) {
    const std::pair<const char*, const char*> specs[] = {
        {"acceptance", "Acceptance (%)"}, {"energy", "Energy per request"},
        {"latency", "E2E latency (ms)"}};
    for (const auto& [metric, title] : specs) {
      std::ofstream svg(dir + "/" + metric + ".svg");
      emit_svg_plot(output.rows, metric, title, svg);
    }
  }
}

// ---------------------------------------------------------------------------
// Episode trace export (one JSON record per frame) and deterministic replay.

inline void write_trace(const orchestrator::EpisodeResult& episode, std::ostream& out) {
  for (const auto& f : episode.trace) {
    nlohmann::json j;
    j["frame"] = f.frame;
    j["hierarchical"] = f.hierarchical;
    j["r_tp"] = f.r_tp;
    j["r_mac"] = f.r_mac;
    j["r_pl"] = f.r_pl;
    j["r_hl"] = f.r_hl;
    j["active"] = f.active_requests;
    j["served"] = f.served;
    j["window_ends"] = f.window_ends;
    j["accepted"] = f.accepted;
    j["routing_failed"] = f.routing_failed;
    j["mask_infeasible"] = f.mask_infeasible;
    j["energy"] = f.energy;
    j["latencies"] = f.accepted_latency_ms;
    j["structural_violations"] = f.structural_violations;
    out << j.dump() << "\n";
  }
}

}  // namespace aero::harness
