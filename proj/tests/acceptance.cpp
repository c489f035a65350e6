// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion pins its tolerances in code and reports its
// runtime against the stated budget.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "aero/allocate.hpp"
#include "aero/environment.hpp"
#include "aero/harness.hpp"
#include "aero/learning.hpp"
#include "aero/mac.hpp"
#include "aero/orchestrator.hpp"

using namespace aero;
using Clock = std::chrono::steady_clock;

namespace {

struct Criterion {
  std::string name;
  double budget_s;
  std::function<bool(std::string&)> run;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// shared builders

model::Instance micro_template(std::uint64_t master, int requests, int uavs, int areas,
                               int channels, int slots, int frames, int functions) {
  model::Instance inst;
  inst.seeds = SeedStreams(master);
  inst.topology.grid.rows = 1;
  inst.topology.grid.cols = areas;
  Rng grid_rng(master ^ 0x5151);
  inst.topology.grid.los_probability.clear();
  for (int a = 0; a < areas; ++a) inst.topology.grid.los_probability.push_back(grid_rng.uniform(0.4, 0.9));
  inst.time.total_frames = frames;
  inst.time.slots_per_frame = slots;
  inst.ue_count = requests;
  inst.max_hops = 3;

  Rng rng(master ^ 0xabc);
  int id = 0;
  model::NodeSpec core;
  core.id = id++;
  core.kind = model::NodeKind::core;
  core.processing_capacity = rng.uniform(50, 70);
  core.deploy_energy = rng.uniform(12, 18);
  core.fixed_area = 0;
  inst.topology.nodes.push_back(core);
  model::NodeSpec rsu;
  rsu.id = id++;
  rsu.kind = model::NodeKind::rsu;
  rsu.processing_capacity = rng.uniform(25, 70);
  rsu.deploy_energy = rng.uniform(12, 36);
  rsu.fixed_area = areas > 1 ? 1 : 0;
  inst.topology.nodes.push_back(rsu);
  for (int u = 0; u < uavs; ++u) {
    model::NodeSpec uav;
    uav.id = id++;
    uav.kind = model::NodeKind::uav;
    uav.processing_capacity = rng.uniform(25, 70);
    uav.deploy_energy = rng.uniform(12, 36);
    model::UavParams params;
    params.weight_kg = rng.uniform(4, 6);
    params.velocity_mps = rng.uniform(8, 12);
    uav.uav = params;
    uav.initial_area = rng.uniform_int(0, areas - 1);
    inst.topology.nodes.push_back(uav);
  }
  int lid = 0;
  auto add_link = [&](int a, int b) {
    model::LinkSpec l;
    l.id = lid++;
    l.node_a = a;
    l.node_b = b;
    l.bandwidth_capacity = rng.uniform(10, 30);
    l.transmit_energy = rng.uniform(5, 8);
    l.base_latency_ms = rng.uniform(4, 16);
    inst.topology.links.push_back(l);
  };
  add_link(0, 1);
  for (const auto& n : inst.topology.nodes)
    if (n.is_uav()) {
      add_link(n.id, 1);
      add_link(n.id, 0);
    }

  model::ServiceSpec svc;
  svc.id = 0;
  for (int f = 0; f < functions; ++f) svc.functions.push_back(f);
  svc.duration_frames = 1;
  inst.services = {svc};

  for (int c = 0; c < channels; ++c) {
    model::ChannelSpec ch;
    ch.id = c;
    ch.use_energy = rng.uniform(2, 8);
    ch.phys.rayleigh_sigma = rng.uniform(0.2, 0.8);
    inst.channels.push_back(ch);
  }
  for (int r = 0; r < requests; ++r) {
    model::Request req;
    req.id = r;
    req.ue = r;
    req.service = 0;
    req.entry_frame = frames - 2;
    req.bandwidth_req = rng.uniform(2, 8);
    req.capacity_req.assign(std::size_t(functions), 0.0);
    for (auto& c : req.capacity_req) c = rng.uniform(8, 20);
    req.latency_req_ms = rng.uniform(50, 100);
    req.required_slots = std::min(rng.uniform_int(1, 3), slots);
    inst.requests.push_back(req);
  }
  return inst;
}

environment::World materialize(const model::Instance& inst) {
  environment::World world(inst);
  for (int t = 1; t < inst.time.total_frames; ++t) world.advance();
  return world;
}

// ---------------------------------------------------------------------------
// criterion 1: movement-energy closed form vs quadrature

bool energy_fidelity(std::string& detail) {
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    model::UavParams uav;
    uav.weight_kg = rng.uniform(4.0, 6.0);
    uav.velocity_mps = rng.uniform(8.0, 12.0);
    const double duration = rng.uniform(0.5, 600.0);
    const double closed = environment::uav_move_energy(uav, duration);
    const int panels = 10000;
    auto power = [&](double) {
      return environment::hover_power(uav) + environment::drag_power(uav, uav.velocity_mps);
    };
    const double h = duration / panels;
    double quad = 0.5 * (power(0.0) + power(duration));
    for (int i = 1; i < panels; ++i) quad += power(i * h);
    quad *= h;
    worst = std::max(worst, std::abs(closed - quad) / quad);
  }
  const double zero = environment::uav_move_energy(model::UavParams{}, 0.0);
  detail = "max rel err " + std::to_string(worst) + ", zero-displacement " + std::to_string(zero);
  return worst < 1e-9 && zero == 0.0;
}

// ---------------------------------------------------------------------------
// criterion 2: channel-quality distribution vs an independent Monte Carlo

bool channel_fidelity(std::string& detail) {
  model::ChannelSpec ch;
  const auto weather = environment::weather_from_regime(1);
  const double distance = 8000.0;
  const int n = 100000;

  Rng rng(202);
  int hits = 0;
  for (int i = 0; i < n; ++i)
    hits += environment::realize_channel(ch, 0.0, distance, weather, rng).quality ? 1 : 0;
  const double empirical = double(hits) / n;

  Rng oracle(777);
  int ref = 0;
  for (int i = 0; i < n; ++i) {
    const double rayleigh = oracle.rayleigh(ch.phys.rayleigh_sigma);
    const double chi = oracle.normal();
    const double gain = rayleigh * std::pow(10.0, chi * weather.shadowing_std_db / 10.0) *
                        std::pow(ch.phys.reference_distance / distance, ch.phys.path_loss_exponent) *
                        std::pow(10.0, -weather.attenuation_db / 10.0);
    if (ch.phys.transmit_power * gain / (ch.phys.noise_density * ch.phys.subcarrier_spacing) >=
        ch.phys.quality_threshold)
      ++ref;
  }
  const double reference = double(ref) / n;

  bool los_ok = true;
  for (int i = 0; i < 1000; ++i)
    los_ok = los_ok && environment::realize_channel(ch, 1.0, distance, weather, rng).quality;

  detail = "empirical " + std::to_string(empirical) + " vs reference " + std::to_string(reference) +
           ", forced-LoS all-quality " + (los_ok ? "yes" : "no");
  return std::abs(empirical - reference) <= 0.01 && los_ok;
}

// ---------------------------------------------------------------------------
// criterion 3: oracle vs checker, pruned vs brute force

bool oracle_agreement(std::string& detail) {
  int checked = 0;
  for (std::uint64_t seed = 300; seed < 350; ++seed) {
    Rng knobs(seed);
    const int requests = knobs.uniform_int(1, 2);
    const int uavs = knobs.uniform_int(1, 2);
    const int areas = knobs.uniform_int(2, 3);
    const int channels = knobs.uniform_int(1, 2);
    const int slots = knobs.uniform_int(2, 3);
    const int frames = knobs.uniform_int(2, 3);
    const int functions = knobs.uniform_int(1, 2);
    auto inst = micro_template(seed, requests, uavs, areas, channels, slots, frames, functions);
    const auto world = materialize(inst);
    const auto pruned = allocate::oracle_solve(world, 0.001, {}, true);
    const auto brute = allocate::oracle_solve(world, 0.001, {}, false);
    const auto violations = allocate::check_constraints(pruned.best, world);
    if (!violations.empty()) {
      detail = "seed " + std::to_string(seed) + ": oracle allocation has " +
               std::to_string(violations.size()) + " violations";
      return false;
    }
    if (std::abs(pruned.report.objective_value - brute.report.objective_value) > 1e-12) {
      detail = "seed " + std::to_string(seed) + ": pruned " +
               std::to_string(pruned.report.objective_value) + " vs brute " +
               std::to_string(brute.report.objective_value);
      return false;
    }
    ++checked;
  }
  detail = std::to_string(checked) + " micro instances: checker-clean, pruned == brute force";
  return checked == 50;
}

// ---------------------------------------------------------------------------
// criterion 4: MAC safety over randomized frames plus the exact hand trace

bool mac_safety(std::string& detail) {
  // hand trace: beliefs {c1: 0.9, c0: 0.4}, two quota-3 requests, ten slots
  {
    auto inst = micro_template(400, 2, 0, 1, 2, 10, 3, 1);
    for (auto& r : inst.requests) r.required_slots = 3;
    mac::ChannelBeliefTable beliefs(2, 1, 0.3);
    beliefs.set(0, 0, 0.4);
    beliefs.set(1, 0, 0.9);
    std::vector<const model::Request*> active;
    for (const auto& r : inst.requests) active.push_back(&r);
    const auto priorities = mac::compute_priorities(active, inst, inst.requests[0].entry_frame);
    const auto grid = mac::allocate_channels(inst, {1, 1}, {0, 0}, active, priorities, beliefs, 10);
    const auto& b0 = grid.blocks.at(0);
    const auto& b1 = grid.blocks.at(1);
    if (!(b0.channel == 1 && b0.slot_begin == 0 && b0.slot_end == 3 && b1.channel == 1 &&
          b1.slot_begin == 3 && b1.slot_end == 6)) {
      detail = "hand trace mismatch";
      return false;
    }
    for (const auto& [cell, rid] : grid.occupant)
      if (std::get<1>(cell) != 1) {
        detail = "hand trace: the weaker channel was used";
        return false;
      }
  }

  Rng rng(404);
  for (int frame = 0; frame < 10000; ++frame) {
    const int requests = rng.uniform_int(0, 8);
    const int channels = rng.uniform_int(1, 4);
    const int slots = rng.uniform_int(1, 10);
    const int nodes = rng.uniform_int(1, 4);
    const int areas = rng.uniform_int(1, 3);
    model::Instance inst;
    inst.topology.grid.rows = 1;
    inst.topology.grid.cols = areas;
    inst.topology.grid.los_probability.assign(std::size_t(areas), 0.5);
    inst.time.slots_per_frame = slots;
    inst.time.total_frames = 4;
    inst.ue_count = requests;
    for (int n = 0; n < nodes; ++n) {
      model::NodeSpec node;
      node.id = n;
      node.kind = model::NodeKind::rsu;
      node.processing_capacity = 40;
      node.deploy_energy = 10;
      node.fixed_area = n % areas;
      inst.topology.nodes.push_back(node);
    }
    model::ServiceSpec svc;
    svc.id = 0;
    svc.functions = {0};
    svc.duration_frames = 2;
    inst.services = {svc};
    for (int c = 0; c < channels; ++c) {
      model::ChannelSpec ch;
      ch.id = c;
      ch.use_energy = 2;
      inst.channels.push_back(ch);
    }
    for (int r = 0; r < requests; ++r) {
      model::Request req;
      req.id = r;
      req.ue = r;
      req.service = 0;
      req.entry_frame = rng.uniform_int(0, 1);
      req.bandwidth_req = 5;
      req.capacity_req = {10};
      req.latency_req_ms = 80;
      req.required_slots = rng.uniform_int(1, 10);
      inst.requests.push_back(req);
    }
    mac::ChannelBeliefTable beliefs(channels, areas, 0.3);
    for (int c = 0; c < channels; ++c)
      for (int a = 0; a < areas; ++a) beliefs.set(c, a, rng.uniform01());
    auto poa = std::vector<int>(std::size_t(requests));
    for (auto& p : poa) p = rng.uniform_int(-1, nodes - 1);
    auto node_area = std::vector<int>(std::size_t(nodes));
    for (auto& a : node_area) a = rng.uniform_int(0, areas - 1);
    std::vector<const model::Request*> active;
    for (const auto& r : inst.requests) active.push_back(&r);
    const auto priorities = mac::compute_priorities(active, inst, 1);
    const auto grid = mac::allocate_channels(inst, poa, node_area, active, priorities, beliefs, slots);

    // C3: at most one block, inside the frame
    for (const auto& [rid, block] : grid.blocks)
      if (block.slot_begin < 0 || block.slot_end > slots || block.slot_begin >= block.slot_end) {
        detail = "frame " + std::to_string(frame) + ": malformed block";
        return false;
      }
    // C4: (area, channel, slot) used at most once
    std::set<std::tuple<int, int, int>> cells;
    for (const auto& [key, rid] : grid.occupant) {
      const auto [node, channel, slot] = key;
      if (!cells.insert({node_area[std::size_t(node)], channel, slot}).second) {
        detail = "frame " + std::to_string(frame) + ": C4 collision";
        return false;
      }
    }
  }
  detail = "10000 randomized frames clean; hand trace exact";
  return true;
}

// ---------------------------------------------------------------------------
// criterion 5: EWMA belief tracking

bool bayesian_tracking(std::string& detail) {
  const double p = 0.7;
  int ok = 0;
  double worst = 0.0;
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(std::uint64_t(seed) + 5000);
    mac::ChannelBeliefTable table(1, 1, 0.1);
    double sum = 0.0;
    const int frames = 1000;
    for (int t = 0; t < frames; ++t) {
      mac::observe_and_update(table, {{{0, 0}, rng.bernoulli(p) ? 1.0 : 0.0}});
      sum += table.get(0, 0);
    }
    const double err = std::abs(sum / frames - p);
    worst = std::max(worst, err);
    if (err <= 0.05) ++ok;
  }
  detail = std::to_string(ok) + "/50 seeds within 0.05 (worst " + std::to_string(worst) + ")";
  return ok == 50;
}

// ---------------------------------------------------------------------------
// criterion 6: learning-core numerics

bool d3ql_numerics(std::string& detail) {
  Rng rng(606);
  // dueling identity
  learning::DuelingMlp net({5, 4, {12, 8}, learning::Activation::tanh_fn, 1.0}, 11);
  double worst_identity = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto state = std::vector<double>(5);
    for (auto& v : state) v = rng.uniform(-2, 2);
    const auto f = net.forward(state);
    const auto q = learning::DuelingMlp::combine(f);
    double mean = 0.0;
    for (double v : q) mean += v - f.value;
    worst_identity = std::max(worst_identity, std::abs(mean / double(q.size())));
  }
  if (worst_identity > 1e-9) {
    detail = "dueling identity off by " + std::to_string(worst_identity);
    return false;
  }

  // gradient vs central differences on 10 random points
  double worst_grad = 0.0;
  for (int point = 0; point < 10; ++point) {
    auto state = std::vector<double>(5);
    for (auto& v : state) v = rng.uniform(-1, 1);
    const int action = point % 4;
    const auto grad = net.gradient(state, action);
    auto params = net.parameters();
    const double h = 1e-5;
    for (std::size_t i = 0; i < params.size(); i += 5) {
      auto plus = params, minus = params;
      plus[i] += h;
      minus[i] -= h;
      learning::DuelingMlp np = net, nm = net;
      np.set_parameters(plus);
      nm.set_parameters(minus);
      const double fd =
          (np.q_values(state)[std::size_t(action)] - nm.q_values(state)[std::size_t(action)]) /
          (2 * h);
      const double err =
          std::abs(grad[i] - fd) / std::max({std::abs(fd), std::abs(grad[i]), 1e-2});
      worst_grad = std::max(worst_grad, err);
    }
  }
  if (worst_grad >= 1e-4) {
    detail = "gradient check worst rel err " + std::to_string(worst_grad);
    return false;
  }

  // double target with synced weights equals the plain max target
  learning::QConfig config;
  config.mlp.input_dim = 3;
  config.mlp.actions = 3;
  config.mlp.hidden = {8};
  config.discount = 0.8;
  learning::QFunction qf(config, 9);
  for (int i = 0; i < 50; ++i) {
    learning::Transition t;
    t.state = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    t.action = 0;
    t.reward = rng.uniform(-1, 1);
    t.next_state = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto q = qf.online().q_values(t.next_state);
    const double plain = t.reward + 0.8 * *std::max_element(q.begin(), q.end());
    if (qf.double_target(t) != plain) {
      detail = "double target with synced weights differs from the max target";
      return false;
    }
  }

  // epsilon decay sequence with the reference schedule values
  learning::EpsilonSchedule schedule{1.0, 0.00005, 0.0001};
  for (int k = 1; k <= 25000; ++k) {
    schedule.decay();
    const double expect = std::max(1.0 - k * 0.00005, 0.0001);
    // iterated subtraction accumulates at most one half-ulp per step
    if (std::abs(schedule.epsilon - expect) > 1e-11) {
      detail = "epsilon decay diverged at step " + std::to_string(k);
      return false;
    }
  }
  detail = "identity " + std::to_string(worst_identity) + ", grad " + std::to_string(worst_grad) +
           ", targets exact, decay exact";
  return true;
}

// ---------------------------------------------------------------------------
// criterion 7: convergence smoke on the toy scenario

harness::SynthParams toy_params(std::uint64_t seed) {
  harness::SynthParams p;
  p.rows = 1;
  p.cols = 5;
  p.rsus = 1;
  p.uavs = 1;
  p.channels = 2;
  p.services = 2;
  p.functions_per_service = 1;
  p.function_pool = 2;
  p.ue_count = 5;
  p.slots_per_frame = 8;
  p.total_frames = 300;
  p.arrival_rate = 1.2;
  p.master_seed = seed;
  return p;
}

orchestrator::OrchestratorConfig toy_config() {
  orchestrator::OrchestratorConfig config;
  config.learning_rate = 0.001;  // pinned by the criterion
  config.batch_size = 32;        // pinned by the criterion
  config.eps_decrement = 0.005;
  config.eps_floor = 0.02;
  config.hidden = {32};
  return config;
}

bool convergence_smoke(std::string& detail) {
  int improved = 0, jumped = 0;
  const int seeds = 30;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto inst = harness::make_instance(toy_params(std::uint64_t(seed) + 700));
    const auto world = materialize(inst);
    orchestrator::Orchestrator driver(world, orchestrator::PolicyKind::perfect, toy_config());
    const auto result = driver.run();
    std::vector<double> reward;
    int switch_index = -1;
    for (const auto& f : result.trace) {
      reward.push_back(f.hierarchical ? f.r_hl : f.r_tp);
      if (switch_index < 0 && f.hierarchical) switch_index = int(reward.size()) - 1;
    }
    const int n = int(reward.size());
    const int tenth = n / 10;
    double lead = 0.0, trail = 0.0;
    for (int i = 0; i < tenth; ++i) lead += reward[std::size_t(i)];
    for (int i = n - tenth; i < n; ++i) trail += reward[std::size_t(i)];
    if (trail / tenth > lead / tenth) ++improved;
    if (switch_index >= 20 && switch_index + 20 <= n) {
      double before = 0.0, after = 0.0;
      for (int i = switch_index - 20; i < switch_index; ++i) before += reward[std::size_t(i)];
      for (int i = switch_index; i < switch_index + 20; ++i) after += reward[std::size_t(i)];
      if (after >= before) ++jumped;
    }
  }
  detail = "trailing>leading in " + std::to_string(improved) + "/30, non-negative switch jump in " +
           std::to_string(jumped) + "/30";
  return improved >= 27 && jumped > seeds / 2;
}

// ---------------------------------------------------------------------------
// criterion 8: trained policy vs random baseline on micro instances

bool oracle_relative_quality(std::string& detail) {
  // train agents over a sequence of micro episodes
  auto train_inst = micro_template(800, 2, 1, 2, 2, 3, 3, 1);
  orchestrator::OrchestratorConfig config;
  config.learning_rate = 0.005;
  config.eps_decrement = 0.005;
  config.eps_floor = 0.05;
  config.hidden = {16};
  std::string state;
  for (int ep = 0; ep < 200; ++ep) {
    model::Instance inst = train_inst;
    inst.seeds = train_inst.seeds.fork("train-episode", std::uint64_t(ep));
    const auto world = materialize(inst);
    orchestrator::Orchestrator driver(world, orchestrator::PolicyKind::perfect, config);
    if (!state.empty()) {
      std::istringstream in(state);
      driver.load_agents(in);
    }
    driver.run();
    std::ostringstream out;
    driver.save_agents(out);
    state = out.str();
  }

  int wins = 0, losses = 0;
  double perfect_sum = 0.0, random_sum = 0.0, oracle_sum = 0.0;
  for (int seed = 0; seed < 30; ++seed) {
    double perfect_mean = 0.0, random_mean = 0.0;
    const int worlds = 4;  // per-seed mean over a few evaluation worlds
    for (int w = 0; w < worlds; ++w) {
      model::Instance inst = train_inst;
      inst.seeds = train_inst.seeds.fork("eval", std::uint64_t(seed * worlds + w));
      const auto wp = materialize(inst);
      const auto wr = materialize(inst);
      orchestrator::Orchestrator perfect(wp, orchestrator::PolicyKind::perfect, config);
      {
        std::istringstream in(state);
        perfect.load_agents(in);
      }
      orchestrator::Orchestrator random(wr, orchestrator::PolicyKind::random, config);
      perfect_mean += perfect.run().objective / worlds;
      random_mean += random.run().objective / worlds;
      const auto wo = materialize(inst);
      oracle_sum += allocate::oracle_solve(wo, 0.001).report.objective_value / worlds;
    }
    perfect_sum += perfect_mean;
    random_sum += random_mean;
    if (perfect_mean > random_mean) ++wins;
    else if (perfect_mean < random_mean) ++losses;
  }
  // one-sided sign test at 0.05: exact binomial tail over the non-ties
  const int n = wins + losses;
  double tail = 0.0;
  for (int k = wins; k <= n; ++k) {
    double term = 1.0;
    for (int i = 0; i < k; ++i) term *= double(n - i) / double(i + 1);
    tail += term * std::pow(0.5, n);
  }
  const double ratio = oracle_sum > 0.0 ? perfect_sum / oracle_sum : 0.0;
  std::ostringstream os;
  os << "wins " << wins << "/" << n << " (p=" << tail << "), mean objective perfect "
     << perfect_sum / 30 << " vs random " << random_sum / 30 << "; oracle ratio " << ratio
     << " (informational, target 0.7)";
  detail = os.str();
  return perfect_sum / 30 >= random_sum / 30 && tail <= 0.05;
}

// ---------------------------------------------------------------------------
// criterion 9: scenario trends

int inversions(const std::vector<double>& series, bool increasing) {
  int count = 0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (increasing && series[i] < series[i - 1] - 1e-9) ++count;
    if (!increasing && series[i] > series[i - 1] + 1e-9) ++count;
  }
  return count;
}

std::vector<double> scenario_acceptance(harness::Scenario scenario, std::vector<double> sweep,
                                        const harness::SynthParams& params) {
  harness::RunConfig config;
  config.base = harness::make_instance(params);
  config.policies = {orchestrator::PolicyKind::perfect};
  config.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  config.scenario = scenario;
  config.sweep = std::move(sweep);
  config.orch.eps_decrement = 0.01;
  config.orch.eps_floor = 0.05;
  config.orch.hidden = {24};
  config.orch.learning_rate = 0.005;
  const auto output = harness::run_scenario(config);
  std::vector<double> acceptance;
  for (const auto& row : output.rows) acceptance.push_back(row.acceptance_mean);
  return acceptance;
}

bool scenario_trends(std::string& detail) {
  harness::SynthParams base;
  base.rows = 2;
  base.cols = 3;
  base.rsus = 4;
  base.uavs = 2;
  base.channels = 4;
  base.services = 3;
  base.functions_per_service = 1;
  base.function_pool = 3;
  base.max_service_duration = 2;
  base.ue_count = 8;
  base.slots_per_frame = 10;
  base.total_frames = 120;
  base.arrival_rate = 3.0;
  base.master_seed = 900;

  // scenario I: increasing request load, fixed network and channels
  const auto load = scenario_acceptance(harness::Scenario::requests_sweep, {2, 4, 6, 8}, base);
  const int inv1 = inversions(load, /*increasing=*/false);

  // scenario II: growing node count (UAV fleet), fixed load and channels
  const auto nodes = scenario_acceptance(harness::Scenario::network_sweep, {5, 6, 8, 10}, base);
  const int inv2 = inversions(nodes, /*increasing=*/true);

  // scenario III: growing channel count under concentrated demand with
  // capacity slack, so resource blocks are the binding resource
  harness::SynthParams chan_base = base;
  chan_base.rows = 1;
  chan_base.cols = 3;
  chan_base.rsus = 3;
  chan_base.uavs = 3;
  chan_base.arrival_rate = 8.0;
  const auto channels = scenario_acceptance(harness::Scenario::channels_sweep, {2, 4, 6, 8}, chan_base);
  const int inv3 = inversions(channels, /*increasing=*/true);

  auto fmt_series = [](const std::vector<double>& v) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << "]";
    return os.str();
  };
  detail = "load " + fmt_series(load) + " inversions " + std::to_string(inv1) + "; nodes " +
           fmt_series(nodes) + " inversions " + std::to_string(inv2) + "; channels " +
           fmt_series(channels) + " inversions " + std::to_string(inv3);
  return inv1 <= 1 && inv2 <= 1 && inv3 <= 1;
}

// ---------------------------------------------------------------------------
// criterion 10: determinism and replay

bool determinism_replay(std::string& detail) {
  harness::SynthParams params;
  params.rows = 3;
  params.cols = 3;
  params.rsus = 2;
  params.uavs = 2;
  params.channels = 3;
  params.services = 2;
  params.functions_per_service = 1;
  params.function_pool = 2;
  params.ue_count = 6;
  params.slots_per_frame = 8;
  params.total_frames = 40;
  params.arrival_rate = 2.0;
  params.master_seed = 1000;

  harness::RunConfig config;
  config.base = harness::make_instance(params);
  config.policies = {orchestrator::PolicyKind::perfect, orchestrator::PolicyKind::random};
  config.seeds = {11, 12};
  config.orch.eps_decrement = 0.02;
  config.orch.hidden = {8};

  const auto a = harness::run_scenario(config);
  const auto b = harness::run_scenario(config);
  std::ostringstream csv_a, csv_b;
  harness::emit_csv(a.rows, csv_a);
  harness::emit_csv(b.rows, csv_b);
  if (csv_a.str() != csv_b.str()) {
    detail = "metrics differ across identical runs";
    return false;
  }

  // bit-identical traces for one representative episode
  const auto inst = harness::instance_for_seed(config.base, 11, 0);
  const auto e1 = harness::run_episode(inst, orchestrator::PolicyKind::perfect, config.orch);
  const auto e2 = harness::run_episode(inst, orchestrator::PolicyKind::perfect, config.orch);
  std::ostringstream t1, t2;
  harness::write_trace(e1, t1);
  harness::write_trace(e2, t2);
  if (t1.str() != t2.str() || !(e1.allocation == e2.allocation)) {
    detail = "episode traces differ across identical runs";
    return false;
  }
  detail = "metrics and traces byte-identical across repeated runs";
  return true;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"1 energy model fidelity (1e-9 vs quadrature)", 1.0, energy_fidelity},
      {"2 channel model fidelity (0.01 vs monte carlo)", 10.0, channel_fidelity},
      {"3 oracle/checker agreement on 50 micro instances", 300.0, oracle_agreement},
      {"4 MAC safety over 10^4 randomized frames", 30.0, mac_safety},
      {"5 Bayesian estimator tracks Bernoulli(0.7)", 5.0, bayesian_tracking},
      {"6 learning-core numerics", 60.0, d3ql_numerics},
      {"7 convergence smoke on the toy scenario", 600.0, convergence_smoke},
      {"8 trained policy beats the random baseline", 600.0, oracle_relative_quality},
      {"9 scenario trends (load / nodes / channels)", 1800.0, scenario_trends},
      {"10 determinism and replay", 120.0, determinism_replay},
  };

  int failures = 0;
  for (auto& criterion : criteria) {
    const auto start = Clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed = seconds_since(start);
    if (elapsed > criterion.budget_s) {
      ok = false;
      detail += " [over budget " + std::to_string(criterion.budget_s) + "s]";
    }
    std::printf("criterion %-52s %s (%.2fs) %s\n", criterion.name.c_str(),
                ok ? "PASS" : "FAIL", elapsed, detail.c_str());
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
