// Command-line front end: scenario runs, the exact micro-instance solver,
// allocation checking, agent training with checkpoints, and deterministic
// replay of a saved run.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "aero/allocate.hpp"
#include "aero/harness.hpp"
#include "aero/io.hpp"
#include "aero/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace aero;

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::vector<std::string> policies;
  std::string scenario;
  int frames = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
  auto* opt = cmd->add_option("--config", flags.config, "instance/run configuration file");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seeds, "experiment seed (repeatable)");
  cmd->add_option("--out", flags.out, "output directory or file");
  cmd->add_option("--policy", flags.policies, "policy: perfect | random | oracle-replay");
  cmd->add_option("--scenario", flags.scenario,
                  "single | requests-sweep | network-sweep | channels-sweep");
  cmd->add_option("--frames", flags.frames, "override the horizon length");
}

harness::RunConfig load_config(const CommonFlags& flags) {
  harness::RunConfig config = harness::read_run_config(flags.config);
  const auto report = model::validate_instance(config.base);
  if (!report.ok()) {
    std::ostringstream os;
    os << "invalid instance '" << flags.config << "':";
    for (const auto& v : report.violations)
      os << "\n  " << v.entity << " " << v.id << ": " << v.message;
    throw std::runtime_error(os.str());
  }
  if (!flags.seeds.empty()) config.seeds = flags.seeds;
  if (!flags.out.empty()) config.out_dir = flags.out;
  if (flags.frames > 0) config.horizon = flags.frames;
  if (!flags.scenario.empty()) {
    auto s = harness::scenario_from_string(flags.scenario);
    if (!s) throw std::runtime_error("unknown scenario: " + flags.scenario);
    config.scenario = *s;
  }
  if (!flags.policies.empty()) {
    config.policies.clear();
    for (const auto& name : flags.policies) {
      auto p = orchestrator::policy_from_string(name);
      if (!p) throw std::runtime_error("unknown policy: " + name);
      config.policies.push_back(*p);
    }
  }
  return config;
}

void echo_run_config(const harness::RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  io::write_instance(config.base, out);
  out << "\n[run]\n";
  out << "policies = ";
  for (std::size_t i = 0; i < config.policies.size(); ++i)
    out << (i ? "," : "") << orchestrator::to_string(config.policies[i]);
  out << "\n";
  out << "seeds = [";
  for (std::size_t i = 0; i < config.seeds.size(); ++i) out << (i ? ", " : "") << config.seeds[i];
  out << "]\n";
  out << "horizon = " << config.horizon << "\n";
  out << "scenario = " << harness::to_string(config.scenario) << "\n";
  if (!config.sweep.empty()) {
    out << "sweep = [";
    for (std::size_t i = 0; i < config.sweep.size(); ++i)
      out << (i ? ", " : "") << harness::fmt(config.sweep[i]);
    out << "]\n";
  }
  out << "oracle_ratio = " << (config.oracle_ratio ? 1 : 0) << "\n";
  out << "emit_plots = " << (config.emit_plots ? 1 : 0) << "\n";
  const auto& o = config.orch;
  out << "alpha = " << harness::fmt(o.alpha) << "\n";
  out << "chi = " << harness::fmt(o.chi) << "\n";
  out << "kappa = " << harness::fmt(o.kappa) << "\n";
  out << "belief_lambda = " << harness::fmt(o.belief_lambda) << "\n";
  out << "history = " << o.history << "\n";
  out << "batch_size = " << o.batch_size << "\n";
  out << "learning_rate = " << harness::fmt(o.learning_rate) << "\n";
  out << "discount = " << harness::fmt(o.discount) << "\n";
  out << "sync_period = " << o.sync_period << "\n";
  out << "eps_decrement = " << harness::fmt(o.eps_decrement) << "\n";
  out << "eps_floor = " << harness::fmt(o.eps_floor) << "\n";
  out << "phase_boundary = " << harness::fmt(o.phase_boundary_fraction) << "\n";
  out << "input_scale = " << harness::fmt(o.input_scale) << "\n";
  out << "route_penalty = " << harness::fmt(o.route_penalty) << "\n";
  out << "hidden = [";
  for (std::size_t i = 0; i < o.hidden.size(); ++i) out << (i ? ", " : "") << o.hidden[i];
  out << "]\n";
}

int cmd_run(const CommonFlags& flags) {
  auto config = load_config(flags);
  config.validate();
  config.trace_dir = config.out_dir + "/traces";
  const auto output = harness::run_scenario(config);
  harness::emit_outputs(output, config.out_dir, config.emit_plots);
  echo_run_config(config, config.out_dir + "/run_echo.ini");
  std::cout << "wrote " << output.rows.size() << " metric rows to " << config.out_dir
            << "/metrics.csv\n";
  return 0;
}

int cmd_oracle(const CommonFlags& flags, double alpha, bool no_prune) {
  const auto config = load_config(flags);
  model::Instance inst = config.base;
  if (flags.frames > 0) inst.time.total_frames = flags.frames;
  if (!flags.seeds.empty()) {
    inst.seeds = SeedStreams(flags.seeds.front());
    inst.seed_overrides.clear();
  }
  environment::World world(inst);
  for (int t = 1; t < inst.time.total_frames; ++t) world.advance();
  const auto result = allocate::oracle_solve(world, alpha, {}, !no_prune);
  io::ObjectiveSummary summary;
  summary.accepted = result.report.accepted_count;
  summary.total_energy = result.report.total_energy;
  summary.objective_value = result.report.objective_value;
  summary.alpha = alpha;
  summary.explored = result.explored;
  const std::string path = flags.out.empty() ? "certificate.txt" : flags.out;
  io::write_allocation(result.best, summary, path);
  std::cout << "objective " << result.report.objective_value << " accepted "
            << result.report.accepted_count << " energy " << result.report.total_energy
            << " explored " << result.explored << "\n";
  std::cout << "certificate written to " << path << "\n";
  return 0;
}

int cmd_check(const CommonFlags& flags, const std::string& allocation_path) {
  const auto config = load_config(flags);
  model::Instance inst = config.base;
  if (flags.frames > 0) inst.time.total_frames = flags.frames;
  environment::World world(inst);
  for (int t = 1; t < inst.time.total_frames; ++t) world.advance();
  const auto [alloc, summary] = io::read_allocation(allocation_path);
  const auto violations = allocate::check_constraints(alloc, world);
  std::cout << violations.size() << " violations\n";
  for (const auto& v : violations) {
    std::cout << "  " << allocate::to_string(v.constraint) << " " << v.detail;
    if (v.frame >= 0) std::cout << " frame=" << v.frame;
    if (v.slot >= 0) std::cout << " slot=" << v.slot;
    if (v.request >= 0) std::cout << " request=" << v.request;
    if (v.function >= 0) std::cout << " function=" << v.function;
    if (v.node >= 0) std::cout << " node=" << v.node;
    if (v.link >= 0) std::cout << " link=" << v.link;
    if (v.channel >= 0) std::cout << " channel=" << v.channel;
    if (v.area >= 0) std::cout << " area=" << v.area;
    std::cout << "\n";
  }
  const auto report = allocate::objective(alloc, world, summary.alpha);
  std::cout << "objective " << report.objective_value << " accepted " << report.accepted_count
            << " energy " << report.total_energy << "\n";
  return violations.empty() ? 0 : 1;
}

int cmd_train(const CommonFlags& flags, int episodes, const std::string& checkpoint,
              const std::string& resume) {
  auto config = load_config(flags);
  std::optional<std::string> state;
  if (!resume.empty()) {
    std::ifstream in(resume);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + resume);
    std::ostringstream buf;
    buf << in.rdbuf();
    state = buf.str();
  }
  const std::uint64_t seed = config.seeds.empty() ? 1 : config.seeds.front();
  for (int ep = 0; ep < episodes; ++ep) {
    model::Instance inst = config.base;
    inst.seeds = config.base.seeds.fork("experiment", seed).fork("episode", std::uint64_t(ep));
    inst.seed_overrides.clear();
    if (config.horizon > 0) inst.time.total_frames = config.horizon;
    environment::World world(inst);
    for (int t = 1; t < inst.time.total_frames; ++t) world.advance();
    orchestrator::Orchestrator driver(world, orchestrator::PolicyKind::perfect, config.orch);
    if (state) {
      std::istringstream in(*state);
      driver.load_agents(in);
    }
    const auto result = driver.run();
    std::ostringstream out;
    driver.save_agents(out);
    state = out.str();
    double reward = 0.0;
    for (const auto& f : result.trace) reward += f.hierarchical ? f.r_hl : f.r_tp;
    std::cout << "episode " << ep << " objective " << result.objective << " accepted "
              << result.accepted << "/" << result.total_requests << " mean-frame-reward "
              << (result.trace.empty() ? 0.0 : reward / double(result.trace.size())) << "\n";
  }
  if (!checkpoint.empty() && state) {
    std::ofstream out(checkpoint);
    out << *state;
    std::cout << "checkpoint written to " << checkpoint << "\n";
  }
  return 0;
}

int cmd_replay(const CommonFlags& flags, const std::string& run_dir) {
  // Re-run the echoed configuration and compare metrics byte for byte.
  const std::string echo_path = run_dir + "/run_echo.ini";
  CommonFlags replay_flags = flags;
  replay_flags.config = echo_path;
  auto config = load_config(replay_flags);
  if (flags.out.empty()) config.out_dir = run_dir + "/replay";
  config.validate();
  const auto output = harness::run_scenario(config);
  harness::emit_outputs(output, config.out_dir, config.emit_plots);

  auto slurp = [](const std::string& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  const std::string original = slurp(run_dir + "/metrics.csv");
  const std::string replayed = slurp(config.out_dir + "/metrics.csv");
  if (original.empty()) {
    std::cerr << "no metrics.csv found in " << run_dir << "\n";
    return 2;
  }
  if (original == replayed) {
    std::cout << "replay matches: metrics identical\n";
    return 0;
  }
  std::cerr << "replay mismatch: metrics differ\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV-assisted vehicular edge orchestration simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags, oracle_flags, check_flags, train_flags, replay_flags;

  auto* run_cmd = app.add_subcommand("run", "execute a scenario and emit metrics");
  add_common(run_cmd, run_flags);

  auto* oracle_cmd = app.add_subcommand("oracle", "exact solve of a micro instance");
  add_common(oracle_cmd, oracle_flags);
  double alpha = 0.001;
  bool no_prune = false;
  oracle_cmd->add_option("--alpha", alpha, "energy scaling factor");
  oracle_cmd->add_flag("--no-prune", no_prune, "disable search pruning");

  auto* check_cmd = app.add_subcommand("check", "validate an allocation against an instance");
  add_common(check_cmd, check_flags);
  std::string allocation_path;
  check_cmd->add_option("--allocation", allocation_path, "allocation certificate file")->required();

  auto* train_cmd = app.add_subcommand("train", "train agents with checkpointing");
  add_common(train_cmd, train_flags);
  int episodes = 1;
  std::string checkpoint, resume;
  train_cmd->add_option("--episodes", episodes, "training episodes");
  train_cmd->add_option("--checkpoint", checkpoint, "write the final agent state here");
  train_cmd->add_option("--resume", resume, "resume from a checkpoint file");

  auto* replay_cmd = app.add_subcommand("replay", "re-run a saved run deterministically");
  add_common(replay_cmd, replay_flags, /*config_required=*/false);
  std::string run_dir;
  replay_cmd->add_option("--run-dir", run_dir, "directory produced by `run`")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(run_flags);
    if (oracle_cmd->parsed()) return cmd_oracle(oracle_flags, alpha, no_prune);
    if (check_cmd->parsed()) return cmd_check(check_flags, allocation_path);
    if (train_cmd->parsed()) return cmd_train(train_flags, episodes, checkpoint, resume);
    if (replay_cmd->parsed()) return cmd_replay(replay_flags, run_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
