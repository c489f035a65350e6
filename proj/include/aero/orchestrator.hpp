// The per-frame orchestration loop: prediction, trajectory planning, PoA
// selection, channel allocation, placement, routing, serving, reward
// propagation, and training. Produces a checker-clean allocation plus a
// frame-by-frame trace.
#pragma once

#include <bit>
#include <deque>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "aero/agents.hpp"
#include "aero/allocate.hpp"
#include "aero/environment.hpp"
#include "aero/learning.hpp"
#include "aero/mac.hpp"
#include "aero/model.hpp"

namespace aero::orchestrator {

enum class PolicyKind { perfect, random, oracle_replay };

inline const char* to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::perfect: return "perfect";
    case PolicyKind::random: return "random";
    case PolicyKind::oracle_replay: return "oracle-replay";
  }
  return "?";
}

inline std::optional<PolicyKind> policy_from_string(const std::string& s) {
  if (s == "perfect") return PolicyKind::perfect;
  if (s == "random") return PolicyKind::random;
  if (s == "oracle-replay" || s == "oracle_replay") return PolicyKind::oracle_replay;
  return std::nullopt;
}

struct OrchestratorConfig {
  double alpha = 0.001;
  double chi = 0.5;
  double kappa = 0.8;
  double belief_lambda = 0.3;
  int history = 4;
  int batch_size = 32;
  double learning_rate = 0.001;
  double discount = 0.8;
  int sync_period = 200;
  std::size_t replay_tp = 2000;
  std::size_t replay_pl = 1000;
  double eps_decrement = 0.00005;
  double eps_floor = 0.0001;
  double phase_boundary_fraction = 0.25;
  std::vector<int> hidden = {64, 64};
  double input_scale = 0.02;
  double route_penalty = 1.0;
  double predictor_decay = 0.2;
};

struct FrameOutcome {
  int frame = 0;
  bool hierarchical = false;
  double r_tp = 0.0, r_mac = 0.0, r_pl = 0.0, r_hl = 0.0;
  int active_requests = 0;
  int served = 0;             // requests fully served this frame
  int window_ends = 0;        // requests whose window closed this frame
  int accepted = 0;           // of those, fully accepted
  int routing_failed = 0;
  int mask_infeasible = 0;
  double energy = 0.0;        // this frame's slice of the C1 aggregate
  std::vector<double> accepted_latency_ms;
  int structural_violations = 0;  // C3/C4/C10/C11 on this frame
};

struct EpisodeResult {
  std::vector<FrameOutcome> trace;
  model::Allocation allocation;
  int total_requests = 0;  // windows fully inside the horizon
  int accepted = 0;
  double total_energy = 0.0;
  double objective = 0.0;
  double mean_latency_ms = 0.0;  // over accepted requests
  double acceptance_pct = 0.0;

  void finalize(const environment::World& world, double alpha) {
    const auto& inst = world.instance();
    total_requests = 0;
    accepted = 0;
    double latency_sum = 0.0;
    int latency_count = 0;
    for (const auto& r : world.requests()) {
      if (inst.window_end(r) >= allocation.frame_count()) continue;
      ++total_requests;
      if (allocate::acceptance(allocation, inst, r)) {
        ++accepted;
        latency_sum += allocate::request_latency_ms(allocation, world, r);
        ++latency_count;
      }
    }
    total_energy = allocate::total_energy(allocation, world).total();
    objective = double(accepted) - alpha * total_energy;
    mean_latency_ms = latency_count ? latency_sum / latency_count : 0.0;
    acceptance_pct = total_requests ? 100.0 * double(accepted) / double(total_requests) : 0.0;
  }
};

class Orchestrator {
 public:
  Orchestrator(const environment::World& world, PolicyKind policy, const OrchestratorConfig& config,
               const model::Allocation* certificate = nullptr)
      : world_(&world),
        inst_(&world.instance()),
        policy_(policy),
        config_(config),
        alloc_(model::Allocation::for_instance(*inst_)),
        beliefs_(inst_->channel_count(), inst_->area_count(), config.belief_lambda),
        predictor_(inst_->area_count(), int(inst_->services.size()), config.predictor_decay),
        certificate_(certificate) {
    if (policy_ == PolicyKind::oracle_replay && !certificate_)
      throw std::invalid_argument("oracle-replay policy requires a certificate allocation");
    uavs_ = inst_->topology.uav_ids();
    layout_.areas = inst_->area_count();
    layout_.uav_count = int(uavs_.size());
    layout_.history = config.history;
    function_count_ = inst_->function_count();

    if (policy_ == PolicyKind::perfect) init_agents();
    explore_rng_ = inst_->stream("explore");
    policy_rng_ = inst_->stream("policy");

    // frame 0: initial node areas and PoA bindings
    const int frames = inst_->time.total_frames;
    if (frames > 0) {
      for (const auto& n : inst_->topology.nodes) alloc_.set_node_area(0, n.id, n.home_area());
      if (certificate_) copy_certificate_frame(0);
      else bind_poas(0);
      push_history(0);
      pl_state_prev_.assign(std::size_t(pl_state_dim()), 0.0);
    }
    phase_boundary_ = int(config_.phase_boundary_fraction * double(frames));
  }

  // Agents persist across episodes when the orchestrator is rebuilt; these
  // let the harness carry them over and checkpoint them.
  void adopt_agents(learning::QFunction tp, learning::QFunction pl, learning::EpsilonSchedule etp,
                    learning::EpsilonSchedule epl, learning::ReplayMemory rtp,
                    learning::ReplayMemory rpl) {
    qf_tp_ = std::move(tp);
    qf_pl_ = std::move(pl);
    eps_tp_ = etp;
    eps_pl_ = epl;
    replay_tp_ = std::move(rtp);
    replay_pl_ = std::move(rpl);
  }
  const learning::QFunction& tp_qfunction() const { return qf_tp_; }
  const learning::QFunction& pl_qfunction() const { return qf_pl_; }
  const learning::EpsilonSchedule& tp_schedule() const { return eps_tp_; }
  const learning::EpsilonSchedule& pl_schedule() const { return eps_pl_; }
  const learning::ReplayMemory& tp_replay() const { return replay_tp_; }
  const learning::ReplayMemory& pl_replay() const { return replay_pl_; }
  const mac::ChannelBeliefTable& beliefs() const { return beliefs_; }
  const model::Allocation& allocation() const { return alloc_; }

  EpisodeResult run() {
    EpisodeResult result;
    const int frames = inst_->time.total_frames;
    for (int d = 1; d < frames; ++d) result.trace.push_back(run_frame(d));
    result.allocation = alloc_;
    result.finalize(*world_, config_.alpha);
    return result;
  }

  // One decided frame. The world realization for frame d must exist.
  FrameOutcome run_frame(int d) {
    FrameOutcome out;
    out.frame = d;
    out.hierarchical = d >= phase_boundary_;

    const auto active = active_requests(d);
    out.active_requests = int(active.size());

    // --- trajectory planning -------------------------------------------
    const std::vector<double> tp_state = agents::tp_encode(history_, layout_);
    std::vector<int> tp_actions;
    if (policy_ == PolicyKind::oracle_replay) {
      copy_certificate_frame(d);
    } else {
      std::vector<int> target(uavs_.size());
      if (policy_ == PolicyKind::perfect && layout_.uav_count > 0) {
        const auto decision = agents::tp_step(qf_tp_, eps_tp_, tp_state, layout_, explore_rng_);
        for (std::size_t k = 0; k < uavs_.size(); ++k) target[k] = decision.target_area[k];
        tp_actions = decision.action_index;
      } else {
        for (std::size_t k = 0; k < uavs_.size(); ++k)
          target[k] = policy_rng_.uniform_int(0, layout_.areas - 1);
      }
      for (const auto& n : inst_->topology.nodes)
        alloc_.set_node_area(d, n.id, n.is_uav() ? target[uav_index(n.id)] : n.home_area());
    }
    if (policy_ == PolicyKind::perfect) eps_tp_.decay();

    double movement = 0.0;
    for (int uav : uavs_) {
      const int a1 = alloc_.node_area(d - 1, uav);
      const int a2 = alloc_.node_area(d, uav);
      if (a1 != a2)
        movement += environment::relocation_energy(inst_->topology.grid,
                                                   inst_->topology.nodes[std::size_t(uav)], a1, a2);
    }

    // --- PoA selection ---------------------------------------------------
    if (policy_ != PolicyKind::oracle_replay) bind_poas(d);
    const auto node_area = alloc_.node_areas(d);
    const auto poa = poa_vector(d);

    // --- MAC: observe, update beliefs, allocate, reward ------------------
    std::map<std::pair<int, int>, double> observations;
    for (int c = 0; c < inst_->channel_count(); ++c)
      for (int uav : uavs_) {
        const int area = alloc_.node_area(d, uav);
        observations[{c, area}] = world_->frame_quality_average(d, c, area);
      }
    mac::observe_and_update(beliefs_, observations);

    mac::RBGrid grid;
    if (policy_ == PolicyKind::oracle_replay) {
      // channel cells come from the certificate; nothing to allocate
    } else {
      const auto priorities = mac::compute_priorities(active, *inst_, d);
      mac::AllocOrdering ordering;
      if (policy_ == PolicyKind::random) {
        ordering.channel_order = [this](std::vector<int>& v) { mac::shuffle_ints(v, policy_rng_); };
        ordering.request_order = [this](std::vector<int>& v) { mac::shuffle_ints(v, policy_rng_); };
      }
      grid = mac::allocate_channels(*inst_, poa, node_area, active, priorities, beliefs_,
                                    inst_->time.slots_per_frame, ordering);
      for (const auto& [rid, block] : grid.blocks)
        for (int s = block.slot_begin; s < block.slot_end; ++s)
          alloc_.assign_channel(d, rid, s, block.channel);
    }
    const auto quality_at = [&](int slot, int channel, int area) {
      return world_->quality(d, slot, channel, area);
    };
    out.r_mac = mac::mac_reward(grid, quality_at, active, world_->frame(d).ue_area);

    // --- placement -------------------------------------------------------
    // demand is read off the channel-served active requests; the mask
    // threshold is the smallest single requester per function, since
    // admission later fills each hosting node up to its capacity anyway
    std::vector<double> served_demand_state(std::size_t(function_count_), 0.0);
    std::vector<double> mask_demand(std::size_t(function_count_), 0.0);
    for (const auto* r : active) {
      const int slots_granted = allocated_slots(d, r->id);
      if (slots_granted <= 0) continue;
      const auto& chain = inst_->service_of(*r).functions;
      for (std::size_t i = 0; i < chain.size(); ++i) {
        served_demand_state[std::size_t(chain[i])] += double(slots_granted) * r->capacity_req[i];
        double& threshold = mask_demand[std::size_t(chain[i])];
        if (threshold <= 0.0 || r->capacity_req[i] < threshold) threshold = r->capacity_req[i];
      }
    }

    std::vector<int> pl_actions;
    if (policy_ != PolicyKind::oracle_replay) {
      std::vector<double> residual(std::size_t(inst_->node_count()));
      for (const auto& n : inst_->topology.nodes) residual[std::size_t(n.id)] = n.processing_capacity;
      for (int f = 0; f < function_count_; ++f) {
        if (mask_demand[std::size_t(f)] <= 0.0) continue;
        const auto mask_all = agents::pl_mask(mask_demand, residual, function_count_,
                                              inst_->node_count());
        std::vector<std::uint8_t> row(mask_all.mask.size(), 0);
        bool any = false;
        for (int n = 0; n < inst_->node_count(); ++n) {
          const std::size_t idx = std::size_t(f) * std::size_t(inst_->node_count()) + std::size_t(n);
          row[idx] = mask_all.mask[idx];
          any = any || row[idx];
        }
        if (!any) {
          ++out.mask_infeasible;
          continue;
        }
        int action;
        if (policy_ == PolicyKind::perfect) {
          action = learning::epsilon_greedy(qf_pl_, pl_state_prev_, eps_pl_, row, explore_rng_);
        } else {
          std::vector<int> valid;
          for (std::size_t i = 0; i < row.size(); ++i)
            if (row[i]) valid.push_back(int(i));
          action = valid[std::size_t(policy_rng_.uniform_int(0, int(valid.size()) - 1))];
        }
        const int node = action % inst_->node_count();
        alloc_.place_function(d, f, node);
        residual[std::size_t(node)] -= mask_demand[std::size_t(f)];
        pl_actions.push_back(action);
      }
      if (policy_ == PolicyKind::perfect) eps_pl_.decay();
    }

    // --- serving: quota, capacity admission, routing ----------------------
    const auto serving = serve_frame(d, active, poa, node_area);

    // --- rewards -----------------------------------------------------------
    out.r_tp = agents::tp_reward(active, poa, movement, config_.alpha);
    out.r_pl = agents::pl_reward(serving.served, serving.deploy_energy, serving.link_energy,
                                 int(serving.routing_failed.size()), config_.alpha,
                                 config_.route_penalty);
    out.r_hl = out.r_tp + config_.chi * out.r_mac + config_.kappa * out.r_pl;
    out.served = serving.served;
    out.routing_failed = int(serving.routing_failed.size());

    // --- learning -----------------------------------------------------------
    push_history(d);  // completes O^{t+1} for both agents
    const std::vector<double> tp_state_next = agents::tp_encode(history_, layout_);
    std::vector<double> pl_state_next(std::size_t(pl_state_dim()), 0.0);
    {
      std::vector<const model::NodeSpec*> node_ptrs;
      for (const auto& n : inst_->topology.nodes) node_ptrs.push_back(&n);
      pl_state_next = agents::pl_encode(served_demand_state, node_ptrs);
    }
    if (policy_ == PolicyKind::perfect) {
      const double tp_train_reward = out.hierarchical ? out.r_hl : out.r_tp;
      const double pl_train_reward = out.hierarchical ? out.r_hl : out.r_pl;
      for (std::size_t k = 0; k < tp_actions.size(); ++k) {
        learning::Transition t;
        t.state = tp_state;
        t.action = tp_actions[k];
        t.reward = tp_train_reward;
        t.next_state = tp_state_next;
        t.next_mask = agents::tp_slice_mask(layout_, int(k));
        replay_tp_.push(std::move(t));
      }
      for (int action : pl_actions) {
        learning::Transition t;
        t.state = pl_state_prev_;
        t.action = action;
        t.reward = pl_train_reward;
        t.next_state = pl_state_next;
        replay_pl_.push(std::move(t));
      }
      if (layout_.uav_count > 0 && replay_tp_.size() >= std::size_t(config_.batch_size))
        qf_tp_.train_step(replay_tp_.sample(std::size_t(config_.batch_size)));
      if (replay_pl_.size() >= std::size_t(config_.batch_size))
        qf_pl_.train_step(replay_pl_.sample(std::size_t(config_.batch_size)));
    }
    pl_state_prev_ = pl_state_next;

    // --- predictor bookkeeping ----------------------------------------------
    std::vector<std::pair<int, int>> arrivals;
    for (const auto& r : world_->requests())
      if (r.entry_frame == d) arrivals.push_back({world_->ue_area_at(d, r.ue), r.service});
    predictor_.observe(arrivals);

    // --- response-frame accounting -------------------------------------------
    // A request closes when its response lands: every window frame served
    // and the committed tail matching the realized PoA.
    for (const auto& r : world_->requests()) {
      if (inst_->window_end(r) != d) continue;
      ++out.window_ends;
      const int duration = inst_->service_of(r).duration_frames;
      auto it = served_frames_.find(r.id);
      const bool all_served = it != served_frames_.end() && it->second == duration;
      const auto tail_it = committed_tail_.find(r.id);
      const bool tail_ok =
          tail_it != committed_tail_.end() && alloc_.poa_of(d, r.ue) == tail_it->second;
      if (all_served && tail_ok) {
        ++out.accepted;
        out.accepted_latency_ms.push_back(latency_accum_.count(r.id) ? latency_accum_.at(r.id) : 0.0);
      } else if (all_served) {
        // tail prediction missed: the response is undeliverable, so the
        // request is rejected and its selections are cleared for the checker
        for (int t = inst_->window_begin(r); t < inst_->window_end(r); ++t)
          for (int f : inst_->service_of(r).functions) alloc_.select_function(t, r.id, f, false);
      }
    }

    // --- frame energy slice and structural check -----------------------------
    out.energy = movement + serving.deploy_energy + serving.link_energy + channel_energy(d);
    out.structural_violations = structural_check(d, active);
    return out;
  }

  void save_agents(std::ostream& out) const;
  void load_agents(std::istream& in);

 private:
  struct ServingResult {
    int served = 0;
    double deploy_energy = 0.0;
    double link_energy = 0.0;
    std::vector<int> routing_failed;
  };

  void init_agents() {
    learning::QConfig tp_cfg;
    tp_cfg.mlp.input_dim = layout_.state_dim();
    tp_cfg.mlp.actions = std::max(1, layout_.action_dim());
    tp_cfg.mlp.hidden = config_.hidden;
    tp_cfg.mlp.activation = learning::Activation::tanh_fn;
    tp_cfg.mlp.input_scale = config_.input_scale;
    tp_cfg.learning_rate = config_.learning_rate;
    tp_cfg.discount = config_.discount;
    tp_cfg.sync_period = config_.sync_period;
    qf_tp_ = learning::QFunction(tp_cfg, inst_->stream("tp-init").next_u64());

    learning::QConfig pl_cfg = tp_cfg;
    pl_cfg.mlp.input_dim = pl_state_dim();
    pl_cfg.mlp.actions = std::max(1, function_count_ * inst_->node_count());
    pl_cfg.mlp.activation = learning::Activation::leaky_relu;
    qf_pl_ = learning::QFunction(pl_cfg, inst_->stream("pl-init").next_u64());

    eps_tp_ = {1.0, config_.eps_decrement, config_.eps_floor};
    eps_pl_ = {1.0, config_.eps_decrement, config_.eps_floor};
    replay_tp_ = learning::ReplayMemory(config_.replay_tp, inst_->stream("tp-replay").next_u64());
    replay_pl_ = learning::ReplayMemory(config_.replay_pl, inst_->stream("pl-replay").next_u64());
  }

  int pl_state_dim() const { return function_count_ + 2 * inst_->node_count(); }

  // path sets depend only on the node-area configuration; UAVs revisit the
  // same configurations constantly, so memoize
  const std::vector<model::PathSpec>& paths_for(const std::vector<int>& node_area) {
    auto it = path_cache_.find(node_area);
    if (it == path_cache_.end())
      it = path_cache_
               .emplace(node_area, model::build_path_set(inst_->topology, inst_->max_hops, node_area))
               .first;
    return it->second;
  }

  std::size_t uav_index(int node_id) const {
    for (std::size_t k = 0; k < uavs_.size(); ++k)
      if (uavs_[k] == node_id) return k;
    throw std::out_of_range("uav_index");
  }

  std::vector<const model::Request*> active_requests(int t) const {
    std::vector<const model::Request*> out;
    for (const auto& r : world_->requests())
      if (inst_->active_at(r, t)) out.push_back(&r);
    return out;
  }

  std::vector<environment::UEState> ue_states_at(int t) const {
    // reconstructed from the realized areas; headings follow the live state
    std::vector<environment::UEState> out(std::size_t(inst_->ue_count));
    for (int u = 0; u < inst_->ue_count; ++u) {
      out[std::size_t(u)].ue = u;
      out[std::size_t(u)].area = world_->ue_area_at(t, u);
      out[std::size_t(u)].heading = world_->ue_heading_at(t, u);
    }
    return out;
  }

  void bind_poas(int t) {
    std::vector<double> residual(std::size_t(inst_->node_count()));
    for (const auto& n : inst_->topology.nodes) residual[std::size_t(n.id)] = n.processing_capacity;
    auto poa = agents::select_poa(world_->frame(t).ue_area, alloc_.node_areas(t), residual);
    // honor outstanding response commitments: a UE expecting its reply at
    // this frame stays bound to the committed tail while that node covers it
    const auto node_area = alloc_.node_areas(t);
    std::set<int> overridden;
    for (const auto& r : world_->requests()) {
      if (inst_->window_end(r) != t) continue;
      if (overridden.count(r.ue)) continue;  // first pending response wins
      auto it = committed_tail_.find(r.id);
      if (it == committed_tail_.end()) continue;
      const int node = it->second;
      if (node >= 0 && node_area[std::size_t(node)] == world_->ue_area_at(t, r.ue) &&
          poa[std::size_t(r.ue)] >= 0) {
        poa[std::size_t(r.ue)] = node;
        overridden.insert(r.ue);
      }
    }
    for (int u = 0; u < inst_->ue_count; ++u) {
      alloc_.clear_poa(t, u);
      if (poa[std::size_t(u)] >= 0) alloc_.bind_poa(t, u, poa[std::size_t(u)]);
    }
  }

  std::vector<int> poa_vector(int t) const {
    std::vector<int> out(std::size_t(inst_->ue_count), -1);
    for (int u = 0; u < inst_->ue_count; ++u) out[std::size_t(u)] = alloc_.poa_of(t, u);
    return out;
  }

  void copy_certificate_frame(int d) {
    if (!certificate_ || d >= certificate_->frame_count()) return;
    const auto& src = certificate_->frame(d);
    auto& dst = alloc_.frame(d);
    dst.node_area = src.node_area;
    dst.poa = src.poa;
    dst.place = src.place;
    dst.requests = src.requests;
  }

  int allocated_slots(int d, int rid) const {
    int count = 0;
    for (int s = 0; s < inst_->time.slots_per_frame; ++s)
      if (alloc_.slot_channels(d, rid, s) != 0) ++count;
    return count;
  }

  ServingResult serve_frame(int d, const std::vector<const model::Request*>& active,
                            const std::vector<int>& poa, const std::vector<int>& node_area) {
    ServingResult result;
    const int nodes = inst_->node_count();

    if (policy_ == PolicyKind::oracle_replay) {
      // serving already encoded in the certificate; account it
      for (const auto* r : active) {
        const auto& chain = inst_->service_of(*r).functions;
        bool served = true;
        for (int f : chain) served = served && alloc_.function_selected(d, r->id, f);
        if (served) {
          ++result.served;
          ++served_frames_[r->id];
        }
        if (const auto* path = alloc_.path_of(d, r->id)) {
          latency_accum_[r->id] += allocate::route_latency_ms(alloc_, *world_, d, *path);
          committed_tail_[r->id] = path->nodes.back();
        }
      }
      for (int f = 0; f < function_count_; ++f)
        for (int n = 0; n < nodes; ++n)
          if (alloc_.placed(d, f, n))
            result.deploy_energy += inst_->topology.nodes[std::size_t(n)].deploy_energy;
      for (const auto& [rid, rf] : alloc_.frame(d).requests)
        if (rf.path)
          for (int l : rf.path->links)
            result.link_energy += inst_->topology.links[std::size_t(l)].transmit_energy;
      return result;
    }

    // 1. eligibility: quality quota met and whole chain placed
    struct Pending {
      const model::Request* r;
      int head;
      int tail;
    };
    std::vector<Pending> pending;
    for (const auto* r : active) {
      if (allocate::quality_slots(alloc_, *world_, d, *r) < r->required_slots) continue;
      const auto& chain = inst_->service_of(*r).functions;
      bool placed_all = true;
      for (int f : chain) {
        bool anywhere = false;
        for (int n = 0; n < nodes; ++n) anywhere = anywhere || alloc_.placed(d, f, n);
        placed_all = placed_all && anywhere;
      }
      if (!placed_all) continue;

      const int entry = inst_->window_begin(*r);
      const int head = alloc_.poa_of(entry, r->ue);
      if (head < 0) continue;
      const int tail = resolve_tail(d, *r, poa, node_area);
      if (tail < 0) continue;
      pending.push_back({r, head, tail});
    }

    // 2. capacity admission in deadline-priority order (C8 by construction)
    std::vector<double> node_load(std::size_t(nodes), 0.0);
    const auto priorities = mac::compute_priorities(active, *inst_, d);
    std::vector<Pending> admitted;
    for (int rid : priorities.ordered) {
      auto it = std::find_if(pending.begin(), pending.end(),
                             [&](const Pending& p) { return p.r->id == rid; });
      if (it == pending.end()) continue;
      const auto& chain = inst_->service_of(*it->r).functions;
      // a request's chain may put several functions on one node; admission
      // must test the combined addition, not each increment alone
      std::vector<double> addition(std::size_t(nodes), 0.0);
      for (std::size_t i = 0; i < chain.size(); ++i)
        for (int n = 0; n < nodes; ++n)
          if (alloc_.placed(d, chain[i], n)) addition[std::size_t(n)] += it->r->capacity_req[i];
      bool fits = true;
      for (int n = 0; n < nodes; ++n)
        if (node_load[std::size_t(n)] + addition[std::size_t(n)] >
            inst_->topology.nodes[std::size_t(n)].processing_capacity + 1e-9)
          fits = false;
      if (!fits) continue;
      for (int n = 0; n < nodes; ++n) node_load[std::size_t(n)] += addition[std::size_t(n)];
      admitted.push_back(*it);
    }

    // 3. routing
    std::vector<agents::RouteCandidate> candidates;
    for (const auto& p : admitted) {
      agents::RouteCandidate c;
      c.request = p.r;
      c.head = p.head;
      c.tail = p.tail;
      const double used = latency_accum_.count(p.r->id) ? latency_accum_.at(p.r->id) : 0.0;
      c.latency_budget_ms = p.r->latency_req_ms - used;
      candidates.push_back(c);
    }
    const auto& paths = paths_for(node_area);
    const auto routing = agents::pl_route(*inst_, paths, alloc_.frame(d).place, candidates);
    result.routing_failed = routing.failed;
    result.link_energy = routing.link_energy;

    // 4. commit served requests; latencies are read back only after every
    //    route is stored, so the recorded values match the checker's
    //    final-load recomputation exactly
    std::set<int> used_functions;
    std::vector<std::pair<int, const model::ChosenPath*>> committed;
    for (const auto& p : admitted) {
      auto it = routing.routes.find(p.r->id);
      if (it == routing.routes.end()) continue;
      alloc_.set_path(d, p.r->id, it->second);
      const auto& chain = inst_->service_of(*p.r).functions;
      for (int f : chain) {
        alloc_.select_function(d, p.r->id, f);
        used_functions.insert(f);
      }
      ++result.served;
      ++served_frames_[p.r->id];
      committed.push_back({p.r->id, &it->second});
    }
    for (const auto& [rid, path] : committed)
      latency_accum_[rid] += allocate::route_latency_ms(alloc_, *world_, d, *path);

    // 5. roll back placements that ended up serving nobody
    for (int f = 0; f < function_count_; ++f) {
      if (used_functions.count(f)) continue;
      for (int n = 0; n < nodes; ++n)
        if (alloc_.placed(d, f, n)) alloc_.place_function(d, f, n, false);
    }
    for (int f = 0; f < function_count_; ++f)
      for (int n = 0; n < nodes; ++n)
        if (alloc_.placed(d, f, n))
          result.deploy_energy += inst_->topology.nodes[std::size_t(n)].deploy_energy;
    return result;
  }

  // Expected PoA at the response frame (one past the window), where the
  // reply is delivered. Committed once per request at its first served
  // frame; the request dies at the response frame if the prediction missed.
  int resolve_tail(int d, const model::Request& r, const std::vector<int>& poa,
                   const std::vector<int>& node_area) {
    const int response = inst_->window_end(r);
    auto it = committed_tail_.find(r.id);
    if (it != committed_tail_.end()) return it->second;
    const auto dist = agents::Predictor::multi_step_distribution(
        inst_->topology.grid, world_->ue_area_at(d, r.ue), world_->ue_heading_at(d, r.ue),
        response - d);
    int best_area = 0;
    for (int a = 1; a < inst_->area_count(); ++a)
      if (dist[std::size_t(a)] > dist[std::size_t(best_area)]) best_area = a;
    // likely PoA there; static nodes are the only reliable anchors since
    // UAV positions at the response frame are not yet decided
    int best_node = -1;
    bool best_static = false;
    for (int n = 0; n < inst_->node_count(); ++n) {
      if (node_area[std::size_t(n)] != best_area) continue;
      const bool is_static = !inst_->topology.nodes[std::size_t(n)].is_uav();
      const double cap = inst_->topology.nodes[std::size_t(n)].processing_capacity;
      if (best_node < 0 || (is_static && !best_static) ||
          (is_static == best_static &&
           cap > inst_->topology.nodes[std::size_t(best_node)].processing_capacity))
        best_node = n;
    }
    if (best_node < 0) best_node = poa[std::size_t(r.ue)];
    if (best_node >= 0) committed_tail_[r.id] = best_node;
    return best_node;
  }

  double channel_energy(int d) const {
    double e = 0.0;
    for (const auto& [rid, rf] : alloc_.frame(d).requests)
      for (int s = 0; s < inst_->time.slots_per_frame; ++s) {
        const std::uint32_t mask = rf.slot_channel[std::size_t(s)];
        for (int c = 0; c < inst_->channel_count(); ++c)
          if ((mask >> c) & 1u) e += inst_->channels[std::size_t(c)].use_energy;
      }
    return e;
  }

  void push_history(int t) {
    agents::TpFrameFeatures features;
    features.area_demand =
        agents::area_demand(active_requests(t), world_->frame(t).ue_area, layout_.areas);
    for (int uav : uavs_) features.uav_area.push_back(alloc_.node_area(t, uav));
    history_.push_back(std::move(features));
    while (int(history_.size()) > layout_.history) history_.pop_front();
  }

  int structural_check(int d, const std::vector<const model::Request*>& active) const {
    int violations = 0;
    for (const auto* r : active)
      for (int s = 0; s < inst_->time.slots_per_frame; ++s)
        if (std::popcount(alloc_.slot_channels(d, r->id, s)) > 1) ++violations;  // C3
    for (int s = 0; s < inst_->time.slots_per_frame; ++s)
      for (int c = 0; c < inst_->channel_count(); ++c) {
        std::map<int, int> per_area;
        for (const auto* r : active)
          if (alloc_.channel_assigned(d, r->id, s, c)) per_area[world_->ue_area_at(d, r->ue)]++;
        for (const auto& [area, count] : per_area)
          if (count > 1) ++violations;  // C4
      }
    for (int n = 0; n < inst_->node_count(); ++n) {
      int areas_held = 0;
      for (int a = 0; a < inst_->area_count(); ++a)
        if (alloc_.node_in_area(d, n, a)) ++areas_held;
      if (areas_held != 1) ++violations;  // C10
    }
    for (const auto* r : active) {
      const int degree = alloc_.poa_degree(d, r->ue);
      if (degree > 1) ++violations;  // C11
      if (degree == 1) {
        const int node = alloc_.poa_of(d, r->ue);
        if (alloc_.node_area(d, node) != world_->ue_area_at(d, r->ue)) ++violations;
      }
    }
    return violations;
  }

  const environment::World* world_;
  const model::Instance* inst_;
  PolicyKind policy_;
  OrchestratorConfig config_;
  model::Allocation alloc_;
  mac::ChannelBeliefTable beliefs_;
  agents::Predictor predictor_;
  const model::Allocation* certificate_;

  std::vector<int> uavs_;
  agents::TpLayout layout_;
  int function_count_ = 0;
  int phase_boundary_ = 0;

  learning::QFunction qf_tp_, qf_pl_;
  learning::EpsilonSchedule eps_tp_, eps_pl_;
  learning::ReplayMemory replay_tp_, replay_pl_;
  Rng explore_rng_, policy_rng_;

  std::deque<agents::TpFrameFeatures> history_;
  std::vector<double> pl_state_prev_;
  std::map<int, int> served_frames_;
  std::map<int, double> latency_accum_;
  std::map<int, int> committed_tail_;
  std::map<std::vector<int>, std::vector<model::PathSpec>> path_cache_;
};

// ---------------------------------------------------------------------------
// Agent checkpointing (bit-exact round trip).

inline void write_replay(std::ostream& out, const learning::ReplayMemory& replay) {
  out << replay.capacity() << ' ' << replay.size() << '\n';
  for (const auto& t : replay.buffer()) {
    learning::detail::write_vector(out, t.state);
    out << t.action << ' ' << learning::detail::double_to_hex(t.reward) << ' ' << t.terminal << '\n';
    learning::detail::write_vector(out, t.next_state);
    out << t.next_mask.size();
    for (auto m : t.next_mask) out << ' ' << int(m);
    out << '\n';
  }
  const auto rng_words = const_cast<learning::ReplayMemory&>(replay).rng().state();
  for (auto w : rng_words) out << w << ' ';
  out << '\n';
}

inline learning::ReplayMemory read_replay(std::istream& in) {
  std::size_t capacity = 0, size = 0;
  in >> capacity >> size;
  learning::ReplayMemory replay(capacity, 0);
  for (std::size_t i = 0; i < size; ++i) {
    learning::Transition t;
    t.state = learning::detail::read_vector(in);
    std::string reward_hex;
    in >> t.action >> reward_hex >> t.terminal;
    t.reward = learning::detail::hex_to_double(reward_hex);
    t.next_state = learning::detail::read_vector(in);
    std::size_t mask_size = 0;
    in >> mask_size;
    t.next_mask.resize(mask_size);
    for (auto& m : t.next_mask) {
      int v;
      in >> v;
      m = std::uint8_t(v);
    }
    replay.push(std::move(t));
  }
  std::vector<std::uint64_t> words(4);
  for (auto& w : words) in >> w;
  replay.rng().restore(words);
  return replay;
}

inline void Orchestrator::save_agents(std::ostream& out) const {
  out << "agents 1\n";
  qf_tp_.save(out);
  qf_pl_.save(out);
  out << learning::detail::double_to_hex(eps_tp_.epsilon) << ' '
      << learning::detail::double_to_hex(eps_tp_.decrement) << ' '
      << learning::detail::double_to_hex(eps_tp_.floor) << '\n';
  out << learning::detail::double_to_hex(eps_pl_.epsilon) << ' '
      << learning::detail::double_to_hex(eps_pl_.decrement) << ' '
      << learning::detail::double_to_hex(eps_pl_.floor) << '\n';
  write_replay(out, replay_tp_);
  write_replay(out, replay_pl_);
  learning::detail::write_vector(out, beliefs_.raw());
}

inline void Orchestrator::load_agents(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "agents") throw std::runtime_error("load_agents: bad header");
  qf_tp_.load(in);
  qf_pl_.load(in);
  auto read_schedule = [&](learning::EpsilonSchedule& s) {
    std::string a, b, c;
    in >> a >> b >> c;
    s.epsilon = learning::detail::hex_to_double(a);
    s.decrement = learning::detail::hex_to_double(b);
    s.floor = learning::detail::hex_to_double(c);
  };
  read_schedule(eps_tp_);
  read_schedule(eps_pl_);
  replay_tp_ = read_replay(in);
  replay_pl_ = read_replay(in);
  beliefs_.raw() = learning::detail::read_vector(in);
}

}  // namespace aero::orchestrator
