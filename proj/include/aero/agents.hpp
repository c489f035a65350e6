// The three decision modules riding on the learning core: trajectory
// planning state/action/reward, PoA selection, the placement agent's mask
// and routing heuristic, and the model-based arrival/mobility predictor.
#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "aero/environment.hpp"
#include "aero/learning.hpp"
#include "aero/model.hpp"

namespace aero::agents {

// ---------------------------------------------------------------------------
// Trajectory planning state: a window of per-area demand totals and one-hot
// UAV positions, oldest frame first, zero-padded at episode start.

struct TpLayout {
  int areas = 0;
  int uav_count = 0;
  int history = 4;

  int frame_dim() const { return areas * (1 + uav_count); }
  int state_dim() const { return history * frame_dim(); }
  int action_dim() const { return uav_count * areas; }
};

struct TpFrameFeatures {
  std::vector<double> area_demand;  // [areas]
  std::vector<int> uav_area;        // [uav_count]
};

// Demand of an area: total required function capacity of the active
// requests whose UE currently sits there.
inline std::vector<double> area_demand(const std::vector<const model::Request*>& active,
                                       const std::vector<int>& ue_area, int areas) {
  std::vector<double> demand(std::size_t(areas), 0.0);
  for (const auto* r : active) {
    double total = 0.0;
    for (double c : r->capacity_req) total += c;
    demand[std::size_t(ue_area[std::size_t(r->ue)])] += total;
  }
  return demand;
}

inline std::vector<double> tp_encode(const std::deque<TpFrameFeatures>& history,
                                     const TpLayout& layout) {
  std::vector<double> state(std::size_t(layout.state_dim()), 0.0);
  const int pad = layout.history - int(history.size());
  for (int h = 0; h < int(history.size()); ++h) {
    const auto& frame = history[std::size_t(h)];
    const std::size_t base = std::size_t(pad + h) * std::size_t(layout.frame_dim());
    for (int a = 0; a < layout.areas; ++a) state[base + std::size_t(a)] = frame.area_demand[std::size_t(a)];
    for (int k = 0; k < layout.uav_count; ++k) {
      const int area = frame.uav_area[std::size_t(k)];
      state[base + std::size_t(layout.areas) + std::size_t(k) * std::size_t(layout.areas) +
            std::size_t(area)] = 1.0;
    }
  }
  return state;
}

// Coverage term of the TP reward: requests whose UE holds a PoA binding.
inline double tp_reward(const std::vector<const model::Request*>& active_next,
                        const std::vector<int>& poa_of_ue, double movement_energy, double alpha) {
  double covered = 0.0;
  for (const auto* r : active_next)
    if (poa_of_ue[std::size_t(r->ue)] >= 0) covered += 1.0;
  return covered - alpha * movement_energy;
}

// One factored trajectory decision: each UAV picks an area from its own
// slice of the joint action head, all against the same state.
struct TpDecision {
  std::vector<int> target_area;    // [uav]
  std::vector<int> action_index;   // index into the joint head per uav
};

inline std::vector<std::uint8_t> tp_slice_mask(const TpLayout& layout, int uav) {
  std::vector<std::uint8_t> mask(std::size_t(layout.action_dim()), 0);
  for (int a = 0; a < layout.areas; ++a)
    mask[std::size_t(uav) * std::size_t(layout.areas) + std::size_t(a)] = 1;
  return mask;
}

inline TpDecision tp_step(const learning::QFunction& qf, const learning::EpsilonSchedule& schedule,
                          const std::vector<double>& state, const TpLayout& layout, Rng& rng) {
  TpDecision decision;
  for (int k = 0; k < layout.uav_count; ++k) {
    const auto mask = tp_slice_mask(layout, k);
    const int action = learning::epsilon_greedy(qf, state, schedule, mask, rng);
    decision.action_index.push_back(action);
    decision.target_area.push_back(action - k * layout.areas);
  }
  return decision;
}

// ---------------------------------------------------------------------------
// PoA selection: bind each UE to a covering node, preferring the largest
// residual capacity, then the lowest node id. Unbound UEs get -1.

inline std::vector<int> select_poa(const std::vector<int>& ue_area,
                                   const std::vector<int>& node_area,
                                   const std::vector<double>& residual_capacity) {
  std::vector<int> poa(ue_area.size(), -1);
  for (std::size_t u = 0; u < ue_area.size(); ++u) {
    int best = -1;
    for (std::size_t n = 0; n < node_area.size(); ++n) {
      if (node_area[n] != ue_area[u]) continue;
      if (best < 0 || residual_capacity[n] > residual_capacity[std::size_t(best)]) best = int(n);
    }
    poa[u] = best;
  }
  return poa;
}

// ---------------------------------------------------------------------------
// Prediction: exact one-step mobility distributions from the Manhattan law
// plus exponentially decayed per-area service arrival frequencies.

struct LikelyRequest {
  int area = 0;
  int service = 0;
  double probability = 0.0;
};

struct PredictionReport {
  std::vector<std::vector<double>> ue_next_area;   // [ue][area], each sums to one
  std::vector<std::vector<double>> issuance;       // [area][service] in [0,1]
  std::vector<LikelyRequest> ranked;               // descending probability
};

class Predictor {
 public:
  Predictor() = default;
  Predictor(int areas, int services, double decay = 0.2)
      : areas_(areas), services_(services), decay_(decay),
        freq_(std::size_t(areas), std::vector<double>(std::size_t(services), 0.0)) {}

  double decay() const { return decay_; }
  const std::vector<std::vector<double>>& frequencies() const { return freq_; }

  // Fold in one frame of observed arrivals (request entry events by the
  // issuing UE's area).
  void observe(const std::vector<std::pair<int, int>>& arrivals /* (area, service) */) {
    for (auto& row : freq_)
      for (auto& f : row) f *= (1.0 - decay_);
    for (const auto& [area, service] : arrivals) freq_[std::size_t(area)][std::size_t(service)] += decay_;
  }

  PredictionReport report(const model::AreaGrid& grid,
                          const std::vector<environment::UEState>& ues) const {
    PredictionReport out;
    out.ue_next_area.reserve(ues.size());
    for (const auto& ue : ues)
      out.ue_next_area.push_back(environment::transition_distribution(grid, ue.area, ue.heading));
    out.issuance = freq_;
    for (auto& row : out.issuance)
      for (auto& p : row) p = std::clamp(p, 0.0, 1.0);
    for (int a = 0; a < areas_; ++a)
      for (int s = 0; s < services_; ++s)
        if (out.issuance[std::size_t(a)][std::size_t(s)] > 0.0)
          out.ranked.push_back({a, s, out.issuance[std::size_t(a)][std::size_t(s)]});
    std::stable_sort(out.ranked.begin(), out.ranked.end(),
                     [](const LikelyRequest& x, const LikelyRequest& y) {
                       if (x.probability != y.probability) return x.probability > y.probability;
                       if (x.area != y.area) return x.area < y.area;
                       return x.service < y.service;
                     });
    return out;
  }

  // Multi-step area distribution (chained one-step law), used to aim the
  // inquiry path's tail at the UE's likely final PoA.
  static std::vector<double> multi_step_distribution(const model::AreaGrid& grid, int area,
                                                     environment::Heading heading, int steps) {
    // First step conditions on the known heading; afterwards headings mix,
    // so the law is approximated by averaging over headings.
    std::vector<double> dist(std::size_t(grid.area_count()), 0.0);
    dist[std::size_t(area)] = 1.0;
    for (int s = 0; s < steps; ++s) {
      std::vector<double> next(dist.size(), 0.0);
      for (int a = 0; a < grid.area_count(); ++a) {
        if (dist[std::size_t(a)] <= 0.0) continue;
        std::vector<double> step(dist.size(), 0.0);
        if (s == 0) {
          step = environment::transition_distribution(grid, a, heading);
        } else {
          for (int h = 0; h < 4; ++h) {
            const auto part =
                environment::transition_distribution(grid, a, environment::Heading(h));
            for (std::size_t i = 0; i < part.size(); ++i) step[i] += 0.25 * part[i];
          }
        }
        for (std::size_t i = 0; i < step.size(); ++i) next[i] += dist[std::size_t(a)] * step[i];
      }
      dist = std::move(next);
    }
    return dist;
  }

 private:
  int areas_ = 0;
  int services_ = 0;
  double decay_ = 0.2;
  std::vector<std::vector<double>> freq_;  // [area][service]
};

// ---------------------------------------------------------------------------
// Placement masking: a (function, node) pair is valid only when the
// function has demand and the node's residual capacity covers that demand.

struct PlMask {
  std::vector<std::uint8_t> mask;        // [function * nodes + node]
  std::vector<int> infeasible_functions; // demanded functions with no valid node
};

inline PlMask pl_mask(const std::vector<double>& function_demand,
                      const std::vector<double>& residual_capacity, int functions, int nodes) {
  PlMask out;
  out.mask.assign(std::size_t(functions) * std::size_t(nodes), 0);
  for (int f = 0; f < functions; ++f) {
    const double demand = function_demand[std::size_t(f)];
    if (demand <= 0.0) continue;
    bool any = false;
    for (int n = 0; n < nodes; ++n) {
      if (residual_capacity[std::size_t(n)] + 1e-9 >= demand) {
        out.mask[std::size_t(f) * std::size_t(nodes) + std::size_t(n)] = 1;
        any = true;
      }
    }
    if (!any) out.infeasible_functions.push_back(f);
  }
  return out;
}

// Placement state (per-function served demand plus node profiles).
inline std::vector<double> pl_encode(const std::vector<double>& served_demand,
                                     const std::vector<const model::NodeSpec*>& nodes) {
  std::vector<double> state;
  state.reserve(served_demand.size() + 2 * nodes.size());
  state.insert(state.end(), served_demand.begin(), served_demand.end());
  for (const auto* n : nodes) {
    state.push_back(n->processing_capacity);
    state.push_back(n->deploy_energy);
  }
  return state;
}

// ---------------------------------------------------------------------------
// Route selection. Requests are served in ascending latency-requirement
// order; each takes the feasible path with the least transmit energy (ties:
// fewer hops, then path id). After all commitments an eviction pass drops
// whoever no longer meets its budget under the final loads, most-violating
// first, so every surviving route is latency-clean.

struct RouteCandidate {
  const model::Request* request = nullptr;
  int head = -1;                    // entry PoA
  int tail = -1;                    // expected final PoA
  double latency_budget_ms = 0.0;   // remaining budget for this frame onward
};

struct RouteResult {
  std::map<int, model::ChosenPath> routes;  // request id -> chosen path
  std::vector<int> failed;                  // routing-failed request ids
  double link_energy = 0.0;
};

inline RouteResult pl_route(const model::Instance& inst,
                            const std::vector<model::PathSpec>& paths,
                            const std::vector<std::uint8_t>& place /* [f*nodes+n] */,
                            std::vector<RouteCandidate> candidates) {
  RouteResult result;
  const int nodes = inst.node_count();
  auto hosted = [&](int f, int n) {
    return place[std::size_t(f) * std::size_t(nodes) + std::size_t(n)] != 0;
  };
  auto visits_chain = [&](const model::PathSpec& p, const std::vector<int>& chain) {
    std::size_t pos = 0;
    for (int f : chain) {
      while (pos < p.node_sequence.size() && !hosted(f, p.node_sequence[pos])) ++pos;
      if (pos == p.node_sequence.size()) return false;
    }
    return true;
  };

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const RouteCandidate& a, const RouteCandidate& b) {
                     if (a.request->latency_req_ms != b.request->latency_req_ms)
                       return a.request->latency_req_ms < b.request->latency_req_ms;
                     return a.request->id < b.request->id;
                   });

  std::map<int, double> link_load;
  std::map<int, const RouteCandidate*> routed;
  auto path_energy = [&](const model::PathSpec& p) {
    double e = 0.0;
    for (int l : p.link_sequence) e += inst.topology.links[std::size_t(l)].transmit_energy;
    return e;
  };
  auto path_latency = [&](const model::PathSpec& p, double extra_for_own) {
    double ms = 0.0;
    for (int l : p.link_sequence) {
      const auto& link = inst.topology.links[std::size_t(l)];
      const double load = (link_load.count(l) ? link_load.at(l) : 0.0) + extra_for_own;
      ms += environment::link_latency_ms(link, load / link.bandwidth_capacity);
    }
    return ms;
  };

  for (const auto& cand : candidates) {
    const auto& r = *cand.request;
    const auto& chain = inst.service_of(r).functions;
    const model::PathSpec* best = nullptr;
    double best_energy = 0.0;
    for (const auto& p : paths) {
      if (p.head() != cand.head || p.tail() != cand.tail) continue;
      if (!visits_chain(p, chain)) continue;
      bool fits = true;
      for (int l : p.link_sequence) {
        const auto& link = inst.topology.links[std::size_t(l)];
        const double load = link_load.count(l) ? link_load.at(l) : 0.0;
        if (load + r.bandwidth_req > link.bandwidth_capacity + 1e-9) fits = false;
      }
      if (!fits) continue;
      if (path_latency(p, r.bandwidth_req) > cand.latency_budget_ms + 1e-9) continue;
      const double energy = path_energy(p);
      if (!best || energy < best_energy ||
          (energy == best_energy && p.hop_count() < best->hop_count()) ||
          (energy == best_energy && p.hop_count() == best->hop_count() && p.id < best->id)) {
        best = &p;
        best_energy = energy;
      }
    }
    if (!best) {
      result.failed.push_back(r.id);
      continue;
    }
    for (int l : best->link_sequence) link_load[l] += r.bandwidth_req;
    result.routes[r.id] = {best->node_sequence, best->link_sequence};
    routed[r.id] = &cand;
  }

  // eviction pass under final loads
  for (;;) {
    int worst = -1;
    double worst_excess = 0.0;
    for (const auto& [rid, cand] : routed) {
      const auto& path = result.routes.at(rid);
      double ms = 0.0;
      for (int l : path.links) {
        const auto& link = inst.topology.links[std::size_t(l)];
        ms += environment::link_latency_ms(link, link_load.at(l) / link.bandwidth_capacity);
      }
      const double excess = ms - cand->latency_budget_ms;
      if (excess > 1e-9 && (worst < 0 || excess > worst_excess ||
                            (excess == worst_excess && rid > worst))) {
        worst = rid;
        worst_excess = excess;
      }
    }
    if (worst < 0) break;
    const auto& path = result.routes.at(worst);
    for (int l : path.links) link_load[l] -= routed.at(worst)->request->bandwidth_req;
    result.routes.erase(worst);
    routed.erase(worst);
    result.failed.push_back(worst);
  }
  std::sort(result.failed.begin(), result.failed.end());

  for (const auto& [rid, path] : result.routes)
    for (int l : path.links) result.link_energy += inst.topology.links[std::size_t(l)].transmit_energy;
  return result;
}

// Placement reward: served requests this frame minus alpha-scaled
// deployment and link energy, minus one penalty unit per routing failure.
inline double pl_reward(int served, double deploy_energy, double link_energy, int routing_failed,
                        double alpha, double penalty = 1.0) {
  return double(served) - alpha * (deploy_energy + link_energy) - penalty * double(routing_failed);
}

}  // namespace aero::agents
