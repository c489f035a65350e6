// The joint optimization model: objective, energy aggregate, acceptance,
// the C3..C12 feasibility checker, and an exhaustive oracle for micro
// instances that serves as ground truth in tests and benchmarks.
#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aero/environment.hpp"
#include "aero/io.hpp"
#include "aero/model.hpp"

namespace aero::allocate {

enum class Constraint { C2, C3, C4, C5, C6, C7, C8, C9, C10, C11, C12 };

inline const char* to_string(Constraint c) {
  static const char* names[] = {"C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10", "C11", "C12"};
  return names[int(c)];
}

struct ConstraintViolation {
  Constraint constraint = Constraint::C2;
  int frame = -1;
  int slot = -1;
  int request = -1;
  int function = -1;
  int node = -1;
  int link = -1;
  int channel = -1;
  int area = -1;
  std::string detail;
};

struct EnergyReport {
  double placement = 0.0;
  double movement = 0.0;
  double link = 0.0;
  double channel = 0.0;
  double total() const { return placement + movement + link + channel; }
};

struct ObjectiveReport {
  int accepted_count = 0;
  double total_energy = 0.0;
  double objective_value = 0.0;
  double alpha = 0.001;
  bool feasible = true;
  int violation_count = 0;
  EnergyReport energy;
};

constexpr double kCapacityTol = 1e-9;

// ---------------------------------------------------------------------------
// Acceptance (the C2 product) and shared evaluation helpers.

inline bool acceptance(const model::Allocation& alloc, const model::Instance& inst,
                       const model::Request& r) {
  const auto& chain = inst.service_of(r).functions;
  const int end = inst.window_end(r);
  // the response is delivered one frame after the window; it must land
  // inside the horizon for the request to count as served
  if (end >= alloc.frame_count()) return false;
  for (int t = inst.window_begin(r); t < end; ++t)
    for (int f : chain)
      if (!alloc.function_selected(t, r.id, f)) return false;
  return true;
}

// Quality slots granted to request r in frame t: assigned (slot, channel)
// cells whose realized quality indicator is one in the UE's area.
inline int quality_slots(const model::Allocation& alloc, const environment::World& world, int t,
                         const model::Request& r) {
  const int area = world.ue_area_at(t, r.ue);
  int count = 0;
  for (int s = 0; s < alloc.slots_per_frame(); ++s) {
    const std::uint32_t mask = alloc.slot_channels(t, r.id, s);
    for (int c = 0; c < alloc.channels(); ++c)
      if ((mask >> c) & 1u)
        if (world.quality(t, s, c, area)) ++count;
  }
  return count;
}

// Committed bandwidth on a link at a frame, summed over every stored route.
inline double link_load(const model::Allocation& alloc, const environment::World& world, int t,
                        int link_id) {
  double load = 0.0;
  for (const auto& [rid, rf] : alloc.frame(t).requests) {
    if (!rf.path) continue;
    const auto& r = world.request_by_id(rid);
    for (int l : rf.path->links)
      if (l == link_id) load += r.bandwidth_req;
  }
  return load;
}

// Latency of one stored route at one frame under final committed loads.
inline double route_latency_ms(const model::Allocation& alloc, const environment::World& world,
                               int t, const model::ChosenPath& path) {
  const auto& links = world.instance().topology.links;
  double total = 0.0;
  for (int l : path.links) {
    const auto& link = links[std::size_t(l)];
    const double fraction = link_load(alloc, world, t, l) / link.bandwidth_capacity;
    total += environment::link_latency_ms(link, fraction);
  }
  return total;
}

// End-to-end latency over the request's window (C12 left-hand side).
inline double request_latency_ms(const model::Allocation& alloc, const environment::World& world,
                                 const model::Request& r) {
  const auto& inst = world.instance();
  double total = 0.0;
  const int end = std::min(inst.window_end(r), alloc.frame_count());
  for (int t = inst.window_begin(r); t < end; ++t)
    if (const auto* path = alloc.path_of(t, r.id)) total += route_latency_ms(alloc, world, t, *path);
  return total;
}

// ---------------------------------------------------------------------------
// Energy aggregate (C1). Each term is reported separately.

inline EnergyReport total_energy(const model::Allocation& alloc, const environment::World& world) {
  const auto& inst = world.instance();
  EnergyReport report;

  for (int t = 0; t < alloc.frame_count(); ++t)
    for (int f = 0; f < alloc.functions(); ++f)
      for (int n = 0; n < alloc.nodes(); ++n)
        if (alloc.placed(t, f, n)) report.placement += inst.topology.nodes[std::size_t(n)].deploy_energy;

  for (const auto& node : inst.topology.nodes) {
    if (!node.is_uav()) continue;
    for (int t = 0; t + 1 < alloc.frame_count(); ++t) {
      const int a1 = alloc.node_area(t, node.id);
      const int a2 = alloc.node_area(t + 1, node.id);
      if (a1 >= 0 && a2 >= 0 && a1 != a2)
        report.movement += environment::relocation_energy(inst.topology.grid, node, a1, a2);
    }
  }

  for (int t = 0; t < alloc.frame_count(); ++t)
    for (const auto& [rid, rf] : alloc.frame(t).requests) {
      if (rf.path)
        for (int l : rf.path->links)
          report.link += inst.topology.links[std::size_t(l)].transmit_energy;
      for (int s = 0; s < alloc.slots_per_frame(); ++s) {
        const std::uint32_t mask = rf.slot_channel[std::size_t(s)];
        for (int c = 0; c < alloc.channels(); ++c)
          if ((mask >> c) & 1u) report.channel += inst.channels[std::size_t(c)].use_energy;
      }
    }
  return report;
}

// ---------------------------------------------------------------------------
// Constraint checker. Returns every violation; an empty list means the
// allocation is feasible against the realized world.

inline std::vector<ConstraintViolation> check_constraints(const model::Allocation& alloc,
                                                          const environment::World& world) {
  const auto& inst = world.instance();
  std::vector<ConstraintViolation> out;
  const int frames = alloc.frame_count();
  const int slots = alloc.slots_per_frame();
  const int channels = alloc.channels();

  auto add = [&](Constraint c, const std::string& detail) -> ConstraintViolation& {
    out.push_back({});
    out.back().constraint = c;
    out.back().detail = detail;
    return out.back();
  };

  auto active = std::vector<std::vector<const model::Request*>>(std::size_t(frames));
  for (const auto& r : world.requests())
    for (int t = std::max(0, inst.window_begin(r)); t < std::min(frames, inst.window_end(r)); ++t)
      active[std::size_t(t)].push_back(&r);

  // C3: at most one channel per (request, slot) inside the window.
  for (int t = 0; t < frames; ++t)
    for (const auto* r : active[std::size_t(t)])
      for (int s = 0; s < slots; ++s) {
        const std::uint32_t mask = alloc.slot_channels(t, r->id, s);
        if (std::popcount(mask) > 1) {
          auto& v = add(Constraint::C3, "request uses more than one channel in a slot");
          v.frame = t;
          v.slot = s;
          v.request = r->id;
        }
      }

  // C4: per (channel, area, slot), at most one transmitting request among
  // the UEs located in that area.
  for (int t = 0; t < frames; ++t)
    for (int s = 0; s < slots; ++s)
      for (int c = 0; c < channels; ++c) {
        std::map<int, int> per_area;  // area -> count
        for (const auto* r : active[std::size_t(t)])
          if (alloc.channel_assigned(t, r->id, s, c)) per_area[world.ue_area_at(t, r->ue)]++;
        for (const auto& [area, count] : per_area)
          if (count > 1) {
            auto& v = add(Constraint::C4, "channel reused within an area slot");
            v.frame = t;
            v.slot = s;
            v.channel = c;
            v.area = area;
          }
      }

  // C5: every function selected by some active request must be hosted.
  for (int t = 0; t < frames; ++t) {
    const double r_count = std::max<std::size_t>(active[std::size_t(t)].size(), 1);
    for (int f = 0; f < alloc.functions(); ++f) {
      int selected = 0;
      for (const auto* r : active[std::size_t(t)])
        if (alloc.function_selected(t, r->id, f)) ++selected;
      int hosted = 0;
      for (int n = 0; n < alloc.nodes(); ++n)
        if (alloc.placed(t, f, n)) ++hosted;
      if (double(hosted) + kCapacityTol < double(selected) / r_count) {
        auto& v = add(Constraint::C5, "selected function has no hosting node");
        v.frame = t;
        v.function = f;
      }
    }
  }

  // C6: a selected frame needs at least required_slots quality transmissions.
  for (int t = 0; t < frames; ++t)
    for (const auto* r : active[std::size_t(t)]) {
      const auto& chain = inst.service_of(*r).functions;
      bool any_selected = false;
      for (int f : chain) any_selected = any_selected || alloc.function_selected(t, r->id, f);
      if (!any_selected) continue;
      const int granted = quality_slots(alloc, world, t, *r);
      if (granted < r->required_slots) {
        auto& v = add(Constraint::C6, "quality-slot quota not met for selected request");
        v.frame = t;
        v.request = r->id;
      }
    }

  // C7: accepted requests carry exactly one valid inquiry path per window
  // frame: head at the entry PoA, tail at the final-frame PoA, chain
  // functions visited in order on hosting nodes, links available.
  auto path_structurally_valid = [&](int t, const model::ChosenPath& p) -> bool {
    if (p.nodes.empty()) return false;
    if (p.links.size() + 1 != p.nodes.size()) return false;
    const auto areas = alloc.node_areas(t);
    for (std::size_t i = 0; i < p.links.size(); ++i) {
      if (p.links[i] < 0 || p.links[i] >= int(inst.topology.links.size())) return false;
      const auto& link = inst.topology.links[std::size_t(p.links[i])];
      const int from = p.nodes[i], to = p.nodes[i + 1];
      if (!(link.touches(from) && link.touches(to) && from != to)) return false;
      if (!model::link_available(inst.topology, link, areas)) return false;
    }
    return true;
  };
  auto visits_chain = [&](int t, const model::ChosenPath& p, const std::vector<int>& chain) {
    std::size_t pos = 0;
    for (int f : chain) {
      while (pos < p.nodes.size() && !alloc.placed(t, f, p.nodes[pos])) ++pos;
      if (pos == p.nodes.size()) return false;
    }
    return true;
  };
  for (const auto& r : world.requests()) {
    if (!acceptance(alloc, inst, r)) continue;
    const int entry = inst.window_begin(r);
    const int last = inst.window_last(r);
    const int head_poa = alloc.poa_of(entry, r.ue);
    const int tail_poa = alloc.poa_of(inst.window_end(r), r.ue);  // response delivery PoA
    for (int t = entry; t <= last; ++t) {
      const auto* path = alloc.path_of(t, r.id);
      std::string reason;
      if (!path) reason = "accepted request has no path";
      else if (!path_structurally_valid(t, *path)) reason = "path uses invalid or unavailable links";
      else if (head_poa < 0 || path->nodes.front() != head_poa) reason = "path head is not the entry PoA";
      else if (tail_poa < 0 || path->nodes.back() != tail_poa) reason = "path tail is not the final PoA";
      else if (!visits_chain(t, *path, inst.service_of(r).functions))
        reason = "path does not visit the service chain in order";
      if (!reason.empty()) {
        auto& v = add(Constraint::C7, reason);
        v.frame = t;
        v.request = r.id;
      }
    }
  }

  // C8: node processing capacity per frame.
  for (int t = 0; t < frames; ++t)
    for (int n = 0; n < alloc.nodes(); ++n) {
      double load = 0.0;
      for (const auto* r : active[std::size_t(t)]) {
        const auto& chain = inst.service_of(*r).functions;
        for (std::size_t i = 0; i < chain.size(); ++i)
          if (alloc.function_selected(t, r->id, chain[i]) && alloc.placed(t, chain[i], n))
            load += r->capacity_req[i];
      }
      const double cap = inst.topology.nodes[std::size_t(n)].processing_capacity;
      if (load > cap + kCapacityTol) {
        auto& v = add(Constraint::C8, "node processing capacity exceeded");
        v.frame = t;
        v.node = n;
      }
    }

  // C9: link bandwidth capacity per frame.
  for (int t = 0; t < frames; ++t)
    for (const auto& link : inst.topology.links) {
      const double load = link_load(alloc, world, t, link.id);
      if (load > link.bandwidth_capacity + kCapacityTol) {
        auto& v = add(Constraint::C9, "link bandwidth capacity exceeded");
        v.frame = t;
        v.link = link.id;
      }
    }

  // C10: every node sits in exactly one area per frame.
  for (int t = 0; t < frames; ++t)
    for (int n = 0; n < alloc.nodes(); ++n) {
      int count = 0;
      for (int a = 0; a < alloc.areas(); ++a)
        if (alloc.node_in_area(t, n, a)) ++count;
      if (count != 1) {
        auto& v = add(Constraint::C10, "node must occupy exactly one area");
        v.frame = t;
        v.node = n;
      }
    }

  // C11: a bound PoA must be unique and must cover the UE's area.
  for (int t = 0; t < frames; ++t)
    for (const auto* r : active[std::size_t(t)]) {
      const int degree = alloc.poa_degree(t, r->ue);
      if (degree > 1) {
        auto& v = add(Constraint::C11, "UE bound to more than one PoA");
        v.frame = t;
        v.request = r->id;
        continue;
      }
      if (degree == 1) {
        const int node = alloc.poa_of(t, r->ue);
        if (alloc.node_area(t, node) != world.ue_area_at(t, r->ue)) {
          auto& v = add(Constraint::C11, "PoA does not cover the UE's area");
          v.frame = t;
          v.request = r->id;
          v.node = node;
        }
      }
    }

  // C12: accepted requests must meet their end-to-end latency bound under
  // the final committed link loads.
  for (const auto& r : world.requests()) {
    if (!acceptance(alloc, inst, r)) continue;
    const double latency = request_latency_ms(alloc, world, r);
    if (latency > r.latency_req_ms + kCapacityTol) {
      auto& v = add(Constraint::C12, "end-to-end latency bound exceeded");
      v.request = r.id;
    }
  }

  return out;
}

// ---------------------------------------------------------------------------
// Objective (OF): accepted requests minus alpha-weighted total energy.

inline ObjectiveReport objective(const model::Allocation& alloc, const environment::World& world,
                                 double alpha = 0.001) {
  ObjectiveReport report;
  report.alpha = alpha;
  for (const auto& r : world.requests())
    if (acceptance(alloc, world.instance(), r)) ++report.accepted_count;
  report.energy = total_energy(alloc, world);
  report.total_energy = report.energy.total();
  report.objective_value = double(report.accepted_count) - alpha * report.total_energy;
  const auto violations = check_constraints(alloc, world);
  report.violation_count = int(violations.size());
  report.feasible = violations.empty();
  return report;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle.
//
// Enumerates the joint decision space in stages whose energies add:
//   acceptance set -> channel schedule (per frame/area group) -> UAV areas
//   -> PoA bindings -> placements -> routes
// Acceptance is all-or-nothing per request and rejected requests carry no
// resources; both restrictions only discard dominated points. In pruned
// mode partial feasibility checks and an objective bound cut subtrees; in
// unpruned mode every structured candidate is materialized and judged by
// the full constraint checker, which is what the equivalence tests compare.

struct OracleLimits {
  int max_nodes = 5;
  int max_uavs = 2;
  int max_areas = 4;
  int max_channels = 2;
  int max_slots = 3;
  int max_frames = 3;
  int max_requests = 2;
  int max_functions = 3;
};

struct OracleSizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OracleResult {
  model::Allocation best;
  ObjectiveReport report;
  std::uint64_t explored = 0;
};

namespace detail {

struct CellChoice {
  int slot;
  int channel;
};

// All ways to give one request exactly `needed` quality cells in a frame,
// one channel per slot at most. Cells are offered in (slot, channel) order
// so enumeration order is deterministic.
inline void enumerate_request_cells(const std::vector<CellChoice>& cells, int needed,
                                    std::vector<std::vector<CellChoice>>& out) {
  std::vector<CellChoice> current;
  auto rec = [&](auto&& self, std::size_t index, int lastslot) -> void {
    if (int(current.size()) == needed) {
      out.push_back(current);
      return;
    }
    if (index >= cells.size()) return;
    if (int(cells.size() - index) < needed - int(current.size())) return;
    for (std::size_t i = index; i < cells.size(); ++i) {
      if (cells[i].slot == lastslot) continue;  // one channel per slot
      current.push_back(cells[i]);
      self(self, i + 1, cells[i].slot);
      current.pop_back();
    }
  };
  rec(rec, 0, -1);
}

}  // namespace detail

inline OracleResult oracle_solve(const environment::World& world, double alpha,
                                 const OracleLimits& limits = {}, bool prune = true) {
  const auto& inst = world.instance();
  const int frames = inst.time.total_frames;
  const int slots = inst.time.slots_per_frame;
  const int channels = inst.channel_count();
  const int nodes = inst.node_count();
  const int areas = inst.area_count();
  const auto uavs = inst.topology.uav_ids();
  const auto& requests = world.requests();

  int max_chain = 0;
  for (const auto& s : inst.services) max_chain = std::max(max_chain, int(s.functions.size()));
  if (nodes > limits.max_nodes || int(uavs.size()) > limits.max_uavs || areas > limits.max_areas ||
      channels > limits.max_channels || slots > limits.max_slots || frames > limits.max_frames ||
      int(requests.size()) > limits.max_requests || max_chain > limits.max_functions)
    throw OracleSizeError("oracle_solve: instance exceeds micro limits");

  const int R = int(requests.size());

  model::Allocation best_alloc;
  double best_obj = 0.0;
  double best_energy = 0.0;
  std::string best_key;
  bool best_set = false;
  std::uint64_t explored = 0;

  auto canonical_key = [](const model::Allocation& alloc) {
    std::ostringstream os;
    io::write_allocation(alloc, {}, os);
    return os.str();
  };

  auto consider = [&](const model::Allocation& candidate, int accepted, double energy) {
    ++explored;
    if (!prune) {
      // Full-checker verdict; infeasible candidates are discarded outright.
      const auto violations = check_constraints(candidate, world);
      if (!violations.empty()) return;
      const auto report = total_energy(candidate, world);
      energy = report.total();
      int acc = 0;
      for (const auto& r : requests)
        if (acceptance(candidate, inst, r)) ++acc;
      accepted = acc;
    }
    const double obj = double(accepted) - alpha * energy;
    if (!best_set || obj > best_obj || (obj == best_obj && energy < best_energy)) {
      best_set = true;
      best_obj = obj;
      best_energy = energy;
      best_alloc = candidate;
      best_key = canonical_key(candidate);
      return;
    }
    if (obj == best_obj && energy == best_energy) {
      std::string key = canonical_key(candidate);
      if (key < best_key) {
        best_alloc = candidate;
        best_key = std::move(key);
      }
    }
  };

  // --- fixed node areas per frame (UAV rows filled per S-stage candidate)
  std::vector<int> fixed_area(std::size_t(nodes), 0);
  for (const auto& n : inst.topology.nodes) fixed_area[std::size_t(n.id)] = n.home_area();

  // Path sets are cached per UAV-area configuration.
  std::map<std::vector<int>, std::vector<model::PathSpec>> path_cache;
  auto paths_for = [&](const std::vector<int>& node_area) -> const std::vector<model::PathSpec>& {
    auto it = path_cache.find(node_area);
    if (it == path_cache.end())
      it = path_cache.emplace(node_area, model::build_path_set(inst.topology, inst.max_hops, node_area))
               .first;
    return it->second;
  };

  // --- Z stage per acceptance mask: minimum-energy channel schedule.
  struct ZCells {
    std::map<std::pair<int, int>, std::vector<detail::CellChoice>> per_request_frame;
    double energy = 0.0;
    bool feasible = false;
  };

  auto solve_z = [&](std::uint32_t mask) -> ZCells {
    ZCells result;
    result.feasible = true;
    // group accepted requests by (frame, area)
    std::map<std::pair<int, int>, std::vector<int>> groups;
    for (int ri = 0; ri < R; ++ri) {
      if (!((mask >> ri) & 1u)) continue;
      const auto& r = requests[std::size_t(ri)];
      if (inst.window_end(r) >= frames || inst.window_begin(r) < 0) {
        result.feasible = false;
        return result;
      }
      for (int t = inst.window_begin(r); t < inst.window_end(r); ++t)
        groups[{t, world.ue_area_at(t, r.ue)}].push_back(ri);
    }
    for (const auto& [key, members] : groups) {
      const auto [t, area] = key;
      // quality cells available in this frame/area
      std::vector<detail::CellChoice> cells;
      for (int s = 0; s < slots; ++s)
        for (int c = 0; c < channels; ++c)
          if (world.quality(t, s, c, area)) cells.push_back({s, c});

      // per-member candidate cell sets
      std::vector<std::vector<std::vector<detail::CellChoice>>> options;
      for (int ri : members) {
        std::vector<std::vector<detail::CellChoice>> sets;
        detail::enumerate_request_cells(cells, requests[std::size_t(ri)].required_slots, sets);
        if (sets.empty()) {
          result.feasible = false;
          return result;
        }
        options.push_back(std::move(sets));
      }

      // joint assignment: pick one set per member without sharing cells
      double group_best = -1.0;
      std::vector<std::size_t> group_pick(members.size(), 0), current(members.size(), 0);
      std::vector<std::vector<char>> taken(std::size_t(slots), std::vector<char>(std::size_t(channels), 0));
      auto cell_energy = [&](const std::vector<detail::CellChoice>& set) {
        double e = 0.0;
        for (const auto& cell : set) e += inst.channels[std::size_t(cell.channel)].use_energy;
        return e;
      };
      auto rec = [&](auto&& self, std::size_t member, double energy) -> void {
        if (member == members.size()) {
          if (group_best < 0.0 || energy < group_best) {
            group_best = energy;
            group_pick = current;
          }
          return;
        }
        for (std::size_t oi = 0; oi < options[member].size(); ++oi) {
          const auto& set = options[member][oi];
          bool conflict = false;
          for (const auto& cell : set)
            if (taken[std::size_t(cell.slot)][std::size_t(cell.channel)]) conflict = true;
          if (conflict && prune) continue;
          if (conflict) {
            // unpruned mode still skips: a shared cell can never appear in a
            // checker-feasible candidate, and the downstream stages never
            // repair it, so the point is structurally invalid rather than cut.
            continue;
          }
          if (prune && group_best >= 0.0 && energy + cell_energy(set) > group_best) continue;
          for (const auto& cell : set) taken[std::size_t(cell.slot)][std::size_t(cell.channel)] = 1;
          current[member] = oi;
          self(self, member + 1, energy + cell_energy(set));
          for (const auto& cell : set) taken[std::size_t(cell.slot)][std::size_t(cell.channel)] = 0;
        }
      };
      rec(rec, 0, 0.0);
      if (group_best < 0.0) {
        result.feasible = false;
        return result;
      }
      result.energy += group_best;
      for (std::size_t m = 0; m < members.size(); ++m) {
        const auto& set = options[m][group_pick[m]];
        auto& dest = result.per_request_frame[{members[m], t}];
        dest = set;
      }
    }
    return result;
  };

  // iterate acceptance masks (all-or-nothing per request)
  for (std::uint32_t mask = 0; mask < (1u << R); ++mask) {
    const int accepted = std::popcount(mask);
    ZCells zcells = solve_z(mask);
    if (!zcells.feasible) continue;
    if (prune && best_set && double(accepted) - alpha * zcells.energy < best_obj - 1e-12) continue;

    // S stage: UAV areas per frame (frame 0 pinned to initial positions).
    std::vector<std::vector<int>> uav_area(std::size_t(frames), std::vector<int>(uavs.size(), 0));
    for (std::size_t k = 0; k < uavs.size(); ++k)
      uav_area[0][k] = inst.topology.nodes[std::size_t(uavs[k])].home_area();

    auto movement_energy = [&]() {
      double e = 0.0;
      for (std::size_t k = 0; k < uavs.size(); ++k) {
        const auto& node = inst.topology.nodes[std::size_t(uavs[k])];
        for (int t = 0; t + 1 < frames; ++t)
          if (uav_area[std::size_t(t)][k] != uav_area[std::size_t(t + 1)][k])
            e += environment::relocation_energy(inst.topology.grid, node, uav_area[std::size_t(t)][k],
                                                uav_area[std::size_t(t + 1)][k]);
      }
      return e;
    };

    // Needed PoA bindings: (ue, frame) pairs at entry and final frames.
    std::vector<std::pair<int, int>> binding_slots;
    for (int ri = 0; ri < R; ++ri) {
      if (!((mask >> ri) & 1u)) continue;
      const auto& r = requests[std::size_t(ri)];
      binding_slots.push_back({r.ue, inst.window_begin(r)});
      binding_slots.push_back({r.ue, inst.window_end(r)});
    }
    std::sort(binding_slots.begin(), binding_slots.end());
    binding_slots.erase(std::unique(binding_slots.begin(), binding_slots.end()), binding_slots.end());

    // Needed placements: (function, frame) -> total demand.
    std::map<std::pair<int, int>, double> placement_demand;
    for (int ri = 0; ri < R; ++ri) {
      if (!((mask >> ri) & 1u)) continue;
      const auto& r = requests[std::size_t(ri)];
      const auto& chain = inst.service_of(r).functions;
      for (int t = inst.window_begin(r); t < inst.window_end(r); ++t)
        for (std::size_t i = 0; i < chain.size(); ++i)
          placement_demand[{chain[i], t}] += r.capacity_req[i];
    }
    std::vector<std::pair<int, int>> placement_keys;
    for (const auto& [key, demand] : placement_demand) placement_keys.push_back(key);

    // Route slots: (request index, frame).
    std::vector<std::pair<int, int>> route_slots;
    for (int ri = 0; ri < R; ++ri) {
      if (!((mask >> ri) & 1u)) continue;
      const auto& r = requests[std::size_t(ri)];
      for (int t = inst.window_begin(r); t < inst.window_end(r); ++t) route_slots.push_back({ri, t});
    }

    std::map<std::pair<int, int>, int> binding;               // (ue, frame) -> node
    std::map<std::pair<int, int>, std::uint32_t> placement;   // (function, frame) -> node mask
    std::map<std::pair<int, int>, int> route;                 // (request, frame) -> path index

    auto node_areas_at = [&](int t) {
      std::vector<int> area = fixed_area;
      for (std::size_t k = 0; k < uavs.size(); ++k)
        area[std::size_t(uavs[k])] = uav_area[std::size_t(t)][k];
      return area;
    };

    auto materialize = [&](double energy_hint) {
      model::Allocation alloc = model::Allocation::for_instance(inst);
      for (int t = 0; t < frames; ++t) {
        const auto area = node_areas_at(t);
        for (int n = 0; n < nodes; ++n) alloc.set_node_area(t, n, area[std::size_t(n)]);
      }
      for (const auto& [slot, node] : binding) alloc.bind_poa(slot.second, slot.first, node);
      for (const auto& [key, node_mask] : placement)
        for (int n = 0; n < nodes; ++n)
          if ((node_mask >> n) & 1u) alloc.place_function(key.second, key.first, n);
      for (int ri = 0; ri < R; ++ri) {
        if (!((mask >> ri) & 1u)) continue;
        const auto& r = requests[std::size_t(ri)];
        const auto& chain = inst.service_of(r).functions;
        for (int t = inst.window_begin(r); t < inst.window_end(r); ++t) {
          for (int f : chain) alloc.select_function(t, r.id, f);
          auto it = zcells.per_request_frame.find({ri, t});
          if (it != zcells.per_request_frame.end())
            for (const auto& cell : it->second) alloc.assign_channel(t, r.id, cell.slot, cell.channel);
          auto rit = route.find({ri, t});
          if (rit != route.end()) {
            const auto& paths = paths_for(node_areas_at(t));
            const auto& p = paths[std::size_t(rit->second)];
            alloc.set_path(t, r.id, {p.node_sequence, p.link_sequence});
          }
        }
      }
      consider(alloc, accepted, energy_hint);
    };

    // R stage -----------------------------------------------------------
    auto route_stage = [&](double energy_so_far) {
      std::map<std::pair<int, int>, double> link_loads;  // (link, frame)
      auto rec = [&](auto&& self, std::size_t index, double energy) -> void {
        if (prune && best_set && double(accepted) - alpha * energy < best_obj - 1e-12) return;
        if (index == route_slots.size()) {
          // C12 under final loads
          bool ok = true;
          for (int ri = 0; ri < R && ok; ++ri) {
            if (!((mask >> ri) & 1u)) continue;
            const auto& r = requests[std::size_t(ri)];
            double latency = 0.0;
            for (int t = inst.window_begin(r); t < inst.window_end(r); ++t) {
              const auto& paths = paths_for(node_areas_at(t));
              const auto& p = paths[std::size_t(route.at({ri, t}))];
              for (int l : p.link_sequence) {
                const auto& link = inst.topology.links[std::size_t(l)];
                const double load = link_loads.count({l, t}) ? link_loads.at({l, t}) : 0.0;
                latency += environment::link_latency_ms(link, load / link.bandwidth_capacity);
              }
            }
            if (latency > r.latency_req_ms + kCapacityTol) ok = false;
          }
          if (ok || !prune) materialize(energy);
          return;
        }
        const auto [ri, t] = route_slots[index];
        const auto& r = requests[std::size_t(ri)];
        const auto& chain = inst.service_of(r).functions;
        const int head = binding.at({r.ue, inst.window_begin(r)});
        const int tail = binding.at({r.ue, inst.window_end(r)});
        const auto& paths = paths_for(node_areas_at(t));
        for (std::size_t pi = 0; pi < paths.size(); ++pi) {
          const auto& p = paths[pi];
          if (p.head() != head || p.tail() != tail) continue;
          // chain visit check against current placement
          std::size_t pos = 0;
          bool visits = true;
          for (int f : chain) {
            const std::uint32_t pm = placement.at({f, t});
            while (pos < p.node_sequence.size() && !((pm >> p.node_sequence[pos]) & 1u)) ++pos;
            if (pos == p.node_sequence.size()) {
              visits = false;
              break;
            }
          }
          if (!visits) continue;
          // C9 partial check
          bool fits = true;
          double added = 0.0;
          for (int l : p.link_sequence) {
            const auto& link = inst.topology.links[std::size_t(l)];
            double& load = link_loads[{l, t}];
            if (prune && load + r.bandwidth_req > link.bandwidth_capacity + kCapacityTol) fits = false;
            added += link.transmit_energy;
          }
          if (!fits) continue;
          for (int l : p.link_sequence) link_loads[{l, t}] += r.bandwidth_req;
          route[{ri, t}] = int(pi);
          self(self, index + 1, energy + added);
          route.erase({ri, t});
          for (int l : p.link_sequence) link_loads[{l, t}] -= r.bandwidth_req;
        }
      };
      rec(rec, 0, energy_so_far);
    };

    // Y stage ------------------------------------------------------------
    auto placement_stage = [&](double energy_so_far) {
      std::map<std::pair<int, int>, double> node_loads;  // (node, frame)
      auto rec = [&](auto&& self, std::size_t index, double energy) -> void {
        if (prune && best_set && double(accepted) - alpha * energy < best_obj - 1e-12) return;
        if (index == placement_keys.size()) {
          route_stage(energy);
          return;
        }
        const auto key = placement_keys[index];
        const double demand = placement_demand.at(key);
        for (std::uint32_t node_mask = 1; node_mask < (1u << nodes); ++node_mask) {
          double added = 0.0;
          bool fits = true;
          for (int n = 0; n < nodes; ++n) {
            if (!((node_mask >> n) & 1u)) continue;
            added += inst.topology.nodes[std::size_t(n)].deploy_energy;
            if (prune) {
              const double load = node_loads.count({n, key.second}) ? node_loads.at({n, key.second}) : 0.0;
              if (load + demand >
                  inst.topology.nodes[std::size_t(n)].processing_capacity + kCapacityTol)
                fits = false;
            }
          }
          if (!fits) continue;
          for (int n = 0; n < nodes; ++n)
            if ((node_mask >> n) & 1u) node_loads[{n, key.second}] += demand;
          placement[key] = node_mask;
          self(self, index + 1, energy + added);
          placement.erase(key);
          for (int n = 0; n < nodes; ++n)
            if ((node_mask >> n) & 1u) node_loads[{n, key.second}] -= demand;
        }
      };
      rec(rec, 0, energy_so_far);
    };

    // B stage ------------------------------------------------------------
    auto binding_stage = [&](double energy_so_far) {
      auto rec = [&](auto&& self, std::size_t index) -> void {
        if (index == binding_slots.size()) {
          placement_stage(energy_so_far);
          return;
        }
        const auto [ue, t] = binding_slots[index];
        const int ue_area = world.ue_area_at(t, ue);
        const auto areas_now = node_areas_at(t);
        bool any = false;
        for (int n = 0; n < nodes; ++n) {
          if (areas_now[std::size_t(n)] != ue_area) continue;
          any = true;
          binding[{ue, t}] = n;
          self(self, index + 1);
          binding.erase({ue, t});
        }
        if (!any) return;  // no covering node: this acceptance set cannot bind
      };
      rec(rec, 0);
    };

    // S stage driver ------------------------------------------------------
    auto s_stage = [&](auto&& self, int t, std::size_t k) -> void {
      if (t == frames || uavs.empty()) {
        const double base = zcells.energy + movement_energy();
        if (prune && best_set && double(accepted) - alpha * base < best_obj - 1e-12) return;
        if (accepted == 0) {
          // nothing else to decide; the empty allocation is a candidate
          materialize(base);
        } else {
          binding_stage(base);
        }
        return;
      }
      if (k == uavs.size()) {
        self(self, t + 1, 0);
        return;
      }
      for (int a = 0; a < areas; ++a) {
        uav_area[std::size_t(t)][k] = a;
        self(self, t, k + 1);
      }
    };
    if (uavs.empty() || frames <= 1) {
      const double base = zcells.energy + movement_energy();
      if (accepted == 0) materialize(base);
      else binding_stage(base);
    } else {
      s_stage(s_stage, 1, 0);  // frame 0 pinned
    }
  }

  if (!best_set) {
    // Even the empty allocation was never materialized (e.g. zero frames);
    // fall back to an explicitly empty result.
    best_alloc = model::Allocation::for_instance(inst);
    for (int t = 0; t < frames; ++t) {
      for (int n = 0; n < nodes; ++n) {
        const auto& node = inst.topology.nodes[std::size_t(n)];
        best_alloc.set_node_area(t, n, node.home_area());
      }
    }
    best_energy = total_energy(best_alloc, world).total();
    best_obj = -alpha * best_energy;
  }

  OracleResult result{std::move(best_alloc), {}, explored};
  result.report = objective(result.best, world, alpha);
  return result;
}

}  // namespace aero::allocate
