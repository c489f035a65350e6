// Multiple-access control: Bayesian channel-quality beliefs, deadline
// priorities, and the heuristic resource-block allocator.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "aero/model.hpp"
#include "aero/rng.hpp"

namespace aero::mac {

// ---------------------------------------------------------------------------
// Belief table: one EWMA estimate per (channel, area), starting at 0.5.

class ChannelBeliefTable {
 public:
  ChannelBeliefTable() = default;
  ChannelBeliefTable(int channels, int areas, double lambda = 0.3)
      : channels_(channels), areas_(areas), lambda_(lambda),
        belief_(std::size_t(channels) * std::size_t(areas), 0.5) {}

  int channels() const { return channels_; }
  int areas() const { return areas_; }
  double lambda() const { return lambda_; }

  double get(int channel, int area) const { return belief_[index(channel, area)]; }
  void set(int channel, int area, double value) { belief_[index(channel, area)] = value; }
  const std::vector<double>& raw() const { return belief_; }
  std::vector<double>& raw() { return belief_; }

 private:
  std::size_t index(int channel, int area) const {
    return std::size_t(channel) * std::size_t(areas_) + std::size_t(area);
  }
  int channels_ = 0;
  int areas_ = 0;
  double lambda_ = 0.3;
  std::vector<double> belief_;
};

// Observations are slot-averaged quality indicators for the (channel, area)
// pairs the controller could watch this frame. Q <- lambda*O + (1-lambda)*Q.
inline void observe_and_update(ChannelBeliefTable& table,
                               const std::map<std::pair<int, int>, double>& observations) {
  for (const auto& [key, value] : observations) {
    if (value < 0.0 || value > 1.0)
      throw std::invalid_argument("observe_and_update: observation outside [0,1]");
    const auto [channel, area] = key;
    const double prior = table.get(channel, area);
    table.set(channel, area, table.lambda() * value + (1.0 - table.lambda()) * prior);
  }
}

// ---------------------------------------------------------------------------
// Deadline priorities: fewer remaining frames first, then fewer required
// slots, then request id.

struct PriorityOrder {
  std::vector<int> ordered;                 // request ids, most urgent first
  std::map<int, int> remaining_frames;      // omega
};

inline PriorityOrder compute_priorities(const std::vector<const model::Request*>& active,
                                        const model::Instance& inst, int frame) {
  PriorityOrder order;
  std::vector<const model::Request*> sorted = active;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](const model::Request* a, const model::Request* b) {
                     const int ra = inst.window_end(*a) - frame;
                     const int rb = inst.window_end(*b) - frame;
                     if (ra != rb) return ra < rb;
                     if (a->required_slots != b->required_slots)
                       return a->required_slots < b->required_slots;
                     return a->id < b->id;
                   });
  for (const auto* r : sorted) {
    order.ordered.push_back(r->id);
    order.remaining_frames[r->id] = inst.window_end(*r) - frame;
  }
  return order;
}

// ---------------------------------------------------------------------------
// RB grid: occupancy of (node, channel, slot) cells plus the per-request
// contiguous block. A request holds at most one block per frame.

struct RBBlock {
  int node = -1;
  int channel = -1;
  int slot_begin = 0;
  int slot_end = 0;  // exclusive
  int length() const { return slot_end - slot_begin; }
};

struct RBGrid {
  int slots_per_frame = 0;
  std::map<std::tuple<int, int, int>, int> occupant;  // (node, channel, slot) -> request
  std::map<int, RBBlock> blocks;                      // request -> block

  bool cell_taken(int node, int channel, int slot) const {
    return occupant.count({node, channel, slot}) != 0;
  }
  int occupied_cells() const { return int(occupant.size()); }
};

// Channel allocation for one frame. Co-located nodes split the channel set
// round-robin by node id before any assignment, which keeps C4 satisfied by
// construction; per node, channels are walked best-believed first and
// requests in priority order, each receiving one contiguous block of up to
// required_slots slots.
//
// `channel_order` and `request_order` let the random baseline reuse the
// same mechanics with shuffled orderings.
struct AllocOrdering {
  std::function<void(std::vector<int>&)> channel_order;  // applied after belief sort
  std::function<void(std::vector<int>&)> request_order;  // applied after priority sort
};

inline RBGrid allocate_channels(const model::Instance& inst, const std::vector<int>& poa_of_ue,
                                const std::vector<int>& node_area,
                                const std::vector<const model::Request*>& active,
                                const PriorityOrder& priorities, const ChannelBeliefTable& beliefs,
                                int slots_per_frame, const AllocOrdering& ordering = {}) {
  RBGrid grid;
  grid.slots_per_frame = slots_per_frame;
  const int channels = inst.channel_count();
  if (channels == 0 || slots_per_frame <= 0) return grid;

  std::map<int, const model::Request*> by_id;
  for (const auto* r : active) by_id[r->id] = r;

  // requests grouped by their PoA node, kept in priority order
  std::map<int, std::vector<int>> node_requests;
  for (int rid : priorities.ordered) {
    const auto* r = by_id.at(rid);
    const int node = poa_of_ue[std::size_t(r->ue)];
    if (node >= 0) node_requests[node].push_back(rid);
  }

  // co-located nodes (those with traffic) partition the channel set
  std::map<int, std::vector<int>> area_nodes;
  for (const auto& [node, reqs] : node_requests) area_nodes[node_area[std::size_t(node)]].push_back(node);
  std::map<int, std::vector<int>> node_channels;
  for (const auto& [area, nodes_here] : area_nodes) {
    for (std::size_t i = 0; i < nodes_here.size(); ++i)
      for (int c = int(i); c < channels; c += int(nodes_here.size()))
        node_channels[nodes_here[i]].push_back(c);
  }

  for (const auto& [node, rids] : node_requests) {
    const int area = node_area[std::size_t(node)];
    std::vector<int> my_channels = node_channels[node];
    std::stable_sort(my_channels.begin(), my_channels.end(), [&](int a, int b) {
      const double qa = beliefs.get(a, area), qb = beliefs.get(b, area);
      if (qa != qb) return qa > qb;
      return a < b;
    });
    if (ordering.channel_order) ordering.channel_order(my_channels);
    std::vector<int> my_requests = rids;
    if (ordering.request_order) ordering.request_order(my_requests);

    for (int c : my_channels) {
      int slot = 0;
      while (slot < slots_per_frame) {
        bool assigned_any = false;
        for (int rid : my_requests) {
          if (grid.blocks.count(rid)) continue;  // one block per frame (C3)
          const auto* r = by_id.at(rid);
          const int length = std::min(r->required_slots, slots_per_frame - slot);
          if (length <= 0) continue;
          RBBlock block{node, c, slot, slot + length};
          for (int s = block.slot_begin; s < block.slot_end; ++s)
            grid.occupant[{node, c, s}] = rid;
          grid.blocks[rid] = block;
          slot = block.slot_end;
          assigned_any = true;
          if (slot >= slots_per_frame) break;
        }
        if (!assigned_any) break;  // full pass assigned nothing
      }
    }
  }
  return grid;
}

// MAC reward: mean served-quota fraction over active requests, where a
// request's numerator counts only block slots realized with quality one.
inline double mac_reward(const RBGrid& grid,
                         const std::function<bool(int slot, int channel, int area)>& quality,
                         const std::vector<const model::Request*>& active,
                         const std::vector<int>& ue_area) {
  if (active.empty()) return 0.0;
  double sum = 0.0;
  for (const auto* r : active) {
    auto it = grid.blocks.find(r->id);
    if (it == grid.blocks.end()) continue;
    const auto& block = it->second;
    const int area = ue_area[std::size_t(r->ue)];
    int good = 0;
    for (int s = block.slot_begin; s < block.slot_end; ++s)
      if (quality(s, block.channel, area)) ++good;
    sum += double(std::min(good, r->required_slots)) / double(r->required_slots);
  }
  return sum / double(active.size());
}

// Diagnostic dump: one CSV record per occupied resource-block cell.
inline void write_rb_grid_csv(const RBGrid& grid, int frame, std::ostream& out) {
  out << "frame,node,channel,slot,request\n";
  for (const auto& [key, request] : grid.occupant) {
    const auto [node, channel, slot] = key;
    out << frame << ',' << node << ',' << channel << ',' << slot << ',' << request << "\n";
  }
}

// Fisher-Yates with the project Rng, for the random baseline's orderings.
inline void shuffle_ints(std::vector<int>& values, Rng& rng) {
  for (int i = int(values.size()) - 1; i > 0; --i) {
    const int j = rng.uniform_int(0, i);
    std::swap(values[std::size_t(i)], values[std::size_t(j)]);
  }
}

}  // namespace aero::mac
