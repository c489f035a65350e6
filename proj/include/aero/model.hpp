// Static domain model: grid areas, nodes, links, paths, services, requests,
// channels, and the joint allocation decision state.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aero/rng.hpp"

namespace aero::model {

struct TimeBase {
  int total_frames = 0;
  int slots_per_frame = 1;
  int current_frame = 0;
  int current_slot = 0;
};

struct AreaGrid {
  int rows = 0;
  int cols = 0;
  std::vector<double> los_probability;  // row-major, one entry per area
  double cell_size_m = 2000.0;

  int area_count() const { return rows * cols; }
  int row_of(int area) const { return area / cols; }
  int col_of(int area) const { return area % cols; }
  int area_at(int row, int col) const { return row * cols + col; }
  bool contains(int row, int col) const { return row >= 0 && row < rows && col >= 0 && col < cols; }

  double center_x(int area) const { return (col_of(area) + 0.5) * cell_size_m; }
  double center_y(int area) const { return (row_of(area) + 0.5) * cell_size_m; }

  double euclidean_m(int a1, int a2) const {
    const double dx = center_x(a1) - center_x(a2);
    const double dy = center_y(a1) - center_y(a2);
    return std::sqrt(dx * dx + dy * dy);
  }
  double manhattan_m(int a1, int a2) const {
    return (std::abs(row_of(a1) - row_of(a2)) + std::abs(col_of(a1) - col_of(a2))) * cell_size_m;
  }
  int hop_distance(int a1, int a2) const {
    return std::abs(row_of(a1) - row_of(a2)) + std::abs(col_of(a1) - col_of(a2));
  }

  std::vector<int> neighbors(int area) const {
    std::vector<int> out;
    const int r = row_of(area), c = col_of(area);
    if (contains(r - 1, c)) out.push_back(area_at(r - 1, c));
    if (contains(r + 1, c)) out.push_back(area_at(r + 1, c));
    if (contains(r, c - 1)) out.push_back(area_at(r, c - 1));
    if (contains(r, c + 1)) out.push_back(area_at(r, c + 1));
    return out;
  }
};

inline AreaGrid build_grid(int rows, int cols, double los_lo, double los_hi, std::uint64_t rng_seed) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("build_grid: empty grid dimensions");
  AreaGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  Rng rng(rng_seed);
  grid.los_probability.resize(std::size_t(rows) * std::size_t(cols));
  for (auto& p : grid.los_probability) p = rng.uniform(los_lo, los_hi);
  return grid;
}

enum class NodeKind { core, rsu, uav };

inline const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::core: return "core";
    case NodeKind::rsu: return "rsu";
    case NodeKind::uav: return "uav";
  }
  return "?";
}

struct UavParams {
  double weight_kg = 5.0;
  double induced_power = 0.08;
  double air_density = 1.225;     // kg/m^3
  double rotor_disk_area = 0.6;   // m^2
  double drag_coeff = 0.05;
  double frontal_area = 0.25;     // m^2
  double velocity_mps = 10.0;     // constant velocity profile
};

struct NodeSpec {
  int id = 0;
  NodeKind kind = NodeKind::rsu;
  double processing_capacity = 0.0;  // Mbps of function capacity
  double deploy_energy = 0.0;        // energy rate per hosted function-frame
  std::optional<int> fixed_area;     // core / rsu
  std::optional<UavParams> uav;      // uav only
  std::optional<int> initial_area;   // uav starting position

  bool is_uav() const { return kind == NodeKind::uav; }
  // Area occupied at episode start.
  int home_area() const { return is_uav() ? initial_area.value_or(0) : fixed_area.value_or(0); }
};

struct LinkSpec {
  int id = 0;
  int node_a = 0;
  int node_b = 0;
  double bandwidth_capacity = 0.0;  // Mbps
  double transmit_energy = 0.0;     // per request-frame traversal
  double base_latency_ms = 0.0;

  bool touches(int node) const { return node_a == node || node_b == node; }
  int other(int node) const { return node_a == node ? node_b : node_a; }
};

struct PathSpec {
  int id = 0;
  std::vector<int> node_sequence;
  std::vector<int> link_sequence;

  int head() const { return node_sequence.front(); }
  int tail() const { return node_sequence.back(); }
  int hop_count() const { return int(link_sequence.size()); }
  bool uses_link(int link) const {
    return std::find(link_sequence.begin(), link_sequence.end(), link) != link_sequence.end();
  }
};

struct ServiceSpec {
  int id = 0;
  std::vector<int> functions;  // chain order
  int duration_frames = 1;
};

struct Request {
  int id = 0;
  int ue = 0;
  int service = 0;
  int entry_frame = 0;
  double bandwidth_req = 0.0;            // Mbps
  std::vector<double> capacity_req;      // per function, aligned with the service chain
  double latency_req_ms = 0.0;
  int required_slots = 0;                // quality slots needed per active frame
};

struct ChannelPhys {
  double transmit_power = 4e-3;       // W
  double noise_density = 4e-21;       // W/Hz
  double subcarrier_spacing = 15e3;   // Hz
  double path_loss_exponent = 3.5;
  double reference_distance = 1.0;    // m
  double quality_threshold = 1.0;     // SNR acceptance threshold
  double rayleigh_sigma = 0.5;
};

struct ChannelSpec {
  int id = 0;
  double use_energy = 0.0;  // per allocated slot
  ChannelPhys phys;
};

struct NetworkTopology {
  AreaGrid grid;
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;

  int uav_count() const {
    return int(std::count_if(nodes.begin(), nodes.end(), [](const NodeSpec& n) { return n.is_uav(); }));
  }
  std::vector<int> uav_ids() const {
    std::vector<int> out;
    for (const auto& n : nodes)
      if (n.is_uav()) out.push_back(n.id);
    return out;
  }
};

// A full problem instance: topology plus services, channels, scripted
// requests, time base, population, and the seed bundle.
struct Instance {
  NetworkTopology topology;
  std::vector<ServiceSpec> services;
  std::vector<ChannelSpec> channels;
  std::vector<Request> requests;  // scripted; more may arrive at runtime
  TimeBase time;
  int ue_count = 0;
  std::vector<int> ue_initial_areas;  // optional; sampled when empty
  double arrival_rate = 0.0;          // expected spawned requests per frame
  int max_hops = 4;
  SeedStreams seeds;
  std::map<std::string, std::uint64_t> seed_overrides;

  int area_count() const { return topology.grid.area_count(); }
  int node_count() const { return int(topology.nodes.size()); }
  int channel_count() const { return int(channels.size()); }
  int function_count() const {
    int hi = -1;
    for (const auto& s : services)
      for (int f : s.functions) hi = std::max(hi, f);
    return hi + 1;
  }
  const ServiceSpec& service_of(const Request& r) const { return services[std::size_t(r.service)]; }
  int window_begin(const Request& r) const { return r.entry_frame; }
  int window_end(const Request& r) const {  // exclusive
    return r.entry_frame + service_of(r).duration_frames;
  }
  int window_last(const Request& r) const { return window_end(r) - 1; }
  bool active_at(const Request& r, int frame) const {
    return frame >= window_begin(r) && frame < window_end(r);
  }

  Rng stream(std::string_view name) const {
    auto it = seed_overrides.find(std::string(name));
    if (it != seed_overrides.end()) return Rng(it->second);
    return seeds.stream(name);
  }
};

// ---------------------------------------------------------------------------
// Link availability and path enumeration.
//
// Wired links between fixed nodes are always up. Any link with a UAV
// endpoint is up only while the endpoint areas are the same or adjacent
// (one grid hop), so the path set changes as UAVs relocate.

inline bool link_available(const NetworkTopology& topo, const LinkSpec& link,
                           const std::vector<int>& node_area) {
  const NodeSpec& a = topo.nodes[std::size_t(link.node_a)];
  const NodeSpec& b = topo.nodes[std::size_t(link.node_b)];
  if (!a.is_uav() && !b.is_uav()) return true;
  const int aa = node_area[std::size_t(link.node_a)];
  const int ab = node_area[std::size_t(link.node_b)];
  return topo.grid.hop_distance(aa, ab) <= 1;
}

// All directed simple paths with 1..max_hops links over the currently
// available links; max_hops == 0 yields the single-node paths instead.
inline std::vector<PathSpec> enumerate_paths(const NetworkTopology& topo, int max_hops,
                                             const std::vector<int>& node_area) {
  std::vector<PathSpec> out;
  const int n = int(topo.nodes.size());
  if (max_hops <= 0) {
    for (int v = 0; v < n; ++v) {
      PathSpec p;
      p.id = int(out.size());
      p.node_sequence = {v};
      out.push_back(std::move(p));
    }
    return out;
  }

  auto adj = std::vector<std::vector<std::pair<int, int>>>(std::size_t(n));  // node -> (neighbor, link)
  for (const auto& link : topo.links) {
    if (!link_available(topo, link, node_area)) continue;
    adj[std::size_t(link.node_a)].push_back({link.node_b, link.id});
    adj[std::size_t(link.node_b)].push_back({link.node_a, link.id});
  }

  std::vector<int> nodes_stack, links_stack;
  std::vector<char> visited(std::size_t(n), 0);
  auto dfs = [&](auto&& self, int v) -> void {
    if (!links_stack.empty()) {
      PathSpec p;
      p.id = int(out.size());
      p.node_sequence = nodes_stack;
      p.link_sequence = links_stack;
      out.push_back(std::move(p));
    }
    if (int(links_stack.size()) == max_hops) return;
    for (const auto& [next, link] : adj[std::size_t(v)]) {
      if (visited[std::size_t(next)]) continue;
      visited[std::size_t(next)] = 1;
      nodes_stack.push_back(next);
      links_stack.push_back(link);
      self(self, next);
      links_stack.pop_back();
      nodes_stack.pop_back();
      visited[std::size_t(next)] = 0;
    }
  };
  for (int start = 0; start < n; ++start) {
    std::fill(visited.begin(), visited.end(), 0);
    visited[std::size_t(start)] = 1;
    nodes_stack = {start};
    links_stack.clear();
    dfs(dfs, start);
  }
  return out;
}

// The path universe the allocator works with: trivial single-node paths
// (PoA serves everything itself) plus all multi-hop simple paths.
inline std::vector<PathSpec> build_path_set(const NetworkTopology& topo, int max_hops,
                                            const std::vector<int>& node_area) {
  std::vector<PathSpec> out = enumerate_paths(topo, 0, node_area);
  if (max_hops > 0) {
    auto multi = enumerate_paths(topo, max_hops, node_area);
    for (auto& p : multi) {
      p.id = int(out.size());
      out.push_back(std::move(p));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string entity;  // e.g. "node", "link"
  int id = -1;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate_topology(const NetworkTopology& topo) {
  ValidationReport report;
  auto flag = [&](const std::string& entity, int id, const std::string& msg) {
    report.violations.push_back({entity, id, msg});
  };

  const int areas = topo.grid.area_count();
  if (topo.grid.rows < 1 || topo.grid.cols < 1) flag("grid", 0, "empty grid dimensions");
  if (int(topo.grid.los_probability.size()) != areas)
    flag("grid", 0, "los_probability size does not match rows*cols");
  for (int a = 0; a < int(topo.grid.los_probability.size()); ++a) {
    const double p = topo.grid.los_probability[std::size_t(a)];
    if (p < 0.0 || p > 1.0) flag("area", a, "los_probability outside [0,1]");
  }

  for (const auto& n : topo.nodes) {
    if (n.is_uav()) {
      if (!n.uav) flag("node", n.id, "missing aerodynamic parameters");
      if (!n.initial_area || *n.initial_area < 0 || *n.initial_area >= areas)
        flag("node", n.id, "uav initial_area missing or outside grid");
      if (n.fixed_area) flag("node", n.id, "uav must not declare fixed_area");
    } else {
      if (!n.fixed_area) flag("node", n.id, "fixed node missing fixed_area");
      else if (*n.fixed_area < 0 || *n.fixed_area >= areas)
        flag("node", n.id, "fixed_area outside grid");
      if (n.uav) flag("node", n.id, "non-uav node carries aerodynamic parameters");
    }
    if (n.processing_capacity <= 0.0) flag("node", n.id, "processing_capacity must be positive");
    if (n.deploy_energy < 0.0) flag("node", n.id, "deploy_energy must be nonnegative");
  }

  const int node_count = int(topo.nodes.size());
  for (const auto& l : topo.links) {
    if (l.node_a == l.node_b) flag("link", l.id, "endpoints must be distinct");
    if (l.node_a < 0 || l.node_a >= node_count || l.node_b < 0 || l.node_b >= node_count)
      flag("link", l.id, "endpoint node out of range");
    if (l.bandwidth_capacity <= 0.0) flag("link", l.id, "bandwidth_capacity must be positive");
    if (l.base_latency_ms <= 0.0) flag("link", l.id, "base_latency must be positive");
  }
  return report;
}

inline ValidationReport validate_instance(const Instance& inst) {
  ValidationReport report = validate_topology(inst.topology);
  auto flag = [&](const std::string& entity, int id, const std::string& msg) {
    report.violations.push_back({entity, id, msg});
  };

  if (inst.time.slots_per_frame < 1) flag("time", 0, "slots_per_frame must be >= 1");
  if (inst.time.total_frames < 0) flag("time", 0, "total_frames must be >= 0");
  if (inst.ue_count < 0) flag("ues", 0, "ue_count must be >= 0");
  if (!inst.ue_initial_areas.empty() && int(inst.ue_initial_areas.size()) != inst.ue_count)
    flag("ues", 0, "ue initial_areas size does not match count");

  for (const auto& s : inst.services) {
    if (s.functions.empty()) flag("service", s.id, "functions must be non-empty");
    if (s.duration_frames < 1) flag("service", s.id, "duration_frames must be >= 1");
    for (int f : s.functions)
      if (f < 0) flag("service", s.id, "negative function id");
  }

  for (const auto& c : inst.channels) {
    if (c.use_energy < 0.0) flag("channel", c.id, "use_energy must be nonnegative");
    if (c.phys.quality_threshold <= 0.0) flag("channel", c.id, "quality_threshold must be positive");
    if (c.phys.subcarrier_spacing <= 0.0) flag("channel", c.id, "subcarrier_spacing must be positive");
  }

  for (const auto& r : inst.requests) {
    if (r.ue < 0 || r.ue >= inst.ue_count) flag("request", r.id, "ue out of range");
    if (r.service < 0 || r.service >= int(inst.services.size())) {
      flag("request", r.id, "service out of range");
      continue;
    }
    const auto& svc = inst.services[std::size_t(r.service)];
    if (r.capacity_req.size() != svc.functions.size())
      flag("request", r.id, "capacity_req size does not match service chain");
    if (r.entry_frame < 0) flag("request", r.id, "entry_frame must be >= 0");
    if (r.required_slots < 1 || r.required_slots > inst.time.slots_per_frame)
      flag("request", r.id, "required_slots outside [1, slots_per_frame]");
    if (r.bandwidth_req <= 0.0) flag("request", r.id, "bandwidth_req must be positive");
    if (r.latency_req_ms <= 0.0) flag("request", r.id, "latency_req must be positive");
    for (double c : r.capacity_req)
      if (c <= 0.0) flag("request", r.id, "capacity_req entries must be positive");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Allocation: the joint decision state over one horizon.
//
// Bit maps are stored densely per frame. z is kept per (request, slot) as a
// channel bitmask so that malformed allocations (two channels in one slot)
// remain representable for the checker.

struct ChosenPath {
  std::vector<int> nodes;
  std::vector<int> links;
  bool operator==(const ChosenPath&) const = default;
};

struct RequestFrameAlloc {
  std::vector<std::uint8_t> x;              // [function universe] selection bits
  std::vector<std::uint32_t> slot_channel;  // [slot] -> channel bitmask
  std::optional<ChosenPath> path;
};

struct FrameAlloc {
  std::vector<std::uint8_t> node_area;  // [node * areas + area]
  std::vector<std::uint8_t> poa;        // [ue * nodes + node]
  std::vector<std::uint8_t> place;      // [function * nodes + node]
  std::map<int, RequestFrameAlloc> requests;
};

class Allocation {
 public:
  Allocation() = default;
  Allocation(int frames, int slots_per_frame, int areas, int nodes, int ues, int functions,
             int channels)
      : slots_per_frame_(slots_per_frame),
        areas_(areas),
        nodes_(nodes),
        ues_(ues),
        functions_(functions),
        channels_(channels),
        frames_(std::size_t(frames)) {
    for (auto& fr : frames_) {
      fr.node_area.assign(std::size_t(nodes) * std::size_t(areas), 0);
      fr.poa.assign(std::size_t(ues) * std::size_t(nodes), 0);
      fr.place.assign(std::size_t(functions) * std::size_t(nodes), 0);
    }
  }

  static Allocation for_instance(const Instance& inst) {
    return Allocation(inst.time.total_frames, inst.time.slots_per_frame, inst.area_count(),
                      inst.node_count(), inst.ue_count, inst.function_count(),
                      inst.channel_count());
  }

  int frame_count() const { return int(frames_.size()); }
  int slots_per_frame() const { return slots_per_frame_; }
  int areas() const { return areas_; }
  int nodes() const { return nodes_; }
  int ues() const { return ues_; }
  int functions() const { return functions_; }
  int channels() const { return channels_; }

  const FrameAlloc& frame(int t) const { return frames_.at(std::size_t(t)); }
  FrameAlloc& frame(int t) { return frames_.at(std::size_t(t)); }

  // Typed mutator: setting a node's area clears every other area bit, so
  // each (frame, node) row always sums to one.
  void set_node_area(int t, int node, int area) {
    auto& fr = frame(t);
    for (int a = 0; a < areas_; ++a) fr.node_area[idx2(node, a, areas_)] = 0;
    fr.node_area[idx2(node, area, areas_)] = 1;
  }
  bool node_in_area(int t, int node, int area) const {
    return frame(t).node_area[idx2(node, area, areas_)] != 0;
  }
  int node_area(int t, int node) const {
    const auto& fr = frame(t);
    for (int a = 0; a < areas_; ++a)
      if (fr.node_area[idx2(node, a, areas_)]) return a;
    return -1;
  }
  std::vector<int> node_areas(int t) const {
    auto out = std::vector<int>(std::size_t(nodes_));
    for (int n = 0; n < nodes_; ++n) out[std::size_t(n)] = node_area(t, n);
    return out;
  }

  void bind_poa(int t, int ue, int node) { frame(t).poa[idx2(ue, node, nodes_)] = 1; }
  void clear_poa(int t, int ue) {
    auto& fr = frame(t);
    for (int n = 0; n < nodes_; ++n) fr.poa[idx2(ue, n, nodes_)] = 0;
  }
  bool poa_bound(int t, int ue, int node) const { return frame(t).poa[idx2(ue, node, nodes_)] != 0; }
  int poa_of(int t, int ue) const {  // -1 when unbound; first bound node otherwise
    const auto& fr = frame(t);
    for (int n = 0; n < nodes_; ++n)
      if (fr.poa[idx2(ue, n, nodes_)]) return n;
    return -1;
  }
  int poa_degree(int t, int ue) const {
    const auto& fr = frame(t);
    int d = 0;
    for (int n = 0; n < nodes_; ++n) d += fr.poa[idx2(ue, n, nodes_)];
    return d;
  }

  void place_function(int t, int function, int node, bool value = true) {
    frame(t).place[idx2(function, node, nodes_)] = value ? 1 : 0;
  }
  bool placed(int t, int function, int node) const {
    return frame(t).place[idx2(function, node, nodes_)] != 0;
  }

  RequestFrameAlloc& request_frame(int t, int request) {
    auto& slot = frame(t).requests[request];
    if (slot.x.empty()) {
      slot.x.assign(std::size_t(functions_), 0);
      slot.slot_channel.assign(std::size_t(slots_per_frame_), 0);
    }
    return slot;
  }
  const RequestFrameAlloc* find_request_frame(int t, int request) const {
    const auto& reqs = frame(t).requests;
    auto it = reqs.find(request);
    return it == reqs.end() ? nullptr : &it->second;
  }

  void select_function(int t, int request, int function, bool value = true) {
    request_frame(t, request).x[std::size_t(function)] = value ? 1 : 0;
  }
  bool function_selected(int t, int request, int function) const {
    const auto* rf = find_request_frame(t, request);
    return rf && rf->x[std::size_t(function)] != 0;
  }

  void assign_channel(int t, int request, int slot, int channel) {
    request_frame(t, request).slot_channel[std::size_t(slot)] |= (1u << channel);
  }
  std::uint32_t slot_channels(int t, int request, int slot) const {
    const auto* rf = find_request_frame(t, request);
    return rf ? rf->slot_channel[std::size_t(slot)] : 0u;
  }
  bool channel_assigned(int t, int request, int slot, int channel) const {
    return (slot_channels(t, request, slot) >> channel) & 1u;
  }

  void set_path(int t, int request, ChosenPath path) { request_frame(t, request).path = std::move(path); }
  const ChosenPath* path_of(int t, int request) const {
    const auto* rf = find_request_frame(t, request);
    return (rf && rf->path) ? &*rf->path : nullptr;
  }

  bool operator==(const Allocation& other) const {
    if (slots_per_frame_ != other.slots_per_frame_ || frames_.size() != other.frames_.size())
      return false;
    for (std::size_t t = 0; t < frames_.size(); ++t) {
      const auto& a = frames_[t];
      const auto& b = other.frames_[t];
      if (a.node_area != b.node_area || a.poa != b.poa || a.place != b.place) return false;
      if (a.requests.size() != b.requests.size()) return false;
      for (auto ita = a.requests.begin(), itb = b.requests.begin(); ita != a.requests.end();
           ++ita, ++itb) {
        if (ita->first != itb->first) return false;
        if (ita->second.x != itb->second.x) return false;
        if (ita->second.slot_channel != itb->second.slot_channel) return false;
        if (ita->second.path.has_value() != itb->second.path.has_value()) return false;
        if (ita->second.path && !(*ita->second.path == *itb->second.path)) return false;
      }
    }
    return true;
  }

 private:
  static std::size_t idx2(int i, int j, int stride) {
    return std::size_t(i) * std::size_t(stride) + std::size_t(j);
  }

  int slots_per_frame_ = 0;
  int areas_ = 0;
  int nodes_ = 0;
  int ues_ = 0;
  int functions_ = 0;
  int channels_ = 0;
  std::vector<FrameAlloc> frames_;
};

}  // namespace aero::model
