// Dynamic world state: UE mobility on the area grid, weather regimes,
// LoS/fading channel realizations, link latency under load, request
// arrivals, and the UAV movement energy model.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "aero/model.hpp"
#include "aero/rng.hpp"

namespace aero::environment {

// ---------------------------------------------------------------------------
// UAV movement energy.
//
// Power while airborne splits into an induced (hover) term and an
// aerodynamic drag term:
//   P(t) = I * W^{3/2} / sqrt(2 * phi * u_r)  +  1/2 * varsigma * phi * u_f * V(t)^3
// integrated over the travel duration.

inline double hover_power(const model::UavParams& uav) {
  return uav.induced_power * std::pow(uav.weight_kg, 1.5) /
         std::sqrt(2.0 * uav.air_density * uav.rotor_disk_area);
}

inline double drag_power(const model::UavParams& uav, double velocity) {
  return 0.5 * uav.drag_coeff * uav.air_density * uav.frontal_area * velocity * velocity * velocity;
}

// Closed form for a constant velocity profile.
inline double uav_move_energy(const model::UavParams& uav, double travel_time_s) {
  if (travel_time_s < 0.0) throw std::invalid_argument("uav_move_energy: negative travel_time");
  return travel_time_s * (hover_power(uav) + drag_power(uav, uav.velocity_mps));
}

// Piecewise-linear velocity profile: segments of (duration, v_start, v_end).
// Each cubic integrates exactly to d * (v1^3 + v1^2 v2 + v1 v2^2 + v2^3) / 4.
struct VelocitySegment {
  double duration_s;
  double v_start;
  double v_end;
};

inline double uav_move_energy(const model::UavParams& uav,
                              const std::vector<VelocitySegment>& profile) {
  double energy = 0.0;
  for (const auto& seg : profile) {
    if (seg.duration_s < 0.0) throw std::invalid_argument("uav_move_energy: negative segment");
    const double v1 = seg.v_start, v2 = seg.v_end;
    const double cubic = (v1 * v1 * v1 + v1 * v1 * v2 + v1 * v2 * v2 + v2 * v2 * v2) / 4.0;
    energy += seg.duration_s * (hover_power(uav) + 0.5 * uav.drag_coeff * uav.air_density *
                                                       uav.frontal_area * cubic);
  }
  return energy;
}

// Travel time between two areas: Manhattan distance over the grid at the
// UAV's constant velocity. Same area means no flight and no energy.
inline double travel_time_s(const model::AreaGrid& grid, const model::UavParams& uav, int a1,
                            int a2) {
  if (a1 == a2) return 0.0;
  return grid.manhattan_m(a1, a2) / uav.velocity_mps;
}

inline double relocation_energy(const model::AreaGrid& grid, const model::NodeSpec& node, int a1,
                                int a2) {
  if (!node.uav) throw std::invalid_argument("relocation_energy: node is not a uav");
  return uav_move_energy(*node.uav, travel_time_s(grid, *node.uav, a1, a2));
}

// ---------------------------------------------------------------------------
// Weather

struct WeatherState {
  int regime = 0;                 // index into the attenuation/shadowing tables
  double attenuation_db = 0.0;    // zeta
  double shadowing_std_db = 2.0;  // eta_s
};

inline WeatherState weather_from_regime(int regime) {
  static constexpr double kAttenuation[] = {0.0, 2.5, 5.0};
  static constexpr double kShadowStd[] = {2.0, 3.0, 4.5};
  WeatherState w;
  w.regime = regime;
  w.attenuation_db = kAttenuation[regime];
  w.shadowing_std_db = kShadowStd[regime];
  return w;
}

inline WeatherState draw_weather(Rng& rng) { return weather_from_regime(rng.uniform_int(0, 2)); }

// ---------------------------------------------------------------------------
// Channel realization.
//
// With probability theta_LoS the slot is good outright. Otherwise the gain
//   H = R * 10^(chi * eta_s / 10) * (D0 / d)^nu * 10^(-zeta / 10)
// feeds the SNR test gamma = P_tx * H / (N0 * df) >= Q_hat.

struct ChannelRealization {
  bool line_of_sight = false;
  double rayleigh = 0.0;
  double shadow_normal = 0.0;
  double gain = 0.0;
  double snr = 0.0;
  bool quality = false;
};

inline ChannelRealization realize_channel(const model::ChannelSpec& channel, double los_probability,
                                          double distance_m, const WeatherState& weather,
                                          Rng& rng) {
  if (distance_m <= 0.0) throw std::invalid_argument("realize_channel: nonpositive distance");
  ChannelRealization out;
  // Draw everything up front so the stream advances identically on both
  // branches; cross-policy runs then share realization streams exactly.
  const double los_draw = rng.uniform01();
  out.rayleigh = rng.rayleigh(channel.phys.rayleigh_sigma);
  out.shadow_normal = rng.normal();
  out.line_of_sight = los_draw < los_probability;
  if (out.line_of_sight) {
    out.quality = true;
    return out;
  }
  const auto& phys = channel.phys;
  out.gain = out.rayleigh * std::pow(10.0, out.shadow_normal * weather.shadowing_std_db / 10.0) *
             std::pow(phys.reference_distance / distance_m, phys.path_loss_exponent) *
             std::pow(10.0, -weather.attenuation_db / 10.0);
  out.snr = phys.transmit_power * out.gain / (phys.noise_density * phys.subcarrier_spacing);
  out.quality = out.snr >= phys.quality_threshold;
  return out;
}

// Uplink anchor distance for an area: separation from the area center to the
// nearest fixed node's area center, floored at half a cell so the same-area
// case stays physical. Fixed anchors keep realizations policy-independent.
inline double area_uplink_distance_m(const model::NetworkTopology& topo, int area) {
  const auto& grid = topo.grid;
  double best = -1.0;
  for (const auto& n : topo.nodes) {
    if (n.is_uav()) continue;
    const double d = grid.euclidean_m(area, *n.fixed_area);
    if (best < 0.0 || d < best) best = d;
  }
  if (best < 0.0) best = grid.cell_size_m;  // no fixed infrastructure at all
  return std::max(best, grid.cell_size_m / 2.0);
}

// ---------------------------------------------------------------------------
// Mobility: Manhattan model on the grid. Straight with probability 0.5,
// left or right turns with 0.25 each; a draw that would leave the grid
// re-samples uniformly among the in-grid candidates of the same step.

enum class Heading { north = 0, south = 1, east = 2, west = 3 };

struct UEState {
  int ue = 0;
  int area = 0;
  Heading heading = Heading::north;
};

namespace detail {

inline std::pair<int, int> heading_delta(Heading h) {
  switch (h) {
    case Heading::north: return {-1, 0};
    case Heading::south: return {1, 0};
    case Heading::east: return {0, 1};
    case Heading::west: return {0, -1};
  }
  return {0, 0};
}

inline Heading left_of(Heading h) {
  switch (h) {
    case Heading::north: return Heading::west;
    case Heading::south: return Heading::east;
    case Heading::east: return Heading::north;
    case Heading::west: return Heading::south;
  }
  return h;
}

inline Heading right_of(Heading h) {
  switch (h) {
    case Heading::north: return Heading::east;
    case Heading::south: return Heading::west;
    case Heading::east: return Heading::south;
    case Heading::west: return Heading::north;
  }
  return h;
}

inline bool target_area(const model::AreaGrid& grid, int area, Heading h, int& out) {
  const auto [dr, dc] = heading_delta(h);
  const int r = grid.row_of(area) + dr;
  const int c = grid.col_of(area) + dc;
  if (!grid.contains(r, c)) return false;
  out = grid.area_at(r, c);
  return true;
}

}  // namespace detail

// Candidate headings for one step: straight, left, right with their base
// probabilities. Used by both the mobility step and the predictor so the
// transition law has exactly one definition.
struct MoveCandidate {
  Heading heading;
  double probability;
  bool in_grid;
  int target;
};

inline std::vector<MoveCandidate> move_candidates(const model::AreaGrid& grid, int area,
                                                  Heading heading) {
  std::vector<MoveCandidate> out;
  const Heading options[3] = {heading, detail::left_of(heading), detail::right_of(heading)};
  const double probs[3] = {0.5, 0.25, 0.25};
  for (int i = 0; i < 3; ++i) {
    MoveCandidate c;
    c.heading = options[i];
    c.probability = probs[i];
    c.target = area;
    c.in_grid = detail::target_area(grid, area, options[i], c.target);
    out.push_back(c);
  }
  return out;
}

inline void step_ue(const model::AreaGrid& grid, UEState& ue, Rng& rng) {
  auto candidates = move_candidates(grid, ue.area, ue.heading);
  const double draw = rng.uniform01();
  int chosen = draw < 0.5 ? 0 : (draw < 0.75 ? 1 : 2);
  if (!candidates[std::size_t(chosen)].in_grid) {
    std::vector<int> feasible;
    for (int i = 0; i < 3; ++i)
      if (candidates[std::size_t(i)].in_grid) feasible.push_back(i);
    if (feasible.empty()) return;  // boxed in: stay put, keep heading
    chosen = feasible[std::size_t(rng.uniform_int(0, int(feasible.size()) - 1))];
  }
  ue.area = candidates[std::size_t(chosen)].target;
  ue.heading = candidates[std::size_t(chosen)].heading;
}

inline void step_mobility(const model::AreaGrid& grid, std::vector<UEState>& ues, Rng& rng) {
  for (auto& ue : ues) step_ue(grid, ue, rng);
}

// Exact one-step area distribution of the mobility law, for the predictor.
inline std::vector<double> transition_distribution(const model::AreaGrid& grid, int area,
                                                   Heading heading) {
  std::vector<double> dist(std::size_t(grid.area_count()), 0.0);
  auto candidates = move_candidates(grid, area, heading);
  std::vector<int> feasible;
  double lost = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (candidates[std::size_t(i)].in_grid) feasible.push_back(i);
    else lost += candidates[std::size_t(i)].probability;
  }
  if (feasible.empty()) {
    dist[std::size_t(area)] = 1.0;
    return dist;
  }
  for (int i : feasible) {
    const auto& c = candidates[std::size_t(i)];
    dist[std::size_t(c.target)] += c.probability + lost / double(feasible.size());
  }
  return dist;
}

// ---------------------------------------------------------------------------
// Link latency under load: base latency scaled by the committed bandwidth
// fraction at the frame in question.

inline double link_latency_ms(const model::LinkSpec& link, double load_fraction) {
  return link.base_latency_ms * (1.0 + load_fraction);
}

// ---------------------------------------------------------------------------
// Request arrivals: Poisson-like counts, uniform UE and service assignment,
// requirement fields drawn from the configured ranges.

struct ArrivalRanges {
  double bandwidth_lo = 2.0, bandwidth_hi = 8.0;
  double capacity_lo = 8.0, capacity_hi = 20.0;
  double latency_lo = 50.0, latency_hi = 100.0;
  int slots_lo = 3, slots_hi = 9;
};

inline std::vector<model::Request> spawn_requests(int frame, int next_request_id, int ue_count,
                                                  const std::vector<model::ServiceSpec>& catalog,
                                                  double arrival_rate, int slots_per_frame,
                                                  Rng& rng, const ArrivalRanges& ranges = {}) {
  std::vector<model::Request> out;
  if (arrival_rate <= 0.0 || ue_count == 0 || catalog.empty()) return out;
  const int count = rng.poisson(arrival_rate);
  for (int i = 0; i < count; ++i) {
    model::Request r;
    r.id = next_request_id++;
    r.ue = rng.uniform_int(0, ue_count - 1);
    r.service = catalog[std::size_t(rng.uniform_int(0, int(catalog.size()) - 1))].id;
    r.entry_frame = frame;
    r.bandwidth_req = rng.uniform(ranges.bandwidth_lo, ranges.bandwidth_hi);
    const auto& svc = catalog[std::size_t(r.service)];
    r.capacity_req.resize(svc.functions.size());
    for (auto& c : r.capacity_req) c = rng.uniform(ranges.capacity_lo, ranges.capacity_hi);
    r.latency_req_ms = rng.uniform(ranges.latency_lo, ranges.latency_hi);
    r.required_slots = std::min(rng.uniform_int(ranges.slots_lo, ranges.slots_hi), slots_per_frame);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// World: realized environment over a horizon. Frames are materialized one
// at a time; everything drawn is recorded so the constraint checker can
// re-evaluate an allocation against the exact same ground truth.

struct FrameRealization {
  std::vector<int> ue_area;               // [ue]
  std::vector<std::uint8_t> ue_heading;   // [ue], Heading enum values
  WeatherState weather;
  std::vector<std::uint8_t> quality;      // [slot][channel][area] flattened
  std::vector<double> uplink_distance;    // [area]
};

class World {
 public:
  explicit World(const model::Instance& inst)
      : inst_(&inst),
        mobility_rng_(inst.stream("mobility")),
        channel_rng_(inst.stream("channel")),
        arrival_rng_(inst.stream("arrival")),
        weather_rng_(inst.stream("weather")) {
    const int areas = inst.area_count();
    ues_.resize(std::size_t(inst.ue_count));
    for (int u = 0; u < inst.ue_count; ++u) {
      ues_[std::size_t(u)].ue = u;
      ues_[std::size_t(u)].area = inst.ue_initial_areas.empty()
                                      ? mobility_rng_.uniform_int(0, areas - 1)
                                      : inst.ue_initial_areas[std::size_t(u)];
      ues_[std::size_t(u)].heading = Heading(mobility_rng_.uniform_int(0, 3));
    }
    requests_ = inst.requests;
    next_request_id_ = 0;
    for (const auto& r : requests_) next_request_id_ = std::max(next_request_id_, r.id + 1);
    uplink_distance_.resize(std::size_t(areas));
    for (int a = 0; a < areas; ++a)
      uplink_distance_[std::size_t(a)] = area_uplink_distance_m(inst.topology, a);
    realize_frame();  // frame 0
  }

  const model::Instance& instance() const { return *inst_; }
  const std::vector<model::Request>& requests() const { return requests_; }
  const std::vector<UEState>& ue_states() const { return ues_; }
  int realized_frames() const { return int(frames_.size()); }
  const FrameRealization& frame(int t) const { return frames_.at(std::size_t(t)); }

  // Advance to the next frame: move UEs, draw weather, spawn arrivals, and
  // realize channel quality for every (slot, channel, area) cell.
  void advance() {
    step_mobility(inst_->topology.grid, ues_, mobility_rng_);
    const int t = int(frames_.size());
    auto spawned = spawn_requests(t, next_request_id_, inst_->ue_count, inst_->services,
                                  inst_->arrival_rate, inst_->time.slots_per_frame, arrival_rng_);
    for (auto& r : spawned) {
      next_request_id_ = std::max(next_request_id_, r.id + 1);
      requests_.push_back(std::move(r));
    }
    realize_frame();
  }

  bool quality(int t, int slot, int channel, int area) const {
    const auto& fr = frames_.at(std::size_t(t));
    return fr.quality[quality_index(slot, channel, area)] != 0;
  }

  std::vector<int> active_request_ids(int t) const {
    std::vector<int> out;
    for (const auto& r : requests_)
      if (inst_->active_at(r, t)) out.push_back(r.id);
    return out;
  }

  const model::Request& request_by_id(int id) const {
    for (const auto& r : requests_)
      if (r.id == id) return r;
    throw std::out_of_range("unknown request id");
  }

  int ue_area_at(int t, int ue) const { return frames_.at(std::size_t(t)).ue_area[std::size_t(ue)]; }
  Heading ue_heading_at(int t, int ue) const {
    return Heading(frames_.at(std::size_t(t)).ue_heading[std::size_t(ue)]);
  }

  // Slot-average realized quality for one (channel, area) over a frame.
  double frame_quality_average(int t, int channel, int area) const {
    const int slots = inst_->time.slots_per_frame;
    int sum = 0;
    for (int s = 0; s < slots; ++s) sum += quality(t, s, channel, area) ? 1 : 0;
    return double(sum) / double(slots);
  }

  std::vector<std::uint64_t> rng_state() const {
    std::vector<std::uint64_t> out;
    for (const Rng* rng : {&mobility_rng_, &channel_rng_, &arrival_rng_, &weather_rng_})
      for (auto w : rng->state()) out.push_back(w);
    return out;
  }

 private:
  std::size_t quality_index(int slot, int channel, int area) const {
    const int areas = inst_->area_count();
    const int channels = inst_->channel_count();
    return (std::size_t(slot) * std::size_t(channels) + std::size_t(channel)) * std::size_t(areas) +
           std::size_t(area);
  }

  void realize_frame() {
    FrameRealization fr;
    fr.ue_area.resize(ues_.size());
    fr.ue_heading.resize(ues_.size());
    for (std::size_t u = 0; u < ues_.size(); ++u) {
      fr.ue_area[u] = ues_[u].area;
      fr.ue_heading[u] = std::uint8_t(ues_[u].heading);
    }
    fr.weather = draw_weather(weather_rng_);
    const int areas = inst_->area_count();
    const int channels = inst_->channel_count();
    const int slots = inst_->time.slots_per_frame;
    fr.uplink_distance = uplink_distance_;
    fr.quality.assign(std::size_t(slots) * std::size_t(channels) * std::size_t(areas), 0);
    for (int s = 0; s < slots; ++s)
      for (int c = 0; c < channels; ++c)
        for (int a = 0; a < areas; ++a) {
          const auto realization = realize_channel(
              inst_->channels[std::size_t(c)], inst_->topology.grid.los_probability[std::size_t(a)],
              fr.uplink_distance[std::size_t(a)], fr.weather, channel_rng_);
          fr.quality[quality_index(s, c, a)] = realization.quality ? 1 : 0;
        }
    frames_.push_back(std::move(fr));
  }

  const model::Instance* inst_;
  std::vector<double> uplink_distance_;
  Rng mobility_rng_, channel_rng_, arrival_rng_, weather_rng_;
  std::vector<UEState> ues_;
  std::vector<model::Request> requests_;
  std::vector<FrameRealization> frames_;
  int next_request_id_ = 0;
};

}  // namespace aero::environment
