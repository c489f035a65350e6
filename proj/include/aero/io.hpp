// Structured text I/O for instances and allocation certificates.
//
// Instance files are section-based key/value documents:
//
//   [grid]
//   rows = 4
//   cols = 4
//   los_probability = [0.31, 0.75, ...]
//
//   [nodes]
//   node id=0 kind=core processing_capacity=60 deploy_energy=14 fixed_area=0
//   node id=2 kind=uav processing_capacity=30 deploy_energy=25 weight_kg=5 ...
//
// Entity lines start with the singular keyword; everything else is a
// `key = value` scalar. Numbers are written with %.17g so files round-trip
// without loss.
#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aero/model.hpp"

namespace aero::io {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::vector<std::string> split_list(std::string body) {
  // body is the text between '[' and ']'
  std::vector<std::string> out;
  std::string cur;
  for (char c : body) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cur = trim(cur);
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace detail

// One parsed entity line: keyword plus key=value fields (arrays allowed).
struct Entity {
  std::string keyword;
  std::map<std::string, std::string> fields;

  bool has(const std::string& key) const { return fields.count(key) != 0; }
  const std::string& raw(const std::string& key) const {
    auto it = fields.find(key);
    if (it == fields.end()) throw ParseError("missing field '" + key + "' on '" + keyword + "'");
    return it->second;
  }
  double num(const std::string& key) const { return std::stod(raw(key)); }
  double num(const std::string& key, double fallback) const {
    return has(key) ? std::stod(raw(key)) : fallback;
  }
  int integer(const std::string& key) const { return int(std::stol(raw(key))); }
  int integer(const std::string& key, int fallback) const {
    return has(key) ? int(std::stol(raw(key))) : fallback;
  }
  std::string text(const std::string& key) const { return raw(key); }
  std::vector<double> list(const std::string& key) const {
    const std::string& r = raw(key);
    if (r.size() < 2 || r.front() != '[' || r.back() != ']')
      throw ParseError("field '" + key + "' is not a list");
    std::vector<double> out;
    for (const auto& item : detail::split_list(r.substr(1, r.size() - 2)))
      out.push_back(std::stod(item));
    return out;
  }
  std::vector<int> int_list(const std::string& key) const {
    std::vector<int> out;
    for (double v : list(key)) out.push_back(int(v));
    return out;
  }
};

struct Section {
  std::map<std::string, std::string> scalars;
  std::vector<Entity> entities;

  bool has(const std::string& key) const { return scalars.count(key) != 0; }
  std::string text(const std::string& key, const std::string& fallback = "") const {
    auto it = scalars.find(key);
    return it == scalars.end() ? fallback : it->second;
  }
  double num(const std::string& key, double fallback) const {
    auto it = scalars.find(key);
    return it == scalars.end() ? fallback : std::stod(it->second);
  }
  double num(const std::string& key) const {
    auto it = scalars.find(key);
    if (it == scalars.end()) throw ParseError("missing scalar '" + key + "'");
    return std::stod(it->second);
  }
  int integer(const std::string& key, int fallback) const { return int(num(key, fallback)); }
  int integer(const std::string& key) const { return int(num(key)); }
  std::vector<double> list(const std::string& key) const {
    auto it = scalars.find(key);
    if (it == scalars.end()) throw ParseError("missing list '" + key + "'");
    const std::string& r = it->second;
    if (r.size() < 2 || r.front() != '[' || r.back() != ']')
      throw ParseError("scalar '" + key + "' is not a list");
    std::vector<double> out;
    for (const auto& item : detail::split_list(r.substr(1, r.size() - 2)))
      out.push_back(std::stod(item));
    return out;
  }
};

using Document = std::map<std::string, Section>;

inline Document parse_document(std::istream& in) {
  Document doc;
  Section* section = nullptr;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError("bad section header at line " + std::to_string(line_no));
      section = &doc[t.substr(1, t.size() - 2)];
      continue;
    }
    if (!section) throw ParseError("content before any section at line " + std::to_string(line_no));
    const std::size_t eq = t.find('=');
    auto toks = detail::split_ws(t);
    const bool scalar_form = toks.size() >= 2 && toks[1] == "=";
    if (!scalar_form && toks.size() >= 2 && toks[1].find('=') != std::string::npos) {
      // entity line: keyword key=value key=value ...
      Entity e;
      // re-join tokens split inside [..] lists
      std::vector<std::string> merged;
      for (auto& tok : toks) {
        if (!merged.empty() && merged.back().find('[') != std::string::npos &&
            merged.back().find(']') == std::string::npos) {
          merged.back() += tok;
        } else {
          merged.push_back(tok);
        }
      }
      e.keyword = merged.front();
      for (std::size_t i = 1; i < merged.size(); ++i) {
        const std::size_t p = merged[i].find('=');
        if (p == std::string::npos)
          throw ParseError("bad entity field '" + merged[i] + "' at line " + std::to_string(line_no));
        e.fields[merged[i].substr(0, p)] = merged[i].substr(p + 1);
      }
      section->entities.push_back(std::move(e));
    } else if (eq != std::string::npos) {
      section->scalars[detail::trim(t.substr(0, eq))] = detail::trim(t.substr(eq + 1));
    } else {
      throw ParseError("unparseable line " + std::to_string(line_no) + ": " + t);
    }
  }
  return doc;
}

inline Document parse_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  return parse_document(in);
}

// ---------------------------------------------------------------------------
// Instance

inline model::Instance instance_from_document(const Document& doc) {
  model::Instance inst;
  auto section = [&](const char* name) -> const Section& {
    auto it = doc.find(name);
    if (it == doc.end()) throw ParseError(std::string("missing section [") + name + "]");
    return it->second;
  };

  const Section& seeds = section("seeds");
  inst.seeds = SeedStreams(std::uint64_t(seeds.num("master", 0)));
  for (const auto& [key, value] : seeds.scalars)
    if (key != "master") inst.seed_overrides[key] = std::uint64_t(std::stoull(value));

  const Section& grid = section("grid");
  inst.topology.grid.rows = grid.integer("rows");
  inst.topology.grid.cols = grid.integer("cols");
  inst.topology.grid.cell_size_m = grid.num("cell_size_m", 2000.0);
  if (grid.has("los_probability")) {
    inst.topology.grid.los_probability = grid.list("los_probability");
  } else {
    const double lo = grid.num("los_low", 0.2);
    const double hi = grid.num("los_high", 0.8);
    inst.topology.grid = model::build_grid(inst.topology.grid.rows, inst.topology.grid.cols, lo, hi,
                                           inst.seeds.stream_seed("grid"));
    inst.topology.grid.cell_size_m = grid.num("cell_size_m", 2000.0);
  }

  const Section& time = section("time");
  inst.time.total_frames = time.integer("total_frames");
  inst.time.slots_per_frame = time.integer("slots_per_frame");

  const Section& ues = section("ues");
  inst.ue_count = ues.integer("count");
  inst.arrival_rate = ues.num("arrival_rate", 0.0);
  if (ues.has("initial_areas")) {
    for (double v : ues.list("initial_areas")) inst.ue_initial_areas.push_back(int(v));
  }

  for (const auto& e : section("nodes").entities) {
    model::NodeSpec n;
    n.id = e.integer("id");
    const std::string kind = e.text("kind");
    if (kind == "core") n.kind = model::NodeKind::core;
    else if (kind == "rsu") n.kind = model::NodeKind::rsu;
    else if (kind == "uav") n.kind = model::NodeKind::uav;
    else throw ParseError("unknown node kind: " + kind);
    n.processing_capacity = e.num("processing_capacity");
    n.deploy_energy = e.num("deploy_energy");
    if (e.has("fixed_area")) n.fixed_area = e.integer("fixed_area");
    if (e.has("initial_area")) n.initial_area = e.integer("initial_area");
    if (n.is_uav()) {
      model::UavParams u;
      u.weight_kg = e.num("weight_kg");
      u.induced_power = e.num("induced_power");
      u.air_density = e.num("air_density");
      u.rotor_disk_area = e.num("rotor_disk_area");
      u.drag_coeff = e.num("drag_coeff");
      u.frontal_area = e.num("frontal_area");
      u.velocity_mps = e.num("velocity_mps");
      n.uav = u;
    }
    inst.topology.nodes.push_back(std::move(n));
  }

  const Section& links = section("links");
  inst.max_hops = links.integer("max_hops", 4);
  for (const auto& e : links.entities) {
    model::LinkSpec l;
    l.id = e.integer("id");
    auto ends = e.int_list("endpoints");
    if (ends.size() != 2) throw ParseError("link endpoints must have two entries");
    l.node_a = ends[0];
    l.node_b = ends[1];
    l.bandwidth_capacity = e.num("bandwidth_capacity");
    l.transmit_energy = e.num("transmit_energy");
    l.base_latency_ms = e.num("base_latency_ms");
    inst.topology.links.push_back(std::move(l));
  }

  for (const auto& e : section("services").entities) {
    model::ServiceSpec s;
    s.id = e.integer("id");
    s.functions = e.int_list("functions");
    s.duration_frames = e.integer("duration_frames");
    inst.services.push_back(std::move(s));
  }

  for (const auto& e : section("channels").entities) {
    model::ChannelSpec c;
    c.id = e.integer("id");
    c.use_energy = e.num("use_energy");
    c.phys.transmit_power = e.num("transmit_power", c.phys.transmit_power);
    c.phys.noise_density = e.num("noise_density", c.phys.noise_density);
    c.phys.subcarrier_spacing = e.num("subcarrier_spacing", c.phys.subcarrier_spacing);
    c.phys.path_loss_exponent = e.num("path_loss_exponent", c.phys.path_loss_exponent);
    c.phys.reference_distance = e.num("reference_distance", c.phys.reference_distance);
    c.phys.quality_threshold = e.num("quality_threshold", c.phys.quality_threshold);
    c.phys.rayleigh_sigma = e.num("rayleigh_sigma", c.phys.rayleigh_sigma);
    inst.channels.push_back(std::move(c));
  }

  for (const auto& e : section("requests").entities) {
    model::Request r;
    r.id = e.integer("id");
    r.ue = e.integer("ue");
    r.service = e.integer("service");
    r.entry_frame = e.integer("entry_frame");
    r.bandwidth_req = e.num("bandwidth_req");
    r.capacity_req = e.list("capacity_req");
    r.latency_req_ms = e.num("latency_req_ms");
    r.required_slots = e.integer("required_slots");
    inst.requests.push_back(std::move(r));
  }
  return inst;
}

inline model::Instance read_instance(const std::string& path) {
  return instance_from_document(parse_document(path));
}

inline void write_instance(const model::Instance& inst, std::ostream& out) {
  using detail::fmt_double;
  auto write_list = [&](const std::vector<double>& v) {
    out << "[";
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << fmt_double(v[i]);
    out << "]";
  };

  out << "[grid]\n";
  out << "rows = " << inst.topology.grid.rows << "\n";
  out << "cols = " << inst.topology.grid.cols << "\n";
  out << "cell_size_m = " << fmt_double(inst.topology.grid.cell_size_m) << "\n";
  out << "los_probability = ";
  write_list(inst.topology.grid.los_probability);
  out << "\n\n[time]\n";
  out << "total_frames = " << inst.time.total_frames << "\n";
  out << "slots_per_frame = " << inst.time.slots_per_frame << "\n";
  out << "\n[ues]\n";
  out << "count = " << inst.ue_count << "\n";
  out << "arrival_rate = " << fmt_double(inst.arrival_rate) << "\n";
  if (!inst.ue_initial_areas.empty()) {
    out << "initial_areas = [";
    for (std::size_t i = 0; i < inst.ue_initial_areas.size(); ++i)
      out << (i ? ", " : "") << inst.ue_initial_areas[i];
    out << "]\n";
  }

  out << "\n[nodes]\n";
  for (const auto& n : inst.topology.nodes) {
    out << "node id=" << n.id << " kind=" << model::to_string(n.kind)
        << " processing_capacity=" << fmt_double(n.processing_capacity)
        << " deploy_energy=" << fmt_double(n.deploy_energy);
    if (n.fixed_area) out << " fixed_area=" << *n.fixed_area;
    if (n.initial_area) out << " initial_area=" << *n.initial_area;
    if (n.uav) {
      out << " weight_kg=" << fmt_double(n.uav->weight_kg)
          << " induced_power=" << fmt_double(n.uav->induced_power)
          << " air_density=" << fmt_double(n.uav->air_density)
          << " rotor_disk_area=" << fmt_double(n.uav->rotor_disk_area)
          << " drag_coeff=" << fmt_double(n.uav->drag_coeff)
          << " frontal_area=" << fmt_double(n.uav->frontal_area)
          << " velocity_mps=" << fmt_double(n.uav->velocity_mps);
    }
    out << "\n";
  }

  out << "\n[links]\n";
  out << "max_hops = " << inst.max_hops << "\n";
  for (const auto& l : inst.topology.links) {
    out << "link id=" << l.id << " endpoints=[" << l.node_a << "," << l.node_b << "]"
        << " bandwidth_capacity=" << fmt_double(l.bandwidth_capacity)
        << " transmit_energy=" << fmt_double(l.transmit_energy)
        << " base_latency_ms=" << fmt_double(l.base_latency_ms) << "\n";
  }

  out << "\n[services]\n";
  for (const auto& s : inst.services) {
    out << "service id=" << s.id << " functions=[";
    for (std::size_t i = 0; i < s.functions.size(); ++i) out << (i ? "," : "") << s.functions[i];
    out << "] duration_frames=" << s.duration_frames << "\n";
  }

  out << "\n[channels]\n";
  for (const auto& c : inst.channels) {
    out << "channel id=" << c.id << " use_energy=" << fmt_double(c.use_energy)
        << " transmit_power=" << fmt_double(c.phys.transmit_power)
        << " noise_density=" << fmt_double(c.phys.noise_density)
        << " subcarrier_spacing=" << fmt_double(c.phys.subcarrier_spacing)
        << " path_loss_exponent=" << fmt_double(c.phys.path_loss_exponent)
        << " reference_distance=" << fmt_double(c.phys.reference_distance)
        << " quality_threshold=" << fmt_double(c.phys.quality_threshold)
        << " rayleigh_sigma=" << fmt_double(c.phys.rayleigh_sigma) << "\n";
  }

  out << "\n[requests]\n";
  for (const auto& r : inst.requests) {
    out << "request id=" << r.id << " ue=" << r.ue << " service=" << r.service
        << " entry_frame=" << r.entry_frame << " bandwidth_req=" << fmt_double(r.bandwidth_req)
        << " capacity_req=";
    write_list(r.capacity_req);
    out << " latency_req_ms=" << fmt_double(r.latency_req_ms)
        << " required_slots=" << r.required_slots << "\n";
  }

  out << "\n[seeds]\n";
  out << "master = " << inst.seeds.master() << "\n";
  for (const auto& [key, value] : inst.seed_overrides) out << key << " = " << value << "\n";
}

inline void write_instance(const model::Instance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  write_instance(inst, out);
}

// ---------------------------------------------------------------------------
// Allocation certificate

struct ObjectiveSummary {
  int accepted = 0;
  double total_energy = 0.0;
  double objective_value = 0.0;
  double alpha = 0.0;
  std::uint64_t explored = 0;
};

inline void write_allocation(const model::Allocation& alloc, const ObjectiveSummary& summary,
                             std::ostream& out) {
  using detail::fmt_double;
  out << "[meta]\n";
  out << "frames = " << alloc.frame_count() << "\n";
  out << "slots_per_frame = " << alloc.slots_per_frame() << "\n";
  out << "areas = " << alloc.areas() << "\n";
  out << "nodes = " << alloc.nodes() << "\n";
  out << "ues = " << alloc.ues() << "\n";
  out << "functions = " << alloc.functions() << "\n";
  out << "channels = " << alloc.channels() << "\n";

  out << "\n[s_area]\n";
  for (int t = 0; t < alloc.frame_count(); ++t)
    for (int n = 0; n < alloc.nodes(); ++n)
      for (int a = 0; a < alloc.areas(); ++a)
        if (alloc.node_in_area(t, n, a)) out << "s frame=" << t << " node=" << n << " area=" << a << "\n";

  out << "\n[b_poa]\n";
  for (int t = 0; t < alloc.frame_count(); ++t)
    for (int u = 0; u < alloc.ues(); ++u)
      for (int n = 0; n < alloc.nodes(); ++n)
        if (alloc.poa_bound(t, u, n)) out << "b frame=" << t << " ue=" << u << " node=" << n << "\n";

  out << "\n[x_select]\n";
  for (int t = 0; t < alloc.frame_count(); ++t)
    for (const auto& [rid, rf] : alloc.frame(t).requests)
      for (int f = 0; f < alloc.functions(); ++f)
        if (rf.x[std::size_t(f)]) out << "x frame=" << t << " request=" << rid << " function=" << f << "\n";

  out << "\n[y_place]\n";
  for (int t = 0; t < alloc.frame_count(); ++t)
    for (int f = 0; f < alloc.functions(); ++f)
      for (int n = 0; n < alloc.nodes(); ++n)
        if (alloc.placed(t, f, n)) out << "y frame=" << t << " function=" << f << " node=" << n << "\n";

  out << "\n[z_channel]\n";
  for (int t = 0; t < alloc.frame_count(); ++t)
    for (const auto& [rid, rf] : alloc.frame(t).requests)
      for (int s = 0; s < alloc.slots_per_frame(); ++s)
        for (int c = 0; c < alloc.channels(); ++c)
          if ((rf.slot_channel[std::size_t(s)] >> c) & 1u)
            out << "z frame=" << t << " request=" << rid << " slot=" << s << " channel=" << c << "\n";

  out << "\n[r_path]\n";
  for (int t = 0; t < alloc.frame_count(); ++t)
    for (const auto& [rid, rf] : alloc.frame(t).requests)
      if (rf.path) {
        out << "r frame=" << t << " request=" << rid << " nodes=[";
        for (std::size_t i = 0; i < rf.path->nodes.size(); ++i)
          out << (i ? "," : "") << rf.path->nodes[i];
        out << "] links=[";
        for (std::size_t i = 0; i < rf.path->links.size(); ++i)
          out << (i ? "," : "") << rf.path->links[i];
        out << "]\n";
      }

  out << "\n[objective]\n";
  out << "accepted = " << summary.accepted << "\n";
  out << "total_energy = " << fmt_double(summary.total_energy) << "\n";
  out << "objective_value = " << fmt_double(summary.objective_value) << "\n";
  out << "alpha = " << fmt_double(summary.alpha) << "\n";
  out << "explored = " << summary.explored << "\n";
}

inline void write_allocation(const model::Allocation& alloc, const ObjectiveSummary& summary,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  write_allocation(alloc, summary, out);
}

inline std::pair<model::Allocation, ObjectiveSummary> read_allocation(std::istream& in) {
  Document doc = parse_document(in);
  const Section& meta = doc.at("meta");
  model::Allocation alloc(meta.integer("frames"), meta.integer("slots_per_frame"),
                          meta.integer("areas"), meta.integer("nodes"), meta.integer("ues"),
                          meta.integer("functions"), meta.integer("channels"));
  auto entities = [&](const char* name) -> const std::vector<Entity>& {
    static const std::vector<Entity> empty;
    auto it = doc.find(name);
    return it == doc.end() ? empty : it->second.entities;
  };
  for (const auto& e : entities("s_area"))
    alloc.frame(e.integer("frame"))
        .node_area[std::size_t(e.integer("node")) * std::size_t(alloc.areas()) +
                   std::size_t(e.integer("area"))] = 1;
  for (const auto& e : entities("b_poa"))
    alloc.bind_poa(e.integer("frame"), e.integer("ue"), e.integer("node"));
  for (const auto& e : entities("x_select"))
    alloc.select_function(e.integer("frame"), e.integer("request"), e.integer("function"));
  for (const auto& e : entities("y_place"))
    alloc.place_function(e.integer("frame"), e.integer("function"), e.integer("node"));
  for (const auto& e : entities("z_channel"))
    alloc.assign_channel(e.integer("frame"), e.integer("request"), e.integer("slot"),
                         e.integer("channel"));
  for (const auto& e : entities("r_path")) {
    model::ChosenPath p;
    p.nodes = e.int_list("nodes");
    p.links = e.int_list("links");
    alloc.set_path(e.integer("frame"), e.integer("request"), std::move(p));
  }

  ObjectiveSummary summary;
  const Section& obj = doc.at("objective");
  summary.accepted = obj.integer("accepted");
  summary.total_energy = obj.num("total_energy");
  summary.objective_value = obj.num("objective_value");
  summary.alpha = obj.num("alpha");
  summary.explored = std::uint64_t(obj.num("explored", 0));
  return {std::move(alloc), summary};
}

inline std::pair<model::Allocation, ObjectiveSummary> read_allocation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  return read_allocation(in);
}

}  // namespace aero::io
