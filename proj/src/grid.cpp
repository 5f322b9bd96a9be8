#include "ofosim/grid.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

namespace ofosim {

using json = nlohmann::json;

std::string to_string(BusKind kind) {
  switch (kind) {
    case BusKind::SlackPcc: return "slack-pcc";
    case BusKind::Load: return "load";
    case BusKind::Generation: return "generation";
  }
  return "load";
}

BusKind bus_kind_from_string(const std::string& s) {
  if (s == "slack-pcc") return BusKind::SlackPcc;
  if (s == "load") return BusKind::Load;
  if (s == "generation") return BusKind::Generation;
  throw ParseError("unknown bus kind '" + s + "'");
}

int Network::bus_index(const std::string& id) const {
  for (int i = 0; i < n_buses(); ++i)
    if (buses[i].id == id) return i;
  return -1;
}

int Network::slack_index() const {
  for (int i = 0; i < n_buses(); ++i)
    if (buses[i].kind == BusKind::SlackPcc) return i;
  return -1;
}

std::vector<int> Network::pcc_branch_indices() const {
  std::vector<int> flagged;
  for (int i = 0; i < static_cast<int>(branches.size()); ++i)
    if (branches[i].is_pcc_transformer) flagged.push_back(i);
  if (!flagged.empty()) return flagged;
  const int slack = slack_index();
  if (slack < 0) return {};
  std::vector<int> incident;
  for (int i = 0; i < static_cast<int>(branches.size()); ++i) {
    const Branch& br = branches[i];
    if (bus_index(br.from_bus) == slack || bus_index(br.to_bus) == slack)
      incident.push_back(i);
  }
  return incident;
}

ValidationError::ValidationError(std::vector<std::string> v)
    : std::runtime_error([&v] {
        std::ostringstream os;
        os << "network validation failed:";
        for (const auto& s : v) os << "\n  - " << s;
        return os.str();
      }()),
      violations(std::move(v)) {}

std::vector<std::string> validate(const Network& net) {
  std::vector<std::string> out;
  if (net.s_base_mva <= 0.0) out.push_back("s_base_mva must be positive");
  if (net.buses.empty()) out.push_back("network has no buses");

  std::set<std::string> ids;
  int n_slack = 0;
  for (const Bus& b : net.buses) {
    if (!ids.insert(b.id).second) out.push_back("duplicate bus id '" + b.id + "'");
    if (b.kind == BusKind::SlackPcc) ++n_slack;
    if (!(b.v_min > 0.0 && b.v_min < b.v_max))
      out.push_back("bus '" + b.id + "': requires 0 < v_min < v_max");
    if (b.base_kv <= 0.0) out.push_back("bus '" + b.id + "': base_kv must be positive");
  }
  if (n_slack != 1)
    out.push_back("exactly one bus of kind slack-pcc required, found " +
                  std::to_string(n_slack));

  const int slack = net.slack_index();
  for (size_t i = 0; i < net.branches.size(); ++i) {
    const Branch& br = net.branches[i];
    const std::string tag = "branch " + std::to_string(i) + " (" + br.from_bus +
                            "-" + br.to_bus + ")";
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    if (f < 0) out.push_back(tag + ": unknown from_bus '" + br.from_bus + "'");
    if (t < 0) out.push_back(tag + ": unknown to_bus '" + br.to_bus + "'");
    if (f >= 0 && f == t) out.push_back(tag + ": from_bus equals to_bus");
    if (br.r == 0.0 && br.x == 0.0) out.push_back(tag + ": zero impedance");
    if (br.s_rating <= 0.0) out.push_back(tag + ": s_rating must be positive");
    if (br.is_pcc_transformer && slack >= 0 && f != slack && t != slack)
      out.push_back(tag + ": pcc transformer not incident to the slack-pcc bus");
  }

  for (size_t i = 0; i < net.units.size(); ++i) {
    const ControllableUnit& u = net.units[i];
    const std::string tag = "unit " + std::to_string(i) + " at '" + u.bus + "'";
    if (net.bus_index(u.bus) < 0) out.push_back(tag + ": unknown bus");
    if (u.p_min > u.p_max) out.push_back(tag + ": p_min > p_max");
    if (u.q_min > u.q_max) out.push_back(tag + ": q_min > q_max");
    if (u.s_max && *u.s_max <= 0.0) out.push_back(tag + ": s_max must be positive");
  }

  for (size_t i = 0; i < net.loads.size(); ++i)
    if (net.bus_index(net.loads[i].bus) < 0)
      out.push_back("load " + std::to_string(i) + ": unknown bus '" +
                    net.loads[i].bus + "'");

  // Connectivity over the branch graph.
  if (!net.buses.empty()) {
    std::vector<std::vector<int>> adj(net.buses.size());
    for (const Branch& br : net.branches) {
      const int f = net.bus_index(br.from_bus);
      const int t = net.bus_index(br.to_bus);
      if (f >= 0 && t >= 0 && f != t) {
        adj[f].push_back(t);
        adj[t].push_back(f);
      }
    }
    std::vector<bool> seen(net.buses.size(), false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int w : adj[v])
        if (!seen[w]) {
          seen[w] = true;
          q.push(w);
        }
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
      out.push_back("graph not connected");
  }
  return out;
}

namespace {

double require_number(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ParseError(ctx + ": missing or non-numeric field '" + key + "'");
  return j.at(key).get<double>();
}

std::string require_string(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw ParseError(ctx + ": missing or non-string field '" + key + "'");
  return j.at(key).get<std::string>();
}

}  // namespace

Network load_network(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed grid document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("grid document must be a JSON object");

  Network net;
  net.s_base_mva = require_number(doc, "s_base_mva", "document");

  for (const std::string key : {"buses", "branches", "units", "loads"})
    if (!doc.contains(key) || !doc.at(key).is_array())
      throw ParseError("document: missing or non-array field '" + key + "'");

  for (const json& jb : doc.at("buses")) {
    Bus b;
    b.id = require_string(jb, "id", "bus");
    b.kind = bus_kind_from_string(require_string(jb, "kind", "bus " + b.id));
    b.v_min = require_number(jb, "v_min", "bus " + b.id);
    b.v_max = require_number(jb, "v_max", "bus " + b.id);
    b.base_kv = require_number(jb, "base_kv", "bus " + b.id);
    net.buses.push_back(std::move(b));
  }
  for (const json& jb : doc.at("branches")) {
    Branch br;
    br.from_bus = require_string(jb, "from_bus", "branch");
    br.to_bus = require_string(jb, "to_bus", "branch");
    const std::string ctx = "branch " + br.from_bus + "-" + br.to_bus;
    br.r = require_number(jb, "r", ctx);
    br.x = require_number(jb, "x", ctx);
    br.b_shunt = jb.value("b_shunt", 0.0);
    br.s_rating = require_number(jb, "s_rating", ctx);
    br.is_pcc_transformer = jb.value("is_pcc_transformer", false);
    net.branches.push_back(std::move(br));
  }
  for (const json& ju : doc.at("units")) {
    ControllableUnit u;
    u.bus = require_string(ju, "bus", "unit");
    const std::string ctx = "unit at " + u.bus;
    u.p_min = require_number(ju, "p_min", ctx);
    u.p_max = require_number(ju, "p_max", ctx);
    u.q_min = require_number(ju, "q_min", ctx);
    u.q_max = require_number(ju, "q_max", ctx);
    if (ju.contains("s_max")) u.s_max = require_number(ju, "s_max", ctx);
    net.units.push_back(std::move(u));
  }
  for (const json& jl : doc.at("loads")) {
    FixedLoad l;
    l.bus = require_string(jl, "bus", "load");
    l.p = require_number(jl, "p", "load at " + l.bus);
    l.q = require_number(jl, "q", "load at " + l.bus);
    net.loads.push_back(std::move(l));
  }

  auto violations = validate(net);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return net;
}

std::string serialize(const Network& net) {
  json doc;
  doc["s_base_mva"] = net.s_base_mva;
  doc["buses"] = json::array();
  for (const Bus& b : net.buses)
    doc["buses"].push_back({{"id", b.id},
                            {"kind", to_string(b.kind)},
                            {"v_min", b.v_min},
                            {"v_max", b.v_max},
                            {"base_kv", b.base_kv}});
  doc["branches"] = json::array();
  for (const Branch& br : net.branches)
    doc["branches"].push_back({{"from_bus", br.from_bus},
                               {"to_bus", br.to_bus},
                               {"r", br.r},
                               {"x", br.x},
                               {"b_shunt", br.b_shunt},
                               {"s_rating", br.s_rating},
                               {"is_pcc_transformer", br.is_pcc_transformer}});
  doc["units"] = json::array();
  for (const ControllableUnit& u : net.units) {
    json ju = {{"bus", u.bus}, {"p_min", u.p_min}, {"p_max", u.p_max},
               {"q_min", u.q_min}, {"q_max", u.q_max}};
    if (u.s_max) ju["s_max"] = *u.s_max;
    doc["units"].push_back(std::move(ju));
  }
  doc["loads"] = json::array();
  for (const FixedLoad& l : net.loads)
    doc["loads"].push_back({{"bus", l.bus}, {"p", l.p}, {"q", l.q}});
  return doc.dump(2) + "\n";
}

namespace {

Network make_two_bus() {
  Network net;
  net.s_base_mva = 100.0;
  net.buses = {
      {"slack", BusKind::SlackPcc, 0.9, 1.1, 110.0},
      {"b2", BusKind::Load, 0.9, 1.1, 110.0},
  };
  net.branches = {{"slack", "b2", 0.01, 0.1, 0.0, 1.5, true}};
  net.units = {{"b2", -1.0, 1.0, -1.0, 1.0, std::nullopt}};
  return net;
}

Network make_radial_4() {
  Network net;
  net.s_base_mva = 100.0;
  net.buses = {
      {"slack", BusKind::SlackPcc, 0.9, 1.1, 110.0},
      {"b2", BusKind::Load, 0.9, 1.1, 110.0},
      {"b3", BusKind::Generation, 0.9, 1.1, 110.0},
      {"b4", BusKind::Generation, 0.9, 1.1, 110.0},
  };
  net.branches = {
      {"slack", "b2", 0.005, 0.05, 0.0, 2.0, true},
      {"b2", "b3", 0.02, 0.08, 0.02, 1.0, false},
      {"b3", "b4", 0.03, 0.10, 0.02, 1.0, false},
  };
  net.units = {
      {"b3", -0.4, 0.2, -0.3, 0.3, std::nullopt},
      {"b4", -0.3, 0.1, -0.2, 0.2, 0.45},
  };
  net.loads = {
      {"b2", -0.15, -0.05},
      {"b4", -0.10, -0.02},
  };
  return net;
}

// Desk-scale stand-in for a meshed sub-transmission grid: ring b2..b6 with
// spurs, five DER units whose aggregate capacity is well above total load.
Network make_meshed_10() {
  Network net;
  net.s_base_mva = 100.0;
  auto bus = [](const std::string& id, BusKind k) {
    return Bus{id, k, 0.9, 1.1, 110.0};
  };
  net.buses = {
      bus("slack", BusKind::SlackPcc), bus("b2", BusKind::Load),
      bus("b3", BusKind::Load),        bus("b4", BusKind::Generation),
      bus("b5", BusKind::Load),        bus("b6", BusKind::Generation),
      bus("b7", BusKind::Generation),  bus("b8", BusKind::Load),
      bus("b9", BusKind::Generation),  bus("b10", BusKind::Generation),
  };
  net.branches = {
      {"slack", "b2", 0.003, 0.045, 0.0, 0.85, true},
      {"b2", "b3", 0.012, 0.060, 0.015, 0.80, false},
      {"b3", "b4", 0.015, 0.070, 0.015, 0.80, false},
      {"b4", "b5", 0.018, 0.080, 0.015, 0.80, false},
      {"b5", "b6", 0.015, 0.070, 0.015, 0.80, false},
      {"b6", "b2", 0.012, 0.060, 0.015, 0.80, false},
      {"b3", "b7", 0.030, 0.110, 0.010, 0.60, false},
      {"b7", "b8", 0.035, 0.120, 0.010, 0.50, false},
      {"b5", "b9", 0.030, 0.110, 0.010, 0.60, false},
      {"b9", "b10", 0.035, 0.120, 0.010, 0.50, false},
      {"b6", "b10", 0.030, 0.110, 0.010, 0.60, false},
  };
  // Load convention: negative p_min = generation headroom.
  net.units = {
      {"b4", -0.35, 0.05, -0.25, 0.25, std::nullopt},
      {"b6", -0.30, 0.05, -0.20, 0.20, 0.40},
      {"b7", -0.25, 0.05, -0.20, 0.20, std::nullopt},
      {"b9", -0.30, 0.05, -0.20, 0.20, std::nullopt},
      {"b10", -0.20, 0.05, -0.15, 0.15, 0.30},
  };
  net.loads = {
      {"b3", -0.10, -0.03}, {"b5", -0.12, -0.04}, {"b7", -0.06, -0.02},
      {"b8", -0.05, -0.01}, {"b10", -0.07, -0.02},
  };
  return net;
}

}  // namespace

Network builtin_grid(const std::string& name) {
  Network net;
  if (name == "two-bus")
    net = make_two_bus();
  else if (name == "radial-4")
    net = make_radial_4();
  else if (name == "meshed-10")
    net = make_meshed_10();
  else
    throw std::invalid_argument("unknown builtin grid '" + name + "'");
  auto violations = validate(net);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return net;
}

}  // namespace ofosim
