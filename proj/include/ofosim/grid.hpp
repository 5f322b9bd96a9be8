// Grid data model: buses, branches, controllable units, per-unit limits.
#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ofosim {

using Complex = std::complex<double>;

enum class BusKind { SlackPcc, Load, Generation };

std::string to_string(BusKind kind);
BusKind bus_kind_from_string(const std::string& s);

struct Bus {
  std::string id;
  BusKind kind = BusKind::Load;
  double v_min = 0.9;   // p.u.
  double v_max = 1.1;   // p.u.
  double base_kv = 110.0;
};

// Standard pi-equivalent branch; transformers are branches with a rating flag.
struct Branch {
  std::string from_bus;
  std::string to_bus;
  double r = 0.0;        // p.u.
  double x = 0.0;        // p.u.
  double b_shunt = 0.0;  // total line charging susceptance, p.u.
  double s_rating = 1.0; // apparent-power limit, p.u.
  bool is_pcc_transformer = false;
};

// Setpoints follow the load convention: positive p/q means consumption, so a
// generating DER has p_min < 0. The bus injection contributed by a unit is
// the negative of its setpoint.
struct ControllableUnit {
  std::string bus;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  std::optional<double> s_max;  // apparent-power capacity, p.u.
};

// Constant complex injection at a bus (a consuming load has negative p).
struct FixedLoad {
  std::string bus;
  double p = 0.0;  // p.u.
  double q = 0.0;  // p.u.
};

// Immutable after validation; safe to share read-only across parallel runs.
struct Network {
  double s_base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<ControllableUnit> units;
  std::vector<FixedLoad> loads;

  int bus_index(const std::string& id) const;  // -1 if unknown
  int slack_index() const;                     // -1 if none
  int n_buses() const { return static_cast<int>(buses.size()); }
  int n_units() const { return static_cast<int>(units.size()); }
  // Indices of the branches over which s_pcc is measured: the flagged PCC
  // transformers, or every slack-incident branch when none is flagged.
  std::vector<int> pcc_branch_indices() const;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(std::vector<std::string> violations);
  std::vector<std::string> violations;
};

// Empty list iff all type invariants hold and the graph is connected.
std::vector<std::string> validate(const Network& net);

Network load_network(const std::string& text);
std::string serialize(const Network& net);

// name in {two-bus, radial-4, meshed-10}; throws std::invalid_argument otherwise.
Network builtin_grid(const std::string& name);

inline double mva_to_pu(double mva, double s_base_mva) { return mva / s_base_mva; }
inline double pu_to_mva(double pu, double s_base_mva) { return pu * s_base_mva; }

}  // namespace ofosim
