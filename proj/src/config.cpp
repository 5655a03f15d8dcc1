#include "celldrain/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace celldrain {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  int line;
  bool consumed = false;
};

using Section = std::map<std::string, Entry>;

class Parsed {
 public:
  Parsed(std::string path) : path_(std::move(path)) {}

  void insert(const std::string& section, const std::string& key, Entry e) {
    sections_[section][key] = std::move(e);
  }

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
  std::vector<std::string> section_names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : sections_) out.push_back(name);
    return out;
  }

  const Entry* find(const std::string& section, const std::string& key) {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.consumed = true;
    return &k->second;
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ConfigError(path_ + ":" + std::to_string(line) + ": " + msg);
  }

  // Fail-closed: every key must have been consumed by the schema.
  void check_all_consumed() const {
    for (const auto& [sname, section] : sections_) {
      for (const auto& [key, entry] : section) {
        if (!entry.consumed) {
          fail(entry.line, "unknown key '" + key + "' in section [" + sname + "]");
        }
      }
    }
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::map<std::string, Section> sections_;
};

Parsed parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);

  Parsed parsed(path);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') parsed.fail(lineno, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) parsed.fail(lineno, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) parsed.fail(lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) parsed.fail(lineno, "key outside any section");
    if (key.empty()) parsed.fail(lineno, "empty key");
    parsed.insert(section, key, Entry{value, lineno});
  }
  return parsed;
}

double to_double(Parsed& p, const Entry& e) {
  try {
    std::size_t n = 0;
    const double v = std::stod(e.value, &n);
    if (n != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    p.fail(e.line, "expected a number, got '" + e.value + "'");
  }
}

std::uint64_t to_u64(Parsed& p, const Entry& e) {
  try {
    std::size_t n = 0;
    const unsigned long long v = std::stoull(e.value, &n);
    if (n != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    p.fail(e.line, "expected an unsigned integer, got '" + e.value + "'");
  }
}

bool to_bool(Parsed& p, const Entry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  p.fail(e.line, "expected true/false, got '" + e.value + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(Parsed& p, const Entry& e, int expected = -1) {
  std::vector<double> out;
  for (const std::string& tok : split(e.value, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      p.fail(e.line, "expected a comma-separated number list");
    }
  }
  if (expected >= 0 && static_cast<int>(out.size()) != expected) {
    p.fail(e.line, "expected exactly " + std::to_string(expected) + " values");
  }
  return out;
}

// "lo:hi:count" linearly spaced grid.
std::vector<double> to_grid(Parsed& p, const Entry& e) {
  const auto parts = split(e.value, ':');
  if (parts.size() != 3) p.fail(e.line, "expected grid syntax lo:hi:count");
  try {
    const double lo = std::stod(parts[0]);
    const double hi = std::stod(parts[1]);
    const int n = std::stoi(parts[2]);
    if (n < 2 || !(hi > lo)) p.fail(e.line, "grid needs hi > lo and count >= 2");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
    return g;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    p.fail(e.line, "malformed grid '" + e.value + "'");
  }
}

// "soc:volt, soc:volt, ..." pairs.
OcvCurve to_curve(Parsed& p, const Entry& e) {
  OcvCurve curve;
  for (const std::string& pair : split(e.value, ',')) {
    const auto parts = split(pair, ':');
    if (parts.size() != 2) p.fail(e.line, "expected ocv pairs soc:volt, ...");
    try {
      curve.soc.push_back(std::stod(parts[0]));
      curve.voltage.push_back(std::stod(parts[1]));
    } catch (...) {
      p.fail(e.line, "malformed ocv pair '" + pair + "'");
    }
  }
  return curve;
}

#define READ(section, key, target, conv)                    \
  if (const Entry* e_ = p.find(section, key)) {             \
    target = conv(p, *e_);                                  \
  }

ControllerKind kind_from_name(const std::string& name) {
  if (name.rfind("cc_cv", 0) == 0) return ControllerKind::kCcCv;
  if (name.rfind("cc_ct", 0) == 0) return ControllerKind::kCcCt;
  if (name.rfind("dp", 0) == 0) return ControllerKind::kDp;
  if (name.rfind("mpc", 0) == 0) return ControllerKind::kMpc;
  throw ConfigError("controller section name must start with cc_cv/cc_ct/dp/mpc: " + name);
}

ControllerSpec read_controller(Parsed& p, const std::string& name) {
  ControllerSpec spec;
  spec.name = name;
  spec.kind = kind_from_name(name);
  switch (spec.kind) {
    case ControllerKind::kCcCv: {
      READ(name, "cc_current_a", spec.cc_current, to_double);
      READ(name, "v_cutoff_v", spec.v_cutoff, to_double);
      spec.pi.setpoint = spec.v_cutoff;
      READ(name, "kp", spec.pi.kp, to_double);
      READ(name, "ki", spec.pi.ki, to_double);
      READ(name, "anti_windup", spec.pi.anti_windup, to_bool);
      spec.pi.out_min = 0.0;
      spec.pi.out_max = spec.cc_current;
      break;
    }
    case ControllerKind::kCcCt: {
      READ(name, "cc_current_a", spec.cc_current, to_double);
      READ(name, "t_ref_c", spec.t_ref, to_double);
      spec.pi.setpoint = spec.t_ref;
      READ(name, "kp", spec.pi.kp, to_double);
      READ(name, "ki", spec.pi.ki, to_double);
      READ(name, "anti_windup", spec.pi.anti_windup, to_bool);
      spec.pi.out_min = 0.0;
      spec.pi.out_max = spec.cc_current;
      break;
    }
    case ControllerKind::kDp: {
      DpConfig& dp = spec.dp;
      READ(name, "w1", dp.w1, to_double);
      READ(name, "w2", dp.w2, to_double);
      READ(name, "w3", dp.w3, to_double);
      READ(name, "w4", dp.w4, to_double);
      READ(name, "t_max_c", dp.t_max, to_double);
      READ(name, "u_max_a", dp.u_max, to_double);
      READ(name, "dt_s", dp.dt, to_double);
      READ(name, "soc_grid", dp.soc_grid, to_grid);
      READ(name, "tc_grid", dp.tc_grid, to_grid);
      READ(name, "u_grid", dp.u_grid, to_grid);
      READ(name, "loss_reference_current_a", dp.loss_reference_current, to_double);
      if (const Entry* e = p.find(name, "max_sweeps")) {
        dp.max_sweeps = static_cast<int>(to_u64(p, *e));
      }
      READ(name, "convergence_tol", dp.convergence_tol, to_double);
      break;
    }
    case ControllerKind::kMpc: {
      MpcOptions& mpc = spec.mpc;
      if (const Entry* e = p.find(name, "horizon")) {
        mpc.horizon = static_cast<int>(to_u64(p, *e));
      }
      READ(name, "q_soe", mpc.q_diag[0], to_double);
      READ(name, "q_tc", mpc.q_diag[1], to_double);
      READ(name, "r", mpc.r_weight, to_double);
      if (const Entry* e = p.find(name, "lqr_state_weights")) {
        const auto v = to_doubles(p, *e, 4);
        mpc.lqr_state_weights = Vec4(v[0], v[1], v[2], v[3]);
      }
      READ(name, "lqr_input_weight", mpc.lqr_input_weight, to_double);
      READ(name, "rate_limit_a", mpc.rate_limit, to_double);
      READ(name, "y_target_soe", mpc.y_target[0], to_double);
      READ(name, "y_target_tc_c", mpc.y_target[1], to_double);
      READ(name, "t_max_c", mpc.t_max, to_double);
      READ(name, "u_max_a", mpc.u_max, to_double);
      READ(name, "dt_s", mpc.dt, to_double);
      READ(name, "epsilon", mpc.epsilon, to_double);
      READ(name, "delta_penalty", mpc.input_delta_penalty, to_bool);
      READ(name, "delta_weight", mpc.delta_weight, to_double);
      break;
    }
  }
  return spec;
}

}  // namespace

ProjectConfig load_config(const std::string& path) {
  Parsed p = parse_file(path);
  ProjectConfig cfg;
  cfg.battery = default_params();

  // [battery]
  READ("battery", "capacity_nominal_ah", cfg.battery.capacity_nominal, to_double);
  READ("battery", "r0_ohm", cfg.battery.r0, to_double);
  READ("battery", "r1_ohm", cfg.battery.r1, to_double);
  READ("battery", "c1_f", cfg.battery.c1, to_double);
  READ("battery", "r_u_k_per_w", cfg.battery.r_u, to_double);
  READ("battery", "r_c_k_per_w", cfg.battery.r_c, to_double);
  READ("battery", "c_s_j_per_k", cfg.battery.c_s, to_double);
  READ("battery", "c_c_j_per_k", cfg.battery.c_c, to_double);
  READ("battery", "t_ambient_c", cfg.battery.t_ambient, to_double);
  READ("battery", "ocv_curve", cfg.battery.ocv_curve, to_curve);
  READ("battery", "energy_nominal_j", cfg.battery.energy_nominal, to_double);
  READ("battery", "eta", cfg.battery.eta, to_double);

  // [plant]
  READ("plant", "seed", cfg.plant_seed, to_u64);
  READ("plant", "perturb_capacity", cfg.perturbation.capacity, to_double);
  READ("plant", "perturb_r0", cfg.perturbation.r0, to_double);
  READ("plant", "perturb_r1", cfg.perturbation.r1, to_double);
  READ("plant", "perturb_c1", cfg.perturbation.c1, to_double);
  READ("plant", "perturb_r_u", cfg.perturbation.r_u, to_double);
  READ("plant", "perturb_r_c", cfg.perturbation.r_c, to_double);
  READ("plant", "perturb_c_s", cfg.perturbation.c_s, to_double);
  READ("plant", "perturb_c_c", cfg.perturbation.c_c, to_double);
  READ("plant", "perturb_ocv", cfg.perturbation.ocv, to_double);

  // [estimator]
  if (const Entry* e = p.find("estimator", "process_cov_diag")) {
    const auto v = to_doubles(p, *e, 4);
    cfg.kalman.process_cov = Vec4(v[0], v[1], v[2], v[3]).asDiagonal();
  }
  if (const Entry* e = p.find("estimator", "measurement_cov_diag")) {
    const auto v = to_doubles(p, *e, 2);
    cfg.kalman.measurement_cov = Vec2(v[0], v[1]).asDiagonal();
  }
  if (const Entry* e = p.find("estimator", "initial_cov_diag")) {
    const auto v = to_doubles(p, *e, 4);
    cfg.kalman.initial_cov = Vec4(v[0], v[1], v[2], v[3]).asDiagonal();
  }
  READ("estimator", "measurement_noise", cfg.measurement_noise, to_bool);

  // [simulation]
  READ("simulation", "dt_control_pi_s", cfg.dt_control_pi, to_double);
  READ("simulation", "dt_control_opt_s", cfg.dt_control_opt, to_double);
  READ("simulation", "dt_plant_s", cfg.dt_plant, to_double);
  READ("simulation", "t_max_sim_s", cfg.t_max_sim, to_double);
  READ("simulation", "soe_stop", cfg.soe_stop, to_double);
  READ("simulation", "t_constraint_c", cfg.t_constraint, to_double);
  READ("simulation", "noise_seed", cfg.noise_seed, to_u64);
  if (const Entry* e = p.find("simulation", "controller")) {
    cfg.simulate_controller = e->value;
  }
  if (const Entry* e = p.find("simulation", "controllers")) {
    cfg.benchmark_controllers = split(e->value, ',');
  }

  // [disturbance]
  READ("disturbance", "seed", cfg.disturbance.seed, to_u64);
  READ("disturbance", "dt_s", cfg.disturbance.dt, to_double);
  if (const Entry* e = p.find("disturbance", "relinearize_steps")) {
    cfg.disturbance.relinearize_steps = static_cast<int>(to_u64(p, *e));
  }
  READ("disturbance", "inflation", cfg.disturbance.inflation, to_double);
  READ("disturbance", "floor", cfg.disturbance.floor, to_double);
  if (const Entry* e = p.find("disturbance", "random_profiles")) {
    cfg.disturbance.random_profiles = static_cast<int>(to_u64(p, *e));
  }
  READ("disturbance", "soc_stop", cfg.disturbance.soc_stop, to_double);

  // Controller sections: everything that is not a fixed section.
  static const char* kFixed[] = {"battery", "plant", "estimator", "simulation",
                                 "disturbance"};
  for (const std::string& name : p.section_names()) {
    if (std::find(std::begin(kFixed), std::end(kFixed), name) != std::end(kFixed)) {
      continue;
    }
    cfg.controllers[name] = read_controller(p, name);  // throws on bad prefix
  }

  p.check_all_consumed();

  cfg.battery.validate();
  cfg.perturbation.validate();
  cfg.kalman.validate();
  return cfg;
}

BatteryParams ProjectConfig::perturbed_plant() const {
  return make_perturbed_plant(battery, perturbation, plant_seed);
}

SimConfig ProjectConfig::sim_config_for(const std::string& name) const {
  const auto it = controllers.find(name);
  if (it == controllers.end()) {
    throw ConfigError("config has no controller section [" + name + "]");
  }
  SimConfig sim;
  sim.plant_params = perturbed_plant();
  sim.model_params = battery;
  sim.controller = it->second;
  sim.kalman = kalman;
  const bool pi_loop = it->second.kind == ControllerKind::kCcCv ||
                       it->second.kind == ControllerKind::kCcCt;
  sim.dt_control = pi_loop ? dt_control_pi : dt_control_opt;
  sim.dt_plant = dt_plant;
  sim.t_max_sim = t_max_sim;
  sim.soe_stop = soe_stop;
  sim.noise_seed = noise_seed;
  sim.t_constraint = t_constraint;
  sim.measurement_noise = measurement_noise;
  sim.x0 = BatteryState{1.0, 0.0, battery.t_ambient, battery.t_ambient};
  sim.disturbance = disturbance;
  return sim;
}

std::vector<SimConfig> ProjectConfig::benchmark_configs() const {
  std::vector<SimConfig> out;
  for (const std::string& name : benchmark_controllers) {
    out.push_back(sim_config_for(name));
  }
  return out;
}

std::string config_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::uint64_t hash = 1469598103934665603ull;
  char c;
  while (in.get(c)) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace celldrain
