#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "quadeff/scenario.hpp"

namespace quadeff {

// Scenario files are JSON objects. Every section is optional except `seed`;
// absent keys keep their defaults and unknown keys are rejected so that a
// typo cannot silently fall back to a default.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(path_ + ": expected an object");
    }
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) {
      return;
    }
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError(path_ + ": unknown key '" + key + "'");
      }
    }
  }

  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  void number(const std::string& key, double& out) {
    if (!has(key)) {
      return;
    }
    const json& v = j_.at(key);
    if (!v.is_number()) {
      throw ConfigError(where(key) + ": expected a number");
    }
    out = v.get<double>();
    if (!std::isfinite(out)) {
      throw ConfigError(where(key) + ": must be finite");
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) {
      return;
    }
    const json& v = j_.at(key);
    if (!v.is_boolean()) {
      throw ConfigError(where(key) + ": expected true or false");
    }
    out = v.get<bool>();
  }

  void text(const std::string& key, std::string& out) {
    if (!has(key)) {
      return;
    }
    const json& v = j_.at(key);
    if (!v.is_string()) {
      throw ConfigError(where(key) + ": expected a string");
    }
    out = v.get<std::string>();
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (!has(key)) {
      return;
    }
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
      throw ConfigError(where(key) + ": expected a non-negative integer");
    }
    out = static_cast<Int>(v.get<unsigned long long>());
  }

  template <int N>
  void vector(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
    if (!has(key)) {
      return;
    }
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != static_cast<std::size_t>(N)) {
      throw ConfigError(where(key) + ": expected an array of " + std::to_string(N) + " numbers");
    }
    for (int i = 0; i < N; ++i) {
      const json& e = v.at(static_cast<std::size_t>(i));
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        throw ConfigError(where(key) + ": entries must be finite numbers");
      }
      out(i) = e.get<double>();
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_simulation(const json& j, ScenarioSpec& spec) {
  Section s(j, "simulation");
  s.number("duration", spec.duration);
  s.number("dt", spec.dt);
  if (s.has("trajectory")) {
    std::string name;
    s.text("trajectory", name);
    if (name == "circle") {
      spec.trajectory = Trajectory::Circle;
    } else if (name == "hover") {
      spec.trajectory = Trajectory::Hover;
    } else {
      throw ConfigError("simulation.trajectory: expected 'circle' or 'hover'");
    }
  }
}

inline void read_vehicle(const json& j, QuadParams& p) {
  Section s(j, "vehicle");
  s.number("mass", p.mass);
  s.vector("inertia", p.inertia);
  s.number("arm", p.arm);
  s.number("c_tau_f", p.c_tau_f);
  s.number("gravity", p.gravity);
}

inline void read_gains(const json& j, Gains& g) {
  Section s(j, "gains");
  s.vector("k_x", g.k_x);
  s.vector("k_v", g.k_v);
  s.vector("k_R", g.k_R);
  s.vector("k_omega", g.k_omega);
}

inline void read_efficiency(const json& j, ScenarioSpec& spec) {
  Section s(j, "efficiency");
  s.vector("initial", spec.eta0);
  if (s.has("degradation")) {
    const json& d = s.raw("degradation");
    if (d.is_null()) {
      spec.degradation.reset();
    } else {
      VoltageDegradation vd;
      Section ds(d, "efficiency.degradation");
      ds.number("xi", vd.xi);
      ds.number("v_start", vd.v_start);
      ds.number("v_end", vd.v_end);
      spec.degradation = vd;
    }
  }
}

inline void read_faults(const json& j, ScenarioSpec& spec) {
  if (!j.is_array()) {
    throw ConfigError("faults: expected an array");
  }
  spec.faults.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    Section s(j.at(i), "faults[" + std::to_string(i) + "]");
    FaultInterval f;
    int motor = 0;
    if (!s.has("motor")) {
      throw ConfigError(s.where("motor") + ": required");
    }
    s.integer("motor", motor);
    if (motor < 1 || motor > 4) {
      throw ConfigError(s.where("motor") + ": must be 1..4");
    }
    f.motor = motor - 1;
    s.number("t_start", f.t_start);
    s.number("t_end", f.t_end);
    s.number("eta", f.eta);
    spec.faults.push_back(f);
  }
}

inline void read_clipping(const json& j, ScenarioSpec& spec) {
  Section s(j, "clipping");
  s.boolean("enabled", spec.clipping);
  s.number("f_min", spec.f_min);
  s.number("f_max", spec.f_max);
}

inline void read_solver(const json& j, SolverConfig& c) {
  Section s(j, "estimator.solver");
  s.number("mu", c.mu);
  s.number("eps_feas", c.eps_feas);
  s.number("eps_gap", c.eps_gap);
  s.number("kappa", c.kappa);
  s.number("zeta", c.zeta);
  s.number("eps_tol", c.eps_tol);
  s.number("gamma", c.gamma);
  s.number("eta_min", c.eta_min);
  s.number("eta_max", c.eta_max);
  s.integer("max_newton_iters", c.max_newton_iters);
}

inline void read_estimator(const json& j, EstimatorConfig& e) {
  Section s(j, "estimator");
  s.integer("window", e.window);
  s.integer("stride", e.stride);
  s.integer("irls_iters", e.irls_iters);
  s.number("initial_guess", e.initial_guess);
  if (s.has("local_weights")) {
    Section l(s.raw("local_weights"), "estimator.local_weights");
    l.vector("g_v", e.local.g_v);
    l.vector("g_x", e.local.g_x);
    l.vector("g_omega", e.local.g_omega);
    l.number("g_R", e.local.g_R);
  }
  if (s.has("robust")) {
    Section r(s.raw("robust"), "estimator.robust");
    r.number("z_soft", e.weights.z_soft);
    r.number("p", e.weights.p);
    r.number("w_min", e.weights.w_min);
    r.number("z_hard", e.weights.z_hard);
    r.number("eps_min", e.weights.eps_min);
  }
  if (s.has("solver")) {
    read_solver(s.raw("solver"), e.solver);
  }
}

inline void read_ekf(const json& j, EkfConfig& c) {
  Section s(j, "ekf");
  s.number("q_x", c.noise.q_x);
  s.number("q_v", c.noise.q_v);
  s.number("q_omega", c.noise.q_omega);
  s.number("q_rot", c.noise.q_rot);
  s.number("q_eta", c.noise.q_eta);
  s.number("meas_sigma", c.noise.meas_sigma);
  s.number("initial_eta", c.initial_eta);
  s.number("initial_eta_var", c.initial_eta_var);
  s.number("initial_state_var", c.initial_state_var);
  s.number("report_min", c.report_min);
  s.number("report_max", c.report_max);
}

inline void read_metrics(const json& j, MetricsConfig& m) {
  Section s(j, "metrics");
  s.number("warmup", m.warmup);
  s.number("settle", m.settle);
  s.number("jump_threshold", m.jump_threshold);
}

}  // namespace detail

/// Builds a scenario from a parsed JSON document and validates it.
inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec spec;
  {
    detail::Section root(j, "spec");
    root.text("name", spec.name);
    if (!root.has("seed")) {
      throw ConfigError("spec.seed: required");
    }
    root.integer("seed", spec.seed);
    if (root.has("simulation")) detail::read_simulation(root.raw("simulation"), spec);
    if (root.has("vehicle")) detail::read_vehicle(root.raw("vehicle"), spec.params);
    if (root.has("gains")) detail::read_gains(root.raw("gains"), spec.gains);
    if (root.has("efficiency")) detail::read_efficiency(root.raw("efficiency"), spec);
    if (root.has("faults")) detail::read_faults(root.raw("faults"), spec);
    if (root.has("noise")) {
      detail::Section n(root.raw("noise"), "noise");
      n.number("sigma_f", spec.sigma_f);
    }
    if (root.has("clipping")) detail::read_clipping(root.raw("clipping"), spec);
    if (root.has("estimator")) detail::read_estimator(root.raw("estimator"), spec.estimator);
    if (root.has("ekf")) detail::read_ekf(root.raw("ekf"), spec.ekf);
    if (root.has("metrics")) detail::read_metrics(root.raw("metrics"), spec.metrics);
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

inline ScenarioSpec parse_scenario(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("spec is not valid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open spec file " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace quadeff
