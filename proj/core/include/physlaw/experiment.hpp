#pragma once

#include "physlaw/measured.hpp"

#include <array>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace physlaw {

struct ObjectTypeDef {
  std::string name;
  std::vector<std::string> observables;
};

// Ball {posx posy posz dist}, Spring {length}, Clock {t}
const std::vector<ObjectTypeDef>& builtin_object_types();
const ObjectTypeDef* find_object_type(const std::string& name);

// A physical object with its hidden ground-truth properties. The engine side
// never reads props; they exist for the simulator and for object-swap sweeps.
struct PhysObject {
  std::string name;  // roster name ("ball1")
  std::string type;  // "Ball"
  int id = 0;        // 1-based within the experiment
  std::map<std::string, double> props;

  // stable identity for intrinsic-measurement memo keys
  std::string fingerprint() const;
};

enum class ParamKind : uint8_t { Initial, ObjectProp, World };

struct ParamSpec {
  std::string name;  // "v0x" or "ball1.mass"
  double def = 0, lo = 0, hi = 0;
  ParamKind kind = ParamKind::Initial;
  std::string object;  // roster name for ObjectProp knobs
};

struct ExperimentSpec {
  std::string name;
  std::string simulator;  // registry key
  std::vector<PhysObject> objects;
  std::vector<ParamSpec> params;
  std::vector<std::string> constraints;     // "expr = 0" in the DSL grammar
  std::map<std::string, double> geometry;   // named geometry constants (cx, ...)
  double t0 = 0.0, t1 = 4.0;
  int n_points = 100;
  int repeat_time = 100;
  double noise_rel = 1e-3;
  // reference point of the dist observable
  std::array<double, 3> dist_origin{0.0, 0.0, 0.0};

  const PhysObject* find_object(const std::string& roster_name) const;
  const PhysObject* object_by_id(int id) const;
  std::vector<const PhysObject*> objects_of_type(const std::string& type) const;
  const ParamSpec* find_param(const std::string& name) const;
  std::map<std::string, double> default_params() const;
};

// Observation side of one simulated run. Hidden object properties do not
// appear; the full parameter assignment is retained only as provenance for
// replay and is not interpreted by the discovery side.
struct ExperimentData {
  std::string experiment;
  std::vector<PhysObject> roster;  // props stripped
  std::vector<double> grid;
  std::map<std::string, MeasuredValue> observables;  // keys like "posx[1]", "t"
  std::map<std::string, double> assignment;
  uint64_t seed = 0;
  int n_points = 0;
  int repeat_time = 0;

  const MeasuredValue* find(const std::string& key) const;
};

class SimulatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Noise-free ground truth of one run: observables on the grid plus the raw
// integrator states (positions then velocities per moving object).
struct Trajectory {
  std::map<std::string, std::vector<double>> obs;
  std::vector<std::vector<double>> states;
};

using DynamicsFn =
    std::function<Trajectory(const ExperimentSpec&, const std::map<std::string, double>&)>;

void register_simulator(const std::string& name, DynamicsFn fn);

// Ground truth only; throws SimulatorError on integration blow-up.
Trajectory simulate_truth(const ExperimentSpec& spec,
                          const std::map<std::string, double>& params);

// Full noisy observation: repeat_time gaussian draws per grid point per
// observable, collapsed to per-point statistics. Deterministic in
// (params, seed).
ExperimentData simulate(const ExperimentSpec& spec,
                        const std::map<std::string, double>& params, uint64_t seed,
                        const DataPolicy& policy = {});

// k runs differing only in one controllable parameter.
std::vector<ExperimentData> vary_parameter(const ExperimentSpec& spec,
                                           const std::map<std::string, double>& base,
                                           const std::string& param_name,
                                           const std::vector<double>& values, uint64_t seed,
                                           const DataPolicy& policy = {});

// Generic fixed-step RK4 over the n_points grid with `substeps` internal
// steps per grid interval. Returns the state at every grid time.
std::vector<std::vector<double>> rk4_integrate(
    const std::function<void(double, const std::vector<double>&, std::vector<double>&)>& deriv,
    std::vector<double> s0, double t0, double t1, int n_grid, int substeps);

// Built-in experiment catalog (13 entries across the five problem families).
const std::vector<ExperimentSpec>& catalog();
const ExperimentSpec* find_experiment(const std::string& name);

// Declarative loader/printer for the experiment text format.
ExperimentSpec parse_experiment_spec(const std::string& text);
std::string print_experiment_spec(const ExperimentSpec& spec);

}  // namespace physlaw
