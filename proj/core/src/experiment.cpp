#include "physlaw/experiment.hpp"

#include "physlaw/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace physlaw {

const std::vector<ObjectTypeDef>& builtin_object_types() {
  static const std::vector<ObjectTypeDef> types = {
      {"Ball", {"posx", "posy", "posz", "dist"}},
      {"Spring", {"length"}},
      {"Clock", {"t"}},
  };
  return types;
}

const ObjectTypeDef* find_object_type(const std::string& name) {
  for (const auto& t : builtin_object_types())
    if (t.name == name) return &t;
  return nullptr;
}

std::string PhysObject::fingerprint() const {
  std::ostringstream os;
  os << type;
  for (const auto& [k, v] : props) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << "|" << k << "=" << buf;
  }
  return os.str();
}

const PhysObject* ExperimentSpec::find_object(const std::string& roster_name) const {
  for (const auto& o : objects)
    if (o.name == roster_name) return &o;
  return nullptr;
}

const PhysObject* ExperimentSpec::object_by_id(int id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

std::vector<const PhysObject*> ExperimentSpec::objects_of_type(const std::string& type) const {
  std::vector<const PhysObject*> out;
  for (const auto& o : objects)
    if (o.type == type) out.push_back(&o);
  return out;
}

const ParamSpec* ExperimentSpec::find_param(const std::string& pname) const {
  for (const auto& p : params)
    if (p.name == pname) return &p;
  return nullptr;
}

std::map<std::string, double> ExperimentSpec::default_params() const {
  std::map<std::string, double> out;
  for (const auto& p : params) out[p.name] = p.def;
  return out;
}

const MeasuredValue* ExperimentData::find(const std::string& key) const {
  auto it = observables.find(key);
  return it == observables.end() ? nullptr : &it->second;
}

std::vector<std::vector<double>> rk4_integrate(
    const std::function<void(double, const std::vector<double>&, std::vector<double>&)>& deriv,
    std::vector<double> s0, double t0, double t1, int n_grid, int substeps) {
  if (n_grid < 2) throw UsageError("rk4_integrate: need at least two grid points");
  const double grid_dt = (t1 - t0) / (n_grid - 1);
  const double h = grid_dt / substeps;
  const std::size_t dim = s0.size();
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(n_grid));
  out.push_back(s0);
  std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  std::vector<double> s = std::move(s0);
  double t = t0;
  for (int g = 1; g < n_grid; ++g) {
    for (int sub = 0; sub < substeps; ++sub) {
      deriv(t, s, k1);
      for (std::size_t i = 0; i < dim; ++i) tmp[i] = s[i] + 0.5 * h * k1[i];
      deriv(t + 0.5 * h, tmp, k2);
      for (std::size_t i = 0; i < dim; ++i) tmp[i] = s[i] + 0.5 * h * k2[i];
      deriv(t + 0.5 * h, tmp, k3);
      for (std::size_t i = 0; i < dim; ++i) tmp[i] = s[i] + h * k3[i];
      deriv(t + h, tmp, k4);
      for (std::size_t i = 0; i < dim; ++i)
        s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      t += h;
    }
    for (double v : s)
      if (!std::isfinite(v)) throw SimulatorError("integration blew up (non-finite state)");
    out.push_back(s);
  }
  return out;
}

namespace {

std::map<std::string, DynamicsFn>& simulator_registry() {
  static std::map<std::string, DynamicsFn> reg;
  return reg;
}

std::string key_of(const std::string& obs, int id) {
  return obs + "[" + std::to_string(id) + "]";
}

void fill_ball(Trajectory& tr, const ExperimentSpec& spec, int id,
               const std::vector<double>& xs, const std::vector<double>& ys,
               const std::vector<double>& zs) {
  tr.obs[key_of("posx", id)] = xs;
  tr.obs[key_of("posy", id)] = ys;
  tr.obs[key_of("posz", id)] = zs;
  std::vector<double> dist(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - spec.dist_origin[0];
    const double dy = ys[i] - spec.dist_origin[1];
    const double dz = zs[i] - spec.dist_origin[2];
    dist[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  tr.obs[key_of("dist", id)] = dist;
}

std::vector<double> column(const std::vector<std::vector<double>>& states, std::size_t idx) {
  std::vector<double> out(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) out[i] = states[i][idx];
  return out;
}

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

double P(const std::map<std::string, double>& p, const std::string& k) {
  auto it = p.find(k);
  if (it == p.end()) throw UsageError("simulator: missing parameter " + k);
  return it->second;
}

// smooth stiff contact: |F| = dV/dr for V = A (d0 - r)^3, active for r < d0
double contact_force(double r, double A, double d0) {
  if (r >= d0) return 0.0;
  const double pen = d0 - r;
  return 3.0 * A * pen * pen;
}

Trajectory sim_uniform_motion(const ExperimentSpec& spec,
                              const std::map<std::string, double>& p) {
  auto deriv = [](double, const std::vector<double>& s, std::vector<double>& d) {
    d[0] = s[1];
    d[1] = 0.0;
  };
  Trajectory tr;
  tr.states = rk4_integrate(deriv, {P(p, "x0"), P(p, "vx0")}, spec.t0, spec.t1,
                            spec.n_points, 20);
  const std::size_t n = tr.states.size();
  fill_ball(tr, spec, 1, column(tr.states, 0), zeros(n), zeros(n));
  return tr;
}

Trajectory sim_free_fall(const ExperimentSpec& spec, const std::map<std::string, double>& p) {
  const double g = P(p, "g");
  auto deriv = [g](double, const std::vector<double>& s, std::vector<double>& d) {
    d[0] = s[1];
    d[1] = -g;
  };
  Trajectory tr;
  tr.states = rk4_integrate(deriv, {P(p, "z0"), P(p, "vz0")}, spec.t0, spec.t1,
                            spec.n_points, 20);
  const std::size_t n = tr.states.size();
  fill_ball(tr, spec, 1, zeros(n), zeros(n), column(tr.states, 0));
  return tr;
}

Trajectory sim_projectile(const ExperimentSpec& spec, const std::map<std::string, double>& p) {
  const double g = P(p, "g");
  auto deriv = [g](double, const std::vector<double>& s, std::vector<double>& d) {
    d[0] = s[2];
    d[1] = s[3];
    d[2] = 0.0;
    d[3] = -g;
  };
  Trajectory tr;
  tr.states = rk4_integrate(deriv, {0.0, P(p, "z0"), P(p, "vx0"), P(p, "vz0")}, spec.t0,
                            spec.t1, spec.n_points, 20);
  fill_ball(tr, spec, 1, column(tr.states, 0), zeros(tr.states.size()),
            column(tr.states, 1));
  return tr;
}

Trajectory sim_free_spring(const ExperimentSpec& spec, const std::map<std::string, double>& p) {
  Trajectory tr;
  tr.obs[key_of("length", 1)] =
      std::vector<double>(static_cast<std::size_t>(spec.n_points), P(p, "spring1.L0"));
  return tr;
}

Trajectory sim_spring_ball_horizontal(const ExperimentSpec& spec,
                                      const std::map<std::string, double>& p) {
  const double m = P(p, "ball1.mass"), k = P(p, "spring1.k"), L0 = P(p, "spring1.L0");
  auto deriv = [=](double, const std::vector<double>& s, std::vector<double>& d) {
    d[0] = s[1];
    d[1] = -(k / m) * (s[0] - L0);
  };
  Trajectory tr;
  tr.states = rk4_integrate(deriv, {L0 + P(p, "x_amp"), P(p, "v0")}, spec.t0, spec.t1,
                            spec.n_points, 20);
  const std::size_t n = tr.states.size();
  fill_ball(tr, spec, 1, column(tr.states, 0), zeros(n), zeros(n));
  tr.obs[key_of("length", 3)] = column(tr.states, 0);
  return tr;
}

Trajectory sim_spring_ball_vertical(const ExperimentSpec& spec,
                                    const std::map<std::string, double>& p) {
  const double m = P(p, "ball1.mass"), k = P(p, "spring1.k"), L0 = P(p, "spring1.L0");
  const double g = P(p, "g");
  auto deriv = [=](double, const std::vector<double>& s, std::vector<double>& d) {
    const double L = -s[0];
    d[0] = s[1];
    d[1] = k * (L - L0) / m - g;
  };
  const double z_eq = -(L0 + m * g / k);
  Trajectory tr;
  tr.states = rk4_integrate(deriv, {z_eq - P(p, "offset"), 0.0}, spec.t0, spec.t1,
                            spec.n_points, 20);
  const std::size_t n = tr.states.size();
  std::vector<double> z = column(tr.states, 0), L(n);
  for (std::size_t i = 0; i < n; ++i) L[i] = -z[i];
  fill_ball(tr, spec, 1, zeros(n), zeros(n), z);
  tr.obs[key_of("length", 3)] = L;
  return tr;
}

Trajectory sim_collision_1d(const ExperimentSpec& spec,
                            const std::map<std::string, double>& p) {
  const double m1 = P(p, "ball1.mass"), m2 = P(p, "ball2.mass");
  const double A = P(p, "contact_A"), d0 = P(p, "contact_d0");
  auto deriv = [=](double, const std::vector<double>& s, std::vector<double>& d) {
    const double r = s[1] - s[0];
    const double f = contact_force(std::abs(r), A, d0);
    const double dir = r >= 0 ? 1.0 : -1.0;
    d[0] = s[2];
    d[1] = s[3];
    d[2] = -dir * f / m1;
    d[3] = dir * f / m2;
  };
  Trajectory tr;
  tr.states = rk4_integrate(deriv, {P(p, "x10"), P(p, "x20"), P(p, "v10"), P(p, "v20")},
                            spec.t0, spec.t1, spec.n_points, 20);
  const std::size_t n = tr.states.size();
  fill_ball(tr, spec, 1, column(tr.states, 0), zeros(n), zeros(n));
  fill_ball(tr, spec, 2, column(tr.states, 1), zeros(n), zeros(n));
  return tr;
}

Trajectory sim_collision_2d(const ExperimentSpec& spec,
                            const std::map<std::string, double>& p) {
  const double m1 = P(p, "ball1.mass"), m2 = P(p, "ball2.mass");
  const double A = P(p, "contact_A"), d0 = P(p, "contact_d0");
  auto deriv = [=](double, const std::vector<double>& s, std::vector<double>& d) {
    const double rx = s[2] - s[0], ry = s[3] - s[1];
    const double r = std::sqrt(rx * rx + ry * ry);
    const double f = contact_force(r, A, d0);
    const double ux = r > 1e-12 ? rx / r : 1.0, uy = r > 1e-12 ? ry / r : 0.0;
    d[0] = s[4];
    d[1] = s[5];
    d[2] = s[6];
    d[3] = s[7];
    d[4] = -f * ux / m1;
    d[5] = -f * uy / m1;
    d[6] = f * ux / m2;
    d[7] = f * uy / m2;
  };
  const double b = P(p, "impact");
  Trajectory tr;
  tr.states = rk4_integrate(
      deriv, {-2.0, -b / 2, 2.0, b / 2, P(p, "v10"), 0.0, P(p, "v20"), 0.0}, spec.t0,
      spec.t1, spec.n_points, 20);
  fill_ball(tr, spec, 1, column(tr.states, 0), column(tr.states, 1),
            zeros(tr.states.size()));
  fill_ball(tr, spec, 2, column(tr.states, 2), column(tr.states, 3),
            zeros(tr.states.size()));
  return tr;
}

Trajectory sim_two_ball_spring(const ExperimentSpec& spec,
                               const std::map<std::string, double>& p) {
  const double m1 = P(p, "ball1.mass"), m2 = P(p, "ball2.mass");
  const double k = P(p, "spring1.k"), L0 = P(p, "spring1.L0");
  auto deriv = [=](double, const std::vector<double>& s, std::vector<double>& d) {
    const double stretch = s[1] - s[0] - L0;
    d[0] = s[2];
    d[1] = s[3];
    d[2] = k * stretch / m1;
    d[3] = -k * stretch / m2;
  };
  Trajectory tr;
  tr.states = rk4_integrate(deriv, {P(p, "x10"), P(p, "x20"), P(p, "v10"), P(p, "v20")},
                            spec.t0, spec.t1, spec.n_points, 20);
  const std::size_t n = tr.states.size();
  fill_ball(tr, spec, 1, column(tr.states, 0), zeros(n), zeros(n));
  fill_ball(tr, spec, 2, column(tr.states, 1), zeros(n), zeros(n));
  std::vector<double> len(n);
  for (std::size_t i = 0; i < n; ++i) len[i] = tr.states[i][1] - tr.states[i][0];
  tr.obs[key_of("length", 4)] = len;
  return tr;
}

void plane_basis(double cx, double cy, double cz, std::array<double, 3>& e1,
                 std::array<double, 3>& e2) {
  const std::array<double, 3> c{cx, cy, cz};
  const double cn = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
  std::array<double, 3> a{1.0, 0.0, 0.0};
  if (std::abs(c[0]) > 0.9 * cn) a = {0.0, 1.0, 0.0};
  const double c2 = cn * cn;
  const double ac = (a[0] * c[0] + a[1] * c[1] + a[2] * c[2]) / c2;
  for (std::size_t i = 0; i < 3; ++i) e1[i] = a[i] - ac * c[i];
  const double n1 = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
  for (auto& v : e1) v /= n1;
  e2 = {c[1] * e1[2] - c[2] * e1[1], c[2] * e1[0] - c[0] * e1[2],
        c[0] * e1[1] - c[1] * e1[0]};
  const double n2 = std::sqrt(e2[0] * e2[0] + e2[1] * e2[1] + e2[2] * e2[2]);
  for (auto& v : e2) v /= n2;
}

Trajectory sim_inclined_plane_ball(const ExperimentSpec& spec,
                                   const std::map<std::string, double>& p) {
  const double g = P(p, "g");
  const double cx = spec.geometry.at("cx"), cy = spec.geometry.at("cy"),
               cz = spec.geometry.at("cz");
  const double c2 = cx * cx + cy * cy + cz * cz;
  const double ax = g * cz * cx / c2;
  const double ay = g * cz * cy / c2;
  const double az = -g * (1.0 - cz * cz / c2);
  auto deriv = [=](double, const std::vector<double>& s, std::vector<double>& d) {
    d[0] = s[3];
    d[1] = s[4];
    d[2] = s[5];
    d[3] = ax;
    d[4] = ay;
    d[5] = az;
  };
  std::array<double, 3> e1{}, e2{};
  plane_basis(cx, cy, cz, e1, e2);
  const double s1 = P(p, "s1"), s2 = P(p, "s2"), u1 = P(p, "u1"), u2 = P(p, "u2");
  std::vector<double> s0 = {s1 * e1[0] + s2 * e2[0], s1 * e1[1] + s2 * e2[1],
                            s1 * e1[2] + s2 * e2[2], u1 * e1[0] + u2 * e2[0],
                            u1 * e1[1] + u2 * e2[1], u1 * e1[2] + u2 * e2[2]};
  Trajectory tr;
  tr.states = rk4_integrate(deriv, std::move(s0), spec.t0, spec.t1, spec.n_points, 20);
  fill_ball(tr, spec, 1, column(tr.states, 0), column(tr.states, 1), column(tr.states, 2));
  return tr;
}

Trajectory sim_inclined_plane_spring(const ExperimentSpec& spec,
                                     const std::map<std::string, double>& p) {
  const double g = P(p, "g");
  const double m = P(p, "ball1.mass"), k = P(p, "spring1.k"), L0 = P(p, "spring1.L0");
  const double cx = spec.geometry.at("cx"), cy = spec.geometry.at("cy"),
               cz = spec.geometry.at("cz");
  const double c2 = cx * cx + cy * cy + cz * cz;
  auto deriv = [=](double, const std::vector<double>& s, std::vector<double>& d) {
    const double L = std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
    const double fs = L > 1e-12 ? -k * (L - L0) / L : 0.0;
    double a[3] = {fs * s[0] / m, fs * s[1] / m, fs * s[2] / m - g};
    const double an = (a[0] * cx + a[1] * cy + a[2] * cz) / c2;
    a[0] -= an * cx;
    a[1] -= an * cy;
    a[2] -= an * cz;
    d[0] = s[3];
    d[1] = s[4];
    d[2] = s[5];
    d[3] = a[0];
    d[4] = a[1];
    d[5] = a[2];
  };
  std::array<double, 3> e1{}, e2{};
  plane_basis(cx, cy, cz, e1, e2);
  const double r0 = P(p, "r0"), phi = P(p, "phi"), u1 = P(p, "u1"), u2 = P(p, "u2");
  const double a1 = r0 * std::cos(phi), a2 = r0 * std::sin(phi);
  std::vector<double> s0 = {a1 * e1[0] + a2 * e2[0], a1 * e1[1] + a2 * e2[1],
                            a1 * e1[2] + a2 * e2[2], u1 * e1[0] + u2 * e2[0],
                            u1 * e1[1] + u2 * e2[1], u1 * e1[2] + u2 * e2[2]};
  Trajectory tr;
  tr.states = rk4_integrate(deriv, std::move(s0), spec.t0, spec.t1, spec.n_points, 20);
  const std::size_t n = tr.states.size();
  fill_ball(tr, spec, 1, column(tr.states, 0), column(tr.states, 1), column(tr.states, 2));
  std::vector<double> len(n);
  for (std::size_t i = 0; i < n; ++i)
    len[i] = std::sqrt(tr.states[i][0] * tr.states[i][0] + tr.states[i][1] * tr.states[i][1] +
                       tr.states[i][2] * tr.states[i][2]);
  tr.obs[key_of("length", 3)] = len;
  return tr;
}

Trajectory sim_chained_springs(const ExperimentSpec& spec,
                               const std::map<std::string, double>& p) {
  const double m1 = P(p, "ball1.mass"), m2 = P(p, "ball2.mass");
  const double k1 = P(p, "spring1.k"), L01 = P(p, "spring1.L0");
  const double k2 = P(p, "spring2.k"), L02 = P(p, "spring2.L0");
  auto deriv = [=](double, const std::vector<double>& s, std::vector<double>& d) {
    const double st1 = s[0] - L01;
    const double st2 = s[1] - s[0] - L02;
    d[0] = s[2];
    d[1] = s[3];
    d[2] = (-k1 * st1 + k2 * st2) / m1;
    d[3] = (-k2 * st2) / m2;
  };
  Trajectory tr;
  tr.states = rk4_integrate(deriv, {P(p, "x10"), P(p, "x20"), P(p, "v10"), P(p, "v20")},
                            spec.t0, spec.t1, spec.n_points, 20);
  const std::size_t n = tr.states.size();
  fill_ball(tr, spec, 1, column(tr.states, 0), zeros(n), zeros(n));
  fill_ball(tr, spec, 2, column(tr.states, 1), zeros(n), zeros(n));
  std::vector<double> l1(n), l2(n);
  for (std::size_t i = 0; i < n; ++i) {
    l1[i] = tr.states[i][0];
    l2[i] = tr.states[i][1] - tr.states[i][0];
  }
  tr.obs[key_of("length", 4)] = l1;
  tr.obs[key_of("length", 5)] = l2;
  return tr;
}

Trajectory sim_gravity_twobody(const ExperimentSpec& spec,
                               const std::map<std::string, double>& p) {
  const double m1 = P(p, "ball1.mass"), m2 = P(p, "ball2.mass"), G = P(p, "G");
  auto deriv = [=](double, const std::vector<double>& s, std::vector<double>& d) {
    const double rx = s[2] - s[0], ry = s[3] - s[1];
    const double r2 = rx * rx + ry * ry;
    const double r = std::sqrt(r2);
    if (r < 1e-6) throw SimulatorError("two-body close encounter below resolution");
    const double f = G / (r2 * r);
    d[0] = s[4];
    d[1] = s[5];
    d[2] = s[6];
    d[3] = s[7];
    d[4] = f * m2 * rx;
    d[5] = f * m2 * ry;
    d[6] = -f * m1 * rx;
    d[7] = -f * m1 * ry;
  };
  const double sep = P(p, "sep"), vf = P(p, "speed_factor");
  const double M = m1 + m2;
  const double vrel = vf * std::sqrt(G * M / sep);
  const double x1 = -sep * m2 / M, x2 = sep * m1 / M;
  std::vector<double> s0 = {x1, 0.0, x2, 0.0, 0.0, vrel * m2 / M, 0.0, -vrel * m1 / M};
  Trajectory tr;
  tr.states = rk4_integrate(deriv, std::move(s0), spec.t0, spec.t1, spec.n_points, 20);
  fill_ball(tr, spec, 1, column(tr.states, 0), column(tr.states, 1),
            zeros(tr.states.size()));
  fill_ball(tr, spec, 2, column(tr.states, 2), column(tr.states, 3),
            zeros(tr.states.size()));
  return tr;
}

void ensure_builtin_simulators() {
  auto& reg = simulator_registry();
  if (!reg.empty()) return;
  reg["uniform_motion"] = sim_uniform_motion;
  reg["free_fall"] = sim_free_fall;
  reg["projectile"] = sim_projectile;
  reg["free_spring"] = sim_free_spring;
  reg["spring_ball_horizontal"] = sim_spring_ball_horizontal;
  reg["spring_ball_vertical"] = sim_spring_ball_vertical;
  reg["collision_1d"] = sim_collision_1d;
  reg["collision_2d"] = sim_collision_2d;
  reg["two_ball_spring"] = sim_two_ball_spring;
  reg["inclined_plane_ball"] = sim_inclined_plane_ball;
  reg["inclined_plane_spring"] = sim_inclined_plane_spring;
  reg["chained_springs"] = sim_chained_springs;
  reg["gravity_twobody"] = sim_gravity_twobody;
}

}  // namespace

void register_simulator(const std::string& name, DynamicsFn fn) {
  ensure_builtin_simulators();
  simulator_registry()[name] = std::move(fn);
}

Trajectory simulate_truth(const ExperimentSpec& spec,
                          const std::map<std::string, double>& params) {
  ensure_builtin_simulators();
  auto it = simulator_registry().find(spec.simulator);
  if (it == simulator_registry().end())
    throw UsageError("unknown simulator '" + spec.simulator + "'");
  std::map<std::string, double> full = spec.default_params();
  for (const auto& [k, v] : params) {
    const ParamSpec* ps = spec.find_param(k);
    if (!ps) throw UsageError("experiment " + spec.name + " has no parameter '" + k + "'");
    // ranges bound the controllable initial conditions; object properties are
    // whatever the inserted object carries (measurement runs host any object)
    if (ps->kind == ParamKind::Initial && (v < ps->lo || v > ps->hi))
      throw UsageError("parameter " + k + " out of declared range");
    full[k] = v;
  }
  Trajectory tr = it->second(spec, full);
  std::vector<double> grid(static_cast<std::size_t>(spec.n_points));
  for (int i = 0; i < spec.n_points; ++i)
    grid[static_cast<std::size_t>(i)] =
        spec.t0 + (spec.t1 - spec.t0) * i / (spec.n_points - 1);
  tr.obs["t"] = grid;
  return tr;
}

ExperimentData simulate(const ExperimentSpec& spec,
                        const std::map<std::string, double>& params, uint64_t seed,
                        const DataPolicy& policy) {
  Trajectory truth = simulate_truth(spec, params);
  ExperimentData data;
  data.experiment = spec.name;
  data.seed = seed;
  data.n_points = spec.n_points;
  data.repeat_time = spec.repeat_time;
  for (const auto& o : spec.objects) {
    PhysObject stripped = o;
    stripped.props.clear();
    data.roster.push_back(std::move(stripped));
  }
  std::map<std::string, double> full = spec.default_params();
  for (const auto& [k, v] : params) full[k] = v;
  data.assignment = full;
  data.grid = truth.obs.at("t");

  const std::size_t n = data.grid.size();
  const int repeat = std::max(2, spec.repeat_time);
  for (const auto& [key, values] : truth.obs) {
    if (key == "t") {
      SeriesData s;
      s.mean = values;
      s.std.assign(n, 0.0);
      s.bad.assign(n, 0);
      s.repeat_time = 1;
      data.observables["t"] = MeasuredValue::series(std::move(s), policy);
      continue;
    }
    double lo = values[0], hi = values[0], maxabs = 0.0;
    for (double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      maxabs = std::max(maxabs, std::abs(v));
    }
    double scale = std::max(hi - lo, 0.01 * maxabs);
    if (scale <= 0.0) scale = 1e-9;
    const double sigma = spec.noise_rel * scale;
    Rng rng(seed_from(seed, spec.name + "/" + key));
    std::vector<double> samples(static_cast<std::size_t>(repeat) * n);
    for (int r = 0; r < repeat; ++r)
      for (std::size_t i = 0; i < n; ++i)
        samples[static_cast<std::size_t>(r) * n + i] = values[i] + rng.normal(0.0, sigma);
    data.observables[key] = MeasuredValue::series_from_samples(samples, repeat, n, policy);
  }
  return data;
}

std::vector<ExperimentData> vary_parameter(const ExperimentSpec& spec,
                                           const std::map<std::string, double>& base,
                                           const std::string& param_name,
                                           const std::vector<double>& values, uint64_t seed,
                                           const DataPolicy& policy) {
  if (!spec.find_param(param_name))
    throw UsageError("vary_parameter: unknown parameter " + param_name);
  std::vector<ExperimentData> out;
  uint64_t idx = 0;
  for (double v : values) {
    std::map<std::string, double> p = base;
    p[param_name] = v;
    out.push_back(simulate(spec, p, seed_from(seed, "vary/" + param_name, idx), policy));
    ++idx;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Declarative experiment format

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

struct RangeDecl {
  std::string name;
  double def, lo, hi;
};

// "name = def [lo, hi]" fragments used by object/param/world lines
RangeDecl parse_range_decl(const std::string& frag) {
  RangeDecl r;
  std::string s = frag;
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw UsageError("experiment decl: expected '=' in '" + frag + "'");
  r.name = s.substr(0, eq);
  r.name.erase(std::remove_if(r.name.begin(), r.name.end(),
                              [](unsigned char c) { return std::isspace(c); }),
               r.name.end());
  s = s.substr(eq + 1);
  const auto lb = s.find('[');
  if (lb == std::string::npos) {
    r.def = std::stod(s);
    r.lo = r.hi = r.def;
    return r;
  }
  r.def = std::stod(s.substr(0, lb));
  const auto comma = s.find(',', lb);
  const auto rb = s.find(']', lb);
  if (comma == std::string::npos || rb == std::string::npos)
    throw UsageError("experiment decl: malformed range in '" + frag + "'");
  r.lo = std::stod(s.substr(lb + 1, comma - lb - 1));
  r.hi = std::stod(s.substr(comma + 1, rb - comma - 1));
  return r;
}

}  // namespace

ExperimentSpec parse_experiment_spec(const std::string& text) {
  ExperimentSpec spec;
  std::istringstream is(text);
  std::string line;
  bool saw_end = false;
  int next_id = 1;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    const std::string& head = toks[0];
    if (head == "experiment") {
      if (toks.size() != 2) throw UsageError("experiment decl: name expected");
      spec.name = toks[1];
    } else if (head == "simulator") {
      spec.simulator = toks.at(1);
    } else if (head == "object") {
      PhysObject o;
      o.name = toks.at(1);
      o.type = toks.at(2);
      o.id = next_id++;
      if (!find_object_type(o.type))
        throw UsageError("experiment decl: unknown object type " + o.type);
      std::string rest;
      for (std::size_t i = 3; i < toks.size(); ++i) rest += toks[i] + " ";
      std::istringstream props(rest);
      std::string frag;
      while (std::getline(props, frag, ';')) {
        if (frag.find('=') == std::string::npos) continue;
        const RangeDecl r = parse_range_decl(frag);
        o.props[r.name] = r.def;
        ParamSpec ps;
        ps.name = o.name + "." + r.name;
        ps.def = r.def;
        ps.lo = r.lo;
        ps.hi = r.hi;
        ps.kind = ParamKind::ObjectProp;
        ps.object = o.name;
        spec.params.push_back(std::move(ps));
      }
      spec.objects.push_back(std::move(o));
    } else if (head == "param" || head == "world") {
      std::string rest;
      for (std::size_t i = 1; i < toks.size(); ++i) rest += toks[i] + " ";
      const RangeDecl r = parse_range_decl(rest);
      ParamSpec ps;
      ps.name = r.name;
      ps.def = r.def;
      ps.lo = r.lo;
      ps.hi = r.hi;
      ps.kind = head == "param" ? ParamKind::Initial : ParamKind::World;
      spec.params.push_back(std::move(ps));
    } else if (head == "geometry") {
      std::string rest;
      for (std::size_t i = 1; i < toks.size(); ++i) rest += toks[i] + " ";
      const RangeDecl r = parse_range_decl(rest);
      spec.geometry[r.name] = r.def;
    } else if (head == "constraint") {
      std::string rest;
      for (std::size_t i = 1; i < toks.size(); ++i) rest += toks[i] + " ";
      const auto eq = rest.rfind('=');
      if (eq == std::string::npos)
        throw UsageError("experiment decl: constraint must end with '= 0'");
      spec.constraints.push_back(rest.substr(0, eq));
    } else if (head == "time") {
      spec.t0 = std::stod(toks.at(1));
      spec.t1 = std::stod(toks.at(2));
    } else if (head == "grid") {
      spec.n_points = std::stoi(toks.at(1));
      if (toks.size() > 3 && toks[2] == "repeat") spec.repeat_time = std::stoi(toks.at(3));
      if (toks.size() > 5 && toks[4] == "noise") spec.noise_rel = std::stod(toks.at(5));
    } else if (head == "origin") {
      spec.dist_origin = {std::stod(toks.at(1)), std::stod(toks.at(2)),
                          std::stod(toks.at(3))};
    } else if (head == "end") {
      saw_end = true;
      break;
    } else {
      throw UsageError("experiment decl: unknown directive '" + head + "'");
    }
  }
  if (!saw_end) throw UsageError("experiment decl: missing 'end'");
  if (spec.name.empty() || spec.simulator.empty())
    throw UsageError("experiment decl: name and simulator are required");
  bool has_clock = false;
  for (const auto& o : spec.objects) has_clock |= o.type == "Clock";
  if (!has_clock) throw UsageError("experiment decl: every experiment needs a Clock");
  return spec;
}

std::string print_experiment_spec(const ExperimentSpec& spec) {
  std::ostringstream os;
  os << "experiment " << spec.name << "\n";
  os << "simulator " << spec.simulator << "\n";
  for (const auto& o : spec.objects) {
    os << "object " << o.name << " " << o.type;
    bool first = true;
    for (const auto& [k, v] : o.props) {
      const ParamSpec* ps = spec.find_param(o.name + "." + k);
      os << (first ? " " : " ; ") << k << " = " << v;
      if (ps && (ps->lo != ps->hi)) os << " [" << ps->lo << ", " << ps->hi << "]";
      first = false;
    }
    os << "\n";
  }
  for (const auto& p : spec.params) {
    if (p.kind == ParamKind::ObjectProp) continue;
    os << (p.kind == ParamKind::World ? "world " : "param ") << p.name << " = " << p.def;
    if (p.lo != p.hi) os << " [" << p.lo << ", " << p.hi << "]";
    os << "\n";
  }
  for (const auto& [k, v] : spec.geometry) os << "geometry " << k << " = " << v << "\n";
  for (const auto& c : spec.constraints) os << "constraint " << c << " = 0\n";
  os << "time " << spec.t0 << " " << spec.t1 << "\n";
  os << "grid " << spec.n_points << " repeat " << spec.repeat_time << " noise "
     << spec.noise_rel << "\n";
  os << "end\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Built-in catalog, declared in the text format so the loader is exercised.
// Spring constants: the vertical mass-measurement spring is g times stiffer
// than the horizontal one, so the elongation-based and oscillation-based mass
// procedures agree numerically (m g / k_v == m / k_h).

namespace {

const char* const kCatalogDecls[] = {
    R"(experiment uniform_motion
simulator uniform_motion
object ball1 Ball mass = 1 [0.5, 3]
object clock1 Clock
param x0 = 3 [2, 6]
param vx0 = 0.8 [0.3, 1.5]
time 0 4
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment free_fall
simulator free_fall
object ball1 Ball mass = 1 [0.5, 3]
object clock1 Clock
param z0 = 10 [8, 15]
param vz0 = 0 [-1, 1]
world g = 9.8
time 0 1.1
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment projectile
simulator projectile
object ball1 Ball mass = 1 [0.5, 3]
object clock1 Clock
param z0 = 12 [8, 15]
param vx0 = 2 [1, 3]
param vz0 = 1 [0, 2]
world g = 9.8
time 0 1.2
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment free_spring
simulator free_spring
object spring1 Spring k = 5 [3, 8] ; L0 = 1 [0.6, 1.6]
object clock1 Clock
time 0 4
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment spring_ball_horizontal
simulator spring_ball_horizontal
object ball1 Ball mass = 1 [0.5, 3]
object clock1 Clock
object spring1 Spring k = 5 [3, 8] ; L0 = 1 [0.8, 1.5]
param x_amp = 0.3 [0.2, 0.5]
param v0 = 0 [-0.5, 0.5]
constraint length[3] - posx[1] = 0
time 0 6
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment spring_ball_vertical
simulator spring_ball_vertical
object ball1 Ball mass = 1 [0.5, 3]
object clock1 Clock
object spring1 Spring k = 49 [30, 80] ; L0 = 1 [0.8, 1.5]
param offset = 0 [-0.1, 0.1]
world g = 9.8
constraint length[3] + posz[1] = 0
time 0 4
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment collision_1d
simulator collision_1d
object ball1 Ball mass = 1 [0.5, 3]
object ball2 Ball mass = 2 [0.5, 3]
object clock1 Clock
param x10 = -2 [-3, -1.5]
param x20 = 2 [1.5, 3]
param v10 = 1 [0.5, 1.5]
param v20 = -0.3 [-1.5, -0.2]
world contact_A = 20000
world contact_d0 = 0.25
time 0 4
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment collision_2d
simulator collision_2d
object ball1 Ball mass = 1 [0.5, 3]
object ball2 Ball mass = 2 [0.5, 3]
object clock1 Clock
param impact = 0.1 [0.05, 0.15]
param v10 = 1 [0.5, 1.5]
param v20 = -1 [-1.5, -0.5]
world contact_A = 20000
world contact_d0 = 0.25
time 0 4
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment two_ball_spring
simulator two_ball_spring
object ball1 Ball mass = 1 [0.5, 3]
object ball2 Ball mass = 1.5 [0.5, 3]
object clock1 Clock
object spring1 Spring k = 4 [3, 8] ; L0 = 1 [0.8, 1.5]
param x10 = -0.7 [-0.9, -0.5]
param x20 = 0.7 [0.5, 0.9]
param v10 = 0.2 [-0.5, 0.5]
param v20 = -0.1 [-0.5, 0.5]
constraint length[4] - posx[2] + posx[1] = 0
time 0 6
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment inclined_plane_ball
simulator inclined_plane_ball
object ball1 Ball mass = 1 [0.5, 3]
object clock1 Clock
param s1 = 0.5 [-1, 1]
param s2 = 0.3 [-1, 1]
param u1 = 0.2 [-1, 1]
param u2 = 0 [-1, 1]
world g = 9.8
geometry cx = 1
geometry cy = 1
geometry cz = 1
constraint posx[1] + posy[1] + posz[1] = 0
time 0 1.5
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment inclined_plane_spring
simulator inclined_plane_spring
object ball1 Ball mass = 1 [0.5, 3]
object clock1 Clock
object spring1 Spring k = 6 [3, 10] ; L0 = 1 [0.8, 1.5]
param r0 = 1.4 [1.2, 1.8]
param phi = 0.4 [0, 6.28]
param u1 = 0 [-0.5, 0.5]
param u2 = 0.3 [-0.5, 0.5]
world g = 9.8
geometry cx = 1
geometry cy = 1
geometry cz = 1
constraint posx[1] + posy[1] + posz[1] = 0
constraint length[3]**2 - posx[1]**2 - posy[1]**2 - posz[1]**2 = 0
time 0 5
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment chained_springs
simulator chained_springs
object ball1 Ball mass = 1 [0.5, 3]
object ball2 Ball mass = 1.5 [0.5, 3]
object clock1 Clock
object spring1 Spring k = 5 [3, 8] ; L0 = 1 [0.8, 1.5]
object spring2 Spring k = 3 [2, 6] ; L0 = 1 [0.8, 1.5]
param x10 = 1.2 [1, 1.6]
param x20 = 2.5 [2.1, 3]
param v10 = 0 [-0.5, 0.5]
param v20 = 0.3 [-0.5, 0.5]
constraint length[4] - posx[1] = 0
constraint length[5] - posx[2] + posx[1] = 0
time 0 8
grid 100 repeat 100 noise 0.001
end)",
    R"(experiment gravity_twobody
simulator gravity_twobody
object ball1 Ball mass = 1 [0.5, 1.5]
object ball2 Ball mass = 0.5 [0.2, 1]
object clock1 Clock
param sep = 1.5 [1.2, 2]
param speed_factor = 0.95 [0.8, 1.1]
world G = 1
time 0 9
grid 100 repeat 100 noise 0.001
end)",
};

}  // namespace

const std::vector<ExperimentSpec>& catalog() {
  static const std::vector<ExperimentSpec> specs = [] {
    std::vector<ExperimentSpec> out;
    for (const char* decl : kCatalogDecls) out.push_back(parse_experiment_spec(decl));
    return out;
  }();
  return specs;
}

const ExperimentSpec* find_experiment(const std::string& name) {
  for (const auto& s : catalog())
    if (s.name == name) return &s;
  return nullptr;
}

}  // namespace physlaw
