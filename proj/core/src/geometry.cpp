#include "physlaw/geometry.hpp"

#include "physlaw/measured.hpp"  // UsageError

#include <Eigen/Dense>

#include <algorithm>
#include <sstream>

namespace physlaw {

namespace {

bool rf_zero(const RationalFn& f) { return f.num.is_zero(); }

}  // namespace

DifferentialForm DifferentialForm::operator+(const DifferentialForm& o) const {
  DifferentialForm r = *this;
  for (const auto& [v, c] : o.coeffs) {
    auto it = r.coeffs.find(v);
    if (it == r.coeffs.end()) {
      r.coeffs.emplace(v, c);
    } else {
      it->second = it->second + c;
      if (rf_zero(it->second)) r.coeffs.erase(it);
    }
  }
  return r;
}

DifferentialForm DifferentialForm::operator-(const DifferentialForm& o) const {
  DifferentialForm r = *this;
  for (const auto& [v, c] : o.coeffs) {
    auto it = r.coeffs.find(v);
    if (it == r.coeffs.end()) {
      r.coeffs.emplace(v, -c);
    } else {
      it->second = it->second - c;
      if (rf_zero(it->second)) r.coeffs.erase(it);
    }
  }
  return r;
}

DifferentialForm DifferentialForm::scaled(const RationalFn& s) const {
  DifferentialForm r;
  if (rf_zero(s)) return r;
  for (const auto& [v, c] : coeffs) {
    RationalFn sc = c * s;
    if (!rf_zero(sc)) r.coeffs.emplace(v, std::move(sc));
  }
  return r;
}

bool DifferentialForm::symbolically_zero() const {
  for (const auto& [v, c] : coeffs)
    if (!rf_zero(c)) return false;
  return true;
}

bool DifferentialForm::equals(const DifferentialForm& o) const {
  return (*this - o).symbolically_zero();
}

bool DifferentialForm::proportional(const DifferentialForm& o) const {
  // find reference components
  const RationalFn* a0 = nullptr;
  const RationalFn* b0 = nullptr;
  for (const auto& [v, c] : coeffs) {
    if (rf_zero(c)) continue;
    auto it = o.coeffs.find(v);
    if (it == o.coeffs.end() || rf_zero(it->second)) return false;
    a0 = &c;
    b0 = &it->second;
    break;
  }
  if (!a0) return o.symbolically_zero();
  // cross ratios: c_v * b0 == d_v * a0 for every coordinate
  for (const auto& [v, c] : coeffs) {
    auto it = o.coeffs.find(v);
    const RationalFn d = (it == o.coeffs.end()) ? RationalFn() : it->second;
    if (!(c * *b0).equals(d * *a0)) return false;
  }
  for (const auto& [v, d] : o.coeffs) {
    if (rf_zero(d)) continue;
    if (coeffs.find(v) == coeffs.end()) return false;
  }
  return true;
}

std::string DifferentialForm::to_string(const VarTable& vars) const {
  if (coeffs.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [v, c] : coeffs) {
    if (!first) os << " + ";
    first = false;
    os << "(" << c.to_string() << ") d" << vars.name(v);
  }
  return os.str();
}

double ConstraintSystem::det_at(const std::function<double(const Indet&)>& point) const {
  return std::abs(h_det.eval(point));
}

namespace {

RationalFn inner(const VectorField& v, const DifferentialForm& w) {
  RationalFn acc;
  for (const auto& [var, comp] : v.comps) {
    auto it = w.coeffs.find(var);
    if (it == w.coeffs.end()) continue;
    acc = acc + comp * it->second;
  }
  return acc;
}

// adjugate inverse for n <= 4
std::pair<std::vector<std::vector<RationalFn>>, RationalFn> invert(
    const std::vector<std::vector<RationalFn>>& m) {
  const std::size_t n = m.size();
  auto det_rec = [](auto&& self, const std::vector<std::vector<RationalFn>>& a) -> RationalFn {
    const std::size_t k = a.size();
    if (k == 0) return RationalFn(Poly::constant(nullptr, 1));
    if (k == 1) return a[0][0];
    RationalFn acc;
    int sign = 1;
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<std::vector<RationalFn>> minor(k - 1, std::vector<RationalFn>(k - 1));
      for (std::size_t r = 1; r < k; ++r) {
        std::size_t cc = 0;
        for (std::size_t c = 0; c < k; ++c) {
          if (c == j) continue;
          minor[r - 1][cc++] = a[r][c];
        }
      }
      RationalFn term = a[0][j] * self(self, minor);
      acc = sign > 0 ? acc + term : acc - term;
      sign = -sign;
    }
    return acc;
  };
  const RationalFn det = det_rec(det_rec, m);
  if (det.num.is_zero())
    throw GeometryError("constraint pairing matrix H is symbolically singular");
  std::vector<std::vector<RationalFn>> inv(n, std::vector<RationalFn>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      // cofactor C_ji / det
      std::vector<std::vector<RationalFn>> minor(n - 1, std::vector<RationalFn>(n - 1));
      std::size_t rr = 0;
      for (std::size_t r = 0; r < n; ++r) {
        if (r == j) continue;
        std::size_t cc = 0;
        for (std::size_t c = 0; c < n; ++c) {
          if (c == i) continue;
          minor[rr][cc++] = m[r][c];
        }
        ++rr;
      }
      RationalFn cof = det_rec(det_rec, minor);
      if ((i + j) % 2 == 1) cof = -cof;
      inv[i][j] = cof / det;
    }
  }
  return {inv, det};
}

}  // namespace

ConstraintSystem classify_constraints(const std::vector<Poly>& constraints,
                                      const std::vector<int>& cartesian_vars,
                                      const std::vector<int>& other_vars,
                                      const VarTable& vars) {
  ConstraintSystem cs;
  cs.vars = &vars;
  cs.constraints = constraints;
  cs.cartesian = cartesian_vars;
  cs.others = other_vars;

  // differential rows: dh_i over all geometric variables
  std::vector<DifferentialForm> rows;
  for (const Poly& h : constraints) {
    DifferentialForm row;
    for (int v : cartesian_vars) {
      Poly d = h.partial_derivative(make_indet(vars, v, 0));
      if (!d.is_zero()) row.coeffs.emplace(v, RationalFn(std::move(d)));
    }
    for (int v : other_vars) {
      Poly d = h.partial_derivative(make_indet(vars, v, 0));
      if (!d.is_zero()) row.coeffs.emplace(v, RationalFn(std::move(d)));
    }
    if (row.symbolically_zero())
      throw GeometryError("constraint '" + h.to_string() + "' has vanishing differential");
    rows.push_back(std::move(row));
  }

  // Gauss-Jordan elimination on the non-cartesian columns
  std::vector<int> pivot_var(rows.size(), -1);
  std::vector<bool> used(rows.size(), false);
  for (int u : other_vars) {
    int pivot = -1;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (used[r]) continue;
      auto it = rows[r].coeffs.find(u);
      if (it != rows[r].coeffs.end() && !rf_zero(it->second)) {
        pivot = static_cast<int>(r);
        break;
      }
    }
    if (pivot < 0) continue;  // variable not constrained
    used[static_cast<std::size_t>(pivot)] = true;
    pivot_var[static_cast<std::size_t>(pivot)] = u;
    const RationalFn pc = rows[static_cast<std::size_t>(pivot)].coeffs.at(u);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r == static_cast<std::size_t>(pivot)) continue;
      auto it = rows[r].coeffs.find(u);
      if (it == rows[r].coeffs.end() || rf_zero(it->second)) continue;
      const RationalFn factor = it->second / pc;
      rows[r] = rows[r] - rows[static_cast<std::size_t>(pivot)].scaled(factor);
    }
  }

  // classify rows; second-type rows first (their reference vectors are the
  // plain d/du directions), then first-type rows
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (pivot_var[r] >= 0) order.push_back(r);
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (pivot_var[r] < 0) order.push_back(r);

  int n_first = 0;
  for (std::size_t r : order) {
    int other_count = 0;
    for (int u : other_vars) {
      auto it = rows[r].coeffs.find(u);
      if (it != rows[r].coeffs.end() && !rf_zero(it->second)) ++other_count;
    }
    if (pivot_var[r] >= 0) {
      if (other_count != 1)
        throw GeometryError("constraint " + std::to_string(r + 1) +
                            " still couples several non-cartesian variables after elimination");
      cs.types.push_back(ConstraintType::Second);
      cs.second_var.push_back(pivot_var[r]);
      VectorField v;
      v.comps.emplace(pivot_var[r], RationalFn(Poly::constant(&vars, 1)));
      cs.refs.push_back(std::move(v));
    } else {
      if (other_count != 0)
        throw GeometryError("constraint " + std::to_string(r + 1) +
                            " is rank-deficient: depends on an uneliminated variable");
      if (rows[r].symbolically_zero())
        throw GeometryError("constraint " + std::to_string(r + 1) +
                            " is dependent on the others (zero row after elimination)");
      cs.types.push_back(ConstraintType::First);
      cs.second_var.push_back(-1);
      VectorField v;
      for (int x : cartesian_vars) {
        auto it = rows[r].coeffs.find(x);
        if (it != rows[r].coeffs.end() && !rf_zero(it->second)) v.comps.emplace(x, it->second);
      }
      cs.refs.push_back(std::move(v));
      ++n_first;
    }
    cs.forms.push_back(rows[r]);
  }

  if (n_first >= static_cast<int>(cartesian_vars.size()) && n_first > 0)
    throw GeometryError("system fully constrained: first-type constraints must be fewer than "
                        "cartesian coordinates");

  // pairing matrix H_ij = <v_i, w_j> and its symbolic inverse
  const std::size_t n = cs.forms.size();
  cs.h_matrix.assign(n, std::vector<RationalFn>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cs.h_matrix[i][j] = inner(cs.refs[i], cs.forms[j]);
  if (n > 0) {
    if (n > 4)
      throw GeometryError("symbolic inversion supports at most 4 constraints; "
                          "use numeric_gradient for larger systems");
    auto [inv, det] = invert(cs.h_matrix);
    cs.h_inverse = std::move(inv);
    cs.h_det = std::move(det);
  } else {
    cs.h_det = RationalFn(Poly::constant(&vars, 1));
  }
  return cs;
}

DifferentialForm differential(const RationalFn& f, const ConstraintSystem& cs) {
  DifferentialForm df;
  for (int v : cs.cartesian) {
    RationalFn d = f.partial(make_indet(*cs.vars, v, 0));
    if (!rf_zero(d)) df.coeffs.emplace(v, std::move(d));
  }
  for (int v : cs.others) {
    RationalFn d = f.partial(make_indet(*cs.vars, v, 0));
    if (!rf_zero(d)) df.coeffs.emplace(v, std::move(d));
  }
  return df;
}

DifferentialForm constrained_gradient(const RationalFn& f, const ConstraintSystem& cs) {
  DifferentialForm result = differential(f, cs);
  if (cs.size() == 0) return result;
  const std::size_t n = cs.size();
  std::vector<RationalFn> vf(n);  // v_j . df
  const DifferentialForm df = result;
  for (std::size_t j = 0; j < n; ++j) vf[j] = inner(cs.refs[j], df);
  for (std::size_t i = 0; i < n; ++i) {
    RationalFn coef;
    for (std::size_t j = 0; j < n; ++j) coef = coef + cs.h_inverse[i][j] * vf[j];
    result = result - cs.forms[i].scaled(coef);
  }
  return result;
}

std::map<int, double> numeric_gradient(const RationalFn& f, const ConstraintSystem& cs,
                                       const std::function<double(const Indet&)>& point) {
  std::map<int, double> out;
  const DifferentialForm df = differential(f, cs);
  for (const auto& [v, c] : df.coeffs) out[v] = c.eval(point);
  const std::size_t n = cs.size();
  if (n == 0) return out;
  Eigen::MatrixXd H(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
        cs.h_matrix[i][j].eval(point);
  Eigen::VectorXd vf(n);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (const auto& [var, comp] : cs.refs[j].comps) {
      auto it = df.coeffs.find(var);
      if (it != df.coeffs.end()) acc += comp.eval(point) * it->second.eval(point);
    }
    vf(static_cast<Eigen::Index>(j)) = acc;
  }
  const Eigen::VectorXd lambda = H.fullPivLu().solve(vf);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [var, c] : cs.forms[i].coeffs) {
      out[var] -= lambda(static_cast<Eigen::Index>(i)) * c.eval(point);
    }
  }
  return out;
}

}  // namespace physlaw
