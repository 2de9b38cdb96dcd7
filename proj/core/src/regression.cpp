#include "physlaw/regression.hpp"

#include "physlaw/parser.hpp"
#include "physlaw/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>

namespace physlaw {

Verdict validate_relation(const ExprPtr& expr, const ExperimentData& data,
                          ConceptStore& store, LawKind kind, WorkCounter* work,
                          const DataPolicy& policy) {
  Verdict out;
  MeasuredValue v;
  try {
    v = eval(expr, data, store, work, policy);
  } catch (const EvalError&) {
    out.result = Verdict::Result::Inconclusive;
    return out;
  }
  out.value = v;
  if (v.is_err()) {
    out.result = Verdict::Result::Inconclusive;
    return out;
  }
  if (kind == LawKind::Zero) {
    if (v.is_zero()) {
      out.result = Verdict::Result::Accepted;
      return out;
    }
    if (v.is_const()) {
      const double z = v.mean() / std::max(v.std_dev(), 1e-300);
      out.chi2 = z * z;
    } else if (v.is_series()) {
      const auto& s = v.series();
      for (std::size_t i = 0; i < s.n(); ++i) {
        if (s.bad[i]) continue;
        const double z = s.mean[i] / std::max(s.std[i], 1e-300);
        out.chi2 += z * z;
      }
    }
    return out;
  }
  // Conserved: Const accepted, Zero is the trivial relation, Series rejected
  if (v.is_const()) {
    out.result = Verdict::Result::Accepted;
    return out;
  }
  if (v.is_series()) {
    try {
      out.chi2 = chi2_const_statistic(v.series(), policy.chi2_confidence).statistic;
    } catch (const UsageError&) {
      out.chi2 = 0.0;
    }
  }
  return out;
}

namespace {

// fitted constants become exact literals; the tolerance widens with the
// fitted uncertainty so 0.4999 +- 0.0005 still snaps to 1/2
Rational snap(double value, double sigma) {
  const double rel = std::abs(value) > 0
                         ? std::max(1e-6, 2.0 * sigma / std::abs(value))
                         : 1e-6;
  return rationalize(value, std::min(rel, 0.2));
}

struct Candidate {
  LawKind kind;
  ExprPtr expr;
};

void push_candidate(std::vector<RelationCandidate>& out, std::set<std::string>& seen,
                    const ExprPtr& expr, LawKind kind, const ExperimentData& data,
                    ConceptStore& store, WorkCounter* budget, const DataPolicy& policy) {
  const std::string key = (kind == LawKind::Zero ? "z:" : "c:") + print_expr(expr);
  if (seen.count(key)) return;
  seen.insert(key);
  const Verdict v = validate_relation(expr, data, store, kind, budget, policy);
  RelationCandidate c;
  c.kind = kind;
  c.expr = expr;
  c.chi2 = v.chi2;
  c.accepted = v.result == Verdict::Result::Accepted;
  c.complexity_score = complexity(expr);
  if (c.accepted) out.push_back(std::move(c));
}

}  // namespace

SearchResult ansatz_search(const std::vector<ExprPtr>& exprs, const ExperimentData& data,
                           ConceptStore& store, WorkCounter* budget,
                           const DataPolicy& policy) {
  SearchResult result;
  std::set<std::string> seen;
  // deduplicate inputs, keep order
  std::vector<ExprPtr> base;
  {
    std::set<std::string> b;
    for (const auto& e : exprs) {
      if (b.insert(print_expr(e)).second) base.push_back(e);
    }
  }

  // per-trial value cache: screening reuses evaluated series, and only the
  // few screened hits are re-evaluated through validate_relation
  std::map<std::string, MeasuredValue> cache;
  auto value_of = [&](const ExprPtr& e) -> const MeasuredValue& {
    const std::string key = print_expr(e);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    MeasuredValue v;
    try {
      v = eval(e, data, store, budget, policy);
    } catch (const EvalError&) {
      v = MeasuredValue::err();
    }
    return cache.emplace(key, std::move(v)).first->second;
  };

  try {
    // single expressions: constancy and zero
    for (const auto& e : base) {
      const MeasuredValue& v = value_of(e);
      if (v.is_const())
        push_candidate(result.candidates, seen, e, LawKind::Conserved, data, store, budget,
                       policy);
      else if (v.is_zero())
        push_candidate(result.candidates, seen, e, LawKind::Zero, data, store, budget, policy);
    }

    // derivative probes d a / d b, screened via the cached time derivatives
    const ExprPtr tatom = make_atom("t");
    for (const auto& a : base) {
      for (const auto& b : base) {
        if (a == b || print_expr(b) == "t") continue;
        const MeasuredValue& da = value_of(make_diff(a, tatom));
        const MeasuredValue& db = value_of(make_diff(b, tatom));
        if (da.is_err() || db.is_err()) continue;
        const MeasuredValue ratio = combine(da, db, BinaryOp::Div, policy);
        if (ratio.is_const() || ratio.is_zero())
          push_candidate(result.candidates, seen, make_diff(a, b), LawKind::Conserved, data,
                         store, budget, policy);
      }
      // direct d a / d t probes
      const MeasuredValue& da = value_of(make_diff(a, tatom));
      if (da.is_const())
        push_candidate(result.candidates, seen, make_diff(a, tatom), LawKind::Conserved,
                       data, store, budget, policy);
    }

    // pairwise linear relations via value ratios: a = c b
    for (std::size_t i = 0; i < base.size(); ++i) {
      for (std::size_t j = 0; j < base.size(); ++j) {
        if (i == j) continue;
        const MeasuredValue& va = value_of(base[i]);
        const MeasuredValue& vb = value_of(base[j]);
        if (va.is_err() || vb.is_err()) continue;
        const MeasuredValue r = combine(va, vb, BinaryOp::Div, policy);
        if (!r.is_const()) continue;
        const Rational c = snap(r.mean(), r.std_dev());
        const ExprPtr rel = make_sub(base[i], make_mul(make_number(c), base[j]));
        push_candidate(result.candidates, seen, rel, LawKind::Zero, data, store, budget,
                       policy);
      }
    }

    // two-term conserved relations over degree <= 3 monomials:
    // a + c b conserved iff (da/dt)/(db/dt) is the constant -c
    std::vector<ExprPtr> monos = base;
    for (std::size_t i = 0; i < base.size(); ++i)
      for (std::size_t j = i; j < base.size(); ++j) monos.push_back(make_mul(base[i], base[j]));
    for (std::size_t i = 0; i < base.size() && monos.size() < 48; ++i)
      for (std::size_t j = i; j < base.size() && monos.size() < 48; ++j)
        for (std::size_t k = j; k < base.size() && monos.size() < 48; ++k)
          monos.push_back(make_mul(base[i], make_mul(base[j], base[k])));
    std::stable_sort(monos.begin(), monos.end(), [](const ExprPtr& a, const ExprPtr& b) {
      return complexity(a) < complexity(b);
    });

    // evaluate each monomial's time derivative once
    std::vector<const MeasuredValue*> dmono(monos.size());
    for (std::size_t i = 0; i < monos.size(); ++i)
      dmono[i] = &value_of(make_diff(monos[i], tatom));

    for (std::size_t i = 0; i < monos.size(); ++i) {
      if (dmono[i]->is_err()) continue;
      for (std::size_t j = i + 1; j < monos.size(); ++j) {
        if (dmono[j]->is_err()) continue;
        const MeasuredValue r = combine(*dmono[i], *dmono[j], BinaryOp::Div, policy);
        if (!r.is_const()) continue;
        const Rational c = snap(-r.mean(), r.std_dev());
        if (c == 0) continue;
        const ExprPtr rel = make_add(monos[i], make_mul(make_number(c), monos[j]));
        push_candidate(result.candidates, seen, rel, LawKind::Conserved, data, store, budget,
                       policy);
      }
    }
  } catch (const BudgetExhausted&) {
    result.complete = false;
  }

  std::stable_sort(result.candidates.begin(), result.candidates.end(),
                   [](const RelationCandidate& a, const RelationCandidate& b) {
                     if (a.complexity_score != b.complexity_score)
                       return a.complexity_score < b.complexity_score;
                     return print_expr(a.expr) < print_expr(b.expr);
                   });
  return result;
}

FeatureMatrix build_features(const std::vector<ExprPtr>& exprs, const ExperimentData& data,
                             ConceptStore& store, WorkCounter* work,
                             const DataPolicy& policy) {
  FeatureMatrix f;
  std::vector<const SeriesData*> series;
  std::vector<MeasuredValue> held;
  held.reserve(exprs.size());
  for (const auto& e : exprs) {
    MeasuredValue v;
    try {
      v = eval(e, data, store, work, policy);
    } catch (const EvalError&) {
      continue;
    }
    if (!v.is_series()) continue;  // constants and errors carry no pca signal
    held.push_back(std::move(v));
    f.columns.push_back(e);
  }
  if (f.columns.empty()) return f;
  const std::size_t n = held.front().series().n();
  for (std::size_t i = 0; i < n; ++i) {
    bool good = true;
    for (const auto& v : held) good &= v.series().n() == n && !v.series().bad[i];
    if (!good) continue;
    std::vector<double> m(f.columns.size()), s(f.columns.size());
    for (std::size_t c = 0; c < f.columns.size(); ++c) {
      m[c] = held[c].series().mean[i];
      s[c] = held[c].series().std[i];
    }
    f.mean.push_back(std::move(m));
    f.std.push_back(std::move(s));
  }
  return f;
}

std::vector<RelationCandidate> pca_relations(const FeatureMatrix& f,
                                             const ExperimentData& data, ConceptStore& store,
                                             int k_max, WorkCounter* work,
                                             const DataPolicy& policy) {
  std::vector<RelationCandidate> out;
  const std::size_t rows = f.rows();
  const std::size_t cols = f.cols();
  if (cols < 2 || rows < 3 * cols) return out;

  // column statistics; constant columns are dropped from the analysis
  std::vector<double> mu(cols, 0.0), scale(cols, 0.0);
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t i = 0; i < rows; ++i) mu[j] += f.mean[i][j];
    mu[j] /= double(rows);
    for (std::size_t i = 0; i < rows; ++i)
      scale[j] += (f.mean[i][j] - mu[j]) * (f.mean[i][j] - mu[j]);
    scale[j] = std::sqrt(scale[j] / double(rows));
  }
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < cols; ++j)
    if (scale[j] > 0.0) keep.push_back(j);
  if (keep.size() < 2) return out;

  Eigen::MatrixXd X(rows, keep.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < keep.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (f.mean[i][keep[j]] - mu[keep[j]]) / scale[keep[j]];

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const auto& V = svd.matrixV();

  int found = 0;
  for (Eigen::Index d = sv.size() - 1; d >= 0 && found < k_max; --d) {
    const Eigen::VectorXd w = V.col(d);
    // direction-aware noise floor: expected norm of the projected per-cell
    // noise (reduces to the flat median rule when columns are homoscedastic,
    // but stays calibrated when a differentiated column dominates the noise)
    double e2 = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < keep.size(); ++j) {
        const double nij = w(static_cast<Eigen::Index>(j)) * f.std[i][keep[j]] / scale[keep[j]];
        e2 += nij * nij;
      }
    const double floor = 3.0 * std::sqrt(e2);
    if (sv(d) >= floor) continue;  // residual exceeds propagated noise
    // strongest standardized component anchors the refit
    Eigen::Index pivot = 0;
    w.cwiseAbs().maxCoeff(&pivot);

    // weighted least squares of the pivot column on the others (raw units)
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < keep.size(); ++j)
      if (static_cast<Eigen::Index>(j) != pivot) others.push_back(j);
    auto wls = [&](const std::vector<std::size_t>& cols_in,
                   Eigen::VectorXd& beta, Eigen::VectorXd& sigma) {
      const std::size_t p = cols_in.size() + 1;  // + intercept
      Eigen::MatrixXd A(rows, p);
      Eigen::VectorXd y(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        const double sd = std::max(f.std[i][keep[static_cast<std::size_t>(pivot)]], 1e-12);
        const double wgt = 1.0 / sd;
        for (std::size_t c = 0; c < cols_in.size(); ++c)
          A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
              wgt * f.mean[i][keep[cols_in[c]]];
        A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p - 1)) = wgt;
        y(static_cast<Eigen::Index>(i)) = wgt * f.mean[i][keep[static_cast<std::size_t>(pivot)]];
      }
      const Eigen::MatrixXd AtA = A.transpose() * A;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(AtA);
      beta = ldlt.solve(A.transpose() * y);
      const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(
          static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
      sigma.resize(static_cast<Eigen::Index>(p));
      for (std::size_t c = 0; c < p; ++c)
        sigma(static_cast<Eigen::Index>(c)) =
            std::sqrt(std::max(cov(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)), 0.0));
    };

    Eigen::VectorXd beta, sigma;
    wls(others, beta, sigma);
    // prune coefficients insignificant at 3 sigma, then refit once
    std::vector<std::size_t> kept_cols;
    for (std::size_t c = 0; c < others.size(); ++c)
      if (std::abs(beta(static_cast<Eigen::Index>(c))) >=
          3.0 * sigma(static_cast<Eigen::Index>(c)))
        kept_cols.push_back(others[c]);
    if (kept_cols.empty()) continue;
    if (kept_cols.size() != others.size()) wls(kept_cols, beta, sigma);

    // relation: sum_c beta_c x_c - pivot  (the intercept becomes the
    // conserved value; it is not part of the expression)
    ExprPtr rel;
    for (std::size_t c = 0; c < kept_cols.size(); ++c) {
      const Rational rc = snap(beta(static_cast<Eigen::Index>(c)),
                               sigma(static_cast<Eigen::Index>(c)));
      if (rc == 0) continue;
      ExprPtr term = make_mul(make_number(rc), f.columns[keep[kept_cols[c]]]);
      rel = rel ? make_add(rel, term) : term;
    }
    if (!rel) continue;
    rel = make_sub(rel, f.columns[keep[static_cast<std::size_t>(pivot)]]);

    MeasuredValue v;
    try {
      v = eval(rel, data, store, work, policy);
    } catch (const EvalError&) {
      continue;
    }
    RelationCandidate cand;
    cand.expr = rel;
    cand.complexity_score = complexity(rel);
    if (v.is_zero()) {
      cand.kind = LawKind::Zero;
      cand.accepted = true;
    } else if (v.is_const()) {
      cand.kind = LawKind::Conserved;
      cand.accepted = true;
    } else {
      continue;
    }
    out.push_back(std::move(cand));
    ++found;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RelationCandidate& a, const RelationCandidate& b) {
                     if (a.complexity_score != b.complexity_score)
                       return a.complexity_score < b.complexity_score;
                     return print_expr(a.expr) < print_expr(b.expr);
                   });
  return out;
}

// ---------------------------------------------------------------------------
// general-law extension

ExprPtr expand_term(const TermSpec& term, const std::vector<PhysObject>& roster) {
  ExprPtr acc;
  for (const PhysObject& o : roster) {
    if (o.type != term.sum_type) continue;
    ExprPtr inst = substitute(term.body, {{term.sum_var, ObjRef::concrete(o.id)}});
    acc = acc ? make_add(acc, inst) : inst;
  }
  return acc ? acc : make_number(0);
}

namespace {

// subsets of candidate terms of size 0, 1 and 2 in complexity order
std::vector<std::vector<std::size_t>> term_subsets(const std::vector<TermSpec>& terms) {
  std::vector<std::size_t> order(terms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const int xa = complexity(terms[a].body);
    const int xb = complexity(terms[b].body);
    if (xa != xb) return xa < xb;
    return print_expr(terms[a].body) < print_expr(terms[b].body);
  });
  std::vector<std::vector<std::size_t>> out;
  out.push_back({});
  for (std::size_t i : order) out.push_back({i});
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = i + 1; j < order.size(); ++j) out.push_back({order[i], order[j]});
  return out;
}

}  // namespace

std::optional<Extension> extend_general_law(const LawDef& law, const std::string& failing_exp,
                                            const std::vector<TermSpec>& candidate_terms,
                                            KnowledgeBase& kb, WorkCounter* budget) {
  if (!law.general) return std::nullopt;
  const ConceptDef* subject = kb.find_concept(law.subject_concept);
  if (!subject) return std::nullopt;
  const ExperimentSpec* fspec = find_experiment(failing_exp);
  if (!fspec) return std::nullopt;
  const uint64_t fseed =
      seed_from(kb.measurement_seed(), "extend/" + law.name + "/" + failing_exp);
  const ExperimentData fdata = simulate(*fspec, {}, fseed, kb.policy());

  const ExprPtr base_atom = make_atom(law.subject_concept);
  const ExprPtr tatom = make_atom("t");

  try {
    for (const auto& subset : term_subsets(candidate_terms)) {
      std::vector<ExprPtr> term_exprs;  // concrete sums in the failing experiment
      std::vector<Rational> coefs;
      if (!subset.empty()) {
        bool usable = true;
        for (std::size_t idx : subset) {
          term_exprs.push_back(expand_term(candidate_terms[idx], fdata.roster));
          usable &= term_exprs.back()->kind != NodeKind::Number;  // term present here
        }
        if (!usable) continue;
        // fit coefficients from the d/dt balance in the failing experiment:
        // dE/dt + sum_k c_k dg_k/dt = 0 pointwise
        MeasuredValue dE;
        std::vector<MeasuredValue> dg;
        try {
          dE = eval(make_diff(base_atom, tatom), fdata, kb, budget, kb.policy());
          usable = dE.is_series();
          for (const auto& g : term_exprs) {
            dg.push_back(eval(make_diff(g, tatom), fdata, kb, budget, kb.policy()));
            usable &= dg.back().is_series();
          }
          if (!usable) continue;
        } catch (const EvalError&) {
          continue;
        }
        const std::size_t n = dE.series().n();
        std::vector<std::size_t> good;
        for (std::size_t i = 0; i < n; ++i) {
          bool ok = !dE.series().bad[i];
          for (const auto& g : dg) ok &= g.series().n() == n && !g.series().bad[i];
          if (ok) good.push_back(i);
        }
        if (good.size() < 3 * (subset.size() + 1)) continue;
        Eigen::MatrixXd A(good.size(), subset.size());
        Eigen::VectorXd y(good.size());
        for (std::size_t r = 0; r < good.size(); ++r) {
          double var = dE.series().std[good[r]] * dE.series().std[good[r]];
          for (const auto& g : dg) var += g.series().std[good[r]] * g.series().std[good[r]];
          const double wgt = 1.0 / std::sqrt(std::max(var, 1e-300));
          for (std::size_t c = 0; c < subset.size(); ++c)
            A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                wgt * dg[c].series().mean[good[r]];
          y(static_cast<Eigen::Index>(r)) = -wgt * dE.series().mean[good[r]];
        }
        const Eigen::MatrixXd AtA = A.transpose() * A;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(AtA);
        const Eigen::VectorXd beta = ldlt.solve(A.transpose() * y);
        const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(
            static_cast<Eigen::Index>(subset.size()), static_cast<Eigen::Index>(subset.size())));
        bool degenerate = false;
        for (std::size_t c = 0; c < subset.size(); ++c) {
          const double b = beta(static_cast<Eigen::Index>(c));
          const double s = std::sqrt(std::max(cov(static_cast<Eigen::Index>(c),
                                                  static_cast<Eigen::Index>(c)), 0.0));
          if (!std::isfinite(b) || std::abs(b) <= 3.0 * s) degenerate = true;
        }
        if (degenerate) continue;
        for (std::size_t c = 0; c < subset.size(); ++c) {
          const double b = beta(static_cast<Eigen::Index>(c));
          const double s = std::sqrt(std::max(cov(static_cast<Eigen::Index>(c),
                                                  static_cast<Eigen::Index>(c)), 0.0));
          coefs.push_back(snap(b, s));
        }
      }

      // assemble the modified expression for the failing experiment
      ExprPtr body = base_atom;
      for (std::size_t c = 0; c < subset.size(); ++c)
        body = make_add(body, make_mul(make_number(coefs[c]), term_exprs[c]));

      // (a) validate in the failing experiment
      LawDef candidate;
      candidate.kind = law.kind;
      candidate.general = false;
      candidate.subject_expr = body;
      if (!kb.validate_law(candidate, failing_exp, &fdata)) continue;
      // (b) re-validate across the previous scope with the same coefficients;
      // terms absent in an experiment contribute an exact zero
      bool holds = true;
      for (const std::string& exp : law.scope) {
        const ExperimentSpec* spec = find_experiment(exp);
        if (!spec) {
          holds = false;
          break;
        }
        ExprPtr scoped_body = base_atom;
        for (std::size_t c = 0; c < subset.size(); ++c) {
          const ExprPtr g = expand_term(candidate_terms[subset[c]], spec->objects);
          if (g->kind == NodeKind::Number) continue;  // absent: exact zero
          scoped_body = make_add(scoped_body, make_mul(make_number(coefs[c]), g));
        }
        LawDef scoped = candidate;
        scoped.subject_expr = scoped_body;
        holds &= kb.validate_law(scoped, exp);
      }
      if (!holds) continue;

      Extension ext;
      ext.unchanged = subset.empty();
      ext.scope = law.scope;
      ext.scope.insert(failing_exp);
      for (std::size_t c = 0; c < subset.size(); ++c)
        ext.terms.emplace_back(candidate_terms[subset[c]], coefs[c]);
      return ext;
    }
  } catch (const BudgetExhausted&) {
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace physlaw
