#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "configuration.hpp"
#include "forest.hpp"
#include "graph.hpp"
#include "jet.hpp"
#include "kernel.hpp"
#include "power.hpp"

namespace bphz {

/// Expansion center collides with the singular support of a remaining factor.
class ExceptionalConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One applied operator -t^{order} about the co-moving point sum_v weights[v] x_v.
struct ExpansionStep {
  VertexSet vertices;
  std::vector<double> weights;  // indexed by graph vertex, zero outside `vertices`
  int order = 0;
};

/// An original line factor G_e^exponent. `expanded_by` lists the steps (indices into
/// TermExpr::steps, in application order) whose Taylor expansion acts on this factor.
struct EdgeFactor {
  std::size_t edge = 0;
  int exponent = 1;
  std::vector<std::size_t> expanded_by;
};

/// Symbolic forest term: sign * prod_j [truncate s_j to order_j] prod_e G_e(arg_e(x; s)).
///
/// The moments (x_v - xbar)^alpha of every expansion are carried by the jet variables s_j
/// rather than listed one multi-index at a time; setting all s_j = 1 after truncation
/// gives the sum over retained multi-indices.
struct TermExpr {
  int sign = 1;
  std::vector<EdgeFactor> factors;
  std::vector<ExpansionStep> steps;
};

inline TermExpr initial_term(const FeynmanGraph& g) {
  TermExpr t;
  for (std::size_t e = 0; e < g.edges().size(); ++e) t.factors.push_back({e, g.edges()[e].multiplicity, {}});
  return t;
}

/// -t^d(gamma) P(gamma): lines inside gamma pass through, every other factor joins the expansion.
inline std::vector<TermExpr> apply_taylor_operator(const Subgraph& gamma, int d, const std::vector<TermExpr>& terms,
                                                   SubtractionMode mode = SubtractionMode::edge_count) {
  if (gamma.vertices.size() < 2) throw std::logic_error("Taylor operator on a part with fewer than 2 vertices");
  if (d < 0) throw std::invalid_argument("Taylor operator with negative degree");
  const auto& g = *gamma.parent;
  ExpansionStep step{gamma.vertices, subtraction_weights(gamma, mode), d};
  std::vector<TermExpr> out;
  out.reserve(terms.size());
  for (const auto& t : terms) {
    TermExpr r = t;
    const std::size_t j = r.steps.size();
    r.steps.push_back(step);
    for (auto& f : r.factors)
      if (!g.edges()[f.edge].inside(gamma.vertices)) f.expanded_by.push_back(j);
    r.sign = -r.sign;
    out.push_back(std::move(r));
  }
  return out;
}

struct EvalOptions {
  MetricParams metric{};
  Mode mode = Mode::euclidean;
  double delta_min = 1e-6;  // relative to the configuration scale
};

/// Co-moving point of one step at configuration x.
inline std::vector<double> step_center(const ExpansionStep& s, const Configuration& x) {
  std::vector<double> c(static_cast<std::size_t>(x.dim()), 0.0);
  for (auto v : s.vertices.indices())
    for (int mu = 0; mu < x.dim(); ++mu) c[static_cast<std::size_t>(mu)] += s.weights[v] * x.at(v, mu);
  return c;
}

/// Every subtraction point must keep a distance >= delta_min * scale from the vertices outside its part.
inline void check_non_exceptional(const FeynmanGraph& g, const std::vector<ExpansionStep>& steps, const Configuration& x,
                                  double delta_min) {
  const double tol = delta_min * std::max(x.scale(), 1e-300);
  for (const auto& s : steps) {
    const auto c = step_center(s, x);
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
      if (s.vertices.contains(v)) continue;
      double d2 = 0.0;
      for (int mu = 0; mu < x.dim(); ++mu) {
        const double d = x.at(v, mu) - c[static_cast<std::size_t>(mu)];
        d2 += d * d;
      }
      if (std::sqrt(d2) < tol)
        throw ExceptionalConfigurationError("subtraction point of " + g.label(s.vertices) + " meets vertex '" +
                                            g.vertex(v).id + "'");
    }
  }
}

namespace detail {

// Vertex coordinates as s-jets after the maps of `chain` (outermost step applied first).
inline std::vector<Jet> mapped_coordinates(const std::vector<ExpansionStep>& steps, const std::vector<std::size_t>& chain,
                                           const Configuration& x, const JetSpacePtr& space) {
  const std::size_t d = static_cast<std::size_t>(x.dim());
  std::vector<Jet> y;
  y.reserve(x.raw().size());
  for (double c : x.raw()) y.emplace_back(space, c);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const auto& st = steps[*it];
    const Jet s = Jet::variable(space, *it, 0.0);
    const auto members = st.vertices.indices();
    for (std::size_t mu = 0; mu < d; ++mu) {
      Jet c(space);
      for (auto w : members) c += st.weights[w] * y[w * d + mu];
      for (auto v : members) y[v * d + mu] = c + s * (y[v * d + mu] - c);
    }
  }
  return y;
}

}  // namespace detail

/// Value of one symbolic term at x.
inline cplx evaluate_term(const FeynmanGraph& g, const TermExpr& t, const Configuration& x, const EvalOptions& o) {
  require_epsilon(o.metric, o.mode);
  MetricParams mp = o.metric;
  mp.dimension = g.dimension();
  const std::size_t d = static_cast<std::size_t>(x.dim());
  if (t.steps.empty()) {
    cplx v = static_cast<double>(t.sign);
    std::vector<double> y(d);
    for (const auto& f : t.factors) {
      const auto& e = g.edges()[f.edge];
      for (std::size_t mu = 0; mu < d; ++mu) y[mu] = x.at(e.source, static_cast<int>(mu)) - x.at(e.target, static_cast<int>(mu));
      if (euclidean_norm(y) == 0.0)
        throw DiagonalError("configuration on a graph diagonal: vertices '" + g.vertex(e.source).id + "' and '" +
                            g.vertex(e.target).id + "' coincide");
      v *= edge_factor(kernel_spec(g, e), y, mp, o.mode, f.exponent);
    }
    return v;
  }
  check_non_exceptional(g, t.steps, x, o.delta_min);
  std::vector<int> caps;
  for (const auto& s : t.steps) caps.push_back(s.order);
  const auto space = JetSpace::box(caps);
  const double tol = o.delta_min * std::max(x.scale(), 1e-300);

  std::map<std::vector<std::size_t>, std::vector<Jet>> cache;
  Jet prod(space, static_cast<double>(t.sign));
  std::vector<double> yc(d);
  std::vector<Jet> yj;
  for (const auto& f : t.factors) {
    const auto& e = g.edges()[f.edge];
    const auto spec = kernel_spec(g, e);
    if (f.expanded_by.empty()) {
      for (std::size_t mu = 0; mu < d; ++mu) yc[mu] = x.at(e.source, static_cast<int>(mu)) - x.at(e.target, static_cast<int>(mu));
      if (euclidean_norm(yc) == 0.0)
        throw DiagonalError("configuration on a graph diagonal: vertices '" + g.vertex(e.source).id + "' and '" +
                            g.vertex(e.target).id + "' coincide");
      prod *= edge_factor(spec, yc, mp, o.mode, f.exponent);
      continue;
    }
    auto it = cache.find(f.expanded_by);
    if (it == cache.end()) it = cache.emplace(f.expanded_by, detail::mapped_coordinates(t.steps, f.expanded_by, x, space)).first;
    const auto& y = it->second;
    yj.clear();
    double r2 = 0.0;
    for (std::size_t mu = 0; mu < d; ++mu) {
      yj.push_back(y[e.source * d + mu] - y[e.target * d + mu]);
      r2 += std::norm(yj.back().constant());
    }
    if (std::sqrt(r2) < tol)
      throw ExceptionalConfigurationError("expanded line " + g.vertex(e.source).id + "-" + g.vertex(e.target).id +
                                          " is singular at the expansion point");
    prod *= edge_factor_jet(spec, yj, mp, o.mode, f.exponent);
  }
  return prod.sum();
}

inline cplx evaluate_terms(const FeynmanGraph& g, const std::vector<TermExpr>& ts, const Configuration& x,
                           const EvalOptions& o) {
  cplx s{};
  for (const auto& t : ts) s += evaluate_term(g, t, x, o);
  return s;
}

/// Real polynomial in n variables, as a sparse map from exponent vectors to coefficients.
class Polynomial {
 public:
  using Index = std::vector<int>;

  Polynomial() = default;
  explicit Polynomial(std::size_t nvars) : n_(nvars) {}

  std::size_t nvars() const { return n_; }
  const std::map<Index, double>& terms() const { return c_; }

  void add(const Index& a, double v) {
    if (a.size() != n_) throw std::invalid_argument("multi-index length mismatch");
    if (v == 0.0) return;
    auto& slot = c_[a];
    slot += v;
    if (slot == 0.0) c_.erase(a);
  }
  double coeff(const Index& a) const {
    auto it = c_.find(a);
    return it == c_.end() ? 0.0 : it->second;
  }
  int degree() const {
    int d = -1;
    for (const auto& [a, v] : c_) d = std::max(d, total(a));
    return d;
  }

  double evaluate(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& [a, v] : c_) {
      double m = v;
      for (std::size_t i = 0; i < n_; ++i) m *= std::pow(x[i], a[i]);
      s += m;
    }
    return s;
  }

  /// (D^alpha f)(c) / alpha!
  double taylor_coefficient(const Index& alpha, std::span<const double> c) const {
    double s = 0.0;
    for (const auto& [b, v] : c_) {
      double m = v;
      bool ok = true;
      for (std::size_t i = 0; i < n_ && ok; ++i) {
        if (b[i] < alpha[i]) {
          ok = false;
          break;
        }
        m *= binomial(b[i], alpha[i]) * std::pow(c[i], b[i] - alpha[i]);
      }
      if (ok) s += m;
    }
    return s;
  }

  /// Expands (x - c)^alpha into monomials.
  static Polynomial shifted_monomial(const Index& alpha, std::span<const double> c) {
    Polynomial p(alpha.size());
    Index e(alpha.size(), 0);
    expand_shift(alpha, c, 0, 1.0, e, p);
    return p;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) {
    for (const auto& [k, v] : b.c_) a.add(k, v);
    return a;
  }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) {
    for (const auto& [k, v] : b.c_) a.add(k, -v);
    return a;
  }
  friend Polynomial operator*(double s, Polynomial a) {
    Polynomial r(a.n_);
    for (const auto& [k, v] : a.c_) r.add(k, s * v);
    return r;
  }
  friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.n_ == b.n_ && a.c_ == b.c_; }

  static int total(const Index& a) {
    int s = 0;
    for (auto v : a) s += v;
    return s;
  }

  /// All multi-indices of length n with |alpha| <= d, graded.
  static std::vector<Index> indices_up_to(std::size_t n, int d) {
    std::vector<Index> out;
    Index cur(n, 0);
    for (int deg = 0; deg <= d; ++deg) fill(cur, 0, deg, out);
    return out;
  }

 private:
  static double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
  }
  static void expand_shift(const Index& alpha, std::span<const double> c, std::size_t i, double coef, Index& e,
                           Polynomial& p) {
    if (i == alpha.size()) {
      p.add(e, coef);
      return;
    }
    for (int k = 0; k <= alpha[i]; ++k) {
      e[i] = k;
      const double term = binomial(alpha[i], k) * std::pow(-c[i], alpha[i] - k);
      expand_shift(alpha, c, i + 1, coef * term, e, p);
    }
    e[i] = 0;
  }
  static void fill(Index& cur, std::size_t i, int remaining, std::vector<Index>& out) {
    if (i + 1 == cur.size()) {
      cur[i] = remaining;
      out.push_back(cur);
      cur[i] = 0;
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      cur[i] = k;
      fill(cur, i + 1, remaining - k, out);
    }
    cur[i] = 0;
  }

  std::size_t n_ = 0;
  std::map<Index, double> c_;
};

/// t^d f about c, as a polynomial in x.
inline Polynomial taylor_polynomial(const Polynomial& f, int d, std::span<const double> c) {
  Polynomial out(f.nvars());
  for (const auto& a : Polynomial::indices_up_to(f.nvars(), d)) {
    const double tc = f.taylor_coefficient(a, c);
    if (tc != 0.0) out = out + tc * Polynomial::shifted_monomial(a, c);
  }
  return out;
}

struct CollapseResult {
  Polynomial composed;             // t^d_{xbar} t^{d'}_{xbar'} f
  Polynomial collapsed;            // sum_{|alpha|<=d} C(alpha) (x-c)^alpha/alpha! D^alpha f(c)
  std::vector<double> center;      // c
  std::map<Polynomial::Index, double> coefficients;  // C(alpha)
  bool diagonal_about_outer = true;  // composed operator is diagonal in the (x - xbar)^alpha basis
};

/// Composition of two Taylor operators on f and its single-operator form.
///
/// The coefficients C(alpha) are read off by applying the composition to the basis
/// (x - c)^alpha. With xbar == xbar' the composition is diagonal about xbar; otherwise it
/// is diagonal about the inner center xbar' only, and that center is used.
inline CollapseResult compose_collapse(int d, int dprime, std::span<const double> xbar, std::span<const double> xbar_inner,
                                       const Polynomial& f) {
  if (dprime > d) throw std::invalid_argument("compose_collapse expects d' <= d");
  const std::size_t n = f.nvars();
  CollapseResult r;
  r.composed = taylor_polynomial(taylor_polynomial(f, dprime, xbar_inner), d, xbar);
  const int probe_degree = std::max(d, f.degree());

  auto composed_op = [&](const Polynomial& p) { return taylor_polynomial(taylor_polynomial(p, dprime, xbar_inner), d, xbar); };
  auto is_diagonal_about = [&](std::span<const double> c) {
    for (const auto& a : Polynomial::indices_up_to(n, probe_degree)) {
      const Polynomial img = composed_op(Polynomial::shifted_monomial(a, c));
      for (const auto& b : Polynomial::indices_up_to(n, probe_degree))
        if (b != a && img.taylor_coefficient(b, c) != 0.0) return false;
    }
    return true;
  };
  r.diagonal_about_outer = is_diagonal_about(xbar);
  r.center.assign(r.diagonal_about_outer ? xbar.begin() : xbar_inner.begin(),
                  r.diagonal_about_outer ? xbar.end() : xbar_inner.end());
  r.collapsed = Polynomial(n);
  for (const auto& a : Polynomial::indices_up_to(n, d)) {
    const Polynomial img = composed_op(Polynomial::shifted_monomial(a, r.center));
    const double ca = img.taylor_coefficient(a, r.center);
    r.coefficients[a] = ca;
    const double fa = f.taylor_coefficient(a, r.center);
    if (ca != 0.0 && fa != 0.0) r.collapsed = r.collapsed + (ca * fa) * Polynomial::shifted_monomial(a, r.center);
  }
  return r;
}

}  // namespace bphz
