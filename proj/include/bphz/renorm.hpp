#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "configuration.hpp"
#include "forest.hpp"
#include "graph.hpp"
#include "integrate.hpp"
#include "jet.hpp"
#include "kernel.hpp"
#include "power.hpp"
#include "taylor.hpp"

namespace bphz {

/// exp(1 - 1/(1 - r2)) inside the unit ball, 0 outside; peak value 1.
inline double bump(double r2) { return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0; }

/// Product test function over vertices: a bump on each ball region, the constant 1 on each box.
struct TestFunction {
  std::vector<Region> regions;  // indexed by graph vertex

  static TestFunction bumps(std::size_t nvertices, int dim, double radius, std::vector<double> center = {}) {
    if (center.empty()) center.assign(static_cast<std::size_t>(dim), 0.0);
    TestFunction f;
    f.regions.assign(nvertices, Region{Region::Kind::ball, center, radius});
    return f;
  }

  bool inside(const Configuration& x) const {
    for (std::size_t v = 0; v < regions.size(); ++v) {
      const auto& r = regions[v];
      if (r.kind == Region::Kind::ball) {
        double r2 = 0.0;
        for (int mu = 0; mu < x.dim(); ++mu) {
          const double t = x.at(v, mu) - r.center[static_cast<std::size_t>(mu)];
          r2 += t * t;
        }
        if (r2 >= r.radius * r.radius) return false;
      } else {
        for (int mu = 0; mu < x.dim(); ++mu)
          if (std::abs(x.at(v, mu) - r.center[static_cast<std::size_t>(mu)]) > r.radius) return false;
      }
    }
    return true;
  }

  double value(const Configuration& x) const {
    double f = 1.0;
    for (std::size_t v = 0; v < regions.size(); ++v) {
      const auto& r = regions[v];
      if (r.kind == Region::Kind::box) {
        for (int mu = 0; mu < x.dim(); ++mu)
          if (std::abs(x.at(v, mu) - r.center[static_cast<std::size_t>(mu)]) > r.radius) return 0.0;
        continue;
      }
      double r2 = 0.0;
      for (int mu = 0; mu < x.dim(); ++mu) {
        const double t = (x.at(v, mu) - r.center[static_cast<std::size_t>(mu)]) / r.radius;
        r2 += t * t;
      }
      f *= bump(r2);
      if (f == 0.0) return 0.0;
    }
    return f;
  }

  /// Value as a jet; y holds the vertex coordinates (vertex-major) as jets.
  Jet value_jet(std::span<const Jet> y, int dim) const {
    const auto& sp = y[0].space();
    Jet f(sp, 1.0);
    const std::size_t d = static_cast<std::size_t>(dim);
    for (std::size_t v = 0; v < regions.size(); ++v) {
      const auto& r = regions[v];
      if (r.kind == Region::Kind::box) {
        for (std::size_t mu = 0; mu < d; ++mu)
          if (std::abs(y[v * d + mu].constant().real() - r.center[mu]) > r.radius) return Jet(sp);
        continue;
      }
      Jet r2(sp);
      for (std::size_t mu = 0; mu < d; ++mu) {
        const Jet t = (y[v * d + mu] - r.center[mu]) * (1.0 / r.radius);
        r2 += t * t;
      }
      if (!(r2.constant().real() < 1.0)) return Jet(sp);
      Jet one_minus = Jet(sp, 1.0) - r2;
      f *= exp(Jet(sp, 1.0) - reciprocal(one_minus));
    }
    return f;
  }
};

struct RenormOptions {
  EvalOptions eval{};
  SubtractionMode point_mode = SubtractionMode::edge_count;
  ForestOptions forest{};
};

/// Forest-formula evaluator for one graph. A renormalization part that contains every line of
/// the graph (the graph itself, when it has no external legs) is not applied to the kernel: its
/// Taylor operator acts on the test function in `pair`.
class RWeight {
 public:
  RWeight(const FeynmanGraph& g, RenormOptions opt) : g_(&g), opt_(std::move(opt)) {
    fam_ = enumerate_forests(g, opt_.forest);
    for (std::size_t i = 0; i < fam_.all_parts.size(); ++i)
      if (fam_.all_parts[i].subgraph.edges.size() == g.edges().size()) top_ = i;
    for (std::size_t k = 0; k < fam_.forests.size(); ++k) {
      if (top_ && fam_.forests[k].contains(*top_)) continue;
      proper_.push_back(k);
      terms_.push_back(forest_terms(fam_.forests[k]));
    }
  }

  const FeynmanGraph& graph() const { return *g_; }
  const RenormOptions& options() const { return opt_; }
  const ForestFamily& family() const { return fam_; }
  std::optional<std::size_t> top_part() const { return top_; }
  const std::vector<std::size_t>& proper_forests() const { return proper_; }

  ExpansionStep step_of(std::size_t part) const {
    const auto& p = fam_.all_parts[part];
    return {p.vertices(), subtraction_weights(p.subgraph, opt_.point_mode), p.subtraction_degree()};
  }
  std::optional<ExpansionStep> top_step() const {
    if (!top_) return std::nullopt;
    return step_of(*top_);
  }

  /// Symbolic term of one forest; `order` overrides the application order (any linear extension).
  std::vector<TermExpr> forest_terms(const Forest& f, const std::vector<std::size_t>& order = {}) const {
    if (top_ && f.contains(*top_))
      throw std::invalid_argument("forest contains the top-level part, which acts on the test function");
    const auto ord = order.empty() ? application_order(fam_, f) : order;
    std::vector<TermExpr> ts{initial_term(*g_)};
    for (auto p : ord) {
      const auto& part = fam_.all_parts[p];
      ts = apply_taylor_operator(part.subgraph, part.subtraction_degree(), ts, opt_.point_mode);
    }
    return ts;
  }

  cplx forest_term(const Forest& f, const Configuration& x, const std::vector<std::size_t>& order = {}) const {
    return evaluate_terms(*g_, forest_terms(f, order), x, opt_.eval);
  }

  /// Sum over forests that do not contain the top-level part.
  cplx proper(const Configuration& x) const {
    cplx s{};
    for (const auto& ts : terms_) s += evaluate_terms(*g_, ts, x, opt_.eval);
    return s;
  }

  cplx unsubtracted(const Configuration& x) const { return weight_eval(*g_, x, opt_.eval.metric, opt_.eval.mode); }

 private:
  const FeynmanGraph* g_;
  RenormOptions opt_;
  ForestFamily fam_;
  std::optional<std::size_t> top_;
  std::vector<std::size_t> proper_;
  std::vector<std::vector<TermExpr>> terms_;
};

inline cplx r_weight_proper(const RWeight& r, const Configuration& x) { return r.proper(x); }

/// Taylor polynomial of f in the coordinates of step.vertices about the co-moving point,
/// times the indicator of the test-function support at x.
inline cplx test_taylor(const TestFunction& f, const ExpansionStep& step, const Configuration& x) {
  if (!f.inside(x)) return 0.0;
  const auto space = JetSpace::box({step.order});
  const auto y = detail::mapped_coordinates({step}, {0}, x, space);
  return f.value_jet(y, x.dim()).sum();
}

/// f(x) minus the top-level Taylor polynomial, when the graph has a top-level part.
inline cplx subtracted_test_function(const RWeight& r, const TestFunction& f, const Configuration& x) {
  const auto top = r.top_step();
  cplx v = f.value(x);
  if (top) v -= test_taylor(f, *top, x);
  return v;
}

inline double edge_kappa(const FeynmanGraph& g, const Edge& e) {
  return e.multiplicity * edge_uv_sd(kernel_spec(g, e)) - 1.0;
}

inline SamplerPlan pairing_plan(const FeynmanGraph& g, const TestFunction& f) {
  std::vector<std::size_t> all;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) all.push_back(v);
  return make_sampler_plan(g, all, f.regions, [&](const Edge& e) { return edge_kappa(g, e); });
}

struct PairResult {
  Estimate value;
  std::size_t samples = 0;
  std::size_t failures = 0;
  Integrator integrator = Integrator::mc;
};

/// <R u, f> with the top-level subtraction on f, integrated over the support of f.
inline PairResult pair(const RWeight& r, const TestFunction& f, const IntegratorOptions& io) {
  const auto& g = r.graph();
  if (f.regions.size() != g.vertex_count()) throw std::invalid_argument("test function needs one region per vertex");
  const auto plan = pairing_plan(g, f);
  Configuration base(g.vertex_count(), g.dimension());
  auto integrand = [&](const Configuration& x, std::span<cplx> out) {
    const cplx ft = subtracted_test_function(r, f, x);
    out[0] = ft == cplx{} ? cplx{} : r.proper(x) * ft;
  };
  const auto est = integrate(plan, base, 1, integrand, io);
  return {est.components[0], est.samples, est.failures, est.integrator};
}

/// Smooth cutoff in the relative radius of a part: 1 for rho <= rho_w/2, 0 for rho >= rho_w.
struct Cutoff {
  double rho_w = 0.5;

  static Jet smooth_step(const Jet& t) {
    const double c = t.constant().real();
    const auto& sp = t.space();
    if (c >= 1.0) return Jet(sp, 1.0);
    if (c <= 0.0) return Jet(sp, 0.0);
    const Jet e0 = exp(-reciprocal(t));
    const Jet e1 = exp(-reciprocal(Jet(sp, 1.0) - t));
    return e0 * reciprocal(e0 + e1);
  }

  Jet value_jet(const ExpansionStep& part, std::span<const Jet> y, int dim) const {
    const auto& sp = y[0].space();
    const std::size_t d = static_cast<std::size_t>(dim);
    const auto members = part.vertices.indices();
    Jet rho2(sp);
    for (std::size_t mu = 0; mu < d; ++mu) {
      Jet c(sp);
      for (auto w : members) c += part.weights[w] * y[w * d + mu];
      for (auto v : members) {
        const Jet t = y[v * d + mu] - c;
        rho2 += t * t;
      }
    }
    const double r0 = std::sqrt(std::max(rho2.constant().real(), 0.0));
    if (r0 <= 0.5 * rho_w) return Jet(sp, 1.0);
    if (r0 >= rho_w) return Jet(sp, 0.0);
    // t = 2 - 2 rho / rho_w
    const int n = sp->max_degree();
    std::vector<cplx> sq(static_cast<std::size_t>(n) + 1);
    double coef = 1.0;  // binomial(1/2, k)
    for (int k = 0; k <= n; ++k) {
      sq[static_cast<std::size_t>(k)] = coef * std::pow(r0 * r0, 0.5 - k);
      coef *= (0.5 - k) / (k + 1.0);
    }
    const Jet rho = rho2.compose(sq);
    return smooth_step(Jet(sp, 2.0) - rho * (2.0 / rho_w));
  }

  double value(const ExpansionStep& part, const Configuration& x) const {
    const auto sp = JetSpace::box({});
    std::vector<Jet> y;
    for (double c : x.raw()) y.emplace_back(sp, c);
    return value_jet(part, y, x.dim()).constant().real();
  }
};

struct EgReport {
  Estimate lhs;          // <(1 - t) u, f>
  Estimate u_wf;         // <u, W f>
  Estimate tu_wf;        // <t u, W f>
  Estimate rem_twf;      // <(1 - t) u, t[w] f>
  cplx rhs;              // u_wf - tu_wf + rem_twf
  double abs_discrepancy = 0.0;
  double rel_discrepancy = 0.0;
  std::size_t samples = 0;
  std::size_t failures = 0;
  bool top_level = false;
};

/// Evaluates both sides of <(1-t)u, f> = <u, Wf> - <tu, Wf> + <(1-t)u, t[w]f> on common
/// sample points, with t[w]f = chi * t f and Wf = f - t[w]f.
inline EgReport eg_compare(const RWeight& r, const TestFunction& f, const Cutoff& chi, const IntegratorOptions& io) {
  const auto& g = r.graph();
  const auto& fam = r.family();
  if (fam.all_parts.size() != 1) throw std::invalid_argument("eg_compare expects a graph with exactly one renormalization part");
  const ExpansionStep step = r.step_of(0);
  const bool top = r.top_part().has_value();
  const int dim = g.dimension();
  const auto& eo = r.options().eval;
  const Forest single{{0}};

  // T applied to h(y) = f_coef f(y) + chitf_coef chi(y) (T f)(y); s expands about x, tau inside T f.
  auto t_of = [&](const Configuration& x, double f_coef, double chitf_coef) -> cplx {
    if (!f.inside(x)) return 0.0;
    const std::vector<ExpansionStep> steps{step, step};  // 0: inner (tau), 1: outer (s)
    const auto space = JetSpace::box({step.order, step.order});
    const auto y_outer = detail::mapped_coordinates(steps, {1}, x, space);
    const auto y_both = detail::mapped_coordinates(steps, {0, 1}, x, space);
    Jet h(space);
    if (f_coef != 0.0) {
      h += f_coef * f.value_jet(y_outer, dim);
    }
    if (chitf_coef != 0.0) {
      bool inner_inside = true;
      for (std::size_t v = 0; v < g.vertex_count() && inner_inside; ++v) {
        const auto& reg = f.regions[v];
        double r2 = 0.0;
        for (std::size_t mu = 0; mu < static_cast<std::size_t>(dim); ++mu) {
          const double t = y_outer[v * static_cast<std::size_t>(dim) + mu].constant().real() - reg.center[mu];
          r2 += t * t;
        }
        if (reg.kind == Region::Kind::ball && r2 >= reg.radius * reg.radius) inner_inside = false;
      }
      if (inner_inside) h += chitf_coef * (chi.value_jet(step, y_outer, dim) * f.value_jet(y_both, dim));
    }
    return h.sum();
  };

  Configuration base(g.vertex_count(), dim);
  const auto plan = pairing_plan(g, f);
  auto integrand = [&](const Configuration& x, std::span<cplx> out) {
    const cplx fx = f.value(x);
    const cplx tf = test_taylor(f, step, x);
    const cplx ctf = chi.value(step, x) * tf;
    const cplx wf = fx - ctf;
    if (top) {
      const cplx u = r.unsubtracted(x);
      out[0] = u * (fx - tf);
      out[1] = u * wf;
      out[2] = u * t_of(x, 1.0, -1.0);                  // t(W f)
      out[3] = u * (ctf - t_of(x, 0.0, 1.0));           // (1 - t)(chi t f)
    } else {
      const cplx u = r.unsubtracted(x);
      const cplx tu = -evaluate_terms(g, r.forest_terms(single), x, eo);
      out[0] = (u - tu) * fx;
      out[1] = u * wf;
      out[2] = tu * wf;
      out[3] = (u - tu) * ctf;
    }
  };
  const auto est = integrate(plan, base, 4, integrand, io);
  EgReport rep;
  rep.top_level = top;
  rep.lhs = est.components[0];
  rep.u_wf = est.components[1];
  rep.tu_wf = est.components[2];
  rep.rem_twf = est.components[3];
  rep.rhs = rep.u_wf.value - rep.tu_wf.value + rep.rem_twf.value;
  rep.abs_discrepancy = std::abs(rep.lhs.value - rep.rhs);
  rep.rel_discrepancy = rep.abs_discrepancy / std::max(std::abs(rep.lhs.value), 1e-300);
  rep.samples = est.samples;
  rep.failures = est.failures;
  return rep;
}

/// Point-supported ambiguity sum_alpha c_alpha D^alpha delta on the diagonal of one part.
/// Multi-indices run over the coordinate slots (vertex x component) of the part's vertices.
struct CountertermSpec {
  Subgraph part;
  int degree = 0;
  std::map<std::vector<int>, cplx> coefficients;
  int external_fields = 0;       // line ends leaving the part
  int external_derivatives = 0;  // derivatives on those lines
  int max_order = 0;             // largest |alpha| with a coefficient

  int dimension_bar(const std::vector<int>& alpha) const {
    int a = 0;
    for (auto v : alpha) a += v;
    return external_fields + external_derivatives + a;
  }
};

inline CountertermSpec counterterm_record(const Subgraph& part, int degree, std::map<std::vector<int>, cplx> coefficients) {
  const auto& g = *part.parent;
  const std::size_t slots = part.vertices.size() * static_cast<std::size_t>(g.dimension());
  CountertermSpec s{part, degree, std::move(coefficients), 0, 0, 0};
  for (const auto& [alpha, c] : s.coefficients) {
    if (alpha.size() != slots)
      throw std::invalid_argument("counterterm multi-index must have " + std::to_string(slots) + " entries");
    int a = 0;
    for (auto v : alpha) {
      if (v < 0) throw std::invalid_argument("negative multi-index entry");
      a += v;
    }
    if (a > degree)
      throw std::invalid_argument("counterterm order " + std::to_string(a) + " exceeds the degree " + std::to_string(degree) +
                                  " of " + part.label());
    s.max_order = std::max(s.max_order, a);
  }
  for (const auto& e : g.edges()) {
    const bool in_s = part.vertices.contains(e.source), in_t = part.vertices.contains(e.target);
    if (in_s != in_t) {
      s.external_fields += e.multiplicity;
      s.external_derivatives += e.multiplicity * e.derivatives;
    }
  }
  return s;
}

inline CountertermSpec counterterm_record(const RenormPart& part, std::map<std::vector<int>, cplx> coefficients) {
  return counterterm_record(part.subgraph, part.subtraction_degree(), std::move(coefficients));
}

/// Graph with the vertices of one part merged into a single vertex.
struct ContractedGraph {
  int dimension = 4;
  std::vector<std::string> ids;
  std::vector<Edge> edges;
  std::size_t merged = 0;
  std::vector<std::size_t> new_index;  // old vertex -> new vertex
};

inline ContractedGraph contract(const FeynmanGraph& g, const Subgraph& gamma) {
  ContractedGraph c;
  c.dimension = g.dimension();
  c.new_index.assign(g.vertex_count(), 0);
  const auto members = gamma.vertices.indices();
  c.merged = 0;
  c.ids.push_back(g.label(gamma.vertices));
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    if (gamma.vertices.contains(v)) {
      c.new_index[v] = 0;
    } else {
      c.new_index[v] = c.ids.size();
      c.ids.push_back(g.vertex(v).id);
    }
  }
  for (const auto& e : g.edges()) {
    if (e.inside(gamma.vertices)) continue;
    Edge ne{c.new_index[e.source], c.new_index[e.target], e.multiplicity, e.mass, e.derivatives};
    if (ne.source == ne.target) throw std::invalid_argument("contraction produces a self-loop");
    bool merged = false;
    for (auto& x : c.edges) {
      const bool same_ends = (x.source == ne.source && x.target == ne.target) || (x.source == ne.target && x.target == ne.source);
      if (same_ends && x.mass == ne.mass && x.derivatives == ne.derivatives && (ne.derivatives == 0 || x.source == ne.source)) {
        x.multiplicity += ne.multiplicity;
        merged = true;
        break;
      }
    }
    if (!merged) c.edges.push_back(ne);
  }
  return c;
}

/// sum_alpha c_alpha <u[G/gamma] D^alpha delta_gamma, f>
///   = int u[G/gamma](xbar, rest) sum_alpha c_alpha (-1)^|alpha| (D^alpha f)(xbar, ..., xbar, rest).
inline PairResult apply_counterterm(const FeynmanGraph& g, const CountertermSpec& ct, const TestFunction& f,
                                    const EvalOptions& eo, const IntegratorOptions& io) {
  const auto c = contract(g, ct.part);
  const int dim = g.dimension();
  const std::size_t d = static_cast<std::size_t>(dim);
  const auto members = ct.part.vertices.indices();
  std::vector<std::size_t> verts;
  std::vector<Region> regs;
  for (std::size_t v = 0; v < c.ids.size(); ++v) verts.push_back(v);
  regs.push_back(f.regions[members[0]]);
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    if (!ct.part.vertices.contains(v)) regs.push_back(f.regions[v]);
  const auto plan = make_sampler_plan(dim, c.edges, verts, regs, [&](const Edge& e) {
    return e.multiplicity * edge_uv_sd(KernelSpec{e.mass, e.derivatives, dim}) - 1.0;
  });
  MetricParams mp = eo.metric;
  mp.dimension = dim;
  Configuration base(c.ids.size(), dim);
  auto integrand = [&](const Configuration& z, std::span<cplx> out) {
    out[0] = 0.0;
    Configuration x(g.vertex_count(), dim);
    for (std::size_t v = 0; v < g.vertex_count(); ++v)
      for (int mu = 0; mu < dim; ++mu) x.at(v, mu) = z.at(c.new_index[v], mu);
    // derivatives of f in the part's coordinate slots at the merged point
    std::vector<double> center;
    for (auto v : members)
      for (int mu = 0; mu < dim; ++mu) center.push_back(x.at(v, mu));
    const Jet fj = jet_of(
        [&](std::span<const Jet> slots) {
          std::vector<Jet> y;
          const auto& sp = slots[0].space();
          for (double xv : x.raw()) y.emplace_back(sp, xv);
          for (std::size_t k = 0; k < members.size(); ++k)
            for (std::size_t mu = 0; mu < d; ++mu) y[members[k] * d + mu] = slots[k * d + mu];
          return f.value_jet(y, dim);
        },
        center, ct.max_order);
    cplx dsum{};
    for (const auto& [alpha, coef] : ct.coefficients) {
      double fact = 1.0;
      int a = 0;
      for (auto v : alpha) {
        fact *= detail::factorial(v);
        a += v;
      }
      dsum += coef * (a % 2 == 0 ? 1.0 : -1.0) * fact * fj.coeff(alpha);
    }
    if (dsum == cplx{}) return;
    cplx w = 1.0;
    std::vector<double> y(d);
    for (const auto& e : c.edges) {
      for (std::size_t mu = 0; mu < d; ++mu) y[mu] = z.at(e.source, static_cast<int>(mu)) - z.at(e.target, static_cast<int>(mu));
      w *= edge_factor(KernelSpec{e.mass, e.derivatives, dim}, y, mp, eo.mode, e.multiplicity);
    }
    out[0] = w * dsum;
  };
  const auto est = integrate(plan, base, 1, integrand, io);
  return {est.components[0], est.samples, est.failures, est.integrator};
}

/// Solves base + c0 * unit = target for c0.
inline cplx reconcile_c0(cplx target, cplx base, cplx unit) {
  if (unit == cplx{}) throw std::domain_error("counterterm pairing vanishes; cannot solve for c0");
  return (target - base) / unit;
}

}  // namespace bphz
