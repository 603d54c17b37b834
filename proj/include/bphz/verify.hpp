#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "configuration.hpp"
#include "graph.hpp"
#include "integrate.hpp"
#include "kernel.hpp"
#include "power.hpp"
#include "renorm.hpp"

namespace bphz {

struct SlopeFit {
  std::vector<double> grid;
  std::vector<double> samples;  // |value| per grid point
  double slope = 0.0;           // fitted scaling degree (sign chosen so that 1/x^2 gives +2)
  double intercept = 0.0;
  double r2 = 0.0;
  std::optional<double> target;
  std::vector<double> local_slopes;
  bool superpolynomial = false;
};

struct LineFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

/// Least squares y = a + b x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) throw std::invalid_argument("fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
  LineFit f;
  f.slope = cxy / vx;
  f.intercept = (sy - f.slope * sx) / n;
  f.r2 = vy > 0 ? cxy * cxy / (vx * vy) : 1.0;
  return f;
}

using ConfigEvaluator = std::function<cplx(const Configuration&)>;

namespace detail {
inline SlopeFit slope_from(std::vector<double> grid, std::vector<double> vals) {
  SlopeFit s;
  s.grid = grid;
  s.samples = vals;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(vals[i] > 0.0) || !std::isfinite(vals[i])) throw std::domain_error("evaluator returned zero or non-finite value on the grid");
    lx.push_back(std::log(grid[i]));
    ly.push_back(std::log(vals[i]));
  }
  const auto f = fit_line(lx, ly);
  s.slope = -f.slope;
  s.intercept = f.intercept;
  s.r2 = f.r2;
  for (std::size_t i = 0; i + 1 < lx.size(); ++i) s.local_slopes.push_back(-(ly[i + 1] - ly[i]) / (lx[i + 1] - lx[i]));
  return s;
}
}  // namespace detail

/// x_v = base_v + lambda * dir_v for v in I; other vertices stay at base. Grid decreasing.
inline SlopeFit estimate_uv_sd(const ConfigEvaluator& eval, VertexSet I, const Configuration& base, const Configuration& dir,
                               const std::vector<double>& grid) {
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] < grid[i - 1])) throw std::invalid_argument("UV grid must be strictly decreasing");
  std::vector<double> vals;
  for (double lam : grid) {
    Configuration x = base;
    for (auto v : I.indices())
      for (int mu = 0; mu < x.dim(); ++mu) x.at(v, mu) = base.at(v, mu) + lam * dir.at(v, mu);
    vals.push_back(std::abs(eval(x)));
  }
  return detail::slope_from(grid, vals);
}

/// x_v = Lambda * dir_v for v in I; other vertices stay at base. Grid increasing.
/// Superpolynomial decay is flagged when the local slopes keep growing through the grid.
inline SlopeFit estimate_ir_sd(const ConfigEvaluator& eval, VertexSet I, const Configuration& base, const Configuration& dir,
                               const std::vector<double>& grid) {
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("IR grid must be strictly increasing");
  std::vector<double> vals;
  for (double lam : grid) {
    Configuration x = base;
    for (auto v : I.indices())
      for (int mu = 0; mu < x.dim(); ++mu) x.at(v, mu) = lam * dir.at(v, mu);
    const double a = std::abs(eval(x));
    if (a == 0.0) break;  // underflow: stop the grid here
    vals.push_back(a);
  }
  std::vector<double> g(grid.begin(), grid.begin() + static_cast<long>(vals.size()));
  auto s = detail::slope_from(g, vals);
  bool increasing = s.local_slopes.size() >= 2;
  for (std::size_t i = 1; i < s.local_slopes.size(); ++i)
    if (!(s.local_slopes[i] > s.local_slopes[i - 1])) increasing = false;
  s.superpolynomial = increasing && s.local_slopes.back() - s.local_slopes.front() > 1.0;
  return s;
}

enum class Verdict { converges, diverges_log, diverges_power, diverges, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::converges: return "converges";
    case Verdict::diverges_log: return "diverges-log";
    case Verdict::diverges_power: return "diverges-power";
    case Verdict::diverges: return "diverges";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct ProbeRow {
  double parameter = 0.0;
  cplx value;
  double error = 0.0;
};

struct ProbeReport {
  std::string label;
  std::vector<ProbeRow> rows;
  Verdict verdict = Verdict::inconclusive;
  std::map<std::string, double> details;
  std::string note;
};

struct ShellOptions {
  std::vector<double> radii{0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625};  // 2^-2 .. 2^-8
  IntegratorOptions integrator{};
};

/// Integrals over shells r_{k+1} < |xi| < r_k of the relative coordinates xi of the part's vertices
/// (relative to its first vertex); the first vertex and all other vertices range over the test
/// function support.
///
/// Verdicts:
///  converges       |S_{k+1}| <= 2 (sigma(C_{k+1}) + sigma(C_k)) for the last two refinements,
///                  C_k the cumulative sums;
///  diverges-log    otherwise, when the fitted per-decade change factor 10^p of |S_k| vs r_k is within 10% of 1;
///  diverges-power  otherwise, when p < 0 and the shells are resolved (relative errors < 0.5);
///  inconclusive    anything else.
inline ProbeReport integrability_probe(const RWeight& r, VertexSet part, const TestFunction& f, bool subtracted,
                                       const ShellOptions& so) {
  const auto& g = r.graph();
  const int dim = g.dimension();
  const std::size_t d = static_cast<std::size_t>(dim);
  const auto members = part.indices();
  if (members.size() < 2) throw std::invalid_argument("integrability probe needs a part with >= 2 vertices");
  for (std::size_t i = 1; i < so.radii.size(); ++i)
    if (!(so.radii[i] < so.radii[i - 1])) throw std::invalid_argument("radii must be strictly decreasing");
  const std::size_t D = d * (members.size() - 1);
  const double sphere = detail::unit_sphere_area(static_cast<int>(D));

  ProbeReport rep;
  rep.label = std::string(subtracted ? "subtracted" : "unsubtracted") + " shells around " + g.label(part);
  std::vector<double> mids, absS, relerr;
  std::vector<Estimate> shells;
  for (std::size_t k = 0; k + 1 < so.radii.size(); ++k) {
    const double ro = so.radii[k], ri = so.radii[k + 1];
    const double vol = sphere / static_cast<double>(D) * (std::pow(ro, double(D)) - std::pow(ri, double(D)));
    // root plan: anchor and non-part vertices uniform in their regions
    std::vector<std::size_t> verts;
    std::vector<Region> regs;
    verts.push_back(members[0]);
    regs.push_back(f.regions[members[0]]);
    for (std::size_t v = 0; v < g.vertex_count(); ++v)
      if (!part.contains(v)) {
        verts.push_back(v);
        regs.push_back(f.regions[v]);
      }
    const SamplerPlan drawn = make_sampler_plan(dim, {}, verts, regs, [](const Edge&) { return 0.0; });
    const std::size_t per = uniforms_per_vertex(dim);
    IntegratorOptions io = so.integrator;
    io.seed = splitmix64(so.integrator.seed + 7919 * (k + 1));
    const std::size_t chunks = std::max<std::size_t>(1, io.chunks);
    std::vector<detail::Accum> parts(chunks, detail::Accum(1));
    parallel_for(chunks, resolve_threads(io.threads), [&](std::size_t c) {
      const std::size_t n = io.samples / chunks + (c < io.samples % chunks ? 1 : 0);
      std::mt19937_64 rng(splitmix64(io.seed ^ splitmix64(c + 1)));
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      std::normal_distribution<double> normal(0.0, 1.0);
      Configuration x(g.vertex_count(), dim);
      std::vector<double> u(per * verts.size());
      std::vector<double> xi(D);
      std::vector<cplx> val(1);
      for (std::size_t s = 0; s < n; ++s) {
        for (auto& v : u) v = uni(rng);
        double n2 = 0.0;
        for (auto& v : xi) {
          v = normal(rng);
          n2 += v * v;
        }
        const double rad = std::pow(std::pow(ri, double(D)) + uni(rng) * (std::pow(ro, double(D)) - std::pow(ri, double(D))),
                                    1.0 / static_cast<double>(D));
        const double nn = std::sqrt(n2);
        double w = draw_configuration(drawn, u, x) * vol;
        for (std::size_t j = 1; j < members.size(); ++j)
          for (std::size_t mu = 0; mu < d; ++mu)
            x.at(members[j], static_cast<int>(mu)) =
                x.at(members[0], static_cast<int>(mu)) + rad * xi[(j - 1) * d + mu] / nn;
        val[0] = 0.0;
        if (w != 0.0) {
          try {
            const cplx ft = subtracted ? subtracted_test_function(r, f, x) : cplx(f.value(x));
            if (ft != cplx{}) val[0] = w * ft * (subtracted ? r.proper(x) : r.unsubtracted(x));
          } catch (const std::exception&) {
            val[0] = 0.0;
            ++parts[c].failures;
          }
        }
        parts[c].add(val);
      }
    });
    detail::Accum tot(1);
    for (const auto& p : parts) tot.merge(p);
    const double nn = static_cast<double>(std::max<std::size_t>(tot.n, 1));
    const cplx mean = tot.sum[0] / nn;
    const double var = tot.sq_re[0] / nn - mean.real() * mean.real() + tot.sq_im[0] / nn - mean.imag() * mean.imag();
    const Estimate e{mean, std::sqrt(std::max(var, 0.0) / std::max(nn - 1.0, 1.0))};
    shells.push_back(e);
    rep.rows.push_back({ri, e.value, e.error});
    mids.push_back(std::sqrt(ro * ri));
    absS.push_back(std::abs(e.value));
    relerr.push_back(e.error / std::max(std::abs(e.value), 1e-300));
  }

  // cumulative sums from the outside in
  std::vector<cplx> C;
  std::vector<double> sC;
  cplx acc{};
  double var = 0.0;
  for (const auto& s : shells) {
    acc += s.value;
    var += s.error * s.error;
    C.push_back(acc);
    sC.push_back(std::sqrt(var));
  }
  const std::size_t n = shells.size();
  bool cauchy = n >= 3;
  for (std::size_t k = n >= 2 ? n - 2 : 0; k + 1 < n + 0 && n >= 3; ++k) {
    const double step = std::abs(C[k + 1] - C[k]);
    if (!(step <= 2.0 * (sC[k + 1] + sC[k]))) cauchy = false;
  }
  std::vector<double> lx, ly;
  bool resolved = true;
  for (std::size_t k = 0; k < n; ++k) {
    if (absS[k] > 0.0) {
      lx.push_back(std::log10(mids[k]));
      ly.push_back(std::log10(absS[k]));
    }
    if (relerr[k] > 0.5) resolved = false;
  }
  double p = 0.0;
  if (lx.size() >= 2) p = fit_line(lx, ly).slope;
  rep.details["shell_exponent"] = p;
  rep.details["decade_factor"] = std::pow(10.0, p);
  rep.details["cumulative_re"] = acc.real();
  rep.details["cumulative_im"] = acc.imag();
  rep.details["cumulative_err"] = std::sqrt(var);
  if (cauchy)
    rep.verdict = Verdict::converges;
  else if (resolved && std::abs(std::pow(10.0, p) - 1.0) <= 0.1)
    rep.verdict = Verdict::diverges_log;
  else if (resolved && p < 0.0)
    rep.verdict = Verdict::diverges_power;
  else
    rep.verdict = Verdict::inconclusive;
  return rep;
}

struct CouplingOptions {
  std::vector<double> boxes{20.0, 40.0};  // half-widths, increasing
  IntegratorOptions integrator{};
  double tolerance = 1e-6;
};

/// Internal vertices over growing boxes with coupling 1, external vertices against f.
/// The central box value comes from the tree sampler; each annulus between successive boxes
/// is estimated by uniform sampling. Verdict converges when (|S| + 2 sigma_S) / |V_1| < tolerance
/// for the last annulus.
inline ProbeReport coupling_limit_probe(const RWeight& r, const TestFunction& f_ext, const CouplingOptions& co) {
  const auto& g = r.graph();
  const int dim = g.dimension();
  ProbeReport rep;
  rep.label = "constant coupling";
  const auto cond = coupling_limit_condition(g);
  rep.details["condition_holds"] = cond.holds ? 1.0 : 0.0;
  if (!cond.holds) {
    rep.note = "condition fails on " + g.label(*cond.witness) + " (sd " + std::to_string(cond.witness_sd) + ")";
    rep.details["witness_sd"] = cond.witness_sd;
  }
  const auto internal = g.internal_vertices().indices();
  if (internal.empty()) {
    rep.verdict = Verdict::converges;
    rep.note += rep.note.empty() ? "no internal vertices" : "; no internal vertices";
    return rep;
  }
  if (co.boxes.size() < 2) throw std::invalid_argument("coupling probe needs at least two boxes");
  const std::vector<double> origin(static_cast<std::size_t>(dim), 0.0);

  auto test_with_box = [&](double L) {
    TestFunction t = f_ext;
    for (auto v : internal) t.regions[v] = Region{Region::Kind::box, origin, L};
    return t;
  };
  auto value_in = [&](const TestFunction& t, const Configuration& x) -> cplx {
    const double fv = t.value(x);
    return fv == 0.0 ? cplx{} : fv * r.proper(x);
  };

  // central box
  const double L1 = co.boxes.front();
  const auto t1 = test_with_box(L1);
  // externals are roots; massive lines get a short-range sampling component
  std::vector<std::size_t> all;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) all.push_back(v);
  const auto plan = make_sampler_plan(
      g, all, t1.regions, [&](const Edge& e) { return edge_kappa(g, e); },
      [](const Edge& e) { return e.mass > 0.0 ? 16.0 / (e.multiplicity * e.mass) : 0.0; },
      g.external_vertices().indices());
  Configuration base(g.vertex_count(), dim);
  const auto v1 = integrate(plan, base, 1, [&](const Configuration& x, std::span<cplx> out) { out[0] = value_in(t1, x); },
                            co.integrator);
  rep.rows.push_back({L1, v1.components[0].value, v1.components[0].error});

  cplx total = v1.components[0].value;
  double last_rel = 0.0;
  for (std::size_t b = 1; b < co.boxes.size(); ++b) {
    const double Lin = co.boxes[b - 1], Lout = co.boxes[b];
    const auto tout = test_with_box(Lout);
    std::vector<Region> regs = tout.regions;
    for (auto v : internal) regs[v] = Region{Region::Kind::box, origin, Lout};
    const auto uplan = make_sampler_plan(dim, {}, all, regs, [](const Edge&) { return 0.0; });
    IntegratorOptions io = co.integrator;
    io.seed = splitmix64(co.integrator.seed + 104729 * b);
    const auto s = integrate(uplan, base, 1, [&](const Configuration& x, std::span<cplx> out) {
      bool outside = false;
      for (auto v : internal)
        for (int mu = 0; mu < dim; ++mu)
          if (std::abs(x.at(v, mu)) > Lin) outside = true;
      out[0] = outside ? value_in(tout, x) : cplx{};
    }, io);
    const auto& S = s.components[0];
    total += S.value;
    last_rel = (std::abs(S.value) + 2.0 * S.error) / std::max(std::abs(v1.components[0].value), 1e-300);
    rep.rows.push_back({Lout, total, std::sqrt(v1.components[0].error * v1.components[0].error + S.error * S.error)});
    rep.details["annulus_re_" + std::to_string(b)] = S.value.real();
    rep.details["annulus_err_" + std::to_string(b)] = S.error;
  }
  rep.details["relative_change"] = last_rel;
  if (last_rel < co.tolerance)
    rep.verdict = Verdict::converges;
  else
    rep.verdict = cond.holds ? Verdict::inconclusive : Verdict::diverges;
  return rep;
}

struct EpsilonOptions {
  std::vector<double> grid{1e-1, std::pow(10.0, -1.5), 1e-2, std::pow(10.0, -2.5), 1e-3, std::pow(10.0, -3.5), 1e-4};
  double ratio_threshold = 0.5;
};

/// |Im Sigma| at x: eps * sqrt(sum over lines of (Delta T)^4).
inline double im_sigma(const FeynmanGraph& g, const Configuration& x, double eps) {
  double s = 0.0;
  for (const auto& e : g.edges()) {
    const double dt = x.at(e.source, 0) - x.at(e.target, 0);
    s += e.multiplicity * dt * dt * dt * dt;
  }
  return eps * std::sqrt(s);
}

/// Ru^eps(x) along a decreasing eps grid in minkowski-eps mode.
/// Cauchy ratios are |R_{k+1} - R_{k+2}| / |R_k - R_{k+1}|; the bound exponent is the
/// negative slope of log|Ru| against log|Im Sigma|, compared with |E| + d_max.
inline ProbeReport epsilon_limit_probe(const FeynmanGraph& g, const RenormOptions& base_opt, const Configuration& x,
                                       const EpsilonOptions& eo) {
  ProbeReport rep;
  rep.label = "epsilon limit";
  std::vector<cplx> vals;
  std::vector<double> lims, lvals;
  int dmax = 0;
  RenormOptions ro = base_opt;
  ro.eval.mode = Mode::minkowski_eps;
  for (double eps : eo.grid) {
    ro.eval.metric.epsilon = eps;
    RWeight r(g, ro);
    if (eps == eo.grid.front()) dmax = std::max(0, max_forest_degree(r.family()));
    const cplx v = r.proper(x);
    vals.push_back(v);
    rep.rows.push_back({eps, v, 0.0});
    const double is = im_sigma(g, x, eps);
    if (is > 0.0 && std::abs(v) > 0.0) {
      lims.push_back(std::log(is));
      lvals.push_back(std::log(std::abs(v)));
    }
  }
  double worst = 0.0;
  bool cauchy = vals.size() >= 3;
  for (std::size_t k = 0; k + 2 < vals.size(); ++k) {
    const double d0 = std::abs(vals[k] - vals[k + 1]);
    const double d1 = std::abs(vals[k + 1] - vals[k + 2]);
    const double ratio = d0 > 0.0 ? d1 / d0 : 0.0;
    worst = std::max(worst, ratio);
    if (!(ratio < eo.ratio_threshold)) cauchy = false;
  }
  const double bound = static_cast<double>(g.total_multiplicity() + dmax);
  double exponent = 0.0;
  if (lims.size() >= 2) exponent = -fit_line(lims, lvals).slope;
  rep.details["worst_ratio"] = worst;
  rep.details["bound_exponent"] = exponent;
  rep.details["allowed_exponent"] = bound;
  rep.details["timelike_pairs"] = 0.0;
  for (const auto& e : g.edges()) {
    std::vector<double> y(static_cast<std::size_t>(x.dim()));
    for (int mu = 0; mu < x.dim(); ++mu) y[static_cast<std::size_t>(mu)] = x.at(e.source, mu) - x.at(e.target, mu);
    if (z_squared(y, 0.0).real() > 0.0) rep.details["timelike_pairs"] += 1.0;
  }
  rep.verdict = cauchy && exponent <= bound ? Verdict::converges : Verdict::inconclusive;
  return rep;
}

}  // namespace bphz
