#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <queue>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "configuration.hpp"
#include "graph.hpp"
#include "jet.hpp"

namespace bphz {

/// Integration domain of one vertex.
struct Region {
  enum class Kind { ball, box };
  Kind kind = Kind::ball;
  std::vector<double> center;
  double radius = 1.0;  // ball radius, or box half-width
};

/// How vertices are drawn: roots uniformly in their region, every other vertex at a
/// power-law distributed distance from its parent so that the density follows the
/// short-distance singularity of the line joining them.
///
/// A child with a finite `range` draws from a mixture: with probability 1 - wide_fraction the
/// distance is capped at `range`, otherwise it spans the whole reachable ball. The wide
/// component keeps every point of the region reachable.
struct SamplerPlan {
  int dim = 4;
  std::vector<std::size_t> vertices;      // graph vertex indices that are integrated
  std::vector<Region> regions;            // parallel to `vertices`
  std::vector<long> parent;               // position in `vertices`, -1 for roots
  std::vector<double> kappa;              // density exponent per non-root vertex
  std::vector<double> range;              // short-range cap per non-root vertex, 0 for none
  std::vector<std::size_t> order;         // parents before children
  double wide_fraction = 0.1;
};

namespace detail {
inline double unit_sphere_area(int d) {
  return 2.0 * std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);
}
inline double ball_volume(int d, double r) { return unit_sphere_area(d) / d * std::pow(r, d); }
}  // namespace detail

inline double region_volume(const Region& r, int d) {
  return r.kind == Region::Kind::ball ? detail::ball_volume(d, r.radius) : std::pow(2.0 * r.radius, d);
}

using EdgeScalar = std::function<double(const Edge&)>;

/// Spanning forest over the integrated vertices, taking the most singular lines first
/// (largest kappa, then input order). Each tree holds at most one of `roots`; trees without
/// one are rooted at their first vertex. `range_of_edge` may be empty.
inline SamplerPlan make_sampler_plan(int dim, const std::vector<Edge>& edges, const std::vector<std::size_t>& vertices,
                                     const std::vector<Region>& regions, const EdgeScalar& kappa_of_edge,
                                     const EdgeScalar& range_of_edge = {}, const std::vector<std::size_t>& roots = {}) {
  if (vertices.size() != regions.size()) throw std::invalid_argument("one region per integrated vertex expected");
  const std::size_t n = vertices.size();
  SamplerPlan p;
  p.dim = dim;
  p.vertices = vertices;
  p.regions = regions;
  p.parent.assign(n, -1);
  p.kappa.assign(n, 0.0);
  p.range.assign(n, 0.0);
  std::size_t nmax = 0;
  for (auto v : vertices) nmax = std::max(nmax, v + 1);
  for (const auto& e : edges) nmax = std::max({nmax, e.source + 1, e.target + 1});
  std::vector<long> pos(nmax, -1);
  for (std::size_t i = 0; i < n; ++i) pos[vertices[i]] = static_cast<long>(i);

  std::vector<std::size_t> comp(n);
  std::vector<bool> has_root(n, false);
  for (std::size_t i = 0; i < n; ++i) comp[i] = i;
  for (auto r : roots)
    if (r < nmax && pos[r] >= 0) has_root[static_cast<std::size_t>(pos[r])] = true;
  auto find = [&](std::size_t i) {
    while (comp[i] != i) i = comp[i] = comp[comp[i]];
    return i;
  };

  struct Cand {
    std::size_t a, b;
    double kappa, range;
    std::size_t index;
  };
  std::vector<Cand> cands;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    const long a = pos[e.source], b = pos[e.target];
    if (a < 0 || b < 0 || a == b) continue;
    cands.push_back({static_cast<std::size_t>(a), static_cast<std::size_t>(b), std::clamp(kappa_of_edge(e), 0.0, dim - 0.5),
                     range_of_edge ? range_of_edge(e) : 0.0, k});
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.kappa > y.kappa; });
  std::vector<std::vector<std::pair<std::size_t, const Cand*>>> adj(n);
  for (const auto& c : cands) {
    const auto ra = find(c.a), rb = find(c.b);
    if (ra == rb || (has_root[ra] && has_root[rb])) continue;
    comp[ra] = rb;
    has_root[rb] = has_root[rb] || has_root[ra];
    adj[c.a].push_back({c.b, &c});
    adj[c.b].push_back({c.a, &c});
  }

  // orient each tree away from its root
  std::vector<bool> forced(n, false), seen(n, false);
  for (auto r : roots)
    if (r < nmax && pos[r] >= 0) forced[static_cast<std::size_t>(pos[r])] = true;
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < n; ++i)
    if (forced[i]) starts.push_back(i);
  for (std::size_t i = 0; i < n; ++i) starts.push_back(i);
  for (auto r : starts) {
    if (seen[r]) continue;
    seen[r] = true;
    std::queue<std::size_t> q;
    q.push(r);
    while (!q.empty()) {
      const auto i = q.front();
      q.pop();
      p.order.push_back(i);
      for (const auto& [j, c] : adj[i]) {
        if (seen[j]) continue;
        seen[j] = true;
        p.parent[j] = static_cast<long>(i);
        p.kappa[j] = c->kappa;
        p.range[j] = c->range;
        q.push(j);
      }
    }
  }
  return p;
}

inline SamplerPlan make_sampler_plan(const FeynmanGraph& g, const std::vector<std::size_t>& vertices,
                                     const std::vector<Region>& regions, const EdgeScalar& kappa_of_edge,
                                     const EdgeScalar& range_of_edge = {}, const std::vector<std::size_t>& roots = {}) {
  return make_sampler_plan(g.dimension(), g.edges(), vertices, regions, kappa_of_edge, range_of_edge, roots);
}

/// Number of uniforms consumed per integrated vertex.
inline std::size_t uniforms_per_vertex(int d) { return 1 + 2 * static_cast<std::size_t>((d + 1) / 2); }

/// Maps uniforms to a configuration; returns 1/density, or 0 when the point leaves its region.
inline double draw_configuration(const SamplerPlan& p, std::span<const double> u, Configuration& x) {
  const int d = p.dim;
  const std::size_t per = uniforms_per_vertex(d);
  std::vector<double> dir(static_cast<std::size_t>(d) + 1);
  double inv_density = 1.0;
  for (auto i : p.order) {
    const auto uu = u.subspan(i * per, per);
    const auto& reg = p.regions[i];
    const auto v = p.vertices[i];
    auto gaussian_dir = [&]() {
      double n2 = 0.0;
      for (int k = 0; k < d; k += 2) {
        const double r = std::sqrt(-2.0 * std::log(1.0 - uu[1 + static_cast<std::size_t>(k)]));
        const double th = 2.0 * std::numbers::pi * uu[2 + static_cast<std::size_t>(k)];
        dir[static_cast<std::size_t>(k)] = r * std::cos(th);
        dir[static_cast<std::size_t>(k) + 1] = r * std::sin(th);
      }
      for (int k = 0; k < d; ++k) n2 += dir[static_cast<std::size_t>(k)] * dir[static_cast<std::size_t>(k)];
      const double n = std::sqrt(n2);
      for (int k = 0; k < d; ++k) dir[static_cast<std::size_t>(k)] /= n;
    };
    if (p.parent[i] < 0) {
      if (reg.kind == Region::Kind::box) {
        for (int k = 0; k < d; ++k)
          x.at(v, k) = reg.center[static_cast<std::size_t>(k)] + reg.radius * (2.0 * uu[1 + static_cast<std::size_t>(k)] - 1.0);
      } else {
        gaussian_dir();
        const double rho = reg.radius * std::pow(uu[0], 1.0 / d);
        for (int k = 0; k < d; ++k) x.at(v, k) = reg.center[static_cast<std::size_t>(k)] + rho * dir[static_cast<std::size_t>(k)];
      }
      inv_density *= region_volume(reg, d);
      continue;
    }
    const auto pi = static_cast<std::size_t>(p.parent[i]);
    const auto pv = p.vertices[pi];
    const auto& preg = p.regions[pi];
    double cdist = 0.0;
    for (int k = 0; k < d; ++k) {
      const double t = reg.center[static_cast<std::size_t>(k)] - preg.center[static_cast<std::size_t>(k)];
      cdist += t * t;
    }
    auto reach = [&](const Region& r) { return r.kind == Region::Kind::ball ? r.radius : r.radius * std::sqrt(double(d)); };
    const double rmax = std::sqrt(cdist) + reach(reg) + reach(preg);
    const double kap = p.kappa[i];
    const double a = d - kap;
    const double cap = p.range[i] > 0.0 && p.range[i] < rmax ? p.range[i] : 0.0;
    const double q = cap > 0.0 ? p.wide_fraction : 1.0;
    gaussian_dir();
    double rho;
    if (uu[0] < q)
      rho = rmax * std::pow(uu[0] / q, 1.0 / a);
    else
      rho = cap * std::pow((uu[0] - q) / (1.0 - q), 1.0 / a);
    if (rho == 0.0) return 0.0;
    for (int k = 0; k < d; ++k) x.at(v, k) = x.at(pv, k) + rho * dir[static_cast<std::size_t>(k)];
    // inside the region?
    if (reg.kind == Region::Kind::ball) {
      double r2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double t = x.at(v, k) - reg.center[static_cast<std::size_t>(k)];
        r2 += t * t;
      }
      if (r2 > reg.radius * reg.radius) return 0.0;
    } else {
      for (int k = 0; k < d; ++k)
        if (std::abs(x.at(v, k) - reg.center[static_cast<std::size_t>(k)]) > reg.radius) return 0.0;
    }
    const double shape = a * std::pow(rho, -kap) / detail::unit_sphere_area(d);
    double density = q * shape / std::pow(rmax, a);
    if (cap > 0.0 && rho <= cap) density += (1.0 - q) * shape / std::pow(cap, a);
    inv_density /= density;
  }
  return inv_density;
}

enum class Integrator { mc, qmc };

inline std::string to_string(Integrator i) { return i == Integrator::mc ? "mc" : "qmc"; }

struct IntegratorOptions {
  std::uint64_t seed = 1;
  std::size_t samples = 100000;
  unsigned threads = 0;  // 0: BPHZ_THREADS, then hardware concurrency
  std::size_t chunks = 64;
  Integrator kind = Integrator::mc;
  std::size_t qmc_replicates = 16;
};

struct Estimate {
  cplx value;
  double error = 0.0;
};

struct MultiEstimate {
  std::vector<Estimate> components;
  std::size_t samples = 0;
  std::size_t failures = 0;  // exceptional or diagonal points, counted as zero
  Integrator integrator = Integrator::mc;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BPHZ_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1U : hc;
}

/// Runs job(i) for i in [0, n) on a pool; results must be stored by index.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job) {
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) job(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Integrand over full configurations, writing ncomp values; it may throw to mark a sample
/// as unusable (counted in `failures`, contributing zero).
using VectorIntegrand = std::function<void(const Configuration&, std::span<cplx>)>;

namespace detail {

struct Accum {
  std::vector<cplx> sum;
  std::vector<double> sq_re, sq_im;
  std::size_t n = 0, failures = 0;
  explicit Accum(std::size_t m) : sum(m), sq_re(m), sq_im(m) {}
  void add(std::span<const cplx> v) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += v[i];
      sq_re[i] += v[i].real() * v[i].real();
      sq_im[i] += v[i].imag() * v[i].imag();
    }
    ++n;
  }
  void merge(const Accum& o) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += o.sum[i];
      sq_re[i] += o.sq_re[i];
      sq_im[i] += o.sq_im[i];
    }
    n += o.n;
    failures += o.failures;
  }
};

inline void sample_point(const SamplerPlan& plan, const VectorIntegrand& f, std::span<const double> u,
                         Configuration& x, std::vector<cplx>& vals, Accum& acc) {
  std::fill(vals.begin(), vals.end(), cplx{});
  const double w = draw_configuration(plan, u, x);
  if (w != 0.0) {
    try {
      f(x, vals);
      for (auto& v : vals) v *= w;
      for (auto& v : vals)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw std::domain_error("non-finite integrand");
    } catch (const std::exception&) {
      std::fill(vals.begin(), vals.end(), cplx{});
      ++acc.failures;
    }
  }
  acc.add(vals);
}

inline bool is_prime(unsigned n) {
  if (n < 2) return false;
  for (unsigned k = 2; k * k <= n; ++k)
    if (n % k == 0) return false;
  return true;
}

inline std::vector<unsigned> first_primes(std::size_t n) {
  std::vector<unsigned> out;
  for (unsigned k = 2; out.size() < n; ++k)
    if (is_prime(k)) out.push_back(k);
  return out;
}

inline double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

}  // namespace detail

/// Integrates f over the plan's domain. Vertices not in the plan keep their positions from `base`.
///
/// Work is split into a fixed set of chunks with their own random streams, and the chunk sums
/// are combined in chunk order, so results do not depend on the number of threads.
inline MultiEstimate integrate(const SamplerPlan& plan, const Configuration& base, std::size_t ncomp,
                               const VectorIntegrand& f, const IntegratorOptions& opt) {
  const std::size_t per = uniforms_per_vertex(plan.dim);
  const std::size_t dimu = per * plan.vertices.size();
  const unsigned threads = resolve_threads(opt.threads);
  MultiEstimate out;
  out.integrator = opt.kind;
  out.components.resize(ncomp);

  if (opt.kind == Integrator::mc) {
    const std::size_t chunks = std::max<std::size_t>(1, opt.chunks);
    std::vector<detail::Accum> parts(chunks, detail::Accum(ncomp));
    parallel_for(chunks, threads, [&](std::size_t c) {
      const std::size_t n = opt.samples / chunks + (c < opt.samples % chunks ? 1 : 0);
      std::mt19937_64 rng(splitmix64(opt.seed ^ splitmix64(c + 1)));
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      Configuration x = base;
      std::vector<double> u(dimu);
      std::vector<cplx> vals(ncomp);
      for (std::size_t s = 0; s < n; ++s) {
        for (auto& v : u) v = uni(rng);
        detail::sample_point(plan, f, u, x, vals, parts[c]);
      }
    });
    detail::Accum tot(ncomp);
    for (const auto& p : parts) tot.merge(p);
    const double n = static_cast<double>(std::max<std::size_t>(tot.n, 1));
    for (std::size_t i = 0; i < ncomp; ++i) {
      const cplx mean = tot.sum[i] / n;
      const double var = (tot.sq_re[i] / n - mean.real() * mean.real()) + (tot.sq_im[i] / n - mean.imag() * mean.imag());
      out.components[i] = {mean, std::sqrt(std::max(var, 0.0) / std::max(n - 1.0, 1.0))};
    }
    out.samples = tot.n;
    out.failures = tot.failures;
    return out;
  }

  // Randomized Halton: independent Cranley-Patterson shifts per replicate.
  const std::size_t reps = std::max<std::size_t>(2, opt.qmc_replicates);
  const std::size_t per_rep = std::max<std::size_t>(1, opt.samples / reps);
  const auto primes = detail::first_primes(dimu);
  std::vector<std::vector<double>> shifts(reps, std::vector<double>(dimu));
  for (std::size_t r = 0; r < reps; ++r) {
    std::mt19937_64 rng(splitmix64(opt.seed ^ splitmix64(0xC0FFEEULL + r)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (auto& s : shifts[r]) s = uni(rng);
  }
  std::vector<detail::Accum> parts(reps, detail::Accum(ncomp));
  parallel_for(reps, threads, [&](std::size_t r) {
    Configuration x = base;
    std::vector<double> u(dimu);
    std::vector<cplx> vals(ncomp);
    for (std::size_t s = 0; s < per_rep; ++s) {
      for (std::size_t k = 0; k < dimu; ++k) {
        double v = detail::radical_inverse(s + 1, primes[k]) + shifts[r][k];
        v -= std::floor(v);
        u[k] = std::min(v, 1.0 - 1e-16);
      }
      detail::sample_point(plan, f, u, x, vals, parts[r]);
    }
  });
  std::size_t total = 0, failures = 0;
  for (std::size_t i = 0; i < ncomp; ++i) {
    cplx m{};
    std::vector<cplx> means(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      means[r] = parts[r].sum[i] / static_cast<double>(parts[r].n);
      m += means[r];
    }
    m /= static_cast<double>(reps);
    double var = 0.0;
    for (const auto& mr : means) var += std::norm(mr - m);
    var /= static_cast<double>(reps - 1);
    out.components[i] = {m, std::sqrt(var / static_cast<double>(reps))};
  }
  for (const auto& p : parts) {
    total += p.n;
    failures += p.failures;
  }
  out.samples = total;
  out.failures = failures;
  return out;
}

}  // namespace bphz
