#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bessel.hpp"
#include "configuration.hpp"
#include "graph.hpp"
#include "jet.hpp"
#include "power.hpp"

namespace bphz {

enum class Mode { euclidean, minkowski_eps };

inline std::string to_string(Mode m) { return m == Mode::euclidean ? "euclidean" : "minkowski-eps"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "euclidean") return Mode::euclidean;
  if (s == "minkowski-eps") return Mode::minkowski_eps;
  throw std::invalid_argument("unknown mode '" + s + "' (expected euclidean or minkowski-eps)");
}

struct MetricParams {
  double epsilon = 0.1;
  int dimension = 4;
};

/// Kernel evaluated on a graph diagonal (coincident endpoints of a line).
class DiagonalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_epsilon(const MetricParams& p, Mode mode) {
  if (mode == Mode::minkowski_eps && !(p.epsilon > 0.0))
    throw std::invalid_argument("minkowski-eps mode requires epsilon > 0");
}

/// (1 - i eps) x0^2 - |x_vec|^2.
inline cplx z_squared(std::span<const double> x, double epsilon) {
  double spatial = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) spatial += x[i] * x[i];
  return cplx(1.0, -epsilon) * (x[0] * x[0]) - spatial;
}

inline double euclidean_norm(std::span<const double> x) {
  double s = 0.0;
  for (auto v : x) s += v * v;
  return std::sqrt(s);
}

inline cplx sqrt_minus_z2(std::span<const double> x, double epsilon) {
  if (euclidean_norm(x) == 0.0) throw DiagonalError("sqrt(-z^2) at x = 0");
  return std::sqrt(-z_squared(x, epsilon));
}

struct ArgumentBounds {
  double hat = 0.0;    // lower bound on |sqrt(-z^2)|
  double check = 0.0;  // upper bound
};

inline ArgumentBounds euclid_bounds(std::span<const double> x, double epsilon) {
  const double r = euclidean_norm(x);
  return {std::pow(1.0 / epsilon + std::sqrt(1.0 + 1.0 / (epsilon * epsilon)), -0.5) * r,
          std::pow(1.0 + epsilon * epsilon, 0.25) * r};
}

struct MetricBounds {
  double c_hat = 0.0;
  double c_check = 0.0;
};

inline MetricBounds metric_bounds(double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("metric_bounds requires epsilon > 0");
  return {1.0 / (1.0 / epsilon + std::sqrt(1.0 + 1.0 / (epsilon * epsilon))), std::sqrt(1.0 + epsilon * epsilon)};
}

enum class KernelRegime { closed_form, series, quadrature };

inline std::string to_string(KernelRegime r) {
  switch (r) {
    case KernelRegime::closed_form: return "closed-form";
    case KernelRegime::series: return "series";
    case KernelRegime::quadrature: return "quadrature";
  }
  return "?";
}

struct KernelValue {
  cplx value;
  KernelRegime regime = KernelRegime::closed_form;
};

/// Invariant argument s of a scalar kernel: |y|^2, or -z^2 in minkowski-eps mode.
inline cplx invariant_s(std::span<const double> y, const MetricParams& p, Mode mode) {
  if (mode == Mode::euclidean) {
    double s = 0.0;
    for (auto v : y) s += v * v;
    return s;
  }
  return -z_squared(y, p.epsilon);
}

/// Coefficient of y0^2 in s.
inline cplx time_coefficient(const MetricParams& p, Mode mode) {
  return mode == Mode::euclidean ? cplx(1.0) : cplx(-1.0, p.epsilon);
}

/// g(s), g'(s), ..., g^{(nmax)}(s) for the scalar kernel written as a function of s.
///
/// Massive: g(s) = m^{2q} (2pi)^{-d/2} w^{-q} K_q(w), w = m sqrt(s), q = d/2 - 1, so
/// g^{(k)}(s) = m^{2q} (2pi)^{-d/2} (-m^2/2)^k w^{-(q+k)} K_{q+k}(w).
/// Massless: g(s) = Gamma(d/2-1) / (4 pi^{d/2}) s^{-q}.
inline std::vector<cplx> kernel_s_derivatives(double mass, int dimension, cplx s, int nmax,
                                              KernelRegime* regime = nullptr) {
  if (s == cplx{}) throw DiagonalError("kernel evaluated at coincident points");
  std::vector<cplx> out(static_cast<std::size_t>(nmax) + 1);
  const double q = dimension / 2.0 - 1.0;
  if (mass == 0.0) {
    if (dimension < 3) throw std::invalid_argument("massless kernel needs dimension >= 3");
    const double c = std::tgamma(q) / (4.0 * std::pow(std::numbers::pi, dimension / 2.0));
    cplx fall = c;
    for (int k = 0; k <= nmax; ++k) {
      out[static_cast<std::size_t>(k)] = fall * std::pow(s, -q - k);
      fall *= (-q - k);
    }
    if (regime) *regime = KernelRegime::closed_form;
    return out;
  }
  if (dimension % 2 != 0 || dimension < 4)
    throw std::invalid_argument("massive kernel supported for even dimension >= 4");
  const int qi = dimension / 2 - 1;
  const cplx w = mass * std::sqrt(s);
  if (!(w.real() > 0.0)) throw std::domain_error("Re sqrt(-z^2) <= 0");
  BesselRegime br{};
  const auto kseq = bessel_k_sequence(qi + nmax, w, &br);
  if (regime) *regime = br == BesselRegime::series ? KernelRegime::series : KernelRegime::quadrature;
  const double pref = std::pow(mass, 2 * qi) / std::pow(2.0 * std::numbers::pi, dimension / 2.0);
  cplx fac = pref;
  for (int k = 0; k <= nmax; ++k) {
    out[static_cast<std::size_t>(k)] = fac * std::pow(w, -(qi + k)) * kseq[static_cast<std::size_t>(qi + k)];
    fac *= -0.5 * mass * mass;
  }
  return out;
}

/// Plain propagator value at the difference vector x.
inline KernelValue propagator(std::span<const double> x, double mass, const MetricParams& p, Mode mode) {
  require_epsilon(p, mode);
  if (euclidean_norm(x) == 0.0) throw DiagonalError("propagator at x = 0");
  KernelRegime r{};
  const auto g = kernel_s_derivatives(mass, p.dimension, invariant_s(x, p, mode), 0, &r);
  return {g[0], r};
}

namespace detail {
inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}
}  // namespace detail

/// One line's factor: (d/dy0)^k G(y) raised to the line multiplicity.
inline cplx edge_factor(const KernelSpec& k, std::span<const double> y, const MetricParams& p, Mode mode,
                        int multiplicity) {
  if (euclidean_norm(y) == 0.0) throw DiagonalError("line evaluated at coincident endpoints");
  const int n = k.edge_derivatives;
  const auto g = kernel_s_derivatives(k.mass, p.dimension, invariant_s(y, p, mode), n);
  const cplx c0 = time_coefficient(p, mode);
  cplx v{};
  for (int j = 0; 2 * j <= n; ++j)
    v += detail::factorial(n) / (detail::factorial(j) * detail::factorial(n - 2 * j)) * std::pow(c0, n - j) *
         std::pow(2.0 * y[0], n - 2 * j) * g[static_cast<std::size_t>(n - j)];
  return std::pow(v, multiplicity);
}

/// Same as edge_factor with y given as jets (one per component).
inline Jet edge_factor_jet(const KernelSpec& k, std::span<const Jet> y, const MetricParams& p, Mode mode,
                           int multiplicity) {
  const auto& sp = y[0].space();
  const int order = sp->max_degree();
  const cplx c0 = time_coefficient(p, mode);
  Jet s = c0 * (y[0] * y[0]);
  for (std::size_t i = 1; i < y.size(); ++i) s += y[i] * y[i];
  const int n = k.edge_derivatives;
  const auto g = kernel_s_derivatives(k.mass, p.dimension, s.constant(), n + order);
  Jet v(sp);
  for (int j = 0; 2 * j <= n; ++j) {
    const int dn = n - j;
    std::vector<cplx> taylor(static_cast<std::size_t>(order) + 1);
    for (int i = 0; i <= order; ++i)
      taylor[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(dn + i)] / detail::factorial(i);
    Jet term = s.compose(taylor);
    const cplx coef = detail::factorial(n) / (detail::factorial(j) * detail::factorial(n - 2 * j)) * std::pow(c0, n - j);
    if (n - 2 * j > 0) term = term * pow(2.0 * y[0], n - 2 * j);
    v += coef * term;
  }
  return multiplicity == 1 ? v : pow(v, multiplicity);
}

/// Unrenormalized weight: product of all line factors (vertex weights are 1).
inline cplx weight_eval(const FeynmanGraph& g, const Configuration& x, const MetricParams& p, Mode mode) {
  require_epsilon(p, mode);
  MetricParams pp = p;
  pp.dimension = g.dimension();
  cplx w = 1.0;
  std::vector<double> y(static_cast<std::size_t>(x.dim()));
  for (const auto& e : g.edges()) {
    for (int mu = 0; mu < x.dim(); ++mu) y[static_cast<std::size_t>(mu)] = x.at(e.source, mu) - x.at(e.target, mu);
    if (euclidean_norm(y) == 0.0)
      throw DiagonalError("configuration on a graph diagonal: vertices '" + g.vertex(e.source).id + "' and '" +
                          g.vertex(e.target).id + "' coincide");
    w *= edge_factor(kernel_spec(g, e), y, pp, mode, e.multiplicity);
  }
  return w;
}

}  // namespace bphz
