#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"

using namespace bphz;
using Catch::Approx;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("complexified square", "[kernel]") {
  const double a[] = {1, 0, 0, 0}, b[] = {0, 1, 0, 0}, c[] = {1, 1, 0, 0};
  CHECK(z_squared(a, 1.0) == cplx(1.0, -1.0));
  CHECK(z_squared(b, 0.3) == cplx(-1.0, 0.0));
  CHECK(std::abs(z_squared(c, 0.5) - cplx(0.0, -0.5)) < 1e-15);
  const auto w = sqrt_minus_z2(a, 1.0);
  CHECK(w.real() == Approx(0.455090).margin(1e-6));
  CHECK(w.imag() == Approx(1.098684).margin(1e-6));
  CHECK(sqrt_minus_z2(b, 0.2) == cplx(1.0, 0.0));
  const double zero[] = {0, 0, 0, 0};
  CHECK_THROWS_AS(sqrt_minus_z2(zero, 0.1), DiagonalError);
}

TEST_CASE("closed-form bound constants", "[kernel]") {
  const auto mb = metric_bounds(1.0);
  CHECK(mb.c_hat == Approx(0.414214).margin(1e-6));
  CHECK(mb.c_check == Approx(1.414214).margin(1e-6));
  CHECK(metric_bounds(1e-9).c_hat < 1e-8);
  CHECK(metric_bounds(1e-9).c_check == Approx(1.0));
  const double x[] = {1, 0, 0, 0};
  const auto eb = euclid_bounds(x, 1.0);
  CHECK(eb.check == Approx(1.189207).margin(1e-6));
  CHECK(eb.hat == Approx(0.643594).margin(1e-6));
  CHECK(euclid_bounds(x, 10.0).hat == Approx(0.9513).margin(1e-4));
  CHECK_THROWS(metric_bounds(0.0));
}

TEST_CASE("real part of the root stays positive", "[kernel]") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3), le(-4, 1);
  for (int i = 0; i < 10000; ++i) {
    const double x[] = {u(rng), u(rng), u(rng), u(rng)};
    CHECK(sqrt_minus_z2(x, std::pow(10.0, le(rng))).real() > 0.0);
  }
}

TEST_CASE("propagator values", "[kernel]") {
  MetricParams p;
  const double x[] = {0, 1, 0, 0};
  CHECK(propagator(x, 0.0, p, Mode::euclidean).value.real() == Approx(1 / (4 * pi * pi)).epsilon(1e-14));
  CHECK(propagator(x, 1.0, p, Mode::euclidean).value.real() == Approx(0.60190723019723457 / (4 * pi * pi)).epsilon(1e-13));
  // massless limit of the massive form
  const double small = propagator(x, 1e-5, p, Mode::euclidean).value.real();
  CHECK(small == Approx(1 / (4 * pi * pi)).epsilon(1e-8));
  // spacelike Minkowski equals Euclidean on purely spatial vectors
  CHECK(std::abs(propagator(x, 1.0, p, Mode::minkowski_eps).value - propagator(x, 1.0, p, Mode::euclidean).value) < 1e-15);
  MetricParams bad;
  bad.epsilon = 0.0;
  CHECK_THROWS(propagator(x, 1.0, bad, Mode::minkowski_eps));
  CHECK(parse_mode("minkowski-eps") == Mode::minkowski_eps);
  CHECK_THROWS(parse_mode("lorentzian"));
}

TEST_CASE("kernel s-derivatives against finite differences", "[kernel]") {
  for (double m : {0.0, 1.0, 2.5}) {
    for (cplx s : {cplx(0.7, 0.0), cplx(3.0, -1.0), cplx(-0.5, 0.2), cplx(9.0, 0.5)}) {
      if (m > 0 && !(std::sqrt(s).real() > 0)) continue;
      const auto g = kernel_s_derivatives(m, 4, s, 3);
      const double h = 1e-4;
      for (int k = 0; k < 3; ++k) {
        const auto gp = kernel_s_derivatives(m, 4, s + h, 3);
        const auto gm = kernel_s_derivatives(m, 4, s - h, 3);
        const cplx fd = (gp[static_cast<std::size_t>(k)] - gm[static_cast<std::size_t>(k)]) / (2 * h);
        INFO("m=" << m << " s=" << s << " k=" << k);
        CHECK(std::abs(fd - g[static_cast<std::size_t>(k) + 1]) <= 1e-6 * std::abs(g[static_cast<std::size_t>(k) + 1]));
      }
    }
  }
}

TEST_CASE("edge derivative factors along the time axis", "[kernel]") {
  MetricParams p;
  p.epsilon = 0.3;
  for (auto mode : {Mode::euclidean, Mode::minkowski_eps}) {
    for (double m : {0.0, 1.0}) {
      std::vector<double> y{0.4, 0.9, -0.3, 0.5};
      const double h = 1e-4;
      auto g0 = [&](double t) {
        auto z = y;
        z[0] = t;
        return edge_factor({m, 0, 4}, z, p, mode, 1);
      };
      const cplx d1 = edge_factor({m, 1, 4}, y, p, mode, 1);
      const cplx d2 = edge_factor({m, 2, 4}, y, p, mode, 1);
      CHECK(std::abs(d1 - (g0(y[0] + h) - g0(y[0] - h)) / (2 * h)) <= 1e-6 * std::abs(d1));
      CHECK(std::abs(d2 - (g0(y[0] + h) - 2.0 * g0(y[0]) + g0(y[0] - h)) / (h * h)) <= 1e-4 * std::abs(d2));
      CHECK(std::abs(edge_factor({m, 0, 4}, y, p, mode, 3) - std::pow(g0(y[0]), 3)) <= 1e-14 * std::abs(std::pow(g0(y[0]), 3)));
    }
  }
}

TEST_CASE("edge factor jets match scalar evaluation and finite differences", "[kernel]") {
  MetricParams p;
  p.epsilon = 0.2;
  const std::vector<double> y{0.5, -0.2, 0.7, 0.1};
  const auto sp = JetSpace::total(4, 2);
  std::vector<Jet> yj;
  for (std::size_t i = 0; i < 4; ++i) yj.push_back(Jet::variable(sp, i, y[i]));
  for (auto mode : {Mode::euclidean, Mode::minkowski_eps}) {
    const KernelSpec k{1.0, 1, 4};
    const auto j = edge_factor_jet(k, yj, p, mode, 2);
    const cplx v = edge_factor(k, y, p, mode, 2);
    CHECK(std::abs(j.constant() - v) <= 1e-13 * std::abs(v));
    const double h = 1e-5;
    auto at = [&](std::size_t i, double d) {
      auto z = y;
      z[i] += d;
      return edge_factor(k, z, p, mode, 2);
    };
    for (std::size_t i = 0; i < 4; ++i) {
      int e[4] = {0, 0, 0, 0};
      e[i] = 1;
      const cplx fd = (at(i, h) - at(i, -h)) / (2 * h);
      CHECK(std::abs(j.coeff(e) - fd) <= 1e-6 * std::abs(v));
    }
  }
}

TEST_CASE("weights of the standard graphs", "[kernel]") {
  const auto core = fixtures::graph("fish_core");
  Configuration x(2, 4);
  x.at(1, 2) = 1.0;
  MetricParams p;
  CHECK(weight_eval(core, x, p, Mode::euclidean).real() == Approx(std::pow(1 / (4 * pi * pi), 2)).epsilon(1e-13));
  Configuration d(2, 4);
  CHECK_THROWS_AS(weight_eval(core, d, p, Mode::euclidean), DiagonalError);
  try {
    weight_eval(core, d, p, Mode::euclidean);
  } catch (const DiagonalError& e) {
    CHECK(std::string(e.what()).find("'v1'") != std::string::npos);
  }

  // translation invariance
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto ss = fixtures::graph("settingsun");
  for (int i = 0; i < 100; ++i) {
    Configuration y(4, 4);
    for (auto& c : y.raw()) c = u(rng);
    Configuration z = y;
    const double t[] = {u(rng), u(rng), u(rng), u(rng)};
    z.translate(t);
    for (auto mode : {Mode::euclidean, Mode::minkowski_eps}) {
      const cplx a = weight_eval(ss, y, p, mode), b = weight_eval(ss, z, p, mode);
      CHECK(std::abs(a - b) <= 1e-9 * std::abs(a));
    }
  }
}

TEST_CASE("bessel decreasing on the positive axis and the kernel chain links that hold", "[kernel]") {
  for (int nu = 0; nu <= 2; ++nu) {
    double prev = INFINITY;
    for (double x = 0.05; x < 30; x *= 1.1) {
      const double v = bessel_k(nu, x).real();
      CHECK(v < prev);
      prev = v;
    }
  }
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2, 2);
  for (double eps : {0.1, 0.5, 1.0}) {
    for (int i = 0; i < 2000; ++i) {
      const double x[] = {u(rng), u(rng), u(rng), u(rng)};
      const auto w = sqrt_minus_z2(x, eps);
      const auto b = euclid_bounds(x, eps);
      CHECK(b.hat <= std::abs(w) * (1 + 1e-12));
      CHECK(std::abs(w) <= b.check * (1 + 1e-12));
      for (int nu = 0; nu <= 2; ++nu) {
        const double kc = boost::math::cyl_bessel_k(nu, b.check);
        const double ka = boost::math::cyl_bessel_k(nu, std::abs(w));
        const double kw = std::abs(bessel_k(nu, w));
        CHECK(kc <= ka * (1 + 1e-12));
        CHECK(ka <= kw * (1 + 1e-12));
        CHECK(kw <= boost::math::cyl_bessel_k(nu, w.real()) * (1 + 1e-12));
      }
    }
  }
}
