#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <complex>
#include <functional>
#include <random>

#include "fixtures.hpp"

using namespace bphz;

namespace {
// Oracle: K_nu(z) = Int_0^inf exp(-z cosh t) cosh(nu t) dt by adaptive Simpson on [0, T].
cplx simpson(const std::function<cplx(double)>& f, double a, double b, cplx fa, cplx fm, cplx fb, cplx whole, int depth, double tol) {
  const double m = 0.5 * (a + b);
  const cplx flm = f(0.5 * (a + m)), frm = f(0.5 * (m + b));
  const cplx left = (m - a) / 6 * (fa + 4.0 * flm + fm), right = (b - m) / 6 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, depth - 1, tol / 2) + simpson(f, m, b, fm, frm, fb, right, depth - 1, tol / 2);
}

cplx k_oracle(int nu, cplx z) {
  auto f = [&](double t) { return std::exp(-z * std::cosh(t)) * std::cosh(nu * t); };
  // integrand magnitude exp(-Re z cosh t): stop where it is negligible
  const double T = std::acosh(std::max(1.0, 60.0 / z.real())) + 1.0;
  cplx total{};
  const int pieces = 64;
  for (int i = 0; i < pieces; ++i) {
    const double a = T * i / pieces, b = T * (i + 1) / pieces;
    const cplx fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    total += simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4.0 * fm + fb), 16, 1e-13 * std::exp(-z.real()) / pieces);
  }
  return total;
}
}  // namespace

TEST_CASE("bessel K matches boost on the real axis", "[bessel]") {
  for (double x : {0.01, 0.3, 1.0, 1.99, 2.0, 2.5, 5.0, 17.0, 60.0}) {
    for (int nu = 0; nu <= 2; ++nu) {
      const double ref = boost::math::cyl_bessel_k(nu, x);
      CHECK(std::abs(bessel_k(nu, x) - ref) <= 1e-13 * std::abs(ref));
    }
  }
}

TEST_CASE("bessel K matches the integral representation off the axis", "[bessel]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lr(std::log(0.05), std::log(40.0)), ar(-1.3, 1.3);
  for (int i = 0; i < 100; ++i) {
    const cplx z = std::polar(std::exp(lr(rng)), ar(rng));
    for (int nu = 0; nu <= 2; ++nu) {
      const cplx ref = k_oracle(nu, z);
      INFO("nu=" << nu << " z=" << z);
      CHECK(std::abs(bessel_k(nu, z) - ref) <= 1e-10 * std::abs(ref));
    }
  }
}

TEST_CASE("series and quadrature regimes agree at the switch radius", "[bessel]") {
  for (double arg : {-1.5, -1.0, -0.3, 0.0, 0.7, 1.4}) {
    const cplx z = std::polar(2.0, arg);
    for (int nu = 0; nu <= 1; ++nu) {
      const auto s = detail::bessel_k_series(nu, z);
      const auto q = detail::bessel_k_laplace(nu, z);
      CHECK(std::abs(s - q) <= 1e-13 * std::abs(s));
    }
  }
  BesselRegime r{};
  bessel_k_sequence(2, cplx(0.5, 0.1), &r);
  CHECK(r == BesselRegime::series);
  bessel_k_sequence(2, cplx(5.0, 3.0), &r);
  CHECK(r == BesselRegime::quadrature);
}

TEST_CASE("recurrence and domain", "[bessel]") {
  const cplx w(1.7, -2.2);
  const auto seq = bessel_k_sequence(4, w);
  REQUIRE(seq.size() == 5);
  CHECK(std::abs(seq[2] - bessel_k(2, w)) <= 1e-13 * std::abs(seq[2]));
  CHECK(std::abs(seq[3] - (seq[1] + 4.0 / w * seq[2])) <= 1e-14 * std::abs(seq[3]));
  CHECK_THROWS(bessel_k(0, cplx(-1.0, 0.5)));
  CHECK_THROWS(bessel_k(3, cplx(1.0, 0.0)));
}
