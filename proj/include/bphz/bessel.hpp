#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace bphz {

enum class BesselRegime { series, quadrature };

struct BesselValue {
  std::complex<double> value;
  BesselRegime regime;
};

namespace detail {

// A&S 9.6.11 for integer order n >= 0, valid for all z off the negative real axis.
inline std::complex<double> bessel_k_series(int n, std::complex<double> z) {
  using C = std::complex<double>;
  constexpr double euler_gamma = 0.57721566490153286061;
  const C half = 0.5 * z;
  const C q = half * half;
  C finite{};
  if (n > 0) {
    double fact_num = 1.0;  // (n-k-1)!
    for (int i = 2; i <= n - 1; ++i) fact_num *= i;
    double fact_k = 1.0;
    C qk = 1.0;
    for (int k = 0; k < n; ++k) {
      if (k > 0) {
        fact_k *= k;
        fact_num /= (n - k);
      }
      finite += fact_num / fact_k * qk;
      qk *= -q;
    }
    finite *= 0.5 * std::pow(half, -n);
  }
  // I_n(z) and the psi sum.
  C in{}, psi_sum{};
  double fk = 1.0, fnk = 1.0;
  for (int i = 2; i <= n; ++i) fnk *= i;
  double hk = 0.0, hnk = 0.0;  // harmonic numbers H_k, H_{n+k}
  for (int i = 1; i <= n; ++i) hnk += 1.0 / i;
  C qk = 1.0;
  for (int k = 0; k < 200; ++k) {
    if (k > 0) {
      fk *= k;
      fnk *= (n + k);
      hk += 1.0 / k;
      hnk += 1.0 / (n + k);
      qk *= q;
    }
    const C t = qk / (fk * fnk);
    in += t;
    psi_sum += (hk + hnk - 2.0 * euler_gamma) * t;
    if (k > 4 && std::abs(t) * (1.0 + hk + hnk) < 1e-18 * (std::abs(in) + std::abs(psi_sum))) break;
  }
  const C hn = std::pow(half, n);
  const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
  return finite - sgn * std::log(half) * hn * in + sgn * 0.5 * hn * psi_sum;
}

// K_nu(z) = sqrt(pi/2z) e^{-z} / Gamma(nu+1/2) * Int_R e^{-u^2} u^{2nu} (1 + u^2/(2z))^{nu-1/2} du,
// by the trapezoid rule; the integrand is entire in a strip of half-width >= 1 for |z| >= 2.
inline std::complex<double> bessel_k_laplace(int nu, std::complex<double> z) {
  using C = std::complex<double>;
  constexpr double h = 0.125;
  constexpr int n = 56;  // |u| <= 7
  const C inv2z = 1.0 / (2.0 * z);
  const double expo = nu - 0.5;
  C acc = nu == 0 ? C(1.0) : C(0.0);
  for (int i = 1; i <= n; ++i) {
    const double u = i * h;
    const double u2 = u * u;
    acc += 2.0 * std::exp(-u2) * std::pow(u2, nu) * std::pow(1.0 + u2 * inv2z, expo);
  }
  acc *= h;
  return std::sqrt(std::numbers::pi / (2.0 * z)) * std::exp(-z) / std::tgamma(nu + 0.5) * acc;
}

}  // namespace detail

/// K_nu(w) for nu in {0, 1, 2} and Re w > 0, with the evaluation regime used.
inline BesselValue bessel_k_tagged(int nu, std::complex<double> w) {
  if (!(w.real() > 0.0)) throw std::domain_error("bessel_k requires Re w > 0");
  if (nu < 0 || nu > 2) throw std::domain_error("bessel_k supports orders 0, 1, 2");
  if (std::abs(w) < 2.0) return {detail::bessel_k_series(nu, w), BesselRegime::series};
  if (nu < 2) return {detail::bessel_k_laplace(nu, w), BesselRegime::quadrature};
  const auto k0 = detail::bessel_k_laplace(0, w);
  const auto k1 = detail::bessel_k_laplace(1, w);
  return {k0 + 2.0 / w * k1, BesselRegime::quadrature};
}

inline std::complex<double> bessel_k(int nu, std::complex<double> w) { return bessel_k_tagged(nu, w).value; }

/// K_0 .. K_nmax at w, by upward recurrence from K_0 and K_1.
inline std::vector<std::complex<double>> bessel_k_sequence(int nmax, std::complex<double> w, BesselRegime* regime = nullptr) {
  const auto k0 = bessel_k_tagged(0, w);
  const auto k1 = bessel_k_tagged(1, w);
  if (regime) *regime = k0.regime;
  std::vector<std::complex<double>> out{k0.value, k1.value};
  for (int n = 1; n < nmax; ++n) out.push_back(out[static_cast<std::size_t>(n) - 1] + 2.0 * n / w * out[static_cast<std::size_t>(n)]);
  out.resize(static_cast<std::size_t>(std::max(nmax, 0)) + 1);
  return out;
}

}  // namespace bphz
