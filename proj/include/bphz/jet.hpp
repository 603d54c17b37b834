#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace bphz {

using cplx = std::complex<double>;

/// Monomial basis of a truncated multivariate power series.
///
/// Two truncation rules are supported and may be combined: a bound on the total
/// degree, and a bound on the degree of each variable separately ("box").
/// Coefficients are stored in graded order, so index 0 is always the constant
/// term and the product of two monomials is looked up in a precomputed table.
class JetSpace {
 public:
  static std::shared_ptr<const JetSpace> total(std::size_t nvars, int order) {
    return std::shared_ptr<const JetSpace>(new JetSpace(std::vector<int>(nvars, order), order));
  }
  static std::shared_ptr<const JetSpace> box(std::vector<int> caps) {
    const int total = std::accumulate(caps.begin(), caps.end(), 0);
    return std::shared_ptr<const JetSpace>(new JetSpace(std::move(caps), total));
  }

  std::size_t nvars() const { return caps_.size(); }
  std::size_t size() const { return degree_.size(); }
  int max_degree() const { return max_degree_; }
  int cap(std::size_t v) const { return caps_[v]; }
  int degree(std::size_t i) const { return degree_[i]; }
  std::span<const int> exponent(std::size_t i) const {
    return {exps_.data() + i * nvars(), nvars()};
  }

  /// Index of the monomial with these exponents, or -1 when truncated away.
  long index(std::span<const int> e) const {
    auto it = lookup_.find(std::vector<int>(e.begin(), e.end()));
    return it == lookup_.end() ? -1 : static_cast<long>(it->second);
  }
  long variable_index(std::size_t v) const {
    std::vector<int> e(nvars(), 0);
    e[v] = 1;
    return index(e);
  }
  long product(std::size_t i, std::size_t j) const { return table_[i * size() + j]; }

 private:
  JetSpace(std::vector<int> caps, int total) : caps_(std::move(caps)), max_degree_(total) {
    for (auto c : caps_)
      if (c < 0) throw std::invalid_argument("jet truncation orders must be >= 0");
    if (max_degree_ < 0) throw std::invalid_argument("jet order must be >= 0");
    const std::size_t n = caps_.size();
    std::vector<int> cur(n, 0);
    for (int deg = 0; deg <= max_degree_; ++deg) enumerate(cur, 0, deg);
    if (size() > 4096) throw std::invalid_argument("jet space too large");
    for (std::size_t i = 0; i < size(); ++i)
      lookup_.emplace(std::vector<int>(exponent(i).begin(), exponent(i).end()), i);
    table_.assign(size() * size(), -1);
    std::vector<int> e(n);
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = 0; j < size(); ++j) {
        if (degree_[i] + degree_[j] > max_degree_) continue;
        bool ok = true;
        for (std::size_t v = 0; v < n; ++v) {
          e[v] = exps_[i * n + v] + exps_[j * n + v];
          if (e[v] > caps_[v]) ok = false;
        }
        if (ok) table_[i * size() + j] = index(e);
      }
  }

  void enumerate(std::vector<int>& cur, std::size_t v, int remaining) {
    const std::size_t n = caps_.size();
    if (v + 1 >= n) {
      if (n == 0) {
        if (remaining == 0) {
          degree_.push_back(0);
        }
        return;
      }
      if (remaining > caps_[v]) return;
      cur[v] = remaining;
      int deg = 0;
      for (auto c : cur) deg += c;
      exps_.insert(exps_.end(), cur.begin(), cur.end());
      degree_.push_back(deg);
      cur[v] = 0;
      return;
    }
    for (int k = std::min(remaining, caps_[v]); k >= 0; --k) {
      cur[v] = k;
      enumerate(cur, v + 1, remaining - k);
    }
    cur[v] = 0;
  }

  std::vector<int> caps_;
  int max_degree_ = 0;
  std::vector<int> exps_;
  std::vector<int> degree_;
  std::map<std::vector<int>, std::size_t> lookup_;
  std::vector<long> table_;
};

using JetSpacePtr = std::shared_ptr<const JetSpace>;

/// Truncated Taylor expansion: coefficient of h^a is f^{(a)}/a!.
class Jet {
 public:
  Jet() = default;
  explicit Jet(JetSpacePtr space, cplx c = 0.0) : space_(std::move(space)), c_(space_->size(), cplx{}) { c_[0] = c; }

  static Jet variable(JetSpacePtr space, std::size_t v, cplx value) {
    Jet j(space, value);
    const long i = space->variable_index(v);
    if (i >= 0) j.c_[static_cast<std::size_t>(i)] = 1.0;
    return j;
  }

  const JetSpacePtr& space() const { return space_; }
  std::size_t size() const { return c_.size(); }
  cplx constant() const { return c_[0]; }
  cplx operator[](std::size_t i) const { return c_[i]; }
  cplx& operator[](std::size_t i) { return c_[i]; }
  std::span<const cplx> coefficients() const { return c_; }

  cplx coeff(std::span<const int> e) const {
    const long i = space_->index(e);
    return i < 0 ? cplx{} : c_[static_cast<std::size_t>(i)];
  }

  Jet& operator+=(const Jet& o) {
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator+=(cplx a) {
    c_[0] += a;
    return *this;
  }
  Jet& operator-=(cplx a) {
    c_[0] -= a;
    return *this;
  }
  Jet& operator*=(cplx a) {
    for (auto& x : c_) x *= a;
    return *this;
  }
  Jet& operator*=(const Jet& o) {
    *this = *this * o;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, cplx b) { return a += b; }
  friend Jet operator-(Jet a, cplx b) { return a -= b; }
  friend Jet operator*(Jet a, cplx b) { return a *= b; }
  friend Jet operator*(cplx b, Jet a) { return a *= b; }
  friend Jet operator-(Jet a) { return a *= -1.0; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    const auto& sp = *a.space_;
    const std::size_t m = sp.size();
    Jet r(a.space_);
    for (std::size_t i = 0; i < m; ++i) {
      const cplx ai = a.c_[i];
      if (ai == cplx{}) continue;
      for (std::size_t j = 0; j < m; ++j) {
        const long k = sp.product(i, j);
        if (k >= 0) r.c_[static_cast<std::size_t>(k)] += ai * b.c_[j];
      }
    }
    return r;
  }

  /// g(J) for a univariate g given by its Taylor coefficients a_k = g^{(k)}(J0)/k! about J0.
  Jet compose(std::span<const cplx> taylor) const {
    Jet delta = *this;
    delta.c_[0] = 0.0;
    const int n = std::min<int>(static_cast<int>(taylor.size()) - 1, space_->max_degree());
    Jet r(space_, n >= 0 ? taylor[static_cast<std::size_t>(n)] : cplx{});
    for (int k = n - 1; k >= 0; --k) {
      r = r * delta;
      r.c_[0] += taylor[static_cast<std::size_t>(k)];
    }
    return r;
  }

  /// Value of the truncated polynomial with every variable set to 1.
  cplx sum() const {
    cplx s{};
    for (auto x : c_) s += x;
    return s;
  }

  cplx evaluate(std::span<const cplx> h) const {
    const auto& sp = *space_;
    cplx s{};
    for (std::size_t i = 0; i < c_.size(); ++i) {
      if (c_[i] == cplx{}) continue;
      cplx term = c_[i];
      auto e = sp.exponent(i);
      for (std::size_t v = 0; v < e.size(); ++v)
        for (int k = 0; k < e[v]; ++k) term *= h[v];
      s += term;
    }
    return s;
  }
  cplx evaluate(std::span<const double> h) const {
    std::vector<cplx> hc(h.begin(), h.end());
    return evaluate(std::span<const cplx>(hc));
  }

 private:
  JetSpacePtr space_;
  std::vector<cplx> c_;
};

inline Jet pow(const Jet& j, int n) {
  if (n < 0) throw std::invalid_argument("negative jet power");
  Jet r(j.space(), 1.0);
  Jet base = j;
  while (n > 0) {
    if (n & 1) r = r * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return r;
}

inline Jet exp(const Jet& j) {
  const int n = j.space()->max_degree();
  std::vector<cplx> a(static_cast<std::size_t>(n) + 1);
  const cplx e0 = std::exp(j.constant());
  double fact = 1.0;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) fact *= k;
    a[static_cast<std::size_t>(k)] = e0 / fact;
  }
  return j.compose(a);
}

inline Jet reciprocal(const Jet& j) {
  const cplx c = j.constant();
  if (c == cplx{}) throw std::domain_error("reciprocal of a jet with zero constant term");
  const int n = j.space()->max_degree();
  std::vector<cplx> a(static_cast<std::size_t>(n) + 1);
  cplx p = 1.0 / c;
  for (int k = 0; k <= n; ++k) {
    a[static_cast<std::size_t>(k)] = p;
    p *= -1.0 / c;
  }
  return j.compose(a);
}

using JetFunction = std::function<Jet(std::span<const Jet>)>;

/// Taylor coefficients of `fn` about `center` up to total order `order`.
inline Jet jet_of(const JetFunction& fn, std::span<const double> center, int order) {
  auto sp = JetSpace::total(center.size(), order);
  std::vector<Jet> vars;
  vars.reserve(center.size());
  for (std::size_t v = 0; v < center.size(); ++v) vars.push_back(Jet::variable(sp, v, center[v]));
  Jet out = fn(vars);
  if (out.space() != sp) throw std::logic_error("jet function returned a jet from a different space");
  return out;
}

/// Degree-d Taylor polynomial of f about xbar, evaluated at x.
inline cplx taylor_scalar(const JetFunction& f, int d, std::span<const double> xbar, std::span<const double> x) {
  const Jet j = jet_of(f, xbar, d);
  std::vector<cplx> h(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) h[i] = x[i] - xbar[i];
  return j.evaluate(std::span<const cplx>(h));
}

}  // namespace bphz
