#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fixtures.hpp"

using namespace bphz;
using Catch::Approx;

namespace {
Configuration random_config(std::mt19937_64& rng, std::size_t n, double half = 1.0) {
  std::uniform_real_distribution<double> u(-half, half);
  Configuration x(n, 4);
  for (auto& c : x.raw()) c = u(rng);
  return x;
}

cplx line(const FeynmanGraph& g, std::size_t e, std::span<const double> a, std::span<const double> b) {
  std::vector<double> y(4);
  for (std::size_t mu = 0; mu < 4; ++mu) y[mu] = a[mu] - b[mu];
  return edge_factor(kernel_spec(g, g.edges()[e]), y, MetricParams{}, Mode::euclidean, g.edges()[e].multiplicity);
}

FeynmanGraph two_fishes() {
  GraphSpec s;
  s.vertices = {fixtures::external("e1"), fixtures::internal("v1"), fixtures::internal("v2"),
                fixtures::internal("v3"), fixtures::internal("v4"), fixtures::external("e2")};
  s.edges = {fixtures::line("e1", "v1"), fixtures::line("v1", "v2", 2), fixtures::line("v2", "v3"),
             fixtures::line("v3", "v4", 2), fixtures::line("v4", "e2")};
  return build_graph(s);
}

// v1=v2 double line, then v2-v3-e1; {v1,v2} is the only part
FeynmanGraph fish_tail() {
  GraphSpec s;
  s.vertices = {fixtures::internal("v1"), fixtures::internal("v2"), fixtures::internal("v3"), fixtures::external("e1")};
  s.edges = {fixtures::line("v1", "v2", 2), fixtures::line("v2", "v3"), fixtures::line("v3", "e1")};
  return build_graph(s);
}

std::size_t part_index(const ForestFamily& fam, const std::string& label) {
  for (std::size_t i = 0; i < fam.all_parts.size(); ++i)
    if (fam.all_parts[i].subgraph.label() == label) return i;
  throw std::logic_error("no part " + label);
}
}  // namespace

TEST_CASE("graphs without proper parts are not subtracted", "[renorm]") {
  std::mt19937_64 rng(1);
  for (const char* name : {"edge_massless", "settingsun_core", "fish_core", "edge_massive"}) {
    const auto g = fixtures::graph(name);
    const RWeight r(g, {});
    REQUIRE(r.proper_forests().size() == 1);
    for (int t = 0; t < 5; ++t) {
      const auto x = random_config(rng, g.vertex_count());
      CHECK(r.proper(x) == r.unsubtracted(x));
    }
  }
}

TEST_CASE("chain forest sum against explicit terms", "[renorm]") {
  const auto g = fixtures::graph("chain");
  const RWeight r(g, {});
  REQUIRE(r.top_part().has_value());
  REQUIRE(r.proper_forests().size() == 3);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_config(rng, 3);
    const auto p1 = x.point(0), p2 = x.point(1), p3 = x.point(2);
    std::vector<double> m12(4), m23(4);
    for (std::size_t mu = 0; mu < 4; ++mu) {
      m12[mu] = 0.5 * (p1[mu] + p2[mu]);
      m23[mu] = 0.5 * (p2[mu] + p3[mu]);
    }
    const cplx u = line(g, 0, p1, p2) * line(g, 1, p2, p3);
    const cplx t12 = -line(g, 0, p1, p2) * line(g, 1, m12, p3);
    const cplx t23 = -line(g, 0, p1, m23) * line(g, 1, p2, p3);
    const cplx expect = u + t12 + t23;
    CHECK(std::abs(r.proper(x) - expect) <= 1e-12 * (std::abs(u) + std::abs(t12) + std::abs(t23)));
  }
}

TEST_CASE("disjoint parts may be applied in either order", "[renorm]") {
  const auto g = two_fishes();
  const RWeight r(g, {});
  const auto& fam = r.family();
  const auto a = part_index(fam, "{v1,v2}"), b = part_index(fam, "{v3,v4}");
  const Forest f{{std::min(a, b), std::max(a, b)}};
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const auto x = random_config(rng, g.vertex_count());
    const cplx ab = r.forest_term(f, x, {a, b}), ba = r.forest_term(f, x, {b, a});
    CHECK(std::abs(ab - ba) <= 1e-12 * std::abs(ab));
    CHECK(ab != cplx{});
  }
}

TEST_CASE("top-level subtraction acts on the test function", "[renorm]") {
  std::mt19937_64 rng(4);
  SECTION("zeroth order") {
    const auto g = fixtures::graph("fish_core");
    const RWeight r(g, {});
    const auto f = TestFunction::bumps(2, 4, 1.0);
    for (int t = 0; t < 10; ++t) {
      const auto x = random_config(rng, 2, 0.45);
      Configuration mid(2, 4);
      for (int mu = 0; mu < 4; ++mu) mid.at(0, mu) = mid.at(1, mu) = 0.5 * (x.at(0, mu) + x.at(1, mu));
      CHECK(subtracted_test_function(r, f, x).real() == Approx(f.value(x) - f.value(mid)).epsilon(1e-12));
    }
  }
  SECTION("second order along the ray from the co-moving point") {
    const auto g = fixtures::graph("settingsun_core");
    const RWeight r(g, {});
    const auto f = TestFunction::bumps(2, 4, 1.0);
    for (int t = 0; t < 10; ++t) {
      const auto x = random_config(rng, 2, 0.45);
      auto along = [&](double l) {
        Configuration y(2, 4);
        for (std::size_t v = 0; v < 2; ++v)
          for (int mu = 0; mu < 4; ++mu) {
            const double c = 0.5 * (x.at(0, mu) + x.at(1, mu));
            y.at(v, mu) = c + l * (x.at(v, mu) - c);
          }
        return f.value(y);
      };
      const double h = 1e-3;
      const double g0 = along(0), g1 = (along(h) - along(-h)) / (2 * h), g2 = (along(h) - 2 * g0 + along(-h)) / (h * h);
      const double poly = g0 + g1 + 0.5 * g2;
      CHECK(test_taylor(f, *r.top_step(), x).real() == Approx(poly).epsilon(1e-5));
      CHECK(subtracted_test_function(r, f, x).real() == Approx(f.value(x) - poly).margin(1e-6));
    }
  }
  SECTION("outside the support") {
    const auto g = fixtures::graph("fish_core");
    const RWeight r(g, {});
    const auto f = TestFunction::bumps(2, 4, 1.0);
    Configuration x(2, 4);
    x.at(0, 0) = 2.0;
    CHECK(subtracted_test_function(r, f, x) == cplx{});
  }
}

TEST_CASE("pairing estimates agree across integrators and threads", "[renorm]") {
  const auto g = fixtures::graph("fish");
  const RWeight r(g, {});
  const auto f = TestFunction::bumps(g.vertex_count(), 4, 1.0);
  IntegratorOptions io;
  io.samples = 40000;
  io.threads = 1;
  const auto mc = pair(r, f, io);
  io.threads = 4;
  const auto mc4 = pair(r, f, io);
  CHECK(mc.value.value == mc4.value.value);
  io.kind = Integrator::qmc;
  const auto q = pair(r, f, io);
  CHECK(std::abs(mc.value.value - q.value.value) <= 5 * std::hypot(mc.value.error, q.value.error));
  CHECK(mc.failures == 0);
  CHECK_THROWS_AS(pair(r, TestFunction::bumps(2, 4, 1.0), io), std::invalid_argument);
}

TEST_CASE("cutoff profile", "[renorm]") {
  const auto g = fixtures::graph("fish_core");
  const RWeight r(g, {});
  const Cutoff chi{0.5};
  Configuration x(2, 4);
  x.at(1, 0) = 0.2;  // rho = 0.1 * sqrt(2)
  CHECK(chi.value(r.step_of(0), x) == 1.0);
  x.at(1, 0) = 0.6;
  CHECK(chi.value(r.step_of(0), x) == Approx(Cutoff::smooth_step(Jet(JetSpace::box({}), 2.0 - 2.0 * 0.3 * std::sqrt(2.0) / 0.5)).constant().real()));
  x.at(1, 0) = 1.0;
  CHECK(chi.value(r.step_of(0), x) == 0.0);
  const double mid = Cutoff::smooth_step(Jet(JetSpace::box({}), 0.5)).constant().real();
  CHECK(mid == Approx(0.5));
}

TEST_CASE("extension identity holds on common samples", "[renorm]") {
  IntegratorOptions io;
  io.samples = 4000;
  for (const char* name : {"fish_core", "fish", "settingsun"}) {
    const auto g = fixtures::graph(name);
    const RWeight r(g, {});
    const auto f = TestFunction::bumps(g.vertex_count(), 4, 1.0);
    const auto rep = eg_compare(r, f, Cutoff{}, io);
    INFO(name);
    CHECK(rep.top_level == (std::string(name) == "fish_core"));
    const double scale = std::abs(rep.u_wf.value) + std::abs(rep.tu_wf.value) + std::abs(rep.rem_twf.value);
    CHECK(rep.abs_discrepancy <= 1e-9 * scale);
  }
  CHECK_THROWS_AS(eg_compare(RWeight(fixtures::graph("chain"), {}), TestFunction::bumps(3, 4, 1.0), Cutoff{}, io),
                  std::invalid_argument);
}

TEST_CASE("counterterm records", "[renorm]") {
  SECTION("fish") {
    const auto g = fixtures::graph("fish");
    const auto parts = renorm_parts(g);
    REQUIRE(parts.size() == 1);
    const auto ct = counterterm_record(parts[0], {{std::vector<int>(8, 0), 1.0}});
    CHECK(ct.external_fields == 2);
    CHECK(ct.dimension_bar(std::vector<int>(8, 0)) == 2);
    std::vector<int> a1(8, 0);
    a1[0] = 1;
    CHECK_THROWS_AS(counterterm_record(parts[0], {{a1, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(counterterm_record(parts[0], {{std::vector<int>(4, 0), 1.0}}), std::invalid_argument);
  }
  SECTION("setting sun") {
    const auto g = fixtures::graph("settingsun");
    const auto parts = renorm_parts(g);
    REQUIRE(parts.size() == 1);
    REQUIRE(parts[0].subtraction_degree() == 2);
    std::vector<int> a2(8, 0), a3(8, 0);
    a2[0] = 1;
    a2[5] = 1;
    a3[1] = 3;
    const auto ct = counterterm_record(parts[0], {{a2, 0.5}});
    CHECK(ct.dimension_bar(a2) == 4);
    CHECK(ct.max_order == 2);
    CHECK_THROWS_WITH(counterterm_record(parts[0], {{a3, 1.0}}), Catch::Matchers::ContainsSubstring("exceeds the degree 2"));
  }
}

TEST_CASE("contraction merges parallel lines", "[renorm]") {
  GraphSpec s;
  s.vertices = {fixtures::internal("v1"), fixtures::internal("v2"), fixtures::internal("v3"), fixtures::external("e1")};
  s.edges = {fixtures::line("v1", "v2", 2), fixtures::line("v1", "v3"), fixtures::line("v2", "v3"), fixtures::line("v3", "e1")};
  const auto g = build_graph(s);
  const Subgraph gamma = full_vertex_part(g, {"v1", "v2"});
  const auto c = contract(g, gamma);
  CHECK(c.ids == std::vector<std::string>{"{v1,v2}", "v3", "e1"});
  REQUIRE(c.edges.size() == 2);
  CHECK(c.edges[0].multiplicity == 2);
  CHECK(c.edges[1].multiplicity == 1);
  CHECK(c.new_index == std::vector<std::size_t>{0, 0, 1, 2});
}

TEST_CASE("counterterm pairing against the contracted graph", "[renorm]") {
  const auto g = fish_tail();
  const auto parts = renorm_parts(g);
  REQUIRE(parts.size() == 1);
  TestFunction f;
  f.regions.assign(4, Region{Region::Kind::box, {0, 0, 0, 0}, 0.5});
  IntegratorOptions io;
  io.samples = 40000;
  const auto ct = counterterm_record(parts[0], {{std::vector<int>(8, 0), 1.0}});
  const auto a = apply_counterterm(g, ct, f, EvalOptions{}, io);

  // the same integral as a pairing of the contracted graph with a merged external vertex
  GraphSpec s;
  s.vertices = {fixtures::external("m"), fixtures::internal("v3"), fixtures::external("e1")};
  s.edges = {fixtures::line("m", "v3"), fixtures::line("v3", "e1")};
  const auto gc = build_graph(s);
  TestFunction fc;
  fc.regions.assign(3, f.regions[0]);
  const auto b = pair(RWeight(gc, {}), fc, io);
  CHECK(a.value.value.real() == Approx(b.value.value.real()).epsilon(1e-12));

  const auto zero = counterterm_record(parts[0], {{std::vector<int>(8, 0), 0.0}});
  CHECK(apply_counterterm(g, zero, f, EvalOptions{}, io).value.value == cplx{});

  // a linear counterterm on a constant test function vanishes
  std::vector<int> a1(8, 0);
  a1[2] = 1;
  const auto lin = counterterm_record(parts[0].subgraph, 1, {{a1, 1.0}});
  CHECK(std::abs(apply_counterterm(g, lin, f, EvalOptions{}, io).value.value) == 0.0);
}

TEST_CASE("derivative counterterms integrate by parts", "[renorm]") {
  // c D_x delta paired with f: integrand -c (d f / d x) at the merged point
  const auto g = fish_tail();
  const auto parts = renorm_parts(g);
  auto f = TestFunction::bumps(4, 4, 1.0);
  IntegratorOptions io;
  io.samples = 20000;
  std::vector<int> a1(8, 0), b1(8, 0);
  a1[0] = 1;  // v1, component 0
  b1[4] = 1;  // v2, component 0
  const auto ca = apply_counterterm(g, counterterm_record(parts[0].subgraph, 1, {{a1, 1.0}}), f, EvalOptions{}, io);
  const auto cb = apply_counterterm(g, counterterm_record(parts[0].subgraph, 1, {{b1, 1.0}}), f, EvalOptions{}, io);
  // the bump product is symmetric in v1 and v2, so both slots give the same pairing
  CHECK(ca.value.value.real() == Approx(cb.value.value.real()).epsilon(1e-12));
  const auto both = apply_counterterm(g, counterterm_record(parts[0].subgraph, 1, {{a1, 1.0}, {b1, -1.0}}), f, EvalOptions{}, io);
  CHECK(std::abs(both.value.value) <= 1e-12 * std::abs(ca.value.value) + 1e-300);
}

TEST_CASE("solving for the constant coefficient", "[renorm]") {
  CHECK(reconcile_c0(5.0, 1.0, 2.0) == cplx(2.0));
  CHECK(reconcile_c0(cplx(1, 1), 0.0, cplx(0, 1)) == cplx(1, -1));
  CHECK_THROWS_AS(reconcile_c0(1.0, 0.0, 0.0), std::domain_error);
}

TEST_CASE("spatial configurations agree between modes", "[renorm]") {
  const auto g = fixtures::graph("chain");
  RenormOptions eu, mk;
  mk.eval.mode = Mode::minkowski_eps;
  mk.eval.metric.epsilon = 0.1;
  const RWeight re(g, eu), rm(g, mk);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 10; ++t) {
    auto x = random_config(rng, 3);
    for (std::size_t v = 0; v < 3; ++v) x.at(v, 0) = 0.0;
    CHECK(std::abs(re.proper(x) - rm.proper(x)) <= 1e-10 * std::abs(re.proper(x)));
  }
  // timelike separations acquire a phase
  Configuration y(3, 4);
  y.at(1, 0) = 1.0;
  y.at(2, 0) = 2.0;
  y.at(2, 1) = 0.1;
  CHECK(std::abs(rm.proper(y).imag()) > 0.0);
}
