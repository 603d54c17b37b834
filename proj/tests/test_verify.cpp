#include <catch_amalgamated.hpp>

#include <cmath>

#include "fixtures.hpp"

using namespace bphz;
using Catch::Approx;

namespace {
std::vector<double> geometric(double start, double ratio, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(start * std::pow(ratio, i));
  return g;
}

Configuration direction(std::size_t n, std::size_t v) {
  Configuration d(n, 4);
  const double u[4] = {0.3, 0.4, 0.5, std::sqrt(0.5)};
  for (int mu = 0; mu < 4; ++mu) d.at(v, mu) = u[mu];
  return d;
}

ConfigEvaluator weight_of(const FeynmanGraph& g) {
  return [&g](const Configuration& x) { return weight_eval(g, x, MetricParams{}, Mode::euclidean); };
}
}  // namespace

TEST_CASE("least squares line", "[verify]") {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = fit_line(x, y);
  CHECK(f.slope == Approx(2.0));
  CHECK(f.intercept == Approx(1.0));
  CHECK(f.r2 == Approx(1.0));
}

TEST_CASE("short-distance scaling of single lines and the setting sun", "[verify]") {
  const auto massless = fixtures::graph("edge_massless");
  const auto massive = fixtures::graph("edge_massive");
  const auto sun = fixtures::graph("settingsun_core");
  const Configuration base(2, 4);
  const auto I = VertexSet::of({1});
  CHECK(estimate_uv_sd(weight_of(massless), I, base, direction(2, 1), geometric(0.5, 0.5, 10)).slope == Approx(2.0).margin(0.05));
  CHECK(estimate_uv_sd(weight_of(massive), I, base, direction(2, 1), geometric(1e-2, 0.5, 12)).slope == Approx(2.0).margin(0.05));
  CHECK(estimate_uv_sd(weight_of(sun), I, base, direction(2, 1), geometric(0.5, 0.5, 10)).slope == Approx(6.0).margin(0.05));
}

TEST_CASE("long-distance behaviour", "[verify]") {
  const auto massless = fixtures::graph("edge_massless");
  const auto massive = fixtures::graph("edge_massive");
  const Configuration base(2, 4);
  const auto I = VertexSet::of({1});
  const auto ml = estimate_ir_sd(weight_of(massless), I, base, direction(2, 1), geometric(1.0, 2.0, 8));
  CHECK(ml.slope == Approx(2.0).margin(0.05));
  CHECK_FALSE(ml.superpolynomial);
  const auto mv = estimate_ir_sd(weight_of(massive), I, base, direction(2, 1), geometric(1.0, 2.0, 8));
  CHECK(mv.superpolynomial);
  CHECK(mv.slope > 4.0);
}

TEST_CASE("scaling grids are validated", "[verify]") {
  const auto g = fixtures::graph("edge_massless");
  const Configuration base(2, 4);
  CHECK_THROWS_AS(estimate_uv_sd(weight_of(g), VertexSet::of({1}), base, direction(2, 1), {0.1, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(estimate_ir_sd(weight_of(g), VertexSet::of({1}), base, direction(2, 1), {2.0, 1.0}), std::invalid_argument);
  const ConfigEvaluator zero = [](const Configuration&) { return cplx{}; };
  CHECK_THROWS(estimate_uv_sd(zero, VertexSet::of({1}), base, direction(2, 1), {0.2, 0.1}));
}

TEST_CASE("verdict names", "[verify]") {
  CHECK(to_string(Verdict::converges) == "converges");
  CHECK(to_string(Verdict::diverges_log) == "diverges-log");
  CHECK(to_string(Verdict::diverges_power) == "diverges-power");
  CHECK(to_string(Verdict::diverges) == "diverges");
  CHECK(to_string(Verdict::inconclusive) == "inconclusive");
}

TEST_CASE("shell probe on an integrable line", "[verify]") {
  const auto g = fixtures::graph("edge_massless");
  const RWeight r(g, {});
  ShellOptions so;
  so.integrator.samples = 4000;
  const auto rep = integrability_probe(r, VertexSet::of({0, 1}), TestFunction::bumps(2, 4, 1.0), false, so);
  CHECK(rep.rows.size() == so.radii.size() - 1);
  CHECK(rep.verdict == Verdict::converges);
  // shells shrink like r^2 for a 1/r^2 kernel in four dimensions
  CHECK(rep.details.at("shell_exponent") == Approx(2.0).margin(0.3));
  CHECK_THROWS_AS(integrability_probe(r, VertexSet::of({0}), TestFunction::bumps(2, 4, 1.0), false, so),
                  std::invalid_argument);
}

TEST_CASE("imaginary part of the phase", "[verify]") {
  const auto g = fixtures::graph("fish_core");
  Configuration x(2, 4);
  x.at(1, 0) = 1.0;
  CHECK(im_sigma(g, x, 0.1) == Approx(0.1 * std::sqrt(2.0)));
  x.at(1, 0) = 0.0;
  x.at(1, 1) = 1.0;
  CHECK(im_sigma(g, x, 0.1) == 0.0);
}

TEST_CASE("epsilon probe at a spacelike configuration", "[verify]") {
  const auto g = fixtures::graph("fish");
  Configuration x(4, 4);
  x.at(0, 1) = -1.0;
  x.at(1, 1) = -0.3;
  x.at(1, 0) = 0.1;
  x.at(2, 1) = 0.3;
  x.at(3, 1) = 1.0;
  const auto rep = epsilon_limit_probe(g, {}, x, {});
  CHECK(rep.rows.size() == 7);
  CHECK(rep.details.at("timelike_pairs") == 0.0);
  CHECK(rep.verdict == Verdict::converges);
  CHECK(rep.details.at("bound_exponent") <= rep.details.at("allowed_exponent"));
}

TEST_CASE("coupling probe without internal vertices", "[verify]") {
  const auto g = fixtures::graph("edge_massless");
  const RWeight r(g, {});
  const auto rep = coupling_limit_probe(r, TestFunction::bumps(2, 4, 1.0), {});
  CHECK(rep.verdict == Verdict::converges);
  CHECK(rep.note == "no internal vertices");
}
