#pragma once

#include <random>
#include <string>

#include "bphz/bphz.hpp"
#include "bphz/io.hpp"

namespace fixtures {

inline bphz::FeynmanGraph graph(const std::string& name) {
  return bphz::load_graph(std::string(BPHZ_DATA_DIR) + "/" + name + ".json");
}

inline bphz::GraphSpec::VertexEntry internal(const std::string& id) { return {id, bphz::VertexKind::internal, 0}; }
inline bphz::GraphSpec::VertexEntry external(const std::string& id) { return {id, bphz::VertexKind::external, 0}; }
inline bphz::GraphSpec::EdgeEntry line(const std::string& a, const std::string& b, int mult = 1, double mass = 0.0,
                                       int derivs = 0) {
  return {a, b, mult, mass, derivs};
}

/// Random valid graph: n internal vertices, random multi-lines, a few external legs.
inline bphz::FeynmanGraph random_graph(std::mt19937_64& rng, std::size_t n, int max_mult = 3, int max_derivs = 0,
                                       double massive_prob = 0.0) {
  std::uniform_int_distribution<int> mult(1, max_mult), der(0, max_derivs), coin(0, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bphz::GraphSpec s;
  for (std::size_t i = 0; i < n; ++i) s.vertices.push_back(internal("v" + std::to_string(i + 1)));
  std::vector<int> val(n, 0);
  auto add = [&](std::size_t a, std::size_t b) {
    const int m = mult(rng);
    s.edges.push_back(line(s.vertices[a].id, s.vertices[b].id, m, u(rng) < massive_prob ? 1.0 : 0.0, der(rng)));
    val[a] += m;
    val[b] += m;
  };
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (coin(rng) == 1) add(a, b);
  for (std::size_t a = 0; a < n && n > 1; ++a)
    while (val[a] < 2) add(a, (a + 1 + rng() % (n - 1)) % n);
  const std::size_t legs = n == 1 ? 2 + rng() % 2 : rng() % 3;
  for (std::size_t k = 0; k < legs && n > 0; ++k) {
    s.vertices.push_back(external("e" + std::to_string(k + 1)));
    s.edges.push_back(line(s.vertices.back().id, s.vertices[rng() % n].id, 1, u(rng) < massive_prob ? 1.0 : 0.0));
  }
  return bphz::build_graph(s);
}

}  // namespace fixtures
