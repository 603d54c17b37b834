#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "configuration.hpp"
#include "graph.hpp"

namespace bphz {

/// Propagator data carried by one line.
struct KernelSpec {
  double mass = 0.0;
  int edge_derivatives = 0;
  int dimension = 4;
};

inline KernelSpec kernel_spec(const FeynmanGraph& g, const Edge& e) { return {e.mass, e.derivatives, g.dimension()}; }

struct DegreeReport {
  double uv_sd = 0.0;
  double uv_deg = 0.0;
  std::optional<int> subtraction_degree;  // empty: not divergent
  bool is_renorm_part = false;
};

/// Short-distance scaling of one scalar line: G ~ |x|^{-(d-2)}, each derivative adds one.
inline double edge_uv_sd(const KernelSpec& k) { return static_cast<double>(k.dimension - 2 + k.edge_derivatives); }

inline double uv_sd(const Subgraph& sg) {
  double sd = 0.0;
  for (auto ei : sg.edges) {
    const auto& e = sg.parent->edges()[ei];
    sd += e.multiplicity * edge_uv_sd(kernel_spec(*sg.parent, e));
  }
  return sd;
}

inline double uv_degree(const Subgraph& sg) {
  return uv_sd(sg) - sg.parent->dimension() * (static_cast<double>(sg.vertices.size()) - 1.0);
}

/// Four-dimensional counting from field content: 4 + |fields| - 4|vertices| + |derivatives|.
inline int general_degree(int nfields, int nvertices, int nderivs) { return 4 + nfields - 4 * nvertices + nderivs; }

inline std::optional<int> subtraction_degree_of(double deg) {
  if (deg < 0.0) return std::nullopt;
  return static_cast<int>(std::floor(deg));
}

inline DegreeReport degree_report(const Subgraph& sg, std::optional<int> degree_override = std::nullopt) {
  DegreeReport r;
  r.uv_sd = uv_sd(sg);
  r.uv_deg = uv_degree(sg);
  r.subtraction_degree = subtraction_degree_of(r.uv_deg);
  r.is_renorm_part = r.subtraction_degree.has_value() && is_connected(sg);
  if (r.is_renorm_part && degree_override) {
    if (*degree_override < *r.subtraction_degree)
      throw std::invalid_argument("subtraction degree override below the minimal degree for " + sg.label());
    r.subtraction_degree = degree_override;
  }
  return r;
}

/// Connected and power-counting divergent (degree >= 0, zero included).
inline DegreeReport is_renorm_part(const Subgraph& sg, std::optional<int> degree_override = std::nullopt) {
  return degree_report(sg, degree_override);
}

enum class SubtractionMode { edge_count, sd_weighted, arithmetic_mean };

inline std::string to_string(SubtractionMode m) {
  switch (m) {
    case SubtractionMode::edge_count: return "edge-count";
    case SubtractionMode::sd_weighted: return "sd-weighted";
    case SubtractionMode::arithmetic_mean: return "arithmetic-mean";
  }
  return "?";
}

inline SubtractionMode parse_subtraction_mode(const std::string& s) {
  if (s == "edge-count") return SubtractionMode::edge_count;
  if (s == "sd-weighted") return SubtractionMode::sd_weighted;
  if (s == "arithmetic-mean") return SubtractionMode::arithmetic_mean;
  throw std::invalid_argument("unknown subtraction-point mode '" + s + "'");
}

/// Convex weights (indexed by parent vertex) defining the co-moving subtraction point.
inline std::vector<double> subtraction_weights(const Subgraph& sg, SubtractionMode mode) {
  const auto& g = *sg.parent;
  std::vector<double> w(g.vertex_count(), 0.0);
  const auto members = sg.vertices.indices();
  switch (mode) {
    case SubtractionMode::arithmetic_mean:
      for (auto v : members) w[v] = 1.0 / static_cast<double>(members.size());
      break;
    case SubtractionMode::edge_count: {
      const int m = sg.total_multiplicity();
      if (m == 0) throw std::invalid_argument("edge-count subtraction point needs at least one line in " + sg.label());
      for (auto v : members) w[v] = incident_multiplicity(sg, v) / (2.0 * m);
      break;
    }
    case SubtractionMode::sd_weighted: {
      const double sd = uv_sd(sg);
      if (!(sd > 0.0)) throw std::invalid_argument("sd-weighted subtraction point needs sd > 0 in " + sg.label());
      for (auto ei : sg.edges) {
        const auto& e = g.edges()[ei];
        const double half = 0.5 * e.multiplicity * edge_uv_sd(kernel_spec(g, e));
        w[e.source] += half / sd;
        w[e.target] += half / sd;
      }
      break;
    }
  }
  return w;
}

inline std::vector<double> subtraction_point(const Subgraph& sg, const Configuration& x, SubtractionMode mode) {
  const auto w = subtraction_weights(sg, mode);
  std::vector<double> p(static_cast<std::size_t>(x.dim()), 0.0);
  for (auto v : sg.vertices.indices())
    for (int mu = 0; mu < x.dim(); ++mu) p[static_cast<std::size_t>(mu)] += w[v] * x.at(v, mu);
  return p;
}

/// Large-argument scaling of one line; massive lines decay exponentially.
inline double edge_ir_sd(const KernelSpec& k) {
  if (k.mass > 0.0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(k.dimension - 2 + k.edge_derivatives);
}

/// Sum over lines touching `I` of multiplicity times the line's IR scaling (each line once).
inline double ir_sd_subset(const FeynmanGraph& g, VertexSet I) {
  if (!I.subset_of(g.internal_vertices()))
    throw GraphError(GraphError::Kind::unknown_vertex, "IR subset must contain internal vertices only");
  double sd = 0.0;
  for (const auto& e : g.edges()) {
    if (!(I.contains(e.source) || I.contains(e.target))) continue;
    sd += e.multiplicity * edge_ir_sd(kernel_spec(g, e));
  }
  return sd;
}

struct CouplingCondition {
  bool holds = true;
  std::optional<VertexSet> witness;  // a violating subset when !holds
  double witness_sd = 0.0;
};

/// Checks sd_I > dimension * |I| for every nonempty subset of internal vertices.
inline CouplingCondition coupling_limit_condition(const FeynmanGraph& g) {
  const auto internal = g.internal_vertices().indices();
  if (internal.size() > 20) throw std::invalid_argument("coupling condition scan is limited to 20 internal vertices");
  CouplingCondition out;
  const std::uint64_t n = std::uint64_t{1} << internal.size();
  // Largest violating subsets first, so the witness is the most informative one.
  std::vector<VertexSet> subsets;
  for (std::uint64_t m = 1; m < n; ++m) {
    VertexSet I;
    for (std::size_t j = 0; j < internal.size(); ++j)
      if ((m >> j) & 1U) I.insert(internal[j]);
    subsets.push_back(I);
  }
  std::sort(subsets.begin(), subsets.end(), [](VertexSet a, VertexSet b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.indices() < b.indices();
  });
  for (auto I : subsets) {
    const double sd = ir_sd_subset(g, I);
    if (!(sd > g.dimension() * static_cast<double>(I.size()))) {
      out.holds = false;
      out.witness = I;
      out.witness_sd = sd;
      return out;
    }
  }
  return out;
}

}  // namespace bphz
