#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bphz {

/// Validation failure while building or querying a graph.
class GraphError : public std::runtime_error {
 public:
  enum class Kind {
    duplicate_id,
    dangling_endpoint,
    external_valency,
    internal_valency,
    self_loop,
    bad_multiplicity,
    bad_mass,
    bad_derivatives,
    bad_dimension,
    too_many_vertices,
    unknown_vertex,
    subset_too_small,
    not_in_subgraph,
  };

  GraphError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

enum class VertexKind { internal, external };

/// Set of vertex indices of one graph, stored as a 64-bit mask.
class VertexSet {
 public:
  constexpr VertexSet() = default;
  constexpr explicit VertexSet(std::uint64_t bits) : bits_(bits) {}

  static VertexSet of(std::initializer_list<std::size_t> idx) {
    VertexSet s;
    for (auto i : idx) s.insert(i);
    return s;
  }

  void insert(std::size_t i) { bits_ |= (std::uint64_t{1} << i); }
  void erase(std::size_t i) { bits_ &= ~(std::uint64_t{1} << i); }
  bool contains(std::size_t i) const { return i < 64 && ((bits_ >> i) & 1U) != 0; }
  std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  bool empty() const { return bits_ == 0; }
  std::uint64_t bits() const { return bits_; }

  bool subset_of(VertexSet o) const { return (bits_ & ~o.bits_) == 0; }
  bool disjoint(VertexSet o) const { return (bits_ & o.bits_) == 0; }
  VertexSet operator|(VertexSet o) const { return VertexSet(bits_ | o.bits_); }
  VertexSet operator&(VertexSet o) const { return VertexSet(bits_ & o.bits_); }
  VertexSet operator-(VertexSet o) const { return VertexSet(bits_ & ~o.bits_); }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::uint64_t b = bits_; b != 0; b &= b - 1) out.push_back(static_cast<std::size_t>(std::countr_zero(b)));
    return out;
  }
  std::size_t front() const { return static_cast<std::size_t>(std::countr_zero(bits_)); }

  friend bool operator==(VertexSet, VertexSet) = default;
  /// Size first, then lexicographic on sorted indices.
  friend bool operator<(VertexSet a, VertexSet b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.indices() < b.indices();
  }

 private:
  std::uint64_t bits_ = 0;
};

struct Vertex {
  std::string id;
  VertexKind kind = VertexKind::internal;
  int derivatives = 0;
};

/// One kernel-decorated line; parallel lines are folded into `multiplicity`.
struct Edge {
  std::size_t source = 0;
  std::size_t target = 0;
  int multiplicity = 1;
  double mass = 0.0;
  int derivatives = 0;

  bool touches(std::size_t v) const { return source == v || target == v; }
  bool inside(VertexSet s) const { return s.contains(source) && s.contains(target); }
};

/// Input description, as read from a graph file.
struct GraphSpec {
  struct VertexEntry {
    std::string id;
    VertexKind kind = VertexKind::internal;
    int derivatives = 0;
  };
  struct EdgeEntry {
    std::string source;
    std::string target;
    int multiplicity = 1;
    double mass = 0.0;
    int derivatives = 0;
  };
  int dimension = 4;
  std::vector<VertexEntry> vertices;
  std::vector<EdgeEntry> edges;
};

class FeynmanGraph {
 public:
  static constexpr std::size_t max_vertices = 64;

  int dimension() const { return dimension_; }
  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Vertex& vertex(std::size_t i) const { return vertices_.at(i); }
  std::size_t vertex_count() const { return vertices_.size(); }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t index_of(const std::string& id) const {
    auto i = find(id);
    if (!i) throw GraphError(GraphError::Kind::unknown_vertex, "unknown vertex id '" + id + "'");
    return *i;
  }

  VertexSet all_vertices() const {
    VertexSet s;
    for (std::size_t i = 0; i < vertices_.size(); ++i) s.insert(i);
    return s;
  }
  VertexSet internal_vertices() const {
    VertexSet s;
    for (std::size_t i = 0; i < vertices_.size(); ++i)
      if (vertices_[i].kind == VertexKind::internal) s.insert(i);
    return s;
  }
  VertexSet external_vertices() const { return all_vertices() - internal_vertices(); }

  /// Sum of multiplicities of all lines at `v`.
  int valency(std::size_t v) const {
    int n = 0;
    for (const auto& e : edges_)
      if (e.touches(v)) n += e.multiplicity;
    return n;
  }

  int total_multiplicity() const {
    int n = 0;
    for (const auto& e : edges_) n += e.multiplicity;
    return n;
  }

  std::string label(VertexSet s) const {
    std::string out = "{";
    bool first = true;
    for (auto i : s.indices()) {
      if (!first) out += ",";
      out += vertices_[i].id;
      first = false;
    }
    return out + "}";
  }

  friend FeynmanGraph build_graph(const GraphSpec& spec);

 private:
  int dimension_ = 4;
  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::map<std::string, std::size_t> index_;
};

/// Validates `spec` and returns the immutable graph.
inline FeynmanGraph build_graph(const GraphSpec& spec) {
  using K = GraphError::Kind;
  if (spec.dimension < 1) throw GraphError(K::bad_dimension, "dimension must be a positive integer");
  if (spec.vertices.size() > FeynmanGraph::max_vertices)
    throw GraphError(K::too_many_vertices, "graphs are limited to 64 vertices");

  FeynmanGraph g;
  g.dimension_ = spec.dimension;
  for (const auto& v : spec.vertices) {
    if (g.index_.count(v.id) != 0) throw GraphError(K::duplicate_id, "duplicate vertex id '" + v.id + "'");
    if (v.derivatives < 0)
      throw GraphError(K::bad_derivatives, "vertex '" + v.id + "': derivatives must be >= 0");
    g.index_.emplace(v.id, g.vertices_.size());
    g.vertices_.push_back(Vertex{v.id, v.kind, v.derivatives});
  }

  std::size_t n = 0;
  for (const auto& e : spec.edges) {
    const std::string where = "edge " + std::to_string(n++) + " (" + e.source + "-" + e.target + ")";
    auto s = g.find(e.source);
    auto t = g.find(e.target);
    if (!s) throw GraphError(K::dangling_endpoint, where + ": dangling endpoint '" + e.source + "'");
    if (!t) throw GraphError(K::dangling_endpoint, where + ": dangling endpoint '" + e.target + "'");
    if (*s == *t) throw GraphError(K::self_loop, where + ": self-loop on vertex '" + e.source + "'");
    if (e.multiplicity < 1) throw GraphError(K::bad_multiplicity, where + ": multiplicity must be >= 1");
    if (!(e.mass >= 0.0)) throw GraphError(K::bad_mass, where + ": mass must be >= 0");
    if (e.derivatives < 0) throw GraphError(K::bad_derivatives, where + ": derivatives must be >= 0");
    g.edges_.push_back(Edge{*s, *t, e.multiplicity, e.mass, e.derivatives});
  }

  for (std::size_t i = 0; i < g.vertices_.size(); ++i) {
    const int val = g.valency(i);
    const auto& v = g.vertices_[i];
    if (v.kind == VertexKind::external && val != 1)
      throw GraphError(K::external_valency, "external valency: vertex '" + v.id + "' has " + std::to_string(val) +
                                                " incident lines, expected 1");
    if (v.kind == VertexKind::internal && val < 2)
      throw GraphError(K::internal_valency, "internal valency: vertex '" + v.id + "' has " + std::to_string(val) +
                                                " incident lines, expected at least 2");
  }
  return g;
}

/// Full vertex part: a vertex set together with every parent line between its members.
struct Subgraph {
  const FeynmanGraph* parent = nullptr;
  VertexSet vertices;
  std::vector<std::size_t> edges;

  int total_multiplicity() const {
    int n = 0;
    for (auto e : edges) n += parent->edges()[e].multiplicity;
    return n;
  }
  std::string label() const { return parent->label(vertices); }

  friend bool operator==(const Subgraph& a, const Subgraph& b) {
    return a.parent == b.parent && a.vertices == b.vertices && a.edges == b.edges;
  }
};

inline Subgraph full_vertex_part(const FeynmanGraph& g, VertexSet s) {
  if (!s.subset_of(g.all_vertices()))
    throw GraphError(GraphError::Kind::unknown_vertex, "vertex set contains indices outside the graph");
  if (s.size() < 2) throw GraphError(GraphError::Kind::subset_too_small, "a full vertex part needs at least 2 vertices");
  Subgraph out{&g, s, {}};
  for (std::size_t i = 0; i < g.edges().size(); ++i)
    if (g.edges()[i].inside(s)) out.edges.push_back(i);
  return out;
}

inline Subgraph full_vertex_part(const FeynmanGraph& g, const std::vector<std::string>& ids) {
  VertexSet s;
  for (const auto& id : ids) s.insert(g.index_of(id));
  return full_vertex_part(g, s);
}

inline bool is_connected(const Subgraph& sg) {
  if (sg.vertices.empty()) return false;
  const auto& edges = sg.parent->edges();
  VertexSet seen;
  std::queue<std::size_t> todo;
  todo.push(sg.vertices.front());
  seen.insert(sg.vertices.front());
  while (!todo.empty()) {
    const auto v = todo.front();
    todo.pop();
    for (auto ei : sg.edges) {
      const auto& e = edges[ei];
      if (!e.touches(v)) continue;
      const auto w = e.source == v ? e.target : e.source;
      if (!seen.contains(w)) {
        seen.insert(w);
        todo.push(w);
      }
    }
  }
  return seen == sg.vertices;
}

/// Neither nested nor disjoint, compared by vertex sets.
inline bool overlaps(VertexSet a, VertexSet b) {
  return !(a.subset_of(b) || b.subset_of(a) || a.disjoint(b));
}
inline bool overlaps(const Subgraph& a, const Subgraph& b) { return overlaps(a.vertices, b.vertices); }

inline int incident_multiplicity(const Subgraph& sg, std::size_t v) {
  if (!sg.vertices.contains(v))
    throw GraphError(GraphError::Kind::not_in_subgraph,
                     "vertex '" + sg.parent->vertex(v).id + "' is not in subgraph " + sg.label());
  int n = 0;
  for (auto ei : sg.edges)
    if (sg.parent->edges()[ei].touches(v)) n += sg.parent->edges()[ei].multiplicity;
  return n;
}

}  // namespace bphz
