#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "graph.hpp"
#include "power.hpp"

namespace bphz {

/// A renormalization part together with the Taylor degree used for it.
struct RenormPart {
  Subgraph subgraph;
  DegreeReport degrees;

  VertexSet vertices() const { return subgraph.vertices; }
  int subtraction_degree() const { return degrees.subtraction_degree.value_or(0); }
};

struct Forest {
  std::vector<std::size_t> parts;  // indices into ForestFamily::all_parts, ascending

  bool contains(std::size_t p) const { return std::find(parts.begin(), parts.end(), p) != parts.end(); }
  friend bool operator==(const Forest&, const Forest&) = default;
};

struct ForestFamily {
  const FeynmanGraph* graph = nullptr;
  std::vector<RenormPart> all_parts;
  std::vector<Forest> forests;
};

struct ForestOptions {
  std::size_t max_internal_vertices = 12;
  /// Oversubtraction: raise the Taylor degree of specific parts above floor(deg).
  std::map<std::uint64_t, int> degree_override;
};

class EnumerationBoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Connected full vertex parts of internal vertices with degree >= 0, found by subset scan.
inline std::vector<RenormPart> renorm_parts(const FeynmanGraph& g, const ForestOptions& opt = {}) {
  const auto internal = g.internal_vertices().indices();
  if (internal.size() > opt.max_internal_vertices)
    throw EnumerationBoundError("graph has " + std::to_string(internal.size()) +
                                " internal vertices; enumeration bound is " +
                                std::to_string(opt.max_internal_vertices));
  std::vector<RenormPart> parts;
  const std::uint64_t n = std::uint64_t{1} << internal.size();
  for (std::uint64_t m = 1; m < n; ++m) {
    if (std::popcount(m) < 2) continue;
    VertexSet s;
    for (std::size_t j = 0; j < internal.size(); ++j)
      if ((m >> j) & 1U) s.insert(internal[j]);
    auto sg = full_vertex_part(g, s);
    std::optional<int> ov;
    if (auto it = opt.degree_override.find(s.bits()); it != opt.degree_override.end()) ov = it->second;
    auto rep = degree_report(sg, ov);
    if (rep.is_renorm_part) parts.push_back(RenormPart{std::move(sg), rep});
  }
  std::sort(parts.begin(), parts.end(),
            [](const RenormPart& a, const RenormPart& b) { return a.vertices() < b.vertices(); });
  return parts;
}

inline bool is_valid_forest(const std::vector<RenormPart>& parts, const Forest& f) {
  for (std::size_t i = 0; i < f.parts.size(); ++i)
    for (std::size_t j = i + 1; j < f.parts.size(); ++j)
      if (overlaps(parts[f.parts[i]].vertices(), parts[f.parts[j]].vertices())) return false;
  return true;
}

namespace detail {
inline void extend_forests(const std::vector<RenormPart>& parts, std::size_t next, std::vector<std::size_t>& chosen,
                           std::vector<Forest>& out) {
  out.push_back(Forest{chosen});
  for (std::size_t p = next; p < parts.size(); ++p) {
    bool ok = true;
    for (auto q : chosen)
      if (overlaps(parts[p].vertices(), parts[q].vertices())) {
        ok = false;
        break;
      }
    if (!ok) continue;
    chosen.push_back(p);
    extend_forests(parts, p + 1, chosen, out);
    chosen.pop_back();
  }
}
}  // namespace detail

/// All pairwise non-overlapping sets of renormalization parts, the empty forest included.
inline ForestFamily enumerate_forests(const FeynmanGraph& g, const ForestOptions& opt = {}) {
  ForestFamily fam;
  fam.graph = &g;
  fam.all_parts = renorm_parts(g, opt);
  std::vector<std::size_t> chosen;
  detail::extend_forests(fam.all_parts, 0, chosen, fam.forests);
  std::sort(fam.forests.begin(), fam.forests.end(), [](const Forest& a, const Forest& b) {
    if (a.parts.size() != b.parts.size()) return a.parts.size() < b.parts.size();
    return a.parts < b.parts;
  });
  return fam;
}

/// Operators applied first come first: inner parts before the parts containing them.
inline std::vector<std::size_t> application_order(const ForestFamily& fam, const Forest& f) {
  auto order = f.parts;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fam.all_parts[a].vertices() < fam.all_parts[b].vertices();
  });
  return order;
}

inline std::string forest_label(const ForestFamily& fam, const Forest& f) {
  if (f.parts.empty()) return "{}";
  std::vector<VertexSet> sets;
  for (auto p : f.parts) sets.push_back(fam.all_parts[p].vertices());
  std::sort(sets.begin(), sets.end());
  std::string out;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (i) out += ";";
    out += fam.graph->label(sets[i]);
  }
  return out;
}

/// Largest sum of subtraction degrees over the forests of the family.
inline int max_forest_degree(const ForestFamily& fam) {
  int best = 0;
  for (const auto& f : fam.forests) {
    int s = 0;
    for (auto p : f.parts) s += fam.all_parts[p].subtraction_degree();
    best = std::max(best, s);
  }
  return best;
}

}  // namespace bphz
