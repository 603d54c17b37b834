#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "graph.hpp"
#include "integrate.hpp"

namespace bphz {

inline constexpr const char* version = "0.1.0";

/// Malformed graph file; `where` names the offending field or line.
class GraphFileError : public std::runtime_error {
 public:
  GraphFileError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
      throw GraphFileError(path + "." + it.key(), "unknown key");
  }
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw GraphFileError(path + "." + key, "missing");
  return *it;
}

inline int get_int(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number_integer()) throw GraphFileError(path, "expected an integer");
  return v.get<int>();
}

inline std::string get_string(const nlohmann::json& v, const std::string& path) {
  if (!v.is_string()) throw GraphFileError(path, "expected a string");
  return v.get<std::string>();
}

}  // namespace detail

inline GraphSpec parse_graph_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // translate the byte offset into a line number
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw GraphFileError("line " + std::to_string(line), "malformed JSON");
  }
  if (!j.is_object()) throw GraphFileError("$", "top level must be an object");
  detail::reject_unknown(j, {"dimension", "vertices", "edges"}, "$");

  GraphSpec s;
  s.dimension = detail::get_int(detail::require(j, "dimension", "$"), "$.dimension");
  const auto& vs = detail::require(j, "vertices", "$");
  if (!vs.is_array()) throw GraphFileError("$.vertices", "expected an array");
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const std::string p = "$.vertices[" + std::to_string(i) + "]";
    const auto& v = vs[i];
    if (!v.is_object()) throw GraphFileError(p, "expected an object");
    detail::reject_unknown(v, {"id", "kind", "derivatives"}, p);
    GraphSpec::VertexEntry e;
    e.id = detail::get_string(detail::require(v, "id", p), p + ".id");
    const auto kind = detail::get_string(detail::require(v, "kind", p), p + ".kind");
    if (kind == "internal")
      e.kind = VertexKind::internal;
    else if (kind == "external")
      e.kind = VertexKind::external;
    else
      throw GraphFileError(p + ".kind", "expected \"internal\" or \"external\"");
    if (v.contains("derivatives")) e.derivatives = detail::get_int(v["derivatives"], p + ".derivatives");
    s.vertices.push_back(e);
  }
  const auto& es = detail::require(j, "edges", "$");
  if (!es.is_array()) throw GraphFileError("$.edges", "expected an array");
  for (std::size_t i = 0; i < es.size(); ++i) {
    const std::string p = "$.edges[" + std::to_string(i) + "]";
    const auto& v = es[i];
    if (!v.is_object()) throw GraphFileError(p, "expected an object");
    detail::reject_unknown(v, {"source", "target", "multiplicity", "mass", "derivatives"}, p);
    GraphSpec::EdgeEntry e;
    e.source = detail::get_string(detail::require(v, "source", p), p + ".source");
    e.target = detail::get_string(detail::require(v, "target", p), p + ".target");
    if (v.contains("multiplicity")) e.multiplicity = detail::get_int(v["multiplicity"], p + ".multiplicity");
    if (v.contains("mass")) {
      if (!v["mass"].is_number()) throw GraphFileError(p + ".mass", "expected a number");
      e.mass = v["mass"].get<double>();
    }
    if (v.contains("derivatives")) e.derivatives = detail::get_int(v["derivatives"], p + ".derivatives");
    s.edges.push_back(e);
  }
  return s;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GraphFileError(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline FeynmanGraph load_graph(const std::string& path) { return build_graph(parse_graph_json(read_text_file(path))); }

/// FNV-1a over the file bytes.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Quotes a CSV field when it contains a comma, quote or newline.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct CsvRow {
  std::string quantity;
  cplx value;
  double error = 0.0;
  std::string integrator;  // empty for non-integrated quantities
};

struct CsvHeader {
  std::uint64_t graph_hash = 0;
  std::uint64_t seed = 0;
  std::string mode;
  double epsilon = 0.0;
};

inline std::string format_csv(const CsvHeader& h, const std::vector<CsvRow>& rows) {
  std::string out;
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(h.graph_hash));
  out += "# bphz " + std::string(version) + " graph_hash=" + hash + " seed=" + std::to_string(h.seed) +
         " mode=" + h.mode + " epsilon=" + format_double(h.epsilon) + "\n";
  out += "quantity,value_re,value_im,est_error,integrator,seed\n";
  for (const auto& r : rows) {
    out += csv_field(r.quantity) + "," + format_double(r.value.real()) + "," + format_double(r.value.imag()) + "," +
           format_double(r.error) + "," + (r.integrator.empty() ? "none" : r.integrator) + "," + std::to_string(h.seed) +
           "\n";
  }
  return out;
}

/// Minimal log-log line plot.
inline std::string loglog_svg(const std::string& title, const std::vector<double>& x, const std::vector<double>& y) {
  const double W = 480, H = 360, M = 50;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (x[i] > 0 && y[i] > 0) {
      lx.push_back(std::log10(x[i]));
      ly.push_back(std::log10(y[i]));
    }
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"360\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + format_double(M) + "\" y=\"20\" font-size=\"14\">" + title + "</text>\n";
  if (lx.size() >= 2) {
    const auto [x0, x1] = std::minmax_element(lx.begin(), lx.end());
    const auto [y0, y1] = std::minmax_element(ly.begin(), ly.end());
    const double dx = std::max(*x1 - *x0, 1e-12), dy = std::max(*y1 - *y0, 1e-12);
    std::string pts;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const double px = M + (lx[i] - *x0) / dx * (W - 2 * M);
      const double py = H - M - (ly[i] - *y0) / dy * (H - 2 * M);
      pts += format_double(px) + "," + format_double(py) + " ";
      s += "<circle cx=\"" + format_double(px) + "\" cy=\"" + format_double(py) + "\" r=\"3\"/>\n";
    }
    s += "<polyline fill=\"none\" stroke=\"black\" points=\"" + pts + "\"/>\n";
    s += "<text x=\"" + format_double(M) + "\" y=\"" + format_double(H - 10) + "\" font-size=\"11\">log10 x: " +
         format_double(*x0) + " .. " + format_double(*x1) + ", log10 y: " + format_double(*y0) + " .. " +
         format_double(*y1) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace bphz
