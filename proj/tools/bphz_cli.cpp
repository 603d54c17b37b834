// bphz command-line frontend.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include "bphz/bphz.hpp"
#include "bphz/io.hpp"

using namespace bphz;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_invalid = 2;
constexpr int exit_verdict = 3;

class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string graph_path;
  std::string mode = "euclidean";
  double epsilon = 0.0;
  std::uint64_t seed = 1;
  std::size_t samples = 100000;
  unsigned threads = 0;
  std::string integrator = "mc";
  std::string subtraction_point = "edge-count";
  std::string output;
  std::string plot;
  std::string point;  // JSON configuration
  std::vector<std::string> subset;
  std::vector<double> grid;
  double radius = 1.0;
  double rho_w = 0.5;
  double tolerance = 1e-6;
  bool ir = false;
  bool subtracted = false;
  std::string expect;
};

struct Loaded {
  std::string bytes;
  FeynmanGraph graph;
};

Loaded load(const RunConfig& c) {
  Loaded l;
  l.bytes = read_text_file(c.graph_path);
  l.graph = build_graph(parse_graph_json(l.bytes));
  return l;
}

Mode mode_of(const RunConfig& c) {
  const Mode m = parse_mode(c.mode);
  if (m == Mode::minkowski_eps && !(c.epsilon > 0.0)) throw InvalidInput("--epsilon > 0 is required for minkowski-eps");
  return m;
}

RenormOptions renorm_options(const RunConfig& c) {
  RenormOptions o;
  o.eval.mode = mode_of(c);
  o.eval.metric.epsilon = c.epsilon > 0.0 ? c.epsilon : o.eval.metric.epsilon;
  o.point_mode = parse_subtraction_mode(c.subtraction_point);
  return o;
}

IntegratorOptions integrator_options(const RunConfig& c) {
  IntegratorOptions io;
  io.seed = c.seed;
  io.samples = c.samples;
  io.threads = c.threads;
  if (c.integrator == "mc")
    io.kind = Integrator::mc;
  else if (c.integrator == "qmc")
    io.kind = Integrator::qmc;
  else
    throw InvalidInput("unknown integrator '" + c.integrator + "' (mc or qmc)");
  return io;
}

CsvHeader header(const RunConfig& c, const Loaded& l) {
  return {fnv1a(l.bytes), c.seed, c.mode, c.epsilon};
}

void emit(const RunConfig& c, const std::string& text) {
  if (c.output.empty() || c.output == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(c.output, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + c.output);
  out << text;
}

void emit_plot(const RunConfig& c, const std::string& title, const std::vector<double>& x, const std::vector<double>& y) {
  if (c.plot.empty()) return;
  std::ofstream out(c.plot, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + c.plot);
  out << loglog_svg(title, x, y);
}

VertexSet vertex_set(const FeynmanGraph& g, const std::vector<std::string>& ids) {
  VertexSet s;
  for (const auto& id : ids) s.insert(g.index_of(id));
  return s;
}

/// Array of per-vertex coordinate arrays in vertex order, or an object keyed by vertex id.
Configuration parse_point(const FeynmanGraph& g, const std::string& text) {
  if (text.empty()) throw InvalidInput("--x is required");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    throw InvalidInput("--x is not valid JSON");
  }
  const int d = g.dimension();
  Configuration x(g.vertex_count(), d);
  auto put = [&](std::size_t v, const nlohmann::json& p, const std::string& where) {
    if (!p.is_array() || p.size() != static_cast<std::size_t>(d))
      throw InvalidInput(where + ": expected " + std::to_string(d) + " coordinates");
    for (int mu = 0; mu < d; ++mu) {
      if (!p[static_cast<std::size_t>(mu)].is_number()) throw InvalidInput(where + ": coordinates must be numbers");
      x.at(v, mu) = p[static_cast<std::size_t>(mu)].get<double>();
    }
  };
  if (j.is_array()) {
    if (j.size() != g.vertex_count()) throw InvalidInput("--x needs one point per vertex");
    for (std::size_t v = 0; v < j.size(); ++v) put(v, j[v], "--x[" + std::to_string(v) + "]");
  } else if (j.is_object()) {
    if (j.size() != g.vertex_count()) throw InvalidInput("--x needs one point per vertex");
    for (auto it = j.begin(); it != j.end(); ++it) put(g.index_of(it.key()), it.value(), "--x." + it.key());
  } else {
    throw InvalidInput("--x must be an array or an object");
  }
  return x;
}

TestFunction bumps_for(const FeynmanGraph& g, double radius) {
  return TestFunction::bumps(g.vertex_count(), g.dimension(), radius);
}

int verdict_exit(const RunConfig& c, Verdict v) {
  if (!c.expect.empty()) return to_string(v) == c.expect ? exit_ok : exit_verdict;
  return v == Verdict::inconclusive ? exit_verdict : exit_ok;
}

void add_report_rows(std::vector<CsvRow>& rows, const ProbeReport& rep) {
  for (const auto& [k, v] : rep.details) rows.push_back({k, v, 0.0, ""});
  rows.push_back({"verdict:" + to_string(rep.verdict), 1.0, 0.0, ""});
  if (!rep.note.empty()) rows.push_back({"note:" + rep.note, 0.0, 0.0, ""});
}

// commands

int cmd_validate(const RunConfig& c) {
  const auto l = load(c);
  const auto& g = l.graph;
  std::cout << "ok: " << g.vertex_count() << " vertices (" << g.internal_vertices().size() << " internal), "
            << g.edges().size() << " lines, dimension " << g.dimension() << "\n";
  return exit_ok;
}

int cmd_degrees(const RunConfig& c) {
  const auto l = load(c);
  const auto& g = l.graph;
  const auto internal = g.internal_vertices().indices();
  if (internal.size() > 20) throw InvalidInput("degrees scans subsets of at most 20 internal vertices");
  std::vector<std::pair<VertexSet, DegreeReport>> rows;
  for (std::uint64_t m = 1; m < (std::uint64_t{1} << internal.size()); ++m) {
    if (std::popcount(m) < 2) continue;
    VertexSet s;
    for (std::size_t j = 0; j < internal.size(); ++j)
      if ((m >> j) & 1U) s.insert(internal[j]);
    const auto sg = full_vertex_part(g, s);
    if (!is_connected(sg)) continue;
    rows.emplace_back(s, degree_report(sg));
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto h = header(c, l);
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(h.graph_hash));
  std::string out = "# bphz " + std::string(version) + " graph_hash=" + hash + " seed=" + std::to_string(h.seed) +
                    " mode=" + h.mode + " epsilon=" + format_double(h.epsilon) + "\n";
  out += "subgraph,sd,deg,d,renorm_part\n";
  for (const auto& [s, r] : rows) {
    out += csv_field(g.label(s)) + "," + format_double(r.uv_sd) + "," + format_double(r.uv_deg) + "," +
           (r.subtraction_degree ? std::to_string(*r.subtraction_degree) : std::string()) + "," +
           (r.is_renorm_part ? "true" : "false") + "\n";
  }
  emit(c, out);
  return exit_ok;
}

int cmd_forests(const RunConfig& c) {
  const auto l = load(c);
  const auto fam = enumerate_forests(l.graph);
  std::string out;
  for (const auto& f : fam.forests) out += forest_label(fam, f) + "\n";
  emit(c, out);
  return exit_ok;
}

int cmd_eval(const RunConfig& c) {
  const auto l = load(c);
  const auto& g = l.graph;
  const RWeight r(g, renorm_options(c));
  const auto x = parse_point(g, c.point);
  std::vector<CsvRow> rows;
  rows.push_back({"u", r.unsubtracted(x), 0.0, ""});
  rows.push_back({"Ru", r.proper(x), 0.0, ""});
  for (auto k : r.proper_forests()) {
    const auto& f = r.family().forests[k];
    rows.push_back({"forest " + forest_label(r.family(), f), r.forest_term(f, x), 0.0, ""});
  }
  emit(c, format_csv(header(c, l), rows));
  return exit_ok;
}

int cmd_pair(const RunConfig& c) {
  const auto l = load(c);
  const auto& g = l.graph;
  const RWeight r(g, renorm_options(c));
  const auto io = integrator_options(c);
  const auto p = pair(r, bumps_for(g, c.radius), io);
  const auto tag = to_string(p.integrator);
  std::vector<CsvRow> rows{{"pair", p.value.value, p.value.error, tag},
                           {"samples", static_cast<double>(p.samples), 0.0, ""},
                           {"failures", static_cast<double>(p.failures), 0.0, ""}};
  emit(c, format_csv(header(c, l), rows));
  return exit_ok;
}

int cmd_eg_compare(const RunConfig& c) {
  const auto l = load(c);
  const auto& g = l.graph;
  const RWeight r(g, renorm_options(c));
  const auto io = integrator_options(c);
  const auto f = bumps_for(g, c.radius);
  const auto rep = eg_compare(r, f, Cutoff{c.rho_w}, io);
  const auto part = r.family().all_parts[0];
  std::map<std::vector<int>, cplx> unit_coef{{std::vector<int>(part.vertices().size() * static_cast<std::size_t>(g.dimension()), 0), 1.0}};
  const auto unit = apply_counterterm(g, counterterm_record(part, unit_coef), f, r.options().eval, io);
  const cplx c0 = reconcile_c0(rep.tu_wf.value - rep.rem_twf.value, 0.0, unit.value.value);
  const cplx reconciled = rep.lhs.value + c0 * unit.value.value;
  const auto tag = to_string(io.kind);
  std::vector<CsvRow> rows{{"lhs", rep.lhs.value, rep.lhs.error, tag},
                           {"u_wf", rep.u_wf.value, rep.u_wf.error, tag},
                           {"tu_wf", rep.tu_wf.value, rep.tu_wf.error, tag},
                           {"rem_twf", rep.rem_twf.value, rep.rem_twf.error, tag},
                           {"rhs", rep.rhs, 0.0, ""},
                           {"abs_discrepancy", rep.abs_discrepancy, 0.0, ""},
                           {"rel_discrepancy", rep.rel_discrepancy, 0.0, ""},
                           {"unit_counterterm", unit.value.value, unit.value.error, tag},
                           {"c0", c0, 0.0, ""},
                           {"reconciled_u_wf", reconciled, 0.0, ""},
                           {"top_level", rep.top_level ? 1.0 : 0.0, 0.0, ""}};
  emit(c, format_csv(header(c, l), rows));
  return exit_ok;
}

/// Fixed pseudo-random unit vectors and positions, reproducible from the seed.
struct Placement {
  Configuration base, dir;
};

Placement place(const FeynmanGraph& g, VertexSet I, bool ir, std::uint64_t seed) {
  const int d = g.dimension();
  std::mt19937_64 rng(splitmix64(seed));
  std::normal_distribution<double> n01(0.0, 1.0);
  auto unit = [&] {
    std::vector<double> u(static_cast<std::size_t>(d));
    double n2 = 0.0;
    for (auto& v : u) {
      v = n01(rng);
      n2 += v * v;
    }
    for (auto& v : u) v /= std::sqrt(n2);
    return u;
  };
  Placement p{Configuration(g.vertex_count(), d), Configuration(g.vertex_count(), d)};
  std::size_t k = 0;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    if (I.contains(v)) continue;
    const auto u = unit();
    const double r = ir ? 0.5 + 0.25 * static_cast<double>(k) : 2.0 + static_cast<double>(k);
    for (int mu = 0; mu < d; ++mu) p.base.at(v, mu) = r * u[static_cast<std::size_t>(mu)];
    ++k;
  }
  bool first = true;
  for (auto v : I.indices()) {
    const auto u = unit();
    if (first && !ir) {
      first = false;  // the anchor stays put
      continue;
    }
    for (int mu = 0; mu < d; ++mu) p.dir.at(v, mu) = u[static_cast<std::size_t>(mu)];
  }
  return p;
}

int cmd_scaling(const RunConfig& c) {
  const auto l = load(c);
  const auto& g = l.graph;
  if (c.subset.size() < (c.ir ? 1U : 2U)) throw InvalidInput(c.ir ? "--subset needs a vertex" : "--subset needs two vertices");
  const auto I = vertex_set(g, c.subset);
  const auto opts = renorm_options(c);
  const RWeight r(g, opts);
  const ConfigEvaluator eval = [&](const Configuration& x) {
    return c.subtracted ? r.proper(x) : r.unsubtracted(x);
  };
  std::vector<double> grid = c.grid;
  if (grid.empty())
    for (int i = 0; i < (c.ir ? 8 : 10); ++i) grid.push_back(c.ir ? std::pow(2.0, i) : std::pow(0.5, i + 1));
  const auto p = place(g, I, c.ir, c.seed);
  const auto fit = c.ir ? estimate_ir_sd(eval, I, p.base, p.dir, grid) : estimate_uv_sd(eval, I, p.base, p.dir, grid);
  std::vector<CsvRow> rows;
  for (std::size_t i = 0; i < fit.samples.size(); ++i)
    rows.push_back({(c.ir ? "abs_u@Lambda=" : "abs_u@lambda=") + format_double(fit.grid[i]), fit.samples[i], 0.0, ""});
  rows.push_back({"slope", fit.slope, 0.0, ""});
  rows.push_back({"r2", fit.r2, 0.0, ""});
  if (c.ir) {
    rows.push_back({"superpolynomial", fit.superpolynomial ? 1.0 : 0.0, 0.0, ""});
    if (I.subset_of(g.internal_vertices())) rows.push_back({"predicted_ir_sd", ir_sd_subset(g, I), 0.0, ""});
  } else {
    rows.push_back({"predicted_uv_sd", uv_sd(full_vertex_part(g, I)), 0.0, ""});
  }
  emit(c, format_csv(header(c, l), rows));
  emit_plot(c, "|u| along the scaling ray", fit.grid, fit.samples);
  return exit_ok;
}

int cmd_integrability(const RunConfig& c) {
  const auto l = load(c);
  const auto& g = l.graph;
  auto opts = renorm_options(c);
  const RWeight r(g, opts);
  VertexSet part;
  if (!c.subset.empty()) {
    part = vertex_set(g, c.subset);
  } else {
    if (r.family().all_parts.empty()) throw InvalidInput("graph has no renormalization part; pass --part");
    part = r.family().all_parts.front().vertices();
  }
  ShellOptions so;
  so.integrator = integrator_options(c);
  if (!c.grid.empty()) so.radii = c.grid;
  const auto rep = integrability_probe(r, part, bumps_for(g, c.radius), c.subtracted, so);
  std::vector<CsvRow> rows;
  std::vector<double> px, py;
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const auto& row = rep.rows[k];
    rows.push_back({"shell@r=" + format_double(row.parameter), row.value, row.error, to_string(so.integrator.kind)});
    px.push_back(row.parameter);
    py.push_back(std::abs(row.value));
  }
  add_report_rows(rows, rep);
  emit(c, format_csv(header(c, l), rows));
  emit_plot(c, rep.label, px, py);
  return verdict_exit(c, rep.verdict);
}

int cmd_coupling_limit(const RunConfig& c) {
  const auto l = load(c);
  const auto& g = l.graph;
  const RWeight r(g, renorm_options(c));
  CouplingOptions co;
  co.integrator = integrator_options(c);
  co.tolerance = c.tolerance;
  if (!c.grid.empty()) co.boxes = c.grid;
  const auto rep = coupling_limit_probe(r, bumps_for(g, c.radius), co);
  std::vector<CsvRow> rows;
  std::vector<double> px, py;
  for (const auto& row : rep.rows) {
    rows.push_back({"box@L=" + format_double(row.parameter), row.value, row.error, to_string(co.integrator.kind)});
    px.push_back(row.parameter);
    py.push_back(std::abs(row.value));
  }
  add_report_rows(rows, rep);
  emit(c, format_csv(header(c, l), rows));
  emit_plot(c, rep.label, px, py);
  return verdict_exit(c, rep.verdict);
}

int cmd_epsilon_limit(const RunConfig& c) {
  const auto l = load(c);
  const auto& g = l.graph;
  RunConfig cm = c;
  cm.mode = "minkowski-eps";
  if (!(cm.epsilon > 0.0)) cm.epsilon = 0.1;  // the grid sets the actual values
  const auto x = parse_point(g, c.point);
  EpsilonOptions eo;
  if (!c.grid.empty()) eo.grid = c.grid;
  const auto rep = epsilon_limit_probe(g, renorm_options(cm), x, eo);
  std::vector<CsvRow> rows;
  std::vector<double> px, py;
  for (const auto& row : rep.rows) {
    rows.push_back({"Ru@eps=" + format_double(row.parameter), row.value, 0.0, ""});
    px.push_back(row.parameter);
    py.push_back(std::abs(row.value));
  }
  add_report_rows(rows, rep);
  emit(c, format_csv(header(cm, l), rows));
  emit_plot(c, rep.label, px, py);
  return verdict_exit(c, rep.verdict);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Configuration-space BPHZ renormalization of weighted Feynman graphs"};
  app.set_version_flag("--version", std::string(version));
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1);
  RunConfig cfg;
  if (const char* env = std::getenv("BPHZ_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) cfg.threads = static_cast<unsigned>(n);
  }

  auto common = [&](CLI::App* s) {
    s->add_option("-g,--graph", cfg.graph_path, "graph file (JSON)")->required();
    s->add_option("--mode", cfg.mode, "euclidean or minkowski-eps")
        ->check(CLI::IsMember({"euclidean", "minkowski-eps"}));
    s->add_option("--epsilon", cfg.epsilon, "metric deformation, > 0 for minkowski-eps");
    s->add_option("--subtraction-point", cfg.subtraction_point, "edge-count, sd-weighted or arithmetic-mean")
        ->check(CLI::IsMember({"edge-count", "sd-weighted", "arithmetic-mean"}));
    s->add_option("-o,--output", cfg.output, "CSV output path (default stdout)");
  };
  auto sampling = [&](CLI::App* s, bool seed_required) {
    auto* o = s->add_option("--seed", cfg.seed, "random seed");
    if (seed_required) o->required();
    s->add_option("--samples", cfg.samples, "samples per integral");
    s->add_option("--threads", cfg.threads, "worker threads (default BPHZ_THREADS, then all cores)");
    s->add_option("--integrator", cfg.integrator, "mc or qmc")->check(CLI::IsMember({"mc", "qmc"}));
  };
  auto plotting = [&](CLI::App* s) { s->add_option("--plot", cfg.plot, "SVG log-log plot path"); };
  auto expecting = [&](CLI::App* s) {
    s->add_option("--expect", cfg.expect, "exit 3 unless this verdict is reached")
        ->check(CLI::IsMember({"converges", "diverges-log", "diverges-power", "diverges", "inconclusive"}));
  };

  std::function<int(const RunConfig&)> run;
  auto* validate = app.add_subcommand("validate", "check a graph file");
  validate->add_option("-g,--graph", cfg.graph_path, "graph file (JSON)")->required();
  validate->callback([&] { run = cmd_validate; });

  auto* degrees = app.add_subcommand("degrees", "power counting of every connected full vertex part");
  common(degrees);
  degrees->callback([&] { run = cmd_degrees; });

  auto* forests = app.add_subcommand("forests", "list the forests, one per line");
  common(forests);
  forests->callback([&] { run = cmd_forests; });

  auto* eval = app.add_subcommand("eval", "weight and forest terms at one configuration");
  common(eval);
  eval->add_option("--x", cfg.point, "configuration as JSON")->required();
  eval->callback([&] { run = cmd_eval; });

  auto* pr = app.add_subcommand("pair", "pairing with a bump test function");
  common(pr);
  sampling(pr, true);
  pr->add_option("--radius", cfg.radius, "test function support radius");
  pr->callback([&] { run = cmd_pair; });

  auto* eg = app.add_subcommand("eg-compare", "both sides of the extension identity for a one-part graph");
  common(eg);
  sampling(eg, true);
  eg->add_option("--radius", cfg.radius, "test function support radius");
  eg->add_option("--rho-w", cfg.rho_w, "cutoff radius of the weight functions");
  eg->callback([&] { run = cmd_eg_compare; });

  auto* sc = app.add_subcommand("scaling", "scaling-degree fit along a ray");
  common(sc);
  sc->add_option("--seed", cfg.seed, "seed for the ray directions");
  sc->add_option("--subset", cfg.subset, "vertices to move, comma separated")->delimiter(',')->required();
  sc->add_option("--grid", cfg.grid, "lambda values, comma separated")->delimiter(',');
  sc->add_flag("--ir", cfg.ir, "dilate to large distances instead of contracting");
  sc->add_flag("--subtracted", cfg.subtracted, "use the renormalized weight");
  plotting(sc);
  sc->callback([&] { run = cmd_scaling; });

  auto* in = app.add_subcommand("integrability", "shell integrals around a part diagonal");
  common(in);
  sampling(in, true);
  in->add_option("--part", cfg.subset, "part vertices, comma separated (default: first part)")->delimiter(',');
  in->add_option("--radii", cfg.grid, "shell radii, decreasing, comma separated")->delimiter(',');
  in->add_option("--radius", cfg.radius, "test function support radius");
  in->add_flag("--subtracted", cfg.subtracted, "use the renormalized weight and subtracted test function");
  plotting(in);
  expecting(in);
  in->callback([&] { run = cmd_integrability; });

  auto* cl = app.add_subcommand("coupling-limit", "internal vertices over growing boxes");
  common(cl);
  sampling(cl, true);
  cl->add_option("--boxes", cfg.grid, "box half-widths, increasing, comma separated")->delimiter(',');
  cl->add_option("--radius", cfg.radius, "external test function radius");
  cl->add_option("--tolerance", cfg.tolerance, "relative change accepted as converged");
  plotting(cl);
  expecting(cl);
  cl->callback([&] { run = cmd_coupling_limit; });

  auto* el = app.add_subcommand("epsilon-limit", "renormalized weight as epsilon decreases");
  common(el);
  el->add_option("--x", cfg.point, "configuration as JSON")->required();
  el->add_option("--grid", cfg.grid, "epsilon values, decreasing, comma separated")->delimiter(',');
  plotting(el);
  expecting(el);
  el->callback([&] { run = cmd_epsilon_limit; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_invalid;
  }
  try {
    return run(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return exit_invalid;
}
