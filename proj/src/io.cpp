#include "contdyn/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "contdyn/error.hpp"

namespace contdyn {

using nlohmann::ordered_json;

namespace {

ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

ordered_json numbers(const std::vector<double>& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

ordered_json point(std::span<const double> x) {
  ordered_json a = ordered_json::array();
  for (double c : x) a.push_back(number(c));
  return a;
}

const char* event_kind(EventKind k) {
  switch (k) {
    case EventKind::Birth: return "birth";
    case EventKind::Death: return "death";
    case EventKind::Jump: return "jump";
  }
  return "unknown";
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json to_json(const Provenance& p) {
  return ordered_json{{"command", p.command},
                      {"version", p.version},
                      {"seed", p.seed},
                      {"tolerances", p.tolerances},
                      {"config", p.config}};
}

ordered_json to_json(const Domain& d) {
  ordered_json j{{"dimension", d.dim()}, {"mode", d.is_torus() ? "torus" : "full_space"}};
  if (d.is_torus()) j["torus_side"] = number(d.torus_side());
  j["window_min"] = numbers(d.window().lo);
  j["window_max"] = numbers(d.window().hi);
  return j;
}

ordered_json to_json(const Configuration& c) {
  ordered_json pts = ordered_json::array();
  for (std::size_t i = 0; i < c.size(); ++i) pts.push_back(point(c.point(i)));
  return ordered_json{{"domain", to_json(c.domain())}, {"size", c.size()}, {"points", pts}};
}

ordered_json to_json(const ThetaReport& r) {
  return ordered_json{{"alpha", number(r.alpha)},  {"radii", r.radii_checked},
                      {"counts", r.counts},        {"K_min", r.K_min},
                      {"member", r.member},        {"window_truncated", r.window_truncated}};
}

ordered_json to_json(const TailBoundReport& r) {
  return ordered_json{{"t", number(r.t)},
                      {"radii", numbers(r.radii)},
                      {"bounds", numbers(r.bounds)},
                      {"method", r.method}};
}

ordered_json to_json(const ConvergenceReport& r) {
  ordered_json cps = ordered_json::array();
  for (const auto& c : r.partial_sums)
    cps.push_back({{"n", c.n},
                   {"partial_sum", number(c.partial_sum)},
                   {"remainder_bound", number(c.remainder_bound)}});
  ordered_json j{{"alpha", number(r.alpha)},
                 {"m", number(r.m)},
                 {"epsilon", number(r.epsilon)},
                 {"delta", number(r.delta)},
                 {"target_tol", number(r.target_tol)},
                 {"method", r.method},
                 {"converges", r.converges},
                 {"n_terms", r.n_terms},
                 {"sum", number(r.sum)},
                 {"remainder_bound", number(r.remainder_bound)},
                 {"partial_sums", cps}};
  if (r.power_law)
    j["power_law"] = {{"c_alpha", number(r.power_law->c_alpha)},
                      {"zeta", number(r.power_law->zeta)},
                      {"moment", number(r.power_law->moment)},
                      {"bound", number(r.power_law->bound)},
                      {"converges", r.power_law->converges}};
  return j;
}

ordered_json to_json(const ExitEstimate& e) {
  return ordered_json{{"estimate", number(e.estimate)},
                      {"std_error", number(e.std_error)},
                      {"nelson_bound", number(e.nelson_bound)},
                      {"n_paths", e.n_paths}};
}

ordered_json to_json(const LaplaceEstimate& e) {
  return ordered_json{{"mean", number(e.mean)},
                      {"std_error", number(e.std_error)},
                      {"n_samples", e.n_samples},
                      {"times", numbers(e.times)},
                      {"functions", e.functions}};
}

ordered_json to_json(const FdCheck& c) {
  ordered_json j{{"h", number(c.h)},
                 {"n_replicas", c.n_replicas},
                 {"fd_estimate", number(c.fd_estimate)},
                 {"std_error", number(c.std_error)},
                 {"generator", number(c.analytic)},
                 {"discrepancy", number(c.discrepancy)}};
  j["exact_bias"] = c.exact_bias ? number(*c.exact_bias) : ordered_json(nullptr);
  j["within_3se"] = c.within(3.0);
  return j;
}

ordered_json to_json(const CorrelationBoundRow& r) {
  return ordered_json{{"n", r.n}, {"k_sup", number(r.k_sup)}, {"bound", number(r.bound)}};
}

ordered_json to_json(const MuConditionsReport& r) {
  ordered_json rows = ordered_json::array();
  for (const auto& b : r.bound_rows) rows.push_back(to_json(b));
  ordered_json probes = ordered_json::array();
  for (const auto& p : r.probes) probes.push_back({{"eps", number(p.eps)}, {"u2", number(p.u2)}});
  return ordered_json{{"measure", r.measure},
                      {"gamma", number(r.gamma)},
                      {"C", number(r.C)},
                      {"bound_rows", rows},
                      {"bound_holds", r.bound_holds},
                      {"translation_invariant", r.translation_invariant},
                      {"decay_method", r.decay_method},
                      {"decay_probes", probes},
                      {"decay_holds", r.decay_holds},
                      {"admissible", r.admissible},
                      {"reasons", r.reasons}};
}

ordered_json to_json(const ScalingReport& r) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"eps", number(row.eps)},
                    {"estimate", number(row.estimate)},
                    {"std_error", number(row.std_error)},
                    {"distance", number(row.distance)}});
  return ordered_json{{"measure", r.measure},
                      {"eps_schedule", numbers(r.eps_schedule)},
                      {"times", numbers(r.times)},
                      {"n_samples", r.n_samples},
                      {"target", number(r.target)},
                      {"rows", rows},
                      {"monotone", r.monotone},
                      {"final_distance", number(r.final_distance)},
                      {"final_tolerance", number(r.final_tolerance)},
                      {"final_within", r.final_within},
                      {"passed", r.passed()},
                      {"notes", r.notes}};
}

std::string event_to_json_line(const Event& e) {
  ordered_json j{{"t", number(e.time)}, {"kind", event_kind(e.kind)}, {"particle", e.particle}};
  j["from"] = e.from.empty() ? ordered_json(nullptr) : point(e.from);
  j["to"] = e.to.empty() ? ordered_json(nullptr) : point(e.to);
  return j.dump();
}

void CsvTable::add_row(const std::vector<double>& values) {
  if (values.size() != columns_.size())
    throw InvalidArgument("CsvTable: row has " + std::to_string(values.size()) +
                          " values for " + std::to_string(columns_.size()) + " columns");
  rows_.push_back(values);
}

std::string CsvTable::render(const Provenance& p) const {
  std::ostringstream os;
  os << "# command: " << p.command << '\n';
  os << "# version: " << p.version << '\n';
  os << "# seed: " << p.seed << '\n';
  os << "# tolerances: " << p.tolerances.dump() << '\n';
  std::istringstream cfg(p.config);
  std::string line;
  while (std::getline(cfg, line)) os << "# config| " << line << '\n';
  for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
  os << '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
    os << '\n';
  }
  return os.str();
}

CsvTable configuration_table(const Configuration& c) {
  std::vector<std::string> cols;
  for (std::size_t i = 0; i < c.dim(); ++i) cols.push_back("x" + std::to_string(i));
  CsvTable t(cols);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto p = c.point(i);
    t.add_row({p.begin(), p.end()});
  }
  return t;
}

CsvTable correlation_table(const CorrelationGrid& g) {
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < g.order; ++j) cols.push_back("bin" + std::to_string(j));
  cols.push_back("estimate");
  cols.push_back("std_error");
  CsvTable t(cols);
  for (std::size_t i = 0; i < g.tuples.size(); ++i) {
    std::vector<double> row(g.tuples[i].begin(), g.tuples[i].end());
    row.push_back(g.estimates[i]);
    row.push_back(g.std_errors[i]);
    t.add_row(row);
  }
  return t;
}

CsvTable scaling_table(const ScalingReport& r) {
  CsvTable t({"eps", "estimate", "std_error", "target", "distance"});
  for (const auto& row : r.rows) t.add_row({row.eps, row.estimate, row.std_error, r.target, row.distance});
  return t;
}

std::string render_report(const Provenance& p, const ordered_json& result) {
  ordered_json j{{"provenance", to_json(p)}, {"result", result}};
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << text;
  if (!out) throw InvalidArgument("write failed for '" + path + "'");
}

}  // namespace contdyn
