#pragma once

// Scenario files (INI with [graph] [target] [weights] [noise] [filter] [sim]
// sections), dotted-key overrides, and the delimited trace/summary outputs.
//
// Node labels in files are 1-based; the library API is 0-based.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "relform/errors.hpp"
#include "relform/simkit.hpp"

namespace relform {

// ---------------------------------------------------------------------------
// Number formatting

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

inline double parse_double(const std::string& key, std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || text.empty())
    throw ConfigError(key, "expected a number, got '" + std::string(text) + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, std::string_view text) {
  Int v = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || text.empty())
    throw ConfigError(key, "expected an integer, got '" + std::string(text) + "'");
  return v;
}

inline std::pair<int, int> parse_pair(const std::string& key, std::string_view text) {
  const auto dash = text.find('-');
  if (dash == std::string_view::npos)
    throw ConfigError(key, "expected a node pair like 1-2, got '" + std::string(text) + "'");
  return {parse_int<int>(key, trim(text.substr(0, dash))),
          parse_int<int>(key, trim(text.substr(dash + 1)))};
}

inline Eigen::VectorXd parse_vector(const std::string& key, std::string_view text) {
  const auto w = words(text);
  Eigen::VectorXd v(static_cast<Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) v(static_cast<Index>(i)) = parse_double(key, w[i]);
  return v;
}

/// Rows separated by commas, entries by whitespace.
inline Eigen::MatrixXd parse_matrix(const std::string& key, std::string_view text) {
  const auto rows = split(text, ',');
  Eigen::MatrixXd m;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Eigen::VectorXd row = parse_vector(key, rows[r]);
    if (r == 0) m.resize(static_cast<Index>(rows.size()), row.size());
    if (row.size() != m.cols()) throw ConfigError(key, "ragged matrix rows");
    m.row(static_cast<Index>(r)) = row.transpose();
  }
  return m;
}

inline std::string format_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v(i));
  }
  return out;
}

inline std::string format_matrix(const Eigen::MatrixXd& m) {
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    if (r) out += ", ";
    out += format_vector(m.row(r).transpose());
  }
  return out;
}

inline bool is_integer_key(const std::string& k) {
  return !k.empty() && k.find_first_not_of("0123456789") == std::string::npos;
}

inline bool is_pair_key(const std::string& k) {
  const auto dash = k.find('-');
  return dash != std::string::npos && is_integer_key(k.substr(0, dash)) &&
         is_integer_key(k.substr(dash + 1));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario parsing

using ScenarioTree = boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& scenario_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"graph", {"nodes", "links", "leaders"}},
      {"target", {}},
      {"weights", {"mode", "scale"}},
      {"noise", {"sigma_w", "rho_w", "sigma_v", "rho_v"}},
      {"filter", {"estimator", "mu", "P", "jitter", "covariance_form", "jrkf_prior"}},
      {"sim",
       {"dt", "horizon", "T", "leader_gain", "leader_distances", "seed", "runs", "pairing",
        "trace_stride", "trace_runs", "threads"}},
  };
  return keys;
}

inline ScenarioTree read_scenario_tree(std::istream& in) {
  ScenarioTree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("scenario", e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return tree;
}

inline ScenarioTree read_scenario_tree(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario", "cannot open " + path.string());
  return read_scenario_tree(in);
}

/// Applies KEY=VALUE overrides. KEY is `section.key`, or a bare key that
/// names exactly one known key across all sections.
inline void apply_overrides(ScenarioTree& tree, const std::vector<std::string>& overrides) {
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError(ov, "override must have the form KEY=VALUE");
    std::string key = detail::trim(ov.substr(0, eq));
    const std::string value = detail::trim(ov.substr(eq + 1));
    if (key.find('.') == std::string::npos) {
      std::vector<std::string> hits;
      for (const auto& [section, keys] : scenario_keys())
        if (keys.count(key)) hits.push_back(section + "." + key);
      if (hits.size() != 1)
        throw ConfigError(key, hits.empty() ? "unknown override key"
                                            : "ambiguous override key; use section.key");
      key = hits.front();
    }
    const auto dot = key.find('.');
    const std::string section = key.substr(0, dot);
    const std::string name = key.substr(dot + 1);
    if (!scenario_keys().count(section)) throw ConfigError(section, "unknown section");
    if (!tree.get_child_optional(section)) tree.add_child(section, ScenarioTree{});
    tree.get_child(section).put(ScenarioTree::path_type(name, '\0'), value);
  }
}

namespace detail {

inline const ScenarioTree& section(const ScenarioTree& tree, const std::string& name) {
  auto child = tree.get_child_optional(name);
  if (!child) throw ConfigError(name, "missing section [" + name + "]");
  return *child;
}

inline std::optional<std::string> value(const ScenarioTree& sec, const std::string&,
                                        const std::string& key) {
  auto v = sec.get_optional<std::string>(ScenarioTree::path_type(key, '\0'));
  if (!v) return std::nullopt;
  return trim(*v);
}

inline std::string required(const ScenarioTree& sec, const std::string& sname,
                            const std::string& key) {
  auto v = value(sec, sname, key);
  if (!v) throw ConfigError(sname + "." + key, "required key is missing");
  return *v;
}

}  // namespace detail

/// Builds a Scenario from a parsed tree; rejects unknown sections and keys.
inline Scenario scenario_from_tree(const ScenarioTree& tree) {
  using detail::parse_double;
  using detail::parse_int;
  using detail::required;
  using detail::value;

  for (const auto& [name, sec] : tree) {
    auto it = scenario_keys().find(name);
    if (it == scenario_keys().end()) throw ConfigError(name, "unknown section [" + name + "]");
    if (!sec.data().empty() && sec.empty())
      throw ConfigError(name, "key outside of any section");
    for (const auto& [key, v] : sec) {
      const bool ok = it->second.count(key) ||
                      (name == "target" && detail::is_integer_key(key)) ||
                      (name == "weights" && detail::is_pair_key(key));
      if (!ok) throw ConfigError(name + "." + key, "unknown key");
    }
  }

  Scenario s;

  // [graph]
  const auto& g = detail::section(tree, "graph");
  const int n = parse_int<int>("graph.nodes", required(g, "graph", "nodes"));
  std::vector<Link> links;
  for (const auto& w : detail::words(required(g, "graph", "links"))) {
    const auto [a, b] = detail::parse_pair("graph.links", w);
    if (a < 1 || b < 1 || a > n || b > n)
      throw ConfigError("graph.links", "node index out of range in '" + w + "'");
    links.emplace_back(a - 1, b - 1);
  }
  std::vector<int> leaders;
  if (auto l = value(g, "graph", "leaders"))
    for (const auto& w : detail::words(*l)) {
      const int id = parse_int<int>("graph.leaders", w);
      if (id < 1 || id > n) throw ConfigError("graph.leaders", "node index out of range");
      leaders.push_back(id - 1);
    }
  try {
    s.graph = SensingGraph(n, links, leaders);
  } catch (const InvalidGraph& e) {
    throw ConfigError("graph", e.what());
  }

  // [target]
  const auto& t = detail::section(tree, "target");
  Index dim = -1;
  std::vector<Eigen::VectorXd> rows(static_cast<std::size_t>(n));
  for (const auto& [key, v] : t) {
    const int id = parse_int<int>("target", key);
    if (id < 1 || id > n) throw ConfigError("target." + key, "node index out of range");
    rows[static_cast<std::size_t>(id - 1)] = detail::parse_vector("target." + key, v.data());
    if (dim < 0) dim = rows[static_cast<std::size_t>(id - 1)].size();
    if (rows[static_cast<std::size_t>(id - 1)].size() != dim || dim < 1)
      throw ConfigError("target." + key, "inconsistent dimension");
  }
  for (int i = 0; i < n; ++i)
    if (rows[static_cast<std::size_t>(i)].size() == 0)
      throw ConfigError("target." + std::to_string(i + 1), "missing position");
  s.target.resize(n, dim);
  for (int i = 0; i < n; ++i) s.target.row(i) = rows[static_cast<std::size_t>(i)].transpose();

  // [weights]
  if (auto w = tree.get_child_optional("weights")) {
    const std::string mode = value(*w, "weights", "mode").value_or("solve");
    if (mode == "solve") {
      s.weights.mode = WeightMode::solve;
    } else if (mode == "explicit") {
      s.weights.mode = WeightMode::explicit_values;
    } else {
      throw ConfigError("weights.mode", "expected solve or explicit, got '" + mode + "'");
    }
    if (auto sc = value(*w, "weights", "scale")) s.weights.scale = parse_double("weights.scale", *sc);
    for (const auto& [key, v] : *w) {
      if (!detail::is_pair_key(key)) continue;
      if (s.weights.mode != WeightMode::explicit_values)
        throw ConfigError("weights." + key, "per-link weights require mode = explicit");
      const auto [a, b] = detail::parse_pair("weights." + key, key);
      if (!s.graph.has_link(a - 1, b - 1))
        throw ConfigError("weights." + key, "no such link in the graph");
      const double l = parse_double("weights." + key, detail::trim(v.data()));
      s.weights.values.set(a - 1, b - 1, l);
      s.weights.values.set(b - 1, a - 1, l);
    }
  }

  // [noise]
  const auto& nz = detail::section(tree, "noise");
  s.noise.sigma_w = parse_double("noise.sigma_w", required(nz, "noise", "sigma_w"));
  s.noise.sigma_v = parse_double("noise.sigma_v", required(nz, "noise", "sigma_v"));
  if (auto v = value(nz, "noise", "rho_w")) s.noise.rho_w = parse_double("noise.rho_w", *v);
  if (auto v = value(nz, "noise", "rho_v")) s.noise.rho_v = parse_double("noise.rho_v", *v);

  // [filter]
  const auto& f = detail::section(tree, "filter");
  const std::string est = required(f, "filter", "estimator");
  if (auto k = parse_estimator(est)) {
    s.estimator = *k;
  } else {
    throw ConfigError("filter.estimator",
                      "expected mle|rkf|crkf|jrkf|oracle-true-state, got '" + est + "'");
  }
  s.init_mean = value(f, "filter", "mu") ? detail::parse_vector("filter.mu", *value(f, "filter", "mu"))
                                         : Eigen::VectorXd::Zero(dim);
  s.init_cov = value(f, "filter", "P") ? detail::parse_matrix("filter.P", *value(f, "filter", "P"))
                                       : Eigen::MatrixXd::Identity(dim, dim);
  if (auto v = value(f, "filter", "jitter")) s.filter.jitter = parse_double("filter.jitter", *v);
  if (auto v = value(f, "filter", "covariance_form")) {
    if (*v == "standard") s.filter.form = CovarianceForm::standard;
    else if (*v == "joseph") s.filter.form = CovarianceForm::joseph;
    else throw ConfigError("filter.covariance_form", "expected standard or joseph");
  }
  if (auto v = value(f, "filter", "jrkf_prior")) {
    if (*v == "joint") s.filter.jrkf_prior = JointPrior::joint;
    else if (*v == "edgewise") s.filter.jrkf_prior = JointPrior::edgewise;
    else throw ConfigError("filter.jrkf_prior", "expected joint or edgewise");
  }

  // [sim]
  const auto& sm = detail::section(tree, "sim");
  s.dt = parse_double("sim.dt", required(sm, "sim", "dt"));
  s.horizon = parse_int<int>("sim.horizon", required(sm, "sim", "horizon"));
  s.repeats = parse_int<int>("sim.T", required(sm, "sim", "T"));
  if (auto v = value(sm, "sim", "leader_gain")) s.leader_gain = parse_double("sim.leader_gain", *v);
  if (auto v = value(sm, "sim", "leader_distances")) {
    LeaderDistances d;
    for (const auto& w : detail::words(*v)) {
      const auto colon = w.find(':');
      if (colon == std::string::npos)
        throw ConfigError("sim.leader_distances", "expected entries like 1-2:1.5");
      const auto [a, b] = detail::parse_pair("sim.leader_distances", w.substr(0, colon));
      const double dist = parse_double("sim.leader_distances", w.substr(colon + 1));
      d[{a - 1, b - 1}] = dist;
      d[{b - 1, a - 1}] = dist;
    }
    s.leader_distances = d;
  }
  if (auto v = value(sm, "sim", "seed")) s.seed = parse_int<std::uint64_t>("sim.seed", *v);
  if (auto v = value(sm, "sim", "runs")) s.runs = parse_int<int>("sim.runs", *v);
  if (auto v = value(sm, "sim", "pairing")) {
    if (*v == "paired") s.paired = true;
    else if (*v == "unpaired") s.paired = false;
    else throw ConfigError("sim.pairing", "expected paired or unpaired");
  }
  if (auto v = value(sm, "sim", "trace_stride"))
    s.trace_stride = parse_int<int>("sim.trace_stride", *v);
  if (auto v = value(sm, "sim", "trace_runs")) s.trace_runs = parse_int<int>("sim.trace_runs", *v);
  if (auto v = value(sm, "sim", "threads")) s.threads = parse_int<int>("sim.threads", *v);

  validate(s);
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides = {}) {
  ScenarioTree tree = read_scenario_tree(path);
  apply_overrides(tree, overrides);
  return scenario_from_tree(tree);
}

inline Scenario parse_scenario(const std::string& text,
                               const std::vector<std::string>& overrides = {}) {
  std::istringstream in(text);
  ScenarioTree tree = read_scenario_tree(in);
  apply_overrides(tree, overrides);
  return scenario_from_tree(tree);
}

/// Canonical text form; parsing it yields an equal scenario.
inline void write_scenario(std::ostream& out, const Scenario& s) {
  const int n = s.graph.num_nodes();
  out << "[graph]\n";
  out << "nodes = " << n << "\n";
  out << "links =";
  for (const Link& l : s.graph.links()) out << ' ' << l.a + 1 << '-' << l.b + 1;
  out << "\n";
  out << "leaders =";
  for (int l : s.graph.leaders()) out << ' ' << l + 1;
  out << "\n\n[target]\n";
  for (int i = 0; i < n; ++i)
    out << i + 1 << " = " << detail::format_vector(s.target.row(i).transpose()) << "\n";
  out << "\n[weights]\n";
  if (s.weights.mode == WeightMode::solve) {
    out << "mode = solve\nscale = " << format_double(s.weights.scale) << "\n";
  } else {
    out << "mode = explicit\n";
    for (const Link& l : s.graph.links())
      out << l.a + 1 << '-' << l.b + 1 << " = " << format_double(s.weights.values.at(l.a, l.b))
          << "\n";
  }
  out << "\n[noise]\n";
  out << "sigma_w = " << format_double(s.noise.sigma_w) << "\n";
  out << "rho_w = " << format_double(s.noise.rho_w) << "\n";
  out << "sigma_v = " << format_double(s.noise.sigma_v) << "\n";
  out << "rho_v = " << format_double(s.noise.rho_v) << "\n";
  out << "\n[filter]\n";
  out << "estimator = " << to_string(s.estimator) << "\n";
  out << "mu = " << detail::format_vector(s.init_mean) << "\n";
  out << "P = " << detail::format_matrix(s.init_cov) << "\n";
  out << "jitter = " << format_double(s.filter.jitter) << "\n";
  out << "covariance_form = "
      << (s.filter.form == CovarianceForm::standard ? "standard" : "joseph") << "\n";
  out << "jrkf_prior = " << (s.filter.jrkf_prior == JointPrior::joint ? "joint" : "edgewise")
      << "\n";
  out << "\n[sim]\n";
  out << "dt = " << format_double(s.dt) << "\n";
  out << "horizon = " << s.horizon << "\n";
  out << "T = " << s.repeats << "\n";
  out << "leader_gain = " << format_double(s.leader_gain) << "\n";
  if (s.leader_distances) {
    out << "leader_distances =";
    for (const auto& [pair, d] : *s.leader_distances)
      if (pair.first < pair.second)
        out << ' ' << pair.first + 1 << '-' << pair.second + 1 << ':' << format_double(d);
    out << "\n";
  }
  out << "seed = " << s.seed << "\n";
  out << "runs = " << s.runs << "\n";
  out << "pairing = " << (s.paired ? "paired" : "unpaired") << "\n";
  out << "trace_stride = " << s.trace_stride << "\n";
  out << "trace_runs = " << s.trace_runs << "\n";
  out << "threads = " << s.threads << "\n";
}

inline std::string scenario_text(const Scenario& s) {
  std::ostringstream out;
  write_scenario(out, s);
  return out.str();
}

// ---------------------------------------------------------------------------
// Trace files

inline std::vector<std::string> trace_columns(const IncidenceOperator& op) {
  std::vector<std::string> cols = {"run",     "k",        "estimator",       "eps",
                                   "cov_trace", "affine_residual", "leader_residual"};
  for (const DirectedEdge& e : op.edges())
    for (Index d = 0; d < op.dim(); ++d)
      cols.push_back("xhat_" + std::to_string(e.head + 1) + "_" + std::to_string(e.tail + 1) + "_" +
                     std::to_string(d));
  for (int i = 0; i < op.num_nodes(); ++i)
    for (Index d = 0; d < op.dim(); ++d)
      cols.push_back("z_" + std::to_string(i + 1) + "_" + std::to_string(d));
  return cols;
}

inline void write_trace_header(std::ostream& out, const IncidenceOperator& op) {
  const auto cols = trace_columns(op);
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << "\n";
}

/// One row per recorded snapshot, run-major, step-minor.
inline void write_trace_rows(std::ostream& out, std::size_t run, std::string_view label,
                             const SimTrace& trace) {
  for (const Snapshot& s : trace.snapshots) {
    const auto k = static_cast<std::size_t>(s.k);
    out << run << ',' << s.k << ',' << label << ',' << format_double(trace.eps[k]) << ','
        << format_double(trace.cov_trace[k]) << ',' << format_double(trace.affine_residual[k])
        << ',' << format_double(trace.leader_residual[k]);
    for (Index i = 0; i < s.estimate.size(); ++i) out << ',' << format_double(s.estimate(i));
    for (Index i = 0; i < s.positions.size(); ++i) out << ',' << format_double(s.positions(i));
    out << "\n";
  }
}

struct TraceRow {
  std::size_t run = 0;
  std::int64_t k = 0;
  std::string estimator;
  std::vector<double> values;  // every column after `estimator`, in header order
};

struct TraceTable {
  std::vector<std::string> columns;
  std::vector<TraceRow> rows;
};

inline TraceTable read_trace(std::istream& in) {
  TraceTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error("trace file is empty");
  t.columns = detail::split(line, ',');
  if (t.columns.size() < 7 || t.columns[0] != "run" || t.columns[1] != "k" ||
      t.columns[2] != "estimator")
    throw Error("trace file header does not match the trace column contract");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != t.columns.size()) throw Error("trace row has wrong number of cells");
    TraceRow row;
    row.run = detail::parse_int<std::size_t>("run", cells[0]);
    row.k = detail::parse_int<std::int64_t>("k", cells[1]);
    row.estimator = cells[2];
    for (std::size_t c = 3; c < cells.size(); ++c)
      row.values.push_back(detail::parse_double(t.columns[c], cells[c]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Summary files

struct LabelledSummary {
  std::string label;
  MonteCarloSummary summary;
};

/// Per step: k, then eps_mean_<label>, eps_std_<label>, cov_trace_<label>.
inline void write_summary(std::ostream& out, const std::vector<LabelledSummary>& items) {
  out << "k";
  for (const auto& it : items)
    out << ",eps_mean_" << it.label << ",eps_std_" << it.label << ",cov_trace_" << it.label;
  out << "\n";
  const std::size_t steps = items.empty() ? 0 : items.front().summary.eps_mean.size();
  for (std::size_t k = 0; k < steps; ++k) {
    out << k;
    for (const auto& it : items)
      out << ',' << format_double(it.summary.eps_mean[k]) << ','
          << format_double(it.summary.eps_std[k]) << ',' << format_double(it.summary.trace_mean[k]);
    out << "\n";
  }
}

inline void write_steady_state(std::ostream& out, const std::vector<LabelledSummary>& items) {
  out << "estimator,runs_requested,runs_completed,runs_failed,steady_start,steady_eps_mean,"
         "steady_cov_trace_mean\n";
  for (const auto& it : items) {
    const auto& s = it.summary;
    out << it.label << ',' << s.runs_requested << ',' << s.runs_completed << ',' << s.runs_failed
        << ',' << s.steady_start << ',' << format_double(s.steady_eps_mean) << ','
        << format_double(s.steady_trace_mean) << "\n";
  }
}

}  // namespace relform
