#ifndef SANOVSIM_TOOLS_COMMANDS_HPP
#define SANOVSIM_TOOLS_COMMANDS_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "sanovsim/sanovsim.hpp"

namespace sanovsim::cli {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum class ExitCode : int {
  ok = 0,
  usage = 1,
  check_failed = 2,
  parse_error = 3,
  signaling_model = 4,
  infeasible_target = 5,
  invalid_params = 6,
  oracle_infeasible = 7,
};

class CliError : public std::runtime_error {
 public:
  CliError(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

struct RunConfig {
  std::string command;
  std::string model_path;
  std::string context = "a,b";
  std::string target;
  std::optional<std::uint64_t> seed;
  std::string n;
  std::uint64_t trials = 0;
  double delta = 0.02;
  std::string epsilon_grid = "0,1e-5,1e-4,5e-4,1e-3";
  std::size_t m = 4;
  double c = 1.0;
  std::string format = "json";
  std::string out;

  std::string dist = "0.5,0.5";
  std::string center = "0.7,0.3";
  double coupling = 1.0;
  double temperature = 1.0;
  std::string g;
  std::uint64_t random = 0;
  std::string realization;
  double h = 1e-4;
  unsigned threads = 1;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Report {
  std::string command;
  json config;
  json results;
  Table table;
  ExitCode status = ExitCode::ok;
};

// ---------------------------------------------------------------- formatting

/// Shortest round-trip decimal; non-finite values spelled out.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline json number(double x) {
  if (x == 0.0) return 0.0;
  if (std::isfinite(x)) return x;
  return format_number(x);
}

inline json numbers(std::span<const double> xs) {
  json out = json::array();
  for (double x : xs) out.push_back(number(x));
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string render_csv(const Table& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_field(fields[i]);
    }
    out += "\r\n";
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

inline std::string render_json(const Report& r) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = r.command;
  doc["config"] = r.config;
  doc["results"] = r.results;
  return doc.dump(2) + "\n";
}

inline std::string render(const Report& r, const std::string& format) {
  if (format == "csv") return render_csv(r.table);
  if (format == "json") return render_json(r);
  throw CliError(ExitCode::usage, "unknown format '" + format + "'");
}

inline std::string join(std::span<const double> xs, char sep = ';') {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += sep;
    s += format_number(xs[i]);
  }
  return s;
}

// ------------------------------------------------------------------- parsing

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_decimal(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) return std::nullopt;
  return v;
}

/// Decimal ("0.125", "1e-3") or rational ("1/8") literal.
inline std::optional<double> parse_number(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  const auto slash = s.find('/');
  if (slash == std::string::npos) return parse_decimal(s);
  const auto p = parse_decimal(trim(s.substr(0, slash)));
  const auto q = parse_decimal(trim(s.substr(slash + 1)));
  if (!p || !q || *q == 0.0) return std::nullopt;
  return *p / *q;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_number(item);
    if (!v) throw CliError(ExitCode::invalid_params, "cannot read '" + trim(item) + "' in " + what);
    out.push_back(*v);
  }
  if (out.empty()) throw CliError(ExitCode::invalid_params, what + " is empty");
  return out;
}

inline std::vector<std::uint64_t> parse_sizes(const std::string& text, const std::string& what) {
  std::vector<std::uint64_t> out;
  for (double v : parse_list(text, what)) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e12) {
      throw CliError(ExitCode::invalid_params, what + " entries must be positive integers");
    }
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

inline ProbDist parse_dist(const std::string& text, const std::string& what, const Labels& labels = {}) {
  std::vector<double> p = parse_list(text, what);
  try {
    if (labels.empty()) return ProbDist(std::move(p));
    if (labels.size() != p.size()) {
      throw CliError(ExitCode::invalid_params,
                     what + " needs " + std::to_string(labels.size()) + " entries, got " + std::to_string(p.size()));
    }
    return ProbDist(labels, std::move(p));
  } catch (const Error& e) {
    throw CliError(ExitCode::invalid_params, what + ": " + e.what());
  }
}

inline double model_probability(const json& v) {
  std::optional<double> x;
  if (v.is_number()) x = v.get<double>();
  if (v.is_string()) x = parse_number(v.get<std::string>());
  if (!x) throw CliError(ExitCode::parse_error, "probability " + v.dump() + " is not a number or p/q rational");
  return *x;
}

inline Labels string_list(const json& v, const std::string& what) {
  if (!v.is_array()) throw CliError(ExitCode::parse_error, what + " must be an array of strings");
  Labels out;
  for (const auto& x : v) {
    if (!x.is_string()) throw CliError(ExitCode::parse_error, what + " must be an array of strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

/// Empirical model from JSON text. Rows are keyed by context name ("a,b'")
/// or listed in canonical context order; each row lists joint outcomes with
/// the first party's outcome varying fastest.
inline EmpiricalModel parse_model(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (!doc.is_object()) throw CliError(ExitCode::parse_error, "model must be a JSON object");
    for (const char* key : {"parties", "measurements", "outcomes", "rows"}) {
      if (!doc.contains(key)) throw CliError(ExitCode::parse_error, std::string("model is missing '") + key + "'");
    }
    std::vector<Labels> measurements;
    if (!doc["measurements"].is_array()) throw CliError(ExitCode::parse_error, "measurements must be an array");
    for (const auto& m : doc["measurements"]) measurements.push_back(string_list(m, "measurements"));
    MeasurementScenario sc(string_list(doc["parties"], "parties"), std::move(measurements),
                           string_list(doc["outcomes"], "outcomes"));

    auto read_row = [&](const json& arr, const std::string& name) {
      if (!arr.is_array()) throw CliError(ExitCode::parse_error, "row " + name + " must be an array");
      std::vector<double> p;
      for (const auto& v : arr) p.push_back(model_probability(v));
      if (p.size() != sc.n_joint_outcomes()) {
        throw CliError(ExitCode::parse_error, "row " + name + " needs " + std::to_string(sc.n_joint_outcomes()) +
                                                  " entries");
      }
      return ProbDist(sc.joint_outcome_labels(), std::move(p));
    };

    std::map<Context, ProbDist> rows;
    const json& r = doc["rows"];
    const auto contexts = sc.contexts();
    if (r.is_object()) {
      for (const auto& [name, arr] : r.items()) {
        const Context ctx = sc.parse_context(name);
        if (!rows.emplace(ctx, read_row(arr, name)).second) {
          throw CliError(ExitCode::parse_error, "duplicate row " + name);
        }
      }
    } else if (r.is_array()) {
      if (r.size() != contexts.size()) {
        throw CliError(ExitCode::parse_error, "rows array needs one row per context");
      }
      for (std::size_t i = 0; i < contexts.size(); ++i) {
        rows.emplace(contexts[i], read_row(r[i], sc.context_name(contexts[i])));
      }
    } else {
      throw CliError(ExitCode::parse_error, "rows must be an object or an array");
    }
    for (const auto& ctx : contexts) {
      if (!rows.contains(ctx)) throw CliError(ExitCode::parse_error, "no row for context " + sc.context_name(ctx));
    }
    return EmpiricalModel(std::move(sc), std::move(rows));
  } catch (const json::exception& e) {
    throw CliError(ExitCode::parse_error, std::string("malformed model JSON: ") + e.what());
  } catch (const Error& e) {
    throw CliError(ExitCode::parse_error, std::string("invalid model: ") + e.what());
  }
}

inline EmpiricalModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(ExitCode::parse_error, "cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

inline json model_rows(const EmpiricalModel& model) {
  json rows = json::object();
  for (const auto& ctx : model.scenario().contexts()) {
    if (model.rows().contains(ctx)) rows[model.scenario().context_name(ctx)] = numbers(model.row(ctx).probs());
  }
  return rows;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers and returns the
/// results in index order.
template <class Fn>
auto parallel_map(std::size_t count, unsigned threads, Fn fn) {
  using T = decltype(fn(std::size_t{0}));
  std::vector<std::optional<T>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  std::vector<T> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

// ------------------------------------------------------------------ commands

/// Deviation of the worked Bell example: it cancels down to (2/3, 0, 0, 1/3)
/// on context (a, b).
inline ProbDist bell_example_deviation(const DoubledSimulation& sim) {
  const std::size_t n = sim.base_size();
  std::vector<double> g(2 * n, 0.0);
  g[0] = 0.284;
  g[1] = 0.078;
  g[4] = 0.078;
  g[n + 10] = 0.170;
  g[11] = 0.156;
  g[14] = 0.156;
  g[15] = 0.078;
  return ProbDist(doubled_labels(sim.lam.labels()), std::move(g));
}

inline Report cmd_bell_demo(const RunConfig& cfg) {
  const auto ns = parse_sizes(cfg.n.empty() ? "100" : cfg.n, "--n");
  const BellFixture fx = bell_fixture();
  const auto& sc = fx.model.scenario();
  const PhaseSpace space(sc);
  const DoubledSimulation sim = doubled_simulation(fx.lam);
  const ProbDist nu = sim.as_dist();

  double roundtrip = 0.0;
  for (const auto& ctx : sc.contexts()) {
    const ProbDist pushed = signed_pushforward(nu, context_outcome_map(space, ctx)).dist;
    roundtrip = std::max(roundtrip, l1_distance(pushed, fx.model.row(ctx)));
  }

  const Context ab{0, 0};
  const OutcomeMap chi = context_outcome_map(space, ab);
  const ProbDist mu = classical_pushforward(fx.lam, chi);
  const ProbDist f(sc.joint_outcome_labels(), {2.0 / 3.0, 0.0, 0.0, 1.0 / 3.0});
  const ProbDist g = bell_example_deviation(sim);
  const ProbDist gamma_g = signed_pushforward(g, chi).dist;
  const double gamma_error = l1_distance(gamma_g, f);

  Report rep;
  rep.command = "bell-demo";
  rep.config = {{"n", ns}};
  rep.table.header = {"n", "Lambda", "d_coarse", "d_fine", "reversal", "p_fine", "p_coarse"};

  json sanov = json::array();
  bool reversal = true;
  double d_fine = 0.0, d_coarse = 0.0;
  for (std::uint64_t n : ns) {
    const RateComparison rc = compare_rates(g, nu, f, mu, n);
    reversal = reversal && rc.reversal;
    d_fine = rc.d_fine;
    d_coarse = rc.d_coarse;
    sanov.push_back({{"n", n},
                     {"p_fine", number(rc.p_fine)},
                     {"p_coarse", number(rc.p_coarse)},
                     {"ratio", number(rc.p_fine / rc.p_coarse)}});
    rep.table.rows.push_back({std::to_string(n), format_number(sim.total_weight), format_number(rc.d_coarse),
                              format_number(rc.d_fine), rc.reversal ? "true" : "false", format_number(rc.p_fine),
                              format_number(rc.p_coarse)});
  }

  const bool ok = sim.total_weight == 1.25 && roundtrip <= 1e-12 && gamma_error <= 1e-12 && reversal;
  rep.results = {{"Lambda", number(sim.total_weight)},
                 {"table_roundtrip_max_error", number(roundtrip)},
                 {"realization_residual", number(realization_residual(fx.lam, fx.model))},
                 {"context", sc.context_name(ab)},
                 {"f", numbers(f.probs())},
                 {"mu", numbers(mu.probs())},
                 {"gamma_g", numbers(gamma_g.probs())},
                 {"gamma_g_error", number(gamma_error)},
                 {"d_coarse", number(d_coarse)},
                 {"d_fine", number(d_fine)},
                 {"reversal", reversal},
                 {"sanov", sanov},
                 {"checks_passed", ok}};
  if (!ok) rep.status = ExitCode::check_failed;
  return rep;
}

inline Report cmd_realize(const RunConfig& cfg) {
  if (cfg.model_path.empty()) throw CliError(ExitCode::usage, "realize needs --model");
  const EmpiricalModel model = load_model(cfg.model_path);
  const NoSignalingReport ns = no_signaling_check(model);
  if (!ns.pass) {
    const auto& sc = model.scenario();
    std::string where;
    if (ns.worst_pair) {
      where = " (party " + sc.parties()[ns.worst_party] + ": " + sc.context_name(ns.worst_pair->first) + " vs " +
              sc.context_name(ns.worst_pair->second) + ")";
    }
    throw CliError(ExitCode::signaling_model, "model is signaling, marginal gap " + format_number(ns.max_gap) + where);
  }
  const Realization r = realize_minimal(model);

  Report rep;
  rep.command = "realize";
  rep.config = {{"model", cfg.model_path}};
  json weights = json::object();
  rep.table.header = {"key", "value"};
  rep.table.rows.push_back({"Lambda", format_number(r.total_weight)});
  rep.table.rows.push_back({"residual", format_number(r.residual)});
  for (std::size_t j = 0; j < r.lam.size(); ++j) {
    weights[r.lam.labels()[j]] = number(r.lam[j]);
    rep.table.rows.push_back({r.lam.labels()[j], format_number(r.lam[j])});
  }
  rep.results = {{"Lambda", number(r.total_weight)},
                 {"residual", number(r.residual)},
                 {"nonnegative", r.lam.is_nonnegative()},
                 {"lambda", weights}};
  return rep;
}

inline bool is_bell_table(const EmpiricalModel& model) {
  const BellFixture fx = bell_fixture();
  if (!(model.scenario() == fx.model.scenario())) return false;
  for (const auto& ctx : fx.model.scenario().contexts()) {
    if (!model.rows().contains(ctx) || l1_distance(model.row(ctx), fx.model.row(ctx)) > 1e-12) return false;
  }
  return true;
}

inline Report cmd_reversal_search(const RunConfig& cfg) {
  const EmpiricalModel model = cfg.model_path.empty() ? bell_fixture().model : load_model(cfg.model_path);
  const auto& sc = model.scenario();
  if (!no_signaling_check(model).pass) throw CliError(ExitCode::signaling_model, "model is signaling");

  Context ctx;
  try {
    ctx = sc.parse_context(cfg.context);
  } catch (const Error& e) {
    throw CliError(ExitCode::invalid_params, e.what());
  }
  const ProbDist f = parse_dist(cfg.target.empty() ? "2/3,0,0,1/3" : cfg.target, "--target", sc.joint_outcome_labels());

  const bool bell = is_bell_table(model);
  std::string which = cfg.realization.empty() ? (bell ? "both" : "solver") : cfg.realization;
  if (which != "fixture" && which != "solver" && which != "both") {
    throw CliError(ExitCode::usage, "--realization must be fixture, solver or both");
  }
  if (which != "solver" && !bell) {
    throw CliError(ExitCode::invalid_params, "the fixture realization exists only for the Bell table");
  }
  std::vector<std::pair<std::string, SignedMeasure>> lams;
  if (which != "solver") lams.emplace_back("fixture", bell_fixture().lam);
  if (which != "fixture") lams.emplace_back("solver", realize_minimal(model).lam);

  const PhaseSpace space(sc);
  const OutcomeMap chi = context_outcome_map(space, ctx);

  Report rep;
  rep.command = "reversal-search";
  rep.config = {{"model", cfg.model_path.empty() ? json("builtin:bell") : json(cfg.model_path)},
                {"context", sc.context_name(ctx)},
                {"target", numbers(f.probs())},
                {"realization", which}};
  rep.table.header = {"realization", "status",   "Lambda",     "d_coarse",  "d_star",
                      "reversal",    "residual", "kkt_residual", "iterations"};
  json entries = json::array();
  for (const auto& [name, lam] : lams) {
    const ProbDist mu = classical_pushforward(lam, chi);
    const double d_coarse = kl_divergence(f, mu);
    const DoubledSimulation sim = doubled_simulation(lam);
    json e = {{"realization", name}, {"Lambda", number(sim.total_weight)}, {"mu", numbers(mu.probs())},
              {"d_coarse", number(d_coarse)}};
    try {
      const IProjection proj = min_kl_given_pushforward({sim, chi, f});
      const bool reversal = proj.divergence < d_coarse - 1e-12;
      json g = json::object();
      for (std::size_t k = 0; k < proj.g.size(); ++k) {
        if (proj.g[k] > 0.0) g[proj.g.labels()[k]] = number(proj.g[k]);
      }
      json zeros = json::array();
      for (std::size_t k : proj.forced_zero) zeros.push_back(proj.g.labels()[k]);
      e["status"] = "ok";
      e["d_star"] = number(proj.divergence);
      e["reversal"] = reversal;
      e["constraint_residual"] = number(proj.constraint_residual);
      e["kkt_residual"] = number(proj.kkt_residual);
      e["iterations"] = proj.iterations;
      e["forced_zero"] = zeros;
      e["g_star"] = g;
      e["gamma_g_star"] = numbers(signed_pushforward(proj.g, chi).dist.probs());
      rep.table.rows.push_back({name, "ok", format_number(sim.total_weight), format_number(d_coarse),
                                format_number(proj.divergence), reversal ? "true" : "false",
                                format_number(proj.constraint_residual), format_number(proj.kkt_residual),
                                std::to_string(proj.iterations)});
    } catch (const Error& err) {
      if (err.code() != Errc::infeasible) throw;
      e["status"] = std::string(to_string(err.code()));
      e["message"] = err.what();
      rep.status = ExitCode::infeasible_target;
      rep.table.rows.push_back(
          {name, std::string(to_string(err.code())), format_number(sim.total_weight), format_number(d_coarse), "", "", "", "", ""});
    }
    entries.push_back(std::move(e));
  }
  rep.results = {{"realizations", entries}};
  return rep;
}

/// Named targets for the near-uniform family: "ramp" (f_j proportional to j)
/// and "proxy" (f_1 = 1/m, rest proportional to j), or an explicit list.
inline ProbDist near_uniform_target(const std::string& spec, std::size_t m) {
  std::vector<double> f(m + 1, 0.0);
  if (spec.empty() || spec == "ramp") {
    const double total = static_cast<double>(m * (m + 1) / 2);
    for (std::size_t j = 1; j <= m; ++j) f[j] = static_cast<double>(j) / total;
    return ProbDist(std::move(f));
  }
  if (spec == "proxy") {
    const double md = static_cast<double>(m);
    const double rest = static_cast<double>(m * (m + 1) / 2 - 1);
    f[1] = 1.0 / md;
    for (std::size_t j = 2; j <= m; ++j) f[j] = (1.0 - 1.0 / md) * static_cast<double>(j) / rest;
    return ProbDist(std::move(f));
  }
  if (spec == "mu") {
    for (std::size_t j = 1; j <= m; ++j) f[j] = 1.0 / static_cast<double>(m);
    return ProbDist(std::move(f));
  }
  return parse_dist(spec, "--target", index_labels(m + 1));
}

inline Report cmd_near_uniform(const RunConfig& cfg) {
  if (cfg.m < 2 || cfg.m > 4096) throw CliError(ExitCode::invalid_params, "--m must lie in [2, 4096]");
  std::vector<double> grid = parse_list(cfg.epsilon_grid, "--epsilon-grid");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  NearUniformConfig base;
  base.m = cfg.m;
  base.c = cfg.c;
  base.target = near_uniform_target(cfg.target, cfg.m);
  try {
    for (double e : grid) {
      NearUniformConfig at = base;
      at.epsilon = e;
      validate(at);
    }
  } catch (const Error& e) {
    throw CliError(ExitCode::invalid_params, std::string("invalid grid: ") + e.what());
  }

  DerivativeEstimate d;
  try {
    d = near_uniform_derivative(base, cfg.h);
  } catch (const Error& e) {
    if (e.code() == Errc::internal_inconsistency) throw;
    throw CliError(ExitCode::invalid_params, e.what());
  }
  const auto gaps = parallel_map(grid.size(), cfg.threads, [&](std::size_t i) {
    NearUniformConfig at = base;
    at.epsilon = grid[i];
    return near_uniform_gap(at);
  });

  Report rep;
  rep.command = "near-uniform";
  rep.config = {{"m", cfg.m},
                {"c", number(cfg.c)},
                {"target", numbers(base.target.probs())},
                {"epsilon_grid", numbers(grid)},
                {"h", number(cfg.h)}};
  rep.table.header = {"epsilon", "gap_direct", "gap_closed_form", "derivative_fd", "derivative_analytic",
                      "minus_twice_kl"};
  json rows = json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rows.push_back({{"epsilon", number(grid[i])},
                    {"gap_direct", number(gaps[i].direct)},
                    {"gap_closed_form", number(gaps[i].closed_form)}});
    rep.table.rows.push_back({format_number(grid[i]), format_number(gaps[i].direct),
                              format_number(gaps[i].closed_form), format_number(d.finite_difference),
                              format_number(d.analytic), format_number(d.minus_twice_kl)});
  }
  const double rel = std::abs(d.finite_difference - d.analytic) / std::max(std::abs(d.analytic), 1e-300);
  rep.results = {{"derivative",
                  {{"step", number(d.step)},
                   {"finite_difference", number(d.finite_difference)},
                   {"analytic", number(d.analytic)},
                   {"relative_error", number(rel)},
                   {"minus_twice_kl", number(d.minus_twice_kl)}}},
                 {"rows", rows}};
  return rep;
}

inline std::uint64_t require_seed(const RunConfig& cfg) {
  if (!cfg.seed) throw CliError(ExitCode::usage, cfg.command + " draws random samples and needs --seed");
  return *cfg.seed;
}

inline Report cmd_mc_sanov(const RunConfig& cfg) {
  auto ns = parse_sizes(cfg.n.empty() ? "50,100,200,400" : cfg.n, "--n");
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  const ProbDist p = parse_dist(cfg.dist, "--dist");
  const ProbDist center = parse_dist(cfg.center, "--center", p.labels());
  if (!(cfg.delta >= 0.0) || !std::isfinite(cfg.delta)) {
    throw CliError(ExitCode::invalid_params, "--delta must be finite and non-negative");
  }
  const std::uint64_t seed = cfg.trials > 0 ? require_seed(cfg) : 0;
  const BallSpec ball{center, cfg.delta};
  const double kl_limit = kl_divergence(center, p);

  Report rep;
  rep.command = "mc-sanov";
  rep.config = {{"dist", numbers(p.probs())}, {"center", numbers(center.probs())}, {"delta", number(cfg.delta)},
                {"n", ns},                    {"trials", cfg.trials}};
  if (cfg.seed) rep.config["seed"] = *cfg.seed;
  rep.table.header = {"n",       "exact_probability", "mc_estimate", "mc_std_error", "mc_hits", "empirical_rate",
                      "min_ball_kl", "kl_limit",       "rate_gap",    "sanov_probability"};

  json rows = json::array();
  std::vector<double> gaps;
  for (std::uint64_t n : ns) {
    std::optional<double> exact, min_kl;
    try {
      exact = exact_ball_probability(p, ball, n);
      min_kl = min_ball_kl(p, ball, n);
    } catch (const Error& e) {
      if (e.code() != Errc::too_large) throw;
      if (cfg.trials == 0) {
        throw CliError(ExitCode::oracle_infeasible, "exact oracle infeasible at n = " + std::to_string(n) +
                                                        " and no Monte Carlo trials requested");
      }
    }
    std::optional<McEstimate> mc;
    if (cfg.trials > 0) mc = mc_ball_probability(p, ball, n, cfg.trials, seed, cfg.threads);

    const double prob = exact ? *exact : mc->estimate;
    const double rate = prob > 0.0 ? empirical_rate_from_probability(prob, n) : kInf;
    const double ref = min_kl ? *min_kl : kl_limit;
    const double gap = rate - ref;
    gaps.push_back(gap);

    json row = {{"n", n}};
    row["exact_probability"] = exact ? number(*exact) : json(nullptr);
    row["mc_estimate"] = mc ? number(mc->estimate) : json(nullptr);
    row["mc_std_error"] = mc ? number(mc->std_error) : json(nullptr);
    row["mc_hits"] = mc ? json(mc->hits) : json(nullptr);
    row["empirical_rate"] = number(rate);
    row["min_ball_kl"] = min_kl ? number(*min_kl) : json(nullptr);
    row["kl_limit"] = number(kl_limit);
    row["rate_gap"] = number(gap);
    row["sanov_probability"] = number(sanov_probability(kl_limit, n));
    rows.push_back(std::move(row));

    auto opt = [](const std::optional<double>& x) { return x ? format_number(*x) : std::string(); };
    rep.table.rows.push_back({std::to_string(n), opt(exact), mc ? format_number(mc->estimate) : "",
                              mc ? format_number(mc->std_error) : "", mc ? std::to_string(mc->hits) : "",
                              format_number(rate), opt(min_kl), format_number(kl_limit), format_number(gap),
                              format_number(sanov_probability(kl_limit, n))});
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < gaps.size(); ++i) decreasing = decreasing && std::abs(gaps[i]) < std::abs(gaps[i - 1]);
  rep.results = {{"rows", rows}, {"gap_strictly_decreasing", decreasing}};
  return rep;
}

inline Report cmd_ising(const RunConfig& cfg) {
  IsingBaseline b;
  try {
    b = ising_baseline(cfg.coupling, cfg.temperature);
  } catch (const Error& e) {
    throw CliError(ExitCode::invalid_params, e.what());
  }
  Report rep;
  rep.command = "ising";
  rep.config = {{"J", number(cfg.coupling)}, {"temperature", number(cfg.temperature)}};
  rep.table.header = {"key", "value"};
  json kernel = json::array();
  for (int i = 0; i < 4; ++i) kernel.push_back({b.kernel(i, 0), b.kernel(i, 1)});
  rep.results = {{"microstates", ising_microstates()}, {"macrostates", ising_macrostates()},
                 {"fine", numbers(b.fine.probs())},    {"coarse", numbers(b.coarse.probs())},
                 {"partition", number(b.partition)},   {"kernel", kernel}};
  rep.table.rows.push_back({"fine", join(b.fine.probs())});
  rep.table.rows.push_back({"coarse", join(b.coarse.probs())});
  rep.table.rows.push_back({"partition", format_number(b.partition)});

  if (!cfg.g.empty()) {
    const ProbDist g = parse_dist(cfg.g, "--g", ising_microstates());
    const double d_fine = kl_divergence(g, b.fine);
    const double d_coarse = kl_divergence(apply_ising_kernel(g), b.coarse);
    rep.config["g"] = numbers(g.probs());
    rep.results["g"] = {{"d_fine", number(d_fine)},
                        {"d_coarse", number(d_coarse)},
                        {"dpi_holds", d_fine >= d_coarse},
                        {"strict", d_fine > d_coarse}};
    rep.table.rows.push_back({"d_fine", format_number(d_fine)});
    rep.table.rows.push_back({"d_coarse", format_number(d_coarse)});
    rep.table.rows.push_back({"dpi_holds", d_fine >= d_coarse ? "true" : "false"});
  }

  if (cfg.random > 0) {
    const std::uint64_t seed = require_seed(cfg);
    rep.config["random"] = cfg.random;
    rep.config["seed"] = seed;
    Engine eng = make_engine(seed);
    double min_margin = kInf;
    std::uint64_t strict = 0;
    for (std::uint64_t t = 0; t < cfg.random; ++t) {
      std::vector<double> w(4);
      double total = 0.0;
      for (double& x : w) total += (x = 0.05 + uniform01(eng));
      for (double& x : w) x /= total;
      const ProbDist g(ising_microstates(), std::move(w));
      const double margin = kl_divergence(g, b.fine) - kl_divergence(apply_ising_kernel(g), b.coarse);
      min_margin = std::min(min_margin, margin);
      if (margin > 1e-12) ++strict;
    }
    rep.results["random"] = {{"samples", cfg.random}, {"strict", strict}, {"min_margin", number(min_margin)}};
    rep.table.rows.push_back({"random_samples", std::to_string(cfg.random)});
    rep.table.rows.push_back({"random_strict", std::to_string(strict)});
    rep.table.rows.push_back({"random_min_margin", format_number(min_margin)});
  }
  return rep;
}

inline Report run(const RunConfig& cfg) {
  if (cfg.command == "bell-demo") return cmd_bell_demo(cfg);
  if (cfg.command == "realize") return cmd_realize(cfg);
  if (cfg.command == "reversal-search") return cmd_reversal_search(cfg);
  if (cfg.command == "near-uniform") return cmd_near_uniform(cfg);
  if (cfg.command == "mc-sanov") return cmd_mc_sanov(cfg);
  if (cfg.command == "ising") return cmd_ising(cfg);
  throw CliError(ExitCode::usage, "unknown command '" + cfg.command + "'");
}

inline ExitCode exit_code_for(Errc code) {
  switch (code) {
    case Errc::infeasible:
      return ExitCode::infeasible_target;
    case Errc::invalid_argument:
    case Errc::invalid_config:
    case Errc::step_too_large:
    case Errc::dimension_mismatch:
    case Errc::label_mismatch:
      return ExitCode::invalid_params;
    default:
      return ExitCode::check_failed;
  }
}

}  // namespace sanovsim::cli

#endif  // SANOVSIM_TOOLS_COMMANDS_HPP
