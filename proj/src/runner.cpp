#include "aqis/runner.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "aqis/error.hpp"
#include "aqis/parallel.hpp"
#include "aqis/spectrum.hpp"
#include "aqis/states.hpp"

#ifndef AQIS_VERSION
#define AQIS_VERSION "0.0.0"
#endif

namespace aqis {

namespace fs = std::filesystem;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const char* sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::tau: return "tau";
    case SweepAxis::n_mc: return "N_mc";
    case SweepAxis::g1: return "g1";
    case SweepAxis::spins: return "N";
    case SweepAxis::beta: return "beta";
    case SweepAxis::alpha: return "alpha";
  }
  return "?";
}

const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> names{"spectrum",   "populations",    "energy_distribution",
                                              "observable_distribution", "dynamics", "phases",
                                              "tau_sweep",  "echo",           "otoc",
                                              "order_parameter"};
  return names;
}

// ---------------------------------------------------------------- config

namespace {

void require_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where.empty() ? "<root>" : where, "must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
  }
}

std::string join(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

double get_number(const json& j, const std::string& where, const char* key, std::optional<double> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(join(where, key), "missing");
  }
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(join(where, key), "must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(join(where, key), "must be finite");
  return x;
}

std::size_t get_count(const json& j, const std::string& where, const char* key, std::optional<std::size_t> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(join(where, key), "missing");
  }
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(join(where, key), "must be a non-negative integer");
  return static_cast<std::size_t>(v.get<long long>());
}

std::string get_string(const json& j, const std::string& where, const char* key, std::optional<std::string> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(join(where, key), "missing");
  }
  if (!j.at(key).is_string()) throw ConfigError(join(where, key), "must be a string");
  return j.at(key).get<std::string>();
}

bool get_bool(const json& j, const std::string& where, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError(join(where, key), "must be true or false");
  return j.at(key).get<bool>();
}

ModelSpec parse_model(const json& j) {
  const std::string kind = get_string(j, "model", "kind");
  ModelSpec m;
  if (kind == "lmg") {
    require_keys(j, "model", {"kind", "spins"});
    const std::size_t n = get_count(j, "model", "spins");
    try {
      m = ModelSpec::lmg(static_cast<int>(n));
    } catch (const ModelError& e) {
      throw ConfigError("model", e.what());
    }
  } else if (kind == "qrm") {
    require_keys(j, "model", {"kind", "ratio", "fock_cutoff"});
    const double ratio = get_number(j, "model", "ratio");
    const auto cutoff = static_cast<int>(get_count(j, "model", "fock_cutoff", 1000));
    try {
      m = ModelSpec::qrm(ratio, cutoff);
    } catch (const ModelError& e) {
      throw ConfigError("model", e.what());
    }
  } else {
    throw ConfigError("model.kind", "expected \"lmg\" or \"qrm\"");
  }
  try {
    m.validate();
  } catch (const ModelError& e) {
    throw ConfigError("model", e.what());
  }
  return m;
}

StateRecipe parse_state(const json& j) {
  StateRecipe s;
  const std::string kind = get_string(j, "state", "kind");
  if (kind == "microcanonical") {
    require_keys(j, "state", {"kind", "count"});
    s.kind = StateKind::microcanonical;
    s.count = get_count(j, "state", "count");
    if (s.count == 0) throw ConfigError("state.count", "must be positive");
  } else if (kind == "thermal") {
    require_keys(j, "state", {"kind", "beta", "max_discarded"});
    s.kind = StateKind::thermal;
    s.beta = get_number(j, "state", "beta");
    s.max_discarded = get_number(j, "state", "max_discarded", 1e-3);
    if (!(s.beta > 0.0)) throw ConfigError("state.beta", "must be positive");
  } else if (kind == "coherent") {
    require_keys(j, "state", {"kind", "alpha", "dressing"});
    s.kind = StateKind::coherent;
    const json& a = j.contains("alpha") ? j.at("alpha") : throw ConfigError("state.alpha", "missing");
    if (a.is_number()) {
      s.alpha = a.get<double>();
    } else if (a.is_array() && a.size() == 2 && a[0].is_number() && a[1].is_number()) {
      s.alpha = {a[0].get<double>(), a[1].get<double>()};
    } else {
      throw ConfigError("state.alpha", "must be a number or [re, im]");
    }
    const std::string d = get_string(j, "state", "dressing", std::string("bare"));
    if (d == "bare") s.dressing = SpinDressing::bare;
    else if (d == "dressed") s.dressing = SpinDressing::dressed;
    else throw ConfigError("state.dressing", "expected \"bare\" or \"dressed\"");
  } else {
    throw ConfigError("state.kind", "expected microcanonical, thermal or coherent");
  }
  return s;
}

EchoForm parse_echo_form(const std::string& s) {
  if (s == "phase_rate") return EchoForm::phase_rate;
  if (s == "hold") return EchoForm::hold;
  if (s == "literal") return EchoForm::literal;
  throw ConfigError("options.echo.form", "expected phase_rate, hold or literal");
}

RunOptions parse_options(const json& j) {
  RunOptions o;
  if (j.is_null()) return o;
  require_keys(j, "options",
               {"evolution", "taus", "quadrature", "integrator", "cycle_sum", "echo", "uniformity", "g1_values"});
  const std::string ev = get_string(j, "options", "evolution", std::string("adiabatic"));
  if (ev == "exact") o.exact_evolution = true;
  else if (ev != "adiabatic") throw ConfigError("options.evolution", "expected adiabatic or exact");

  if (j.contains("taus")) {
    const json& t = j.at("taus");
    require_keys(t, "options.taus", {"from", "to", "count"});
    o.tau_from = get_number(t, "options.taus", "from");
    o.tau_to = get_number(t, "options.taus", "to");
    o.tau_count = get_count(t, "options.taus", "count");
    if (!(o.tau_from > 0.0) || o.tau_to < o.tau_from) throw ConfigError("options.taus", "need 0 < from <= to");
    if (o.tau_count == 0) throw ConfigError("options.taus.count", "must be positive");
  }
  if (j.contains("quadrature")) {
    const json& q = j.at("quadrature");
    const std::string w = "options.quadrature";
    require_keys(q, w, {"nodes", "tolerance", "max_nodes", "tracked_levels", "local_refinement"});
    o.quadrature.nodes = get_count(q, w, "nodes", o.quadrature.nodes);
    o.quadrature.tolerance = get_number(q, w, "tolerance", o.quadrature.tolerance);
    o.quadrature.max_nodes = get_count(q, w, "max_nodes", o.quadrature.max_nodes);
    o.quadrature.local_refinement = get_bool(q, w, "local_refinement", true);
    if (q.contains("tracked_levels")) {
      const json& t = q.at("tracked_levels");
      if (t.is_string() && t.get<std::string>() == "auto") {
        o.auto_tracked = true;
      } else if (t.is_string() && t.get<std::string>() == "all") {
        o.auto_tracked = false;
        o.quadrature.tracked_levels = 0;
      } else {
        o.auto_tracked = false;
        o.quadrature.tracked_levels = get_count(q, w, "tracked_levels");
        if (o.quadrature.tracked_levels == 0) throw ConfigError(w + ".tracked_levels", "use \"all\" for every level");
      }
    }
    if (o.quadrature.nodes < 3 || o.quadrature.nodes % 2 == 0) throw ConfigError(w + ".nodes", "must be odd and >= 3");
    if (!(o.quadrature.tolerance > 0.0)) throw ConfigError(w + ".tolerance", "must be positive");
  }
  if (j.contains("integrator")) {
    const json& q = j.at("integrator");
    const std::string w = "options.integrator";
    require_keys(q, w, {"max_step_norm", "sample_interval", "gate_tolerance", "drift_tolerance", "max_halvings"});
    o.integrator.max_step_norm = get_number(q, w, "max_step_norm", o.integrator.max_step_norm);
    o.integrator.sample_interval = get_number(q, w, "sample_interval", o.integrator.sample_interval);
    o.integrator.gate_tolerance = get_number(q, w, "gate_tolerance", o.integrator.gate_tolerance);
    o.integrator.drift_tolerance = get_number(q, w, "drift_tolerance", o.integrator.drift_tolerance);
    o.integrator.max_halvings = static_cast<int>(get_count(q, w, "max_halvings", o.integrator.max_halvings));
    if (!(o.integrator.max_step_norm > 0.0)) throw ConfigError(w + ".max_step_norm", "must be positive");
  }
  const std::string cs = get_string(j, "options", "cycle_sum", std::string("full"));
  if (cs == "doublet") o.cycle_sum = CycleSum::doublet;
  else if (cs != "full") throw ConfigError("options.cycle_sum", "expected full or doublet");
  if (j.contains("echo")) {
    const json& e = j.at("echo");
    const std::string w = "options.echo";
    require_keys(e, w, {"form", "dt_min", "dt_max", "count", "spacing"});
    o.echo.form = parse_echo_form(get_string(e, w, "form", std::string("phase_rate")));
    o.echo.dt_min = get_number(e, w, "dt_min", o.echo.dt_min);
    o.echo.dt_max = get_number(e, w, "dt_max", o.echo.dt_max);
    o.echo.count = get_count(e, w, "count", o.echo.count);
    const std::string sp = get_string(e, w, "spacing", std::string("log"));
    if (sp == "linear") o.echo.log_spacing = false;
    else if (sp != "log") throw ConfigError(w + ".spacing", "expected log or linear");
    if (!(o.echo.dt_min > 0.0) || o.echo.dt_max <= o.echo.dt_min || o.echo.count < 2)
      throw ConfigError(w, "need 0 < dt_min < dt_max and count >= 2");
  }
  if (j.contains("uniformity")) {
    const json& u = j.at("uniformity");
    const std::string w = "options.uniformity";
    require_keys(u, w, {"k_begin", "k_end", "bins"});
    o.k_begin = get_count(u, w, "k_begin", o.k_begin);
    o.k_end = get_count(u, w, "k_end", o.k_end);
    o.bins = get_count(u, w, "bins", o.bins);
    if (o.k_end <= o.k_begin) throw ConfigError(w, "empty k range");
    if (o.bins == 0) throw ConfigError(w + ".bins", "must be positive");
  }
  if (j.contains("g1_values")) {
    const json& g = j.at("g1_values");
    if (!g.is_array() || g.empty()) throw ConfigError("options.g1_values", "must be a non-empty array");
    for (const auto& v : g) {
      if (!v.is_number()) throw ConfigError("options.g1_values", "entries must be numbers");
      o.g1_values.push_back(v.get<double>());
    }
  }
  return o;
}

SweepAxis parse_axis(const std::string& s) {
  for (SweepAxis a : {SweepAxis::tau, SweepAxis::n_mc, SweepAxis::g1, SweepAxis::spins, SweepAxis::beta,
                      SweepAxis::alpha})
    if (s == sweep_axis_name(a)) return a;
  throw ConfigError("sweep.axis", "expected one of tau, N_mc, g1, N, beta, alpha");
}

json model_json(const ModelSpec& m) {
  if (m.kind == ModelKind::lmg) return {{"kind", "lmg"}, {"spins", m.spins}};
  return {{"kind", "qrm"}, {"ratio", m.ratio}, {"fock_cutoff", m.fock_cutoff}};
}

json state_json(const StateRecipe& s) {
  switch (s.kind) {
    case StateKind::none: return nullptr;
    case StateKind::microcanonical: return {{"kind", "microcanonical"}, {"count", s.count}};
    case StateKind::thermal: return {{"kind", "thermal"}, {"beta", s.beta}, {"max_discarded", s.max_discarded}};
    case StateKind::coherent:
      return {{"kind", "coherent"},
              {"alpha", json::array({s.alpha.real(), s.alpha.imag()})},
              {"dressing", s.dressing == SpinDressing::bare ? "bare" : "dressed"}};
  }
  return nullptr;
}

json options_json(const RunOptions& o) {
  json q = {{"nodes", o.quadrature.nodes},
            {"tolerance", o.quadrature.tolerance},
            {"max_nodes", o.quadrature.max_nodes},
            {"local_refinement", o.quadrature.local_refinement}};
  if (o.auto_tracked) q["tracked_levels"] = "auto";
  else if (o.quadrature.tracked_levels == 0) q["tracked_levels"] = "all";
  else q["tracked_levels"] = o.quadrature.tracked_levels;
  json j = {{"evolution", o.exact_evolution ? "exact" : "adiabatic"},
          {"taus", {{"from", o.tau_from}, {"to", o.tau_to}, {"count", o.tau_count}}},
          {"quadrature", q},
          {"integrator",
           {{"max_step_norm", o.integrator.max_step_norm},
            {"sample_interval", o.integrator.sample_interval},
            {"gate_tolerance", o.integrator.gate_tolerance},
            {"drift_tolerance", o.integrator.drift_tolerance},
            {"max_halvings", o.integrator.max_halvings}}},
          {"cycle_sum", o.cycle_sum == CycleSum::full ? "full" : "doublet"},
          {"echo",
           {{"form", echo_form_name(o.echo.form)},
            {"dt_min", o.echo.dt_min},
            {"dt_max", o.echo.dt_max},
            {"count", o.echo.count},
            {"spacing", o.echo.log_spacing ? "log" : "linear"}}},
          {"uniformity", {{"k_begin", o.k_begin}, {"k_end", o.k_end}, {"bins", o.bins}}}};
  if (!o.g1_values.empty()) j["g1_values"] = o.g1_values;
  return j;
}

json config_json(const RunConfig& c) {
  json j = {{"name", c.name},
            {"model", model_json(c.model)},
            {"protocol", {{"g0", c.protocol.g0}, {"g1", c.protocol.g1}, {"tau", c.protocol.tau}}},
            {"metrics", c.metrics},
            {"options", options_json(c.options)}};
  if (c.state.kind != StateKind::none) j["state"] = state_json(c.state);
  if (c.sweep) j["sweep"] = {{"axis", sweep_axis_name(c.sweep->axis)}, {"values", c.sweep->values}};
  return j;
}

}  // namespace

RunConfig parse_config(const json& j) {
  require_keys(j, "", {"name", "model", "protocol", "state", "metrics", "options", "sweep"});
  RunConfig c;
  c.name = get_string(j, "", "name", std::string("run"));
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos)
    throw ConfigError("name", "must be a plain non-empty file name");
  if (!j.contains("model")) throw ConfigError("model", "missing");
  c.model = parse_model(j.at("model"));

  if (!j.contains("protocol")) throw ConfigError("protocol", "missing");
  const json& p = j.at("protocol");
  require_keys(p, "protocol", {"g0", "g1", "tau"});
  c.protocol = {get_number(p, "protocol", "g0"), get_number(p, "protocol", "g1"), get_number(p, "protocol", "tau")};
  try {
    c.protocol.validate();
  } catch (const ModelError& e) {
    throw ConfigError("protocol", e.what());
  }

  if (j.contains("state") && !j.at("state").is_null()) c.state = parse_state(j.at("state"));

  if (!j.contains("metrics")) throw ConfigError("metrics", "missing");
  const json& m = j.at("metrics");
  if (!m.is_array()) throw ConfigError("metrics", "must be an array of metric names");
  if (m.empty()) throw ConfigError("metrics", "at least one metric is required");
  std::set<std::string> seen;
  for (const auto& v : m) {
    if (!v.is_string()) throw ConfigError("metrics", "entries must be strings");
    const std::string name = v.get<std::string>();
    const auto& known = known_metrics();
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw ConfigError("metrics", "unknown metric '" + name + "'");
    if (!seen.insert(name).second) throw ConfigError("metrics", "duplicate metric '" + name + "'");
  }
  for (const auto& name : known_metrics())
    if (seen.count(name)) c.metrics.push_back(name);

  c.options = parse_options(j.contains("options") ? j.at("options") : json());

  static const std::set<std::string> stateless{"spectrum", "phases"};
  for (const auto& name : c.metrics)
    if (!stateless.count(name) && c.state.kind == StateKind::none)
      throw ConfigError("state", "metric '" + name + "' needs an initial state");
  if (c.state.kind == StateKind::coherent && c.model.kind != ModelKind::qrm)
    throw ConfigError("state.kind", "coherent states belong to the qrm model");
  const bool wants_exact = seen.count("dynamics") ||
                           (c.options.exact_evolution &&
                            (seen.count("energy_distribution") || seen.count("observable_distribution")));
  if (wants_exact && c.state.kind == StateKind::thermal)
    throw ConfigError("metrics", "exact dynamics needs a pure initial state");
  if ((seen.count("otoc") || seen.count("echo")) && c.state.kind == StateKind::thermal)
    throw ConfigError("metrics", "echo and otoc need a pure initial state");
  if (seen.count("order_parameter") && c.options.g1_values.empty())
    throw ConfigError("options.g1_values", "required by the order_parameter metric");

  if (j.contains("sweep") && !j.at("sweep").is_null()) {
    const json& s = j.at("sweep");
    require_keys(s, "sweep", {"axis", "values"});
    SweepGrid g;
    g.axis = parse_axis(get_string(s, "sweep", "axis"));
    if (!s.contains("values") || !s.at("values").is_array() || s.at("values").empty())
      throw ConfigError("sweep.values", "must be a non-empty array");
    for (const auto& v : s.at("values")) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) throw ConfigError("sweep.values", "entries must be finite numbers");
      g.values.push_back(v.get<double>());
    }
    bool up = true, down = true;
    for (std::size_t i = 1; i < g.values.size(); ++i) {
      up = up && g.values[i] > g.values[i - 1];
      down = down && g.values[i] < g.values[i - 1];
    }
    if (!up && !down) throw ConfigError("sweep.values", "must be strictly monotone");
    if (g.axis == SweepAxis::n_mc || g.axis == SweepAxis::spins)
      for (double v : g.values)
        if (v < 1.0 || v != std::floor(v)) throw ConfigError("sweep.values", "must be positive integers for this axis");
    c.sweep = g;
  }
  c.source = config_json(c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

std::string run_id(const RunConfig& config) {
  const std::string text = config.source.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

// ---------------------------------------------------------------- output

namespace {

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, std::initializer_list<const char*> header) : path_(path), out_(path) {
    if (!out_) throw IoError("cannot write " + path.string());
    bool first = true;
    for (const char* h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << '\n';
  }
  template <typename... T>
  void row(const T&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }
  ~CsvWriter() = default;
  void close() {
    out_.close();
    if (!out_) throw IoError("failed writing " + path_.string());
  }

 private:
  static std::string cell(double x) { return format_number(x); }
  static std::string cell(std::size_t x) { return std::to_string(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }

  fs::path path_;
  std::ofstream out_;
};

// Phase tables are shared between metrics, g1 values and sweep points.
class TableCache {
 public:
  std::shared_future<PhaseTable> get(const std::string& key, std::function<PhaseTable()> make) {
    std::unique_lock lock(mutex_);
    auto it = tables_.find(key);
    if (it != tables_.end()) return it->second;
    std::packaged_task<PhaseTable()> task(std::move(make));
    auto fut = task.get_future().share();
    tables_.emplace(key, fut);
    lock.unlock();
    task();
    return fut;
  }

 private:
  std::mutex mutex_;
  std::map<std::string, std::shared_future<PhaseTable>> tables_;
};

TableCache& table_cache() {
  static TableCache cache;
  return cache;
}

struct Pipeline {
  Pipeline(const RunConfig& c, fs::path o, std::size_t w) : cfg(c), out(std::move(o)), workers(w) {}

  const RunConfig& cfg;
  fs::path out;
  std::size_t workers;

  json summary = json::object();
  std::vector<Artifact> artifacts;

  std::optional<SpectralDecomposition> decomp;
  std::optional<ObservableMatrix> obs;
  std::optional<DoubletTable> doublets;
  std::optional<EigenbasisObservable> eigen_obs;
  std::optional<MixedState> eigen_state;  // eigenbasis at g0
  std::optional<PureState> pure_eigen;    // set for pure initial states
  std::optional<Trajectory> trajectory;
  std::size_t tracked = 0;

  bool wants(const std::string& m) const {
    return std::find(cfg.metrics.begin(), cfg.metrics.end(), m) != cfg.metrics.end();
  }

  fs::path file(const std::string& metric, const std::string& name) {
    artifacts.push_back({metric, name});
    return out / name;
  }

  void prepare() {
    const bool needs_vectors = cfg.state.kind != StateKind::none || wants("spectrum");
    const bool needs_decomp = needs_vectors || wants("phases");
    if (needs_decomp) decomp = spectral_decomposition(cfg.model, cfg.protocol.g0, needs_vectors);
    if (needs_vectors) {
      obs = observable_matrix(cfg.model, order_parameter_observable(cfg.model));
      doublets = doublet_pairing(*decomp, *obs);
    }
    if (cfg.state.kind != StateKind::none) build_state();
    tracked = tracked_levels();
  }

  void build_state() {
    switch (cfg.state.kind) {
      case StateKind::microcanonical:
        pure_eigen = microcanonical_sb(*decomp, *doublets, cfg.state.count);
        break;
      case StateKind::coherent: {
        const PureState phys = qrm_coherent(cfg.model, cfg.state.alpha, cfg.state.dressing, cfg.protocol.g0);
        pure_eigen = expand_in_eigenbasis(phys, *decomp);
        break;
      }
      case StateKind::thermal:
        eigen_state = thermal_sb(*decomp, *doublets, cfg.state.beta, cfg.state.max_discarded);
        summary["thermal_discarded_weight"] = eigen_state->discarded_weight;
        summary["thermal_members"] = eigen_state->members.size();
        break;
      case StateKind::none:
        break;
    }
    if (pure_eigen) eigen_state = as_ensemble(*pure_eigen);
    const bool full_eigen = eigen_state.has_value();
    if (full_eigen && needs_eigen_observable()) eigen_obs.emplace(*decomp, *obs, workers);
  }

  bool needs_eigen_observable() const {
    return wants("tau_sweep") || wants("otoc") || wants("order_parameter");
  }

  std::size_t tracked_levels() const {
    const auto& q = cfg.options.quadrature;
    if (!cfg.options.auto_tracked) return q.tracked_levels;
    std::size_t t = 0;
    if (eigen_state) t = populated_levels(*eigen_state, *decomp, 1e-10) + 8;
    if (wants("phases")) t = std::max(t, cfg.options.k_end);
    if (t == 0) return 0;
    const std::size_t sector = cfg.model.dimension() / 2 + 1;
    return t >= sector ? 0 : t;
  }

  double tau_max() const {
    double t = cfg.protocol.tau;
    if (wants("tau_sweep") || wants("otoc") || wants("order_parameter")) t = std::max(t, cfg.options.tau_to);
    return t;
  }

  PhaseTable table_for(double g1) {
    QuadratureControls q = cfg.options.quadrature;
    q.tracked_levels = tracked;
    q.tau_max = tau_max();
    q.workers = workers;
    RampProtocol p = cfg.protocol;
    p.g1 = g1;
    std::ostringstream key;
    key << cfg.model.describe() << '|' << format_number(p.g0) << '|' << format_number(p.g1) << '|' << q.nodes << '|'
        << format_number(q.tolerance) << '|' << format_number(q.tau_max) << '|' << q.max_nodes << '|'
        << q.tracked_levels << '|' << q.local_refinement;
    PhaseTable t = table_cache().get(key.str(), [=, this] { return phase_table(cfg.model, p, q); }).get();
    return t.with_tau(cfg.protocol.tau);
  }

  std::vector<double> taus() const { return tau_grid(cfg.options.tau_from, cfg.options.tau_to, cfg.options.tau_count); }

  double initial_order() const {
    return expectation_after_phases(*eigen_state, std::vector<double>(decomp->dimension(), 0.0), *eigen_obs,
                                    cfg.options.cycle_sum);
  }

  // ------------------------------------------------------------ metrics

  void spectrum() {
    CsvWriter s(file("spectrum", "spectrum.csv"), {"k", "parity", "energy"});
    for (Parity p : {Parity::even, Parity::odd})
      for (std::size_t k = 0; k < decomp->sector(p).size(); ++k) s.row(k, std::string(parity_name(p)), decomp->energy(p, k));
    s.close();
    CsvWriter d(file("spectrum", "doublets.csv"), {"k", "energy_even", "energy_odd", "gap", "coupling", "degenerate"});
    for (const auto& r : doublets->rows)
      d.row(r.k, r.energy_even, r.energy_odd, r.gap, r.coupling, static_cast<int>(r.degenerate));
    d.close();
    const auto ec = critical_energy(cfg.model, cfg.protocol.g0);
    summary["critical_energy"] = ec ? json(*ec + 0.0) : json(nullptr);
    summary["leading_degenerate_doublets"] = doublets->leading_degenerate();
    summary["mean_level_spacing"] = decomp->mean_level_spacing();
    summary["ground_energy"] = decomp->all_energies().front();
  }

  void populations() {
    CsvWriter w(file("populations", "populations.csv"), {"parity", "k", "energy", "weight"});
    const double total = eigen_state->total_weight();
    for (Parity p : {Parity::even, Parity::odd})
      for (std::size_t k = 0; k < decomp->sector(p).size(); ++k) {
        const std::size_t i = decomp->flat_index(p, k);
        double wsum = 0.0;
        for (const auto& m : eigen_state->members) {
          const double n2 = m.state.norm() * m.state.norm();
          wsum += m.weight * std::norm(m.state.coefficients[i]) / n2;
        }
        w.row(std::string(parity_name(p)), k, decomp->energy(p, k), wsum / total);
      }
    w.close();
  }

  const Trajectory& exact_run() {
    if (!trajectory) {
      if (!pure_eigen) throw ConfigError("state", "exact dynamics needs a pure initial state");
      trajectory = evolve_exact(to_physical_basis(*pure_eigen, *decomp), cfg.protocol, cfg.options.integrator);
    }
    return *trajectory;
  }

  // Final state in the eigenbasis at g0.
  MixedState final_eigen_state() {
    if (cfg.options.exact_evolution) return as_ensemble(expand_in_eigenbasis(exact_run().final_state, *decomp));
    return adiabatic_cycle(*eigen_state, table_for(cfg.protocol.g1));
  }

  void energy_distribution_metric() {
    const Distribution before = energy_distribution(*eigen_state, *decomp, *doublets);
    const Distribution after = energy_distribution(final_eigen_state(), *decomp, *doublets);
    CsvWriter w(file("energy_distribution", "energy_distribution.csv"), {"stage", "energy", "probability"});
    for (std::size_t i = 0; i < before.support.size(); ++i) w.row("initial", before.support[i], before.probabilities[i]);
    for (std::size_t i = 0; i < after.support.size(); ++i) w.row("final", after.support[i], after.probabilities[i]);
    w.close();
    const double tol = 1e-9 * std::max(1.0, std::abs(decomp->all_energies().front()));
    summary["energy_distribution_tv"] = total_variation(before, after, tol);
    summary["energy_mean_initial"] = before.mean();
    summary["energy_mean_final"] = after.mean();
    if (const auto ec = critical_energy(cfg.model, cfg.protocol.g0)) {
      summary["weight_above_critical_initial"] = before.mass_above(*ec);
      summary["weight_above_critical_final"] = after.mass_above(*ec);
    }
  }

  void observable_distribution_metric() {
    const ObservableSpectrum spec(*obs);
    auto physical = [&](const MixedState& m) {
      MixedState out = m;
      for (auto& mem : out.members) mem.state = to_physical_basis(mem.state, *decomp);
      return out;
    };
    const Distribution before = spec.distribution(physical(*eigen_state));
    const Distribution after = spec.distribution(physical(final_eigen_state()));
    CsvWriter w(file("observable_distribution", "observable_distribution.csv"), {"stage", "value", "probability"});
    for (std::size_t i = 0; i < before.support.size(); ++i) w.row("initial", before.support[i], before.probabilities[i]);
    for (std::size_t i = 0; i < after.support.size(); ++i) w.row("final", after.support[i], after.probabilities[i]);
    w.close();
    summary["observable"] = observable_name(obs->kind);
    summary["observable_negative_mass_initial"] = before.mass_below(0.0);
    summary["observable_negative_mass_final"] = after.mass_below(0.0);
  }

  void dynamics() {
    const Trajectory& t = exact_run();
    CsvWriter w(file("dynamics", "dynamics.csv"), {"t", "g", "order", "even", "energy", "norm"});
    for (const auto& s : t.samples) w.row(s.t, s.g, s.order, s.even, s.energy, s.norm);
    w.close();
    const auto& a = t.samples.front();
    const auto& b = t.samples.back();
    summary["order_initial"] = a.order;
    summary["order_final"] = b.order;
    summary["even_initial"] = a.even;
    summary["even_final"] = b.even;
    summary["energy_initial"] = a.energy;
    summary["energy_final"] = b.energy;
    summary["integrator_steps"] = t.steps;
    summary["integrator_dt"] = t.dt;
    summary["integrator_gate_difference"] = t.gate_difference;
    summary["integrator_norm_drift"] = t.max_norm_drift;
  }

  void phases() {
    const PhaseTable t = table_for(cfg.protocol.g1);
    CsvWriter w(file("phases", "phases.csv"), {"parity", "k", "rate", "phase"});
    for (Parity p : {Parity::even, Parity::odd})
      for (std::size_t k = 0; k < t.rates[index_of(p)].size(); ++k)
        w.row(std::string(parity_name(p)), k, t.rates[index_of(p)][k], t.phase(p, k));
    w.close();
    const auto dphi = t.delta_phi();
    const std::size_t end = std::min(cfg.options.k_end, dphi.size());
    const UniformityReport u = phase_uniformity(dphi, cfg.options.k_begin, end, cfg.options.bins);
    CsvWriter us(file("phases", "uniformity.csv"), {"k", "delta_phi_mod_2pi"});
    for (std::size_t i = 0; i < u.sample.size(); ++i) us.row(cfg.options.k_begin + i, u.sample[i]);
    us.close();
    CsvWriter h(file("phases", "uniformity_histogram.csv"), {"bin_center", "fraction"});
    for (std::size_t i = 0; i < u.histogram.support.size(); ++i) h.row(u.histogram.support[i], u.histogram.probabilities[i]);
    h.close();
    CsvWriter c(file("phases", "unit_circle.csv"), {"k", "x", "y"});
    for (std::size_t i = 0; i < u.circle.size(); ++i) c.row(cfg.options.k_begin + i, u.circle[i].first, u.circle[i].second);
    c.close();
    summary["ks_statistic"] = u.ks;
    summary["uniformity_samples"] = u.sample.size();
    summary["quadrature_nodes"] = t.nodes;
    summary["quadrature_error"] = t.estimated_error;
    summary["tracked_levels"] = tracked;
  }

  void tau_sweep_metric() {
    const PhaseTable t = table_for(cfg.protocol.g1);
    const TauSweepSeries s = tau_sweep(*eigen_state, t, *eigen_obs, taus(), cfg.options.cycle_sum);
    CsvWriter w(file("tau_sweep", "tau_sweep.csv"), {"tau", "expectation"});
    for (std::size_t i = 0; i < s.taus.size(); ++i) w.row(s.taus[i], s.values[i]);
    w.close();
    const double o0 = initial_order();
    summary["order_initial"] = o0;
    summary["tau_mean"] = s.mean;
    summary["tau_variance"] = s.variance;
    summary["sigma"] = scrambling_sigma(s);
    summary["tau_mean_relative"] = s.mean / o0;
    double worst = 0.0;
    for (double v : s.values) worst = std::max(worst, std::abs(v));
    summary["tau_max_abs_relative"] = worst / std::abs(o0);
    summary["quadrature_error"] = t.estimated_error;
    summary["tracked_levels"] = tracked;
  }

  std::vector<double> echo_grid() const {
    const auto& e = cfg.options.echo;
    std::vector<double> dts{0.0};
    for (std::size_t i = 0; i < e.count; ++i) {
      const double f = static_cast<double>(i) / static_cast<double>(e.count - 1);
      dts.push_back(e.log_spacing ? e.dt_min * std::pow(e.dt_max / e.dt_min, f) : e.dt_min + f * (e.dt_max - e.dt_min));
    }
    return dts;
  }

  void echo() {
    const PhaseTable t = table_for(cfg.protocol.g1);
    const auto freqs = echo_frequencies(t, *decomp, cfg.options.echo.form);
    const EchoCurve c = loschmidt_adiabatic(*pure_eigen, freqs, echo_grid(), cfg.options.echo.form);
    CsvWriter w(file("echo", "echo.csv"), {"dt", "L"});
    for (std::size_t i = 0; i < c.dts.size(); ++i) w.row(c.dts[i], c.values[i]);
    w.close();
    summary["echo_form"] = echo_form_name(cfg.options.echo.form);
    summary["echo_at_zero"] = c.values.front();
    EchoCurve positive = c;
    positive.dts.erase(positive.dts.begin());
    positive.values.erase(positive.values.begin());
    try {
      const EchoDecay d = echo_decay(positive);
      summary["echo_onset"] = d.onset;
      summary["echo_slope"] = d.slope;
      summary["echo_fit_points"] = d.fit_points;
      summary["echo_max_revival"] = d.max_revival;
    } catch (const NumericError& e) {
      summary["echo_decay_note"] = e.what();
      double m = 0.0;
      for (double v : positive.values) m = std::max(m, v);
      summary["echo_max_revival"] = m;
    }
  }

  void otoc() {
    const PhaseTable t = table_for(cfg.protocol.g1);
    const complex o0 = otoc_adiabatic(*pure_eigen, std::vector<double>(decomp->dimension(), 0.0), *eigen_obs);
    const OtocSeries s = otoc_series(*pure_eigen, t, *eigen_obs, taus(), o0.real());
    CsvWriter w(file("otoc", "otoc.csv"), {"tau", "re", "im", "rescaled"});
    double mx = 0.0;
    for (const auto& p : s.points) {
      w.row(p.tau, p.value.real(), p.value.imag(), p.rescaled);
      mx = std::max(mx, p.rescaled);
    }
    w.close();
    summary["otoc_initial"] = s.o0;
    summary["otoc_max_rescaled"] = mx;
  }

  void order_parameter() {
    const auto grid = taus();
    const auto& g1s = cfg.options.g1_values;
    std::vector<TauSweepSeries> series(g1s.size());
    for (std::size_t i = 0; i < g1s.size(); ++i)
      series[i] = tau_sweep(*eigen_state, table_for(g1s[i]), *eigen_obs, grid, cfg.options.cycle_sum);
    const double o0 = initial_order();
    CsvWriter w(file("order_parameter", "order_parameter.csv"), {"g1", "mean", "std", "mean_abs"});
    CsvWriter ws(file("order_parameter", "order_parameter_series.csv"), {"g1", "tau", "expectation"});
    json rows = json::array();
    for (std::size_t i = 0; i < g1s.size(); ++i) {
      double mean_abs = 0.0;
      for (double v : series[i].values) mean_abs += std::abs(v);
      mean_abs /= static_cast<double>(series[i].values.size());
      const double sd = std::sqrt(series[i].variance);
      w.row(g1s[i], series[i].mean, sd, mean_abs);
      for (std::size_t k = 0; k < grid.size(); ++k) ws.row(g1s[i], grid[k], series[i].values[k]);
      rows.push_back({{"g1", g1s[i]}, {"mean", series[i].mean}, {"std", sd}, {"mean_relative", series[i].mean / o0}});
    }
    w.close();
    ws.close();
    summary["order_initial"] = o0;
    summary["order_parameter"] = rows;
    summary["tracked_levels"] = tracked;
  }

  void run() {
    prepare();
    if (wants("spectrum")) spectrum();
    if (wants("populations")) populations();
    if (wants("energy_distribution")) energy_distribution_metric();
    if (wants("observable_distribution")) observable_distribution_metric();
    if (wants("dynamics")) dynamics();
    if (wants("phases")) phases();
    if (wants("tau_sweep")) tau_sweep_metric();
    if (wants("echo")) echo();
    if (wants("otoc")) otoc();
    if (wants("order_parameter")) order_parameter();
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

json RunManifest::to_json() const {
  json a = json::array();
  for (const auto& x : artifacts) a.push_back({{"metric", x.metric}, {"file", x.file}});
  json j = config.source;
  j["run_id"] = id;
  j["workers"] = workers;
  j["output"] = output.string();
  j["tool_version"] = AQIS_VERSION;
  j["artifacts"] = a;
  j["plot_scripts"] = scripts;
  j["summary"] = summary;
  return j;
}

RunManifest run_pipeline(const RunConfig& config, const fs::path& out, std::size_t workers) {
  make_dir(out);
  Pipeline p{config, out, worker_count(workers)};
  p.run();
  RunManifest m;
  m.id = run_id(config);
  m.config = config;
  m.workers = p.workers;
  m.output = out;
  m.artifacts = p.artifacts;
  m.summary = p.summary;
  m.scripts = emit_plot_scripts(out, m.artifacts);
  write_text(out / "manifest.json", m.to_json().dump(2) + "\n");
  return m;
}

// ---------------------------------------------------------------- plots

namespace {

const char* kPlotHeader = R"PY(import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name):
    with open(os.path.join(HERE, name), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def col(rows, key, cast=float):
    return [cast(r[key]) for r in rows]


def save(fig, name):
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, name), dpi=150)

)PY";

std::string plot_body(const std::string& metric) {
  if (metric == "spectrum")
    return R"PY(rows = load("spectrum.csv")
fig, ax = plt.subplots(figsize=(5, 4))
for parity, marker in (("even", "_"), ("odd", "x")):
    sel = [r for r in rows if r["parity"] == parity]
    ax.plot(col(sel, "k", int), col(sel, "energy"), marker, ms=4, ls="none", label=parity)
ax.set_xlabel("k")
ax.set_ylabel("E")
ax.legend()
save(fig, "spectrum.png")
)PY";
  if (metric == "populations")
    return R"PY(rows = load("populations.csv")
fig, ax = plt.subplots(figsize=(5, 4))
sel = [r for r in rows if float(r["weight"]) > 0]
ax.semilogy(col(sel, "energy"), col(sel, "weight"), ".", ms=3)
ax.set_xlabel("E_k")
ax.set_ylabel("population")
save(fig, "populations.png")
)PY";
  if (metric == "energy_distribution")
    return R"PY(rows = load("energy_distribution.csv")
fig, ax = plt.subplots(figsize=(5, 4))
for stage, style in (("initial", "k-"), ("final", "bo")):
    sel = [r for r in rows if r["stage"] == stage]
    ax.plot(col(sel, "energy"), col(sel, "probability"), style, ms=3, label=stage)
ax.set_xlabel("E")
ax.set_ylabel("P(E)")
ax.legend()
save(fig, "energy_distribution.png")
)PY";
  if (metric == "observable_distribution")
    return R"PY(rows = load("observable_distribution.csv")
fig, ax = plt.subplots(figsize=(5, 4))
for stage, style in (("initial", "k-"), ("final", "bs")):
    sel = [r for r in rows if r["stage"] == stage]
    ax.plot(col(sel, "value"), col(sel, "probability"), style, ms=3, label=stage)
ax.set_xlabel("O")
ax.set_ylabel("P(O)")
ax.legend()
save(fig, "observable_distribution.png")
)PY";
  if (metric == "dynamics")
    return R"PY(rows = load("dynamics.csv")
t = col(rows, "t")
g = col(rows, "g")
half = max(t) / 2
fig, axes = plt.subplots(1, 2, figsize=(9, 4))
fwd = [i for i, x in enumerate(t) if x <= half]
bwd = [i for i, x in enumerate(t) if x >= half]
order = col(rows, "order")
for idx, label, style in ((fwd, "F", "r-"), (bwd, "B", "b--")):
    axes[0].plot([g[i] for i in idx], [order[i] for i in idx], style, label=label)
axes[0].set_xlabel("g(t)")
axes[0].set_ylabel("<O>")
axes[0].legend()
axes[1].plot(t, col(rows, "even"), label="parity-even observable")
axes[1].plot(t, col(rows, "energy"), label="<H>")
axes[1].set_xlabel("t")
axes[1].legend()
save(fig, "dynamics.png")
)PY";
  if (metric == "phases")
    return R"PY(import math
circle = load("unit_circle.csv")
hist = load("uniformity_histogram.csv")
fig, axes = plt.subplots(1, 2, figsize=(9, 4))
axes[0].plot(col(circle, "x"), col(circle, "y"), "o", ms=3)
ts = [2 * math.pi * i / 200 for i in range(201)]
axes[0].plot([math.cos(v) for v in ts], [math.sin(v) for v in ts], "k-", lw=0.5)
axes[0].set_aspect("equal")
centers = col(hist, "bin_center")
width = 2 * math.pi / len(centers)
axes[1].bar(centers, col(hist, "fraction"), width=width, edgecolor="k")
axes[1].axhline(1 / len(centers), color="r", ls="--")
axes[1].set_xlabel("delta phi mod 2 pi")
save(fig, "phases.png")
)PY";
  if (metric == "tau_sweep")
    return R"PY(rows = load("tau_sweep.csv")
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(col(rows, "tau"), col(rows, "expectation"), "-")
ax.set_xlabel("tau")
ax.set_ylabel("<O(2 tau)>")
save(fig, "tau_sweep.png")
)PY";
  if (metric == "echo")
    return R"PY(rows = [r for r in load("echo.csv") if float(r["dt"]) > 0]
dt = col(rows, "dt")
fig, ax = plt.subplots(figsize=(5, 4))
ax.loglog(dt, col(rows, "L"), "-")
ax.loglog(dt, [min(1.0, 1.0 / x) for x in dt], "k--", label="1/dt")
ax.set_xlabel("dt")
ax.set_ylabel("L(dt)")
ax.legend()
save(fig, "echo.png")
)PY";
  if (metric == "otoc")
    return R"PY(rows = load("otoc.csv")
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(col(rows, "tau"), col(rows, "rescaled"), "-")
ax.set_xlabel("tau")
ax.set_ylabel("|O(2 tau)| / O(0)")
save(fig, "otoc.png")
)PY";
  if (metric == "order_parameter")
    return R"PY(rows = load("order_parameter.csv")
series = load("order_parameter_series.csv")
fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for g1 in sorted(set(r["g1"] for r in series), key=float):
    sel = [r for r in series if r["g1"] == g1]
    axes[0].plot(col(sel, "tau"), col(sel, "expectation"), "-", lw=0.8, label="g1=" + g1)
axes[0].set_xlabel("tau")
axes[0].set_ylabel("<O(2 tau)>")
if len(rows) <= 6:
    axes[0].legend()
axes[1].errorbar(col(rows, "g1"), col(rows, "mean"), yerr=col(rows, "std"), fmt="o-", capsize=3)
axes[1].set_xlabel("g1")
axes[1].set_ylabel("tau-averaged <O>")
save(fig, "order_parameter.png")
)PY";
  return {};
}

}  // namespace

std::vector<std::string> emit_plot_scripts(const fs::path& dir, const std::vector<Artifact>& artifacts) {
  std::vector<std::string> metrics;
  for (const auto& a : artifacts) {
    if (!fs::exists(dir / a.file)) throw IoError("missing CSV " + (dir / a.file).string());
    if (std::find(metrics.begin(), metrics.end(), a.metric) == metrics.end()) metrics.push_back(a.metric);
  }
  std::vector<std::string> written;
  for (const auto& m : metrics) {
    const std::string body = plot_body(m);
    if (body.empty()) continue;
    const std::string name = "plot_" + m + ".py";
    write_text(dir / name, std::string(kPlotHeader) + body);
    written.push_back(name);
  }
  return written;
}

// ---------------------------------------------------------------- sweeps

RunConfig sweep_point(const RunConfig& config, SweepAxis axis, double value) {
  json j = config.source;
  j.erase("sweep");
  switch (axis) {
    case SweepAxis::tau: j["protocol"]["tau"] = value; break;
    case SweepAxis::g1: j["protocol"]["g1"] = value; break;
    case SweepAxis::spins:
      if (config.model.kind != ModelKind::lmg) throw ConfigError("sweep.axis", "N applies to the lmg model");
      j["model"]["spins"] = static_cast<long long>(value);
      break;
    case SweepAxis::n_mc:
      if (config.state.kind != StateKind::microcanonical) throw ConfigError("sweep.axis", "N_mc needs a microcanonical state");
      j["state"]["count"] = static_cast<long long>(value);
      break;
    case SweepAxis::beta:
      if (config.state.kind != StateKind::thermal) throw ConfigError("sweep.axis", "beta needs a thermal state");
      j["state"]["beta"] = value;
      break;
    case SweepAxis::alpha:
      if (config.state.kind != StateKind::coherent) throw ConfigError("sweep.axis", "alpha needs a coherent state");
      j["state"]["alpha"] = json::array({value, 0.0});
      break;
  }
  return parse_config(j);
}

namespace {

std::string point_dir_name(SweepAxis axis, std::size_t index, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%03zu_%s=%.10g", index, sweep_axis_name(axis), value);
  return buf;
}

// Points that share model and protocol also share one quadrature depth, so their
// phase tables coincide and are computed once.
void align_tracked_levels(std::vector<RunConfig>& points, std::size_t workers) {
  if (points.empty() || !points.front().options.auto_tracked) return;
  std::vector<std::size_t> need(points.size(), 0);
  parallel_for(points.size(), workers, [&](std::size_t i) {
    Pipeline p{points[i], {}, 1};
    try {
      p.prepare();
    } catch (const Error&) {
      return;  // reported when the point itself runs
    }
    need[i] = p.tracked == 0 ? std::numeric_limits<std::size_t>::max() : p.tracked;
  });
  std::map<std::string, std::size_t> group;
  auto key = [](const RunConfig& c) {
    return c.model.describe() + "|" + format_number(c.protocol.g0) + "|" + format_number(c.protocol.g1);
  };
  for (std::size_t i = 0; i < points.size(); ++i) group[key(points[i])] = std::max(group[key(points[i])], need[i]);
  for (auto& c : points) {
    const std::size_t t = group[key(c)];
    if (t == 0) continue;
    json j = c.source;
    if (t == std::numeric_limits<std::size_t>::max()) j["options"]["quadrature"]["tracked_levels"] = "all";
    else j["options"]["quadrature"]["tracked_levels"] = t;
    c = parse_config(j);
  }
}

}  // namespace

SweepResult run_sweep(const RunConfig& config, const SweepGrid& grid, const fs::path& out, std::size_t workers) {
  workers = worker_count(workers);
  make_dir(out);
  std::vector<RunConfig> points;
  for (double v : grid.values) points.push_back(sweep_point(config, grid.axis, v));
  if (grid.axis == SweepAxis::n_mc || grid.axis == SweepAxis::beta || grid.axis == SweepAxis::alpha)
    align_tracked_levels(points, workers);

  SweepResult result;
  result.grid = grid;
  result.rows.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    result.rows[i].value = grid.values[i];
    result.rows[i].id = run_id(points[i]);
  }

  const fs::path journal = out / "sweep_journal.jsonl";
  std::vector<bool> done(points.size(), false);
  if (std::ifstream in(journal); in) {
    std::string line;
    while (std::getline(in, line)) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error&) {
        continue;  // torn final line of an interrupted run
      }
      for (std::size_t i = 0; i < points.size(); ++i)
        if (j.value("run_id", "") == result.rows[i].id && j.value("error", "x").empty()) {
          result.rows[i].summary = j.at("summary");
          done[i] = true;
        }
    }
  }

  std::mutex journal_mutex;
  std::ofstream jout(journal, std::ios::app);
  if (!jout) throw IoError("cannot write " + journal.string());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!done[i]) todo.push_back(i);
  const std::size_t outer = std::min(workers, todo.size());
  const std::size_t inner = outer > 0 ? std::max<std::size_t>(1, workers / outer) : workers;
  parallel_for(todo.size(), outer, [&](std::size_t t) {
    const std::size_t i = todo[t];
    SweepRow& row = result.rows[i];
    try {
      const RunManifest m =
          run_pipeline(points[i], out / "points" / point_dir_name(grid.axis, i, grid.values[i]), inner);
      row.summary = m.summary;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    std::lock_guard lock(journal_mutex);
    jout << json{{"run_id", row.id}, {"value", row.value}, {"summary", row.summary}, {"error", row.error}}.dump()
         << '\n';
    jout.flush();
  });

  std::set<std::string> keys;
  for (const auto& r : result.rows)
    for (auto it = r.summary.begin(); it != r.summary.end(); ++it)
      if (it.value().is_number()) keys.insert(it.key());
  {
    std::ofstream csv(out / "sweep.csv");
    if (!csv) throw IoError("cannot write sweep.csv");
    csv << sweep_axis_name(grid.axis) << ",run_id";
    for (const auto& k : keys) csv << ',' << k;
    csv << ",error\n";
    for (const auto& r : result.rows) {
      csv << format_number(r.value) << ',' << r.id;
      for (const auto& k : keys) {
        csv << ',';
        if (r.summary.contains(k) && r.summary.at(k).is_number()) csv << format_number(r.summary.at(k).get<double>());
      }
      std::string err = r.error;
      std::replace(err.begin(), err.end(), '"', '\'');
      csv << ",\"" << err << "\"\n";
    }
    if (!csv) throw IoError("failed writing sweep.csv");
  }

  if (grid.axis == SweepAxis::n_mc) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : result.rows)
      if (r.error.empty() && r.summary.contains("sigma")) pts.emplace_back(r.value, r.summary.at("sigma").get<double>());
    if (pts.size() >= 4) {
      try {
        const ScalingFit f = scaling_fit(pts);
        result.summary["sigma_exponent"] = f.exponent;
        result.summary["sigma_prefactor"] = f.prefactor;
        result.summary["sigma_fit_residual"] = f.residual;
      } catch (const Error& e) {
        result.summary["sigma_fit_note"] = e.what();
      }
    }
  }

  json rows = json::array();
  for (const auto& r : result.rows)
    rows.push_back({{"value", r.value}, {"run_id", r.id}, {"error", r.error}});
  json manifest = config.source;
  manifest["run_id"] = run_id(config);
  manifest["workers"] = workers;
  manifest["output"] = out.string();
  manifest["tool_version"] = AQIS_VERSION;
  manifest["points"] = rows;
  manifest["summary"] = result.summary;
  write_text(out / "manifest.json", manifest.dump(2) + "\n");

  const std::string axis = sweep_axis_name(grid.axis);
  write_text(out / "plot_sweep.py", std::string(kPlotHeader) + R"PY(rows = [r for r in load("sweep.csv") if not r["error"]]
axis = ")PY" + axis + R"PY("
keys = [k for k in rows[0] if k not in (axis, "run_id", "error") and rows[0][k]] if rows else []
for key in keys:
    fig, ax = plt.subplots(figsize=(5, 4))
    xs = col(rows, axis)
    ys = [float(r[key]) for r in rows]
    if key == "sigma" and all(v > 0 for v in ys):
        ax.loglog(xs, ys, "o-")
    else:
        ax.plot(xs, ys, "o-")
    ax.set_xlabel(axis)
    ax.set_ylabel(key)
    save(fig, "sweep_" + key + ".png")
    plt.close(fig)
)PY");
  return result;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ModelError*>(&e) ||
      dynamic_cast<const StateError*>(&e))
    return 2;
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const IoError*>(&e)) return 4;
  return 1;
}

}  // namespace aqis
