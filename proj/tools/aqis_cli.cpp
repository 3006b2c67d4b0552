#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "aqis/error.hpp"
#include "aqis/oracle.hpp"
#include "aqis/runner.hpp"

namespace fs = std::filesystem;
using aqis::json;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::size_t threads = 0;
  std::optional<long long> seed;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "run configuration (JSON)");
  if (config_required) c->required();
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--threads", f.threads, "worker count (default: AQIS_THREADS or all cores)");
  cmd->add_option("--seed", f.seed, "accepted for interface stability; runs are deterministic");
  cmd->add_option("--set", f.sets, "override a config value, e.g. model.spins=300")->take_all();
}

// "a.b.c=value"; value is parsed as JSON when possible, else taken as a string.
void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw aqis::ConfigError(assignment, "--set expects key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw aqis::ConfigError(path, "empty path component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw aqis::IoError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw aqis::ConfigError("<file>", std::string("not valid JSON: ") + e.what());
  }
}

fs::path output_dir(const CommonFlags& f, const std::string& fallback) {
  return f.out.empty() ? fs::path("out") / fallback : fs::path(f.out);
}

void print_manifest(const aqis::RunManifest& m) {
  std::cout << "run " << m.id << " -> " << m.output.string() << "\n";
  for (const auto& a : m.artifacts) std::cout << "  " << a.file << "\n";
  for (auto it = m.summary.begin(); it != m.summary.end(); ++it)
    if (it.value().is_primitive()) std::cout << "  " << it.key() << " = " << it.value().dump() << "\n";
}

int execute(json j, const CommonFlags& f, const std::optional<std::vector<std::string>>& metrics,
            const std::string& fallback_dir) {
  for (const auto& s : f.sets) apply_override(j, s);
  if (metrics) j["metrics"] = *metrics;
  const aqis::RunConfig cfg = aqis::parse_config(j);
  const fs::path out = output_dir(f, fallback_dir.empty() ? cfg.name : fallback_dir);
  if (cfg.sweep) {
    const aqis::SweepResult r = aqis::run_sweep(cfg, *cfg.sweep, out, f.threads);
    std::size_t failed = 0;
    for (const auto& row : r.rows) {
      std::cout << aqis::sweep_axis_name(r.grid.axis) << "=" << aqis::format_number(row.value) << "  "
                << (row.error.empty() ? "ok" : "error: " + row.error) << "\n";
      failed += row.error.empty() ? 0 : 1;
    }
    for (auto it = r.summary.begin(); it != r.summary.end(); ++it)
      std::cout << "  " << it.key() << " = " << it.value().dump() << "\n";
    std::cout << "sweep -> " << out.string() << " (" << r.rows.size() - failed << "/" << r.rows.size() << " ok)\n";
    return 0;
  }
  print_manifest(aqis::run_pipeline(cfg, out, f.threads));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adiabatic information scrambling simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", AQIS_VERSION);

  CommonFlags f;
  struct Single {
    const char* name;
    const char* help;
    std::vector<std::string> metrics;
  };
  const std::vector<Single> singles{
      {"spectrum", "spectrum and doublet table at g0", {"spectrum"}},
      {"phases", "dynamical phases and their uniformity", {"phases"}},
      {"cycle", "post-cycle expectation over the tau window", {"tau_sweep"}},
      {"echo", "adiabatic Loschmidt echo", {"echo"}},
      {"otoc", "adiabatic out-of-time-ordered correlator", {"otoc"}},
  };
  std::vector<CLI::App*> single_cmds;
  for (const auto& s : singles) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, f, true);
    single_cmds.push_back(cmd);
  }
  auto* run = app.add_subcommand("run", "run a configuration as written (sweeps included)");
  add_common(run, f, true);

  auto* sweep = app.add_subcommand("sweep", "sweep one axis of a configuration");
  add_common(sweep, f, true);
  std::string axis;
  std::vector<double> values;
  sweep->add_option("--axis", axis, "tau, N_mc, g1, N, beta or alpha");
  sweep->add_option("--values", values, "grid values")->take_all();

  auto* fig = app.add_subcommand("fig", "reproduce a bundled figure preset");
  add_common(fig, f, false);
  int fig_number = 0;
  fig->add_option("number", fig_number, "figure number")->required()->check(CLI::Range(1, 7));

  auto* presets = app.add_subcommand("presets", "print a bundled preset or list them");
  std::string preset_name;
  presets->add_option("name", preset_name);

  auto* validate = app.add_subcommand("validate", "run the oracle suite");
  std::string validate_out;
  std::size_t validate_threads = 0;
  bool inject = false;
  validate->add_option("--out", validate_out, "directory for validation.csv");
  validate->add_option("--threads", validate_threads, "worker count");
  validate->add_flag("--inject-fault", inject, "perturb the Hamiltonian to prove the suite can fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (std::size_t i = 0; i < singles.size(); ++i)
      if (single_cmds[i]->parsed()) return execute(read_json(f.config), f, singles[i].metrics, "");
    if (run->parsed()) return execute(read_json(f.config), f, std::nullopt, "");
    if (sweep->parsed()) {
      json j = read_json(f.config);
      if (!axis.empty() || !values.empty()) {
        if (axis.empty() || values.empty()) throw aqis::ConfigError("sweep", "--axis and --values go together");
        j["sweep"] = {{"axis", axis}, {"values", values}};
      }
      if (!j.contains("sweep")) throw aqis::ConfigError("sweep", "missing; give --axis and --values");
      return execute(j, f, std::nullopt, "");
    }
    if (fig->parsed()) {
      const std::string name = "fig" + std::to_string(fig_number);
      json j = f.config.empty() ? aqis::preset(name) : read_json(f.config);
      return execute(j, f, std::nullopt, name);
    }
    if (presets->parsed()) {
      if (preset_name.empty()) {
        for (const auto& n : aqis::preset_names()) std::cout << n << "\n";
      } else {
        std::cout << aqis::preset(preset_name).dump(2) << "\n";
      }
      return 0;
    }
    if (validate->parsed()) {
      aqis::ValidationOptions opt;
      opt.inject_fault = inject;
      opt.workers = validate_threads;
      const auto reports = aqis::run_validation_suite(opt);
      bool all = true;
      std::ofstream csv;
      if (!validate_out.empty()) {
        fs::create_directories(validate_out);
        csv.open(fs::path(validate_out) / "validation.csv");
        if (!csv) throw aqis::IoError("cannot write validation.csv");
        csv << "check,deviation,tolerance,pass\n";
      }
      for (const auto& r : reports) {
        all = all && r.pass;
        std::printf("%-4s %-58s dev=%-12.3e tol=%.1e%s%s\n", r.pass ? "PASS" : "FAIL", r.check.c_str(), r.deviation,
                    r.tolerance, r.error.empty() ? "" : "  ", r.error.c_str());
        if (csv.is_open())
          csv << r.check << ',' << aqis::format_number(r.deviation) << ',' << aqis::format_number(r.tolerance) << ','
              << (r.pass ? 1 : 0) << '\n';
      }
      std::printf("%zu checks, %s\n", reports.size(), all ? "all passed" : "FAILURES");
      return all ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return aqis::exit_code_for(e);
  }
  return 1;
}
