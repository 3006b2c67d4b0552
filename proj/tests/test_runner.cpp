#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aqis/error.hpp"
#include "aqis/runner.hpp"

using namespace aqis;
namespace fs = std::filesystem;

namespace {

json small_config() {
  return json::parse(R"({
    "name": "small",
    "model": {"kind": "lmg", "spins": 40},
    "protocol": {"g0": 0.0, "g1": 1.25, "tau": 1000.0},
    "state": {"kind": "microcanonical", "count": 6},
    "metrics": ["spectrum", "populations", "energy_distribution", "phases", "tau_sweep", "echo", "otoc"],
    "options": {
      "taus": {"from": 1000.0, "to": 2000.0, "count": 16},
      "uniformity": {"k_begin": 0, "k_end": 10, "bins": 5},
      "echo": {"count": 21}
    }
  })");
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("aqis_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_error_key(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST_CASE("config errors name the key") {
  json j = small_config();
  j["metrics"] = json::array();
  CHECK(config_error_key(j) == "metrics");
  try {
    parse_config(j);
  } catch (const std::exception& e) {
    CHECK(exit_code_for(e) == 2);
  }

  j = small_config();
  j["model"]["spinz"] = 3;
  CHECK(config_error_key(j) == "model.spinz");
  j = small_config();
  j["model"]["spins"] = 41;
  CHECK(config_error_key(j) == "model");
  j = small_config();
  j["options"]["quadrature"] = {{"nodes", 100}};
  CHECK(config_error_key(j) == "options.quadrature.nodes");
  j = small_config();
  j["metrics"].push_back("bogus");
  CHECK(config_error_key(j) == "metrics");
  j = small_config();
  j["sweep"] = {{"axis", "tau"}, {"values", {3.0, 2.0, 2.5}}};
  CHECK(config_error_key(j) == "sweep.values");
  j = small_config();
  j["sweep"] = {{"axis", "volume"}, {"values", {1.0}}};
  CHECK(config_error_key(j) == "sweep.axis");
  j = small_config();
  j.erase("state");
  CHECK(config_error_key(j) == "state");
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("a", "b")) == 2);
  CHECK(exit_code_for(ModelError("x")) == 2);
  CHECK(exit_code_for(NumericError("x")) == 3);
  CHECK(exit_code_for(IoError("x")) == 4);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("run id is a content hash") {
  const RunConfig a = parse_config(small_config());
  json j = small_config();
  CHECK(run_id(parse_config(j)) == run_id(a));
  j["options"]["taus"]["count"] = 17;
  CHECK(run_id(parse_config(j)) != run_id(a));
  CHECK(run_id(a).size() == 16);
  // Defaults written out explicitly do not change the id.
  j = small_config();
  j["options"]["cycle_sum"] = "full";
  CHECK(run_id(parse_config(j)) == run_id(a));
}

TEST_CASE("pipeline output is byte-identical across worker counts") {
  const RunConfig cfg = parse_config(small_config());
  const fs::path one = scratch("w1"), three = scratch("w3");
  const RunManifest m1 = run_pipeline(cfg, one, 1);
  run_pipeline(cfg, three, 3);
  REQUIRE(!m1.artifacts.empty());
  for (const auto& a : m1.artifacts) {
    CHECK(fs::exists(one / a.file));
    CHECK(slurp(one / a.file) == slurp(three / a.file));
  }
  CHECK(slurp(one / "tau_sweep.csv").rfind("tau,expectation\n", 0) == 0);
  CHECK(slurp(one / "echo.csv").rfind("dt,L\n", 0) == 0);
  CHECK(slurp(one / "otoc.csv").rfind("tau,re,im,rescaled\n", 0) == 0);
  CHECK(slurp(one / "uniformity.csv").rfind("k,delta_phi_mod_2pi\n", 0) == 0);
  CHECK(slurp(one / "spectrum.csv").rfind("k,parity,energy\n", 0) == 0);
  const json man = json::parse(slurp(one / "manifest.json"));
  CHECK(man["run_id"] == m1.id);
  CHECK(man["model"]["spins"] == 40);
  CHECK(man["workers"] == 1);
  CHECK(man.contains("tool_version"));
  CHECK(man["summary"]["echo_at_zero"] == 1.0);
  for (const auto& s : m1.scripts) CHECK(fs::exists(one / s));
}

TEST_CASE("plot scripts") {
  const fs::path dir = scratch("plots");
  fs::create_directories(dir);
  CHECK(emit_plot_scripts(dir, {}).empty());
  CHECK(fs::is_empty(dir));
  CHECK_THROWS_AS(emit_plot_scripts(dir, {{"echo", "echo.csv"}}), IoError);

  json j = small_config();
  j["metrics"] = {"phases", "echo"};
  const fs::path out = scratch("plots_run");
  const RunManifest m = run_pipeline(parse_config(j), out, 1);
  REQUIRE(m.scripts.size() == 2);
  const std::string phases = slurp(out / "plot_phases.py");
  CHECK(phases.find("unit_circle.csv") != std::string::npos);
  CHECK(phases.find("uniformity_histogram.csv") != std::string::npos);
  const std::string echo = slurp(out / "plot_echo.py");
  CHECK(echo.find("loglog") != std::string::npos);
  CHECK(echo.find("1.0 / x") != std::string::npos);
}

TEST_CASE("singleton sweep equals the direct run") {
  json j = small_config();
  j["metrics"] = {"tau_sweep"};
  const RunConfig cfg = parse_config(j);
  const fs::path direct = scratch("direct"), swept = scratch("single");
  const RunManifest m = run_pipeline(cfg, direct, 1);
  const SweepResult r = run_sweep(cfg, {SweepAxis::n_mc, {6.0}}, swept, 1);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].error.empty());
  CHECK(r.rows[0].summary["sigma"] == m.summary["sigma"]);
  fs::path point;
  for (const auto& e : fs::directory_iterator(swept / "points")) point = e.path();
  CHECK(slurp(point / "tau_sweep.csv") == slurp(direct / "tau_sweep.csv"));
}

TEST_CASE("sweeps record failures and resume") {
  json j = small_config();
  j["metrics"] = {"tau_sweep"};
  const RunConfig cfg = parse_config(j);
  const SweepGrid grid{SweepAxis::n_mc, {2.0, 4.0, 8.0, 500.0}};
  const fs::path out = scratch("resume");
  const SweepResult full = run_sweep(cfg, grid, out, 2);
  REQUIRE(full.rows.size() == 4);
  CHECK(full.rows[0].error.empty());
  CHECK(full.rows[2].error.empty());
  CHECK_FALSE(full.rows[3].error.empty());
  const std::string table = slurp(out / "sweep.csv");

  // Simulate an interruption after the first two points.
  std::ifstream in(out / "sweep_journal.jsonl");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  in.close();
  std::ofstream trunc(out / "sweep_journal.jsonl");
  for (const auto& l : lines) {
    const json row = json::parse(l);
    if (row["value"] == 2.0 || row["value"] == 4.0) trunc << l << '\n';
  }
  trunc << "{\"run_id\": \"torn";
  trunc.close();
  fs::remove(out / "sweep.csv");
  const fs::path skipped = out / "points";
  fs::remove_all(skipped);

  const SweepResult resumed = run_sweep(cfg, grid, out, 2);
  CHECK(slurp(out / "sweep.csv") == table);
  std::size_t dirs = 0;
  for (const auto& e : fs::directory_iterator(skipped)) {
    (void)e;
    ++dirs;
  }
  CHECK(dirs == 2);  // only the two unfinished points ran again
  for (std::size_t i = 0; i < 4; ++i) CHECK(resumed.rows[i].id == full.rows[i].id);
}

TEST_CASE("sweep axis must fit the pipeline") {
  const RunConfig cfg = parse_config(small_config());
  CHECK_THROWS_AS(run_sweep(cfg, {SweepAxis::beta, {0.1}}, scratch("axis"), 1), ConfigError);
}

TEST_CASE("presets parse and match the figure parameters") {
  const auto names = preset_names();
  CHECK(names.size() == 7);
  for (const auto& n : names) CHECK_NOTHROW(parse_config(preset(n)));
  const RunConfig f2 = parse_config(preset("fig2"));
  CHECK(f2.model.spins == 100);
  CHECK(f2.protocol.g0 == 0.0);
  CHECK(f2.protocol.g1 == 1.25);
  CHECK(f2.protocol.tau == 500.0);
  CHECK(f2.state.count == 10);
  const RunConfig f3 = parse_config(preset("fig3"));
  CHECK(f3.model.spins == 2000);
  CHECK(f3.protocol.tau == 1000.0);
  CHECK(f3.options.k_end == 200);
  const RunConfig f4 = parse_config(preset("fig4"));
  CHECK(f4.model.spins == 1000);
  CHECK(f4.sweep->values.back() == 512.0);
  CHECK(f4.options.tau_count == 256);
  const RunConfig f5 = parse_config(preset("fig5"));
  CHECK(f5.model.spins == 2000);
  const RunConfig f6 = parse_config(preset("fig6"));
  CHECK(f6.state.beta == 0.02);
  CHECK(f6.model.spins == 1000);
  const RunConfig f7 = parse_config(preset("fig7"));
  CHECK(f7.model.ratio == 100.0);
  CHECK(f7.model.fock_cutoff == 1000);
  CHECK(f7.protocol.g0 == 2.0);
  CHECK(f7.state.alpha == complex(5.0, 0.0));
  CHECK_THROWS_AS(preset("fig9"), ConfigError);
}

#ifdef AQIS_CLI_PATH
TEST_CASE("CLI exit codes") {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  auto run = [&](const std::string& args) {
    const std::string cmd = std::string(AQIS_CLI_PATH) + " " + args + " > " + (dir / "log.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  json j = small_config();
  j["metrics"] = json::array();
  std::ofstream(dir / "empty.json") << j.dump();
  CHECK(run("run --config " + (dir / "empty.json").string()) == 2);
  CHECK(slurp(dir / "log.txt").find("metrics") != std::string::npos);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run("run --config " + (dir / "broken.json").string()) == 2);
  CHECK(run("run --config " + (dir / "missing.json").string()) == 4);

  j = small_config();
  j["options"]["quadrature"] = {{"max_nodes", 5}};
  std::ofstream(dir / "numeric.json") << j.dump();
  CHECK(run("phases --config " + (dir / "numeric.json").string() + " --out " + (dir / "n").string()) == 3);

  j = small_config();
  std::ofstream(dir / "ok.json") << j.dump();
  CHECK(run("spectrum --config " + (dir / "ok.json").string() + " --out " + (dir / "o").string()) == 0);
  CHECK(fs::exists(dir / "o" / "spectrum.csv"));
  CHECK_FALSE(fs::exists(dir / "o" / "tau_sweep.csv"));
  CHECK(run("spectrum --config " + (dir / "ok.json").string() + " --set model.spins=20 --out " +
            (dir / "s").string()) == 0);
  CHECK(json::parse(slurp(dir / "s" / "manifest.json"))["model"]["spins"] == 20);
  CHECK(run("fig 12") == 2);
}
#endif
