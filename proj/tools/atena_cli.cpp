// atena: pretrain, run, sweep, serve and report active test-time adaptation
// experiments on synthetic graph-navigation worlds.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atena/errors.hpp"
#include "atena/harness.hpp"
#include "atena/policy.hpp"
#include "atena/rng.hpp"
#include "atena/server.hpp"

namespace fs = std::filesystem;
using namespace atena;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON experiment config");
  cmd->add_option("--set", c.overrides, "Override a config field, key=value (repeatable)");
  cmd->add_option("--seed", c.seeds, "Seed(s); defaults to the config's seeds");
  cmd->add_option("--out", c.out, "Output directory; defaults to the config's out_dir");
}

harness::ExperimentConfig resolve(const Common& c) {
  harness::ExperimentConfig config;
  if (!c.config_path.empty()) config = harness::load_config(c.config_path);
  for (const auto& o : c.overrides) harness::apply_override(config, o);
  if (!c.seeds.empty()) config.seeds = c.seeds;
  if (!c.out.empty()) config.out_dir = c.out;
  harness::validate(config);
  return config;
}

harness::SweepGrid parse_grid(const std::vector<std::string>& specs) {
  harness::SweepGrid grid;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("grid must look like key=v1,v2,...: " + spec);
    std::vector<nlohmann::json> values;
    std::string rest = spec.substr(eq + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto comma = rest.find(',', pos);
      const auto token = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        values.push_back(nlohmann::json::parse(token));
      } catch (const nlohmann::json::parse_error&) {
        values.emplace_back(token);
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    grid.emplace_back(spec.substr(0, eq), std::move(values));
  }
  return grid;
}

int cmd_pretrain(const Common& c) {
  const auto config = resolve(c);
  fs::create_directories(config.out_dir);
  for (auto seed : config.seeds) {
    const auto suite = harness::build_suite(config, seed);
    policy::BcOptions opt;
    opt.hidden_dim = config.hidden_dim;
    opt.epochs = config.bc_epochs;
    opt.learning_rate = config.bc_learning_rate;
    opt.momentum = config.bc_momentum;
    opt.weight_decay = config.bc_weight_decay;
    opt.seed = derive_seed(seed, "policy");
    policy::BcReport report;
    const auto params = policy::pretrain_bc(suite.seen_worlds, suite.seen_tasks, opt, &report);
    const auto path = fs::path(config.out_dir) / ("policy_seed" + std::to_string(seed) + ".ckpt");
    policy::save_checkpoint(params, seed, path);
    const double test_agree = policy::expert_agreement(params, suite.test_worlds, suite.test_tasks);
    std::printf("seed %llu: loss %.4f -> %.4f, expert agreement seen %.1f%% shifted %.1f%% -> %s\n",
                static_cast<unsigned long long>(seed), report.loss_per_epoch.front(),
                report.loss_per_epoch.back(), 100.0 * report.agreement, 100.0 * test_agree,
                path.c_str());
  }
  return 0;
}

int cmd_run(const Common& c) {
  const auto config = resolve(c);
  for (auto seed : config.seeds) {
    const auto result = harness::run(config, seed);
    const auto dir = fs::path(config.out_dir) /
                     (std::string(sal::to_string(config.method)) + "_" +
                      std::string(harness::to_string(config.sampling)) + "_seed" + std::to_string(seed));
    harness::write_run(result, dir);
    const auto& r = result.report;
    std::printf("%-14s seed %-3llu SR %6.2f  OSR %6.2f  SPL %6.2f  NE %5.2f  active %5.1f%%  self-acc %5.1f%%  -> %s\n",
                std::string(sal::to_string(config.method)).c_str(),
                static_cast<unsigned long long>(seed), r.sr, r.osr, r.spl, r.ne,
                100.0 * r.active_episode_ratio, 100.0 * r.confusion.accuracy(), dir.c_str());
  }
  return 0;
}

int cmd_sweep(const Common& c, const std::vector<std::string>& grid_specs, unsigned threads) {
  const auto config = resolve(c);
  const auto grid = parse_grid(grid_specs);
  const auto cells = harness::sweep(config, grid, threads);
  const auto csv = harness::sweep_csv(grid, cells);
  fs::create_directories(config.out_dir);
  const auto path = fs::path(config.out_dir) / "sweep.csv";
  std::ofstream(path) << csv;
  std::cout << csv << "-> " << path.string() << '\n';
  return 0;
}

int cmd_serve(const Common& c, int port, const std::string& static_dir) {
  auto config = resolve(c);
  config.oracle = "interactive";
  server::ServerOptions opt;
  opt.port = port;
  opt.static_dir = static_dir;
  opt.seed = config.seeds.front();
  server::FeedbackServer srv(config, opt);
  std::printf("serving on http://127.0.0.1:%d (seed %llu)\n", srv.port(),
              static_cast<unsigned long long>(opt.seed));
  srv.start();
  srv.wait_run();
  const auto result = srv.result();
  harness::write_run(result, fs::path(config.out_dir) / ("serve_seed" + std::to_string(opt.seed)));
  std::printf("run finished: SR %.2f, active %.1f%%\n", result.report.sr,
              100.0 * result.report.active_episode_ratio);
  srv.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active test-time adaptation for graph navigation"};
  app.require_subcommand(1);

  Common common;
  auto* pretrain = app.add_subcommand("pretrain", "Behavior-clone the base policy and save checkpoints");
  add_common(pretrain, common);

  auto* run = app.add_subcommand("run", "Run one experiment per seed and write logs");
  add_common(run, common);

  std::vector<std::string> grid;
  unsigned threads = 0;
  auto* sweep = app.add_subcommand("sweep", "Grid sweep over config fields x seeds");
  add_common(sweep, common);
  sweep->add_option("--grid", grid, "key=v1,v2,... (repeatable)")->required();
  sweep->add_option("--threads", threads, "Worker threads (0 = hardware)");

  int port = 8080;
  std::string static_dir;
  auto* serve = app.add_subcommand("serve", "Run with the interactive human oracle over HTTP");
  add_common(serve, common);
  serve->add_option("--port", port, "HTTP port (0 picks a free port)");
  serve->add_option("--static", static_dir, "Directory with the console bundle");

  std::vector<std::string> report_paths;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Summarize run directories into tables");
  report->add_option("paths", report_paths, "Run directories or report.json files")->required();
  report->add_option("--out", report_out, "Directory for summary.csv / summary.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pretrain) return cmd_pretrain(common);
    if (*run) return cmd_run(common);
    if (*sweep) return cmd_sweep(common, grid, threads);
    if (*serve) return cmd_serve(common, port, static_dir);
    if (*report) {
      std::vector<fs::path> paths(report_paths.begin(), report_paths.end());
      std::cout << harness::report(paths, report_out);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
