#include "oacmab/experiments.hpp"
#include "oacmab/http.hpp"
#include "oacmab/json_io.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

namespace {

using namespace oacmab;

ExperimentConfig resolve_config(const std::string& preset_name, const std::string& config_path) {
  ExperimentConfig cfg = preset_name.empty() ? ExperimentConfig{} : preset(preset_name);
  if (!config_path.empty()) cfg = load_config(config_path, cfg);
  cfg.validate();
  return cfg;
}

std::filesystem::path output_dir(const std::string& flag, const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("OACMAB_OUTPUT_DIR"); env && *env) return env;
  return "results";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int cmd_run(const std::string& preset_name, const std::string& config_path, int workers, const std::string& out) {
  const ExperimentConfig cfg = resolve_config(preset_name, config_path);
  const auto dir = output_dir(out, cfg);
  std::cerr << "running " << expand_cells(cfg).size() << " cells x " << cfg.mc_runs << " runs on " << workers
            << " worker(s)\n";
  const ResultTable table = run_mc(cfg, workers);
  emit_csv(table, dir);
  write_text(dir / "config.txt", format_config(cfg));
  {
    std::ofstream envs(dir / "environments.jsonl");
    for (int r = 0; r < cfg.mc_runs; ++r) {
      const auto env = generate_environment(cfg.options, cfg.contexts, cfg.labels, cfg.preferred_label,
                                            cfg.base_seed + static_cast<std::uint64_t>(r));
      json j = environment_to_json(env);
      j["run"] = r;
      j["seed"] = cfg.base_seed + static_cast<std::uint64_t>(r);
      envs << j.dump() << '\n';
    }
  }
  const std::string summary = summarize(table);
  write_text(dir / "summary.txt", summary);
  std::cout << summary << "\nwrote " << dir.string() << '\n';
  return 0;
}

int cmd_summarize(const std::string& in) {
  std::cout << summarize(read_csv(in));
  return 0;
}

int cmd_episode(const std::string& preset_name, const std::string& config_path, const std::string& policy,
                const std::string& fusion, std::optional<double> fp, std::uint64_t seed, const std::string& out) {
  const ExperimentConfig cfg = resolve_config(preset_name, config_path);
  CellSpec cell{parse_policy(policy), parse_fusion_mode(fusion), fp.value_or(cfg.fp_rates.front())};
  const auto env = generate_environment(cfg.options, cfg.contexts, cfg.labels, cfg.preferred_label, seed);
  const EpisodeTrajectory traj = run_episode(env, episode_config(cfg, cell), seed);
  if (out.empty() || out == "-") {
    write_trajectory_jsonl(std::cout, traj);
  } else {
    std::ofstream file(out);
    if (!file) throw std::runtime_error("cannot write " + out);
    write_trajectory_jsonl(file, traj);
    std::cerr << cell.id() << ": final regret " << traj.steps.back().cumulative_regret << ", wrote " << out
              << '\n';
  }
  return 0;
}

int cmd_serve(const std::string& host, int port, const std::string& snapshot_dir) {
  SessionStore store(snapshot_dir);
  if (const int n = store.load_snapshots(); n > 0) std::cerr << "restored " << n << " session(s)\n";
  httplib::Server server;
  install_routes(server, store);
  std::cerr << "listening on http://" << host << ':' << port << '\n';
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ':' << port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Observation-augmented contextual bandits: Monte-Carlo runs and interactive sessions"};
  app.require_subcommand(1);

  std::string preset_name, config_path, out;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* run = app.add_subcommand("run", "Monte-Carlo experiment; writes CSVs and a summary");
  run->add_option("--preset", preset_name, "fig4, fig6, hard or asymptotic")
      ->check(CLI::IsMember({"fig4", "fig6", "hard", "asymptotic"}));
  run->add_option("--config", config_path, "key = value file applied over the preset")->check(CLI::ExistingFile);
  run->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out", out, "output directory (default: config output_dir, $OACMAB_OUTPUT_DIR, ./results)");

  std::string in;
  auto* summ = app.add_subcommand("summarize", "Summarize an output directory");
  summ->add_option("--in", in, "directory holding regret.csv, belief_error.csv, final.csv")
      ->required()
      ->check(CLI::ExistingDirectory);

  std::string policy = "aif", fusion = "psda";
  std::optional<double> fp;
  std::uint64_t seed = 1;
  auto* ep = app.add_subcommand("episode", "Single episode as JSONL, one line per step");
  ep->add_option("--preset", preset_name)->check(CLI::IsMember({"fig4", "fig6", "hard", "asymptotic"}));
  ep->add_option("--config", config_path)->check(CLI::ExistingFile);
  ep->add_option("--policy", policy, "oracle, egreedy, ucb, ts or aif");
  ep->add_option("--fusion", fusion, "no_human, naive or psda");
  ep->add_option("--fp", fp, "human fault rate (default: first fp_rates entry)");
  ep->add_option("--seed", seed, "environment and episode seed");
  ep->add_option("--out", out, "JSONL file, '-' for stdout");

  std::string host = "127.0.0.1", snapshot_dir;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP session service");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--snapshot-dir", snapshot_dir, "enables POST /sessions/{id}/snapshot and restores on start");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(preset_name, config_path, workers, out);
    if (*summ) return cmd_summarize(in);
    if (*ep) return cmd_episode(preset_name, config_path, policy, fusion, fp, seed, out);
    if (*serve) return cmd_serve(host, port, snapshot_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
