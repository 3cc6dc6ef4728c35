#pragma once

#include "oacmab/env.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oacmab {

/// Monte-Carlo experiment definition. `preferred_label` is 0-based here and
/// 1-based (key f_p) in the config file.
struct ExperimentConfig {
  int options = 5;
  int contexts = 3;
  int labels = 4;
  int preferred_label = 0;
  int horizon = 100;
  int mc_runs = 100;
  std::vector<PolicyKind> policies{PolicyKind::active_inference, PolicyKind::thompson};
  std::vector<FusionMode> fusion_modes{FusionMode::no_human, FusionMode::naive};
  std::vector<double> fp_rates{0.0};
  CommSchedule schedule;
  double epsilon = 0.25;
  double p_ev_preferred = 1.0;
  double p_ev_other = 0.01;
  std::size_t reduction_threshold = 10;
  std::uint64_t base_seed = 1;
  std::string output_dir;
  double prior_mean = 0.5;
  double prior_var = 1.0;
  double assumed_fp = -1.0;  // negative: PSDA uses each cell's fp rate

  void validate() const;
};

/// fig4, fig6, hard or asymptotic.
ExperimentConfig preset(std::string_view name);

/// Flat `key = value` document, `#` comments, comma-separated lists. Keys
/// override `base`; unknown or repeated keys are errors.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
std::string format_config(const ExperimentConfig& cfg);

struct CellSpec {
  PolicyKind policy = PolicyKind::active_inference;
  FusionMode mode = FusionMode::no_human;
  double fp_rate = 0.0;

  std::string id() const;  // e.g. "aif/psda/fp=0.4" or "ts/no_human"
  static CellSpec parse(std::string_view id);
};

/// Cells in policy-major order. no_human cells ignore fp and appear once per policy.
std::vector<CellSpec> expand_cells(const ExperimentConfig& cfg);

EpisodeConfig episode_config(const ExperimentConfig& cfg, const CellSpec& cell);

struct CellResult {
  CellSpec spec;
  std::vector<double> mean_regret;        // length T
  std::vector<double> ci95_low;           // length T
  std::vector<double> ci95_high;          // length T
  std::vector<double> mean_belief_error;  // length T
  std::vector<double> final_regret;       // length mc_runs
  std::vector<double> final_belief_error; // length mc_runs
};

struct ResultTable {
  int horizon = 0;
  int mc_runs = 0;
  std::vector<CellResult> cells;

  const CellResult& cell(std::string_view id) const;
};

/// Run r uses environment seed base_seed + r and episode seed base_seed + r in
/// every cell. Output does not depend on `workers`.
ResultTable run_mc(const ExperimentConfig& cfg, int workers = 1);

/// regret.csv (cell,step,mean_regret,ci95_low,ci95_high), belief_error.csv
/// (cell,step,mean_error) and final.csv (cell,run,final_regret,final_belief_error).
void emit_csv(const ResultTable& table, const std::filesystem::path& dir);
ResultTable read_csv(const std::filesystem::path& dir);

struct PairedDifference {
  int n = 0;
  double mean = 0.0;
  double se = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  double z = 0.0;  // mean / se; 0 when se is 0 and the mean is 0
};

/// Statistics of a[i] - b[i].
PairedDifference paired_difference(std::span<const double> a, std::span<const double> b);

/// One-sided paired test at 95%: mean(a - b) < 0 with z < -1.6449.
bool significantly_less(std::span<const double> a, std::span<const double> b);

std::string summarize(const ResultTable& table);

}  // namespace oacmab
