#include "oacmab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace oacmab {

namespace {

constexpr double kZ95 = 1.959963984540054;
constexpr double kZ95OneSided = 1.6448536269514722;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw std::invalid_argument(what + ": not a number: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw std::invalid_argument(what + ": not an integer: '" + s + "'");
  return v;
}

std::uint64_t parse_seed(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || s.front() == '-') {
    throw std::invalid_argument(what + ": not an unsigned integer: '" + s + "'");
  }
  return v;
}

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(std::span<const double> xs) {
  Moments m;
  const auto n = static_cast<double>(xs.size());
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / (n - 1.0));
  }
  return m;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (options < 2 || contexts < 1 || labels < 2) throw std::invalid_argument("config: need k >= 2, c >= 1, f >= 2");
  if (preferred_label < 0 || preferred_label >= labels) throw std::invalid_argument("config: f_p outside 1..f");
  if (horizon < 1 || mc_runs < 1) throw std::invalid_argument("config: t and mc_runs must be positive");
  if (policies.empty() || fusion_modes.empty()) throw std::invalid_argument("config: empty policy or fusion mode list");
  const bool needs_fp = std::any_of(fusion_modes.begin(), fusion_modes.end(),
                                    [](FusionMode m) { return m != FusionMode::no_human; });
  if (needs_fp && fp_rates.empty()) throw std::invalid_argument("config: empty fp_rates");
  for (double fp : fp_rates) {
    if (!(fp >= 0.0 && fp <= 1.0)) throw std::invalid_argument("config: fp rate outside [0, 1]");
  }
  schedule.validate();
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("config: epsilon outside [0, 1]");
  if (!(p_ev_preferred > 0.0 && p_ev_other > 0.0)) throw std::invalid_argument("config: p_ev entries must be > 0");
  if (reduction_threshold < 1) throw std::invalid_argument("config: reduction_threshold must be >= 1");
  if (!(prior_var > 0.0)) throw std::invalid_argument("config: prior_var must be > 0");
  if (assumed_fp > 1.0) throw std::invalid_argument("config: assumed_fp above 1");
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig cfg;
  const std::vector<PolicyKind> all{PolicyKind::active_inference, PolicyKind::thompson, PolicyKind::ucb,
                                    PolicyKind::epsilon_greedy, PolicyKind::oracle};
  if (name == "fig4") {
    cfg.policies = all;
    cfg.fusion_modes = {FusionMode::no_human, FusionMode::naive};
    cfg.fp_rates = {0.0};
  } else if (name == "fig6") {
    cfg.policies = {PolicyKind::active_inference, PolicyKind::thompson};
    cfg.fusion_modes = {FusionMode::no_human, FusionMode::naive, FusionMode::psda};
    cfg.fp_rates = {0.2, 0.4, 0.6};
  } else if (name == "hard") {
    cfg.options = 15;
    cfg.contexts = 3;
    cfg.labels = 12;
    cfg.policies = all;
    cfg.fusion_modes = {FusionMode::no_human, FusionMode::naive};
    cfg.fp_rates = {0.0};
  } else if (name == "asymptotic") {
    cfg.horizon = 1000;
    cfg.mc_runs = 1000;
    cfg.policies = {PolicyKind::active_inference, PolicyKind::thompson};
    cfg.fusion_modes = {FusionMode::naive};
    cfg.fp_rates = {0.0};
  } else {
    throw std::invalid_argument("unknown preset '" + std::string(name) +
                                "' (expected fig4, fig6, hard or asymptotic)");
  }
  return cfg;
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg) {
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = "config line " + std::to_string(lineno);
    if (eq == std::string::npos) throw std::invalid_argument(where + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!seen.insert(key).second) throw std::invalid_argument(where + ": duplicate key '" + key + "'");
    const std::string what = where + " (" + key + ")";

    if (key == "k") cfg.options = static_cast<int>(parse_int(value, what));
    else if (key == "c") cfg.contexts = static_cast<int>(parse_int(value, what));
    else if (key == "f") cfg.labels = static_cast<int>(parse_int(value, what));
    else if (key == "f_p") cfg.preferred_label = static_cast<int>(parse_int(value, what)) - 1;
    else if (key == "t") cfg.horizon = static_cast<int>(parse_int(value, what));
    else if (key == "mc_runs") cfg.mc_runs = static_cast<int>(parse_int(value, what));
    else if (key == "policies") {
      cfg.policies.clear();
      for (const auto& p : split(value, ',')) cfg.policies.push_back(parse_policy(p));
    } else if (key == "fusion_modes") {
      cfg.fusion_modes.clear();
      for (const auto& m : split(value, ',')) cfg.fusion_modes.push_back(parse_fusion_mode(m));
    } else if (key == "fp_rates") {
      cfg.fp_rates.clear();
      for (const auto& v : split(value, ',')) cfg.fp_rates.push_back(parse_double(v, what));
    } else if (key == "downlink_interval") cfg.schedule.downlink_interval = static_cast<int>(parse_int(value, what));
    else if (key == "uplink_delay") cfg.schedule.uplink_delay = static_cast<int>(parse_int(value, what));
    else if (key == "epsilon") cfg.epsilon = parse_double(value, what);
    else if (key == "p_ev_preferred") cfg.p_ev_preferred = parse_double(value, what);
    else if (key == "p_ev_other") cfg.p_ev_other = parse_double(value, what);
    else if (key == "reduction_threshold") {
      const long long v = parse_int(value, what);
      if (v < 1) throw std::invalid_argument(what + ": must be >= 1");
      cfg.reduction_threshold = static_cast<std::size_t>(v);
    } else if (key == "base_seed") cfg.base_seed = parse_seed(value, what);
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "prior_mean") cfg.prior_mean = parse_double(value, what);
    else if (key == "prior_var") cfg.prior_var = parse_double(value, what);
    else if (key == "assumed_fp") cfg.assumed_fp = parse_double(value, what);
    else throw std::invalid_argument(where + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  return parse_config(in, std::move(base));
}

std::string format_config(const ExperimentConfig& cfg) {
  auto join = [](const auto& items, auto fn) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += ", ";
      out += fn(item);
    }
    return out;
  };
  std::ostringstream os;
  os << "k = " << cfg.options << '\n'
     << "c = " << cfg.contexts << '\n'
     << "f = " << cfg.labels << '\n'
     << "f_p = " << cfg.preferred_label + 1 << '\n'
     << "t = " << cfg.horizon << '\n'
     << "mc_runs = " << cfg.mc_runs << '\n'
     << "policies = " << join(cfg.policies, [](PolicyKind p) { return std::string(to_string(p)); }) << '\n'
     << "fusion_modes = " << join(cfg.fusion_modes, [](FusionMode m) { return std::string(to_string(m)); }) << '\n'
     << "fp_rates = " << join(cfg.fp_rates, fmt_double) << '\n'
     << "downlink_interval = " << cfg.schedule.downlink_interval << '\n'
     << "uplink_delay = " << cfg.schedule.uplink_delay << '\n'
     << "epsilon = " << fmt_double(cfg.epsilon) << '\n'
     << "p_ev_preferred = " << fmt_double(cfg.p_ev_preferred) << '\n'
     << "p_ev_other = " << fmt_double(cfg.p_ev_other) << '\n'
     << "reduction_threshold = " << cfg.reduction_threshold << '\n'
     << "base_seed = " << cfg.base_seed << '\n';
  if (!cfg.output_dir.empty()) os << "output_dir = " << cfg.output_dir << '\n';
  os << "prior_mean = " << fmt_double(cfg.prior_mean) << '\n'
     << "prior_var = " << fmt_double(cfg.prior_var) << '\n'
     << "assumed_fp = " << fmt_double(cfg.assumed_fp) << '\n';
  return os.str();
}

std::string CellSpec::id() const {
  std::string out = std::string(to_string(policy)) + "/" + std::string(to_string(mode));
  if (mode != FusionMode::no_human) out += "/fp=" + fmt_short(fp_rate);
  return out;
}

CellSpec CellSpec::parse(std::string_view id) {
  const auto parts = split(id, '/');
  if (parts.size() < 2 || parts.size() > 3) throw std::invalid_argument("malformed cell id '" + std::string(id) + "'");
  CellSpec spec;
  spec.policy = parse_policy(parts[0]);
  spec.mode = parse_fusion_mode(parts[1]);
  if (spec.mode == FusionMode::no_human) {
    if (parts.size() != 2) throw std::invalid_argument("malformed cell id '" + std::string(id) + "'");
  } else {
    if (parts.size() != 3 || parts[2].rfind("fp=", 0) != 0) {
      throw std::invalid_argument("malformed cell id '" + std::string(id) + "'");
    }
    spec.fp_rate = parse_double(parts[2].substr(3), "cell id");
  }
  return spec;
}

std::vector<CellSpec> expand_cells(const ExperimentConfig& cfg) {
  std::vector<CellSpec> cells;
  for (PolicyKind p : cfg.policies) {
    for (FusionMode m : cfg.fusion_modes) {
      if (m == FusionMode::no_human) {
        cells.push_back({p, m, 0.0});
        continue;
      }
      for (double fp : cfg.fp_rates) cells.push_back({p, m, fp});
    }
  }
  return cells;
}

EpisodeConfig episode_config(const ExperimentConfig& cfg, const CellSpec& cell) {
  EpisodeConfig ep;
  ep.policy.kind = cell.policy;
  ep.policy.epsilon = cfg.epsilon;
  ep.policy.preference =
      EvolutionaryPrior::preferring(cfg.labels, cfg.preferred_label, cfg.p_ev_preferred, cfg.p_ev_other);
  ep.fusion = cell.mode;
  ep.schedule = cfg.schedule;
  ep.fp_rate = cell.fp_rate;
  ep.assumed_fp = cfg.assumed_fp;
  ep.reduction_threshold = cfg.reduction_threshold;
  ep.prior_mean = cfg.prior_mean;
  ep.prior_var = cfg.prior_var;
  ep.horizon = cfg.horizon;
  return ep;
}

const CellResult& ResultTable::cell(std::string_view id) const {
  for (const auto& c : cells) {
    if (c.spec.id() == id) return c;
  }
  throw std::out_of_range("no cell '" + std::string(id) + "' in result table");
}

ResultTable run_mc(const ExperimentConfig& cfg, int workers) {
  cfg.validate();
  const auto cells = expand_cells(cfg);
  const std::size_t n_cells = cells.size();
  const auto runs = static_cast<std::size_t>(cfg.mc_runs);
  const auto horizon = static_cast<std::size_t>(cfg.horizon);

  std::vector<EnvironmentTruth> envs(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    envs[r] = generate_environment(cfg.options, cfg.contexts, cfg.labels, cfg.preferred_label,
                                   cfg.base_seed + r);
  }
  std::vector<EpisodeConfig> ep_cfgs;
  for (const auto& c : cells) ep_cfgs.push_back(episode_config(cfg, c));

  // [cell][run] curves.
  std::vector<std::vector<std::vector<double>>> regret(n_cells, std::vector<std::vector<double>>(runs));
  std::vector<std::vector<std::vector<double>>> error(n_cells, std::vector<std::vector<double>>(runs));
  std::vector<std::exception_ptr> failures(n_cells * runs);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t job = next.fetch_add(1);
      if (job >= n_cells * runs) return;
      const std::size_t r = job / n_cells;
      const std::size_t c = job % n_cells;
      try {
        const EpisodeTrajectory tr = run_episode(envs[r], ep_cfgs[c], cfg.base_seed + r);
        regret[c][r].reserve(horizon);
        error[c][r].reserve(horizon);
        for (const auto& s : tr.steps) {
          regret[c][r].push_back(s.cumulative_regret);
          error[c][r].push_back(s.belief_error);
        }
      } catch (...) {
        failures[job] = std::current_exception();
      }
    }
  };
  const int n_workers = std::max(1, workers);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t job = 0; job < failures.size(); ++job) {
    if (!failures[job]) continue;
    const std::string where = "cell " + cells[job % n_cells].id() + ", run " + std::to_string(job / n_cells);
    try {
      std::rethrow_exception(failures[job]);
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ", " + e.what());
    }
  }

  ResultTable table;
  table.horizon = cfg.horizon;
  table.mc_runs = cfg.mc_runs;
  for (std::size_t c = 0; c < n_cells; ++c) {
    CellResult res;
    res.spec = cells[c];
    std::vector<double> column(runs);
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t r = 0; r < runs; ++r) column[r] = regret[c][r][t];
      const Moments m = moments(column);
      const double half = kZ95 * m.sd / std::sqrt(static_cast<double>(runs));
      res.mean_regret.push_back(m.mean);
      res.ci95_low.push_back(m.mean - half);
      res.ci95_high.push_back(m.mean + half);
      for (std::size_t r = 0; r < runs; ++r) column[r] = error[c][r][t];
      res.mean_belief_error.push_back(moments(column).mean);
    }
    for (std::size_t r = 0; r < runs; ++r) {
      res.final_regret.push_back(regret[c][r].back());
      res.final_belief_error.push_back(error[c][r].back());
    }
    table.cells.push_back(std::move(res));
  }
  return table;
}

void emit_csv(const ResultTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("regret.csv");
    out << "cell,step,mean_regret,ci95_low,ci95_high\n";
    for (const auto& c : table.cells) {
      for (std::size_t t = 0; t < c.mean_regret.size(); ++t) {
        out << c.spec.id() << ',' << t + 1 << ',' << fmt_double(c.mean_regret[t]) << ','
            << fmt_double(c.ci95_low[t]) << ',' << fmt_double(c.ci95_high[t]) << '\n';
      }
    }
  }
  {
    auto out = open("belief_error.csv");
    out << "cell,step,mean_error\n";
    for (const auto& c : table.cells) {
      for (std::size_t t = 0; t < c.mean_belief_error.size(); ++t) {
        out << c.spec.id() << ',' << t + 1 << ',' << fmt_double(c.mean_belief_error[t]) << '\n';
      }
    }
  }
  {
    auto out = open("final.csv");
    out << "cell,run,final_regret,final_belief_error\n";
    for (const auto& c : table.cells) {
      for (std::size_t r = 0; r < c.final_regret.size(); ++r) {
        out << c.spec.id() << ',' << r << ',' << fmt_double(c.final_regret[r]) << ','
            << fmt_double(c.final_belief_error[r]) << '\n';
      }
    }
  }
}

namespace {

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<std::string>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != columns) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(columns) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

ResultTable read_csv(const std::filesystem::path& dir) {
  ResultTable table;
  std::map<std::string, std::size_t> index;
  auto cell_for = [&](const std::string& id) -> CellResult& {
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, table.cells.size()).first;
      table.cells.push_back(CellResult{CellSpec::parse(id), {}, {}, {}, {}, {}, {}});
    }
    return table.cells[it->second];
  };
  for (const auto& row : read_rows(dir / "regret.csv", 5)) {
    CellResult& c = cell_for(row[0]);
    c.mean_regret.push_back(parse_double(row[2], "regret.csv"));
    c.ci95_low.push_back(parse_double(row[3], "regret.csv"));
    c.ci95_high.push_back(parse_double(row[4], "regret.csv"));
  }
  for (const auto& row : read_rows(dir / "belief_error.csv", 3)) {
    cell_for(row[0]).mean_belief_error.push_back(parse_double(row[2], "belief_error.csv"));
  }
  for (const auto& row : read_rows(dir / "final.csv", 4)) {
    CellResult& c = cell_for(row[0]);
    c.final_regret.push_back(parse_double(row[2], "final.csv"));
    c.final_belief_error.push_back(parse_double(row[3], "final.csv"));
  }
  if (table.cells.empty()) throw std::runtime_error("no cells in " + dir.string());
  table.horizon = static_cast<int>(table.cells.front().mean_regret.size());
  table.mc_runs = static_cast<int>(table.cells.front().final_regret.size());
  for (const auto& c : table.cells) {
    if (static_cast<int>(c.mean_regret.size()) != table.horizon ||
        static_cast<int>(c.mean_belief_error.size()) != table.horizon ||
        static_cast<int>(c.final_regret.size()) != table.mc_runs) {
      throw std::runtime_error("inconsistent curve lengths for cell " + c.spec.id());
    }
  }
  return table;
}

PairedDifference paired_difference(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("paired_difference: need equal nonempty samples");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const Moments m = moments(d);
  PairedDifference out;
  out.n = static_cast<int>(d.size());
  out.mean = m.mean;
  out.se = m.sd / std::sqrt(static_cast<double>(d.size()));
  out.ci95_low = m.mean - kZ95 * out.se;
  out.ci95_high = m.mean + kZ95 * out.se;
  if (out.se > 0.0) {
    out.z = out.mean / out.se;
  } else if (out.mean != 0.0) {
    out.z = std::copysign(std::numeric_limits<double>::infinity(), out.mean);
  }
  return out;
}

bool significantly_less(std::span<const double> a, std::span<const double> b) {
  return paired_difference(a, b).z < -kZ95OneSided;
}

std::string summarize(const ResultTable& table) {
  std::ostringstream os;
  char buf[256];
  os << "Monte-Carlo summary: T = " << table.horizon << ", runs = " << table.mc_runs << "\n\n";
  std::snprintf(buf, sizeof buf, "%-24s %28s %20s\n", "cell", "final regret (95% CI)", "final belief error");
  os << buf;
  for (const auto& c : table.cells) {
    const Moments m = moments(c.final_regret);
    const double half = kZ95 * m.sd / std::sqrt(static_cast<double>(c.final_regret.size()));
    std::snprintf(buf, sizeof buf, "%-24s %12.4f +/- %-11.4f %20.4f\n", c.spec.id().c_str(), m.mean, half,
                  moments(c.final_belief_error).mean);
    os << buf;
  }

  os << "\nPaired final-regret differences (first - second), mean [95% CI]:\n";
  for (std::size_t i = 0; i < table.cells.size(); ++i) {
    for (std::size_t j = i + 1; j < table.cells.size(); ++j) {
      const CellSpec& a = table.cells[i].spec;
      const CellSpec& b = table.cells[j].spec;
      const bool same_policy = a.policy == b.policy;
      const bool same_setting = a.mode == b.mode && a.fp_rate == b.fp_rate;
      if (!same_policy && !same_setting) continue;
      const PairedDifference d = paired_difference(table.cells[i].final_regret, table.cells[j].final_regret);
      const char* sign = d.ci95_high < 0.0 ? "<" : (d.ci95_low > 0.0 ? ">" : "~");
      std::snprintf(buf, sizeof buf, "  %-22s %s %-22s %10.4f [%9.4f, %9.4f]  z = %.2f\n", a.id().c_str(), sign,
                    b.id().c_str(), d.mean, d.ci95_low, d.ci95_high, d.z);
      os << buf;
    }
  }
  return os.str();
}

}  // namespace oacmab
