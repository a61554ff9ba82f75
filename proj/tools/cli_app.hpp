#ifndef PARENA_TOOLS_CLI_APP_HPP_
#define PARENA_TOOLS_CLI_APP_HPP_

// Command-line front end: simulate | replay | metrics | report.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "parena/adjudicate.hpp"
#include "parena/arena.hpp"
#include "parena/error.hpp"
#include "parena/ingest.hpp"
#include "parena/metrics.hpp"
#include "parena/ratings.hpp"

namespace parena::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNotConverged = 4,
  kExitIo = 5,
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
      return kExitConfig;
    case ErrorCode::kIo:
      return kExitIo;
    default:
      return kExitData;
  }
}

// Flag-level overrides; each takes precedence over the config document.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> eta;
  std::optional<std::size_t> window;
  std::optional<std::size_t> subset_min;
  std::optional<std::size_t> subset_max;
  std::optional<std::size_t> max_rounds;
  std::optional<std::string> gradient_mode;
};

struct CliConfig {
  std::string subcommand;
  std::string config_path;
  Overrides overrides;
  std::string log_path;
  std::string runs_path;
  std::string result_path;
  std::string out_dir;
  bool strict = false;
  bool shuffle = false;
};

// Simulation settings merged from the config document and flags.
struct MergedConfig {
  SimulationConfig sim;
  std::optional<SyntheticRoster> synthetic;
};

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "attackers", "no_winner_prob", "queries", "subset_min", "subset_max", "eta",
      "window",    "max_rounds",     "seed",    "gradient_mode"};
  return keys;
}

template <typename T>
T config_number(const Json& doc, const char* key) {
  const Json& v = doc.at(key);
  if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ArenaError(ErrorCode::kConfig, std::string(key) + ": must be a number");
  } else {
    if (!v.is_number_unsigned()) {
      throw ArenaError(ErrorCode::kConfig, std::string(key) + ": must be a non-negative integer");
    }
  }
  return v.get<T>();
}

}  // namespace detail

// Reads the config document (if any), applies overrides and, when given,
// takes roster and queries from a competition log. Throws kConfig naming the
// offending field.
inline MergedConfig merge_config(const CliConfig& cfg, const CompetitionLog* log) {
  MergedConfig merged;
  SimulationConfig& sim = merged.sim;
  Json doc = Json::object();
  if (!cfg.config_path.empty()) {
    doc = Json::parse(read_file(cfg.config_path), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw ArenaError(ErrorCode::kConfig, cfg.config_path + ": not a JSON object");
    }
  }
  for (const auto& [key, value] : doc.items()) {
    if (!detail::known_config_keys().contains(key)) {
      throw ArenaError(ErrorCode::kConfig, "unknown config field '" + key + "'");
    }
  }

  if (doc.contains("attackers")) {
    const Json& attackers = doc["attackers"];
    if (!attackers.is_array()) throw ArenaError(ErrorCode::kConfig, "attackers: must be an array");
    SyntheticRoster roster;
    for (std::size_t i = 0; i < attackers.size(); ++i) {
      const std::string where = "attackers[" + std::to_string(i) + "]";
      const Json& a = attackers[i];
      if (!a.is_object() || !a.contains("id") || !a["id"].is_string() || !a.contains("strength") ||
          !a["strength"].is_number()) {
        throw ArenaError(ErrorCode::kConfig, where + ": expected {\"id\": string, \"strength\": number}");
      }
      AttackerId id = [&] {
        try {
          return AttackerId(a["id"].get<std::string>());
        } catch (const ArenaError& e) {
          throw ArenaError(ErrorCode::kConfig, where + ".id: " + e.what());
        }
      }();
      if (!roster.true_strengths.emplace(id, a["strength"].get<double>()).second) {
        throw ArenaError(ErrorCode::kConfig, where + ": duplicate attacker '" + id.str() + "'");
      }
      sim.roster.push_back(id);
    }
    if (doc.contains("no_winner_prob")) {
      roster.no_winner_prob = detail::config_number<double>(doc, "no_winner_prob");
    }
    try {
      validate(roster);
    } catch (const ArenaError& e) {
      throw ArenaError(ErrorCode::kConfig, std::string("attackers: ") + e.what());
    }
    merged.synthetic = std::move(roster);
  }

  if (log != nullptr) {
    if (merged.synthetic) {
      throw ArenaError(ErrorCode::kConfig, "attackers: give a synthetic roster or a log, not both");
    }
    sim.roster = log->roster();
    sim.queries = log->query_ids();
  } else if (!merged.synthetic) {
    throw ArenaError(ErrorCode::kConfig,
                     "attackers: no synthetic roster in the config and no --log given");
  }

  if (doc.contains("queries")) {
    if (log != nullptr) throw ArenaError(ErrorCode::kConfig, "queries: taken from the log when --log is given");
    const Json& q = doc["queries"];
    if (!q.is_array()) throw ArenaError(ErrorCode::kConfig, "queries: must be an array of strings");
    sim.queries.clear();
    for (const auto& v : q) {
      if (!v.is_string()) throw ArenaError(ErrorCode::kConfig, "queries: must be an array of strings");
      sim.queries.push_back(v.get<std::string>());
    }
  }

  sim.subset_max = sim.roster.size();
  if (doc.contains("subset_min")) sim.subset_min = detail::config_number<std::size_t>(doc, "subset_min");
  if (doc.contains("subset_max")) sim.subset_max = detail::config_number<std::size_t>(doc, "subset_max");
  if (doc.contains("eta")) sim.eta = detail::config_number<double>(doc, "eta");
  if (doc.contains("window")) sim.convergence_window = detail::config_number<std::size_t>(doc, "window");
  if (doc.contains("max_rounds")) sim.max_rounds = detail::config_number<std::size_t>(doc, "max_rounds");
  if (doc.contains("seed")) sim.seed = detail::config_number<std::uint64_t>(doc, "seed");
  if (doc.contains("gradient_mode")) {
    if (!doc["gradient_mode"].is_string()) throw ArenaError(ErrorCode::kConfig, "gradient_mode: must be a string");
    sim.gradient_mode = parse_gradient_mode(doc["gradient_mode"].get<std::string>());
  }

  const Overrides& o = cfg.overrides;
  if (o.seed) sim.seed = *o.seed;
  if (o.eta) sim.eta = *o.eta;
  if (o.window) sim.convergence_window = *o.window;
  if (o.subset_min) sim.subset_min = *o.subset_min;
  if (o.subset_max) sim.subset_max = *o.subset_max;
  if (o.max_rounds) sim.max_rounds = *o.max_rounds;
  if (o.gradient_mode) sim.gradient_mode = parse_gradient_mode(*o.gradient_mode);

  validate(sim);
  return merged;
}

inline std::string ranking_line(const RatingState& state) {
  std::string line;
  for (const auto& id : rank_vector(state)) {
    if (!line.empty()) line += " > ";
    line += id.str();
  }
  return line;
}

inline void write_run_outputs(const std::string& out_dir, const SimulationResult& result,
                              const SingleAttackerSummary* single) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ArenaError(ErrorCode::kIo, "cannot create output directory '" + out_dir + "'");
  const std::filesystem::path dir(out_dir);
  write_file((dir / "report.csv").string(), write_report(result, ReportFormat::kTableCsv, single));
  write_file((dir / "trajectory.csv").string(),
             write_report(result, ReportFormat::kTrajectoryLines, single));
  write_file((dir / "result.json").string(),
             write_report(result, ReportFormat::kStructuredJson, single));
  write_file((dir / "outcomes.jsonl").string(), write_outcomes(result.outcomes));
}

inline std::optional<SingleAttackerSummary> load_single_summary(const CliConfig& cfg,
                                                                std::ostream& err) {
  if (cfg.runs_path.empty()) return std::nullopt;
  AttackRunLoad load = load_attack_runs_file(cfg.runs_path, cfg.strict);
  for (const auto& d : load.diagnostics) {
    err << cfg.runs_path << ": line " << d.line << ": " << d.reason << "\n";
  }
  return summarize_single_runs(load.records, SubstringJudge{});
}

inline int cmd_simulate(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  std::optional<CompetitionLog> log;
  if (!cfg.log_path.empty()) log = load_competition_log(cfg.log_path);
  const MergedConfig merged = merge_config(cfg, log ? &*log : nullptr);
  std::unique_ptr<Adjudicator> adjudicator;
  if (merged.synthetic) {
    adjudicator = std::make_unique<SyntheticAdjudicator>(*merged.synthetic);
  } else {
    adjudicator = std::make_unique<ReplayAdjudicator>(*log);
  }
  const auto single = load_single_summary(cfg, err);
  const SimulationResult result = simulate(merged.sim, *adjudicator);
  write_run_outputs(cfg.out_dir, result, single ? &*single : nullptr);

  if (result.converged_at) {
    out << "converged at round " << *result.converged_at << "\n";
  } else {
    err << "warning: ranking not stable after " << result.final_state.round_index()
        << " rounds (cap reached); outputs written\n";
  }
  out << "ranking: " << ranking_line(result.final_state) << "\n";
  out << write_report(result, ReportFormat::kTableCsv, single ? &*single : nullptr);
  return result.converged_at ? kExitOk : kExitNotConverged;
}

inline int cmd_replay(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const CompetitionLog log = load_competition_log(cfg.log_path);
  const MergedConfig merged = merge_config(cfg, &log);
  ReplayOptions options;
  options.eta = merged.sim.eta;
  options.convergence_window = merged.sim.convergence_window;
  options.gradient_mode = merged.sim.gradient_mode;
  options.seed = merged.sim.seed;
  options.shuffle = cfg.shuffle;
  const auto single = load_single_summary(cfg, err);
  const SimulationResult result = replay(log, options);
  const SingleAttackerSummary* s = single ? &*single : nullptr;
  if (!cfg.out_dir.empty()) write_run_outputs(cfg.out_dir, result, s);
  out << write_report(result, ReportFormat::kTableCsv, s);
  return kExitOk;
}

inline int cmd_metrics(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  AttackRunLoad load = load_attack_runs_file(cfg.runs_path, cfg.strict);
  for (const auto& d : load.diagnostics) {
    err << cfg.runs_path << ": line " << d.line << ": " << d.reason << "\n";
  }
  if (load.records.empty()) {
    throw ArenaError(ErrorCode::kEmptyInput, cfg.runs_path + ": no valid run records");
  }
  const SingleAttackerSummary summary = summarize_single_runs(load.records, SubstringJudge{});
  std::string csv = "method,s_asr,s_f1\n";
  for (const auto& [id, asr] : summary.s_asr) {
    csv += csv_field(id.str()) + ',' + format_fixed4(asr) + ',' +
           format_fixed4(summary.s_f1.at(id)) + '\n';
  }
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_file((std::filesystem::path(cfg.out_dir) / "metrics.csv").string(), csv);
  }
  out << csv;
  return kExitOk;
}

inline int cmd_report(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  ResultDocument doc = parse_result_json(read_file(cfg.result_path));
  if (const auto single = load_single_summary(cfg, err)) {
    for (auto& row : doc.rows) {
      if (auto it = single->s_asr.find(row.method); it != single->s_asr.end()) row.s_asr = it->second;
      if (auto it = single->s_f1.find(row.method); it != single->s_f1.end()) row.s_f1 = it->second;
    }
    for (const auto& [id, v] : single->s_asr) {
      const bool present = std::any_of(doc.rows.begin(), doc.rows.end(),
                                       [&](const ReportRow& r) { return r.method == id; });
      if (!present) doc.rows.push_back({id, v, {}, single->s_f1.at(id), {}, {}});
    }
  }
  const std::string csv = write_report_rows(doc.rows);
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_file((std::filesystem::path(cfg.out_dir) / "report.csv").string(), csv);
  }
  out << csv;
  return kExitOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bradley-Terry competition arena for RAG poisoning attacks", "parena"};
  app.require_subcommand(1);
  CliConfig cfg;

  auto add_fit_flags = [&](CLI::App* sub) {
    sub->add_option("--config", cfg.config_path, "JSON config document")->check(CLI::ExistingFile);
    sub->add_option("--seed", cfg.overrides.seed, "RNG seed");
    sub->add_option("--eta", cfg.overrides.eta, "Learning rate (default 0.1)");
    sub->add_option("--window", cfg.overrides.window,
                    "Rounds of unchanged ranking that count as converged (default 50)");
    sub->add_option("--gradient-mode", cfg.overrides.gradient_mode, "analytic | paper-literal")
        ->check(CLI::IsMember({"analytic", "paper-literal"}));
    sub->add_option("--runs", cfg.runs_path, "Single-attacker run log (adds s-ASR, s-F1)")
        ->check(CLI::ExistingFile);
    sub->add_flag("--strict", cfg.strict, "Treat malformed run-log lines as errors");
  };

  auto* sim = app.add_subcommand("simulate", "Run the sampled competition and fit ratings");
  add_fit_flags(sim);
  sim->add_option("--subset-min", cfg.overrides.subset_min, "Smallest participant subset (>= 2)");
  sim->add_option("--subset-max", cfg.overrides.subset_max, "Largest participant subset (<= roster size)");
  sim->add_option("--max-rounds", cfg.overrides.max_rounds, "Round cap (default 20000)");
  sim->add_option("--log", cfg.log_path, "Competition log to adjudicate sampled rounds from")
      ->check(CLI::ExistingFile);
  cfg.out_dir = "arena_out";
  sim->add_option("--out-dir", cfg.out_dir, "Output directory")->capture_default_str();

  auto* rep = app.add_subcommand("replay", "Fit ratings over the rounds of a competition log");
  add_fit_flags(rep);
  rep->add_option("--log", cfg.log_path, "Competition log")->required()->check(CLI::ExistingFile);
  rep->add_flag("--shuffle", cfg.shuffle, "Replay rounds in a seeded random order");
  rep->add_option("--out-dir", cfg.out_dir, "Also write report, trajectory and outcomes here");

  auto* met = app.add_subcommand("metrics", "Per-attacker s-ASR and s-F1 from a run log");
  met->add_option("--runs", cfg.runs_path, "Single-attacker run log")->required()->check(CLI::ExistingFile);
  met->add_flag("--strict", cfg.strict, "Treat malformed lines as errors");
  met->add_option("--out-dir", cfg.out_dir, "Also write metrics.csv here");

  auto* rpt = app.add_subcommand("report", "Render the report table from a result document");
  rpt->add_option("--result", cfg.result_path, "result.json from simulate or replay")
      ->required()
      ->check(CLI::ExistingFile);
  rpt->add_option("--runs", cfg.runs_path, "Single-attacker run log")->check(CLI::ExistingFile);
  rpt->add_flag("--strict", cfg.strict, "Treat malformed run-log lines as errors");
  rpt->add_option("--out-dir", cfg.out_dir, "Also write report.csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(cfg, out, err);
    if (rep->parsed()) return cmd_replay(cfg, out, err);
    if (met->parsed()) return cmd_metrics(cfg, out, err);
    return cmd_report(cfg, out, err);
  } catch (const ArenaError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: io: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace parena::cli

#endif  // PARENA_TOOLS_CLI_APP_HPP_
