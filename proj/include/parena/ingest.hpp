#ifndef PARENA_INGEST_HPP_
#define PARENA_INGEST_HPP_

// Data formats.
//
// attack-run log   one JSON object per line:
//                  {"query_id", "attacker", "target_answer", "response_text",
//                   "retrieval": {"k", "n_poison", "poisoned_retrieved"},
//                   "judge_verdict"?: bool}
// competition log  one JSON document:
//                  {"roster": [ids], "metadata": {"k", "n_poison", "source"},
//                   "targets": {query_id: {attacker: answer}},
//                   "rounds": [{"query_id", "participants": [ids],
//                               "subset_key"?: "A|B", "response",
//                               "retrieval"?: {attacker: count | {k, n_poison,
//                                              poisoned_retrieved}},
//                               "verdicts"?: {attacker: bool}}]}
// report table     CSV, header method,s_asr,m_asr,s_f1,m_f1,theta
// trajectory       CSV, header round,attacker,theta,wins,participations,win_rate
// outcomes         one JSON object per round
//
// Metrics and coefficients are written with 4 decimals, rounded half to
// even on the exact binary value. Absent metrics are empty CSV fields.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "parena/adjudicate.hpp"
#include "parena/arena.hpp"
#include "parena/attacker_id.hpp"
#include "parena/error.hpp"
#include "parena/metrics.hpp"
#include "parena/ratings.hpp"

namespace parena {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Fixed 4-decimal formatting

inline std::string format_fixed4(double value) {
  if (!std::isfinite(value)) {
    throw ArenaError(ErrorCode::kInvalidArgument, "cannot format a non-finite value");
  }
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, 4);
  if (ec != std::errc()) throw ArenaError(ErrorCode::kInvalidArgument, "value too large to format");
  std::string out(buf, end);
  if (out == "-0.0000") out = "0.0000";
  return out;
}

inline double parse_double(std::string_view text, const std::string& where) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ArenaError(ErrorCode::kMalformedField,
                     where + ": '" + std::string(text) + "' is not a number");
  }
  return value;
}

// The double nearest to the 4-decimal rendering of `value`.
inline double round4(double value) { return parse_double(format_fixed4(value), "round4"); }

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_field(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

// Splits on '\n'; a trailing newline does not open an extra line.
inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  return lines;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArenaError(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw ArenaError(ErrorCode::kIo, "error reading '" + path + "'");
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArenaError(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw ArenaError(ErrorCode::kIo, "error writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// JSON field helpers

namespace detail {

inline const Json& require(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ArenaError(ErrorCode::kMalformedField, where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ArenaError(ErrorCode::kMalformedField, where + ": missing field '" + key + "'");
  }
  return *it;
}

inline std::string require_string(const Json& obj, const char* key, const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_string()) {
    throw ArenaError(ErrorCode::kMalformedField, where + ": field '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

inline int require_int(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) {
    throw ArenaError(ErrorCode::kMalformedField, where + " must be an integer");
  }
  const auto x = v.get<long long>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ArenaError(ErrorCode::kMalformedField, where + " is out of range");
  }
  return static_cast<int>(x);
}

inline AttackerId parse_id(const Json& v, const std::string& where) {
  if (!v.is_string()) throw ArenaError(ErrorCode::kMalformedField, where + " must be a string id");
  try {
    return AttackerId(v.get<std::string>());
  } catch (const ArenaError& e) {
    throw ArenaError(ErrorCode::kMalformedField, where + ": " + e.what());
  }
}

inline AttackerList parse_id_list(const Json& v, const std::string& where) {
  if (!v.is_array()) throw ArenaError(ErrorCode::kMalformedField, where + " must be an array");
  AttackerList ids;
  for (std::size_t i = 0; i < v.size(); ++i) {
    ids.push_back(parse_id(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return ids;
}

inline Json id_list_json(std::span<const AttackerId> ids) {
  Json arr = Json::array();
  for (const auto& id : ids) arr.push_back(id.str());
  return arr;
}

inline RetrievalCounts parse_counts(const Json& v, const std::string& where) {
  RetrievalCounts c;
  c.k = require_int(require(v, "k", where), where + ".k");
  c.n_poison = require_int(require(v, "n_poison", where), where + ".n_poison");
  c.poisoned_retrieved =
      require_int(require(v, "poisoned_retrieved", where), where + ".poisoned_retrieved");
  try {
    validate(c);
  } catch (const ArenaError& e) {
    throw ArenaError(ErrorCode::kMalformedField, where + ": " + e.what());
  }
  return c;
}

inline Json counts_json(const RetrievalCounts& c) {
  return Json{{"k", c.k}, {"n_poison", c.n_poison}, {"poisoned_retrieved", c.poisoned_retrieved}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Attack-run log

inline AttackRunRecord parse_attack_run(const Json& obj, const std::string& where) {
  using namespace detail;
  std::string query_id = require_string(obj, "query_id", where);
  if (query_id.empty()) throw ArenaError(ErrorCode::kMalformedField, where + ": empty query_id");
  AttackerId attacker = parse_id(require(obj, "attacker", where), where + ".attacker");
  AttackRunRecord rec{std::move(query_id),
                      std::move(attacker),
                      require_string(obj, "target_answer", where),
                      require_string(obj, "response_text", where),
                      parse_counts(require(obj, "retrieval", where), where + ".retrieval"),
                      std::nullopt};
  if (auto it = obj.find("judge_verdict"); it != obj.end() && !it->is_null()) {
    if (!it->is_boolean()) {
      throw ArenaError(ErrorCode::kMalformedField, where + ": judge_verdict must be a boolean");
    }
    rec.judge_verdict = it->get<bool>();
  }
  return rec;
}

inline Json attack_run_json(const AttackRunRecord& rec) {
  Json obj{{"query_id", rec.query_id},
           {"attacker", rec.attacker.str()},
           {"target_answer", rec.target_answer},
           {"response_text", rec.response_text},
           {"retrieval", detail::counts_json(rec.retrieval)}};
  if (rec.judge_verdict) obj["judge_verdict"] = *rec.judge_verdict;
  return obj;
}

struct Diagnostic {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct AttackRunLoad {
  std::vector<AttackRunRecord> records;
  std::vector<Diagnostic> diagnostics;
};

// One record per line. Malformed lines (blank lines included) become
// diagnostics and are skipped, so records + diagnostics == lines. In strict
// mode any diagnostic is a hard error listing all of them.
inline AttackRunLoad load_attack_runs(std::istream& in, bool strict = false) {
  if (!in) throw ArenaError(ErrorCode::kIo, "attack-run input is not readable");
  AttackRunLoad out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = "line " + std::to_string(n);
    if (line.find_first_not_of(" \t") == std::string::npos) {
      out.diagnostics.push_back({n, "blank line"});
      continue;
    }
    Json obj = Json::parse(line, nullptr, false);
    if (obj.is_discarded()) {
      out.diagnostics.push_back({n, "not valid JSON"});
      continue;
    }
    try {
      out.records.push_back(parse_attack_run(obj, where));
    } catch (const ArenaError& e) {
      std::string reason = e.what();
      const std::string prefix = "malformed-field: " + where + ": ";
      if (reason.rfind(prefix, 0) == 0) reason.erase(0, prefix.size());
      out.diagnostics.push_back({n, std::move(reason)});
    }
  }
  if (in.bad()) throw ArenaError(ErrorCode::kIo, "error while reading attack-run input");
  if (strict && !out.diagnostics.empty()) {
    std::string msg = "attack-run log has " + std::to_string(out.diagnostics.size()) +
                      " malformed line(s):";
    for (const auto& d : out.diagnostics) msg += " [line " + std::to_string(d.line) + ": " + d.reason + "]";
    throw ArenaError(ErrorCode::kMalformedField, msg);
  }
  return out;
}

inline AttackRunLoad load_attack_runs_file(const std::string& path, bool strict = false) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArenaError(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  return load_attack_runs(in, strict);
}

inline std::string write_attack_runs(std::span<const AttackRunRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += attack_run_json(r).dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Competition log

// Validates the whole document and reports every offending location at
// once. The error code is that of the first problem found.
inline CompetitionLog parse_competition_log(const Json& doc) {
  using namespace detail;
  const std::string top = "competition log";
  AttackerList roster = parse_id_list(require(doc, "roster", top), "roster");
  LogMetadata meta;
  if (auto it = doc.find("metadata"); it != doc.end()) {
    if (!it->is_object()) throw ArenaError(ErrorCode::kMalformedField, "metadata must be an object");
    if (it->contains("k")) meta.k = require_int(it->at("k"), "metadata.k");
    if (it->contains("n_poison")) meta.n_poison = require_int(it->at("n_poison"), "metadata.n_poison");
    if (it->contains("source")) meta.source = require_string(*it, "source", "metadata");
    if (meta.k <= 0 || meta.n_poison <= 0) {
      throw ArenaError(ErrorCode::kMalformedField, "metadata: k and n_poison must be positive");
    }
  }
  CompetitionLog log(std::move(roster), meta);

  std::vector<std::pair<ErrorCode, std::string>> problems;
  auto collect = [&](auto&& fn) {
    try {
      fn();
    } catch (const ArenaError& e) {
      problems.emplace_back(e.code(), e.what());
    }
  };

  const Json& targets = require(doc, "targets", top);
  if (!targets.is_object()) throw ArenaError(ErrorCode::kMalformedField, "targets must be an object");
  for (const auto& [query, answers] : targets.items()) {
    collect([&] {
      const std::string where = "targets." + query;
      if (!answers.is_object()) throw ArenaError(ErrorCode::kMalformedField, where + " must be an object");
      TargetAnswerMap map;
      for (const auto& [id, answer] : answers.items()) {
        if (!answer.is_string()) {
          throw ArenaError(ErrorCode::kMalformedField, where + "." + id + " must be a string");
        }
        try {
          map.add(AttackerId(id), answer.get<std::string>());
        } catch (const ArenaError& e) {
          throw ArenaError(e.code(), where + ": " + e.what());
        }
      }
      log.set_targets(query, std::move(map));
    });
  }

  const Json& rounds = require(doc, "rounds", top);
  if (!rounds.is_array()) throw ArenaError(ErrorCode::kMalformedField, "rounds must be an array");
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    collect([&] {
      const std::string where = "rounds[" + std::to_string(i) + "]";
      const Json& r = rounds[i];
      RecordedResponse rec;
      rec.query_id = require_string(r, "query_id", where);
      rec.participants = parse_id_list(require(r, "participants", where), where + ".participants");
      rec.response_text = require_string(r, "response", where);
      if (auto key = r.find("subset_key"); key != r.end()) {
        if (!key->is_string() || key->get<std::string>() != canonical_subset_key(rec.participants)) {
          throw ArenaError(ErrorCode::kMalformedField,
                           where + ": subset_key does not match participants (expected '" +
                               canonical_subset_key(rec.participants) + "')");
        }
      }
      if (auto ret = r.find("retrieval"); ret != r.end() && !ret->is_null()) {
        if (!ret->is_object()) throw ArenaError(ErrorCode::kMalformedField, where + ".retrieval must be an object");
        RetrievalMap counts;
        for (const auto& [id, v] : ret->items()) {
          const std::string w = where + ".retrieval." + id;
          RetrievalCounts c;
          if (v.is_number_integer()) {
            c = {meta.k, meta.n_poison, require_int(v, w)};
          } else {
            c = parse_counts(v, w);
          }
          counts.emplace(parse_id(Json(id), w), c);
        }
        rec.retrieval = std::move(counts);
      }
      if (auto ver = r.find("verdicts"); ver != r.end() && !ver->is_null()) {
        if (!ver->is_object()) throw ArenaError(ErrorCode::kMalformedField, where + ".verdicts must be an object");
        for (const auto& [id, v] : ver->items()) {
          if (!v.is_boolean()) {
            throw ArenaError(ErrorCode::kMalformedField, where + ".verdicts." + id + " must be a boolean");
          }
          rec.verdicts.emplace(parse_id(Json(id), where + ".verdicts." + id), v.get<bool>());
        }
      }
      try {
        log.add_round(std::move(rec));
      } catch (const ArenaError& e) {
        throw ArenaError(e.code(), where + ": " + e.what());
      }
    });
  }

  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " problem(s) in competition log:";
    for (const auto& [code, text] : problems) msg += " [" + text + "]";
    throw ArenaError(problems.front().first, msg);
  }
  return log;
}

inline CompetitionLog read_competition_log(std::string_view text) {
  Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ArenaError(ErrorCode::kMalformedField, "competition log is not valid JSON");
  return parse_competition_log(doc);
}

inline CompetitionLog load_competition_log(const std::string& path) {
  try {
    return read_competition_log(read_file(path));
  } catch (const ArenaError& e) {
    if (e.code() == ErrorCode::kIo) throw;
    throw ArenaError(e.code(), path + ": " + e.what());
  }
}

inline Json competition_log_json(const CompetitionLog& log) {
  using detail::counts_json;
  Json targets = Json::object();
  for (const auto& [query, map] : log.targets()) {
    Json answers = Json::object();
    for (const auto& [id, answer] : map.answers()) answers[id.str()] = answer;
    targets[query] = std::move(answers);
  }
  Json rounds = Json::array();
  for (const auto& rec : log.rounds()) {
    Json r{{"query_id", rec.query_id},
           {"participants", detail::id_list_json(rec.participants)},
           {"subset_key", canonical_subset_key(rec.participants)},
           {"response", rec.response_text}};
    if (rec.retrieval) {
      Json counts = Json::object();
      for (const auto& [id, c] : *rec.retrieval) counts[id.str()] = counts_json(c);
      r["retrieval"] = std::move(counts);
    }
    if (!rec.verdicts.empty()) {
      Json v = Json::object();
      for (const auto& [id, ok] : rec.verdicts) v[id.str()] = ok;
      r["verdicts"] = std::move(v);
    }
    rounds.push_back(std::move(r));
  }
  return Json{{"roster", detail::id_list_json(log.roster())},
              {"metadata",
               {{"k", log.metadata().k},
                {"n_poison", log.metadata().n_poison},
                {"source", log.metadata().source}}},
              {"targets", std::move(targets)},
              {"rounds", std::move(rounds)}};
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { kTableCsv, kStructuredJson, kTrajectoryLines };

inline constexpr std::string_view kReportHeader = "method,s_asr,m_asr,s_f1,m_f1,theta";
inline constexpr std::string_view kTrajectoryHeader =
    "round,attacker,theta,wins,participations,win_rate";

struct ReportRow {
  AttackerId method;
  std::optional<double> s_asr;
  std::optional<double> m_asr;
  std::optional<double> s_f1;
  std::optional<double> m_f1;
  std::optional<double> theta;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

// One row per attacker, in final rank order. Attackers that only appear in
// the single-attacker summary follow, by id. m-ASR is left empty for
// attackers that never participated; m-F1 for those without counts.
inline std::vector<ReportRow> build_report_rows(const SimulationResult& result,
                                                const SingleAttackerSummary* single = nullptr) {
  auto lookup = [](const std::map<AttackerId, double>& m,
                   const AttackerId& id) -> std::optional<double> {
    auto it = m.find(id);
    return it == m.end() ? std::nullopt : std::optional<double>(it->second);
  };
  std::vector<ReportRow> rows;
  const auto& unpart = result.m_asr.unparticipated;
  for (const auto& id : rank_vector(result.final_state)) {
    ReportRow row{id, {}, {}, {}, {}, result.final_state.theta(id)};
    if (std::find(unpart.begin(), unpart.end(), id) == unpart.end()) {
      row.m_asr = lookup(result.m_asr.rates, id);
    }
    if (result.m_f1) row.m_f1 = lookup(result.m_f1->mean_f1, id);
    if (single) {
      row.s_asr = lookup(single->s_asr, id);
      row.s_f1 = lookup(single->s_f1, id);
    }
    rows.push_back(std::move(row));
  }
  if (single) {
    for (const auto& [id, v] : single->s_asr) {
      if (result.final_state.contains(id)) continue;
      rows.push_back({id, v, {}, lookup(single->s_f1, id), {}, {}});
    }
  }
  return rows;
}

inline std::string write_report_rows(std::span<const ReportRow> rows) {
  auto cell = [](const std::optional<double>& v) { return v ? format_fixed4(*v) : std::string(); };
  std::string out(kReportHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += csv_field(r.method.str()) + ',' + cell(r.s_asr) + ',' + cell(r.m_asr) + ',' +
           cell(r.s_f1) + ',' + cell(r.m_f1) + ',' + cell(r.theta) + '\n';
  }
  return out;
}

inline std::vector<ReportRow> parse_report_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines.front() != kReportHeader) {
    throw ArenaError(ErrorCode::kMalformedField,
                     "report: header must be '" + std::string(kReportHeader) + "'");
  }
  std::vector<ReportRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "report line " + std::to_string(i + 1);
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 6) throw ArenaError(ErrorCode::kMalformedField, where + ": expected 6 fields");
    auto cell = [&](std::size_t j) -> std::optional<double> {
      if (f[j].empty()) return std::nullopt;
      return parse_double(f[j], where);
    };
    rows.push_back({detail::parse_id(Json(f[0]), where), cell(1), cell(2), cell(3), cell(4), cell(5)});
  }
  return rows;
}

struct TrajectoryRow {
  std::size_t round = 0;
  AttackerId attacker;
  double theta = 0.0;
  std::size_t wins = 0;
  std::size_t participations = 0;
  double win_rate = 0.0;

  friend bool operator==(const TrajectoryRow&, const TrajectoryRow&) = default;
};

inline std::string write_trajectory(std::span<const TrajectoryPoint> trajectory) {
  std::string out(kTrajectoryHeader);
  out += '\n';
  for (const auto& p : trajectory) {
    for (const auto& [id, t] : p.attackers) {
      out += std::to_string(p.round_index) + ',' + csv_field(id.str()) + ',' +
             format_fixed4(t.theta) + ',' + std::to_string(t.wins) + ',' +
             std::to_string(t.participations) + ',' + format_fixed4(t.win_rate) + '\n';
    }
  }
  return out;
}

inline std::vector<TrajectoryRow> parse_trajectory(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines.front() != kTrajectoryHeader) {
    throw ArenaError(ErrorCode::kMalformedField,
                     "trajectory: header must be '" + std::string(kTrajectoryHeader) + "'");
  }
  auto count = [](const std::string& s, const std::string& where) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
      throw ArenaError(ErrorCode::kMalformedField, where + ": '" + s + "' is not a count");
    }
    return v;
  };
  std::vector<TrajectoryRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "trajectory line " + std::to_string(i + 1);
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 6) throw ArenaError(ErrorCode::kMalformedField, where + ": expected 6 fields");
    rows.push_back({count(f[0], where), detail::parse_id(Json(f[1]), where),
                    parse_double(f[2], where), count(f[3], where), count(f[4], where),
                    parse_double(f[5], where)});
  }
  return rows;
}

inline std::string write_outcomes(std::span<const RoundOutcome> outcomes) {
  std::string out;
  for (const auto& o : outcomes) {
    Json line{{"round", o.round_index},
              {"query_id", o.query_id},
              {"participants", detail::id_list_json(o.participants)},
              {"winners", detail::id_list_json(o.partition.winners)},
              {"losers", detail::id_list_json(o.partition.losers)}};
    if (o.retrieval) {
      Json counts = Json::object();
      for (const auto& [id, c] : *o.retrieval) counts[id.str()] = detail::counts_json(c);
      line["retrieval"] = std::move(counts);
    }
    out += line.dump();
    out += '\n';
  }
  return out;
}

// Summary document: everything in the report table plus run bookkeeping.
struct ResultDocument {
  std::size_t rounds = 0;
  std::optional<std::size_t> converged_at;
  AttackerList ranking;
  std::vector<ReportRow> rows;

  friend bool operator==(const ResultDocument&, const ResultDocument&) = default;
};

inline ResultDocument result_document(const SimulationResult& result,
                                      const SingleAttackerSummary* single = nullptr) {
  auto rows = build_report_rows(result, single);
  for (auto& r : rows) {
    for (auto* v : {&r.s_asr, &r.m_asr, &r.s_f1, &r.m_f1, &r.theta}) {
      if (*v) **v = round4(**v);
    }
  }
  return {result.final_state.round_index(), result.converged_at, rank_vector(result.final_state),
          std::move(rows)};
}

inline std::string write_result_json(const ResultDocument& doc) {
  auto num = [](const std::optional<double>& v) { return v ? Json(round4(*v)) : Json(nullptr); };
  Json attackers = Json::array();
  for (const auto& r : doc.rows) {
    attackers.push_back({{"method", r.method.str()},
                         {"s_asr", num(r.s_asr)},
                         {"m_asr", num(r.m_asr)},
                         {"s_f1", num(r.s_f1)},
                         {"m_f1", num(r.m_f1)},
                         {"theta", num(r.theta)}});
  }
  Json out{{"rounds", doc.rounds},
           {"converged_at", doc.converged_at ? Json(*doc.converged_at) : Json(nullptr)},
           {"ranking", detail::id_list_json(doc.ranking)},
           {"attackers", std::move(attackers)}};
  return out.dump(2) + '\n';
}

inline ResultDocument parse_result_json(std::string_view text) {
  using namespace detail;
  Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ArenaError(ErrorCode::kMalformedField, "result document is not valid JSON");
  const std::string top = "result";
  ResultDocument out;
  const Json& rounds = require(doc, "rounds", top);
  if (!rounds.is_number_unsigned()) throw ArenaError(ErrorCode::kMalformedField, "result.rounds must be a count");
  out.rounds = rounds.get<std::size_t>();
  const Json& conv = require(doc, "converged_at", top);
  if (!conv.is_null()) {
    if (!conv.is_number_unsigned()) {
      throw ArenaError(ErrorCode::kMalformedField, "result.converged_at must be a count or null");
    }
    out.converged_at = conv.get<std::size_t>();
  }
  out.ranking = parse_id_list(require(doc, "ranking", top), "result.ranking");
  const Json& attackers = require(doc, "attackers", top);
  if (!attackers.is_array()) throw ArenaError(ErrorCode::kMalformedField, "result.attackers must be an array");
  for (std::size_t i = 0; i < attackers.size(); ++i) {
    const std::string where = "result.attackers[" + std::to_string(i) + "]";
    const Json& a = attackers[i];
    auto num = [&](const char* key) -> std::optional<double> {
      const Json& v = require(a, key, where);
      if (v.is_null()) return std::nullopt;
      if (!v.is_number()) throw ArenaError(ErrorCode::kMalformedField, where + "." + key + " must be a number");
      return v.get<double>();
    };
    out.rows.push_back({parse_id(require(a, "method", where), where + ".method"), num("s_asr"),
                        num("m_asr"), num("s_f1"), num("m_f1"), num("theta")});
  }
  return out;
}

// Deterministic serialisation of a finished run: identical results give
// identical bytes.
inline std::string write_report(const SimulationResult& result, ReportFormat format,
                                const SingleAttackerSummary* single = nullptr) {
  switch (format) {
    case ReportFormat::kTableCsv:
      return write_report_rows(build_report_rows(result, single));
    case ReportFormat::kStructuredJson:
      return write_result_json(result_document(result, single));
    case ReportFormat::kTrajectoryLines:
      return write_trajectory(result.trajectory);
  }
  throw ArenaError(ErrorCode::kInvalidArgument, "unknown report format");
}

}  // namespace parena

#endif  // PARENA_INGEST_HPP_
