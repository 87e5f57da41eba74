#pragma once

// On-disk formats: the run-log CSV and the JSON coefficient bundle.
//
// CSV header (required, comma separated, UTF-8):
//   run_id,d,n,s,v,w,h,batch,seconds_per_step,tokens_per_second,
//   tokens_seen,final_loss,train_seconds[,split]
// Empty cells are absent optionals. Lines starting with '#' are comments.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "hyperloss/dataset.hpp"
#include "hyperloss/errors.hpp"
#include "hyperloss/regress.hpp"
#include "hyperloss/scaling.hpp"
#include "hyperloss/throughput.hpp"

namespace hyperloss {

inline const std::vector<std::string>& run_csv_columns() {
  static const std::vector<std::string> cols{"run_id",        "d",           "n",
                                             "s",             "v",           "w",
                                             "h",             "batch",       "seconds_per_step",
                                             "tokens_per_second", "tokens_seen", "final_loss",
                                             "train_seconds"};
  return cols;
}

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw RowError(lineno, "unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::uint64_t parse_count(std::string_view cell, const std::string& column, std::size_t lineno) {
  cell = trim(cell);
  std::uint64_t v = 0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw RowError(lineno, "column " + column + ": expected a positive integer, got '" + std::string(cell) + "'");
  }
  if (v < 1) throw RowError(lineno, "column " + column + " must be >= 1");
  return v;
}

inline std::optional<double> parse_real(std::string_view cell, const std::string& column, std::size_t lineno) {
  cell = trim(cell);
  if (cell.empty()) return std::nullopt;
  double v = 0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw RowError(lineno, "column " + column + ": expected a finite number, got '" + std::string(cell) + "'");
  }
  return v;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

// Checks the RunRecord invariants that do not depend on the rest of the
// dataset. Throws RowError tagged with `lineno`.
inline void validate_record(const RunRecord& r, std::size_t lineno) {
  if (r.run_id.empty()) throw RowError(lineno, "run_id is empty");
  try {
    validate(r.shape);
  } catch (const ValidationError& e) {
    throw RowError(lineno, e.what());
  }
  if (r.batch < 1) throw RowError(lineno, "batch must be >= 1");
  if (r.seconds_per_step && !(*r.seconds_per_step > 0)) throw RowError(lineno, "seconds_per_step must be > 0");
  if (r.tokens_per_second && !(*r.tokens_per_second > 0)) throw RowError(lineno, "tokens_per_second must be > 0");
  if (r.tokens_seen && !(*r.tokens_seen >= 0)) throw RowError(lineno, "tokens_seen must be >= 0");
  if (r.train_seconds && !(*r.train_seconds > 0)) throw RowError(lineno, "train_seconds must be > 0");
  if (r.seconds_per_step && r.tokens_per_second) {
    const double product = *r.seconds_per_step * *r.tokens_per_second;
    if (std::abs(product - r.tokens_per_step()) > 0.01 * r.tokens_per_step()) {
      throw RowError(lineno, "seconds_per_step * tokens_per_second differs from batch * s by more than 1%");
    }
  }
}

inline RunDataset parse_runs(std::istream& in, std::vector<std::string>* warnings = nullptr) {
  auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
  };

  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    for (auto& h : detail::split_csv_line(t, lineno)) header.emplace_back(detail::trim(h));
    break;
  }
  if (header.empty()) throw SchemaError("missing header row");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!index.emplace(header[i], i).second) throw SchemaError("duplicate column: " + header[i]);
  }
  for (const char* required : {"run_id", "d", "n", "s", "v", "w", "h"}) {
    if (!index.count(required)) throw SchemaError(std::string("missing column: ") + required);
  }
  const bool has_batch = index.count("batch") > 0;
  if (!has_batch) warn("WARNING: no batch column; every run is assumed to use batch size 1");
  {
    const auto& known = run_csv_columns();
    for (const auto& h : header) {
      if (h != "split" && std::find(known.begin(), known.end(), h) == known.end()) warn("ignoring unknown column: " + h);
    }
  }

  RunDataset ds;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = detail::split_csv_line(t, lineno);
    if (cells.size() != header.size()) {
      throw RowError(lineno, "expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    auto cell = [&](const std::string& col) -> std::string_view {
      const auto it = index.find(col);
      return it == index.end() ? std::string_view{} : std::string_view(cells[it->second]);
    };

    RunRecord r;
    r.run_id = std::string(detail::trim(cell("run_id")));
    r.shape.d = detail::parse_count(cell("d"), "d", lineno);
    r.shape.n = detail::parse_count(cell("n"), "n", lineno);
    r.shape.s = detail::parse_count(cell("s"), "s", lineno);
    r.shape.v = detail::parse_count(cell("v"), "v", lineno);
    r.shape.w = detail::parse_count(cell("w"), "w", lineno);
    r.shape.h = detail::parse_count(cell("h"), "h", lineno);
    r.batch = has_batch ? detail::parse_count(cell("batch"), "batch", lineno) : 1;
    r.seconds_per_step = detail::parse_real(cell("seconds_per_step"), "seconds_per_step", lineno);
    r.tokens_per_second = detail::parse_real(cell("tokens_per_second"), "tokens_per_second", lineno);
    r.tokens_seen = detail::parse_real(cell("tokens_seen"), "tokens_seen", lineno);
    r.final_loss = detail::parse_real(cell("final_loss"), "final_loss", lineno);
    r.train_seconds = detail::parse_real(cell("train_seconds"), "train_seconds", lineno);
    validate_record(r, lineno);
    if (!seen.insert(r.run_id).second) throw RowError(lineno, "duplicate run_id '" + r.run_id + "'");

    Split tag = Split::unassigned;
    const auto split_cell = detail::trim(cell("split"));
    if (split_cell == "train") {
      tag = Split::train;
    } else if (split_cell == "holdout") {
      tag = Split::holdout;
    } else if (!split_cell.empty()) {
      throw RowError(lineno, "split must be train, holdout or empty");
    }
    ds.add(std::move(r), tag);
  }
  return ds;
}

inline RunDataset load_runs(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_runs(in, warnings);
}

// The split column is only written when some record has a split assigned.
inline void write_runs(std::ostream& out, const RunDataset& ds) {
  bool any_split = false;
  for (std::size_t i = 0; i < ds.size(); ++i) any_split = any_split || ds.split_of(i) != Split::unassigned;

  const auto& cols = run_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  if (any_split) out << ",split";
  out << '\n';

  auto opt = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string(); };
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.records[i];
    out << detail::csv_escape(r.run_id) << ',' << r.shape.d << ',' << r.shape.n << ',' << r.shape.s << ','
        << r.shape.v << ',' << r.shape.w << ',' << r.shape.h << ',' << r.batch << ',' << opt(r.seconds_per_step)
        << ',' << opt(r.tokens_per_second) << ',' << opt(r.tokens_seen) << ',' << opt(r.final_loss) << ','
        << opt(r.train_seconds);
    if (any_split) {
      const Split s = ds.split_of(i);
      out << ',' << (s == Split::train ? "train" : s == Split::holdout ? "holdout" : "");
    }
    out << '\n';
  }
}

inline void save_runs(const std::string& path, const RunDataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_runs(out, ds);
  if (!out) throw IoError("write failed: " + path);
}

// Seeded, reproducible holdout assignment of round(fraction * N) records.
inline RunDataset split_dataset(const RunDataset& ds, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw DomainError("holdout fraction must lie strictly between 0 and 1");
  }
  if (ds.empty()) throw ValidationError("cannot split an empty dataset");
  const std::size_t count = ds.size();
  const auto holdout = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(count)));

  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  // Fisher-Yates with a rejection-sampled bound, so the permutation does not
  // depend on the standard library's distribution implementations.
  std::mt19937_64 rng(seed);
  for (std::size_t i = count - 1; i > 0; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
      draw = rng();
    } while (draw >= limit);
    std::swap(order[i], order[draw % bound]);
  }

  RunDataset out = ds;
  out.splits.assign(count, Split::train);
  for (std::size_t k = 0; k < holdout; ++k) out.splits[order[k]] = Split::holdout;
  return out;
}

// FNV-1a over the canonical CSV serialization.
inline std::string dataset_hash(const RunDataset& ds) {
  std::ostringstream s;
  write_runs(s, ds);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s.str()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream hex;
  hex << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

struct Provenance {
  std::string dataset_hash;
  std::string fit_timestamp;
  std::string mode_flags;
  std::string note;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct CoefficientBundle {
  TimeCoefficients time;
  ScalingLaw law;
  TrainBudget budget;
  Provenance provenance;
};

namespace detail {

using nlohmann::json;

inline json to_json(const FitReport& r) {
  return {{"slope", r.slope}, {"intercept", r.intercept}, {"r2_pearson", r.r2_pearson}, {"r2_raw", r.r2_raw},
          {"count", r.count}};
}

inline const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing field: " + key);
  return *it;
}

inline double require_number(const json& obj, const std::string& key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) throw ParseError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline std::string optional_string(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

inline FitReport fit_from_json(const json& j, const std::string& where) {
  FitReport r;
  r.slope = require_number(j, "slope", where);
  r.intercept = require_number(j, "intercept", where);
  r.r2_pearson = require_number(j, "r2_pearson", where);
  r.r2_raw = require_number(j, "r2_raw", where);
  if (const auto it = j.find("count"); it != j.end() && it->is_number_unsigned()) r.count = it->get<std::size_t>();
  return r;
}

inline void warn_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where,
                         std::vector<std::string>* warnings) {
  if (!warnings || !obj.is_object()) return;
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) warnings->push_back("ignoring unknown key " + where + "." + key);
  }
}

}  // namespace detail

inline nlohmann::json bundle_to_json(const CoefficientBundle& b) {
  using nlohmann::json;
  json time = {{"c1", b.time.c1}, {"c2", b.time.c2}, {"c3", b.time.c3}, {"mode", to_string(b.time.mode)}};
  if (b.time.fit) time["fit"] = detail::to_json(*b.time.fit);
  json law = {{"A", b.law.A}, {"B", b.law.B}, {"E", b.law.E}, {"alpha", b.law.alpha}, {"beta", b.law.beta}};
  if (b.law.fit) law["fit"] = detail::to_json(*b.law.fit);
  return {{"format", "hyperloss-bundle"},
          {"version", 1},
          {"time", time},
          {"law", law},
          {"budget", {{"T", b.budget.T}, {"batch", b.budget.batch}, {"token_mode", to_string(b.budget.token_mode)}}},
          {"provenance",
           {{"dataset_hash", b.provenance.dataset_hash},
            {"fit_timestamp", b.provenance.fit_timestamp},
            {"mode_flags", b.provenance.mode_flags},
            {"note", b.provenance.note}}}};
}

inline CoefficientBundle bundle_from_json(const nlohmann::json& j, std::vector<std::string>* warnings = nullptr) {
  using detail::require;
  using detail::require_number;
  if (!j.is_object()) throw ParseError("bundle: expected a JSON object");
  detail::warn_unknown(j, {"format", "version", "time", "law", "budget", "provenance"}, "bundle", warnings);

  CoefficientBundle b;
  const auto& time = require(j, "time", "bundle");
  detail::warn_unknown(time, {"c1", "c2", "c3", "mode", "fit"}, "time", warnings);
  b.time.c1 = require_number(time, "c1", "time");
  b.time.c2 = require_number(time, "c2", "time");
  b.time.c3 = require_number(time, "c3", "time");
  if (const auto mode = detail::optional_string(time, "mode"); !mode.empty()) {
    try {
      b.time.mode = parse_time_mode(mode);
    } catch (const ValidationError& e) {
      throw ParseError(std::string("time.mode: ") + e.what());
    }
  }
  if (const auto it = time.find("fit"); it != time.end()) b.time.fit = detail::fit_from_json(*it, "time.fit");

  const auto& law = require(j, "law", "bundle");
  detail::warn_unknown(law, {"A", "B", "E", "alpha", "beta", "fit"}, "law", warnings);
  b.law.A = require_number(law, "A", "law");
  b.law.B = require_number(law, "B", "law");
  b.law.E = require_number(law, "E", "law");
  b.law.alpha = require_number(law, "alpha", "law");
  b.law.beta = require_number(law, "beta", "law");
  if (const auto it = law.find("fit"); it != law.end()) b.law.fit = detail::fit_from_json(*it, "law.fit");

  if (const auto it = j.find("budget"); it != j.end()) {
    const auto& budget = *it;
    detail::warn_unknown(budget, {"T", "batch", "token_mode"}, "budget", warnings);
    b.budget.T = require_number(budget, "T", "budget");
    if (const auto bt = budget.find("batch"); bt != budget.end()) {
      if (!bt->is_number_unsigned() || bt->get<std::uint64_t>() < 1) throw ParseError("budget.batch: expected integer >= 1");
      b.budget.batch = bt->get<std::uint64_t>();
    }
    if (const auto mode = detail::optional_string(budget, "token_mode"); !mode.empty()) {
      try {
        b.budget.token_mode = parse_token_mode(mode);
      } catch (const ValidationError& e) {
        throw ParseError(std::string("budget.token_mode: ") + e.what());
      }
    }
  } else if (warnings) {
    warnings->push_back("bundle has no budget; using T=10800 s, batch 1, steps mode");
  }

  if (const auto it = j.find("provenance"); it != j.end() && it->is_object()) {
    b.provenance.dataset_hash = detail::optional_string(*it, "dataset_hash");
    b.provenance.fit_timestamp = detail::optional_string(*it, "fit_timestamp");
    b.provenance.mode_flags = detail::optional_string(*it, "mode_flags");
    b.provenance.note = detail::optional_string(*it, "note");
  }
  return b;
}

inline void save_coefficients(const CoefficientBundle& b, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << bundle_to_json(b).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline CoefficientBundle parse_coefficients(std::istream& in, std::vector<std::string>* warnings = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed bundle: ") + e.what());
  }
  return bundle_from_json(j, warnings);
}

inline CoefficientBundle load_coefficients(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_coefficients(in, warnings);
}

}  // namespace hyperloss
