#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "survrr/dataset.hpp"
#include "survrr/errors.hpp"

namespace survrr {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_number(const std::string& s, int line_no, const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\r')) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": non-numeric value '" + s +
                     "' in column '" + col + "'");
  }
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Column-name mapping for dataset ingestion. Every column that is not the
// id/arm/time/event column becomes a covariate (the stratum column is kept as
// a covariate as well, since stratification variables are part of the
// adjustment set).
struct CsvSchema {
  std::string arm_col = "arm";
  std::string time_col = "time";
  std::string event_col = "event";
  std::optional<std::string> id_col;
  std::optional<std::string> stratum_col;
  std::vector<std::string> log_cols;     // natural log, requires positive values
  std::vector<std::string> log1p_cols;   // log(1 + x), for skewed columns with zeros
  std::vector<std::string> rerand_cols;  // resolved to covariate indices
  double tau = 0.0;                      // 0: use the maximum observed time
};

inline Dataset load_dataset_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = detail::split_csv_line(line);

  auto col_index = [&](const std::string& name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(path + ": missing column '" + name + "'");
    return static_cast<int>(it - header.begin());
  };

  const int arm_ix = col_index(schema.arm_col);
  const int time_ix = col_index(schema.time_col);
  const int event_ix = col_index(schema.event_col);
  const int id_ix = schema.id_col ? col_index(*schema.id_col) : -1;

  std::vector<int> cov_src;
  std::vector<std::string> cov_names;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    if (j == arm_ix || j == time_ix || j == event_ix || j == id_ix) continue;
    cov_src.push_back(j);
    cov_names.push_back(header[j]);
  }
  auto cov_index = [&](const std::string& name) -> int {
    const auto it = std::find(cov_names.begin(), cov_names.end(), name);
    if (it == cov_names.end()) throw ParseError(path + ": missing covariate column '" + name + "'");
    return static_cast<int>(it - cov_names.begin());
  };

  std::vector<bool> do_log(cov_names.size(), false), do_log1p(cov_names.size(), false);
  for (const auto& c : schema.log_cols) do_log[cov_index(c)] = true;
  for (const auto& c : schema.log1p_cols) do_log1p[cov_index(c)] = true;
  const int stratum_cov = schema.stratum_col ? cov_index(*schema.stratum_col) : -1;

  Dataset data;
  data.covariate_names = cov_names;
  for (const auto& c : schema.rerand_cols) data.rerand_cols.push_back(cov_index(c));
  if (stratum_cov >= 0) data.stratum_col = stratum_cov;

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    Observation o;
    o.id = id_ix >= 0 ? fields[id_ix] : std::to_string(line_no - 1);
    const double arm = detail::parse_number(fields[arm_ix], line_no, schema.arm_col);
    if (arm != 0.0 && arm != 1.0) {
      throw ParseError("line " + std::to_string(line_no) + ": arm must be 0 or 1, found " +
                       fields[arm_ix]);
    }
    o.arm = static_cast<int>(arm);
    o.time = detail::parse_number(fields[time_ix], line_no, schema.time_col);
    if (o.time < 0.0) {
      throw ParseError("line " + std::to_string(line_no) + ": negative time " + fields[time_ix]);
    }
    const double ev = detail::parse_number(fields[event_ix], line_no, schema.event_col);
    if (ev != 0.0 && ev != 1.0) {
      throw ParseError("line " + std::to_string(line_no) + ": event must be 0 or 1, found " +
                       fields[event_ix]);
    }
    o.event = static_cast<int>(ev);
    o.covariates.resize(cov_src.size());
    for (std::size_t k = 0; k < cov_src.size(); ++k) {
      double v = detail::parse_number(fields[cov_src[k]], line_no, cov_names[k]);
      if (do_log[k]) {
        if (!(v > 0.0)) {
          throw ParseError("line " + std::to_string(line_no) + ": log transform of column '" +
                           cov_names[k] + "' requires positive values, found " + fields[cov_src[k]]);
        }
        v = std::log(v);
      } else if (do_log1p[k]) {
        if (!(v > -1.0)) {
          throw ParseError("line " + std::to_string(line_no) + ": log1p transform of column '" +
                           cov_names[k] + "' requires values above -1");
        }
        v = std::log1p(v);
      }
      o.covariates[k] = v;
    }
    if (stratum_cov >= 0) {
      o.stratum = static_cast<int>(std::lround(
          detail::parse_number(fields[cov_src[stratum_cov]], line_no, *schema.stratum_col)));
    }
    data.observations.push_back(std::move(o));
  }
  if (data.observations.empty()) throw ParseError(path + ": no data rows");
  double max_time = 0.0;
  for (const auto& o : data.observations) max_time = std::max(max_time, o.time);
  data.tau = schema.tau > 0.0 ? schema.tau : max_time;
  return data;
}

// Serialization counterpart of load_dataset_csv (columns: id, arm, time,
// event, then covariates under their stored names).
inline void save_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  out << "id,arm,time,event";
  for (const auto& name : data.covariate_names) out << ',' << name;
  out << '\n';
  for (const auto& o : data.observations) {
    out << o.id << ',' << o.arm << ',' << detail::format_double(o.time) << ',' << o.event;
    for (double v : o.covariates) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

}  // namespace survrr
