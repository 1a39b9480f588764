#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "survrr/errors.hpp"

namespace survrr {

// One unit's realized record: arm, follow-up time X = T ^ C, event indicator
// Delta = 1(T <= C), baseline covariates, optional randomization stratum.
struct Observation {
  std::string id;
  int arm = 0;
  double time = 0.0;
  int event = 0;
  std::vector<double> covariates;
  std::optional<int> stratum;
};

struct Dataset {
  std::vector<Observation> observations;
  std::vector<std::string> covariate_names;
  std::vector<int> rerand_cols;         // indices into covariates
  std::optional<int> stratum_col = {};  // source column index, informational
  double tau = 0.0;

  int n() const { return static_cast<int>(observations.size()); }

  int arm_count(int arm) const {
    int c = 0;
    for (const auto& o : observations) c += (o.arm == arm);
    return c;
  }

  // Rows of the rerandomization covariates, n x p_rr.
  std::vector<std::vector<double>> rerand_matrix() const {
    std::vector<std::vector<double>> z(observations.size());
    for (std::size_t i = 0; i < observations.size(); ++i) {
      z[i].reserve(rerand_cols.size());
      for (int c : rerand_cols) z[i].push_back(observations[i].covariates[c]);
    }
    return z;
  }

  std::vector<int> arms() const {
    std::vector<int> a(observations.size());
    for (std::size_t i = 0; i < observations.size(); ++i) a[i] = observations[i].arm;
    return a;
  }
};

enum class DesignType { kSimple, kRerand, kStratifiedRerand };

inline std::string design_name(DesignType d) {
  switch (d) {
    case DesignType::kSimple: return "simple";
    case DesignType::kRerand: return "rerand";
    case DesignType::kStratifiedRerand: return "stratified-rerand";
  }
  return "simple";
}

inline DesignType design_from_name(const std::string& s) {
  if (s == "simple" || s == "srs") return DesignType::kSimple;
  if (s == "rerand" || s == "rem") return DesignType::kRerand;
  if (s == "stratified-rerand" || s == "srem") return DesignType::kStratifiedRerand;
  throw ConfigError("unknown design: " + s);
}

// Declaration of how treatment was assigned; selects the variance correction
// downstream.
struct DesignMeta {
  DesignType design = DesignType::kSimple;
  double pi1 = 0.5;
  std::optional<double> threshold_c = {};   // required for rerand designs
  std::vector<int> rerand_cols;             // indices into covariates
  std::optional<int> stratum_col = {};
  std::map<int, double> pi1_by_stratum;     // optional per-stratum probabilities

  double pi1_for_stratum(int d) const {
    const auto it = pi1_by_stratum.find(d);
    return it == pi1_by_stratum.end() ? pi1 : it->second;
  }
};

// Strictly increasing evaluation times within [0, tau].
struct TimeGrid {
  std::vector<double> points;

  static TimeGrid equally_spaced(double lo, double hi, int k) {
    if (k < 1 || !(hi > lo)) throw ConfigError("TimeGrid: need hi > lo and k >= 1");
    TimeGrid g;
    g.points.resize(k);
    if (k == 1) {
      g.points[0] = lo;
      return g;
    }
    for (int i = 0; i < k; ++i) g.points[i] = lo + (hi - lo) * i / (k - 1);
    return g;
  }

  static TimeGrid merge(const std::vector<double>& a, const std::vector<double>& b) {
    TimeGrid g;
    g.points = a;
    g.points.insert(g.points.end(), b.begin(), b.end());
    std::sort(g.points.begin(), g.points.end());
    g.points.erase(std::unique(g.points.begin(), g.points.end()), g.points.end());
    return g;
  }

  int size() const { return static_cast<int>(points.size()); }
};

// Aggregated counting-process table for one arm: distinct event times with
// (possibly weighted) event counts and at-risk counts (left limits).
struct RiskTable {
  std::vector<double> event_times;
  std::vector<double> dn;  // weighted event count at each time
  std::vector<double> y;   // weighted at-risk count at each time
};

// Per-unit, per-time weight; unit weights when absent.
using WeightFn = std::function<double(int unit, double time)>;

inline RiskTable risk_table(const Dataset& data, int arm, const WeightFn& weights = nullptr) {
  std::vector<int> members;
  for (int i = 0; i < data.n(); ++i) {
    if (data.observations[i].arm == arm) members.push_back(i);
  }
  if (members.empty()) throw EstimationError("risk_table: arm " + std::to_string(arm) + " is empty");

  std::vector<double> times;
  for (int i : members) {
    const auto& o = data.observations[i];
    if (o.event == 1) times.push_back(o.time);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  RiskTable table;
  table.event_times = times;
  table.dn.assign(times.size(), 0.0);
  table.y.assign(times.size(), 0.0);
  if (times.empty()) return table;

  if (!weights) {
    // Unweighted fast path: sort members by time, sweep once.
    std::vector<std::pair<double, int>> order;  // (time, event)
    order.reserve(members.size());
    for (int i : members) order.push_back({data.observations[i].time, data.observations[i].event});
    std::sort(order.begin(), order.end());
    // y at s = count with time >= s
    std::size_t lo = 0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      while (lo < order.size() && order[lo].first < times[k]) ++lo;
      table.y[k] = static_cast<double>(order.size() - lo);
    }
    for (const auto& [t, ev] : order) {
      if (ev == 1) {
        const auto it = std::lower_bound(times.begin(), times.end(), t);
        table.dn[static_cast<std::size_t>(it - times.begin())] += 1.0;
      }
    }
    return table;
  }

  for (int i : members) {
    const auto& o = data.observations[i];
    for (std::size_t k = 0; k < times.size() && times[k] <= o.time; ++k) {
      const double w = weights(i, times[k]);
      table.y[k] += w;
      if (o.event == 1 && o.time == times[k]) table.dn[k] += w;
    }
  }
  return table;
}

// Structured validation findings; errors are fatal for estimation, warnings
// flag degenerate-but-usable inputs.
struct Finding {
  enum class Severity { kError, kWarning } severity;
  std::string message;
};

inline std::vector<Finding> validate(const Dataset& data, const DesignMeta& meta) {
  std::vector<Finding> out;
  auto error = [&](const std::string& m) { out.push_back({Finding::Severity::kError, m}); };
  auto warn = [&](const std::string& m) { out.push_back({Finding::Severity::kWarning, m}); };

  if (data.observations.empty()) {
    error("dataset is empty");
    return out;
  }
  const std::size_t p = data.observations.front().covariates.size();
  bool arm_seen[2] = {false, false};
  double max_time = 0.0;
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    const auto& o = data.observations[i];
    if (o.arm != 0 && o.arm != 1) error("row " + std::to_string(i) + ": arm must be 0 or 1");
    else arm_seen[o.arm] = true;
    if (!(o.time >= 0.0) || !std::isfinite(o.time))
      error("row " + std::to_string(i) + ": time must be finite and nonnegative");
    if (o.event != 0 && o.event != 1) error("row " + std::to_string(i) + ": event must be 0 or 1");
    if (o.covariates.size() != p)
      error("row " + std::to_string(i) + ": covariate dimension differs from first row");
    for (double v : o.covariates) {
      if (!std::isfinite(v)) {
        error("row " + std::to_string(i) + ": non-finite covariate value");
        break;
      }
    }
    max_time = std::max(max_time, o.time);
  }
  if (!arm_seen[0] || !arm_seen[1]) error("both arms must be present");
  for (int c : meta.rerand_cols.empty() ? data.rerand_cols : meta.rerand_cols) {
    if (c < 0 || static_cast<std::size_t>(c) >= p)
      error("rerandomization column index " + std::to_string(c) + " out of range");
  }
  if (meta.design != DesignType::kSimple) {
    if (meta.rerand_cols.empty()) error("rerandomization design requires rerand columns");
    if (!meta.threshold_c) error("rerandomization design requires a balance threshold c");
  }
  if (meta.design == DesignType::kStratifiedRerand) {
    for (const auto& o : data.observations) {
      if (!o.stratum) {
        error("stratified design requires a stratum for every unit");
        break;
      }
    }
  }
  if (data.tau > 0.0) {
    for (int arm = 0; arm <= 1; ++arm) {
      double last_at_risk = 0.0;
      bool any = false;
      for (const auto& o : data.observations) {
        if (o.arm == arm) {
          any = true;
          last_at_risk = std::max(last_at_risk, o.time);
        }
      }
      if (any && last_at_risk < data.tau) {
        warn("arm " + std::to_string(arm) + " has no at-risk units after t=" +
             std::to_string(last_at_risk) + ", before tau=" + std::to_string(data.tau));
      }
    }
  }
  return out;
}

}  // namespace survrr
