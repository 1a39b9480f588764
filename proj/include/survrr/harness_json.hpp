#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "survrr/analyze.hpp"
#include "survrr/dataset.hpp"
#include "survrr/simulate.hpp"

namespace survrr {

// DesignMeta wire format: consumed by the inference side to select the
// variance correction.
inline nlohmann::json design_meta_to_json(const DesignMeta& meta) {
  nlohmann::json j;
  j["design"] = design_name(meta.design);
  j["pi1"] = meta.pi1;
  if (meta.threshold_c) j["c"] = *meta.threshold_c;
  j["rerand_cols"] = meta.rerand_cols;
  if (meta.stratum_col) j["stratum_col"] = *meta.stratum_col;
  if (!meta.pi1_by_stratum.empty()) {
    nlohmann::json probs;
    for (const auto& [d, p] : meta.pi1_by_stratum) probs[std::to_string(d)] = p;
    j["pi1_by_stratum"] = probs;
  }
  return j;
}

inline DesignMeta design_meta_from_json(const nlohmann::json& j) {
  DesignMeta meta;
  meta.design = design_from_name(j.at("design").get<std::string>());
  if (j.contains("pi1")) meta.pi1 = j.at("pi1").get<double>();
  if (j.contains("c")) meta.threshold_c = j.at("c").get<double>();
  if (j.contains("rerand_cols")) meta.rerand_cols = j.at("rerand_cols").get<std::vector<int>>();
  if (j.contains("stratum_col")) meta.stratum_col = j.at("stratum_col").get<int>();
  if (j.contains("pi1_by_stratum")) {
    for (const auto& [k, v] : j.at("pi1_by_stratum").items()) {
      meta.pi1_by_stratum[std::stoi(k)] = v.get<double>();
    }
  }
  return meta;
}

// Simulation config file: same field names as the CLI flags; flags win over
// the file.
inline void simulation_config_from_json(const nlohmann::json& j, SimulationConfig* cfg) {
  if (j.contains("scenario")) cfg->scenario = j.at("scenario").get<int>();
  if (j.contains("n")) cfg->n = j.at("n").get<int>();
  if (j.contains("reps")) cfg->replicates = j.at("reps").get<int>();
  if (j.contains("design")) cfg->design = design_from_name(j.at("design").get<std::string>());
  if (j.contains("methods")) {
    cfg->methods.clear();
    for (const auto& m : j.at("methods")) cfg->methods.push_back(method_from_name(m));
  }
  if (j.contains("times")) cfg->report_times = j.at("times").get<std::vector<double>>();
  if (j.contains("band")) {
    const auto b = j.at("band");
    cfg->band_lo = b.at(0).get<double>();
    cfg->band_hi = b.at(1).get<double>();
    cfg->band_points = b.at(2).get<int>();
  }
  if (j.contains("alpha")) cfg->alpha = j.at("alpha").get<double>();
  if (j.contains("c")) cfg->c = j.at("c").get<double>();
  if (j.contains("k")) cfg->k_folds = j.at("k").get<int>();
  if (j.contains("learner")) cfg->learner = j.at("learner").get<std::string>();
  if (j.contains("seed")) cfg->seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("jobs")) cfg->jobs = j.at("jobs").get<int>();
  if (j.contains("band_paths")) cfg->band_paths = j.at("band_paths").get<int>();
  if (j.contains("tau")) cfg->tau = j.at("tau").get<double>();
  if (j.contains("pi1")) cfg->pi1 = j.at("pi1").get<double>();
  if (j.contains("arm")) cfg->arm = j.at("arm").get<int>();
  if (j.contains("truth_nmc")) cfg->truth_nmc = j.at("truth_nmc").get<long>();
  if (j.contains("truth_seed")) cfg->truth_seed = j.at("truth_seed").get<std::uint64_t>();
  if (j.contains("truth_cache")) cfg->truth_cache = j.at("truth_cache").get<std::string>();
}

inline nlohmann::json analysis_report_to_json(const AnalysisReport& report) {
  nlohmann::json j;
  j["times"] = report.times;
  j["alpha"] = report.alpha;
  j["n"] = report.n;
  j["pi1"] = report.pi1;
  j["methods"] = nlohmann::json::array();
  for (const auto& m : report.methods) {
    nlohmann::json jm;
    jm["method"] = m.method;
    if (!m.error.empty()) {
      jm["error"] = m.error;
      j["methods"].push_back(jm);
      continue;
    }
    jm["estimates"] = m.estimates;
    jm["designs"] = nlohmann::json::array();
    for (const auto& d : m.designs) {
      nlohmann::json jd;
      jd["design"] = d.design;
      jd["se"] = d.se;
      if (!d.variance_reduction_pct.empty()) {
        jd["variance_reduction_pct"] = d.variance_reduction_pct;
      }
      jm["designs"].push_back(jd);
    }
    j["methods"].push_back(jm);
  }
  return j;
}

}  // namespace survrr
