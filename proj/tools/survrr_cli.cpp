// Command-line harness: Monte Carlo simulation tables, observed-data design
// analysis, covariance-geometry path export, and the kappa utility.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "survrr/analyze.hpp"
#include "survrr/csv.hpp"
#include "survrr/datagen.hpp"
#include "survrr/geometry.hpp"
#include "survrr/harness_json.hpp"
#include "survrr/simulate.hpp"
#include "survrr/special.hpp"

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& f : split(s, ',')) out.push_back(std::stod(f));
  return out;
}

}  // namespace

struct SimulateArgs {
  survrr::SimulationConfig cfg;
  std::string config_path;
  std::string methods = "km,ipcw,dml";
  std::string times = "1,2,3,4";
  std::string band = "1,4,50";
  std::string design = "srs";
  std::string out;
};

struct AnalyzeArgs {
  std::string data_path;
  std::string schema = "arm=arm,time=time,event=event";
  std::string rerand_cols;
  std::string log_cols;
  std::string log1p_cols;
  std::string methods = "km,ipcw,dml";
  std::string times = "1,2,3,4";
  double c = 1.83;
  double alpha = 0.05;
  int k = 5;
  std::uint64_t seed = 1;
  double pi1 = -1.0;  // <0: observed fraction
  double tau = 0.0;
  std::string out;
};

int main(int argc, char** argv) {
  CLI::App app{"Survival-function estimation and inference under rerandomization designs"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Run a Monte Carlo operating-characteristics table");
  simulate->add_option("--scenario", sim.cfg.scenario, "Data-generating scenario (1 or 2)");
  simulate->add_option("--n", sim.cfg.n, "Sample size per replicate");
  simulate->add_option("--reps", sim.cfg.replicates, "Number of replicates");
  simulate->add_option("--design", sim.design, "srs, rem, or srem");
  simulate->add_option("--methods", sim.methods, "Comma-separated subset of km,ipcw,dml");
  simulate->add_option("--times", sim.times, "Report times, comma-separated");
  simulate->add_option("--band", sim.band, "Band interval and points: lo,hi,k");
  simulate->add_option("--alpha", sim.cfg.alpha, "Interval level alpha");
  simulate->add_option("--c", sim.cfg.c, "Rerandomization balance threshold");
  simulate->add_option("--k", sim.cfg.k_folds, "Cross-fitting folds");
  simulate->add_option("--learner", sim.cfg.learner, "DML nuisance learner: cox or marginal");
  simulate->add_option("--seed", sim.cfg.seed, "Master seed");
  simulate->add_option("--jobs", sim.cfg.jobs, "Concurrent replicates");
  simulate->add_option("--band-paths", sim.cfg.band_paths, "Gaussian paths per band quantile");
  simulate->add_option("--pi1", sim.cfg.pi1, "Assignment probability of arm 1");
  simulate->add_option("--truth-nmc", sim.cfg.truth_nmc, "Super-population size for truth values");
  simulate->add_option("--truth-cache", sim.cfg.truth_cache, "Truth oracle cache CSV path");
  simulate->add_option("--config", sim.config_path, "JSON config file (flags win)");
  simulate->add_option("--out", sim.out, "Output CSV path (stdout when absent)");

  AnalyzeArgs an;
  CLI::App* analyze = app.add_subcommand("analyze", "Analyze an observed dataset under hypothetical designs");
  analyze->add_option("--data", an.data_path, "Input CSV")->required();
  analyze->add_option("--schema", an.schema, "Column mapping arm=COL,time=COL,event=COL[,stratum=COL][,id=COL]");
  analyze->add_option("--rerand-cols", an.rerand_cols, "Rerandomization covariate columns, comma-separated");
  analyze->add_option("--log-cols", an.log_cols, "Columns to log-transform");
  analyze->add_option("--log1p-cols", an.log1p_cols, "Columns to log1p-transform");
  analyze->add_option("--methods", an.methods, "Comma-separated subset of km,ipcw,dml");
  analyze->add_option("--times", an.times, "Evaluation times, comma-separated");
  analyze->add_option("--c", an.c, "Balance threshold for the hypothetical designs");
  analyze->add_option("--alpha", an.alpha, "Interval level alpha");
  analyze->add_option("--k", an.k, "Cross-fitting folds");
  analyze->add_option("--seed", an.seed, "Seed for the cross-fitting partition");
  analyze->add_option("--pi1", an.pi1, "Known assignment probability (default: observed fraction)");
  analyze->add_option("--tau", an.tau, "Maximum follow-up (default: max observed time)");
  analyze->add_option("--out", an.out, "Output JSON path (stdout when absent)");

  struct GeometryArgs {
    std::string out = "geometry.csv";
    int paths = 250;
    int superpop = 100000;
    std::uint64_t seed = 20240401;
    double c = -1.0;  // <0: 15% quantile of chi^2_2
  } geo;
  CLI::App* geometry = app.add_subcommand("geometry", "Export projection/residual/total path panels");
  geometry->add_option("--out", geo.out, "Output CSV path");
  geometry->add_option("--paths", geo.paths, "Number of trajectories");
  geometry->add_option("--superpop", geo.superpop, "Super-population size");
  geometry->add_option("--seed", geo.seed, "Seed");
  geometry->add_option("--c", geo.c, "Balance threshold (default: 15% quantile of chi^2_2)");

  struct KappaArgs {
    int p = 2;
    double c = 1.83;
  } ka;
  CLI::App* kappa_cmd = app.add_subcommand("kappa", "Print kappa(c), the acceptance probability, and the reduction ceiling");
  kappa_cmd->add_option("--p", ka.p, "Number of rerandomization covariates")->required();
  kappa_cmd->add_option("--c", ka.c, "Balance threshold")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*simulate) {
      if (!sim.config_path.empty()) {
        std::ifstream in(sim.config_path);
        if (!in) throw survrr::ConfigError("cannot open config file: " + sim.config_path);
        nlohmann::json j;
        in >> j;
        survrr::simulation_config_from_json(j, &sim.cfg);
      }
      if (simulate->count("--design") || sim.config_path.empty()) {
        sim.cfg.design = survrr::design_from_name(sim.design);
      }
      if (simulate->count("--methods") || sim.config_path.empty()) {
        sim.cfg.methods.clear();
        for (const auto& m : split(sim.methods, ',')) {
          sim.cfg.methods.push_back(survrr::method_from_name(m));
        }
      }
      if (simulate->count("--times") || sim.config_path.empty()) {
        sim.cfg.report_times = parse_doubles(sim.times);
      }
      if (simulate->count("--band") || sim.config_path.empty()) {
        const auto b = parse_doubles(sim.band);
        if (b.size() != 3) throw survrr::ConfigError("--band expects lo,hi,points");
        sim.cfg.band_lo = b[0];
        sim.cfg.band_hi = b[1];
        sim.cfg.band_points = static_cast<int>(b[2]);
      }
      const auto rows = survrr::run_simulation(sim.cfg);
      if (sim.out.empty()) {
        survrr::write_metrics_csv(rows, std::cout);
      } else {
        survrr::write_metrics_csv(rows, sim.out);
        std::cerr << "wrote " << rows.size() << " rows to " << sim.out << "\n";
      }
      return 0;
    }

    if (*analyze) {
      survrr::CsvSchema schema;
      for (const auto& kv : split(an.schema, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw survrr::ConfigError("bad schema entry: " + kv);
        const std::string key = kv.substr(0, eq), col = kv.substr(eq + 1);
        if (key == "arm") schema.arm_col = col;
        else if (key == "time") schema.time_col = col;
        else if (key == "event") schema.event_col = col;
        else if (key == "stratum") schema.stratum_col = col;
        else if (key == "id") schema.id_col = col;
        else throw survrr::ConfigError("unknown schema key: " + key);
      }
      if (!an.log_cols.empty()) schema.log_cols = split(an.log_cols, ',');
      if (!an.log1p_cols.empty()) schema.log1p_cols = split(an.log1p_cols, ',');
      if (!an.rerand_cols.empty()) schema.rerand_cols = split(an.rerand_cols, ',');
      schema.tau = an.tau;
      const survrr::Dataset data = survrr::load_dataset_csv(an.data_path, schema);

      survrr::AnalyzeOptions opts;
      opts.methods.clear();
      for (const auto& m : split(an.methods, ',')) opts.methods.push_back(survrr::method_from_name(m));
      opts.times = parse_doubles(an.times);
      opts.alpha = an.alpha;
      opts.k_folds = an.k;
      opts.seed = an.seed;
      if (an.pi1 > 0.0) opts.pi1 = an.pi1;

      std::vector<survrr::DesignMeta> designs;
      if (!data.rerand_cols.empty()) {
        survrr::DesignMeta rem;
        rem.design = survrr::DesignType::kRerand;
        rem.threshold_c = an.c;
        rem.rerand_cols = data.rerand_cols;
        designs.push_back(rem);
        if (data.stratum_col) {
          survrr::DesignMeta srem = rem;
          srem.design = survrr::DesignType::kStratifiedRerand;
          srem.stratum_col = data.stratum_col;
          designs.push_back(srem);
        }
      }
      const auto report = survrr::analyze_dataset(data, designs, opts);
      const nlohmann::json j = survrr::analysis_report_to_json(report);
      if (an.out.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        std::ofstream out(an.out);
        if (!out) throw survrr::ParseError("cannot write file: " + an.out);
        out << j.dump(2) << "\n";
        std::cerr << "wrote report to " << an.out << "\n";
      }
      return 0;
    }

    if (*geometry) {
      const double c = geo.c > 0.0 ? geo.c : survrr::chisq_quantile(0.15, 2);
      survrr::RngStream rng(geo.seed, 0);
      survrr::RngStream rng_pop = rng.substream(100);
      const auto pop = survrr::gen_geometry_population(geo.superpop, rng_pop);
      const auto grid = survrr::TimeGrid::equally_spaced(0.1, 4.5, 100);
      survrr::RngStream rng_paths = rng.substream(200);
      const auto paths = survrr::geometry_decomposition(pop, 1, grid, c, geo.paths, rng_paths);
      survrr::write_geometry_csv(paths, geo.out);
      std::cerr << "wrote " << geo.paths << " trajectories per panel to " << geo.out << "\n";
      return 0;
    }

    if (*kappa_cmd) {
      const double k = survrr::kappa(ka.c, ka.p);
      const double accept = survrr::chisq_cdf(ka.c, ka.p);
      std::printf("kappa(c=%g, p=%d) = %.6f\n", ka.c, ka.p, k);
      std::printf("acceptance probability P(chi2_%d <= %g) = %.6f\n", ka.p, ka.c, accept);
      std::printf("relative variance-reduction ceiling 1 - kappa = %.6f\n", 1.0 - k);
      return 0;
    }
  } catch (const survrr::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const survrr::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const survrr::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
