#pragma once

#include <optional>
#include <string>
#include <vector>

#include "grpnorm/estimators.hpp"
#include "grpnorm/inference.hpp"

namespace grpnorm {

enum class BinStrategy {
    FixedRange,   // k equal bins over true mean +- 3 sd, outer bins opened to +-inf
    SampleRange,  // k equal bins over the per-rep sample min/max, outer opened
};

BinStrategy bin_strategy_from_name(const std::string& name);
std::string bin_strategy_name(BinStrategy s);

/// One simulation configuration: everything a replication needs. Reports are
/// a pure function of (scenario, seed).
struct Scenario {
    std::string name = "scenario";
    GaussianParams true_params;
    int n = 100;
    std::vector<int> bins_per_axis;
    int reps = 1;
    GaussianParams init;
    std::vector<Method> methods;
    int mcem_samples = 0;  // 0 -> dimension default
    std::uint64_t seed = 0;
    BinStrategy bin_strategy = BinStrategy::FixedRange;
    int max_iter = 500;
    double tol = 1e-8;
    int threads = 1;

    Scenario(GaussianParams tp, GaussianParams in)
        : true_params(std::move(tp)), init(std::move(in)) {}
};

/// Reported parameters are means, variances, then upper-triangle
/// correlations: d=1 -> {mu, var}; d=2 -> {mu1, mu2, var1, var2, rho}.
std::vector<std::string> param_names(Eigen::Index dim);
std::vector<double> param_vector(const GaussianParams& p);

struct MethodReport {
    Method method = Method::EM;
    std::vector<double> rmse;          // per parameter, over successful reps
    std::vector<double> avg_estimate;  // per parameter
    std::vector<double> sd_estimate;   // per parameter
    std::vector<double> avg_se;        // per mean parameter (EM/MCEM only)
    std::vector<double> coverage;      // per mean parameter (EM/MCEM only)
    double avg_iterations = 0.0;
    int failures = 0;
    /// Successful replications: (rep id, parameter estimates).
    std::vector<std::pair<int, std::vector<double>>> estimates;
};

struct ScenarioReport {
    std::string scenario_name;
    Eigen::Index dim = 1;
    int n = 0;
    int reps = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> params;
    std::vector<double> true_values;
    std::vector<MethodReport> methods;
};

/// Draws n observations from the true distribution on the stream
/// (seed, rep), bins them per bin_strategy. Total count is always n.
GroupedTable simulate_dataset(const Scenario& scenario, int rep);

/// Fits every requested method on every replication; aggregates RMSE,
/// average SE and empirical coverage of the 95% mean CIs. Failed reps are
/// counted and excluded, never silently dropped.
ScenarioReport run_scenario(const Scenario& scenario);

/// run_scenario restricted to methods with SEs (EM/MCEM).
ScenarioReport coverage_report(const Scenario& scenario);

/// Output layout: report.json, estimates.csv, rmse.csv, coverage.csv,
/// boxplot.csv under dir (created if missing).
void write_report(const std::string& dir, const ScenarioReport& report);

/// Flat key/value scenario file (TOML-style), keys mirroring Scenario.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& text);

}  // namespace grpnorm
