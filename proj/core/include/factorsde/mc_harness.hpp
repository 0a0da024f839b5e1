#pragma once

// Monte Carlo replication engine: simulate -> realised covariance -> fit ->
// test, repeated over deterministic per-replication seeds, then reduced into
// sample moments, theoretical comparisons, rejection counts and figure data.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "factorsde/hypothesis_test.hpp"
#include "factorsde/sde_sim.hpp"

namespace factorsde {

enum class InitStrategy {
  truth,      ///< start the true-k fit at the generating parameters
  heuristic,  ///< default_init for every fit
};

struct Experiment {
  std::string name = "experiment";
  SimConfig sim;  ///< template; its seed is replaced per replication
  Index replications = 0;
  std::vector<double> alphas{0.05};
  std::vector<Index> k_grid;  ///< factor counts to test; the true k is always fitted
  std::map<Index, Index> df_override;
  InitStrategy init = InitStrategy::truth;
  FitOptions fit;
  std::uint64_t seed_base = 0;
  unsigned threads = 1;  ///< 0 means std::thread::hardware_concurrency()
  bool retain_draws = true;
  std::set<std::string> outputs{"qxx", "theta", "statistic", "quartiles", "rejections", "figures"};
  std::vector<std::string> figures;  ///< statistic names to export; empty = all retained

  const ParamVector& truth() const noexcept { return sim.params; }
  Index true_k() const noexcept { return sim.spec.k; }

  /// Throws ErrorCode::config on invalid settings (e.g. "replications must be >= 1").
  void validate() const;
};

struct StatSummary {
  std::string name;
  double sample_mean = 0.0;
  double true_value = 0.0;
  double sample_sd = 0.0;
  double theoretical_sd = 0.0;
  Index count = 0;
};

struct Quartiles {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct RejectionCount {
  Index k = 0;
  Index df = 0;
  double alpha = 0.0;
  double critical = 0.0;
  Index rejections = 0;
  Index tested = 0;  ///< replications with a finite statistic, converged or not
};

struct Aggregate {
  Index replications = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<StatSummary> qxx;
  std::vector<StatSummary> theta;
  std::vector<StatSummary> statistic;  ///< "T_k" per tested k
  std::map<Index, Quartiles> statistic_quartiles;
  std::vector<RejectionCount> rejections;
  Index simulation_failures = 0;
  std::map<Index, Index> nonconverged;  ///< per k
  std::map<Index, Index> fit_failures;  ///< per k (exceptions)
  std::map<Index, Index> df;            ///< degrees of freedom used per tested k
  /// Raw draws in replication order (excluded replications omitted).
  std::map<std::string, std::vector<double>> draws;

  const StatSummary* find(const std::string& name) const;
};

Aggregate run(const Experiment& exp);

struct TheoreticalSdTable {
  std::vector<std::string> qxx_names;
  Vector qxx_sd;  ///< sqrt(diag W(theta_0) / n), vech order
  std::vector<std::string> theta_names;
  Vector theta_sd;  ///< sqrt(diag (Delta' W^{-1} Delta)^{-1} / n)
};

TheoreticalSdTable theoretical_sd_table(const ParamVector& truth, const ModelSpec& spec);

/// Statistic names: "Q_XX(i,j)" with 1-based i <= j, "theta(j)" 1-based, "T_k".
std::string qxx_name(Index row, Index col);
std::string theta_name(Index j);
std::string statistic_name(Index k);

struct FigureData {
  std::string statistic;
  std::string reference;  ///< "normal" or "chi2(df)"
  Vector draw;            ///< sorted ascending
  Vector standardized;    ///< (draw - true mean) / theoretical sd
  Vector reference_quantile;  ///< reference quantile at (i - 0.5) / N, raw units
  Vector standardized_reference;
  Vector ecdf;  ///< i / N
};

/// Histogram / QQ / ECDF columns for one statistic. Throws
/// ErrorCode::invalid_argument when the statistic was not retained or has
/// no draws.
FigureData figure_data(const Aggregate& agg, const std::string& statistic);

/// Type-7 sample quantile of sorted data.
double sample_quantile(const std::vector<double>& sorted, double prob);

/// Writes the requested table CSVs, figure CSVs and manifest.json into dir.
void write_outputs(const Aggregate& agg, const Experiment& exp, const std::filesystem::path& dir);

}  // namespace factorsde
