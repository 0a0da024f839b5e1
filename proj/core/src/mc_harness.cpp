#include "factorsde/mc_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "factorsde/chi2.hpp"
#include "factorsde/error.hpp"
#include "factorsde/json_io.hpp"
#include "factorsde/rng.hpp"

namespace factorsde {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct TestOutcome {
  bool attempted = false;
  bool failed = false;
  bool converged = false;
  double statistic = kNaN;
};

struct Replication {
  std::uint64_t seed = 0;
  bool simulated = false;
  Vector qxx;
  std::optional<Vector> theta;  // true-k fit, converged only
  std::map<Index, TestOutcome> tests;
};

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) return std::accumulate(xs.begin(), xs.end(), 0.0);
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

StatSummary summarise(std::string name, const std::vector<double>& xs, double truth, double theo) {
  StatSummary s;
  s.name = std::move(name);
  s.true_value = truth;
  s.theoretical_sd = theo;
  s.count = static_cast<Index>(xs.size());
  if (xs.empty()) {
    s.sample_mean = kNaN;
    s.sample_sd = kNaN;
    return s;
  }
  s.sample_mean = pairwise_sum(xs) / static_cast<double>(xs.size());
  if (xs.size() < 2) {
    s.sample_sd = 0.0;
    return s;
  }
  std::vector<double> sq(xs.size());
  std::transform(xs.begin(), xs.end(), sq.begin(),
                 [m = s.sample_mean](double x) { return (x - m) * (x - m); });
  s.sample_sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(xs.size() - 1));
  return s;
}

Index tested_df(const Experiment& exp, Index k) {
  const auto it = exp.df_override.find(k);
  return it != exp.df_override.end() ? it->second : degrees_of_freedom(exp.sim.spec.p, k);
}

Replication run_one(const Experiment& exp, Index r) {
  Replication rep;
  rep.seed = replication_seed(exp.seed_base, static_cast<std::uint64_t>(r));
  SimConfig cfg = exp.sim;
  cfg.seed = rep.seed;
  cfg.retain_latents = false;
  SamplePath path;
  try {
    path = simulate(cfg);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::simulation_diverged) throw;
    return rep;
  }
  rep.simulated = true;
  const RealisedCov q = realised_cov(path);
  rep.qxx = vech(q.q);

  const Index k_true = exp.true_k();
  std::set<Index> ks(exp.k_grid.begin(), exp.k_grid.end());
  ks.insert(k_true);
  for (Index k : ks) {
    TestOutcome outcome;
    outcome.attempted = true;
    ModelSpec spec = exp.sim.spec;
    spec.k = k;
    std::optional<ParamVector> init;
    if (k == k_true && exp.init == InitStrategy::truth) init = exp.truth();
    try {
      const FitResult f = fit(q, spec, init, exp.fit);
      outcome.converged = f.converged;
      outcome.statistic = static_cast<double>(q.n) * f.contrast;
      if (k == k_true && f.converged) rep.theta = pack(f.theta_hat);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::fit_failed && e.code() != ErrorCode::not_positive_definite) throw;
      outcome.failed = true;
    }
    rep.tests[k] = outcome;
  }
  return rep;
}

}  // namespace

void Experiment::validate() const {
  if (replications < 1) throw Error(ErrorCode::config, "replications must be >= 1");
  try {
    sim.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::config, std::string("simulation: ") + e.what());
  }
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::config, "alphas must lie in (0, 1)");
  }
  for (Index k : k_grid) {
    if (k < 1 || k >= sim.spec.p) throw Error(ErrorCode::config, "k_grid entries must satisfy 1 <= k < p");
    if (tested_df(*this, k) < 1) {
      throw Error(ErrorCode::config, "k_grid entry k=" + std::to_string(k) + " is untestable (df < 1)");
    }
  }
  if (fit.box && fit.box->size() != sim.spec.q()) {
    throw Error(ErrorCode::config, "fit box length does not match the true-k parameter count");
  }
  if (fit.box) {
    for (Index k : k_grid) {
      if (k != sim.spec.k) throw Error(ErrorCode::config, "an explicit fit box cannot cover several k; use a symmetric bound");
    }
  }
  if (init == InitStrategy::truth) {
    const Box box = fit.box         ? *fit.box
                    : fit.box_bound ? symmetric_box(sim.spec.p, sim.spec.k, *fit.box_bound)
                                    : default_box(sim.spec.p, sim.spec.k);
    if (!box.contains(pack(truth()))) {
      throw Error(ErrorCode::config, "true parameters lie outside the fit box");
    }
  }
}

const StatSummary* Aggregate::find(const std::string& name) const {
  for (const auto* group : {&qxx, &theta, &statistic}) {
    for (const auto& s : *group) {
      if (s.name == name) return &s;
    }
  }
  return nullptr;
}

std::string qxx_name(Index row, Index col) {
  return "Q_XX(" + std::to_string(std::min(row, col) + 1) + "," + std::to_string(std::max(row, col) + 1) + ")";
}

std::string theta_name(Index j) { return "theta(" + std::to_string(j + 1) + ")"; }

std::string statistic_name(Index k) { return "T_" + std::to_string(k); }

TheoreticalSdTable theoretical_sd_table(const ParamVector& truth, const ModelSpec& spec) {
  if (spec.n < 1) throw Error(ErrorCode::invalid_argument, "theoretical_sd_table: n must be >= 1");
  const CovStructure cs = cov_structure(truth);
  const double n = static_cast<double>(spec.n);
  const Index p = truth.p();
  TheoreticalSdTable t;
  for (Index j = 0; j < p; ++j) {
    for (Index i = j; i < p; ++i) t.qxx_names.push_back(qxx_name(i, j));
  }
  t.qxx_sd = (cs.w.matrix().diagonal() / n).cwiseSqrt();
  const WeightFactor w(cs.w);
  const Matrix info = cs.delta.transpose() * w.solve(cs.delta);
  const Matrix avar = info.ldlt().solve(Matrix::Identity(info.rows(), info.cols()));
  t.theta_sd = (avar.diagonal() / n).cwiseMax(0.0).cwiseSqrt();
  for (Index j = 0; j < truth.q(); ++j) t.theta_names.push_back(theta_name(j));
  return t;
}

double sample_quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) return kNaN;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Aggregate run(const Experiment& exp) {
  exp.validate();
  const Index reps = exp.replications;
  std::vector<Replication> results(static_cast<std::size_t>(reps));

  unsigned threads = exp.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : exp.threads;
  threads = static_cast<unsigned>(std::min<Index>(threads, reps));
  std::atomic<Index> next{0};
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](unsigned id) {
    try {
      for (Index r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
        results[static_cast<std::size_t>(r)] = run_one(exp, r);
      }
    } catch (...) {
      errors[id] = std::current_exception();
      next.store(reps);
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Reduction in replication order, independent of scheduling.
  Aggregate agg;
  agg.replications = reps;
  const Index p = exp.sim.spec.p;
  const Index k_true = exp.true_k();
  const Index q_true = exp.sim.spec.q();
  const TheoreticalSdTable theo = theoretical_sd_table(exp.truth(), exp.sim.spec);
  const Vector truth_vech = vech(sigma_of_theta(exp.truth()));
  const Vector truth_theta = pack(exp.truth());

  std::vector<std::vector<double>> qxx_draws(static_cast<std::size_t>(sym_size(p)));
  std::vector<std::vector<double>> theta_draws(static_cast<std::size_t>(q_true));
  std::map<Index, std::vector<double>> stat_draws;
  std::map<Index, std::vector<double>> decision_draws;  // every finite statistic, converged or not
  std::vector<Index> grid = exp.k_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (Index k : grid) {
    stat_draws[k];
    decision_draws[k];
    agg.nonconverged[k] = 0;
    agg.fit_failures[k] = 0;
    agg.df[k] = tested_df(exp, k);
  }
  agg.nonconverged[k_true];
  agg.fit_failures[k_true];

  for (const auto& rep : results) {
    agg.seeds.push_back(rep.seed);
    if (!rep.simulated) {
      ++agg.simulation_failures;
      continue;
    }
    for (Index i = 0; i < rep.qxx.size(); ++i) qxx_draws[static_cast<std::size_t>(i)].push_back(rep.qxx(i));
    if (rep.theta) {
      for (Index j = 0; j < q_true; ++j) theta_draws[static_cast<std::size_t>(j)].push_back((*rep.theta)(j));
    }
    for (const auto& [k, outcome] : rep.tests) {
      if (outcome.failed) {
        ++agg.fit_failures[k];
        continue;
      }
      if (!stat_draws.count(k)) {
        if (!outcome.converged) ++agg.nonconverged[k];
        continue;
      }
      if (std::isfinite(outcome.statistic)) decision_draws[k].push_back(outcome.statistic);
      if (!outcome.converged) {
        ++agg.nonconverged[k];
      } else {
        stat_draws[k].push_back(outcome.statistic);
      }
    }
  }

  for (std::size_t i = 0; i < qxx_draws.size(); ++i) {
    const auto idx = static_cast<Index>(i);
    agg.qxx.push_back(summarise(theo.qxx_names[i], qxx_draws[i], truth_vech(idx), theo.qxx_sd(idx)));
  }
  for (std::size_t j = 0; j < theta_draws.size(); ++j) {
    const auto idx = static_cast<Index>(j);
    agg.theta.push_back(summarise(theo.theta_names[j], theta_draws[j], truth_theta(idx), theo.theta_sd(idx)));
  }
  for (const auto& [k, draws] : stat_draws) {
    const double df = static_cast<double>(agg.df[k]);
    const bool null_true = k == k_true;
    agg.statistic.push_back(summarise(statistic_name(k), draws, null_true ? df : kNaN,
                                      null_true ? std::sqrt(2.0 * df) : kNaN));
    std::vector<double> sorted = draws;
    std::sort(sorted.begin(), sorted.end());
    Quartiles qs;
    if (!sorted.empty()) {
      qs = {sorted.front(), sample_quantile(sorted, 0.25), sample_quantile(sorted, 0.5),
            sample_quantile(sorted, 0.75), sorted.back()};
    } else {
      qs = {kNaN, kNaN, kNaN, kNaN, kNaN};
    }
    agg.statistic_quartiles[k] = qs;
    for (double alpha : exp.alphas) {
      RejectionCount rc;
      rc.k = k;
      rc.df = agg.df[k];
      rc.alpha = alpha;
      rc.critical = chi2_quantile(df, alpha);
      const auto& decided = decision_draws[k];
      rc.tested = static_cast<Index>(decided.size());
      rc.rejections = std::count_if(decided.begin(), decided.end(), [&](double t) { return t > rc.critical; });
      agg.rejections.push_back(rc);
    }
  }

  if (exp.retain_draws) {
    for (std::size_t i = 0; i < qxx_draws.size(); ++i) agg.draws[theo.qxx_names[i]] = std::move(qxx_draws[i]);
    for (std::size_t j = 0; j < theta_draws.size(); ++j) agg.draws[theo.theta_names[j]] = std::move(theta_draws[j]);
    for (auto& [k, draws] : stat_draws) agg.draws[statistic_name(k)] = std::move(draws);
  }
  return agg;
}

FigureData figure_data(const Aggregate& agg, const std::string& statistic) {
  const auto it = agg.draws.find(statistic);
  if (it == agg.draws.end()) {
    throw Error(ErrorCode::invalid_argument, "figure_data: draws for '" + statistic + "' were not retained");
  }
  if (it->second.empty()) {
    throw Error(ErrorCode::invalid_argument, "figure_data: no draws for '" + statistic + "'");
  }
  const StatSummary* summary = agg.find(statistic);
  if (!summary) throw Error(ErrorCode::invalid_argument, "figure_data: unknown statistic '" + statistic + "'");

  std::vector<double> sorted = it->second;
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<Index>(sorted.size());
  FigureData fd;
  fd.statistic = statistic;
  fd.draw = Eigen::Map<const Vector>(sorted.data(), n);
  fd.ecdf.resize(n);
  fd.reference_quantile.resize(n);
  fd.standardized_reference.resize(n);

  const bool is_statistic = statistic.rfind("T_", 0) == 0;
  double mean = summary->true_value;
  double sd = summary->theoretical_sd;
  Index df = 0;
  if (is_statistic) {
    const Index k = std::stoll(statistic.substr(2));
    df = agg.df.at(k);
    mean = static_cast<double>(df);
    sd = std::sqrt(2.0 * static_cast<double>(df));
    fd.reference = "chi2(" + std::to_string(df) + ")";
  } else {
    fd.reference = "normal";
  }
  fd.standardized = (fd.draw.array() - mean) / sd;
  const boost::math::normal_distribution<double> std_normal;
  for (Index i = 0; i < n; ++i) {
    const double prob = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    fd.ecdf(i) = static_cast<double>(i + 1) / static_cast<double>(n);
    if (is_statistic) {
      fd.reference_quantile(i) = chi2_quantile(static_cast<double>(df), 1.0 - prob);
      fd.standardized_reference(i) = (fd.reference_quantile(i) - mean) / sd;
    } else {
      fd.standardized_reference(i) = boost::math::quantile(std_normal, prob);
      fd.reference_quantile(i) = mean + sd * fd.standardized_reference(i);
    }
  }
  return fd;
}

namespace {

std::string fmt_num(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + file.string());
  return out;
}

void write_moments(const std::filesystem::path& file, const std::vector<StatSummary>& stats) {
  auto out = open_out(file);
  out << "statistic,sample_mean,true,sample_sd,theoretical_sd,count\n";
  for (const auto& s : stats) {
    out << s.name << ',' << fmt_num(s.sample_mean) << ',' << fmt_num(s.true_value) << ','
        << fmt_num(s.sample_sd) << ',' << fmt_num(s.theoretical_sd) << ',' << s.count << '\n';
  }
}

std::string file_stem(const std::string& statistic) {
  std::string out;
  for (char c : statistic) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
      out += c;
    } else if (c == ',') {
      out += '_';
    }
  }
  return out;
}

}  // namespace

void write_outputs(const Aggregate& agg, const Experiment& exp, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto wants = [&](const char* key) { return exp.outputs.count(key) > 0; };
  if (wants("qxx")) write_moments(dir / "qxx_moments.csv", agg.qxx);
  if (wants("theta")) write_moments(dir / "theta_moments.csv", agg.theta);
  if (wants("statistic")) write_moments(dir / "statistic_moments.csv", agg.statistic);
  if (wants("quartiles")) {
    auto out = open_out(dir / "statistic_quartiles.csv");
    out << "statistic,min,q1,median,q3,max\n";
    for (const auto& [k, q] : agg.statistic_quartiles) {
      out << statistic_name(k) << ',' << fmt_num(q.min) << ',' << fmt_num(q.q1) << ',' << fmt_num(q.median)
          << ',' << fmt_num(q.q3) << ',' << fmt_num(q.max) << '\n';
    }
  }
  if (wants("rejections")) {
    auto out = open_out(dir / "rejections.csv");
    out << "k,df,alpha,critical,rejections,tested,nonconverged,failed\n";
    for (const auto& r : agg.rejections) {
      out << r.k << ',' << r.df << ',' << fmt_num(r.alpha) << ',' << fmt_num(r.critical) << ','
          << r.rejections << ',' << r.tested << ',' << agg.nonconverged.at(r.k) << ','
          << agg.fit_failures.at(r.k) << '\n';
    }
  }
  std::vector<std::string> figure_files;
  if (wants("figures") && !agg.draws.empty()) {
    std::vector<std::string> names = exp.figures;
    if (names.empty()) {
      for (const auto& [name, draws] : agg.draws) names.push_back(name);
    }
    std::filesystem::create_directories(dir / "figures");
    for (const auto& name : names) {
      const FigureData fd = figure_data(agg, name);
      const std::string file = "figures/" + file_stem(name) + ".csv";
      auto out = open_out(dir / file);
      out << "rank,draw,standardized,reference_quantile,standardized_reference,ecdf\n";
      for (Index i = 0; i < fd.draw.size(); ++i) {
        out << (i + 1) << ',' << fmt_num(fd.draw(i)) << ',' << fmt_num(fd.standardized(i)) << ','
            << fmt_num(fd.reference_quantile(i)) << ',' << fmt_num(fd.standardized_reference(i)) << ','
            << fmt_num(fd.ecdf(i)) << '\n';
      }
      figure_files.push_back(file);
    }
  }

  Json manifest;
  manifest["name"] = exp.name;
  manifest["library_version"] = "0.1.0";
  manifest["seed_base"] = exp.seed_base;
  manifest["replications"] = agg.replications;
  manifest["threads"] = exp.threads;
  manifest["rng"] = "mt19937_64 substreams seeded by splitmix64(seed ^ fnv1a64(label)); Box-Muller normals";
  Json excl;
  excl["simulation_failures"] = agg.simulation_failures;
  for (const auto& [k, c] : agg.nonconverged) excl["nonconverged"][std::to_string(k)] = c;
  for (const auto& [k, c] : agg.fit_failures) excl["fit_failures"][std::to_string(k)] = c;
  manifest["exclusions"] = excl;
  manifest["figure_files"] = figure_files;
  manifest["config"] = to_json(exp);
  manifest["seeds"] = agg.seeds;
  auto out = open_out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

}  // namespace factorsde
