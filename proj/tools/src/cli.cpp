#include "factorsde/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "factorsde/error.hpp"
#include "factorsde/estimator.hpp"
#include "factorsde/hypothesis_test.hpp"
#include "factorsde/json_io.hpp"
#include "factorsde/mc_harness.hpp"
#include "factorsde/path_io.hpp"
#include "factorsde/sde_sim.hpp"

namespace factorsde::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string subcommand;
  std::string config;
  std::string data;
  std::string out;
  std::string format;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<Index> k;
  std::optional<Index> df_override;
  std::optional<double> alpha;
  std::string regime;
  std::string box;
  std::string weighting;
  std::string objective;
  bool verbose = false;
};

Json read_json_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + file + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::config, "'" + file + "': " + e.what());
  }
}

Json load_config(const Options& o, bool required) {
  Json j = Json::object();
  if (!o.config.empty()) {
    j = read_json_file(o.config);
  } else if (required) {
    throw Error(ErrorCode::config, "--config is required for '" + o.subcommand + "'");
  }
  for (const auto& ov : o.overrides) apply_override(j, ov);
  return j;
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + file.string() + "'");
  out << text;
}

Json manifest(const Options& o, const Json& resolved) {
  Json m;
  m["tool"] = "factorsde";
  m["version"] = kVersion;
  m["subcommand"] = o.subcommand;
  if (!o.config.empty()) m["config_path"] = o.config;
  if (!o.data.empty()) m["data_path"] = o.data;
  m["overrides"] = o.overrides;
  m["config"] = resolved;
  return m;
}

void emit_manifest(const Options& o, const Json& m) {
  if (!o.out.empty()) write_text(o.out + ".manifest.json", m.dump(2) + "\n");
}

std::string fmt(double v, int prec = 6) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

std::vector<std::string> param_names(Index p, Index k) {
  std::vector<std::string> names;
  for (Index c = 0; c < k; ++c) {
    for (Index r = 0; r < p - k; ++r) names.push_back("A(" + std::to_string(r + k + 1) + "," + std::to_string(c + 1) + ")");
  }
  for (Index c = 0; c < k; ++c) {
    for (Index r = c; r < k; ++r) names.push_back("Sigma_ff(" + std::to_string(r + 1) + "," + std::to_string(c + 1) + ")");
  }
  for (Index i = 0; i < p; ++i) names.push_back("sigma2(" + std::to_string(i + 1) + ")");
  return names;
}

void print_fit_table(const FitResult& f, std::ostream& out) {
  const Vector theta = pack(f.theta_hat);
  const auto names = param_names(f.theta_hat.p(), f.theta_hat.k());
  out << std::left << std::setw(16) << "parameter" << std::right << std::setw(14) << "estimate" << std::setw(14) << "se"
      << '\n';
  for (Index j = 0; j < theta.size(); ++j) {
    out << std::left << std::setw(16) << names[static_cast<std::size_t>(j)] << std::right << std::setw(14)
        << fmt(theta(j)) << std::setw(14) << fmt(f.se.size() > j ? f.se(j) : NAN) << '\n';
  }
  out << "contrast " << fmt(f.contrast, 8) << ", iterations " << f.iterations << ", "
      << (f.converged ? "converged" : "NOT converged: " + f.message) << (f.heywood ? ", heywood" : "") << '\n';
}

void print_trail(const std::vector<TestResult>& trail, std::ostream& out) {
  out << std::setw(4) << "k" << std::setw(16) << "statistic" << std::setw(6) << "df" << std::setw(12) << "critical"
      << std::setw(12) << "p_value" << "  decision\n";
  for (const auto& t : trail) {
    out << std::setw(4) << t.k_star << std::setw(16) << fmt(t.statistic, 8) << std::setw(6) << t.df << std::setw(12)
        << fmt(t.critical) << std::setw(12) << fmt(t.p_value, 4) << "  " << (t.reject ? "reject" : "accept");
    if (t.failure) out << " (fit failed: " << *t.failure << ")";
    else if (!t.fit.converged) out << " (not converged)";
    out << '\n';
  }
}

// Inputs shared by fit, test and select.
struct Analysis {
  RealisedCov q;
  ModelSpec spec;
  FitOptions fit;
  std::optional<ParamVector> init;
  double alpha = 0.05;
  std::optional<Index> df_override;
  Json resolved;
};

Analysis prepare_analysis(const Options& o, bool needs_k) {
  if (o.data.empty()) throw Error(ErrorCode::config, "--data is required for '" + o.subcommand + "'");
  Json cfg = load_config(o, false);
  const SamplePath path = load_path(o.data);
  Analysis a;
  a.q = realised_cov(path);
  a.spec.p = a.q.dim();
  a.spec.n = a.q.n;
  a.spec.h = a.q.h;
  if (const auto it = cfg.find("regime"); it != cfg.end()) a.spec.regime = regime_from_string(it->get<std::string>());
  if (!o.regime.empty()) a.spec.regime = regime_from_string(o.regime);
  if (const auto it = cfg.find("p"); it != cfg.end() && it->get<Index>() != a.spec.p) {
    throw Error(ErrorCode::config, "config p = " + std::to_string(it->get<Index>()) + " but data has " +
                                       std::to_string(a.spec.p) + " columns");
  }
  Index k = 1;
  if (const auto it = cfg.find("k"); it != cfg.end()) k = it->get<Index>();
  else if (needs_k && !o.k) throw Error(ErrorCode::config, "missing field 'k': pass --k or set it in the config");
  if (o.k) k = *o.k;
  a.spec.k = k;
  if (needs_k || o.k) {
    if (k < 1 || k >= a.spec.p) throw Error(ErrorCode::config, "k must satisfy 1 <= k < p");
  } else {
    a.spec.k = 1;
  }
  Json fit_json = cfg.contains("fit") ? cfg["fit"] : Json::object();
  if (!o.box.empty()) {
    Json parsed = Json::parse(o.box, nullptr, false);
    if (parsed.is_number()) {
      fit_json["box"] = {{"symmetric", parsed}};
    } else {
      fit_json["box"] = o.box;
    }
  }
  if (!o.weighting.empty()) fit_json["weighting"] = o.weighting;
  if (!o.objective.empty()) fit_json["objective"] = o.objective;
  a.fit = fit_options_from_json(fit_json, a.spec.p, a.spec.k);
  if (cfg.contains("init") && (needs_k || o.k)) a.init = params_from_json(cfg["init"], a.spec.p, a.spec.k);
  if (cfg.contains("alpha")) a.alpha = cfg["alpha"].get<double>();
  if (o.alpha) a.alpha = *o.alpha;
  if (cfg.contains("df_override")) a.df_override = cfg["df_override"].get<Index>();
  if (o.df_override) a.df_override = *o.df_override;

  a.resolved = Json::object();
  a.resolved["p"] = a.spec.p;
  if (needs_k) a.resolved["k"] = a.spec.k;
  a.resolved["regime"] = to_string(a.spec.regime);
  a.resolved["n"] = a.spec.n;
  a.resolved["h"] = a.spec.h;
  a.resolved["alpha"] = a.alpha;
  a.resolved["df_override"] = a.df_override ? Json(*a.df_override) : Json(nullptr);
  a.resolved["fit"] = to_json(a.fit);
  if (a.init) a.resolved["init"] = to_json(*a.init);
  return a;
}

void report(const Options& o, Json body, const std::function<void(std::ostream&)>& table, std::ostream& out) {
  const Json m = body["manifest"];
  if (o.out.empty()) {
    if (o.format == "json") {
      out << body.dump(2) << '\n';
    } else {
      table(out);
    }
    return;
  }
  body.erase("manifest");
  write_text(o.out, body.dump(2) + "\n");
  emit_manifest(o, m);
  table(out);
}

int cmd_simulate(const Options& o, std::ostream& out) {
  Json cfg = load_config(o, true);
  if (o.seed) cfg["seed"] = *o.seed;
  SimConfig c = sim_config_from_json(cfg);
  const Json resolved = to_json(c);
  const SamplePath path = simulate(c);
  if (o.out.empty()) {
    if (o.format == "bin") throw Error(ErrorCode::config, "--format bin needs --out");
    write_path_csv(path, out);
    return kSuccess;
  }
  fs::path file = o.out;
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  {
    std::ofstream f(file, std::ios::binary);
    if (!f) throw Error(ErrorCode::io, "cannot write '" + o.out + "'");
    const bool binary = o.format == "bin" || (o.format.empty() && file.extension() == ".bin");
    if (binary) {
      write_path_binary(path, f);
    } else {
      write_path_csv(path, f);
    }
  }
  emit_manifest(o, manifest(o, resolved));
  out << "simulated " << path.x.rows() - 1 << " steps of h = " << fmt(path.h) << " (T = "
      << fmt(static_cast<double>(path.x.rows() - 1) * path.h) << ") in p = " << path.x.cols() << " coordinates -> "
      << o.out << '\n';
  return kSuccess;
}

int cmd_rcov(const Options& o, std::ostream& out) {
  if (o.data.empty()) throw Error(ErrorCode::config, "--data is required for 'rcov'");
  const RealisedCov q = realised_cov(load_path(o.data));
  std::ostringstream text;
  if (o.format == "json") {
    Json body = to_json(q);
    if (o.out.empty()) body["manifest"] = manifest(o, Json::object());
    text << body.dump(2) << '\n';
  } else {
    text << std::setprecision(17);
    for (Index r = 0; r < q.dim(); ++r) {
      for (Index c = 0; c < q.dim(); ++c) text << (c ? "," : "") << q.q(r, c);
      text << '\n';
    }
  }
  if (o.out.empty()) {
    out << text.str();
  } else {
    write_text(o.out, text.str());
    emit_manifest(o, manifest(o, Json::object()));
    out << "realised covariance of " << q.dim() << " coordinates over T = " << fmt(q.horizon()) << " -> " << o.out
        << '\n';
  }
  return kSuccess;
}

int cmd_fit(const Options& o, std::ostream& out) {
  const Analysis a = prepare_analysis(o, true);
  const FitResult f = fit(a.q, a.spec, a.init, a.fit);
  Json body = to_json(f);
  body["manifest"] = manifest(o, a.resolved);
  report(o, body, [&](std::ostream& s) { print_fit_table(f, s); }, out);
  return f.converged ? kSuccess : kNotConverged;
}

int cmd_test(const Options& o, std::ostream& out) {
  const Analysis a = prepare_analysis(o, true);
  TestOptions opts{a.fit, a.df_override};
  const TestResult t = test_k(a.q, a.spec, a.spec.k, a.alpha, a.init, opts);
  Json body = to_json(t);
  body["manifest"] = manifest(o, a.resolved);
  report(o, body, [&](std::ostream& s) {
    print_fit_table(t.fit, s);
    s << '\n';
    print_trail({t}, s);
  }, out);
  return t.fit.converged ? kSuccess : kNotConverged;
}

int cmd_select(const Options& o, std::ostream& out) {
  const Analysis a = prepare_analysis(o, false);
  TestOptions opts{a.fit, std::nullopt};
  const SelectionResult s = select_k(a.q, a.spec, a.alpha, opts);
  Json body = to_json(s);
  body["manifest"] = manifest(o, a.resolved);
  report(o, body, [&](std::ostream& stream) {
    print_trail(s.trail, stream);
    stream << (s.chosen_k ? "selected k = " + std::to_string(*s.chosen_k) : std::string("no factor structure"))
           << '\n';
  }, out);
  return kSuccess;
}

int cmd_experiment(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw Error(ErrorCode::config, "--out <directory> is required for 'experiment'");
  Json cfg = load_config(o, true);
  if (o.seed) cfg["seed_base"] = *o.seed;
  if (o.threads) cfg["threads"] = *o.threads;
  Experiment exp = experiment_from_json(cfg);
  exp.validate();
  if (o.verbose) err << "running " << exp.replications << " replications of '" << exp.name << "'\n";
  const Aggregate agg = run(exp);
  write_outputs(agg, exp, o.out);

  out << exp.name << ": " << agg.replications << " replications, " << agg.simulation_failures
      << " simulation failures\n";
  auto row = [&](const StatSummary& s) {
    out << std::left << std::setw(14) << s.name << std::right << std::setw(14) << fmt(s.sample_mean) << std::setw(12)
        << fmt(s.true_value) << std::setw(12) << fmt(s.sample_sd, 4) << std::setw(12) << fmt(s.theoretical_sd, 4)
        << std::setw(8) << s.count << '\n';
  };
  out << std::left << std::setw(14) << "statistic" << std::right << std::setw(14) << "mean" << std::setw(12) << "true"
      << std::setw(12) << "sd" << std::setw(12) << "theory_sd" << std::setw(8) << "count" << '\n';
  if (!agg.qxx.empty()) row(agg.qxx.front());
  if (!agg.theta.empty()) row(agg.theta.front());
  for (const auto& s : agg.statistic) row(s);
  for (const auto& r : agg.rejections) {
    out << "k = " << r.k << ", df = " << r.df << ", alpha = " << r.alpha << ": " << r.rejections << " / " << r.tested
        << " rejected (critical " << fmt(r.critical) << ")\n";
  }
  out << "outputs -> " << o.out << '\n';
  return kSuccess;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::io:
    case ErrorCode::invalid_argument:
    case ErrorCode::dimension_mismatch:
      return kConfigError;
    case ErrorCode::untestable:
      return kUntestable;
    case ErrorCode::fit_failed:
      return kNotConverged;
    default:
      return kFailure;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent factor models for multivariate diffusions", "factorsde"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "output file (directory for 'experiment')");
    sub->add_option("--format", o.format, "output format");
    sub->add_option("--override", o.overrides, "config override key.path=value (repeatable)");
    sub->add_flag("-v,--verbose", o.verbose, "progress messages on stderr");
  };
  auto add_analysis = [&](CLI::App* sub) {
    sub->add_option("--data", o.data, "path file (.csv or .bin)");
    sub->add_option("--config", o.config, "JSON analysis config");
    sub->add_option("--alpha", o.alpha, "significance level")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--regime", o.regime, "ergodic or non-ergodic");
    sub->add_option("--box", o.box, "default, wide, or a symmetric bound");
    sub->add_option("--weighting", o.weighting, "iterated or fixed_pilot");
    sub->add_option("--objective", o.objective, "contrast or quasi_likelihood");
    add_common(sub);
    sub->get_option("--format")->check(CLI::IsMember({"json", "table"}));
  };

  auto* sim = app.add_subcommand("simulate", "simulate a sample path");
  sim->add_option("--config", o.config, "simulation config (JSON)");
  sim->add_option("--seed", o.seed, "overrides the config seed");
  add_common(sim);
  sim->get_option("--format")->check(CLI::IsMember({"csv", "bin"}));

  auto* rcov = app.add_subcommand("rcov", "realised covariance of a path");
  rcov->add_option("--data", o.data, "path file (.csv or .bin)");
  add_common(rcov);
  rcov->get_option("--format")->check(CLI::IsMember({"csv", "json"}));

  auto* fitc = app.add_subcommand("fit", "minimum-contrast fit of a k-factor model");
  fitc->add_option("--k", o.k, "number of factors");
  add_analysis(fitc);

  auto* test = app.add_subcommand("test", "chi-squared test of a k-factor model");
  test->add_option("--k", o.k, "number of factors under the null");
  test->add_option("--df-override", o.df_override, "degrees of freedom to use instead of the formula");
  add_analysis(test);

  auto* select = app.add_subcommand("select", "sequential selection of the factor count");
  add_analysis(select);

  auto* exp = app.add_subcommand("experiment", "Monte Carlo experiment");
  exp->add_option("--config", o.config, "experiment config (JSON)");
  exp->add_option("--seed", o.seed, "overrides seed_base");
  exp->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  add_common(exp);
  exp->get_option("--format")->check(CLI::IsMember({"csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigError;
  }

  o.subcommand = app.get_subcommands().front()->get_name();
  try {
    if (o.subcommand == "simulate") return cmd_simulate(o, out);
    if (o.subcommand == "rcov") return cmd_rcov(o, out);
    if (o.subcommand == "fit") return cmd_fit(o, out);
    if (o.subcommand == "test") return cmd_test(o, out);
    if (o.subcommand == "select") return cmd_select(o, out);
    return cmd_experiment(o, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const Json::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace factorsde::cli
