#include "factorsde/json_io.hpp"

#include <cmath>
#include <string>

#include "factorsde/error.hpp"

namespace factorsde {

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::config, where + ": " + what);
}

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) config_error(where, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) config_error(where, std::string("missing field '") + key + "'");
  return *it;
}

const Json* optional_field(const Json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

double as_double(const Json& j, const std::string& where) {
  if (!j.is_number()) config_error(where, "expected a number");
  return j.get<double>();
}

Index as_index(const Json& j, const std::string& where) {
  if (!j.is_number_integer() && !(j.is_number() && std::floor(j.get<double>()) == j.get<double>())) {
    config_error(where, "expected an integer");
  }
  return j.is_number_integer() ? j.get<Index>() : static_cast<Index>(j.get<double>());
}

Vector as_vector(const Json& j, const std::string& where) {
  if (!j.is_array()) config_error(where, "expected an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = as_double(j[i], where);
  return v;
}

Vector as_vector(const Json& j, Index len, const std::string& where) {
  Vector v = as_vector(j, where);
  if (v.size() != len) config_error(where, "expected " + std::to_string(len) + " values, got " + std::to_string(v.size()));
  return v;
}

// Nested rows, or a flat row-major array.
Matrix as_matrix(const Json& j, Index rows, Index cols, const std::string& where) {
  if (!j.is_array()) config_error(where, "expected an array");
  Matrix m(rows, cols);
  if (!j.empty() && j[0].is_array()) {
    if (static_cast<Index>(j.size()) != rows) config_error(where, "expected " + std::to_string(rows) + " rows");
    for (Index r = 0; r < rows; ++r) m.row(r) = as_vector(j[static_cast<std::size_t>(r)], cols, where).transpose();
  } else {
    const Vector flat = as_vector(j, rows * cols, where);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) m(r, c) = flat(r * cols + c);
    }
  }
  return m;
}

Matrix as_square(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) config_error(where, "expected a nested square array");
  const auto n = static_cast<Index>(j.size());
  return as_matrix(j, n, n, where);
}

Json rows_of(const Matrix& m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Json values_of(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) {
      out.push_back(v(i));
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

const char* scheme_name(Scheme s) { return s == Scheme::euler ? "euler" : "exact_ou"; }

Json drift_to_json(const DriftSpec& d) {
  Json j;
  if (d.is_linear()) {
    j["kind"] = "linear_ou";
    j["B"] = rows_of(d.linear().b);
    j["mu"] = values_of(d.linear().mu);
  } else {
    j["kind"] = "custom";
    j["name"] = d.custom().name;
    j["lipschitz"] = d.custom().lipschitz;
  }
  return j;
}

std::string kind_of(const Json& j, const std::string& where) {
  const Json* kind = optional_field(j, "kind");
  if (!kind) return "linear_ou";
  if (!kind->is_string()) config_error(where, "'kind' must be a string");
  const auto s = kind->get<std::string>();
  if (s == "custom") config_error(where, "custom drifts cannot be loaded from JSON; use the library API");
  if (s != "linear_ou") config_error(where, "unknown drift kind '" + s + "'");
  return s;
}

}  // namespace

Json to_json(const ModelSpec& spec) {
  Json j;
  j["p"] = spec.p;
  j["k"] = spec.k;
  j["regime"] = to_string(spec.regime);
  j["n"] = spec.n;
  j["h"] = spec.h;
  return j;
}

ModelSpec model_spec_from_json(const Json& j) {
  const std::string where = "model";
  ModelSpec spec;
  spec.p = as_index(field(j, "p", where), where + ".p");
  spec.k = as_index(field(j, "k", where), where + ".k");
  spec.n = as_index(field(j, "n", where), where + ".n");
  spec.h = as_double(field(j, "h", where), where + ".h");
  if (const Json* r = optional_field(j, "regime")) {
    if (!r->is_string()) config_error(where + ".regime", "expected a string");
    spec.regime = regime_from_string(r->get<std::string>());
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    config_error(where, e.what());
  }
  return spec;
}

Json to_json(const ParamVector& params) {
  Json j;
  j["A"] = rows_of(params.a);
  j["sigma_ff"] = values_of(vech(params.sigma_ff));
  j["sigma_ee"] = values_of(params.sigma_ee);
  return j;
}

ParamVector params_from_json(const Json& j, Index p, Index k) {
  const std::string where = "params";
  ParamVector out;
  out.a = as_matrix(field(j, "A", where), p - k, k, where + ".A");
  try {
    out.sigma_ff = unvech(as_vector(field(j, "sigma_ff", where), sym_size(k), where + ".sigma_ff"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    config_error(where + ".sigma_ff", e.what());
  }
  out.sigma_ee = as_vector(field(j, "sigma_ee", where), p, where + ".sigma_ee");
  return out;
}

Json model_to_json(const ModelSpec& spec, const ParamVector& params) {
  Json j = to_json(spec);
  const Json extra = to_json(params);
  for (const auto& [key, value] : extra.items()) j[key] = value;
  return j;
}

Json to_json(const SimConfig& c) {
  Json j;
  j["model"] = model_to_json(c.spec, c.params);
  Json factor;
  factor["drift"] = drift_to_json(c.factor_drift);
  factor["S"] = rows_of(c.factor_dispersion);
  factor["f0"] = values_of(c.f0);
  j["factor"] = factor;
  Json unique;
  bool all_linear = true;
  for (const auto& d : c.unique_drifts) all_linear = all_linear && d.is_linear();
  if (all_linear) {
    Vector b(c.spec.p), mu(c.spec.p);
    for (Index i = 0; i < c.spec.p; ++i) {
      b(i) = c.unique_drifts[static_cast<std::size_t>(i)].linear().b(0, 0);
      mu(i) = c.unique_drifts[static_cast<std::size_t>(i)].linear().mu(0);
    }
    unique["drift"] = {{"kind", "linear_ou"}, {"B", values_of(b)}, {"mu", values_of(mu)}};
  } else {
    Json list = Json::array();
    for (const auto& d : c.unique_drifts) list.push_back(drift_to_json(d));
    unique["drift"] = list;
  }
  unique["sigma"] = values_of(c.unique_dispersions);
  unique["e0"] = values_of(c.e0);
  j["unique"] = unique;
  j["seed"] = c.seed;
  j["substeps"] = c.substeps;
  j["scheme"] = scheme_name(c.scheme);
  j["retain_latents"] = c.retain_latents;
  return j;
}

SimConfig sim_config_from_json(const Json& j) {
  const Json& model = field(j, "model", "simulation");
  const ModelSpec spec = model_spec_from_json(model);
  const Index p = spec.p;
  const Index k = spec.k;
  const Matrix a = as_matrix(field(model, "A", "model"), p - k, k, "model.A");

  const Json& factor = field(j, "factor", "simulation");
  const Json& fdrift = field(factor, "drift", "factor");
  kind_of(fdrift, "factor.drift");
  DriftSpec factor_drift;
  try {
    factor_drift = DriftSpec::linear_ou(as_square(field(fdrift, "B", "factor.drift"), "factor.drift.B"),
                                        as_vector(field(fdrift, "mu", "factor.drift"), "factor.drift.mu"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    config_error("factor.drift", e.what());
  }
  const Json& s_json = field(factor, "S", "factor");
  if (!s_json.is_array() || s_json.empty() || !s_json[0].is_array()) {
    config_error("factor.S", "expected a nested k x r array");
  }
  const Matrix s = as_matrix(s_json, k, static_cast<Index>(s_json[0].size()), "factor.S");
  const Vector f0 = as_vector(field(factor, "f0", "factor"), k, "factor.f0");

  const Json& unique = field(j, "unique", "simulation");
  const Json& udrift = field(unique, "drift", "unique");
  std::vector<DriftSpec> unique_drifts;
  if (udrift.is_array()) {
    if (static_cast<Index>(udrift.size()) != p) config_error("unique.drift", "expected p drift objects");
    for (const auto& d : udrift) {
      kind_of(d, "unique.drift");
      unique_drifts.push_back(DriftSpec::scalar_ou(as_double(field(d, "B", "unique.drift"), "unique.drift.B"),
                                                   as_double(field(d, "mu", "unique.drift"), "unique.drift.mu")));
    }
  } else {
    kind_of(udrift, "unique.drift");
    const Vector b = as_vector(field(udrift, "B", "unique.drift"), p, "unique.drift.B");
    const Vector mu = as_vector(field(udrift, "mu", "unique.drift"), p, "unique.drift.mu");
    for (Index i = 0; i < p; ++i) unique_drifts.push_back(DriftSpec::scalar_ou(b(i), mu(i)));
  }
  const Vector sigma = as_vector(field(unique, "sigma", "unique"), p, "unique.sigma");
  const Vector e0 = as_vector(field(unique, "e0", "unique"), p, "unique.e0");

  std::uint64_t seed = 0;
  if (const Json* sj = optional_field(j, "seed")) {
    if (!sj->is_number_integer()) config_error("simulation.seed", "expected an integer");
    seed = sj->get<std::uint64_t>();
  }
  SimConfig c = make_sim_config(spec, a, std::move(factor_drift), s, std::move(unique_drifts), sigma, f0, e0, seed);
  if (const Json* ff = optional_field(model, "sigma_ff")) {
    const Vector given = as_vector(*ff, sym_size(k), "model.sigma_ff");
    if ((given - vech(c.params.sigma_ff)).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + given.cwiseAbs().maxCoeff())) {
      config_error("model.sigma_ff", "does not equal S S'");
    }
  }
  if (const Json* ee = optional_field(model, "sigma_ee")) {
    const Vector given = as_vector(*ee, p, "model.sigma_ee");
    if ((given - c.params.sigma_ee).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + given.cwiseAbs().maxCoeff())) {
      config_error("model.sigma_ee", "does not equal unique.sigma squared");
    }
  }
  if (const Json* v = optional_field(j, "substeps")) c.substeps = static_cast<int>(as_index(*v, "simulation.substeps"));
  if (const Json* v = optional_field(j, "scheme")) {
    const auto name = v->get<std::string>();
    if (name == "euler") {
      c.scheme = Scheme::euler;
    } else if (name == "exact_ou") {
      c.scheme = Scheme::exact_ou;
    } else {
      config_error("simulation.scheme", "expected 'euler' or 'exact_ou'");
    }
  }
  if (const Json* v = optional_field(j, "retain_latents")) c.retain_latents = v->get<bool>();
  try {
    c.validate();
  } catch (const Error& e) {
    config_error("simulation", e.what());
  }
  return c;
}

Json to_json(const RealisedCov& q) {
  Json j;
  j["p"] = q.dim();
  j["n"] = q.n;
  j["h"] = q.h;
  j["T"] = q.horizon();
  j["q"] = rows_of(q.q.matrix());
  j["vech"] = values_of(vech(q.q));
  return j;
}

Json to_json(const FitResult& f) {
  Json j;
  j["p"] = f.theta_hat.p();
  j["k"] = f.theta_hat.k();
  j["n"] = f.n;
  j["theta"] = values_of(pack(f.theta_hat));
  j["se"] = values_of(f.se);
  j["contrast"] = number_or_null(f.contrast);
  j["objective_value"] = number_or_null(f.objective_value);
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  j["gradient_norm"] = number_or_null(f.gradient_norm);
  j["message"] = f.message;
  j["heywood"] = f.heywood;
  j["min_factor_eigenvalue"] = number_or_null(f.min_factor_eigenvalue);
  j["params"] = to_json(f.theta_hat);
  return j;
}

Json to_json(const TestResult& t) {
  Json j;
  j["k"] = t.k_star;
  j["statistic"] = number_or_null(t.statistic);
  j["df"] = t.df;
  j["alpha"] = t.alpha;
  j["critical"] = t.critical;
  j["p_value"] = number_or_null(t.p_value);
  j["reject"] = t.reject;
  if (t.failure) {
    j["failure"] = *t.failure;
  } else {
    j["fit"] = to_json(t.fit);
  }
  return j;
}

Json to_json(const SelectionResult& s) {
  Json j;
  j["chosen_k"] = s.chosen_k ? Json(*s.chosen_k) : Json(nullptr);
  j["conclusion"] = s.chosen_k ? "k=" + std::to_string(*s.chosen_k) : std::string("no factor structure");
  Json trail = Json::array();
  for (const auto& t : s.trail) trail.push_back(to_json(t));
  j["trail"] = trail;
  return j;
}

Json to_json(const FitOptions& o) {
  Json j;
  j["grad_tol"] = o.grad_tol;
  j["step_tol"] = o.step_tol;
  j["max_iter"] = o.max_iter;
  if (o.box) {
    j["box"] = {{"lower", values_of(o.box->lower)}, {"upper", values_of(o.box->upper)}};
  } else if (o.box_bound && std::isinf(*o.box_bound)) {
    j["box"] = "unbounded";
  } else if (o.box_bound) {
    j["box"] = {{"symmetric", *o.box_bound}};
  } else {
    j["box"] = "default";
  }
  j["objective"] = o.objective == Objective::contrast ? "contrast" : "quasi_likelihood";
  j["weighting"] = o.weighting == Weighting::iterated ? "iterated" : "fixed_pilot";
  return j;
}

FitOptions fit_options_from_json(const Json& j, Index p, Index k) {
  FitOptions o;
  if (j.is_null()) return o;
  if (!j.is_object()) config_error("fit", "expected an object");
  if (const Json* v = optional_field(j, "grad_tol")) o.grad_tol = as_double(*v, "fit.grad_tol");
  if (const Json* v = optional_field(j, "step_tol")) o.step_tol = as_double(*v, "fit.step_tol");
  if (const Json* v = optional_field(j, "max_iter")) o.max_iter = static_cast<int>(as_index(*v, "fit.max_iter"));
  if (const Json* v = optional_field(j, "box")) {
    if (v->is_string()) {
      const auto name = v->get<std::string>();
      if (name == "wide") {
        o.box_bound = 30.0;
      } else if (name == "unbounded") {
        o.box_bound = INFINITY;
      } else if (name != "default") config_error("fit.box", "expected 'default', 'wide', 'unbounded', {\"symmetric\": b} or {\"lower\", \"upper\"}");
    } else if (const Json* sym = optional_field(*v, "symmetric")) {
      o.box_bound = as_double(*sym, "fit.box.symmetric");
    } else {
      const Index q = param_count(p, k);
      Box box;
      const Json& lo = field(*v, "lower", "fit.box");
      const Json& hi = field(*v, "upper", "fit.box");
      auto read_bound = [&](const Json& b, const char* where, double missing) {
        if (b.is_number()) return Vector::Constant(q, b.get<double>()).eval();
        Vector out(q);
        if (!b.is_array() || static_cast<Index>(b.size()) != q) config_error(where, "expected a number or q values");
        for (Index i = 0; i < q; ++i) {
          const Json& e = b[static_cast<std::size_t>(i)];
          out(i) = e.is_null() ? missing : as_double(e, where);
        }
        return out;
      };
      box.lower = read_bound(lo, "fit.box.lower", -INFINITY);
      box.upper = read_bound(hi, "fit.box.upper", INFINITY);
      o.box = box;
    }
  }
  if (const Json* v = optional_field(j, "objective")) {
    const auto name = v->get<std::string>();
    if (name == "contrast") {
      o.objective = Objective::contrast;
    } else if (name == "quasi_likelihood") {
      o.objective = Objective::quasi_likelihood;
    } else {
      config_error("fit.objective", "expected 'contrast' or 'quasi_likelihood'");
    }
  }
  if (const Json* v = optional_field(j, "weighting")) {
    const auto name = v->get<std::string>();
    if (name == "iterated") {
      o.weighting = Weighting::iterated;
    } else if (name == "fixed_pilot") {
      o.weighting = Weighting::fixed_pilot;
    } else {
      config_error("fit.weighting", "expected 'iterated' or 'fixed_pilot'");
    }
  }
  return o;
}

Json to_json(const Experiment& e) {
  Json j;
  j["name"] = e.name;
  j["simulation"] = to_json(e.sim);
  j["simulation"].erase("seed");
  j["replications"] = e.replications;
  j["seed_base"] = e.seed_base;
  j["threads"] = e.threads;
  j["k_grid"] = e.k_grid;
  j["alphas"] = e.alphas;
  Json dfo = Json::object();
  for (const auto& [k, df] : e.df_override) dfo[std::to_string(k)] = df;
  j["df_override"] = dfo;
  j["init"] = e.init == InitStrategy::truth ? "truth" : "default";
  j["fit"] = to_json(e.fit);
  j["retain_draws"] = e.retain_draws;
  j["outputs"] = e.outputs;
  j["figures"] = e.figures;
  return j;
}

Experiment experiment_from_json(const Json& j) {
  if (!j.is_object()) config_error("experiment", "expected an object");
  Experiment e;
  if (const Json* v = optional_field(j, "name")) e.name = v->get<std::string>();
  e.sim = sim_config_from_json(field(j, "simulation", "experiment"));
  e.replications = as_index(field(j, "replications", "experiment"), "experiment.replications");
  if (e.replications < 1) config_error("experiment", "replications must be >= 1");
  const Json* seed = optional_field(j, "seed_base");
  if (!seed) seed = optional_field(j, "seed");
  if (seed) {
    if (!seed->is_number_integer()) config_error("experiment.seed_base", "expected an integer");
    e.seed_base = seed->get<std::uint64_t>();
  }
  if (const Json* v = optional_field(j, "threads")) e.threads = static_cast<unsigned>(as_index(*v, "experiment.threads"));
  if (const Json* v = optional_field(j, "k_grid")) {
    e.k_grid.clear();
    for (const auto& k : *v) e.k_grid.push_back(as_index(k, "experiment.k_grid"));
  } else {
    e.k_grid = {e.sim.spec.k};
  }
  if (const Json* v = optional_field(j, "alphas")) {
    e.alphas.clear();
    for (const auto& a : *v) e.alphas.push_back(as_double(a, "experiment.alphas"));
  }
  if (const Json* v = optional_field(j, "df_override")) {
    for (const auto& [key, value] : v->items()) e.df_override[std::stoll(key)] = as_index(value, "experiment.df_override");
  }
  if (const Json* v = optional_field(j, "init")) {
    const auto name = v->get<std::string>();
    if (name == "truth") {
      e.init = InitStrategy::truth;
    } else if (name == "default") {
      e.init = InitStrategy::heuristic;
    } else {
      config_error("experiment.init", "expected 'truth' or 'default'");
    }
  }
  if (const Json* v = optional_field(j, "fit")) e.fit = fit_options_from_json(*v, e.sim.spec.p, e.sim.spec.k);
  if (const Json* v = optional_field(j, "retain_draws")) e.retain_draws = v->get<bool>();
  if (const Json* v = optional_field(j, "outputs")) {
    e.outputs.clear();
    for (const auto& o : *v) e.outputs.insert(o.get<std::string>());
  }
  if (const Json* v = optional_field(j, "figures")) {
    for (const auto& f : *v) e.figures.push_back(f.get<std::string>());
  }
  return e;
}

void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::config, "override '" + assignment + "' must look like key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw Error(ErrorCode::config, "override '" + assignment + "' has an empty key");
    if (!node->is_object()) throw Error(ErrorCode::config, "override '" + assignment + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

}  // namespace factorsde
