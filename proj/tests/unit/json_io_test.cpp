#include <gtest/gtest.h>

#include <factorsde/error.hpp>
#include <factorsde/json_io.hpp>

#include "example_model.hpp"

namespace factorsde {
namespace {

Json example_sim_json() {
  return Json::parse(R"({
    "model": {"p": 6, "k": 2, "regime": "non-ergodic", "n": 1000, "h": 0.001,
              "A": [[3, 1], [1, 5], [7, -4], [-3, 2]]},
    "factor": {"drift": {"kind": "linear_ou", "B": [[0.5, 0.3], [0.2, 0.4]], "mu": [2, 4]},
               "S": [[2, 3], [5, 1]], "f0": [3, 5]},
    "unique": {"drift": {"kind": "linear_ou", "B": [3, 2, 3, 2, 6, 2], "mu": [0, 0, 0, 0, 0, 0]},
               "sigma": [2, 4, 5, 1, 3, 2], "e0": [0, 0, 0, 0, 0, 0]},
    "seed": 5
  })");
}

std::string config_error_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
    return e.what();
  }
  ADD_FAILURE() << "no error";
  return {};
}

TEST(SimConfigJson, ParsesExampleAndDerivesParams) {
  const SimConfig c = sim_config_from_json(example_sim_json());
  EXPECT_EQ(pack(c.params), testing::example_theta());
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.spec.regime, Regime::non_ergodic);
  EXPECT_EQ(simulate(c).x, simulate(testing::example_sim(1000, 1e-3, 5)).x);
}

TEST(SimConfigJson, RoundTrip) {
  const SimConfig c = sim_config_from_json(example_sim_json());
  const SimConfig back = sim_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(SimConfigJson, FlatLoadingsAccepted) {
  Json j = example_sim_json();
  j["model"]["A"] = {3, 1, 1, 5, 7, -4, -3, 2};
  EXPECT_EQ(sim_config_from_json(j).params.a, testing::example_a());
}

TEST(SimConfigJson, MissingFieldNamed) {
  Json j = example_sim_json();
  j["model"].erase("h");
  const std::string msg = config_error_message([&] { sim_config_from_json(j); });
  EXPECT_NE(msg.find("'h'"), std::string::npos) << msg;
}

TEST(SimConfigJson, InconsistentSigmaRejected) {
  Json j = example_sim_json();
  j["model"]["sigma_ee"] = {4, 16, 25, 1, 9, 5};
  const std::string msg = config_error_message([&] { sim_config_from_json(j); });
  EXPECT_NE(msg.find("sigma_ee"), std::string::npos);
}

TEST(SimConfigJson, WrongLengthNamed) {
  Json j = example_sim_json();
  j["unique"]["sigma"] = {1, 2};
  const std::string msg = config_error_message([&] { sim_config_from_json(j); });
  EXPECT_NE(msg.find("unique.sigma"), std::string::npos);
}

TEST(ParamsJson, RoundTrip) {
  const Json j = to_json(testing::example_params());
  const ParamVector back = params_from_json(j, 6, 2);
  EXPECT_EQ(pack(back), testing::example_theta());
  EXPECT_EQ(j["sigma_ff"], Json::parse("[13.0, 13.0, 26.0]"));
}

TEST(ModelJson, Fields) {
  const Json j = model_to_json(testing::example_spec(1000, 1e-3), testing::example_params());
  for (const char* key : {"p", "k", "regime", "n", "h", "A", "sigma_ff", "sigma_ee"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(model_spec_from_json(j).k, 2);
}

TEST(FitOptionsJson, Boxes) {
  EXPECT_FALSE(fit_options_from_json(Json::parse(R"({"box": "default"})"), 6, 2).box_bound);
  EXPECT_EQ(*fit_options_from_json(Json::parse(R"({"box": "wide"})"), 6, 2).box_bound, 30.0);
  EXPECT_TRUE(std::isinf(*fit_options_from_json(Json::parse(R"({"box": "unbounded"})"), 6, 2).box_bound));
  EXPECT_EQ(*fit_options_from_json(Json::parse(R"({"box": {"symmetric": 5}})"), 6, 2).box_bound, 5.0);
  const FitOptions explicit_box = fit_options_from_json(Json::parse(R"({"box": {"lower": -1, "upper": 1}})"), 6, 2);
  ASSERT_TRUE(explicit_box.box);
  EXPECT_EQ(explicit_box.box->size(), 17);
  EXPECT_THROW(fit_options_from_json(Json::parse(R"({"weighting": "sometimes"})"), 6, 2), Error);
}

TEST(ExperimentJson, ParseAndRoundTrip) {
  Json j;
  j["name"] = "t";
  j["simulation"] = example_sim_json();
  j["replications"] = 7;
  j["seed_base"] = 3;
  j["k_grid"] = {1, 2};
  j["df_override"] = {{"1", 10}};
  j["fit"] = {{"box", "unbounded"}, {"max_iter", 50}};
  const Experiment e = experiment_from_json(j);
  EXPECT_EQ(e.replications, 7);
  EXPECT_EQ(e.df_override.at(1), 10);
  EXPECT_EQ(e.fit.max_iter, 50);
  const Experiment back = experiment_from_json(to_json(e));
  EXPECT_EQ(to_json(back).dump(), to_json(e).dump());
}

TEST(ExperimentJson, ZeroReplications) {
  Json j;
  j["simulation"] = example_sim_json();
  j["replications"] = 0;
  const std::string msg = config_error_message([&] { experiment_from_json(j); });
  EXPECT_NE(msg.find("replications must be >= 1"), std::string::npos);
}

TEST(ApplyOverride, NestedPathsAndTypes) {
  Json j = example_sim_json();
  apply_override(j, "model.n=50");
  apply_override(j, "scheme=exact_ou");
  apply_override(j, "new.branch.value=[1,2]");
  EXPECT_EQ(j["model"]["n"], 50);
  EXPECT_EQ(j["scheme"], "exact_ou");
  EXPECT_EQ(j["new"]["branch"]["value"], Json::parse("[1,2]"));
  EXPECT_THROW(apply_override(j, "novalue"), Error);
  EXPECT_THROW(apply_override(j, "model.n.deeper=1"), Error);
}

}  // namespace
}  // namespace factorsde
