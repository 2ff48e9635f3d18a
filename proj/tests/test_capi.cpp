#include <cstdio>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "metarl.h"
#include "metarl/rl2.hpp"

namespace {

struct ResponseGuard {
  char* text = nullptr;
  ~ResponseGuard() { metarl_string_free(text); }
  nlohmann::json json() const { return nlohmann::json::parse(text); }
};

std::string temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "metarl_capi_test";
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("capi: eval runs an agent and returns a full report") {
  const nlohmann::json request = {{"task", "bandit:k=5,n=10"},
                                  {"agent", "random"},
                                  {"instances", 50},
                                  {"seed", 3}};
  ResponseGuard response;
  REQUIRE(metarl_eval(request.dump().c_str(), &response.text) == METARL_OK);
  const nlohmann::json report = response.json();
  CHECK(report.at("agent") == "random");
  CHECK(report.at("instances") == 50);
  CHECK(report.at("per_instance").size() == 50);
  CHECK(report.at("mean").get<double>() > 2.0);
  CHECK(report.at("mean").get<double>() < 8.0);

  // Same request -> bit-identical response (seeded determinism through the C
  // boundary).
  ResponseGuard again;
  REQUIRE(metarl_eval(request.dump().c_str(), &again.text) == METARL_OK);
  CHECK(std::string(response.text) == std::string(again.text));
}

TEST_CASE("capi: malformed requests set status and last_error") {
  ResponseGuard response;
  CHECK(metarl_eval("this is not json", &response.text) == METARL_INVALID_ARGUMENT);
  CHECK(std::string(metarl_last_error()) != "");
  CHECK(response.text == nullptr);

  ResponseGuard bad_agent;
  const nlohmann::json request = {
      {"task", "bandit:k=5,n=10"}, {"agent", "mystery"}, {"instances", 5}, {"seed", 0}};
  CHECK(metarl_eval(request.dump().c_str(), &bad_agent.text) ==
        METARL_INVALID_ARGUMENT);
  CHECK(std::string(metarl_last_error()).find("mystery") != std::string::npos);

  CHECK(metarl_eval(nullptr, &response.text) == METARL_INVALID_ARGUMENT);
  CHECK(metarl_eval(request.dump().c_str(), nullptr) == METARL_INVALID_ARGUMENT);
}

TEST_CASE("capi: grid search returns the tuned point") {
  const nlohmann::json request = {{"task", "bandit:k=2,n=10"},
                                  {"agent", "egreedy"},
                                  {"grid", {{{"epsilon", 0.0}}, {{"epsilon", 1.0}}}},
                                  {"instances", 100},
                                  {"seed", 5}};
  ResponseGuard response;
  REQUIRE(metarl_grid_search(request.dump().c_str(), &response.text) == METARL_OK);
  const nlohmann::json result = response.json();
  CHECK(result.at("grid").size() == 2);
  CHECK(result.at("best_params").at("epsilon").get<double>() == doctest::Approx(0.0));
}

TEST_CASE("capi: report builds csv and text tables from eval output") {
  auto run_eval = [](const char* agent) {
    const nlohmann::json request = {
        {"task", "bandit:k=5,n=10"}, {"agent", agent}, {"instances", 60}, {"seed", 9}};
    ResponseGuard response;
    REQUIRE(metarl_eval(request.dump().c_str(), &response.text) == METARL_OK);
    return response.json();
  };
  const nlohmann::json request = {{"reports", {run_eval("random"), run_eval("greedy")}},
                                  {"format", "csv"}};
  ResponseGuard response;
  REQUIRE(metarl_report(request.dump().c_str(), &response.text) == METARL_OK);
  const nlohmann::json tables = response.json();
  CHECK(tables.at("csv").get<std::string>().find("greedy") != std::string::npos);
  CHECK(tables.at("text").get<std::string>().find("greedy") != std::string::npos);
}

TEST_CASE("capi: policy handle loads a checkpoint and steps a trial") {
  // Write a real snapshot to disk first.
  const std::string dir = temp_dir();
  const std::string path = dir + "/policy.ckpt";
  {
    metarl::rl2::EmbeddingSpec embedding;
    embedding.family = metarl::rl2::TaskFamily::kBandit;
    embedding.n_actions = 5;
    metarl::Rng rng(12);
    metarl::rl2::PolicySnapshot snapshot =
        metarl::rl2::PolicySnapshot::init(rng, embedding, 16);
    snapshot.save(path);
  }

  metarl_policy* policy = nullptr;
  REQUIRE(metarl_policy_load(path.c_str(), &policy) == METARL_OK);
  REQUIRE(policy != nullptr);

  REQUIRE(metarl_policy_reset(policy, 42) == METARL_OK);
  std::vector<int32_t> actions;
  int32_t action = -1;
  // First step uses the placeholder action; later steps echo the chosen one.
  REQUIRE(metarl_policy_act(policy, nullptr, 0, -1, 0.0, 0, 0, &action) == METARL_OK);
  CHECK(action >= 0);
  CHECK(action < 5);
  actions.push_back(action);
  for (int t = 1; t < 10; ++t) {
    REQUIRE(metarl_policy_act(policy, nullptr, 0, actions.back(), 1.0, t == 9 ? 1 : 0,
                              0, &action) == METARL_OK);
    CHECK(action >= 0);
    CHECK(action < 5);
    actions.push_back(action);
  }

  // Reset with the same seed replays the identical action sequence.
  REQUIRE(metarl_policy_reset(policy, 42) == METARL_OK);
  std::vector<int32_t> replay;
  REQUIRE(metarl_policy_act(policy, nullptr, 0, -1, 0.0, 0, 0, &action) == METARL_OK);
  replay.push_back(action);
  for (int t = 1; t < 10; ++t) {
    REQUIRE(metarl_policy_act(policy, nullptr, 0, replay.back(), 1.0, t == 9 ? 1 : 0, 0,
                              &action) == METARL_OK);
    replay.push_back(action);
  }
  CHECK(actions == replay);

  // Argmax decoding is deterministic without a reset in between.
  int32_t a1 = -1, a2 = -1;
  REQUIRE(metarl_policy_reset(policy, 1) == METARL_OK);
  REQUIRE(metarl_policy_act(policy, nullptr, 0, -1, 0.0, 0, 1, &a1) == METARL_OK);
  REQUIRE(metarl_policy_reset(policy, 2) == METARL_OK);
  REQUIRE(metarl_policy_act(policy, nullptr, 0, -1, 0.0, 0, 1, &a2) == METARL_OK);
  CHECK(a1 == a2);

  metarl_policy_free(policy);
  metarl_policy_free(nullptr);  // must be a safe no-op
}

TEST_CASE("capi: policy load failures report IO errors") {
  metarl_policy* policy = nullptr;
  CHECK(metarl_policy_load("/nonexistent/nowhere.ckpt", &policy) == METARL_IO_ERROR);
  CHECK(policy == nullptr);
  CHECK(std::string(metarl_last_error()) != "");
}

TEST_CASE("capi: distill endpoint trains and reports a loss curve") {
  const std::string dir = temp_dir();
  const nlohmann::json request = {{"task", "bandit:k=5,n=10"},
                                  {"trials", 20},
                                  {"epochs", 3},
                                  {"hidden_width", 8},
                                  {"gittins_depth", 20},
                                  {"seed", 0},
                                  {"out_dir", dir}};
  ResponseGuard response;
  REQUIRE(metarl_distill(request.dump().c_str(), &response.text) == METARL_OK);
  const nlohmann::json result = response.json();
  CHECK(result.at("losses").size() == 3);
  CHECK(std::filesystem::exists(result.at("checkpoint").get<std::string>()));
}
