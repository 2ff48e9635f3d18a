#include "metarl.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "metarl/harness.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace metarl;

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
metarl_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return METARL_OK;
  } catch (const InvalidArgument& e) {
    g_last_error = e.what();
    return METARL_INVALID_ARGUMENT;
  } catch (const ProtocolViolation& e) {
    g_last_error = e.what();
    return METARL_PROTOCOL_VIOLATION;
  } catch (const NumericalFailure& e) {
    g_last_error = e.what();
    return METARL_NUMERICAL_FAILURE;
  } catch (const IoError& e) {
    g_last_error = e.what();
    return METARL_IO_ERROR;
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return METARL_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return METARL_UNKNOWN_ERROR;
  }
}

json parse_request(const char* request_json) {
  if (request_json == nullptr) throw InvalidArgument("request must not be null");
  return json::parse(request_json);
}

void respond(char** response_json, const json& body) {
  if (response_json == nullptr) throw InvalidArgument("response pointer must not be null");
  *response_json = dup_string(body.dump(2));
  if (*response_json == nullptr) throw IoError("out of memory building response");
}

trpo::TrainConfig train_config_from_json(const json& req, harness::TaskSetup& setup) {
  setup = harness::parse_task(req.at("task").get<std::string>());
  trpo::TrainConfig config;
  config.trial = setup.trial_config();
  config.iterations = req.value("iterations", 300);
  config.master_seed = req.value("seed", std::uint64_t{0});
  config.output_dir = req.value("out_dir", std::string{});
  config.hidden_width = req.value("hidden_width", 64);
  config.checkpoint_interval = req.value("checkpoint_interval", 25);
  if (req.contains("stop_mean_reward"))
    config.stop_mean_reward = req.at("stop_mean_reward").get<double>();
  trpo::TrpoConfig& t = config.trpo;
  t.batch_timesteps = req.value("batch_timesteps", 25000);
  t.gamma = req.value("gamma", 0.99);
  t.lambda = req.value("lambda", setup.family == rl2::TaskFamily::kMaze ? 0.99 : 0.3);
  t.kl_threshold = req.value("kl_threshold", 0.01);
  t.cg_iterations = req.value("cg_iterations", 10);
  t.cg_damping = req.value("cg_damping", 1e-3);
  t.backtracks = req.value("backtracks", 10);
  t.baseline_epochs = req.value("baseline_epochs", 5);
  t.baseline_step_size = req.value("baseline_step_size", 1e-2);
  const std::string rule = req.value("update_rule", std::string{"natural"});
  if (rule == "natural")
    t.update_rule = trpo::UpdateRule::kNatural;
  else if (rule == "first_order")
    t.update_rule = trpo::UpdateRule::kFirstOrder;
  else
    throw InvalidArgument("unknown update_rule: " + rule);
  return config;
}

}  // namespace

extern "C" {

const char* metarl_last_error(void) { return g_last_error.c_str(); }

void metarl_string_free(char* s) { std::free(s); }

metarl_status metarl_eval(const char* request_json, char** response_json) {
  return guarded([&] {
    const json req = parse_request(request_json);
    const harness::TaskSetup setup =
        harness::parse_task(req.at("task").get<std::string>());
    const int instances = req.value("instances", 1000);
    const std::uint64_t seed = req.value("seed", std::uint64_t{0});
    const std::string agent = req.at("agent").get<std::string>();

    harness::EvalReport report;
    if (agent == "policy") {
      rl2::PolicySnapshot snapshot =
          rl2::PolicySnapshot::load(req.at("checkpoint").get<std::string>());
      report = harness::evaluate_policy(setup, snapshot, instances, seed,
                                        req.value("argmax", false));
    } else {
      harness::AgentSpec spec{agent, req.value("params", json::object())};
      report = harness::evaluate(setup, spec, instances, seed,
                                 req.value("cache_dir", std::string{}));
    }
    respond(response_json, json(report));
  });
}

metarl_status metarl_grid_search(const char* request_json, char** response_json) {
  return guarded([&] {
    const json req = parse_request(request_json);
    const harness::TaskSetup setup =
        harness::parse_task(req.at("task").get<std::string>());
    const std::string agent = req.at("agent").get<std::string>();
    std::vector<json> grid;
    if (req.contains("grid"))
      grid = req.at("grid").get<std::vector<json>>();
    else
      grid = harness::default_grid(agent);
    harness::GridSearchResult result = harness::grid_search(
        setup, agent, grid, req.value("instances", 1000),
        req.value("seed", std::uint64_t{0}), req.value("cache_dir", std::string{}));
    json points = json::array();
    for (const harness::GridPoint& p : result.grid)
      points.push_back({{"params", p.params}, {"mean", p.mean}, {"stderr", p.stderr_mean}});
    respond(response_json, json{{"agent", agent},
                                {"best_params", result.best.params},
                                {"best_mean", result.best_mean},
                                {"grid", points}});
  });
}

metarl_status metarl_train(const char* request_json, char** response_json) {
  return guarded([&] {
    const json req = parse_request(request_json);
    harness::TaskSetup setup;
    const trpo::TrainConfig config = train_config_from_json(req, setup);

    rl2::EmbeddingSpec embedding;
    embedding.family = setup.family;
    embedding.n_actions = setup.family == rl2::TaskFamily::kMaze ? 3 : 5;
    if (setup.family == rl2::TaskFamily::kBandit) embedding.n_actions = setup.k;
    if (setup.family == rl2::TaskFamily::kTabularMdp) embedding.n_states = 10;

    Rng init_rng(stream_seed(config.master_seed, "init", 0));
    rl2::PolicySnapshot snapshot =
        rl2::PolicySnapshot::init(init_rng, embedding, config.hidden_width);
    const trpo::TrainResult result = trpo::train(
        [&setup](Rng& rng) { return setup.sample(rng); }, snapshot, config);

    json history = json::array();
    for (const trpo::IterationRecord& rec : result.history)
      history.push_back({{"iteration", rec.iteration},
                         {"mean_trial_reward", rec.mean_trial_reward},
                         {"mean_kl", rec.mean_kl},
                         {"entropy", rec.entropy},
                         {"wall_clock_s", rec.wall_clock_s}});
    json body{{"iterations_run", result.iterations_run},
              {"best_mean_reward", result.best_mean_reward},
              {"history", history}};
    if (!config.output_dir.empty())
      body["checkpoint"] = (fs::path(config.output_dir) / "policy.ckpt").string();
    respond(response_json, body);
  });
}

metarl_status metarl_distill(const char* request_json, char** response_json) {
  return guarded([&] {
    const json req = parse_request(request_json);
    const harness::TaskSetup setup =
        harness::parse_task(req.at("task").get<std::string>());
    harness::DistillConfig config;
    config.dataset_trials = req.value("trials", config.dataset_trials);
    config.epochs = req.value("epochs", config.epochs);
    config.step_size = req.value("step_size", config.step_size);
    config.hidden_width = req.value("hidden_width", config.hidden_width);
    config.gittins_gamma = req.value("gamma", config.gittins_gamma);
    config.gittins_depth = req.value("gittins_depth", config.gittins_depth);
    config.master_seed = req.value("seed", std::uint64_t{0});
    config.cache_dir = req.value("cache_dir", std::string{});

    harness::DistillResult result = harness::distill_from_gittins(setup, config);
    json body{{"losses", result.losses}, {"gittins_mean", result.gittins_mean}};
    const std::string out_dir = req.value("out_dir", std::string{});
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      const std::string ckpt = (fs::path(out_dir) / "distilled.ckpt").string();
      result.snapshot.save(ckpt);
      body["checkpoint"] = ckpt;
    }
    respond(response_json, body);
  });
}

metarl_status metarl_report(const char* request_json, char** response_json) {
  return guarded([&] {
    const json req = parse_request(request_json);
    std::vector<std::string> row_names;
    std::vector<std::vector<harness::EvalReport>> rows;
    std::map<std::string, std::size_t> row_index;
    for (const json& item : req.at("reports")) {
      harness::EvalReport report = item.get<harness::EvalReport>();
      auto [it, inserted] = row_index.try_emplace(report.task, rows.size());
      if (inserted) {
        row_names.push_back(report.task);
        rows.emplace_back();
      }
      rows[it->second].push_back(std::move(report));
    }
    harness::Table table = harness::make_table(row_names, rows);
    respond(response_json, json{{"csv", table.csv}, {"text", table.text}});
  });
}

struct metarl_policy {
  metarl::rl2::PolicySnapshot snapshot;
  std::unique_ptr<metarl::rl2::PolicyState> state;
  metarl::Rng rng{0};
};

metarl_status metarl_policy_load(const char* checkpoint_path, metarl_policy** out) {
  return guarded([&] {
    if (checkpoint_path == nullptr || out == nullptr)
      throw InvalidArgument("metarl_policy_load: null argument");
    auto policy = std::make_unique<metarl_policy>();
    policy->snapshot = rl2::PolicySnapshot::load(checkpoint_path);
    policy->state = std::make_unique<rl2::PolicyState>(policy->snapshot);
    *out = policy.release();
  });
}

void metarl_policy_free(metarl_policy* policy) { delete policy; }

metarl_status metarl_policy_reset(metarl_policy* policy, uint64_t seed) {
  return guarded([&] {
    if (policy == nullptr) throw InvalidArgument("metarl_policy_reset: null policy");
    policy->state->reset();
    policy->rng.seed(seed);
  });
}

metarl_status metarl_policy_act(metarl_policy* policy, const int32_t* observation,
                                int32_t observation_len, int32_t prev_action,
                                double prev_reward, int32_t prev_done, int32_t argmax,
                                int32_t* action_out) {
  return guarded([&] {
    if (policy == nullptr || action_out == nullptr)
      throw InvalidArgument("metarl_policy_act: null argument");
    if (observation_len < 0 || (observation_len > 0 && observation == nullptr))
      throw InvalidArgument("metarl_policy_act: bad observation buffer");
    env::AgentInput input;
    input.observation.assign(observation, observation + observation_len);
    input.prev_action = prev_action;
    input.prev_reward = prev_reward;
    input.prev_done = prev_done;
    const rl2::PolicyState::ActResult result =
        policy->state->act(input, policy->rng, argmax != 0);
    *action_out = result.action;
  });
}

}  // extern "C"
