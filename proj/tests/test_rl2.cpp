#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "metarl/rl2.hpp"

using namespace metarl;
using namespace metarl::rl2;

namespace {

EmbeddingSpec bandit_embedding(int k) {
  EmbeddingSpec e;
  e.family = TaskFamily::kBandit;
  e.n_actions = k;
  return e;
}

env::TrialEnv make_bandit_env(std::vector<double> means, int episodes) {
  env::BanditSpec spec;
  spec.k = static_cast<int>(means.size());
  spec.arm_means = std::move(means);
  env::TrialConfig config;
  config.episodes_per_trial = episodes;
  return env::TrialEnv(env::TaskSpec{spec}, config);
}

}  // namespace

TEST_CASE("embedding widths: bandit k+3, mdp s+a+2, maze 36") {
  CHECK(bandit_embedding(5).input_width() == 8);
  EmbeddingSpec mdp;
  mdp.family = TaskFamily::kTabularMdp;
  mdp.n_states = 10;
  mdp.n_actions = 5;
  CHECK(mdp.input_width() == 17);
  EmbeddingSpec maze;
  maze.family = TaskFamily::kMaze;
  maze.n_actions = 3;
  CHECK(maze.input_width() == 36);
}

TEST_CASE("embedding: placeholder action maps onto action 0's one-hot") {
  const EmbeddingSpec e = bandit_embedding(5);
  env::AgentInput first;
  first.prev_action = env::kPlaceholderAction;
  const std::vector<double> x = e.embed(first);
  CHECK(x[0] == 0.0);  // constant observation slot
  CHECK(x[1] == 1.0);  // action-0 slot
  for (int i = 2; i < 8; ++i) CHECK(x[static_cast<std::size_t>(i)] == 0.0);

  env::AgentInput later;
  later.prev_action = 3;
  later.prev_reward = 1.0;
  later.prev_done = 1;
  const std::vector<double> y = e.embed(later);
  CHECK(y[4] == 1.0);
  CHECK(y[6] == 1.0);  // reward slot
  CHECK(y[7] == 1.0);  // done slot
}

TEST_CASE("embedding: tabular state one-hot occupies the leading block") {
  EmbeddingSpec e;
  e.family = TaskFamily::kTabularMdp;
  e.n_states = 10;
  e.n_actions = 5;
  env::AgentInput input;
  input.observation = {7};
  input.prev_action = 2;
  input.prev_reward = -0.5;
  const std::vector<double> x = e.embed(input);
  CHECK(x[7] == 1.0);
  CHECK(x[10 + 2] == 1.0);
  CHECK(x[15] == doctest::Approx(-0.5));
  env::AgentInput bad;
  bad.observation = {11};
  CHECK_THROWS_AS(e.embed(bad), InvalidArgument);
}

TEST_CASE("embedding spec round-trips through JSON") {
  const EmbeddingSpec e = bandit_embedding(7);
  nlohmann::json j = e;
  const auto back = j.get<EmbeddingSpec>();
  CHECK(back.family == e.family);
  CHECK(back.n_actions == 7);
}

TEST_CASE("rollout and teacher-forced replay agree on log-probs and values") {
  Rng rng(3);
  PolicySnapshot snapshot = PolicySnapshot::init(rng, bandit_embedding(5), 16);
  env::TrialEnv e = make_bandit_env({0.9, 0.1, 0.5, 0.3, 0.7}, 10);
  Rng action_rng(11), env_rng(12);
  TrialTrajectory trial = run_trial(e, snapshot, action_rng, env_rng);
  CHECK(trial.length() == 10);

  SequenceEval replay = evaluate_sequence(snapshot, trial);
  for (int t = 0; t < trial.length(); ++t) {
    CHECK(replay.log_probs[static_cast<std::size_t>(t)] ==
          doctest::Approx(trial.log_probs[static_cast<std::size_t>(t)]).epsilon(1e-12));
    CHECK(replay.values[static_cast<std::size_t>(t)] ==
          doctest::Approx(trial.values[static_cast<std::size_t>(t)]).epsilon(1e-12));
  }
}

TEST_CASE("hidden state persists across episodes and resets across trials") {
  Rng rng(5);
  PolicySnapshot snapshot = PolicySnapshot::init(rng, bandit_embedding(3), 8);
  PolicyState state(snapshot);
  Rng act_rng(1);

  env::AgentInput input;  // placeholder first input
  state.act(input, act_rng);
  std::vector<double> h1(state.policy_hidden().begin(), state.policy_hidden().end());

  env::AgentInput boundary;  // episode boundary arrives as prev_done = 1
  boundary.prev_action = 1;
  boundary.prev_reward = 1.0;
  boundary.prev_done = 1;
  state.act(boundary, act_rng);
  std::vector<double> h2(state.policy_hidden().begin(), state.policy_hidden().end());
  CHECK(h1 != h2);  // episode end does NOT clear the recurrent state
  CHECK(state.steps() == 2);

  state.reset();  // trial boundary does
  CHECK(state.steps() == 0);
  for (double v : state.policy_hidden()) CHECK(v == 0.0);
}

TEST_CASE("identical seeds give identical trials; different seeds diverge") {
  Rng rng(9);
  PolicySnapshot snapshot = PolicySnapshot::init(rng, bandit_embedding(5), 16);
  auto roll = [&](std::uint64_t a, std::uint64_t b) {
    env::TrialEnv e = make_bandit_env({0.2, 0.4, 0.6, 0.8, 0.5}, 10);
    Rng ar(a), er(b);
    return run_trial(e, snapshot, ar, er);
  };
  const TrialTrajectory t1 = roll(1, 2), t2 = roll(1, 2), t3 = roll(3, 2);
  CHECK(t1.actions == t2.actions);
  CHECK(t1.rewards == t2.rewards);
  CHECK(t1.actions != t3.actions);
}

TEST_CASE("policy graph: at the build point, KL is zero and ratios are one") {
  Rng rng(13);
  PolicySnapshot snapshot = PolicySnapshot::init(rng, bandit_embedding(4), 8);
  env::TrialEnv e = make_bandit_env({0.3, 0.6, 0.1, 0.9}, 6);
  Rng ar(4), er(5);
  TrialTrajectory trial = run_trial(e, snapshot, ar, er);

  std::vector<double> advantages(static_cast<std::size_t>(trial.length()));
  double adv_sum = 0.0;
  for (std::size_t i = 0; i < advantages.size(); ++i) {
    advantages[i] = 0.1 * static_cast<double>(i) - 0.2;
    adv_sum += advantages[i];
  }
  PolicyGraph graph(&snapshot.policy_params);
  build_policy_graph(snapshot, trial, advantages, graph);
  // ratio_t = 1 at the old parameters, so the surrogate sums the advantages.
  CHECK(graph.tape.scalar(graph.surrogate_sum) == doctest::Approx(adv_sum).epsilon(1e-12));
  CHECK(graph.tape.scalar(graph.kl_sum) == doctest::Approx(0.0));

  // Perturbing parameters moves both, and KL becomes strictly positive.
  std::vector<double> theta = snapshot.policy_params.flat_values();
  for (double& v : theta) v += 0.05;
  snapshot.policy_params.set_flat_values(theta);
  graph.tape.recompute();
  CHECK(graph.tape.scalar(graph.kl_sum) > 0.0);
}

TEST_CASE("value graph: loss is the sum of squared errors") {
  Rng rng(21);
  PolicySnapshot snapshot = PolicySnapshot::init(rng, bandit_embedding(3), 8);
  env::TrialEnv e = make_bandit_env({0.5, 0.5, 0.5}, 4);
  Rng ar(1), er(2);
  TrialTrajectory trial = run_trial(e, snapshot, ar, er);

  std::vector<double> returns = {1.0, 0.5, -0.25, 2.0};
  ValueGraph graph(&snapshot.value_params);
  build_value_graph(snapshot, trial, returns, graph);
  double expected = 0.0;
  for (int t = 0; t < 4; ++t) {
    const double v = graph.tape.value(graph.value_nodes[static_cast<std::size_t>(t)])[0];
    expected += (v - returns[static_cast<std::size_t>(t)]) * (v - returns[static_cast<std::size_t>(t)]);
  }
  CHECK(graph.tape.scalar(graph.loss_sum) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("snapshot save/load: parameters and behavior survive the round trip") {
  namespace fs = std::filesystem;
  Rng rng(31);
  PolicySnapshot snapshot = PolicySnapshot::init(rng, bandit_embedding(5), 12);
  const fs::path path = fs::temp_directory_path() / "rl2_snapshot_test.ckpt";
  snapshot.save(path.string());
  PolicySnapshot loaded = PolicySnapshot::load(path.string());
  CHECK(loaded.hidden_width == 12);
  CHECK(loaded.embedding.n_actions == 5);
  CHECK(loaded.policy_params.flat_values() == snapshot.policy_params.flat_values());
  CHECK(loaded.value_params.flat_values() == snapshot.value_params.flat_values());

  env::TrialEnv e1 = make_bandit_env({0.1, 0.9, 0.4, 0.6, 0.2}, 10);
  env::TrialEnv e2 = make_bandit_env({0.1, 0.9, 0.4, 0.6, 0.2}, 10);
  Rng a1(7), v1(8), a2(7), v2(8);
  const TrialTrajectory t1 = run_trial(e1, snapshot, a1, v1);
  const TrialTrajectory t2 = run_trial(e2, loaded, a2, v2);
  CHECK(t1.actions == t2.actions);
  CHECK(t1.log_probs == t2.log_probs);
  fs::remove(path);
}

TEST_CASE("argmax rollouts are deterministic regardless of the action stream") {
  Rng rng(41);
  PolicySnapshot snapshot = PolicySnapshot::init(rng, bandit_embedding(5), 8);
  env::TrialEnv e1 = make_bandit_env({0.5, 0.5, 0.5, 0.5, 0.5}, 8);
  env::TrialEnv e2 = make_bandit_env({0.5, 0.5, 0.5, 0.5, 0.5}, 8);
  Rng a1(1), a2(999), v1(3), v2(3);
  const TrialTrajectory t1 = run_trial(e1, snapshot, a1, v1, /*argmax=*/true);
  const TrialTrajectory t2 = run_trial(e2, snapshot, a2, v2, /*argmax=*/true);
  CHECK(t1.actions == t2.actions);
}
