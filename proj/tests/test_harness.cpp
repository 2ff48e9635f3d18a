#include <cmath>
#include <random>

#include "doctest.h"
#include "metarl/harness.hpp"

using namespace metarl;
using namespace metarl::harness;

TEST_CASE("parse_task: all families and parameters") {
  const TaskSetup bandit = parse_task("bandit:k=5,n=100");
  CHECK(bandit.family == rl2::TaskFamily::kBandit);
  CHECK(bandit.k == 5);
  CHECK(bandit.episodes == 100);
  CHECK(bandit.text() == "bandit:k=5,n=100");

  const TaskSetup mdp = parse_task("mdp:n=10");
  CHECK(mdp.family == rl2::TaskFamily::kTabularMdp);
  CHECK(mdp.episodes == 10);

  const TaskSetup maze = parse_task("maze:size=5,n=2");
  CHECK(maze.family == rl2::TaskFamily::kMaze);
  CHECK(maze.maze_size == 5);
  CHECK(maze.episodes == 2);

  CHECK_THROWS_AS(parse_task("chess:n=1"), InvalidArgument);
  CHECK_THROWS_AS(parse_task("bandit:k=0,n=1"), InvalidArgument);
}

TEST_CASE("evaluate: same config twice gives identical per-instance totals") {
  const TaskSetup setup = parse_task("bandit:k=5,n=10");
  const AgentSpec agent{"ucb1", {{"c", 0.2}}};
  const EvalReport a = evaluate(setup, agent, 50, 7, "");
  const EvalReport b = evaluate(setup, agent, 50, 7, "");
  CHECK(a.per_instance == b.per_instance);
  CHECK(a.mean == b.mean);
}

TEST_CASE("evaluate: changing only the agent keeps the instance set paired") {
  // The greedy and random agents see the same tasks and the same reward
  // stream seeds; with a deterministic-best task set, greedy dominates
  // instance-by-instance on average but the pairing is what we verify:
  // random-vs-random with a different name would be identical, so check that
  // two different agents on the same seed differ only through their choices.
  const TaskSetup setup = parse_task("bandit:k=2,n=10");
  const EvalReport r1 = evaluate(setup, {"random", {}}, 100, 3, "");
  const EvalReport r2 = evaluate(setup, {"greedy", {}}, 100, 3, "");
  CHECK(r1.instances == r2.instances);
  CHECK(r1.mean != r2.mean);
  CHECK(r2.mean > r1.mean);  // greedy beats uniform play on average
}

TEST_CASE("evaluate: report statistics match their definition") {
  const TaskSetup setup = parse_task("bandit:k=5,n=10");
  const EvalReport r = evaluate(setup, {"random", {}}, 200, 1, "");
  double mean = 0.0;
  for (double x : r.per_instance) mean += x;
  mean /= r.per_instance.size();
  CHECK(r.mean == doctest::Approx(mean));
  double sq = 0.0;
  for (double x : r.per_instance) sq += (x - mean) * (x - mean);
  const double se = std::sqrt(sq / (r.per_instance.size() - 1)) /
                    std::sqrt(static_cast<double>(r.per_instance.size()));
  CHECK(r.stderr_mean == doctest::Approx(se));
}

TEST_CASE("grid search: singleton grid returns that point") {
  const TaskSetup setup = parse_task("bandit:k=2,n=10");
  const GridSearchResult result =
      grid_search(setup, "ucb1", {nlohmann::json{{"c", 0.3}}}, 50, 5, "");
  CHECK(result.best.name == "ucb1");
  CHECK(result.best.params.at("c").get<double>() == doctest::Approx(0.3));
  CHECK(result.grid.size() == 1);
  CHECK_THROWS_AS(grid_search(setup, "ucb1", {}, 50, 5, ""), InvalidArgument);
}

TEST_CASE("grid search: ties resolve toward the first-listed point") {
  const TaskSetup setup = parse_task("bandit:k=2,n=5");
  // Identical grid points evaluate identically; the first must win.
  const std::vector<nlohmann::json> grid = {{{"c", 0.2}, {"tag", 1}},
                                            {{"c", 0.2}, {"tag", 2}}};
  const GridSearchResult result = grid_search(setup, "ucb1", grid, 30, 5, "");
  CHECK(result.best.params.at("tag").get<int>() == 1);
}

TEST_CASE("grid search: eps=0 dominates eps=1 at n=100") {
  const TaskSetup setup = parse_task("bandit:k=5,n=100");
  const GridSearchResult result = grid_search(
      setup, "egreedy", {{{"epsilon", 0.0}}, {{"epsilon", 1.0}}}, 200, 11, "");
  CHECK(result.best.params.at("epsilon").get<double>() == doctest::Approx(0.0));
}

TEST_CASE("tuning and evaluation instance sets are disjoint") {
  const TaskSetup setup = parse_task("bandit:k=5,n=10");
  const EvalReport eval_set =
      evaluate(setup, {"random", {}}, 100, 7, "", SeedSet::kEvaluation);
  const EvalReport tune_set =
      evaluate(setup, {"random", {}}, 100, 7, "", SeedSet::kTuning);
  // Different seeds -> different tasks -> (almost surely) different totals.
  CHECK(eval_set.per_instance != tune_set.per_instance);
}

TEST_CASE("welch: hand-computed t on {2,4,6} vs {1,3,5}") {
  // means 4 and 3, each sample variance 4, se^2 of mean = 4/3.
  // t = 1 / sqrt(8/3) = 0.612372; Welch df = (8/3)^2 / (2 * (4/3)^2 / 2) = 4.
  const std::vector<double> a = {2, 4, 6}, b = {1, 3, 5};
  const WelchResult w = welch_one_sided(a, b);
  CHECK(w.t == doctest::Approx(0.6123724357));
  CHECK(w.df == doctest::Approx(4.0));
  // One-sided p for t_4 = 0.6124 is ~0.2867 (textbook tables).
  CHECK(w.p_one_sided == doctest::Approx(0.2867).epsilon(0.01));
}

TEST_CASE("welch: identical samples are not significant") {
  const std::vector<double> a = {1, 2, 3, 4}, b = {1, 2, 3, 4};
  const WelchResult w = welch_one_sided(a, b);
  CHECK(w.p_one_sided >= 0.05);
  EvalReport ra, rb;
  ra.per_instance = a;
  rb.per_instance = b;
  CHECK_FALSE(significance(ra, rb));
}

TEST_CASE("welch: Normal(1,1) vs Normal(0,1) with 1000 draws is significant") {
  Rng rng(17);
  std::normal_distribution<double> n1(1.0, 1.0), n0(0.0, 1.0);
  std::vector<double> a(1000), b(1000);
  for (double& x : a) x = n1(rng);
  for (double& x : b) x = n0(rng);
  const WelchResult w = welch_one_sided(a, b);
  CHECK(w.p_one_sided < 1e-6);
  CHECK_THROWS_AS(welch_one_sided(std::vector<double>{1.0}, b), InvalidArgument);
}

TEST_CASE("normalize_score: anchors and the Table-1 example") {
  CHECK(normalize_score(78.3, 49.9, 78.3) == doctest::Approx(1.0));
  CHECK(normalize_score(49.9, 49.9, 78.3) == doctest::Approx(0.0));
  CHECK(normalize_score(78.7, 49.9, 78.3) == doctest::Approx(1.014).epsilon(0.001));
  CHECK_THROWS_AS(normalize_score(1.0, 2.0, 2.0), InvalidArgument);
}

TEST_CASE("make_table: highlighting marks the best and statistical ties") {
  EvalReport strong, weak, tied;
  strong.agent = "strong";
  weak.agent = "weak";
  tied.agent = "tied";
  Rng rng(23);
  std::normal_distribution<double> hi(10.0, 1.0), lo(0.0, 1.0);
  for (int i = 0; i < 400; ++i) {
    strong.per_instance.push_back(hi(rng));
    tied.per_instance.push_back(hi(rng));
    weak.per_instance.push_back(lo(rng));
  }
  auto finish = [](EvalReport& r) {
    double m = 0.0;
    for (double x : r.per_instance) m += x;
    r.mean = m / r.per_instance.size();
    r.instances = static_cast<int>(r.per_instance.size());
  };
  finish(strong);
  finish(weak);
  finish(tied);

  const Table table = make_table({"row"}, {{strong, weak, tied}});
  CHECK(table.csv.find("row,strong,") != std::string::npos);
  // CSV highlight flags: strong=1, weak=0, tied=1.
  CHECK(table.csv.find("strong") < table.csv.find("weak"));
  std::size_t weak_pos = table.csv.find("row,weak");
  std::size_t weak_line_end = table.csv.find('\n', weak_pos);
  const std::string weak_line = table.csv.substr(weak_pos, weak_line_end - weak_pos);
  CHECK(weak_line.back() == '0');
  std::size_t tied_pos = table.csv.find("row,tied");
  const std::string tied_line =
      table.csv.substr(tied_pos, table.csv.find('\n', tied_pos) - tied_pos);
  CHECK(tied_line.back() == '1');

  // Single-agent rows highlight that agent.
  const Table solo = make_table({"solo"}, {{strong}});
  const std::string solo_line = solo.csv.substr(solo.csv.find("solo,strong"));
  CHECK(solo_line.substr(0, solo_line.find('\n')).back() == '1');
}

TEST_CASE("default grids exist for every documented agent") {
  for (const char* name :
       {"random", "greedy", "egreedy", "ucb1", "ts", "ots", "gittins", "psrl",
        "opsrl", "beb", "ucrl2"})
    CHECK_FALSE(default_grid(name).empty());
  CHECK_THROWS_AS(default_grid("mystery"), InvalidArgument);
}

TEST_CASE("distill: zero epochs leaves the zero-head policy uniform") {
  DistillConfig config;
  config.dataset_trials = 20;
  config.epochs = 0;
  config.gittins_depth = 20;
  config.hidden_width = 8;
  const TaskSetup setup = parse_task("bandit:k=5,n=10");
  DistillResult result = distill_from_gittins(setup, config);
  CHECK(result.losses.empty());
  rl2::PolicyState state(result.snapshot);
  Rng rng(1);
  const auto act = state.act(env::AgentInput{}, rng);
  for (double p : act.probs) CHECK(p == doctest::Approx(0.2));
}

TEST_CASE("distill: training loss decreases at small step size") {
  DistillConfig config;
  config.dataset_trials = 40;
  config.epochs = 15;
  config.step_size = 5e-3;
  config.gittins_depth = 20;
  config.hidden_width = 8;
  const TaskSetup setup = parse_task("bandit:k=5,n=10");
  DistillResult result = distill_from_gittins(setup, config);
  REQUIRE(result.losses.size() == 15);
  CHECK(result.losses.front() == doctest::Approx(std::log(5.0)).epsilon(1e-6));
  CHECK(result.losses.back() < result.losses.front());
}
