#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "metarl/bandit_agents.hpp"
#include "metarl/env.hpp"
#include "metarl/rl2.hpp"
#include "metarl/trpo.hpp"

namespace metarl::harness {

// Task distribution selector parsed from strings such as "bandit:k=5,n=10",
// "mdp:n=10", "maze:size=5,n=2".
struct TaskSetup {
  rl2::TaskFamily family = rl2::TaskFamily::kBandit;
  int k = 5;          // bandit arms
  int maze_size = 5;  // maze side length
  int episodes = 10;  // n, episodes per trial

  env::TaskSpec sample(Rng& rng) const;
  env::TrialConfig trial_config() const;
  std::string text() const;
};

TaskSetup parse_task(const std::string& text);

struct AgentSpec {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
};

struct EvalReport {
  std::string agent;
  nlohmann::json params;
  std::string task;
  std::uint64_t master_seed = 0;
  int instances = 0;
  std::vector<double> per_instance;
  double mean = 0.0;
  double stderr_mean = 0.0;  // sample std / sqrt(count)
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

// Seed namespaces: evaluation instances use ("task", i)/("env", i); tuning
// uses ("tune-task", i)/("tune-env", i) so the sets are disjoint.
enum class SeedSet { kEvaluation, kTuning };

// Runs `agent` for one full trial on each of `instances` seeded tasks.
// `cache_dir` holds Gittins tables ("" disables caching). Parallelism is
// capped by the METARL_WORKERS environment variable (default 1).
EvalReport evaluate(const TaskSetup& setup, const AgentSpec& agent, int instances,
                    std::uint64_t master_seed, const std::string& cache_dir,
                    SeedSet seeds = SeedSet::kEvaluation);

EvalReport evaluate_policy(const TaskSetup& setup, rl2::PolicySnapshot& snapshot,
                           int instances, std::uint64_t master_seed, bool argmax = false,
                           SeedSet seeds = SeedSet::kEvaluation);

struct GridPoint {
  nlohmann::json params;
  double mean = 0.0;
  double stderr_mean = 0.0;
};

struct GridSearchResult {
  AgentSpec best;
  double best_mean = 0.0;
  std::vector<GridPoint> grid;
};

// Evaluates every grid point on the tuning seed set; argmax by mean, ties
// resolved toward the first-listed point.
GridSearchResult grid_search(const TaskSetup& setup, const std::string& agent_name,
                             const std::vector<nlohmann::json>& grid, int instances,
                             std::uint64_t master_seed, const std::string& cache_dir);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_one_sided = 0.0;  // H1: mean(a) > mean(b)
};

WelchResult welch_one_sided(std::span<const double> a, std::span<const double> b);

// True when mean(a) > mean(b) at p = 0.05 (one-sided Welch test).
bool significance(const EvalReport& a, const EvalReport& b);

double normalize_score(double score, double random_score, double reference_score);

struct DistillConfig {
  int dataset_trials = 2000;
  int epochs = 200;
  double step_size = 1e-2;  // Adam step size on mean cross-entropy
  double gittins_gamma = 0.99;
  int gittins_depth = 200;
  int hidden_width = 64;
  std::uint64_t master_seed = 0;
  std::string cache_dir;
};

struct DistillResult {
  rl2::PolicySnapshot snapshot;
  std::vector<double> losses;  // mean cross-entropy per epoch
  double gittins_mean = 0.0;   // teacher score on the dataset trials
};

// Rolls trials under the Gittins policy, then trains a fresh zero-head
// network by teacher-forced cross-entropy on the recorded actions.
DistillResult distill_from_gittins(const TaskSetup& setup, const DistillConfig& config);

struct Table {
  std::string csv;
  std::string text;
};

// rows[i] holds one evaluation setup's reports across agents. In each row the
// best mean and every agent not significantly worse are highlighted.
Table make_table(const std::vector<std::string>& row_names,
                 const std::vector<std::vector<EvalReport>>& rows);

// Default tuning grids per agent name, matching the documented search spaces.
std::vector<nlohmann::json> default_grid(const std::string& agent_name);

int worker_count();

}  // namespace metarl::harness
