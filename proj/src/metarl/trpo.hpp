#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metarl/env.hpp"
#include "metarl/rl2.hpp"

namespace metarl::trpo {

enum class UpdateRule { kNatural, kFirstOrder };

struct TrpoConfig {
  double gamma = 0.99;
  double lambda = 0.3;
  double kl_threshold = 0.01;
  int batch_timesteps = 25000;
  int cg_iterations = 10;
  double cg_damping = 1e-3;
  int backtracks = 10;
  double backtrack_shrink = 0.8;
  int baseline_epochs = 30;
  double baseline_step_size = 1e-2;
  UpdateRule update_rule = UpdateRule::kNatural;
  double penalty_beta = 1.0;       // first-order rule only
  double penalty_step_size = 1e-2; // first-order rule only
};

struct TrainConfig {
  TrpoConfig trpo;
  env::TrialConfig trial;
  int hidden_width = 64;
  int iterations = 300;
  std::uint64_t master_seed = 0;
  std::string output_dir;           // progress CSV, metadata, checkpoints
  int checkpoint_interval = 25;     // iterations; 0 disables periodic saves
  std::optional<double> stop_mean_reward;  // early stop once reached
};

// Batch of whole trials sharing one task family.
struct TrajectoryBatch {
  std::vector<rl2::TrialTrajectory> trials;
  int total_timesteps = 0;
  double mean_trial_reward = 0.0;
  double mean_entropy = 0.0;
};

using TaskSampler = std::function<env::TaskSpec(Rng&)>;

// Samples tasks and rolls whole trials until at least batch_timesteps steps
// are gathered (the final trial may overshoot).
TrajectoryBatch collect_batch(const TaskSampler& sampler, const env::TrialConfig& trial,
                              rl2::PolicySnapshot& snapshot, int batch_timesteps,
                              Rng& rng);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantage + value, regression target
};

// Trial-scoped generalized advantage estimation. Episode boundaries inside a
// trial do not cut the recursion; the bootstrap value past the trial end is 0.
GaeResult compute_gae(const rl2::TrialTrajectory& trial, double gamma, double lambda);

// Empirical discounted reward-to-go per timestep (no bootstrap past trial end).
// Used as the regression target for the value baseline.
std::vector<double> discounted_returns(const rl2::TrialTrajectory& trial, double gamma);

// Normalizes advantages to zero mean / unit variance across the whole batch.
void normalize_advantages(std::vector<std::vector<double>>& per_trial);

// Full-batch Adam steps on the mean squared value error; the optimizer state
// persists across batches. Returns the final epoch's mean loss.
double fit_baseline(rl2::PolicySnapshot& snapshot, const TrajectoryBatch& batch,
                    const std::vector<std::vector<double>>& returns, int epochs,
                    nn::Adam& optimizer);

struct UpdateStats {
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  double kl_after = 0.0;
  bool accepted = false;
  int backtrack_steps = 0;
};

// One policy update on the batch. Natural rule: conjugate-gradient solve
// against the Fisher, then a line search that enforces both surrogate
// improvement and the KL trust region; parameters roll back on rejection.
UpdateStats policy_update(rl2::PolicySnapshot& snapshot, const TrajectoryBatch& batch,
                          const std::vector<std::vector<double>>& advantages,
                          TrpoConfig& config);

struct IterationRecord {
  int iteration = 0;
  double mean_trial_reward = 0.0;
  double mean_kl = 0.0;
  double entropy = 0.0;
  double wall_clock_s = 0.0;
};

struct TrainResult {
  std::vector<IterationRecord> history;
  double best_mean_reward = 0.0;
  int iterations_run = 0;
};

using ProgressSink = std::function<void(const IterationRecord&)>;

TrainResult train(const TaskSampler& sampler, rl2::PolicySnapshot& snapshot,
                  const TrainConfig& config, const ProgressSink& sink = {});

}  // namespace metarl::trpo
