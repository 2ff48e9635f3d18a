#include "metarl/trpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>

#include "json.hpp"

namespace metarl::trpo {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

TrajectoryBatch collect_batch(const TaskSampler& sampler, const env::TrialConfig& trial,
                              rl2::PolicySnapshot& snapshot, int batch_timesteps,
                              Rng& rng) {
  if (batch_timesteps <= 0) throw InvalidArgument("collect_batch: batch_timesteps");
  TrajectoryBatch batch;
  double entropy_sum = 0.0;
  while (batch.total_timesteps < batch_timesteps) {
    env::TrialEnv e(sampler(rng), trial);
    rl2::TrialTrajectory traj = rl2::run_trial(e, snapshot, rng, rng);
    batch.total_timesteps += traj.length();
    batch.mean_trial_reward += traj.total_reward;
    entropy_sum += std::accumulate(traj.entropies.begin(), traj.entropies.end(), 0.0);
    batch.trials.push_back(std::move(traj));
  }
  batch.mean_trial_reward /= static_cast<double>(batch.trials.size());
  batch.mean_entropy = entropy_sum / batch.total_timesteps;
  return batch;
}

GaeResult compute_gae(const rl2::TrialTrajectory& trial, double gamma, double lambda) {
  const int n = trial.length();
  GaeResult out;
  out.advantages.resize(static_cast<std::size_t>(n));
  out.returns.resize(static_cast<std::size_t>(n));
  double gae = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const double v = trial.values[static_cast<std::size_t>(t)];
    const double v_next = (t + 1 < n) ? trial.values[static_cast<std::size_t>(t + 1)] : 0.0;
    const double delta = trial.rewards[static_cast<std::size_t>(t)] + gamma * v_next - v;
    gae = delta + gamma * lambda * gae;
    out.advantages[static_cast<std::size_t>(t)] = gae;
    out.returns[static_cast<std::size_t>(t)] = gae + v;
  }
  return out;
}

std::vector<double> discounted_returns(const rl2::TrialTrajectory& trial, double gamma) {
  const int n = trial.length();
  std::vector<double> out(static_cast<std::size_t>(n));
  double g = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    g = trial.rewards[static_cast<std::size_t>(t)] + gamma * g;
    out[static_cast<std::size_t>(t)] = g;
  }
  return out;
}

void normalize_advantages(std::vector<std::vector<double>>& per_trial) {
  std::size_t n = 0;
  double sum = 0.0;
  for (const auto& adv : per_trial) {
    n += adv.size();
    sum = std::accumulate(adv.begin(), adv.end(), sum);
  }
  if (n == 0) return;
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (const auto& adv : per_trial)
    for (double a : adv) sq += (a - mean) * (a - mean);
  const double stddev = std::sqrt(sq / static_cast<double>(n));
  const double scale = 1.0 / (stddev + 1e-8);
  for (auto& adv : per_trial)
    for (double& a : adv) a = (a - mean) * scale;
}

double fit_baseline(rl2::PolicySnapshot& snapshot, const TrajectoryBatch& batch,
                    const std::vector<std::vector<double>>& returns, int epochs,
                    nn::Adam& optimizer) {
  if (returns.size() != batch.trials.size())
    throw InvalidArgument("fit_baseline: returns size mismatch");

  // Refresh the whitening statistics from this batch's targets before the
  // graphs bake them in; predictions made during the rollout already used the
  // previous statistics, so the advantage estimates are untouched.
  double mean = 0.0;
  std::size_t count = 0;
  for (const std::vector<double>& rs : returns)
    for (double r : rs) {
      mean += r;
      ++count;
    }
  if (count == 0) throw InvalidArgument("fit_baseline: empty batch");
  mean /= static_cast<double>(count);
  double var = 0.0;
  for (const std::vector<double>& rs : returns)
    for (double r : rs) var += (r - mean) * (r - mean);
  var /= static_cast<double>(count);
  snapshot.value_shift = mean;
  snapshot.value_scale = std::max(std::sqrt(var), 1e-6);

  std::vector<std::unique_ptr<rl2::ValueGraph>> graphs;
  graphs.reserve(batch.trials.size());
  for (std::size_t i = 0; i < batch.trials.size(); ++i) {
    auto g = std::make_unique<rl2::ValueGraph>(&snapshot.value_params);
    rl2::build_value_graph(snapshot, batch.trials[i], returns[i], *g);
    graphs.push_back(std::move(g));
  }
  const double inv_n = 1.0 / batch.total_timesteps;
  double loss = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    snapshot.value_params.zero_grad();
    loss = 0.0;
    for (auto& g : graphs) {
      if (epoch > 0) g->tape.recompute();
      loss += g->tape.scalar(g->loss_sum);
      g->tape.backward(g->loss_sum, inv_n);
    }
    std::vector<double> grad = snapshot.value_params.flat_grad();
    if (!all_finite(grad)) throw NumericalFailure("fit_baseline: non-finite gradient");
    optimizer.step(snapshot.value_params, grad);
  }
  return loss * inv_n;
}

namespace {

struct BatchGraphs {
  std::vector<std::unique_ptr<rl2::PolicyGraph>> graphs;
  double inv_n = 0.0;

  double mean_surrogate() const {
    double s = 0.0;
    for (const auto& g : graphs) s += g->tape.scalar(g->surrogate_sum);
    return s * inv_n;
  }
  double mean_kl() const {
    double s = 0.0;
    for (const auto& g : graphs) s += g->tape.scalar(g->kl_sum);
    return s * inv_n;
  }
  void recompute() {
    for (auto& g : graphs) g->tape.recompute();
  }
};

BatchGraphs build_graphs(rl2::PolicySnapshot& snapshot, const TrajectoryBatch& batch,
                         const std::vector<std::vector<double>>& advantages) {
  if (advantages.size() != batch.trials.size())
    throw InvalidArgument("policy_update: advantage size mismatch");
  BatchGraphs out;
  out.inv_n = 1.0 / batch.total_timesteps;
  out.graphs.reserve(batch.trials.size());
  for (std::size_t i = 0; i < batch.trials.size(); ++i) {
    auto g = std::make_unique<rl2::PolicyGraph>(&snapshot.policy_params);
    rl2::build_policy_graph(snapshot, batch.trials[i], advantages[i], *g);
    out.graphs.push_back(std::move(g));
  }
  return out;
}

// Gauss-Newton Fisher-vector product evaluated at the rollout parameters:
// Fv = (1/N) sum_t J_t^T (diag(p_t) - p_t p_t^T) J_t v, with p_t the rollout
// distribution at step t.
std::vector<double> fisher_vector_product(rl2::PolicySnapshot& snapshot,
                                          BatchGraphs& graphs,
                                          std::span<const double> v, double damping) {
  snapshot.policy_params.set_flat_tangent(v);
  snapshot.policy_params.zero_grad();
  for (auto& g : graphs.graphs) {
    g->tape.forward_tangent();
    g->tape.zero_node_grads();
    for (std::size_t t = 0; t < g->logits_nodes.size(); ++t) {
      const int node = g->logits_nodes[t];
      std::span<const double> jv = g->tape.tangent_value(node);
      const std::vector<double>& p = g->p_old[t];
      const std::size_t k = p.size();
      double pjv = 0.0;
      for (std::size_t i = 0; i < k; ++i) pjv += p[i] * jv[i];
      std::vector<double> seed(k);
      for (std::size_t i = 0; i < k; ++i) seed[i] = graphs.inv_n * p[i] * (jv[i] - pjv);
      g->tape.seed_grad(node, seed);
    }
    g->tape.run_backward();
  }
  std::vector<double> fv = snapshot.policy_params.flat_grad();
  for (std::size_t i = 0; i < fv.size(); ++i) fv[i] += damping * v[i];
  return fv;
}

UpdateStats natural_update(rl2::PolicySnapshot& snapshot, BatchGraphs& graphs,
                           const TrpoConfig& config) {
  UpdateStats stats;
  stats.surrogate_before = graphs.mean_surrogate();

  snapshot.policy_params.zero_grad();
  for (auto& g : graphs.graphs) g->tape.backward(g->surrogate_sum, graphs.inv_n);
  std::vector<double> grad = snapshot.policy_params.flat_grad();
  if (!all_finite(grad)) throw NumericalFailure("policy_update: non-finite gradient");

  std::vector<double> direction = nn::conjugate_gradient(
      [&](std::span<const double> x, std::span<double> out) {
        std::vector<double> fv =
            fisher_vector_product(snapshot, graphs, x, config.cg_damping);
        std::copy(fv.begin(), fv.end(), out.begin());
      },
      grad, config.cg_iterations, 1e-10);

  std::vector<double> fd = fisher_vector_product(snapshot, graphs, direction,
                                                 config.cg_damping);
  const double dfd = dot(direction, fd);
  if (!(dfd > 0.0) || !std::isfinite(dfd))
    throw NumericalFailure("policy_update: non-positive step curvature");
  const double full_step = std::sqrt(2.0 * config.kl_threshold / dfd);

  const std::vector<double> old_values = snapshot.policy_params.flat_values();
  double alpha = full_step;
  for (int i = 0; i < config.backtracks; ++i, alpha *= config.backtrack_shrink) {
    snapshot.policy_params.set_flat_values(old_values);
    snapshot.policy_params.add_scaled(direction, alpha);
    graphs.recompute();
    const double surrogate = graphs.mean_surrogate();
    const double kl = graphs.mean_kl();
    if (std::isfinite(surrogate) && std::isfinite(kl) &&
        surrogate > stats.surrogate_before && kl <= config.kl_threshold) {
      stats.surrogate_after = surrogate;
      stats.kl_after = kl;
      stats.accepted = true;
      stats.backtrack_steps = i;
      return stats;
    }
  }
  snapshot.policy_params.set_flat_values(old_values);
  graphs.recompute();
  stats.surrogate_after = stats.surrogate_before;
  stats.kl_after = 0.0;
  stats.backtrack_steps = config.backtracks;
  return stats;
}

UpdateStats first_order_update(rl2::PolicySnapshot& snapshot, BatchGraphs& graphs,
                               TrpoConfig& config) {
  UpdateStats stats;
  stats.surrogate_before = graphs.mean_surrogate();

  snapshot.policy_params.zero_grad();
  const double seed_s = graphs.inv_n;
  const double seed_kl = -config.penalty_beta * graphs.inv_n;
  for (auto& g : graphs.graphs) {
    g->tape.zero_node_grads();
    g->tape.seed_grad(g->surrogate_sum, std::span<const double>(&seed_s, 1));
    g->tape.seed_grad(g->kl_sum, std::span<const double>(&seed_kl, 1));
    g->tape.run_backward();
  }
  std::vector<double> grad = snapshot.policy_params.flat_grad();
  if (!all_finite(grad)) throw NumericalFailure("policy_update: non-finite gradient");

  const std::vector<double> old_values = snapshot.policy_params.flat_values();
  snapshot.policy_params.add_scaled(grad, config.penalty_step_size);
  graphs.recompute();
  const double surrogate = graphs.mean_surrogate();
  const double kl = graphs.mean_kl();
  if (!std::isfinite(surrogate) || !std::isfinite(kl)) {
    snapshot.policy_params.set_flat_values(old_values);
    graphs.recompute();
    stats.surrogate_after = stats.surrogate_before;
    return stats;
  }
  stats.surrogate_after = surrogate;
  stats.kl_after = kl;
  stats.accepted = true;
  // Adapt the penalty weight toward the trust-region target.
  if (kl > 2.0 * config.kl_threshold)
    config.penalty_beta *= 1.5;
  else if (kl < 0.5 * config.kl_threshold)
    config.penalty_beta = std::max(config.penalty_beta / 1.5, 1e-4);
  return stats;
}

}  // namespace

UpdateStats policy_update(rl2::PolicySnapshot& snapshot, const TrajectoryBatch& batch,
                          const std::vector<std::vector<double>>& advantages,
                          TrpoConfig& config) {
  BatchGraphs graphs = build_graphs(snapshot, batch, advantages);
  if (config.update_rule == UpdateRule::kNatural)
    return natural_update(snapshot, graphs, config);
  return first_order_update(snapshot, graphs, config);
}

TrainResult train(const TaskSampler& sampler, rl2::PolicySnapshot& snapshot,
                  const TrainConfig& config, const ProgressSink& sink) {
  namespace fs = std::filesystem;
  TrpoConfig trpo = config.trpo;
  Rng rng(stream_seed(config.master_seed, "train", 0));

  std::ofstream csv;
  if (!config.output_dir.empty()) {
    fs::create_directories(config.output_dir);
    csv.open(fs::path(config.output_dir) / "progress.csv");
    csv << "iteration,mean_trial_reward,mean_kl,entropy,wall_clock_s\n";
    nlohmann::json meta = {{"master_seed", config.master_seed},
                           {"iterations", config.iterations},
                           {"batch_timesteps", trpo.batch_timesteps},
                           {"hidden_width", config.hidden_width},
                           {"gamma", trpo.gamma},
                           {"lambda", trpo.lambda},
                           {"kl_threshold", trpo.kl_threshold},
                           {"episodes_per_trial", config.trial.episodes_per_trial}};
    std::ofstream(fs::path(config.output_dir) / "run.json") << meta.dump(2) << "\n";
  }

  TrainResult result;
  result.best_mean_reward = -std::numeric_limits<double>::infinity();
  nn::Adam baseline_opt(snapshot.value_params.total_size(), trpo.baseline_step_size);
  const auto start = std::chrono::steady_clock::now();
  for (int it = 0; it < config.iterations; ++it) {
    TrajectoryBatch batch =
        collect_batch(sampler, config.trial, snapshot, trpo.batch_timesteps, rng);

    std::vector<std::vector<double>> advantages(batch.trials.size());
    std::vector<std::vector<double>> returns(batch.trials.size());
    for (std::size_t i = 0; i < batch.trials.size(); ++i) {
      advantages[i] = compute_gae(batch.trials[i], trpo.gamma, trpo.lambda).advantages;
      returns[i] = discounted_returns(batch.trials[i], trpo.gamma);
    }
    normalize_advantages(advantages);

    fit_baseline(snapshot, batch, returns, trpo.baseline_epochs, baseline_opt);
    UpdateStats stats = policy_update(snapshot, batch, advantages, trpo);

    IterationRecord rec;
    rec.iteration = it;
    rec.mean_trial_reward = batch.mean_trial_reward;
    rec.mean_kl = stats.kl_after;
    rec.entropy = batch.mean_entropy;
    rec.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    result.best_mean_reward = std::max(result.best_mean_reward, rec.mean_trial_reward);
    result.iterations_run = it + 1;
    if (csv.is_open()) {
      csv << rec.iteration << ',' << rec.mean_trial_reward << ',' << rec.mean_kl << ','
          << rec.entropy << ',' << rec.wall_clock_s << '\n';
      csv.flush();
    }
    if (sink) sink(rec);

    if (!config.output_dir.empty() && config.checkpoint_interval > 0 &&
        ((it + 1) % config.checkpoint_interval == 0 || it + 1 == config.iterations)) {
      snapshot.save((fs::path(config.output_dir) / "policy.ckpt").string());
    }
    if (config.stop_mean_reward && rec.mean_trial_reward >= *config.stop_mean_reward) {
      if (!config.output_dir.empty())
        snapshot.save((fs::path(config.output_dir) / "policy.ckpt").string());
      break;
    }
  }
  return result;
}

}  // namespace metarl::trpo
