#include "metarl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>
#include <utility>

#include "metarl/mdp_agents.hpp"

namespace metarl::harness {

namespace {

constexpr int kDefaultGittinsDepth = 200;

std::pair<double, double> mean_and_se(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  const double se = xs.size() > 1 ? std::sqrt(sq / (n - 1.0)) / std::sqrt(n) : 0.0;
  return {mean, se};
}

void parallel_for(int n, const std::function<void(int)>& body) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

int worker_count() {
  const char* raw = std::getenv("METARL_WORKERS");
  if (raw == nullptr) return 1;
  const int v = std::atoi(raw);
  return v > 0 ? v : 1;
}

TaskSetup parse_task(const std::string& text) {
  const std::size_t colon = text.find(':');
  const std::string family = text.substr(0, colon);
  TaskSetup setup;
  if (family == "bandit")
    setup.family = rl2::TaskFamily::kBandit;
  else if (family == "mdp")
    setup.family = rl2::TaskFamily::kTabularMdp;
  else if (family == "maze")
    setup.family = rl2::TaskFamily::kMaze;
  else
    throw InvalidArgument("parse_task: unknown family in '" + text + "'");

  if (colon != std::string::npos) {
    std::stringstream rest(text.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      const std::size_t eq = item.find('=');
      if (eq == std::string::npos)
        throw InvalidArgument("parse_task: expected key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq);
      const int value = std::stoi(item.substr(eq + 1));
      if (key == "k")
        setup.k = value;
      else if (key == "n")
        setup.episodes = value;
      else if (key == "size")
        setup.maze_size = value;
      else
        throw InvalidArgument("parse_task: unknown key '" + key + "'");
    }
  }
  if (setup.k <= 0 || setup.episodes <= 0 || setup.maze_size < 5)
    throw InvalidArgument("parse_task: parameters out of range");
  return setup;
}

env::TaskSpec TaskSetup::sample(Rng& rng) const {
  switch (family) {
    case rl2::TaskFamily::kBandit:
      return env::sample_bandit(rng, k);
    case rl2::TaskFamily::kTabularMdp:
      return env::sample_tabular_mdp(rng);
    case rl2::TaskFamily::kMaze:
      return env::sample_maze(rng, maze_size, maze_size);
  }
  throw InvalidArgument("TaskSetup::sample: bad family");
}

env::TrialConfig TaskSetup::trial_config() const {
  env::TrialConfig c;
  c.episodes_per_trial = episodes;
  return c;
}

std::string TaskSetup::text() const {
  std::ostringstream out;
  switch (family) {
    case rl2::TaskFamily::kBandit:
      out << "bandit:k=" << k << ",n=" << episodes;
      break;
    case rl2::TaskFamily::kTabularMdp:
      out << "mdp:n=" << episodes;
      break;
    case rl2::TaskFamily::kMaze:
      out << "maze:size=" << maze_size << ",n=" << episodes;
      break;
  }
  return out.str();
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"agent", r.agent},        {"params", r.params},
       {"task", r.task},          {"master_seed", r.master_seed},
       {"instances", r.instances}, {"per_instance", r.per_instance},
       {"mean", r.mean},          {"stderr", r.stderr_mean}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  j.at("agent").get_to(r.agent);
  r.params = j.at("params");
  j.at("task").get_to(r.task);
  j.at("master_seed").get_to(r.master_seed);
  j.at("instances").get_to(r.instances);
  j.at("per_instance").get_to(r.per_instance);
  j.at("mean").get_to(r.mean);
  j.at("stderr").get_to(r.stderr_mean);
}

namespace {

struct SeedNames {
  const char* task;
  const char* env;
};

SeedNames seed_names(SeedSet set) {
  return set == SeedSet::kEvaluation ? SeedNames{"task", "env"}
                                     : SeedNames{"tune-task", "tune-env"};
}

double run_bandit_trial(env::TrialEnv& e, const AgentSpec& agent, Rng& agent_rng,
                        Rng& env_rng, const bandit::GittinsTable* table) {
  const int k = e.num_actions();
  bandit::ArmStats stats(k);
  std::vector<bandit::BetaPosterior> posteriors(static_cast<std::size_t>(k));
  double total = 0.0;
  e.reset();
  while (!e.trial_done()) {
    int arm = 0;
    if (agent.name == "random") {
      arm = static_cast<int>(agent_rng() % static_cast<std::uint64_t>(k));
    } else if (agent.name == "greedy") {
      arm = bandit::epsilon_greedy_select(stats, 0.0, agent_rng);
    } else if (agent.name == "egreedy") {
      arm = bandit::epsilon_greedy_select(stats, agent.params.value("epsilon", 0.05),
                                          agent_rng);
    } else if (agent.name == "ucb1") {
      const long t = static_cast<long>(
          std::accumulate(stats.pulls.begin(), stats.pulls.end(), 0.0));
      arm = bandit::ucb1_select(stats, t, agent.params.value("c", 0.2));
    } else if (agent.name == "ts") {
      arm = bandit::thompson_select(posteriors, agent_rng);
    } else if (agent.name == "ots") {
      arm = bandit::optimistic_thompson_select(posteriors,
                                               agent.params.value("samples", 10),
                                               agent_rng);
    } else if (agent.name == "gittins") {
      arm = bandit::gittins_select(*table, posteriors);
    } else {
      throw InvalidArgument("unknown bandit agent: " + agent.name);
    }
    env::StepResult step = e.step(arm, env_rng);
    total += step.reward;
    stats.record(arm, step.reward);
    posteriors[static_cast<std::size_t>(arm)] =
        bandit::update_beta(posteriors[static_cast<std::size_t>(arm)], step.reward);
  }
  return total;
}

double default_prior_mean(const std::string& name) {
  // Posterior-sampling planners tune to the zero-mean reward prior; the
  // bonus/optimism planners keep the generative prior mean.
  return (name == "psrl" || name == "opsrl") ? 0.0 : 1.0;
}

mdp::FiniteHorizonPlan make_mdp_plan(const AgentSpec& agent,
                                     const mdp::TabularPosterior& posterior, Rng& rng,
                                     int horizon) {
  if (agent.name == "psrl") return mdp::psrl_plan(posterior, rng, horizon);
  if (agent.name == "opsrl")
    return mdp::opsrl_plan(posterior, agent.params.value("samples", 10), rng, horizon);
  if (agent.name == "beb")
    return mdp::beb_plan(posterior, agent.params.value("bonus", 1.0), horizon);
  if (agent.name == "ucrl2")
    return mdp::ucrl2_plan(posterior, agent.params.value("delta", 0.1), horizon);
  if (agent.name == "greedy" || agent.name == "egreedy")
    return mdp::map_plan(posterior, horizon);
  throw InvalidArgument("unknown mdp agent: " + agent.name);
}

double run_mdp_trial(env::TrialEnv& e, const AgentSpec& agent, Rng& agent_rng,
                     Rng& env_rng) {
  const auto& spec = std::get<env::TabularMdpSpec>(e.task());
  const int horizon = spec.horizon;
  double total = 0.0;
  env::AgentInput input = e.reset();

  if (agent.name == "random") {
    while (!e.trial_done()) {
      const int a = static_cast<int>(agent_rng() %
                                     static_cast<std::uint64_t>(e.num_actions()));
      total += e.step(a, env_rng).reward;
    }
    return total;
  }

  const double eps = agent.name == "egreedy" ? agent.params.value("epsilon", 0.05) : 0.0;
  mdp::TabularPosterior posterior(
      spec.n_states, spec.n_actions,
      agent.params.value("prior_mean", default_prior_mean(agent.name)));
  mdp::FiniteHorizonPlan plan;
  int step_in_episode = horizon;  // force a plan before the first step
  while (!e.trial_done()) {
    if (step_in_episode >= horizon) {
      plan = make_mdp_plan(agent, posterior, agent_rng, horizon);
      step_in_episode = 0;
    }
    const int state = input.observation[0];
    int action = plan.greedy_action(step_in_episode, state);
    if (eps > 0.0) {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      if (unif(agent_rng) < eps)
        action = static_cast<int>(agent_rng() %
                                  static_cast<std::uint64_t>(spec.n_actions));
    }
    env::StepResult step = e.step(action, env_rng);
    total += step.reward;
    posterior.update(state, action, step.reward, step.transition_state);
    input = step.next_input;
    ++step_in_episode;
    if (step.episode_done) step_in_episode = horizon;
  }
  return total;
}

double run_random_maze_trial(env::TrialEnv& e, Rng& agent_rng, Rng& env_rng) {
  double total = 0.0;
  e.reset();
  while (!e.trial_done()) {
    const int a =
        static_cast<int>(agent_rng() % static_cast<std::uint64_t>(e.num_actions()));
    total += e.step(a, env_rng).reward;
  }
  return total;
}

EvalReport finalize_report(std::string agent, nlohmann::json params, std::string task,
                           std::uint64_t master_seed, std::vector<double> totals) {
  EvalReport r;
  r.agent = std::move(agent);
  r.params = std::move(params);
  r.task = std::move(task);
  r.master_seed = master_seed;
  r.instances = static_cast<int>(totals.size());
  auto [mean, se] = mean_and_se(totals);
  r.per_instance = std::move(totals);
  r.mean = mean;
  r.stderr_mean = se;
  return r;
}

}  // namespace

EvalReport evaluate(const TaskSetup& setup, const AgentSpec& agent, int instances,
                    std::uint64_t master_seed, const std::string& cache_dir,
                    SeedSet seeds) {
  if (instances <= 0) throw InvalidArgument("evaluate: instances must be positive");
  std::optional<bandit::GittinsTable> table;
  if (agent.name == "gittins") {
    const double gamma = agent.params.value("gamma", 0.99);
    const int depth = agent.params.value("depth", kDefaultGittinsDepth);
    if (cache_dir.empty())
      table.emplace(gamma, depth, 1e-5);
    else
      table.emplace(bandit::cached_gittins_table(gamma, depth, 1e-5, cache_dir));
  }
  const SeedNames ns = seed_names(seeds);
  std::vector<double> totals(static_cast<std::size_t>(instances));
  parallel_for(instances, [&](int i) {
    Rng task_rng(stream_seed(master_seed, ns.task, static_cast<std::uint64_t>(i)));
    Rng env_rng(stream_seed(master_seed, ns.env, static_cast<std::uint64_t>(i)));
    env::TrialEnv e(setup.sample(task_rng), setup.trial_config());
    switch (setup.family) {
      case rl2::TaskFamily::kBandit:
        totals[static_cast<std::size_t>(i)] =
            run_bandit_trial(e, agent, env_rng, env_rng, table ? &*table : nullptr);
        break;
      case rl2::TaskFamily::kTabularMdp:
        totals[static_cast<std::size_t>(i)] = run_mdp_trial(e, agent, env_rng, env_rng);
        break;
      case rl2::TaskFamily::kMaze:
        if (agent.name != "random")
          throw InvalidArgument("maze supports only the random classical agent");
        totals[static_cast<std::size_t>(i)] = run_random_maze_trial(e, env_rng, env_rng);
        break;
    }
  });
  return finalize_report(agent.name, agent.params, setup.text(), master_seed,
                         std::move(totals));
}

EvalReport evaluate_policy(const TaskSetup& setup, rl2::PolicySnapshot& snapshot,
                           int instances, std::uint64_t master_seed, bool argmax,
                           SeedSet seeds) {
  if (instances <= 0) throw InvalidArgument("evaluate_policy: instances");
  const SeedNames ns = seed_names(seeds);
  std::vector<double> totals(static_cast<std::size_t>(instances));
  parallel_for(instances, [&](int i) {
    Rng task_rng(stream_seed(master_seed, ns.task, static_cast<std::uint64_t>(i)));
    Rng env_rng(stream_seed(master_seed, ns.env, static_cast<std::uint64_t>(i)));
    env::TrialEnv e(setup.sample(task_rng), setup.trial_config());
    rl2::TrialTrajectory traj = rl2::run_trial(e, snapshot, env_rng, env_rng, argmax);
    totals[static_cast<std::size_t>(i)] = traj.total_reward;
  });
  return finalize_report("policy", nlohmann::json::object(), setup.text(), master_seed,
                         std::move(totals));
}

GridSearchResult grid_search(const TaskSetup& setup, const std::string& agent_name,
                             const std::vector<nlohmann::json>& grid, int instances,
                             std::uint64_t master_seed, const std::string& cache_dir) {
  if (grid.empty()) throw InvalidArgument("grid_search: empty grid");
  GridSearchResult result;
  result.best_mean = -std::numeric_limits<double>::infinity();
  for (const nlohmann::json& params : grid) {
    EvalReport report = evaluate(setup, AgentSpec{agent_name, params}, instances,
                                 master_seed, cache_dir, SeedSet::kTuning);
    result.grid.push_back({params, report.mean, report.stderr_mean});
    if (report.mean > result.best_mean) {
      result.best_mean = report.mean;
      result.best = AgentSpec{agent_name, params};
    }
  }
  return result;
}

namespace {

// Regularized incomplete beta function via the standard continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14, kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericalFailure("incomplete beta: continued fraction did not converge");
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

// P(T > t) for Student's t with df degrees of freedom.
double student_t_sf(double t, double df) {
  const double tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t >= 0.0 ? tail : 1.0 - tail;
}

}  // namespace

WelchResult welch_one_sided(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw InvalidArgument("welch_one_sided: need at least 2 samples per group");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  auto [ma, sea] = mean_and_se(a);
  auto [mb, seb] = mean_and_se(b);
  const double va_n = sea * sea;  // variance of the mean = s^2/n
  const double vb_n = seb * seb;
  const double denom = va_n + vb_n;
  WelchResult out;
  if (denom == 0.0) {
    out.t = 0.0;
    out.df = na + nb - 2.0;
    out.p_one_sided = ma > mb ? 0.0 : 1.0;
    if (ma == mb) out.p_one_sided = 0.5;
    return out;
  }
  out.t = (ma - mb) / std::sqrt(denom);
  out.df = denom * denom /
           (va_n * va_n / (na - 1.0) + vb_n * vb_n / (nb - 1.0));
  out.p_one_sided = student_t_sf(out.t, out.df);
  return out;
}

bool significance(const EvalReport& a, const EvalReport& b) {
  return welch_one_sided(a.per_instance, b.per_instance).p_one_sided < 0.05;
}

double normalize_score(double score, double random_score, double reference_score) {
  const double denom = reference_score - random_score;
  if (denom == 0.0) throw InvalidArgument("normalize_score: degenerate denominator");
  return (score - random_score) / denom;
}

DistillResult distill_from_gittins(const TaskSetup& setup, const DistillConfig& config) {
  if (setup.family != rl2::TaskFamily::kBandit)
    throw InvalidArgument("distill_from_gittins: bandit tasks only");

  bandit::GittinsTable table =
      config.cache_dir.empty()
          ? bandit::GittinsTable(config.gittins_gamma, config.gittins_depth, 1e-5)
          : bandit::cached_gittins_table(config.gittins_gamma, config.gittins_depth,
                                         1e-5, config.cache_dir);

  // Teacher rollouts: record the exact agent-side input stream.
  std::vector<rl2::TrialTrajectory> dataset(
      static_cast<std::size_t>(config.dataset_trials));
  double teacher_total = 0.0;
  for (int i = 0; i < config.dataset_trials; ++i) {
    Rng task_rng(
        stream_seed(config.master_seed, "distill-task", static_cast<std::uint64_t>(i)));
    Rng env_rng(
        stream_seed(config.master_seed, "distill-env", static_cast<std::uint64_t>(i)));
    env::TrialEnv e(setup.sample(task_rng), setup.trial_config());
    std::vector<bandit::BetaPosterior> posteriors(static_cast<std::size_t>(setup.k));
    rl2::TrialTrajectory& traj = dataset[static_cast<std::size_t>(i)];
    env::AgentInput input = e.reset();
    while (!e.trial_done()) {
      const int arm = bandit::gittins_select(table, posteriors);
      env::StepResult step = e.step(arm, env_rng);
      traj.inputs.push_back(input);
      traj.actions.push_back(arm);
      traj.total_reward += step.reward;
      posteriors[static_cast<std::size_t>(arm)] =
          bandit::update_beta(posteriors[static_cast<std::size_t>(arm)], step.reward);
      input = step.next_input;
    }
    teacher_total += traj.total_reward;
  }

  rl2::EmbeddingSpec embedding;
  embedding.family = rl2::TaskFamily::kBandit;
  embedding.n_actions = setup.k;
  Rng init_rng(stream_seed(config.master_seed, "distill-init", 0));
  DistillResult result{
      rl2::PolicySnapshot::init_zero_head(init_rng, embedding, config.hidden_width),
      {},
      teacher_total / std::max(config.dataset_trials, 1)};
  rl2::PolicySnapshot& snapshot = result.snapshot;

  // Teacher-forced cross-entropy graphs, one per trial.
  struct CloneGraph {
    nn::Tape tape;
    int log_prob_sum = -1;
    explicit CloneGraph(nn::ParamStore* store) : tape(store) {}
  };
  std::vector<std::unique_ptr<CloneGraph>> graphs;
  int total_steps = 0;
  for (const rl2::TrialTrajectory& traj : dataset) {
    auto g = std::make_unique<CloneGraph>(&snapshot.policy_params);
    nn::GruTapeNet net = nn::GruTapeNet::build(g->tape, snapshot.policy_net);
    int h = g->tape.constant_zeros(snapshot.hidden_width);
    std::vector<int> lp_nodes;
    for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
      const int x = g->tape.constant(snapshot.embedding.embed(traj.inputs[t]));
      h = net.step(g->tape, x, h);
      lp_nodes.push_back(g->tape.log_prob(net.head(g->tape, h), traj.actions[t]));
    }
    g->log_prob_sum = g->tape.sum(lp_nodes);
    total_steps += static_cast<int>(lp_nodes.size());
    graphs.push_back(std::move(g));
  }
  const double inv_n = 1.0 / std::max(total_steps, 1);

  // Adam ascent on the mean log-likelihood.
  const std::size_t dim = snapshot.policy_params.total_size();
  std::vector<double> m(dim, 0.0), v(dim, 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    snapshot.policy_params.zero_grad();
    double lp_sum = 0.0;
    for (auto& g : graphs) {
      if (epoch > 0) g->tape.recompute();
      lp_sum += g->tape.scalar(g->log_prob_sum);
      g->tape.backward(g->log_prob_sum, inv_n);
    }
    result.losses.push_back(-lp_sum * inv_n);
    std::vector<double> grad = snapshot.policy_params.flat_grad();
    std::vector<double> update(dim);
    const double bc1 = 1.0 - std::pow(kBeta1, epoch + 1);
    const double bc2 = 1.0 - std::pow(kBeta2, epoch + 1);
    for (std::size_t i = 0; i < dim; ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      update[i] = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps);
    }
    snapshot.policy_params.add_scaled(update, config.step_size);
  }
  return result;
}

Table make_table(const std::vector<std::string>& row_names,
                 const std::vector<std::vector<EvalReport>>& rows) {
  if (row_names.size() != rows.size())
    throw InvalidArgument("make_table: row name/report count mismatch");
  Table out;
  std::ostringstream csv, text;
  csv << "setup,agent,mean,stderr,highlight\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::vector<EvalReport>& row = rows[r];
    if (row.empty()) continue;
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.size(); ++i)
      if (row[i].mean > row[best].mean) best = i;
    std::vector<bool> highlight(row.size());
    for (std::size_t i = 0; i < row.size(); ++i)
      highlight[i] = (i == best) || !significance(row[best], row[i]);
    text << row_names[r] << ":\n";
    for (std::size_t i = 0; i < row.size(); ++i) {
      csv << row_names[r] << ',' << row[i].agent << ',' << row[i].mean << ','
          << row[i].stderr_mean << ',' << (highlight[i] ? 1 : 0) << '\n';
      text << "  " << (highlight[i] ? '*' : ' ') << ' ' << std::left << std::setw(10)
           << row[i].agent << std::right << std::fixed << std::setprecision(2)
           << std::setw(10) << row[i].mean << "  +/- " << std::setprecision(3)
           << row[i].stderr_mean << "\n";
    }
  }
  out.csv = csv.str();
  out.text = text.str();
  return out;
}

std::vector<nlohmann::json> default_grid(const std::string& agent_name) {
  using nlohmann::json;
  if (agent_name == "random" || agent_name == "greedy" || agent_name == "ts")
    return {json::object()};
  if (agent_name == "egreedy") {
    std::vector<json> grid;
    for (double e : {0.01, 0.05, 0.1, 0.2}) grid.push_back({{"epsilon", e}});
    return grid;
  }
  if (agent_name == "ucb1") {
    std::vector<json> grid;
    for (double c : {0.05, 0.1, 0.2, 0.5, 1.0}) grid.push_back({{"c", c}});
    return grid;
  }
  if (agent_name == "ots") {
    std::vector<json> grid;
    for (int s : {2, 5, 10}) grid.push_back({{"samples", s}});
    return grid;
  }
  if (agent_name == "gittins") {
    std::vector<json> grid;
    for (double g : {0.9, 0.99}) grid.push_back({{"gamma", g}});
    return grid;
  }
  if (agent_name == "psrl") {
    std::vector<json> grid;
    for (double p : {0.0, 1.0}) grid.push_back({{"prior_mean", p}});
    return grid;
  }
  if (agent_name == "opsrl") {
    std::vector<json> grid;
    for (int s : {5, 10})
      for (double p : {0.0, 1.0}) grid.push_back({{"samples", s}, {"prior_mean", p}});
    return grid;
  }
  if (agent_name == "beb") {
    std::vector<json> grid;
    for (double b : {0.5, 1.0, 2.0}) grid.push_back({{"bonus", b}});
    return grid;
  }
  if (agent_name == "ucrl2") {
    std::vector<json> grid;
    for (double d : {0.05, 0.1, 0.2}) grid.push_back({{"delta", d}});
    return grid;
  }
  throw InvalidArgument("default_grid: unknown agent " + agent_name);
}

}  // namespace metarl::harness
