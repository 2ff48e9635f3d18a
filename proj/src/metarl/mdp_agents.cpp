#include "metarl/mdp_agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace metarl::mdp {

TabularModel TabularModel::zeros(int n_states, int n_actions) {
  TabularModel m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.transitions.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
  m.rewards.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  return m;
}

TabularModel TabularModel::from_spec(const env::TabularMdpSpec& spec) {
  TabularModel m = zeros(spec.n_states, spec.n_actions);
  for (int s = 0; s < spec.n_states; ++s)
    for (int a = 0; a < spec.n_actions; ++a) {
      m.r(s, a) = spec.reward_means[s][a];
      for (int t = 0; t < spec.n_states; ++t) m.p(s, a, t) = spec.transitions[s][a][t];
    }
  return m;
}

void TabularModel::validate() const {
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int t = 0; t < n_states; ++t) {
        if (p(s, a, t) < -1e-12)
          throw InvalidArgument("TabularModel: negative transition probability");
        sum += p(s, a, t);
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidArgument("TabularModel: transition row does not sum to 1");
    }
}

TabularPosterior::TabularPosterior(int n_states_, int n_actions_, double prior_mean)
    : n_states(n_states_), n_actions(n_actions_) {
  dirichlet.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 1.0);
  reward_mean.assign(static_cast<std::size_t>(n_states) * n_actions, prior_mean);
  reward_count.assign(reward_mean.size(), 1.0);
  visits.assign(reward_mean.size(), 0.0);
}

void TabularPosterior::update(int s, int a, double r, int s_next) {
  if (s < 0 || s >= n_states || a < 0 || a >= n_actions || s_next < 0 || s_next >= n_states)
    throw InvalidArgument("TabularPosterior::update: index out of range");
  dirichlet[(sa(s, a)) * n_states + s_next] += 1.0;
  auto i = sa(s, a);
  reward_mean[i] = (reward_count[i] * reward_mean[i] + r) / (reward_count[i] + 1.0);
  reward_count[i] += 1.0;
  visits[i] += 1.0;
}

TabularModel TabularPosterior::mean_model() const {
  TabularModel m = TabularModel::zeros(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      auto i = sa(s, a);
      m.rewards[i] = reward_mean[i];
      const double* row = &dirichlet[i * n_states];
      double sum = std::accumulate(row, row + n_states, 0.0);
      for (int t = 0; t < n_states; ++t) m.p(s, a, t) = row[t] / sum;
    }
  return m;
}

TabularModel TabularPosterior::map_model() const {
  TabularModel m = TabularModel::zeros(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      auto i = sa(s, a);
      m.rewards[i] = reward_mean[i];
      const double* row = &dirichlet[i * n_states];
      double observed = std::accumulate(row, row + n_states, 0.0) - n_states;
      if (observed <= 0.0) {
        for (int t = 0; t < n_states; ++t) m.p(s, a, t) = 1.0 / n_states;
      } else {
        for (int t = 0; t < n_states; ++t) m.p(s, a, t) = (row[t] - 1.0) / observed;
      }
    }
  return m;
}

TabularModel TabularPosterior::sample_model(Rng& rng) const {
  TabularModel m = TabularModel::zeros(n_states, n_actions);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      auto i = sa(s, a);
      m.rewards[i] = reward_mean[i] + normal(rng) / std::sqrt(reward_count[i]);
      const double* row = &dirichlet[i * n_states];
      double sum = 0.0;
      for (int t = 0; t < n_states; ++t) {
        std::gamma_distribution<double> g(row[t], 1.0);
        double v = g(rng);
        m.p(s, a, t) = v;
        sum += v;
      }
      for (int t = 0; t < n_states; ++t) m.p(s, a, t) /= sum;
    }
  return m;
}

int FiniteHorizonPlan::greedy_action(int t, int s) const {
  int best = 0;
  for (int a = 1; a < n_actions; ++a)
    if (q_at(t, s, a) > q_at(t, s, best)) best = a;
  return best;
}

double FiniteHorizonPlan::root_value(int start_state) const {
  return q_at(0, start_state, greedy_action(0, start_state));
}

FiniteHorizonPlan value_iterate(const TabularModel& model, int horizon) {
  if (horizon < 1) throw InvalidArgument("value_iterate: horizon must be >= 1");
  model.validate();
  const int S = model.n_states, A = model.n_actions;
  FiniteHorizonPlan plan;
  plan.horizon = horizon;
  plan.n_states = S;
  plan.n_actions = A;
  plan.q.assign(static_cast<std::size_t>(horizon) * S * A, 0.0);
  std::vector<double> v(S, 0.0);
  for (int t = horizon - 1; t >= 0; --t) {
    double* qt = &plan.q[static_cast<std::size_t>(t) * S * A];
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double backup = model.r(s, a);
        if (t < horizon - 1) {
          const double* row = &model.transitions[(static_cast<std::size_t>(s) * A + a) * S];
          double exp_v = 0.0;
          for (int u = 0; u < S; ++u) exp_v += row[u] * v[u];
          backup += exp_v;
        }
        qt[s * A + a] = backup;
      }
    }
    for (int s = 0; s < S; ++s)
      v[s] = *std::max_element(qt + s * A, qt + (s + 1) * A);
  }
  return plan;
}

FiniteHorizonPlan psrl_plan(const TabularPosterior& posterior, Rng& rng, int horizon) {
  return value_iterate(posterior.sample_model(rng), horizon);
}

FiniteHorizonPlan opsrl_plan(const TabularPosterior& posterior, int sample_count, Rng& rng,
                             int horizon) {
  if (sample_count < 1) throw InvalidArgument("opsrl_plan: sample count must be >= 1");
  FiniteHorizonPlan best = psrl_plan(posterior, rng, horizon);
  for (int k = 1; k < sample_count; ++k) {
    FiniteHorizonPlan cand = psrl_plan(posterior, rng, horizon);
    for (std::size_t i = 0; i < best.q.size(); ++i) best.q[i] = std::max(best.q[i], cand.q[i]);
  }
  return best;
}

FiniteHorizonPlan beb_plan(const TabularPosterior& posterior, double bonus, int horizon) {
  if (bonus < 0.0) throw InvalidArgument("beb_plan: bonus must be >= 0");
  TabularModel m = posterior.mean_model();
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < m.n_actions; ++a)
      m.r(s, a) += bonus / (1.0 + posterior.visits[posterior.sa(s, a)]);
  return value_iterate(m, horizon);
}

FiniteHorizonPlan ucrl2_plan(const TabularPosterior& posterior, double delta, int horizon,
                             bool zero_widths) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("ucrl2_plan: delta outside (0,1)");
  const int S = posterior.n_states, A = posterior.n_actions;
  TabularModel emp = posterior.map_model();

  FiniteHorizonPlan plan;
  plan.horizon = horizon;
  plan.n_states = S;
  plan.n_actions = A;
  plan.q.assign(static_cast<std::size_t>(horizon) * S * A, 0.0);

  std::vector<double> v(S, 0.0);
  std::vector<int> order(S);
  std::vector<double> p(S);
  const double log_term = std::log(2.0 / delta);

  for (int t = horizon - 1; t >= 0; --t) {
    double* qt = &plan.q[static_cast<std::size_t>(t) * S * A];
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) { return v[x] > v[y]; });
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double count = std::max(1.0, posterior.visits[posterior.sa(s, a)]);
        double reward_width = zero_widths ? 0.0 : std::sqrt(log_term / (2.0 * count));
        double backup = emp.r(s, a) + reward_width;
        if (t < horizon - 1) {
          // Inner max over the L1 ball: shift mass to the best successor,
          // removing it from the worst ones.
          double radius = zero_widths ? 0.0 : std::sqrt(2.0 * S * log_term / count);
          for (int u = 0; u < S; ++u) p[u] = emp.p(s, a, u);
          double budget = std::min(radius / 2.0, 1.0 - p[order[0]]);
          p[order[0]] += budget;
          for (int j = S - 1; j >= 1 && budget > 0.0; --j) {
            double cut = std::min(budget, p[order[j]]);
            p[order[j]] -= cut;
            budget -= cut;
          }
          double exp_v = 0.0;
          for (int u = 0; u < S; ++u) exp_v += p[u] * v[u];
          backup += exp_v;
        }
        qt[s * A + a] = backup;
      }
    }
    for (int s = 0; s < S; ++s)
      v[s] = *std::max_element(qt + s * A, qt + (s + 1) * A);
  }
  return plan;
}

FiniteHorizonPlan map_plan(const TabularPosterior& posterior, int horizon) {
  return value_iterate(posterior.map_model(), horizon);
}

}  // namespace metarl::mdp
