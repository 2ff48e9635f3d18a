#pragma once

#include <vector>

#include "metarl/common.hpp"
#include "metarl/env.hpp"

namespace metarl::mdp {

// Mean/sampled model that finite-horizon planning runs on.
struct TabularModel {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transitions;  // [s][a][s'], row-major
  std::vector<double> rewards;      // [s][a]

  double& p(int s, int a, int t) {
    return transitions[(static_cast<std::size_t>(s) * n_actions + a) * n_states + t];
  }
  double p(int s, int a, int t) const {
    return transitions[(static_cast<std::size_t>(s) * n_actions + a) * n_states + t];
  }
  double& r(int s, int a) { return rewards[static_cast<std::size_t>(s) * n_actions + a]; }
  double r(int s, int a) const { return rewards[static_cast<std::size_t>(s) * n_actions + a]; }

  static TabularModel zeros(int n_states, int n_actions);
  static TabularModel from_spec(const env::TabularMdpSpec& spec);
  void validate() const;
};

// Conjugate sufficient statistics: Dirichlet transition counts and a
// known-variance Normal posterior per (s,a) reward mean.
struct TabularPosterior {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> dirichlet;     // [s][a][s'], counts incl. all-ones prior
  std::vector<double> reward_mean;   // posterior mean m
  std::vector<double> reward_count;  // pseudo-count kappa (prior weight + obs)
  std::vector<double> visits;        // n(s,a), observations only

  TabularPosterior(int n_states, int n_actions, double prior_mean = 1.0);

  std::size_t sa(int s, int a) const { return static_cast<std::size_t>(s) * n_actions + a; }
  void update(int s, int a, double r, int s_next);

  TabularModel mean_model() const;
  // Dirichlet MAP with the all-ones prior: normalized observed counts, uniform
  // where a row has no observations. Reward MAP = posterior mean.
  TabularModel map_model() const;
  TabularModel sample_model(Rng& rng) const;
};

struct FiniteHorizonPlan {
  int horizon = 0;
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> q;  // [t][s][a]

  double q_at(int t, int s, int a) const {
    return q[(static_cast<std::size_t>(t) * n_states + s) * n_actions + a];
  }
  int greedy_action(int t, int s) const;
  double root_value(int start_state) const;
};

FiniteHorizonPlan value_iterate(const TabularModel& model, int horizon);

FiniteHorizonPlan psrl_plan(const TabularPosterior& posterior, Rng& rng, int horizon);

// Optimistic PSRL: element-wise max of Q over sample_count posterior draws.
FiniteHorizonPlan opsrl_plan(const TabularPosterior& posterior, int sample_count, Rng& rng,
                             int horizon);

FiniteHorizonPlan beb_plan(const TabularPosterior& posterior, double bonus, int horizon);

FiniteHorizonPlan ucrl2_plan(const TabularPosterior& posterior, double delta, int horizon,
                             bool zero_widths = false);

FiniteHorizonPlan map_plan(const TabularPosterior& posterior, int horizon);

}  // namespace metarl::mdp
