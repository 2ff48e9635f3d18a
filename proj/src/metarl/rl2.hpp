#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "metarl/env.hpp"
#include "metarl/nn.hpp"

namespace metarl::rl2 {

enum class TaskFamily { kBandit, kTabularMdp, kMaze };

// Fixed input encoding per task family:
//   bandit:  [0 | action one-hot | r | d]
//   mdp:     [state one-hot | action one-hot | r | d]
//   maze:    [9 cells x 3-way one-hot | heading 4-way | action one-hot | r | d]
// The placeholder action maps onto the one-hot of action 0.
struct EmbeddingSpec {
  TaskFamily family = TaskFamily::kBandit;
  int n_actions = 0;
  int n_states = 0;  // tabular MDP only

  static EmbeddingSpec for_task(const env::TaskSpec& task);
  int input_width() const;
  std::vector<double> embed(const env::AgentInput& input) const;
};

void to_json(nlohmann::json& j, const EmbeddingSpec& s);
void from_json(const nlohmann::json& j, EmbeddingSpec& s);

// Policy and value networks share the architecture up to the head width.
// Each network owns its parameter store so the outer loop can update them
// independently.
struct PolicySnapshot {
  EmbeddingSpec embedding;
  int hidden_width = 0;
  nn::ParamStore policy_params, value_params;
  nn::GruNetworkParams policy_net, value_net;
  // The value head regresses whitened return targets; predictions are mapped
  // back as v = raw * value_scale + value_shift. Keeps the head's required
  // output magnitude O(1) regardless of the task family's return scale.
  double value_shift = 0.0;
  double value_scale = 1.0;

  static PolicySnapshot init(Rng& rng, const EmbeddingSpec& embedding, int hidden_width);
  // Head scale zeroed: uniform policy until trained (distillation start).
  static PolicySnapshot init_zero_head(Rng& rng, const EmbeddingSpec& embedding,
                                       int hidden_width);

  void save(const std::string& path) const;
  static PolicySnapshot load(const std::string& path);
};

// Per-trial recurrent state. Hidden vectors start at zero and are never reset
// within a trial; episode boundaries only enter through the d-flag input.
class PolicyState {
 public:
  explicit PolicyState(PolicySnapshot& snapshot);

  struct ActResult {
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
    std::vector<double> probs;
  };

  ActResult act(const env::AgentInput& input, Rng& rng, bool argmax = false);
  void reset();  // new trial: h = 0, counter = 0
  int steps() const { return steps_; }
  std::span<const double> policy_hidden() const;

 private:
  PolicySnapshot* snapshot_;
  nn::Tape policy_tape_, value_tape_;
  nn::GruTapeNet policy_net_, value_net_;
  int h_policy_ = -1, h_value_ = -1;
  int steps_ = 0;
};

struct TrialTrajectory {
  std::vector<env::AgentInput> inputs;  // input consumed at each step
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> log_probs;  // recorded at rollout
  std::vector<double> values;     // recorded at rollout
  std::vector<double> entropies;  // recorded at rollout
  double total_reward = 0.0;
  int length() const { return static_cast<int>(actions.size()); }
};

// Rolls one full trial; trajectory ends exactly at trial_done.
TrialTrajectory run_trial(env::TrialEnv& e, PolicySnapshot& snapshot, Rng& action_rng,
                          Rng& env_rng, bool argmax = false);

struct SequenceEval {
  std::vector<double> log_probs, values, entropies;
  std::vector<std::vector<double>> distributions;
};

// Teacher-forced replay of both networks over a recorded trial.
SequenceEval evaluate_sequence(PolicySnapshot& snapshot, const TrialTrajectory& trial);

// Differentiable replay graphs for the outer loop.
struct PolicyGraph {
  nn::Tape tape;
  std::vector<int> logits_nodes;
  std::vector<int> lp_nodes;
  int surrogate_sum = -1;  // sum_t ratio_t * advantage_t
  int kl_sum = -1;         // sum_t KL(pi_old || pi_theta)
  std::vector<std::vector<double>> p_old;

  explicit PolicyGraph(nn::ParamStore* store) : tape(store) {}
};

// Builds the surrogate/KL graph at the current parameters (which therefore
// define pi_old). advantages must align with the trial steps.
void build_policy_graph(PolicySnapshot& snapshot, const TrialTrajectory& trial,
                        std::span<const double> advantages, PolicyGraph& out);

struct ValueGraph {
  nn::Tape tape;
  std::vector<int> value_nodes;
  int loss_sum = -1;  // sum_t (v_t - return_t)^2

  explicit ValueGraph(nn::ParamStore* store) : tape(store) {}
};

void build_value_graph(PolicySnapshot& snapshot, const TrialTrajectory& trial,
                       std::span<const double> returns, ValueGraph& out);

}  // namespace metarl::rl2
