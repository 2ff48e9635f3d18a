#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "json.hpp"
#include "metarl/common.hpp"

namespace metarl::env {

// Sentinel for "no previous action" at the first step of a trial.
inline constexpr int kPlaceholderAction = -1;

struct BanditSpec {
  int k = 0;
  std::vector<double> arm_means;

  void validate() const;
};

struct TabularMdpSpec {
  int n_states = 10;
  int n_actions = 5;
  // transitions[s][a] is a length-n_states probability row.
  std::vector<std::vector<std::vector<double>>> transitions;
  std::vector<std::vector<double>> reward_means;
  double reward_stddev = 1.0;
  int horizon = 10;
  int start_state = 0;

  void validate() const;
};

struct MazeSpec {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> walls;  // row-major, 1 = wall
  int target_x = 0, target_y = 0;
  int start_x = 1, start_y = 1;
  int horizon = 250;

  bool wall_at(int x, int y) const {
    if (x < 0 || y < 0 || x >= width || y >= height) return true;
    return walls[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void validate() const;
};

using TaskSpec = std::variant<BanditSpec, TabularMdpSpec, MazeSpec>;

struct TrialConfig {
  int episodes_per_trial = 1;
  double discount = 0.99;

  void validate() const;
};

// Observation payload by family:
//   bandit: empty; tabular MDP: {state}; maze: 9 cell codes (0 open, 1 wall,
//   2 target) followed by heading in 0..3.
struct AgentInput {
  std::vector<int> observation;
  int prev_action = kPlaceholderAction;
  double prev_reward = 0.0;
  int prev_done = 0;
};

struct StepResult {
  AgentInput next_input;
  double reward = 0.0;
  bool episode_done = false;
  bool trial_done = false;
  // Tabular MDP only: the post-transition state before any episode reset,
  // so model-building agents can observe the final transition of an episode.
  int transition_state = -1;
};

BanditSpec sample_bandit(Rng& rng, int k);
TabularMdpSpec sample_tabular_mdp(Rng& rng);
MazeSpec sample_maze(Rng& rng, int width, int height);

int action_count(const TaskSpec& task);

// Serves one task as a sequence of episodes_per_trial episodes, producing the
// (obs, prev-action, prev-reward, prev-done) input stream.
class TrialEnv {
 public:
  TrialEnv(TaskSpec task, TrialConfig config);

  // Fresh trial: counters zeroed, first input carries placeholder prev fields.
  AgentInput reset();

  StepResult step(int action, Rng& rng);

  bool trial_done() const { return trial_done_; }
  int episode_index() const { return episode_; }
  int steps_taken() const { return total_steps_; }
  int num_actions() const { return n_actions_; }
  const TaskSpec& task() const { return task_; }
  const TrialConfig& config() const { return config_; }

 private:
  AgentInput initial_input() const;
  std::vector<int> current_observation() const;
  void reset_episode_state();

  TaskSpec task_;
  TrialConfig config_;
  int n_actions_ = 0;
  int episode_ = 0;
  int step_in_episode_ = 0;
  int total_steps_ = 0;
  bool trial_done_ = false;

  // tabular MDP state
  int mdp_state_ = 0;
  // maze state
  int agent_x_ = 0, agent_y_ = 0, heading_ = 0;
};

void to_json(nlohmann::json& j, const BanditSpec& s);
void from_json(const nlohmann::json& j, BanditSpec& s);
void to_json(nlohmann::json& j, const TabularMdpSpec& s);
void from_json(const nlohmann::json& j, TabularMdpSpec& s);
void to_json(nlohmann::json& j, const MazeSpec& s);
void from_json(const nlohmann::json& j, MazeSpec& s);

}  // namespace metarl::env
