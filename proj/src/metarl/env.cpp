#include "metarl/env.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace metarl::env {

namespace {

constexpr double kMazeStepPenalty = -0.04;
constexpr double kMazeWallPenalty = -0.001;
constexpr double kMazeTargetReward = 1.0;

// Heading order: 0 = east, 1 = north, 2 = west, 3 = south.
constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, -1, 0, 1};

bool reachable(const MazeSpec& m, int sx, int sy, int tx, int ty) {
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(m.width) * m.height, 0);
  std::queue<std::pair<int, int>> q;
  q.emplace(sx, sy);
  seen[static_cast<std::size_t>(sy) * m.width + sx] = 1;
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    if (x == tx && y == ty) return true;
    for (int d = 0; d < 4; ++d) {
      int nx = x + kDx[d], ny = y + kDy[d];
      if (m.wall_at(nx, ny)) continue;
      auto idx = static_cast<std::size_t>(ny) * m.width + nx;
      if (!seen[idx]) {
        seen[idx] = 1;
        q.emplace(nx, ny);
      }
    }
  }
  return false;
}

}  // namespace

void BanditSpec::validate() const {
  if (k < 1) throw InvalidArgument("BanditSpec: k must be >= 1");
  if (static_cast<int>(arm_means.size()) != k)
    throw InvalidArgument("BanditSpec: arm_means size mismatch");
  for (double p : arm_means)
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("BanditSpec: arm mean outside [0,1]");
}

void TabularMdpSpec::validate() const {
  if (n_states < 1 || n_actions < 1) throw InvalidArgument("TabularMdpSpec: empty state/action set");
  if (horizon < 1) throw InvalidArgument("TabularMdpSpec: horizon must be >= 1");
  if (start_state < 0 || start_state >= n_states)
    throw InvalidArgument("TabularMdpSpec: start_state out of range");
  if (static_cast<int>(transitions.size()) != n_states ||
      static_cast<int>(reward_means.size()) != n_states)
    throw InvalidArgument("TabularMdpSpec: table shape mismatch");
  for (int s = 0; s < n_states; ++s) {
    if (static_cast<int>(transitions[s].size()) != n_actions ||
        static_cast<int>(reward_means[s].size()) != n_actions)
      throw InvalidArgument("TabularMdpSpec: table shape mismatch");
    for (int a = 0; a < n_actions; ++a) {
      const auto& row = transitions[s][a];
      if (static_cast<int>(row.size()) != n_states)
        throw InvalidArgument("TabularMdpSpec: transition row shape mismatch");
      double sum = 0.0;
      for (double p : row) {
        if (p < 0.0) throw InvalidArgument("TabularMdpSpec: negative transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidArgument("TabularMdpSpec: transition row does not sum to 1");
    }
  }
}

void MazeSpec::validate() const {
  if (width < 5 || height < 5) throw InvalidArgument("MazeSpec: dimensions must be >= 5");
  if (walls.size() != static_cast<std::size_t>(width) * height)
    throw InvalidArgument("MazeSpec: wall grid shape mismatch");
  if (wall_at(start_x, start_y) || wall_at(target_x, target_y))
    throw InvalidArgument("MazeSpec: start or target is a wall");
  if (start_x == target_x && start_y == target_y)
    throw InvalidArgument("MazeSpec: start and target coincide");
  if (horizon < 1) throw InvalidArgument("MazeSpec: horizon must be >= 1");
  if (!reachable(*this, start_x, start_y, target_x, target_y))
    throw InvalidArgument("MazeSpec: target unreachable from start");
}

void TrialConfig::validate() const {
  if (episodes_per_trial < 1) throw InvalidArgument("TrialConfig: episodes_per_trial must be >= 1");
  if (!(discount >= 0.0 && discount <= 1.0))
    throw InvalidArgument("TrialConfig: discount outside [0,1]");
}

BanditSpec sample_bandit(Rng& rng, int k) {
  if (k < 1) throw InvalidArgument("sample_bandit: k must be >= 1");
  BanditSpec spec;
  spec.k = k;
  spec.arm_means.resize(k);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < k; ++i) spec.arm_means[i] = unif(rng);
  return spec;
}

TabularMdpSpec sample_tabular_mdp(Rng& rng) {
  TabularMdpSpec spec;
  spec.n_states = 10;
  spec.n_actions = 5;
  spec.reward_stddev = 1.0;
  spec.horizon = 10;
  spec.start_state = 0;
  std::normal_distribution<double> normal(1.0, 1.0);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  spec.transitions.assign(spec.n_states,
                          std::vector<std::vector<double>>(
                              spec.n_actions, std::vector<double>(spec.n_states)));
  spec.reward_means.assign(spec.n_states, std::vector<double>(spec.n_actions));
  for (int s = 0; s < spec.n_states; ++s) {
    for (int a = 0; a < spec.n_actions; ++a) {
      spec.reward_means[s][a] = normal(rng);
      // Flat Dirichlet via normalized unit-rate gamma draws.
      double sum = 0.0;
      auto& row = spec.transitions[s][a];
      for (int t = 0; t < spec.n_states; ++t) {
        row[t] = gamma(rng);
        sum += row[t];
      }
      for (int t = 0; t < spec.n_states; ++t) row[t] /= sum;
    }
  }
  return spec;
}

MazeSpec sample_maze(Rng& rng, int width, int height) {
  if (width < 5 || height < 5 || width % 2 == 0 || height % 2 == 0)
    throw InvalidArgument("sample_maze: dimensions must be odd and >= 5");
  MazeSpec m;
  m.width = width;
  m.height = height;
  m.walls.assign(static_cast<std::size_t>(width) * height, 1);
  auto open = [&](int x, int y) { m.walls[static_cast<std::size_t>(y) * width + x] = 0; };

  // Recursive backtracker over the odd-coordinate cell lattice.
  std::vector<std::pair<int, int>> stack;
  stack.emplace_back(1, 1);
  open(1, 1);
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    int dirs[4] = {0, 1, 2, 3};
    std::shuffle(std::begin(dirs), std::end(dirs), rng);
    bool moved = false;
    for (int d : dirs) {
      int nx = x + 2 * kDx[d], ny = y + 2 * kDy[d];
      if (nx <= 0 || ny <= 0 || nx >= width - 1 || ny >= height - 1) continue;
      if (!m.wall_at(nx, ny)) continue;
      open(x + kDx[d], y + kDy[d]);
      open(nx, ny);
      stack.emplace_back(nx, ny);
      moved = true;
      break;
    }
    if (!moved) stack.pop_back();
  }

  m.start_x = 1;
  m.start_y = 1;
  std::vector<std::pair<int, int>> candidates;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (!m.wall_at(x, y) && !(x == m.start_x && y == m.start_y)) candidates.emplace_back(x, y);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  auto [tx, ty] = candidates[pick(rng)];
  m.target_x = tx;
  m.target_y = ty;
  m.validate();
  return m;
}

int action_count(const TaskSpec& task) {
  if (std::holds_alternative<BanditSpec>(task)) return std::get<BanditSpec>(task).k;
  if (std::holds_alternative<TabularMdpSpec>(task))
    return std::get<TabularMdpSpec>(task).n_actions;
  return 3;  // maze: forward, turn-left, turn-right
}

TrialEnv::TrialEnv(TaskSpec task, TrialConfig config)
    : task_(std::move(task)), config_(config) {
  config_.validate();
  std::visit([](const auto& t) { t.validate(); }, task_);
  n_actions_ = action_count(task_);
  reset();
}

void TrialEnv::reset_episode_state() {
  step_in_episode_ = 0;
  if (const auto* mdp = std::get_if<TabularMdpSpec>(&task_)) {
    mdp_state_ = mdp->start_state;
  } else if (const auto* maze = std::get_if<MazeSpec>(&task_)) {
    agent_x_ = maze->start_x;
    agent_y_ = maze->start_y;
    heading_ = 0;
  }
}

AgentInput TrialEnv::reset() {
  episode_ = 0;
  total_steps_ = 0;
  trial_done_ = false;
  reset_episode_state();
  return initial_input();
}

AgentInput TrialEnv::initial_input() const {
  AgentInput in;
  in.observation = current_observation();
  in.prev_action = kPlaceholderAction;
  in.prev_reward = 0.0;
  in.prev_done = 0;
  return in;
}

std::vector<int> TrialEnv::current_observation() const {
  if (std::holds_alternative<BanditSpec>(task_)) return {};
  if (std::holds_alternative<TabularMdpSpec>(task_)) return {mdp_state_};
  const auto& maze = std::get<MazeSpec>(task_);
  std::vector<int> obs;
  obs.reserve(10);
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      int x = agent_x_ + dx, y = agent_y_ + dy;
      if (maze.wall_at(x, y))
        obs.push_back(1);
      else if (x == maze.target_x && y == maze.target_y)
        obs.push_back(2);
      else
        obs.push_back(0);
    }
  }
  obs.push_back(heading_);
  return obs;
}

StepResult TrialEnv::step(int action, Rng& rng) {
  if (trial_done_) throw ProtocolViolation("TrialEnv::step: trial already finished");
  if (action < 0 || action >= n_actions_)
    throw InvalidArgument("TrialEnv::step: action out of range");

  double reward = 0.0;
  bool episode_done = false;

  if (const auto* bandit = std::get_if<BanditSpec>(&task_)) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    reward = unif(rng) < bandit->arm_means[action] ? 1.0 : 0.0;
    episode_done = true;  // each pull is a horizon-1 episode
  } else if (const auto* mdp = std::get_if<TabularMdpSpec>(&task_)) {
    std::normal_distribution<double> noise(0.0, mdp->reward_stddev);
    reward = mdp->reward_means[mdp_state_][action] + noise(rng);
    const auto& row = mdp->transitions[mdp_state_][action];
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng), acc = 0.0;
    int next = mdp->n_states - 1;
    for (int t = 0; t < mdp->n_states; ++t) {
      acc += row[t];
      if (u < acc) {
        next = t;
        break;
      }
    }
    mdp_state_ = next;
    ++step_in_episode_;
    episode_done = step_in_episode_ >= mdp->horizon;
  } else {
    const auto& maze = std::get<MazeSpec>(task_);
    reward = kMazeStepPenalty;
    if (action == 0) {
      int nx = agent_x_ + kDx[heading_], ny = agent_y_ + kDy[heading_];
      if (maze.wall_at(nx, ny)) {
        reward += kMazeWallPenalty;
      } else {
        agent_x_ = nx;
        agent_y_ = ny;
        if (nx == maze.target_x && ny == maze.target_y) {
          reward += kMazeTargetReward;
          episode_done = true;
        }
      }
    } else if (action == 1) {
      heading_ = (heading_ + 1) % 4;
    } else {
      heading_ = (heading_ + 3) % 4;
    }
    ++step_in_episode_;
    if (step_in_episode_ >= maze.horizon) episode_done = true;
  }

  ++total_steps_;

  StepResult result;
  if (std::holds_alternative<TabularMdpSpec>(task_)) result.transition_state = mdp_state_;
  result.reward = reward;
  result.episode_done = episode_done;
  if (episode_done) {
    ++episode_;
    if (episode_ >= config_.episodes_per_trial) {
      trial_done_ = true;
    } else {
      reset_episode_state();
    }
  }
  result.trial_done = trial_done_;
  result.next_input.observation = current_observation();
  result.next_input.prev_action = action;
  result.next_input.prev_reward = reward;
  result.next_input.prev_done = episode_done ? 1 : 0;
  return result;
}

void to_json(nlohmann::json& j, const BanditSpec& s) {
  j = {{"family", "bandit"}, {"k", s.k}, {"arm_means", s.arm_means}};
}
void from_json(const nlohmann::json& j, BanditSpec& s) {
  j.at("k").get_to(s.k);
  j.at("arm_means").get_to(s.arm_means);
}
void to_json(nlohmann::json& j, const TabularMdpSpec& s) {
  j = {{"family", "mdp"},
       {"n_states", s.n_states},
       {"n_actions", s.n_actions},
       {"transitions", s.transitions},
       {"reward_means", s.reward_means},
       {"reward_stddev", s.reward_stddev},
       {"horizon", s.horizon},
       {"start_state", s.start_state}};
}
void from_json(const nlohmann::json& j, TabularMdpSpec& s) {
  j.at("n_states").get_to(s.n_states);
  j.at("n_actions").get_to(s.n_actions);
  j.at("transitions").get_to(s.transitions);
  j.at("reward_means").get_to(s.reward_means);
  j.at("reward_stddev").get_to(s.reward_stddev);
  j.at("horizon").get_to(s.horizon);
  j.at("start_state").get_to(s.start_state);
}
void to_json(nlohmann::json& j, const MazeSpec& s) {
  j = {{"family", "maze"},   {"width", s.width},       {"height", s.height},
       {"walls", s.walls},   {"target", {s.target_x, s.target_y}},
       {"start", {s.start_x, s.start_y}},              {"horizon", s.horizon}};
}
void from_json(const nlohmann::json& j, MazeSpec& s) {
  j.at("width").get_to(s.width);
  j.at("height").get_to(s.height);
  j.at("walls").get_to(s.walls);
  s.target_x = j.at("target")[0];
  s.target_y = j.at("target")[1];
  s.start_x = j.at("start")[0];
  s.start_y = j.at("start")[1];
  j.at("horizon").get_to(s.horizon);
}

}  // namespace metarl::env
