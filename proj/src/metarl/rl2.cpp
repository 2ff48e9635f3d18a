#include "metarl/rl2.hpp"

#include <cmath>
#include <variant>

namespace metarl::rl2 {

namespace {

const char* family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::kBandit:
      return "bandit";
    case TaskFamily::kTabularMdp:
      return "mdp";
    case TaskFamily::kMaze:
      return "maze";
  }
  throw InvalidArgument("unknown task family");
}

TaskFamily family_from_name(const std::string& name) {
  if (name == "bandit") return TaskFamily::kBandit;
  if (name == "mdp") return TaskFamily::kTabularMdp;
  if (name == "maze") return TaskFamily::kMaze;
  throw InvalidArgument("unknown task family: " + name);
}

}  // namespace

EmbeddingSpec EmbeddingSpec::for_task(const env::TaskSpec& task) {
  EmbeddingSpec s;
  if (const auto* b = std::get_if<env::BanditSpec>(&task)) {
    s.family = TaskFamily::kBandit;
    s.n_actions = b->k;
  } else if (const auto* m = std::get_if<env::TabularMdpSpec>(&task)) {
    s.family = TaskFamily::kTabularMdp;
    s.n_actions = m->n_actions;
    s.n_states = m->n_states;
  } else {
    s.family = TaskFamily::kMaze;
    s.n_actions = 3;
  }
  return s;
}

int EmbeddingSpec::input_width() const {
  switch (family) {
    case TaskFamily::kBandit:
      return 1 + n_actions + 2;
    case TaskFamily::kTabularMdp:
      return n_states + n_actions + 2;
    case TaskFamily::kMaze:
      return 9 * 3 + 4 + n_actions + 2;
  }
  throw InvalidArgument("unknown task family");
}

std::vector<double> EmbeddingSpec::embed(const env::AgentInput& input) const {
  std::vector<double> x(static_cast<std::size_t>(input_width()), 0.0);
  std::size_t pos = 0;
  switch (family) {
    case TaskFamily::kBandit:
      pos = 1;  // dummy observation slot, always zero
      break;
    case TaskFamily::kTabularMdp:
      if (input.observation.size() != 1 || input.observation[0] < 0 ||
          input.observation[0] >= n_states)
        throw InvalidArgument("embed: bad tabular observation");
      x[static_cast<std::size_t>(input.observation[0])] = 1.0;
      pos = static_cast<std::size_t>(n_states);
      break;
    case TaskFamily::kMaze: {
      if (input.observation.size() != 10)
        throw InvalidArgument("embed: bad maze observation");
      for (int c = 0; c < 9; ++c) {
        int v = input.observation[static_cast<std::size_t>(c)];
        if (v < 0 || v > 2) throw InvalidArgument("embed: bad maze cell");
        x[static_cast<std::size_t>(c) * 3 + static_cast<std::size_t>(v)] = 1.0;
      }
      int heading = input.observation[9];
      if (heading < 0 || heading > 3) throw InvalidArgument("embed: bad heading");
      x[27 + static_cast<std::size_t>(heading)] = 1.0;
      pos = 31;
      break;
    }
  }
  int a = input.prev_action;
  if (a == env::kPlaceholderAction) a = 0;
  if (a < 0 || a >= n_actions) throw InvalidArgument("embed: action out of range");
  x[pos + static_cast<std::size_t>(a)] = 1.0;
  x[x.size() - 2] = input.prev_reward;
  x[x.size() - 1] = static_cast<double>(input.prev_done);
  return x;
}

void to_json(nlohmann::json& j, const EmbeddingSpec& s) {
  j = {{"family", family_name(s.family)},
       {"n_actions", s.n_actions},
       {"n_states", s.n_states}};
}

void from_json(const nlohmann::json& j, EmbeddingSpec& s) {
  s.family = family_from_name(j.at("family").get<std::string>());
  s.n_actions = j.at("n_actions").get<int>();
  s.n_states = j.at("n_states").get<int>();
}

namespace {

PolicySnapshot init_impl(Rng& rng, const EmbeddingSpec& embedding, int hidden_width,
                         bool zero_head) {
  if (hidden_width <= 0) throw InvalidArgument("hidden_width must be positive");
  if (embedding.n_actions <= 0) throw InvalidArgument("embedding needs actions");
  PolicySnapshot s;
  s.embedding = embedding;
  s.hidden_width = hidden_width;
  nn::GruNetworkSpec policy_spec{embedding.input_width(), hidden_width,
                                 embedding.n_actions};
  nn::GruNetworkSpec value_spec{embedding.input_width(), hidden_width, 1};
  s.policy_net = zero_head
                     ? nn::init_network_zero_head(s.policy_params, rng, policy_spec, "policy")
                     : nn::init_network(s.policy_params, rng, policy_spec, "policy");
  s.value_net = nn::init_network(s.value_params, rng, value_spec, "value");
  return s;
}

}  // namespace

PolicySnapshot PolicySnapshot::init(Rng& rng, const EmbeddingSpec& embedding,
                                    int hidden_width) {
  return init_impl(rng, embedding, hidden_width, false);
}

PolicySnapshot PolicySnapshot::init_zero_head(Rng& rng, const EmbeddingSpec& embedding,
                                              int hidden_width) {
  return init_impl(rng, embedding, hidden_width, true);
}

void PolicySnapshot::save(const std::string& path) const {
  nlohmann::json meta;
  meta["embedding"] = embedding;
  meta["hidden_width"] = hidden_width;
  meta["value_shift"] = value_shift;
  meta["value_scale"] = value_scale;
  std::vector<std::pair<std::string, const nn::DenseArray*>> tensors;
  for (int i = 0; i < policy_params.count(); ++i)
    tensors.emplace_back(policy_params.name(i), &policy_params.value(i));
  for (int i = 0; i < value_params.count(); ++i)
    tensors.emplace_back(value_params.name(i), &value_params.value(i));
  nn::save_checkpoint(path, meta, tensors);
}

PolicySnapshot PolicySnapshot::load(const std::string& path) {
  nn::LoadedCheckpoint ck = nn::load_checkpoint(path);
  EmbeddingSpec embedding = ck.meta.at("embedding").get<EmbeddingSpec>();
  int hidden = ck.meta.at("hidden_width").get<int>();
  Rng layout_rng(0);
  PolicySnapshot s = init_impl(layout_rng, embedding, hidden, false);
  s.value_shift = ck.meta.value("value_shift", 0.0);
  s.value_scale = ck.meta.value("value_scale", 1.0);
  auto fill = [&](nn::ParamStore& store) {
    for (int i = 0; i < store.count(); ++i) {
      auto it = ck.tensors.find(store.name(i));
      if (it == ck.tensors.end())
        throw IoError("checkpoint missing tensor: " + store.name(i));
      if (it->second.shape != store.value(i).shape)
        throw IoError("checkpoint shape mismatch for tensor: " + store.name(i));
      store.value(i).values = it->second.values;
    }
  };
  fill(s.policy_params);
  fill(s.value_params);
  return s;
}

PolicyState::PolicyState(PolicySnapshot& snapshot)
    : snapshot_(&snapshot),
      policy_tape_(&snapshot.policy_params),
      value_tape_(&snapshot.value_params) {
  reset();
}

void PolicyState::reset() {
  policy_tape_.clear();
  value_tape_.clear();
  policy_net_ = nn::GruTapeNet::build(policy_tape_, snapshot_->policy_net);
  value_net_ = nn::GruTapeNet::build(value_tape_, snapshot_->value_net);
  h_policy_ = policy_tape_.constant_zeros(snapshot_->hidden_width);
  h_value_ = value_tape_.constant_zeros(snapshot_->hidden_width);
  steps_ = 0;
}

std::span<const double> PolicyState::policy_hidden() const {
  return policy_tape_.value(h_policy_);
}

PolicyState::ActResult PolicyState::act(const env::AgentInput& input, Rng& rng,
                                        bool argmax) {
  std::vector<double> x = snapshot_->embedding.embed(input);
  int xp = policy_tape_.constant(x);
  h_policy_ = policy_net_.step(policy_tape_, xp, h_policy_);
  int logits = policy_net_.head(policy_tape_, h_policy_);

  int xv = value_tape_.constant(x);
  h_value_ = value_net_.step(value_tape_, xv, h_value_);
  int v_node = value_net_.head(value_tape_, h_value_);

  ActResult out;
  std::span<const double> raw = policy_tape_.value(logits);
  out.probs.resize(raw.size());
  nn::softmax_stable(raw, out.probs);
  if (argmax) {
    out.action = 0;
    for (std::size_t i = 1; i < out.probs.size(); ++i)
      if (out.probs[i] > out.probs[static_cast<std::size_t>(out.action)])
        out.action = static_cast<int>(i);
  } else {
    out.action = nn::sample_categorical(out.probs, rng);
  }
  out.log_prob = nn::categorical_log_prob(out.probs, out.action);
  out.value =
      value_tape_.scalar(v_node) * snapshot_->value_scale + snapshot_->value_shift;
  ++steps_;
  return out;
}

TrialTrajectory run_trial(env::TrialEnv& e, PolicySnapshot& snapshot, Rng& action_rng,
                          Rng& env_rng, bool argmax) {
  PolicyState state(snapshot);
  TrialTrajectory traj;
  env::AgentInput input = e.reset();
  while (!e.trial_done()) {
    PolicyState::ActResult act = state.act(input, action_rng, argmax);
    env::StepResult step = e.step(act.action, env_rng);
    traj.inputs.push_back(input);
    traj.actions.push_back(act.action);
    traj.rewards.push_back(step.reward);
    traj.log_probs.push_back(act.log_prob);
    traj.values.push_back(act.value);
    traj.entropies.push_back(nn::categorical_entropy(act.probs));
    traj.total_reward += step.reward;
    input = step.next_input;
  }
  return traj;
}

SequenceEval evaluate_sequence(PolicySnapshot& snapshot, const TrialTrajectory& trial) {
  PolicyState state(snapshot);
  SequenceEval out;
  Rng unused(0);
  for (int t = 0; t < trial.length(); ++t) {
    PolicyState::ActResult act =
        state.act(trial.inputs[static_cast<std::size_t>(t)], unused, /*argmax=*/true);
    int a = trial.actions[static_cast<std::size_t>(t)];
    out.log_probs.push_back(nn::categorical_log_prob(act.probs, a));
    out.values.push_back(act.value);
    out.entropies.push_back(nn::categorical_entropy(act.probs));
    out.distributions.push_back(act.probs);
    // Replay is teacher-forced: the recorded action, not the fresh sample,
    // drives the recurrence via the next recorded input.
  }
  return out;
}

void build_policy_graph(PolicySnapshot& snapshot, const TrialTrajectory& trial,
                        std::span<const double> advantages, PolicyGraph& out) {
  if (static_cast<int>(advantages.size()) != trial.length())
    throw InvalidArgument("build_policy_graph: advantage length mismatch");
  nn::Tape& tape = out.tape;
  tape.clear();
  out.logits_nodes.clear();
  out.lp_nodes.clear();
  out.p_old.clear();

  nn::GruTapeNet net = nn::GruTapeNet::build(tape, snapshot.policy_net);
  int h = tape.constant_zeros(snapshot.hidden_width);
  std::vector<int> ratio_nodes, kl_nodes;
  for (int t = 0; t < trial.length(); ++t) {
    std::vector<double> x = snapshot.embedding.embed(trial.inputs[static_cast<std::size_t>(t)]);
    int xn = tape.constant(x);
    h = net.step(tape, xn, h);
    int logits = net.head(tape, h);
    out.logits_nodes.push_back(logits);

    std::span<const double> raw = tape.value(logits);
    std::vector<double> probs(raw.size());
    nn::softmax_stable(raw, probs);
    int a = trial.actions[static_cast<std::size_t>(t)];
    double lp_old = nn::categorical_log_prob(probs, a);

    int lp = tape.log_prob(logits, a);
    out.lp_nodes.push_back(lp);
    ratio_nodes.push_back(
        tape.ratio_advantage(lp, lp_old, advantages[static_cast<std::size_t>(t)]));
    kl_nodes.push_back(tape.kl_fixed(probs, logits));
    out.p_old.push_back(std::move(probs));
  }
  out.surrogate_sum = tape.sum(ratio_nodes);
  out.kl_sum = tape.sum(kl_nodes);
}

void build_value_graph(PolicySnapshot& snapshot, const TrialTrajectory& trial,
                       std::span<const double> returns, ValueGraph& out) {
  if (static_cast<int>(returns.size()) != trial.length())
    throw InvalidArgument("build_value_graph: return length mismatch");
  nn::Tape& tape = out.tape;
  tape.clear();
  out.value_nodes.clear();

  nn::GruTapeNet net = nn::GruTapeNet::build(tape, snapshot.value_net);
  int h = tape.constant_zeros(snapshot.hidden_width);
  std::vector<int> loss_nodes;
  for (int t = 0; t < trial.length(); ++t) {
    std::vector<double> x = snapshot.embedding.embed(trial.inputs[static_cast<std::size_t>(t)]);
    int xn = tape.constant(x);
    h = net.step(tape, xn, h);
    int v_node = net.head(tape, h);
    out.value_nodes.push_back(v_node);
    const double target =
        (returns[static_cast<std::size_t>(t)] - snapshot.value_shift) /
        snapshot.value_scale;
    loss_nodes.push_back(tape.square_diff(v_node, target));
  }
  out.loss_sum = tape.sum(loss_nodes);
}

}  // namespace metarl::rl2
