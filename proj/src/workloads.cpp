#include "parl/workloads.hpp"

namespace parl {

RoleWorkbench::RoleWorkbench(const TrainConfig& config) : config_(config) {
  validate(config_);
  BufferConfig bc = config_.buffer;
  bc.state_dim = 1;
  bc.action_kind = ActionKind::discrete;
  buffer_ = std::make_unique<PrioritizedReplayBuffer>(bc);

  Gridworld env(config_.env);
  const WeightsSnapshot initial = initial_weights(config_);
  store_ = std::make_unique<SnapshotStore>(std::make_shared<const WeightsSnapshot>(initial));
  server_ = std::make_unique<ParameterServer>(*store_, initial);

  Rng rng = make_stream(config_.seed, StreamRole::evaluation, 0);
  actor_loop(env, *buffer_, *store_, bc.capacity, 1.0, rng);
}

WorkloadFactory RoleWorkbench::actor_workload() {
  return [this](std::size_t thread_id) -> WorkloadOp {
    struct State {
      Gridworld env;
      Rng rng;
      std::size_t obs;
      Transition t;
    };
    auto st = std::make_shared<State>(State{Gridworld(config_.env),
                                            make_stream(config_.seed, StreamRole::actor, thread_id),
                                            0, Transition{}});
    st->obs = st->env.reset();
    st->t.state.resize(1);
    st->t.next_state.resize(1);
    return [this, st] {
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      std::uniform_int_distribution<std::size_t> any_action(0, Gridworld::kActions - 1);
      const SnapshotPtr weights = store_->latest();
      const std::size_t a = coin(st->rng) < config_.explore_epsilon
                                ? any_action(st->rng)
                                : weights->greedy_action(st->obs);
      const StepResult r = st->env.step(a);
      st->t.state[0] = static_cast<double>(st->obs);
      st->t.action = static_cast<DiscreteAction>(a);
      st->t.next_state[0] = static_cast<double>(r.state);
      st->t.reward = r.reward;
      st->t.done = r.done;
      buffer_->insert(st->t);
      st->obs = (r.done || r.truncated) ? st->env.reset() : r.state;
    };
  };
}

WorkloadFactory RoleWorkbench::learner_workload() {
  return [this](std::size_t thread_id) -> WorkloadOp {
    auto rng = std::make_shared<Rng>(make_stream(config_.seed, StreamRole::learner, thread_id));
    const LearnerSettings settings{thread_id, config_.batch_size, config_.learning_rate,
                                   config_.env.gamma};
    return [this, rng, settings] {
      const SnapshotPtr weights = store_->latest();
      GradientMessage msg = learner_step(*buffer_, *weights, settings, *rng);
      server_->apply(std::span<const GradientMessage>(&msg, 1));
      buffer_->update_priority(msg.indices, msg.td_errors);
    };
  };
}

}  // namespace parl
