#include "parl/gridworld.hpp"

#include <cmath>
#include <string>

#include "parl/error.hpp"

namespace parl {

namespace {

bool inside(const GridworldConfig& c, Cell cell) {
  return cell.row >= 0 && cell.row < c.rows && cell.col >= 0 && cell.col < c.cols;
}

}  // namespace

Gridworld::Gridworld(GridworldConfig config) : config_(std::move(config)) {
  if (config_.rows < 1 || config_.cols < 1) throw ParameterError("grid must be at least 1x1");
  if (!inside(config_, config_.start)) throw ParameterError("start cell outside the grid");
  if (!inside(config_, config_.goal)) throw ParameterError("goal cell outside the grid");
  if (config_.start == config_.goal) throw ParameterError("start and goal coincide");
  if (!(config_.gamma > 0.0 && config_.gamma < 1.0)) {
    throw ParameterError("discount must lie in (0, 1)");
  }
  if (!std::isfinite(config_.step_penalty) || !std::isfinite(config_.goal_reward)) {
    throw ParameterError("rewards must be finite");
  }
  if (config_.max_episode_steps < 1) throw ParameterError("episode step cap must be >= 1");

  blocked_.assign(num_states(), 0);
  for (const Cell& o : config_.obstacles) {
    if (!inside(config_, o)) throw ParameterError("obstacle outside the grid");
    if (o == config_.start || o == config_.goal) {
      throw ParameterError("obstacle on the start or goal cell");
    }
    blocked_[id(o)] = 1;
  }
  state_ = start_state();
}

std::size_t Gridworld::reset() {
  state_ = start_state();
  episode_steps_ = 0;
  return state_;
}

StepResult Gridworld::transition(std::size_t state, std::size_t action) const {
  if (action >= kActions) throw ParameterError("action " + std::to_string(action) + " invalid");
  if (state >= num_states()) throw ParameterError("state " + std::to_string(state) + " invalid");
  Cell c{static_cast<int>(state / config_.cols), static_cast<int>(state % config_.cols)};
  Cell next = c;
  switch (action) {
    case 0: --next.row; break;
    case 1: ++next.row; break;
    case 2: --next.col; break;
    default: ++next.col; break;
  }
  if (!inside(config_, next) || blocked_[id(next)]) next = c;
  const std::size_t s = id(next);
  if (s == goal_state()) return {s, config_.goal_reward, true, false};
  return {s, config_.step_penalty, false, false};
}

StepResult Gridworld::step(std::size_t action) {
  StepResult r = transition(state_, action);
  state_ = r.state;
  ++episode_steps_;
  r.truncated = !r.done && episode_steps_ >= config_.max_episode_steps;
  return r;
}

}  // namespace parl
