#pragma once

#include <cstddef>
#include <vector>

namespace parl {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct GridworldConfig {
  int rows = 5;
  int cols = 5;
  Cell start{0, 0};
  Cell goal{4, 4};
  std::vector<Cell> obstacles;
  double step_penalty = -0.01;
  double goal_reward = 1.0;
  double gamma = 0.95;
  std::size_t max_episode_steps = 100;
};

struct StepResult {
  std::size_t state;
  double reward;
  bool done;       // reached the goal
  bool truncated;  // hit the episode step cap
};

// Deterministic grid with four moves (up, down, left, right). Moving into a
// wall or obstacle leaves the agent in place. States are row-major cell ids.
class Gridworld {
 public:
  static constexpr std::size_t kActions = 4;

  explicit Gridworld(GridworldConfig config);

  std::size_t reset();
  StepResult step(std::size_t action);

  // Dynamics without episode bookkeeping.
  StepResult transition(std::size_t state, std::size_t action) const;

  std::size_t num_states() const noexcept {
    return static_cast<std::size_t>(config_.rows) * static_cast<std::size_t>(config_.cols);
  }
  std::size_t start_state() const noexcept { return id(config_.start); }
  std::size_t goal_state() const noexcept { return id(config_.goal); }
  bool is_terminal(std::size_t state) const noexcept { return state == goal_state(); }
  bool is_blocked(std::size_t state) const noexcept { return blocked_[state] != 0; }
  std::size_t state() const noexcept { return state_; }
  const GridworldConfig& config() const noexcept { return config_; }

 private:
  std::size_t id(Cell c) const noexcept {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(config_.cols) +
           static_cast<std::size_t>(c.col);
  }

  GridworldConfig config_;
  std::vector<char> blocked_;
  std::size_t state_;
  std::size_t episode_steps_ = 0;
};

}  // namespace parl
