#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "parl/harness.hpp"

namespace parl {

// INI training configuration. Sections and keys (all optional, defaults from
// TrainConfig):
//
//   [env]     rows cols start goal obstacles step_penalty goal_reward gamma
//             max_episode_steps      cells are "row,col", obstacles "r,c;r,c"
//   [buffer]  capacity fanout alpha epsilon beta
//   [threads] actors learners
//   [train]   steps batch_size update_interval learning_rate explore_epsilon
//             seed lockstep metrics_every initial_q actor_lead
//   [output]  metrics summary        file paths used by the CLI
//
// Unknown sections or keys are rejected.
struct TrainFile {
  TrainConfig config;
  std::string metrics_path;
  std::string summary_path;
};

TrainFile parse_train_config(std::istream& in);
TrainFile load_train_config(const std::filesystem::path& path);

}  // namespace parl
