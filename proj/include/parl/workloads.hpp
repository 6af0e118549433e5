#pragma once

#include <memory>

#include "parl/dse.hpp"
#include "parl/harness.hpp"

namespace parl {

// Harness components wired up for profiling one role in isolation. The buffer
// is pre-filled to capacity with random-policy transitions so learners never
// wait on actors.
class RoleWorkbench {
 public:
  explicit RoleWorkbench(const TrainConfig& config);

  // Each op is one environment step plus insert.
  WorkloadFactory actor_workload();
  // Each op is one learner iteration applied synchronously on the server.
  WorkloadFactory learner_workload();
  WorkloadFactory workload(Role role) {
    return role == Role::actor ? actor_workload() : learner_workload();
  }

  PrioritizedReplayBuffer& buffer() { return *buffer_; }

 private:
  TrainConfig config_;
  std::unique_ptr<PrioritizedReplayBuffer> buffer_;
  std::unique_ptr<SnapshotStore> store_;
  std::unique_ptr<ParameterServer> server_;
};

}  // namespace parl
