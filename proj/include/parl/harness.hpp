#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "parl/gridworld.hpp"
#include "parl/replay_buffer.hpp"

namespace parl {

// Versioned, immutable Q-table. Tabular Q is linear over one-hot features.
struct WeightsSnapshot {
  std::uint64_t version = 0;
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> q;

  double at(std::size_t s, std::size_t a) const { return q[s * num_actions + a]; }
  double max_value(std::size_t s) const;
  // Lowest-index argmax.
  std::size_t greedy_action(std::size_t s) const;
};

using SnapshotPtr = std::shared_ptr<const WeightsSnapshot>;

// 64-bit FNV-1a over the raw bytes of the table.
std::uint64_t weights_checksum(const WeightsSnapshot& weights);

// Publication point for snapshots. Readers always get one complete version.
class SnapshotStore {
 public:
  explicit SnapshotStore(SnapshotPtr initial);

  void publish(SnapshotPtr snapshot);
  // Called under the store lock for every published snapshot, in order.
  // Install before anything is published.
  void set_observer(std::function<void(const WeightsSnapshot&)> observer);
  SnapshotPtr latest() const;
  std::uint64_t version() const noexcept { return version_.load(std::memory_order_acquire); }
  // Blocks until version() >= v.
  void wait_for_version(std::uint64_t v) const;

 private:
  mutable std::mutex mutex_;
  SnapshotPtr current_;
  std::atomic<std::uint64_t> version_;
  std::function<void(const WeightsSnapshot&)> observer_;
};

struct QUpdate {
  std::size_t state;
  std::size_t action;
  double delta;  // additive change to Q(state, action)
};

struct GradientMessage {
  std::size_t learner_id = 0;
  std::vector<std::size_t> indices;
  std::vector<QUpdate> updates;
  std::vector<double> td_errors;
};

// Single applier that sums learner updates into the table and publishes a new
// snapshot per applied batch of messages. Messages submitted from any thread
// are applied in arrival order by the worker started with start().
class ParameterServer {
 public:
  ParameterServer(SnapshotStore& store, const WeightsSnapshot& initial);
  ~ParameterServer();

  ParameterServer(const ParameterServer&) = delete;
  ParameterServer& operator=(const ParameterServer&) = delete;

  // Applies messages synchronously and publishes the result.
  SnapshotPtr apply(std::span<const GradientMessage> messages);

  void start();
  // Queues a message for the worker. Returns its 1-based ticket.
  std::uint64_t submit(GradientMessage message);
  // Blocks until the worker has applied the message with this ticket.
  void wait_applied(std::uint64_t ticket) const;
  // Drains the queue and joins the worker.
  void stop();

  std::uint64_t applied_messages() const noexcept {
    return applied_.load(std::memory_order_acquire);
  }

 private:
  void run();

  SnapshotStore& store_;
  std::mutex apply_mutex_;
  std::vector<double> table_;
  std::size_t num_states_;
  std::size_t num_actions_;
  std::uint64_t version_;
  std::atomic<std::uint64_t> applied_{0};

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<GradientMessage> queue_;
  std::uint64_t submitted_ = 0;
  std::atomic<std::uint64_t> drained_{0};
  bool stopping_ = false;
  std::thread worker_;
};

// Independent RNG stream per (seed, role, worker id).
enum class StreamRole : std::uint32_t { actor = 1, learner = 2, evaluation = 3 };
Rng make_stream(std::uint64_t seed, StreamRole role, std::size_t id);

// Shared progress counters for one training run. Learner iteration k may run
// once k * update_interval steps are collected. Actor step i waits until the
// learners have finished every iteration owed by steps < i - lead_limit, so
// collection never runs more than lead_limit steps ahead of consumption
// (0 disables the limit). Lockstep uses a lead of zero, which reproduces the
// single-threaded interleaving exactly.
class RunControl {
 public:
  RunControl(std::uint64_t step_budget, double update_interval, bool lockstep,
             std::uint64_t lead_limit = 0);

  // Claims the next 1-based global step; false once the budget is spent.
  bool claim_step(std::uint64_t& step);
  void wait_learners_before(std::uint64_t step) const;
  void step_done();

  // Claims the next 1-based learner iteration; false once all are claimed.
  bool claim_iteration(std::uint64_t& k);
  // False if the run was aborted while waiting.
  bool wait_collected_for(std::uint64_t k) const;
  void iteration_done();

  void abort();
  bool aborted() const noexcept { return aborted_.load(std::memory_order_acquire); }

  std::uint64_t collected() const noexcept { return collected_.load(std::memory_order_acquire); }
  std::uint64_t iterations_done() const noexcept {
    return iterations_done_.load(std::memory_order_acquire);
  }
  std::uint64_t total_iterations() const noexcept { return total_iterations_; }
  bool lockstep() const noexcept { return lockstep_; }

 private:
  std::uint64_t owed_iterations(std::uint64_t steps) const;
  template <class Pred>
  bool wait_until(Pred pred) const;
  void wake();

  std::uint64_t step_budget_;
  double update_interval_;
  bool lockstep_;
  std::uint64_t lead_limit_;
  std::uint64_t total_iterations_;
  std::atomic<std::uint64_t> next_step_{0};
  std::atomic<std::uint64_t> next_iteration_{0};
  std::atomic<std::uint64_t> collected_{0};
  std::atomic<std::uint64_t> iterations_done_{0};
  std::atomic<bool> aborted_{false};

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  mutable std::atomic<int> waiters_{0};
};

struct MetricsRow {
  double seconds = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t batches = 0;
  double ratio = 0.0;
  double eval_return = 0.0;
};

class MetricsLog {
 public:
  void record(MetricsRow row);
  std::vector<MetricsRow> rows() const;

 private:
  mutable std::mutex mutex_;
  std::vector<MetricsRow> rows_;
};

// Undiscounted return of the greedy policy from the start state, capped at the
// episode step limit.
double greedy_return(const GridworldConfig& env, const WeightsSnapshot& weights);
std::vector<std::size_t> greedy_policy(const WeightsSnapshot& weights);

struct ActorHooks {
  RunControl* control = nullptr;
  MetricsLog* metrics = nullptr;
  std::uint64_t metrics_every = 0;
  const std::chrono::steady_clock::time_point* started = nullptr;
};

// Interaction loop for one actor. Runs `steps` iterations, or until the
// shared budget in hooks.control is exhausted when one is given. Returns the
// number of steps taken.
std::uint64_t actor_loop(Gridworld& env, PrioritizedReplayBuffer& buffer,
                         const SnapshotStore& snapshots, std::uint64_t steps,
                         double explore_epsilon, Rng& rng, const ActorHooks& hooks = {});

struct LearnerSettings {
  std::size_t id = 0;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  double gamma = 0.95;
};

// One learning step: sample, fetch priorities, weight, compute TD errors
// against `weights`, and build the message. Does not touch the server.
GradientMessage learner_step(PrioritizedReplayBuffer& buffer, const WeightsSnapshot& weights,
                             const LearnerSettings& settings, Rng& rng);

// Runs `iterations` learner steps (or, with a RunControl, claims iterations
// until none remain), sending each message to the server and refreshing
// priorities with the new TD errors. Before computing the next step a learner
// waits for its previous message to be applied, so it never works on weights
// that miss its own updates.
std::uint64_t learner_loop(PrioritizedReplayBuffer& buffer, ParameterServer& server,
                           const SnapshotStore& snapshots, const LearnerSettings& settings,
                           std::uint64_t iterations, Rng& rng, RunControl* control = nullptr);

struct TrainConfig {
  GridworldConfig env;
  BufferConfig buffer{.capacity = 16384};
  std::size_t actors = 1;
  std::size_t learners = 1;
  std::uint64_t steps = 200000;
  std::size_t batch_size = 32;
  double update_interval = 1.0;
  double learning_rate = 0.1;
  double explore_epsilon = 0.1;
  std::uint64_t seed = 1;
  // Starting value of every Q entry. Values at or above the best achievable
  // return make untried actions look attractive, which drives exploration.
  double initial_q = 1.0;
  // Most steps actors may collect ahead of what learners have consumed;
  // 0 lets actors run free.
  std::uint64_t actor_lead = 1024;
  bool lockstep = false;
  std::uint64_t metrics_every = 10000;
  // Keep the checksum of every published Q-table in TrainingReport::trajectory.
  bool record_trajectory = false;
};

// Rejects inconsistent configurations, including capacity < 64 x actors.
void validate(const TrainConfig& config);

struct TrainingReport {
  double wall_seconds = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t batches = 0;
  double steps_per_sec = 0.0;
  double batches_per_sec = 0.0;
  double ratio = 0.0;
  double final_return = 0.0;
  std::vector<std::size_t> policy;
  SnapshotPtr weights;
  std::vector<MetricsRow> metrics;
  std::vector<std::string> failures;
  std::vector<std::uint64_t> trajectory;

  std::uint64_t weights_checksum() const;
  std::string summary_line() const;
  void write_metrics_csv(std::ostream& out) const;
  void write_summary(std::ostream& out) const;
};

TrainingReport train(const TrainConfig& config);

WeightsSnapshot zero_weights(std::size_t num_states, std::size_t num_actions);
// Version-0 table for a run: every entry set to config.initial_q.
WeightsSnapshot initial_weights(const TrainConfig& config);

}  // namespace parl
