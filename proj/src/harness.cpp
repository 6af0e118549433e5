#include "parl/harness.hpp"

#include <cmath>
#include <cstring>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "parl/error.hpp"

namespace parl {

// --- weights ---------------------------------------------------------------

double WeightsSnapshot::max_value(std::size_t s) const {
  const double* row = q.data() + s * num_actions;
  double best = row[0];
  for (std::size_t a = 1; a < num_actions; ++a) best = std::max(best, row[a]);
  return best;
}

std::size_t WeightsSnapshot::greedy_action(std::size_t s) const {
  const double* row = q.data() + s * num_actions;
  std::size_t best = 0;
  for (std::size_t a = 1; a < num_actions; ++a) {
    if (row[a] > row[best]) best = a;
  }
  return best;
}

WeightsSnapshot zero_weights(std::size_t num_states, std::size_t num_actions) {
  return WeightsSnapshot{0, num_states, num_actions, std::vector<double>(num_states * num_actions)};
}

WeightsSnapshot initial_weights(const TrainConfig& config) {
  const Gridworld env(config.env);
  WeightsSnapshot w = zero_weights(env.num_states(), Gridworld::kActions);
  std::fill(w.q.begin(), w.q.end(), config.initial_q);
  return w;
}

SnapshotStore::SnapshotStore(SnapshotPtr initial)
    : current_(std::move(initial)), version_(current_->version) {}

void SnapshotStore::set_observer(std::function<void(const WeightsSnapshot&)> observer) {
  std::lock_guard lock(mutex_);
  observer_ = std::move(observer);
}

void SnapshotStore::publish(SnapshotPtr snapshot) {
  {
    std::lock_guard lock(mutex_);
    if (observer_) observer_(*snapshot);
    current_ = std::move(snapshot);
    version_.store(current_->version, std::memory_order_release);
  }
  version_.notify_all();
}

SnapshotPtr SnapshotStore::latest() const {
  std::lock_guard lock(mutex_);
  return current_;
}

void SnapshotStore::wait_for_version(std::uint64_t v) const {
  for (;;) {
    const std::uint64_t now = version_.load(std::memory_order_acquire);
    if (now >= v) return;
    version_.wait(now, std::memory_order_acquire);
  }
}

// --- parameter server ------------------------------------------------------

ParameterServer::ParameterServer(SnapshotStore& store, const WeightsSnapshot& initial)
    : store_(store),
      table_(initial.q),
      num_states_(initial.num_states),
      num_actions_(initial.num_actions),
      version_(initial.version) {
  if (table_.size() != num_states_ * num_actions_) {
    throw ParameterError("initial weights do not match their declared shape");
  }
}

ParameterServer::~ParameterServer() { stop(); }

SnapshotPtr ParameterServer::apply(std::span<const GradientMessage> messages) {
  if (messages.empty()) throw ParameterError("parameter server needs at least one message");
  for (const GradientMessage& m : messages) {
    for (const QUpdate& u : m.updates) {
      if (u.state >= num_states_ || u.action >= num_actions_) {
        throw ParameterError("gradient entry outside the weight table");
      }
    }
  }
  std::lock_guard lock(apply_mutex_);
  for (const GradientMessage& m : messages) {
    for (const QUpdate& u : m.updates) table_[u.state * num_actions_ + u.action] += u.delta;
  }
  auto snapshot = std::make_shared<const WeightsSnapshot>(
      WeightsSnapshot{++version_, num_states_, num_actions_, table_});
  store_.publish(snapshot);
  applied_.fetch_add(messages.size(), std::memory_order_acq_rel);
  return snapshot;
}

void ParameterServer::start() {
  std::lock_guard lock(queue_mutex_);
  if (worker_.joinable()) return;
  stopping_ = false;
  worker_ = std::thread([this] { run(); });
}

std::uint64_t ParameterServer::submit(GradientMessage message) {
  std::uint64_t ticket = 0;
  {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(std::move(message));
    ticket = ++submitted_;
  }
  queue_cv_.notify_one();
  return ticket;
}

void ParameterServer::wait_applied(std::uint64_t ticket) const {
  for (;;) {
    const std::uint64_t now = drained_.load(std::memory_order_acquire);
    if (now >= ticket) return;
    drained_.wait(now, std::memory_order_acquire);
  }
}

void ParameterServer::stop() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

void ParameterServer::run() {
  for (;;) {
    GradientMessage message;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      message = std::move(queue_.front());
      queue_.pop_front();
    }
    try {
      apply(std::span<const GradientMessage>(&message, 1));
    } catch (...) {
      drained_.fetch_add(1, std::memory_order_acq_rel);
      drained_.notify_all();
      throw;
    }
    drained_.fetch_add(1, std::memory_order_acq_rel);
    drained_.notify_all();
  }
}

// --- run control -----------------------------------------------------------

Rng make_stream(std::uint64_t seed, StreamRole role, std::size_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(role), static_cast<std::uint32_t>(id),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(id) >> 32)};
  return Rng(seq);
}

RunControl::RunControl(std::uint64_t step_budget, double update_interval, bool lockstep,
                       std::uint64_t lead_limit)
    : step_budget_(step_budget),
      update_interval_(update_interval),
      lockstep_(lockstep),
      lead_limit_(lockstep ? 0 : lead_limit) {
  if (!(update_interval > 0.0) || !std::isfinite(update_interval)) {
    throw ParameterError("update_interval must be positive");
  }
  total_iterations_ = owed_iterations(step_budget);
}

std::uint64_t RunControl::owed_iterations(std::uint64_t steps) const {
  return static_cast<std::uint64_t>(std::floor(static_cast<double>(steps) / update_interval_));
}

template <class Pred>
bool RunControl::wait_until(Pred pred) const {
  if (pred()) return true;
  std::unique_lock lock(mutex_);
  waiters_.fetch_add(1);
  std::atomic_thread_fence(std::memory_order_seq_cst);
  while (!pred() && !aborted()) cv_.wait(lock);
  waiters_.fetch_sub(1);
  return pred();
}

void RunControl::wake() {
  std::atomic_thread_fence(std::memory_order_seq_cst);
  if (waiters_.load() > 0) {
    { std::lock_guard lock(mutex_); }
    cv_.notify_all();
  }
}

bool RunControl::claim_step(std::uint64_t& step) {
  if (aborted()) return false;
  step = next_step_.fetch_add(1, std::memory_order_acq_rel) + 1;
  return step <= step_budget_;
}

void RunControl::wait_learners_before(std::uint64_t step) const {
  if (!lockstep_ && lead_limit_ == 0) return;
  if (step - 1 <= lead_limit_) return;
  const std::uint64_t owed = owed_iterations(step - 1 - lead_limit_);
  wait_until([&] { return iterations_done() >= owed; });
}

void RunControl::step_done() {
  collected_.fetch_add(1);
  wake();
}

bool RunControl::claim_iteration(std::uint64_t& k) {
  if (aborted()) return false;
  k = next_iteration_.fetch_add(1, std::memory_order_acq_rel) + 1;
  return k <= total_iterations_;
}

bool RunControl::wait_collected_for(std::uint64_t k) const {
  const auto need =
      static_cast<std::uint64_t>(std::ceil(static_cast<double>(k) * update_interval_));
  return wait_until([&] { return collected() >= need; });
}

void RunControl::iteration_done() {
  iterations_done_.fetch_add(1);
  wake();
}

void RunControl::abort() {
  aborted_.store(true, std::memory_order_release);
  { std::lock_guard lock(mutex_); }
  cv_.notify_all();
}

void MetricsLog::record(MetricsRow row) {
  std::lock_guard lock(mutex_);
  rows_.push_back(row);
}

std::vector<MetricsRow> MetricsLog::rows() const {
  std::lock_guard lock(mutex_);
  return rows_;
}

// --- actor / learner -------------------------------------------------------

double greedy_return(const GridworldConfig& env_config, const WeightsSnapshot& weights) {
  Gridworld env(env_config);
  std::size_t s = env.reset();
  double total = 0.0;
  for (;;) {
    const StepResult r = env.step(weights.greedy_action(s));
    total += r.reward;
    s = r.state;
    if (r.done || r.truncated) return total;
  }
}

std::vector<std::size_t> greedy_policy(const WeightsSnapshot& weights) {
  std::vector<std::size_t> policy(weights.num_states);
  for (std::size_t s = 0; s < weights.num_states; ++s) policy[s] = weights.greedy_action(s);
  return policy;
}

std::uint64_t actor_loop(Gridworld& env, PrioritizedReplayBuffer& buffer,
                         const SnapshotStore& snapshots, std::uint64_t steps,
                         double explore_epsilon, Rng& rng, const ActorHooks& hooks) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_action(0, Gridworld::kActions - 1);
  SnapshotPtr weights = snapshots.latest();
  std::size_t obs = env.reset();
  bool episode_over = false;

  Transition t;
  t.state.resize(1);
  t.next_state.resize(1);
  std::uint64_t taken = 0;
  for (;;) {
    std::uint64_t step = taken + 1;
    if (hooks.control) {
      if (!hooks.control->claim_step(step)) break;
      hooks.control->wait_learners_before(step);
      if (hooks.control->aborted()) break;
    } else if (taken >= steps) {
      break;
    }
    if (snapshots.version() != weights->version) weights = snapshots.latest();

    if (hooks.metrics && hooks.metrics_every > 0 && step > 1 &&
        (step - 1) % hooks.metrics_every == 0) {
      MetricsRow row;
      row.steps = step - 1;
      row.batches = hooks.control ? hooks.control->iterations_done() : 0;
      row.ratio = row.batches ? static_cast<double>(row.steps) / row.batches : 0.0;
      row.eval_return = greedy_return(env.config(), *weights);
      if (hooks.started) {
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                    *hooks.started)
                          .count();
      }
      hooks.metrics->record(row);
    }

    if (episode_over) {
      obs = env.reset();
      episode_over = false;
    }
    const std::size_t action =
        coin(rng) < explore_epsilon ? any_action(rng) : weights->greedy_action(obs);
    const StepResult r = env.step(action);
    t.state[0] = static_cast<double>(obs);
    t.action = static_cast<DiscreteAction>(action);
    t.next_state[0] = static_cast<double>(r.state);
    t.reward = r.reward;
    t.done = r.done;
    buffer.insert(t);
    obs = r.state;
    episode_over = r.done || r.truncated;
    ++taken;
    if (hooks.control) hooks.control->step_done();
  }
  return taken;
}

GradientMessage learner_step(PrioritizedReplayBuffer& buffer, const WeightsSnapshot& weights,
                             const LearnerSettings& settings, Rng& rng) {
  const std::vector<SampledIndex> batch = buffer.sample(settings.batch_size, rng);
  GradientMessage msg;
  msg.learner_id = settings.id;
  msg.indices.reserve(batch.size());
  for (const SampledIndex& s : batch) msg.indices.push_back(s.index);

  // Priorities are re-read after sampling. A slot being rewritten reads as 0;
  // fall back to the priority it was sampled with.
  std::vector<double> priorities = buffer.get_priority(msg.indices);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (!(priorities[k] > 0.0)) priorities[k] = batch[k].priority;
  }
  const std::vector<double> is = buffer.importance_weights(priorities);

  msg.updates.reserve(batch.size());
  msg.td_errors.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Transition tr = buffer.load(msg.indices[k]);
    const auto s = static_cast<std::size_t>(tr.state[0]);
    const auto s_next = static_cast<std::size_t>(tr.next_state[0]);
    const auto a = static_cast<std::size_t>(std::get<DiscreteAction>(tr.action));
    if (s >= weights.num_states || s_next >= weights.num_states || a >= weights.num_actions) {
      throw ParameterError("stored transition does not fit the weight table");
    }
    const double target =
        tr.reward + settings.gamma * weights.max_value(s_next) * (tr.done ? 0.0 : 1.0);
    const double td = weights.at(s, a) - target;
    msg.updates.push_back({s, a, -settings.learning_rate * is[k] * td});
    msg.td_errors.push_back(td);
  }
  return msg;
}

std::uint64_t learner_loop(PrioritizedReplayBuffer& buffer, ParameterServer& server,
                           const SnapshotStore& snapshots, const LearnerSettings& settings,
                           std::uint64_t iterations, Rng& rng, RunControl* control) {
  std::uint64_t done = 0;
  std::uint64_t pending = 0;
  for (;;) {
    std::uint64_t k = done + 1;
    if (control) {
      if (!control->claim_iteration(k)) break;
      if (!control->wait_collected_for(k)) break;
    } else {
      if (done >= iterations) break;
      while (buffer.size() == 0) std::this_thread::yield();
    }
    if (pending) server.wait_applied(pending);
    const SnapshotPtr weights = snapshots.latest();
    GradientMessage msg = learner_step(buffer, *weights, settings, rng);
    const std::vector<std::size_t> indices = msg.indices;
    const std::vector<double> td_errors = msg.td_errors;
    pending = server.submit(std::move(msg));
    buffer.update_priority(indices, td_errors);
    // Lockstep runs have one message in flight, so iteration k yields version k.
    if (control && control->lockstep()) snapshots.wait_for_version(k);
    ++done;
    if (control) control->iteration_done();
  }
  return done;
}

// --- training --------------------------------------------------------------

void validate(const TrainConfig& c) {
  Gridworld probe(c.env);
  if (c.actors < 1) throw ParameterError("at least one actor thread is required");
  if (c.learners < 1) throw ParameterError("at least one learner thread is required");
  if (c.batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (!(c.update_interval > 0.0) || !std::isfinite(c.update_interval)) {
    throw ParameterError("update_interval must be positive");
  }
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw ParameterError("learning_rate must be positive");
  }
  if (!std::isfinite(c.initial_q)) throw ParameterError("initial_q must be finite");
  if (!(c.explore_epsilon >= 0.0 && c.explore_epsilon <= 1.0)) {
    throw ParameterError("explore_epsilon must lie in [0, 1]");
  }
  if (c.buffer.capacity < 64 * c.actors) {
    throw ParameterError("buffer capacity must be at least 64 x actor threads");
  }
  validate_config(c.buffer);
  if (c.buffer.fanout < 2) throw ParameterError("fanout must be >= 2");
}

TrainingReport train(const TrainConfig& config) {
  validate(config);

  BufferConfig bc = config.buffer;
  bc.state_dim = 1;
  bc.action_kind = ActionKind::discrete;
  bc.action_dim = 1;
  PrioritizedReplayBuffer buffer(bc);

  const WeightsSnapshot initial = initial_weights(config);
  SnapshotStore store(std::make_shared<const WeightsSnapshot>(initial));
  std::vector<std::uint64_t> trajectory;
  if (config.record_trajectory) {
    store.set_observer([&](const WeightsSnapshot& w) { trajectory.push_back(weights_checksum(w)); });
  }
  ParameterServer server(store, initial);
  RunControl control(config.steps, config.update_interval, config.lockstep, config.actor_lead);
  MetricsLog metrics;
  std::mutex failure_mutex;
  std::vector<std::string> failures;
  auto fail = [&](const std::string& who, const std::exception& e) {
    {
      std::lock_guard lock(failure_mutex);
      failures.push_back(who + ": " + e.what());
    }
    control.abort();
  };

  server.start();
  const auto started = std::chrono::steady_clock::now();
  {
    std::vector<std::jthread> workers;
    for (std::size_t i = 0; i < config.actors; ++i) {
      workers.emplace_back([&, i] {
        try {
          Gridworld env(config.env);
          Rng rng = make_stream(config.seed, StreamRole::actor, i);
          ActorHooks hooks{&control, &metrics, config.metrics_every, &started};
          actor_loop(env, buffer, store, 0, config.explore_epsilon, rng, hooks);
        } catch (const std::exception& e) {
          fail("actor " + std::to_string(i), e);
        }
      });
    }
    for (std::size_t j = 0; j < config.learners; ++j) {
      workers.emplace_back([&, j] {
        try {
          Rng rng = make_stream(config.seed, StreamRole::learner, j);
          LearnerSettings settings{j, config.batch_size, config.learning_rate, config.env.gamma};
          learner_loop(buffer, server, store, settings, 0, rng, &control);
        } catch (const std::exception& e) {
          fail("learner " + std::to_string(j), e);
        }
      });
    }
  }
  server.stop();
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  TrainingReport report;
  report.wall_seconds = wall;
  report.steps = control.collected();
  report.batches = control.iterations_done();
  if (report.steps > 0 && wall > 0.0) {
    report.steps_per_sec = static_cast<double>(report.steps) / wall;
    report.batches_per_sec = static_cast<double>(report.batches) / wall;
  }
  report.ratio = report.batches ? static_cast<double>(report.steps) / report.batches : 0.0;
  report.weights = store.latest();
  report.policy = greedy_policy(*report.weights);
  report.final_return = greedy_return(config.env, *report.weights);
  report.metrics = metrics.rows();
  report.metrics.push_back(
      {wall, report.steps, report.batches, report.ratio, report.final_return});
  report.failures = std::move(failures);
  report.trajectory = std::move(trajectory);
  return report;
}

std::uint64_t weights_checksum(const WeightsSnapshot& weights) {
  std::uint64_t h = 14695981039346656037ULL;
  const auto* p = reinterpret_cast<const unsigned char*>(weights.q.data());
  for (std::size_t i = 0; i < weights.q.size() * sizeof(double); ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t TrainingReport::weights_checksum() const {
  return weights ? parl::weights_checksum(*weights) : 0;
}

std::string TrainingReport::summary_line() const {
  std::ostringstream out;
  out << std::setprecision(10) << "steps=" << steps << " batches=" << batches
      << " wall_s=" << wall_seconds << " steps_per_sec=" << steps_per_sec
      << " batches_per_sec=" << batches_per_sec << " ratio=" << ratio
      << " final_greedy_return=" << final_return << " q_checksum=0x" << std::hex
      << weights_checksum() << std::dec << " failures=" << failures.size();
  return out.str();
}

void TrainingReport::write_metrics_csv(std::ostream& out) const {
  out << "timestamp_s,steps,batches,ratio,eval_return\n";
  out << std::setprecision(10);
  for (const MetricsRow& r : metrics) {
    out << r.seconds << ',' << r.steps << ',' << r.batches << ',' << r.ratio << ','
        << r.eval_return << '\n';
  }
}

void TrainingReport::write_summary(std::ostream& out) const {
  out << std::setprecision(10);
  out << "steps=" << steps << '\n'
      << "batches=" << batches << '\n'
      << "wall_seconds=" << wall_seconds << '\n'
      << "steps_per_sec=" << steps_per_sec << '\n'
      << "batches_per_sec=" << batches_per_sec << '\n'
      << "ratio=" << ratio << '\n'
      << "q_checksum=0x" << std::hex << weights_checksum() << std::dec << '\n'
      << "final_greedy_return=" << final_return << '\n';
  out << "greedy_policy=";
  for (std::size_t s = 0; s < policy.size(); ++s) out << (s ? " " : "") << policy[s];
  out << '\n';
  for (const std::string& f : failures) out << "failure=" << f << '\n';
}

}  // namespace parl
