#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "parl/error.hpp"
#include "parl/sum_tree.hpp"
#include "parl/transition.hpp"

namespace parl {

using Rng = std::mt19937_64;

enum class ActionKind { discrete, continuous };

struct BufferConfig {
  std::size_t capacity = 0;
  std::size_t fanout = SumTree::kDefaultFanout;
  std::size_t state_dim = 1;
  ActionKind action_kind = ActionKind::discrete;
  std::size_t action_dim = 1;  // ignored for discrete actions
  double alpha = 0.6;
  double epsilon_priority = 1e-6;
  double beta = 0.4;
};

struct SampledIndex {
  std::size_t index;
  double priority;
};

// Result of a quiescent-state audit of a buffer.
struct ConsistencyReport {
  double root = 0.0;
  double leaf_sum = 0.0;
  std::size_t positive_slots = 0;
  std::size_t checksum_failures = 0;
  std::size_t unwritten_positive = 0;

  double relative_error() const {
    const double scale = std::max(std::abs(leaf_sum), 1e-300);
    return std::abs(root - leaf_sum) / scale;
  }
  bool ok(double tolerance = 1e-6) const {
    return checksum_failures == 0 && unwritten_positive == 0 &&
           (leaf_sum == 0.0 ? std::abs(root) <= tolerance : relative_error() <= tolerance);
  }
};

// Two regions: one over the whole tree, one over the leaf level only.
// Inserts copy their payload with no region held (lazy writing).
struct TwoLockSync {
  static constexpr bool lazy_writing = true;
  static constexpr const char* name = "two-lock";

  std::unique_lock<std::mutex> tree_region() { return std::unique_lock(tree_mutex); }
  std::unique_lock<std::mutex> leaf_region() { return std::unique_lock(leaf_mutex); }

  template <class LeafWrite, class Propagate>
  void update(LeafWrite&& leaf_write, Propagate&& propagate) {
    std::lock_guard tree(tree_mutex);
    std::unique_lock leaf(leaf_mutex);
    leaf_write();
    leaf.unlock();
    propagate();
  }

  alignas(kCachelineBytes) std::mutex tree_mutex;
  alignas(kCachelineBytes) std::mutex leaf_mutex;
};

// One region covering every operation, including the payload copy.
struct GlobalLockSync {
  static constexpr bool lazy_writing = false;
  static constexpr const char* name = "global-lock";

  std::unique_lock<std::mutex> tree_region() { return std::unique_lock(mutex); }
  std::unique_lock<std::mutex> leaf_region() { return std::unique_lock(mutex); }

  template <class LeafWrite, class Propagate>
  void update(LeafWrite&& leaf_write, Propagate&& propagate) {
    std::lock_guard lock(mutex);
    leaf_write();
    propagate();
  }

  alignas(kCachelineBytes) std::mutex mutex;
};

/// Fixed-capacity prioritized replay buffer over a SumTree.
///
/// Thread-safe for any mix of insert, sample, get_priority, update_priority and
/// importance_weights. Slots are claimed FIFO through one atomic cursor. Under
/// TwoLockSync an insert first zeroes the slot's priority, copies the payload
/// outside every lock, then restores max_priority, so a half-written slot has
/// no sampling mass.
///
/// Concurrent inserts that wrap onto a slot still being written are not
/// prevented; keep capacity well above the number of inserting threads. Such
/// collisions are counted in wrap_collisions().
///
/// Sampling may observe a priority that an in-flight update is about to
/// replace. Only quiescent consistency is guaranteed.
template <class Sync>
class BasicReplayBuffer {
 public:
  explicit BasicReplayBuffer(const BufferConfig& config);

  BasicReplayBuffer(const BasicReplayBuffer&) = delete;
  BasicReplayBuffer& operator=(const BasicReplayBuffer&) = delete;

  const BufferConfig& config() const noexcept { return config_; }
  std::size_t capacity() const noexcept { return config_.capacity; }
  std::size_t size() const noexcept {
    return std::min(completed_.load(std::memory_order_acquire), config_.capacity);
  }
  double max_priority() const noexcept { return max_priority_.load(std::memory_order_acquire); }
  std::uint64_t wrap_collisions() const noexcept {
    return collisions_.load(std::memory_order_relaxed);
  }
  double total();

  std::size_t insert(const Transition& t);

  // batch_size independent draws with replacement.
  std::vector<SampledIndex> sample(std::size_t batch_size, Rng& rng);

  std::vector<double> get_priority(std::span<const std::size_t> indices);

  // Stores (|td| + epsilon)^alpha for each index. All inputs are validated
  // before any priority changes.
  void update_priority(std::span<const std::size_t> indices, std::span<const double> td_errors);

  // ((1/size) * total / p)^beta with total read once per call.
  std::vector<double> importance_weights(std::span<const double> priorities);
  std::vector<double> importance_weights(std::span<const double> priorities, double beta);

  double priority_from_td(double td_error) const {
    return std::pow(std::abs(td_error) + config_.epsilon_priority, config_.alpha);
  }

  // Seqlock-consistent copy of a slot.
  Transition load(std::size_t index) const;

  // Audit; call only when no other thread touches the buffer.
  ConsistencyReport verify() const;

  // Direct view of the index structure; quiescent use only.
  const SumTree& tree() const noexcept { return tree_; }

 private:
  void validate(const Transition& t) const;
  void check_index(std::size_t index) const;
  void apply_priority(std::size_t index, double priority);
  void write_slot(std::size_t index, const Transition& t, std::uint64_t checksum);
  void raise_max_priority(double p) noexcept;
  double* slot(std::size_t index) noexcept { return payload_.data() + index * stride_; }
  const double* slot(std::size_t index) const noexcept {
    return payload_.data() + index * stride_;
  }
  std::size_t action_width() const noexcept {
    return config_.action_kind == ActionKind::discrete ? 1 : config_.action_dim;
  }

  BufferConfig config_;
  SumTree tree_;
  Sync sync_;
  std::size_t stride_;
  std::vector<double> payload_;  // state | action | next_state | reward | done
  std::vector<std::uint64_t> checksums_;
  std::unique_ptr<std::atomic<std::uint64_t>[]> sequence_;
  std::vector<std::uint8_t> written_;

  alignas(kCachelineBytes) std::atomic<std::uint64_t> cursor_{0};
  alignas(kCachelineBytes) std::atomic<std::size_t> completed_{0};
  alignas(kCachelineBytes) std::atomic<double> max_priority_{1.0};
  std::atomic<std::uint64_t> collisions_{0};
};

using PrioritizedReplayBuffer = BasicReplayBuffer<TwoLockSync>;
using GlobalLockReplayBuffer = BasicReplayBuffer<GlobalLockSync>;

// ---------------------------------------------------------------------------

inline void validate_config(const BufferConfig& c) {
  if (c.capacity < 1) throw ParameterError("buffer capacity must be >= 1");
  if (c.state_dim < 1) throw ParameterError("state dimension must be >= 1");
  if (c.action_kind == ActionKind::continuous && c.action_dim < 1) {
    throw ParameterError("continuous action dimension must be >= 1");
  }
  if (!(c.alpha >= 0.0) || !std::isfinite(c.alpha)) throw ParameterError("alpha must be >= 0");
  if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) throw ParameterError("beta must be >= 0");
  if (!(c.epsilon_priority >= 0.0) || !std::isfinite(c.epsilon_priority)) {
    throw ParameterError("epsilon_priority must be >= 0");
  }
}

template <class Sync>
BasicReplayBuffer<Sync>::BasicReplayBuffer(const BufferConfig& config)
    : config_((validate_config(config), config)),
      tree_(config.capacity, config.fanout),
      stride_(2 * config.state_dim + action_width() + 2),
      payload_(config.capacity * stride_, 0.0),
      checksums_(config.capacity, 0),
      sequence_(std::make_unique<std::atomic<std::uint64_t>[]>(config.capacity)),
      written_(config.capacity, 0) {}

template <class Sync>
void BasicReplayBuffer<Sync>::validate(const Transition& t) const {
  if (t.state.size() != config_.state_dim || t.next_state.size() != config_.state_dim) {
    throw ParameterError("state dimension mismatch: expected " +
                         std::to_string(config_.state_dim));
  }
  if (config_.action_kind == ActionKind::discrete) {
    if (!std::holds_alternative<DiscreteAction>(t.action)) {
      throw ParameterError("buffer expects a discrete action");
    }
  } else {
    const auto* a = std::get_if<ContinuousAction>(&t.action);
    if (!a || a->size() != config_.action_dim) {
      throw ParameterError("buffer expects a continuous action of dimension " +
                           std::to_string(config_.action_dim));
    }
  }
}

template <class Sync>
void BasicReplayBuffer<Sync>::check_index(std::size_t index) const {
  if (index >= config_.capacity) {
    throw IndexError("index " + std::to_string(index) + " out of range [0, " +
                     std::to_string(config_.capacity) + ")");
  }
}

template <class Sync>
double BasicReplayBuffer<Sync>::total() {
  auto region = sync_.tree_region();
  return tree_.total();
}

template <class Sync>
void BasicReplayBuffer<Sync>::raise_max_priority(double p) noexcept {
  double current = max_priority_.load(std::memory_order_relaxed);
  while (p > current &&
         !max_priority_.compare_exchange_weak(current, p, std::memory_order_acq_rel)) {
  }
}

template <class Sync>
void BasicReplayBuffer<Sync>::apply_priority(std::size_t index, double priority) {
  double delta = 0.0;
  sync_.update([&] { delta = tree_.set_leaf(index, priority); },
               [&] { tree_.propagate(index, delta); });
}

template <class Sync>
void BasicReplayBuffer<Sync>::write_slot(std::size_t index, const Transition& t,
                                         std::uint64_t checksum) {
  auto& seq = sequence_[index];
  if (seq.fetch_add(1, std::memory_order_acq_rel) & 1) {
    collisions_.fetch_add(1, std::memory_order_relaxed);
  }
  std::atomic_thread_fence(std::memory_order_release);

  double* p = slot(index);
  const std::size_t sd = config_.state_dim;
  std::memcpy(p, t.state.data(), sd * sizeof(double));
  p += sd;
  if (const auto* a = std::get_if<DiscreteAction>(&t.action)) {
    *p++ = static_cast<double>(*a);
  } else {
    const auto& cont = std::get<ContinuousAction>(t.action);
    std::memcpy(p, cont.data(), cont.size() * sizeof(double));
    p += cont.size();
  }
  std::memcpy(p, t.next_state.data(), sd * sizeof(double));
  p += sd;
  p[0] = t.reward;
  p[1] = t.done ? 1.0 : 0.0;
  checksums_[index] = checksum;
  written_[index] = 1;

  seq.fetch_add(1, std::memory_order_release);
}

template <class Sync>
std::size_t BasicReplayBuffer<Sync>::insert(const Transition& t) {
  validate(t);
  const std::uint64_t checksum = t.compute_checksum();
  const auto index =
      static_cast<std::size_t>(cursor_.fetch_add(1, std::memory_order_relaxed) % config_.capacity);
  if constexpr (Sync::lazy_writing) {
    apply_priority(index, 0.0);
    write_slot(index, t, checksum);
    completed_.fetch_add(1, std::memory_order_acq_rel);
    apply_priority(index, max_priority());
  } else {
    auto region = sync_.tree_region();
    write_slot(index, t, checksum);
    completed_.fetch_add(1, std::memory_order_acq_rel);
    tree_.update_value(index, max_priority());
  }
  return index;
}

template <class Sync>
std::vector<SampledIndex> BasicReplayBuffer<Sync>::sample(std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ParameterError("batch size must be >= 1");
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<SampledIndex> out;
  out.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    double x = uniform(rng);
    while (x == 0.0) x = uniform(rng);
    auto region = sync_.tree_region();
    const double mass = tree_.total();
    if (!(mass > 0.0)) throw EmptyError("replay buffer holds no priority mass");
    const PrefixSumHit hit = tree_.get_prefix_sum_idx(x * mass);
    out.push_back({hit.index, hit.value});
  }
  return out;
}

template <class Sync>
std::vector<double> BasicReplayBuffer<Sync>::get_priority(std::span<const std::size_t> indices) {
  for (std::size_t i : indices) check_index(i);
  std::vector<double> out(indices.size());
  auto region = sync_.leaf_region();
  for (std::size_t k = 0; k < indices.size(); ++k) out[k] = tree_.get_value(indices[k]);
  return out;
}

template <class Sync>
void BasicReplayBuffer<Sync>::update_priority(std::span<const std::size_t> indices,
                                              std::span<const double> td_errors) {
  if (indices.size() != td_errors.size()) {
    throw ParameterError("indices and td_errors differ in length");
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    check_index(indices[k]);
    if (!std::isfinite(td_errors[k])) throw ParameterError("td error must be finite");
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const double p = priority_from_td(td_errors[k]);
    raise_max_priority(p);
    apply_priority(indices[k], p);
  }
}

template <class Sync>
std::vector<double> BasicReplayBuffer<Sync>::importance_weights(
    std::span<const double> priorities) {
  return importance_weights(priorities, config_.beta);
}

template <class Sync>
std::vector<double> BasicReplayBuffer<Sync>::importance_weights(std::span<const double> priorities,
                                                                double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ParameterError("beta must be >= 0");
  for (double p : priorities) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ParameterError("importance weights need strictly positive priorities");
    }
  }
  const std::size_t n = size();
  const double mass = total();
  if (n == 0 || !(mass > 0.0)) throw EmptyError("replay buffer is empty");
  std::vector<double> out(priorities.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < priorities.size(); ++k) {
    out[k] = std::pow(inv_n * (mass / priorities[k]), beta);
  }
  return out;
}

template <class Sync>
Transition BasicReplayBuffer<Sync>::load(std::size_t index) const {
  check_index(index);
  const std::size_t sd = config_.state_dim;
  const std::size_t aw = action_width();
  Transition t;
  t.state.resize(sd);
  t.next_state.resize(sd);
  std::vector<double> action(aw);
  const auto& seq = sequence_[index];
  for (;;) {
    const std::uint64_t before = seq.load(std::memory_order_acquire);
    if (before & 1) {
      std::this_thread::yield();
      continue;
    }
    const double* p = slot(index);
    std::memcpy(t.state.data(), p, sd * sizeof(double));
    std::memcpy(action.data(), p + sd, aw * sizeof(double));
    std::memcpy(t.next_state.data(), p + sd + aw, sd * sizeof(double));
    t.reward = p[2 * sd + aw];
    t.done = p[2 * sd + aw + 1] != 0.0;
    t.checksum = checksums_[index];
    std::atomic_thread_fence(std::memory_order_acquire);
    if (seq.load(std::memory_order_relaxed) == before) break;
  }
  if (config_.action_kind == ActionKind::discrete) {
    t.action = static_cast<DiscreteAction>(action[0]);
  } else {
    t.action = std::move(action);
  }
  return t;
}

template <class Sync>
ConsistencyReport BasicReplayBuffer<Sync>::verify() const {
  ConsistencyReport r;
  r.root = tree_.values()[0];
  for (std::size_t i = 0; i < config_.capacity; ++i) {
    const double p = tree_.get_value(i);
    r.leaf_sum += p;
    if (p > 0.0) {
      ++r.positive_slots;
      if (!written_[i]) {
        ++r.unwritten_positive;
      } else if (!load(i).valid()) {
        ++r.checksum_failures;
      }
    }
  }
  return r;
}

extern template class BasicReplayBuffer<TwoLockSync>;
extern template class BasicReplayBuffer<GlobalLockSync>;

}  // namespace parl
