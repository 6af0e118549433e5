#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace parl {

using DiscreteAction = std::int64_t;
using ContinuousAction = std::vector<double>;
using Action = std::variant<DiscreteAction, ContinuousAction>;

// One environment interaction (s, a, s', r, done).
struct Transition {
  std::vector<double> state;
  Action action = DiscreteAction{0};
  std::vector<double> next_state;
  double reward = 0.0;
  bool done = false;
  std::uint64_t checksum = 0;

  // Recomputes checksum from the other fields.
  Transition& seal();
  bool valid() const { return checksum == compute_checksum(); }
  std::uint64_t compute_checksum() const;
};

// 64-bit FNV-1a over the raw field bytes in a fixed order.
std::uint64_t transition_checksum(std::span<const double> state, std::span<const double> action,
                                  std::span<const double> next_state, double reward, bool done);

}  // namespace parl
