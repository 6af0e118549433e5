#include "parl/transition.hpp"

#include <cstring>

namespace parl {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void mix(std::uint64_t& h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

std::uint64_t transition_checksum(std::span<const double> state, std::span<const double> action,
                                  std::span<const double> next_state, double reward, bool done) {
  std::uint64_t h = kFnvOffset;
  mix(h, state.data(), state.size_bytes());
  mix(h, action.data(), action.size_bytes());
  mix(h, next_state.data(), next_state.size_bytes());
  mix(h, &reward, sizeof reward);
  const unsigned char d = done ? 1 : 0;
  mix(h, &d, 1);
  return h;
}

std::uint64_t Transition::compute_checksum() const {
  if (const auto* a = std::get_if<DiscreteAction>(&action)) {
    const double as_real = static_cast<double>(*a);
    return transition_checksum(state, std::span<const double>(&as_real, 1), next_state, reward,
                               done);
  }
  return transition_checksum(state, std::get<ContinuousAction>(action), next_state, reward, done);
}

Transition& Transition::seal() {
  checksum = compute_checksum();
  return *this;
}

}  // namespace parl
