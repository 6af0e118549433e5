#include "parl/replay_buffer.hpp"

namespace parl {

template class BasicReplayBuffer<TwoLockSync>;
template class BasicReplayBuffer<GlobalLockSync>;

}  // namespace parl
