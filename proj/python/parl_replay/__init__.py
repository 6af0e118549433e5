"""Concurrent prioritized replay buffer on a K-ary sum tree."""

from ._core import (
    ClosedError,
    EmptyError,
    Error,
    IndexError,
    ParameterError,
    ReplayBuffer,
    __version__,
)

__all__ = [
    "ClosedError",
    "EmptyError",
    "Error",
    "IndexError",
    "ParameterError",
    "ReplayBuffer",
    "__version__",
]
