import threading

import numpy as np
import pytest

import parl_replay
from parl_replay import ReplayBuffer


def test_version_string():
    assert parl_replay.__version__ == "0.1.0"


def test_round_trip_single_transition():
    buf = ReplayBuffer(capacity=8, fanout=4, state_dim=3)
    index = buf.insert(np.array([1.0, 2.0, 3.0]), 2, np.array([4.0, 5.0, 6.0]), -0.5, True)
    assert index == 0
    idx, pri = buf.sample(1, seed=3)
    assert idx.tolist() == [0]
    assert pri[0] == buf.max_priority()
    state, action, next_state, reward, done = buf.load(0)
    assert state.tolist() == [1.0, 2.0, 3.0]
    assert action == 2
    assert next_state.tolist() == [4.0, 5.0, 6.0]
    assert reward == -0.5 and done is True


def test_continuous_actions():
    buf = ReplayBuffer(capacity=4, state_dim=2, action_dim=2)
    buf.insert([0.0, 1.0], np.array([0.25, -0.25]), [1.0, 2.0], 1.0, False)
    assert buf.load(0)[1].tolist() == [0.25, -0.25]
    with pytest.raises(parl_replay.ParameterError):
        buf.insert([0.0, 1.0], np.array([0.25]), [1.0, 2.0], 1.0, False)


def test_sampling_distribution():
    buf = ReplayBuffer(capacity=4, fanout=2, alpha=1.0, epsilon=0.0)
    for i in range(4):
        buf.insert([float(i)], i, [float(i)], 0.0, False)
    buf.update_priority(np.arange(4), np.array([1.0, 2.0, 3.0, 4.0]))
    draws = 1_000_000
    idx, _ = buf.sample(draws, seed=11)
    freq = np.bincount(idx, minlength=4) / draws
    assert np.max(np.abs(freq - np.array([0.1, 0.2, 0.3, 0.4]))) <= 0.01


def test_importance_weights_formula():
    buf = ReplayBuffer(capacity=8, alpha=1.0, epsilon=0.0)
    for i in range(3):
        buf.insert([0.0], 0, [0.0], 0.0, False)
    buf.update_priority([0, 1, 2], [1.0, 2.0, 5.0])
    w = buf.importance_weights(np.array([1.0, 2.0, 5.0]), beta=0.5)
    expected = (8.0 / (3 * np.array([1.0, 2.0, 5.0]))) ** 0.5
    np.testing.assert_allclose(w, expected, rtol=1e-12)


def test_errors_carry_core_messages():
    with pytest.raises(ValueError, match="capacity"):
        ReplayBuffer(capacity=0)
    buf = ReplayBuffer(capacity=4)
    with pytest.raises(parl_replay.EmptyError):
        buf.sample(1)
    buf.insert([0.0], 0, [0.0], 0.0, False)
    with pytest.raises(IndexError):
        buf.get_priority([9])
    with pytest.raises(ValueError):
        buf.update_priority([0], [float("nan")])


def test_closed_handle_rejects_every_operation():
    buf = ReplayBuffer(capacity=4)
    buf.insert([0.0], 0, [0.0], 0.0, False)
    buf.close()
    assert buf.closed
    calls = [
        lambda: buf.insert([0.0], 0, [0.0], 0.0, False),
        lambda: buf.sample(1),
        lambda: buf.get_priority([0]),
        lambda: buf.update_priority([0], [1.0]),
        lambda: buf.importance_weights([1.0]),
        lambda: buf.load(0),
        lambda: buf.verify(),
        lambda: len(buf),
    ]
    for call in calls:
        with pytest.raises(parl_replay.ClosedError):
            call()


def test_ten_thousand_round_trips_stay_consistent():
    buf = ReplayBuffer(capacity=4096, fanout=16, state_dim=4)
    rng = np.random.default_rng(5)
    for i in range(10_000):
        s = rng.standard_normal(4)
        buf.insert(s, i % 4, s + 1.0, float(i), i % 7 == 0)
        idx, _ = buf.sample(4)
        buf.update_priority(idx, rng.standard_normal(len(idx)))
    report = buf.verify()
    assert report["ok"], report
    assert len(buf) == 4096


def test_shared_handle_across_threads():
    buf = ReplayBuffer(capacity=2048, fanout=8)

    def work(seed):
        rng = np.random.default_rng(seed)
        for i in range(2000):
            buf.insert([float(i)], i % 4, [float(i)], 0.0, False)
            idx, _ = buf.sample(2)
            buf.update_priority(idx, rng.standard_normal(2))

    threads = [threading.Thread(target=work, args=(s,)) for s in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert buf.verify()["ok"]
