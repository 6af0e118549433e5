#include <doctest.h>

#include <set>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "parl/error.hpp"
#include "parl/harness.hpp"

using namespace parl;

namespace {

GridworldConfig grid(int n) {
  GridworldConfig c;
  c.rows = n;
  c.cols = n;
  c.goal = {n - 1, n - 1};
  return c;
}

WeightsSnapshot from_value_iteration(const GridworldConfig& c) {
  const auto vi = oracle::value_iteration(c);
  WeightsSnapshot w = zero_weights(vi.q.size(), Gridworld::kActions);
  for (std::size_t s = 0; s < vi.q.size(); ++s) {
    for (std::size_t a = 0; a < Gridworld::kActions; ++a) w.q[s * Gridworld::kActions + a] = vi.q[s][a];
  }
  return w;
}

SnapshotPtr share(WeightsSnapshot w) { return std::make_shared<const WeightsSnapshot>(std::move(w)); }

}  // namespace

TEST_CASE("gridworld dynamics") {
  GridworldConfig c = grid(3);
  c.obstacles = {{1, 1}};
  c.max_episode_steps = 3;
  Gridworld env(c);
  CHECK(env.num_states() == 9);
  CHECK(env.reset() == 0);
  CHECK(env.transition(0, 0).state == 0);  // wall
  CHECK(env.transition(0, 2).state == 0);
  CHECK(env.transition(1, 1).state == 1);  // obstacle below
  CHECK(env.transition(5, 1).done);
  CHECK(env.transition(5, 1).reward == c.goal_reward);
  CHECK(env.transition(0, 3).reward == c.step_penalty);

  env.reset();
  CHECK_FALSE(env.step(0).truncated);
  CHECK_FALSE(env.step(0).truncated);
  CHECK(env.step(0).truncated);
  CHECK_THROWS_AS(env.step(4), ParameterError);

  GridworldConfig bad = grid(3);
  bad.obstacles = {{2, 2}};
  CHECK_THROWS_AS(Gridworld{bad}, ParameterError);
  bad = grid(3);
  bad.gamma = 1.0;
  CHECK_THROWS_AS(Gridworld{bad}, ParameterError);
  bad = grid(3);
  bad.goal = {3, 0};
  CHECK_THROWS_AS(Gridworld{bad}, ParameterError);
}

TEST_CASE("oracles agree on the open grid") {
  const GridworldConfig c = grid(5);
  CHECK(oracle::shortest_path(c) == 8);
  const auto vi = oracle::value_iteration(c);
  // Start is 8 moves away: 7 penalties then the goal reward, discounted.
  double expected = 0.0;
  for (int k = 0; k < 7; ++k) expected += std::pow(c.gamma, k) * c.step_penalty;
  expected += std::pow(c.gamma, 7) * c.goal_reward;
  CHECK(vi.value[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(vi.optimal[0] == std::vector<std::size_t>{1, 3});
}

TEST_CASE("snapshot store publishes whole versions") {
  SnapshotStore store(share(zero_weights(2, 2)));
  CHECK(store.version() == 0);
  std::vector<std::uint64_t> seen;
  store.set_observer([&](const WeightsSnapshot& w) { seen.push_back(w.version); });
  WeightsSnapshot next = zero_weights(2, 2);
  next.version = 1;
  next.q[3] = 1.0;
  std::jthread waiter([&] { store.wait_for_version(1); });
  store.publish(share(next));
  waiter.join();
  CHECK(store.latest()->q[3] == 1.0);
  CHECK(seen == std::vector<std::uint64_t>{1});
}

TEST_CASE("parameter server aggregates by summation") {
  const WeightsSnapshot initial = zero_weights(3, 2);
  SnapshotStore store(share(initial));
  ParameterServer server(store, initial);

  GradientMessage up{0, {0}, {{1, 1, 0.75}}, {0.0}};
  GradientMessage down{1, {0}, {{1, 1, -0.75}}, {0.0}};

  SUBCASE("cancellation") {
    const std::vector<GradientMessage> both{up, down};
    const SnapshotPtr s = server.apply(both);
    CHECK(s->version == 1);
    CHECK(s->q == initial.q);
    CHECK(store.version() == 1);
  }
  SUBCASE("single message is one SGD step") {
    const SnapshotPtr s = server.apply(std::span(&up, 1));
    CHECK(s->at(1, 1) == 0.75);
  }
  SUBCASE("k identical messages scale by k") {
    for (std::size_t k : {1u, 3u, 8u}) {
      const WeightsSnapshot base = *store.latest();
      const std::vector<GradientMessage> batch(k, up);
      const SnapshotPtr s = server.apply(batch);
      CHECK(s->at(1, 1) - base.at(1, 1) == doctest::Approx(0.75 * static_cast<double>(k)));
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(server.apply({}), ParameterError);
    GradientMessage bad{0, {0}, {{3, 0, 1.0}}, {0.0}};
    CHECK_THROWS_AS(server.apply(std::span(&bad, 1)), ParameterError);
    CHECK(store.version() == 0);
  }
  SUBCASE("queued messages drain on stop") {
    server.start();
    for (int i = 0; i < 50; ++i) server.submit(up);
    server.stop();
    CHECK(server.applied_messages() == 50);
    CHECK(store.version() == 50);
    CHECK(store.latest()->at(1, 1) == doctest::Approx(37.5));
  }
}

TEST_CASE("rng streams differ by role and id") {
  Rng a = make_stream(1, StreamRole::actor, 0);
  Rng b = make_stream(1, StreamRole::actor, 1);
  Rng c = make_stream(1, StreamRole::learner, 0);
  Rng a2 = make_stream(1, StreamRole::actor, 0);
  const auto x = a();
  CHECK(x != b());
  CHECK(x != c());
  CHECK(x == a2());
}

TEST_CASE("run control gates learner iterations on collected steps") {
  RunControl rc(10, 2.0, false);
  CHECK(rc.total_iterations() == 5);
  std::uint64_t k = 0;
  CHECK(rc.claim_iteration(k));
  CHECK(k == 1);
  std::uint64_t step = 0;
  std::jthread collector([&] {
    for (int i = 0; i < 2; ++i) {
      CHECK(rc.claim_step(step));
      rc.step_done();
    }
  });
  CHECK(rc.wait_collected_for(1));
  CHECK(rc.collected() >= 2);
  collector.join();

  RunControl limited(100, 1.0, false, 5);
  CHECK(limited.claim_step(step));
  limited.wait_learners_before(6);  // within the lead, returns at once
  std::jthread learner([&] {
    std::uint64_t it = 0;
    for (int i = 0; i < 2; ++i) {
      CHECK(limited.claim_iteration(it));
      limited.iteration_done();
    }
  });
  limited.wait_learners_before(8);  // needs two finished iterations
  CHECK(limited.iterations_done() >= 2);
  learner.join();

  RunControl aborted(10, 1.0, true);
  std::jthread stopper([&] { aborted.abort(); });
  CHECK_FALSE(aborted.wait_collected_for(5));
  CHECK_THROWS_AS(RunControl(1, 0.0, false), ParameterError);
}

TEST_CASE("random actor fills the buffer") {
  const GridworldConfig c = grid(3);
  for (std::size_t capacity : {256u, 4096u}) {
    PrioritizedReplayBuffer buffer(BufferConfig{.capacity = capacity});
    Gridworld env(c);
    SnapshotStore store(share(zero_weights(env.num_states(), Gridworld::kActions)));
    Rng rng = make_stream(1, StreamRole::actor, 0);
    CHECK(actor_loop(env, buffer, store, 1000, 1.0, rng) == 1000);
    CHECK(buffer.size() == std::min<std::size_t>(1000, capacity));
    CHECK(buffer.verify().ok());
  }
}

TEST_CASE("greedy actor on optimal weights walks shortest paths") {
  GridworldConfig c = grid(5);
  c.obstacles = {{1, 1}, {2, 2}, {3, 1}};
  const std::size_t path = oracle::shortest_path(c);
  Gridworld env(c);
  SnapshotStore store(share(from_value_iteration(c)));
  const std::size_t episodes = 40;
  PrioritizedReplayBuffer buffer(BufferConfig{.capacity = 4096});
  Rng rng(3);
  actor_loop(env, buffer, store, episodes * path, 0.0, rng);
  std::size_t finished = 0;
  for (std::size_t i = 0; i < episodes * path; ++i) {
    const bool done = buffer.load(i).done;
    CHECK(done == ((i + 1) % path == 0));
    finished += done;
  }
  CHECK(finished == episodes);
  CHECK(static_cast<double>(episodes * path) / static_cast<double>(finished) ==
        static_cast<double>(path));
  CHECK(greedy_return(c, *store.latest()) ==
        doctest::Approx(static_cast<double>(path - 1) * c.step_penalty + c.goal_reward));
}

TEST_CASE("two actors claim disjoint slots") {
  const GridworldConfig c = grid(4);
  PrioritizedReplayBuffer buffer(BufferConfig{.capacity = 8192});
  SnapshotStore store(share(zero_weights(16, Gridworld::kActions)));
  {
    std::vector<std::jthread> actors;
    for (std::size_t i = 0; i < 2; ++i) {
      actors.emplace_back([&, i] {
        Gridworld env(c);
        Rng rng = make_stream(9, StreamRole::actor, i);
        actor_loop(env, buffer, store, 3000, 0.5, rng);
      });
    }
  }
  CHECK(buffer.size() == 6000);
  const ConsistencyReport r = buffer.verify();
  CHECK(r.ok());
  CHECK(r.positive_slots == 6000);
  CHECK(buffer.wrap_collisions() == 0);
}

TEST_CASE("learner step") {
  const GridworldConfig c = grid(3);
  PrioritizedReplayBuffer buffer(BufferConfig{.capacity = 64});
  WeightsSnapshot w = zero_weights(9, Gridworld::kActions);
  const LearnerSettings settings{0, 8, 0.1, c.gamma};
  Rng rng(4);

  SUBCASE("zero TD error is a fixed point") {
    // Terminal transitions whose value already equals the reward.
    for (int i = 0; i < 4; ++i) {
      Transition t;
      t.state = {5.0};
      t.action = DiscreteAction{1};
      t.next_state = {8.0};
      t.reward = 1.0;
      t.done = true;
      buffer.insert(t);
    }
    w.q[5 * 4 + 1] = 1.0;
    w.q[8 * 4 + 0] = 42.0;  // ignored because done
    const GradientMessage msg = learner_step(buffer, w, settings, rng);
    CHECK(msg.indices.size() == 8);
    for (double td : msg.td_errors) CHECK(td == 0.0);
    SnapshotStore store(share(w));
    ParameterServer server(store, w);
    const SnapshotPtr after = server.apply(std::span(&msg, 1));
    CHECK(after->q == w.q);
    buffer.update_priority(msg.indices, msg.td_errors);
    for (double p : buffer.get_priority(msg.indices)) {
      CHECK(p == doctest::Approx(std::pow(1e-6, 0.6)));
    }
  }
  SUBCASE("targets") {
    Transition t;
    t.state = {0.0};
    t.action = DiscreteAction{3};
    t.next_state = {1.0};
    t.reward = -0.5;
    t.done = false;
    buffer.insert(t);
    w.q[1 * 4 + 2] = 2.0;
    GradientMessage msg = learner_step(buffer, w, settings, rng);
    CHECK(msg.td_errors[0] == doctest::Approx(0.0 - (-0.5 + c.gamma * 2.0)));
    // Single slot: weight ((1/1) * p / p)^beta = 1.
    CHECK(msg.updates[0].delta == doctest::Approx(-0.1 * msg.td_errors[0]));
    CHECK(msg.updates[0].state == 0);
    CHECK(msg.updates[0].action == 3);

    PrioritizedReplayBuffer terminal(BufferConfig{.capacity = 64});
    t.done = true;
    terminal.insert(t);
    msg = learner_step(terminal, w, settings, rng);
    CHECK(msg.td_errors[0] == doctest::Approx(0.5));
  }
}

TEST_CASE("training config validation") {
  TrainConfig c;
  c.steps = 10;
  CHECK_NOTHROW(validate(c));
  TrainConfig bad = c;
  bad.actors = 0;
  CHECK_THROWS_AS(validate(bad), ParameterError);
  bad = c;
  bad.buffer.capacity = 64 * 4 - 1;
  bad.actors = 4;
  CHECK_THROWS_AS(validate(bad), ParameterError);
  bad = c;
  bad.update_interval = 0.0;
  CHECK_THROWS_AS(validate(bad), ParameterError);
  bad = c;
  bad.explore_epsilon = 1.5;
  CHECK_THROWS_AS(validate(bad), ParameterError);
  bad = c;
  bad.env.rows = 0;
  CHECK_THROWS_AS(validate(bad), ParameterError);
  CHECK_THROWS_AS(train(bad), ParameterError);
}

TEST_CASE("zero-step run reports the initial policy") {
  TrainConfig c;
  c.steps = 0;
  const TrainingReport r = train(c);
  CHECK(r.steps == 0);
  CHECK(r.batches == 0);
  CHECK(r.steps_per_sec == 0.0);
  CHECK(r.failures.empty());
  CHECK(r.weights->version == 0);
  CHECK(r.policy == std::vector<std::size_t>(25, 0));
  CHECK(r.weights->q == std::vector<double>(100, c.initial_q));
}

TEST_CASE("lockstep run matches the sequential reference") {
  TrainConfig c;
  c.steps = 2000;
  c.buffer.capacity = 1024;
  c.lockstep = true;
  c.record_trajectory = true;
  c.metrics_every = 500;
  c.seed = 17;
  const TrainingReport r = train(c);
  REQUIRE(r.failures.empty());
  const std::vector<std::uint64_t> expected = oracle::sequential_reference(c);
  CHECK(r.trajectory.size() == expected.size());
  CHECK(r.trajectory == expected);
  // Rows before steps 501, 1001, 1501 plus the final row.
  CHECK(r.metrics.size() == 3 + 1);

  const TrainingReport again = train(c);
  CHECK(again.weights_checksum() == r.weights_checksum());
}

TEST_CASE("small grid converges with several threads") {
  TrainConfig c;
  c.env = grid(3);
  c.steps = 30000;
  c.actors = 2;
  c.learners = 2;
  c.buffer.capacity = 4096;
  c.metrics_every = 0;
  const TrainingReport r = train(c);
  REQUIRE(r.failures.empty());
  CHECK(r.steps == c.steps);
  CHECK(r.batches == c.steps);
  CHECK(r.ratio == doctest::Approx(1.0));
  const auto vi = oracle::value_iteration(c.env);
  for (std::size_t s = 0; s < 9; ++s) {
    if (!oracle::is_non_terminal_free_cell(c.env, s)) continue;
    const auto& opt = vi.optimal[s];
    CHECK_MESSAGE(std::find(opt.begin(), opt.end(), r.policy[s]) != opt.end(), "state ", s);
  }
  std::ostringstream csv;
  r.write_metrics_csv(csv);
  CHECK(csv.str().rfind("timestamp_s,steps,batches,ratio,eval_return\n", 0) == 0);
  std::ostringstream summary;
  r.write_summary(summary);
  CHECK(summary.str().find("final_greedy_return=") != std::string::npos);
}
