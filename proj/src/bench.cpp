#include "parl/bench.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <numeric>
#include <ostream>
#include <thread>

#include "parl/dse.hpp"
#include "parl/error.hpp"
#include "parl/workloads.hpp"

namespace parl::bench {

namespace {

constexpr std::size_t kBenchStateDim = 4;

std::size_t hardware_cores() { return std::max(1u, std::thread::hardware_concurrency()); }

template <class Fn>
Dispersion repeat(std::size_t repetitions, Fn&& run) {
  run();  // warm-up
  std::vector<double> samples;
  for (std::size_t r = 0; r < repetitions; ++r) samples.push_back(run());
  return summarize(std::move(samples));
}

void append_note(std::string& note, const std::string& text) {
  if (!note.empty()) note += ';';
  note += text;
}

}  // namespace

Dispersion summarize(std::vector<double> samples) {
  if (samples.empty()) throw ParameterError("no samples to summarize");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  const double median =
      n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  return {samples.front(), median, samples.back()};
}

template <class Buffer>
void prefill(Buffer& buffer, std::uint64_t seed) {
  Rng rng = make_stream(seed, StreamRole::evaluation, 1);
  std::uniform_real_distribution<double> value(0.0, 1.0);
  const BufferConfig& c = buffer.config();
  Transition t;
  t.state.resize(c.state_dim);
  t.next_state.resize(c.state_dim);
  if (c.action_kind == ActionKind::continuous) t.action = ContinuousAction(c.action_dim);
  for (std::size_t i = 0; i < buffer.capacity(); ++i) {
    for (double& x : t.state) x = value(rng);
    for (double& x : t.next_state) x = value(rng);
    t.reward = value(rng);
    buffer.insert(t);
  }
  std::vector<std::size_t> indices(buffer.capacity());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  std::vector<double> td(indices.size());
  for (double& x : td) x = value(rng);
  buffer.update_priority(indices, td);
}

template <class Buffer>
double sample_update_throughput(Buffer& buffer, std::size_t threads, std::size_t ops_per_thread,
                                std::uint64_t seed) {
  if (threads < 1 || ops_per_thread < 1) throw ParameterError("threads and ops must be >= 1");
  using Clock = std::chrono::steady_clock;
  Clock::time_point start;
  std::barrier sync(static_cast<std::ptrdiff_t>(threads), [&]() noexcept { start = Clock::now(); });
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        Rng rng = make_stream(seed, StreamRole::learner, t);
        std::uniform_real_distribution<double> td(0.0, 1.0);
        sync.arrive_and_wait();
        for (std::size_t i = 0; i < ops_per_thread; ++i) {
          const SampledIndex s = buffer.sample(1, rng).front();
          const double error = td(rng);
          buffer.update_priority(std::span<const std::size_t>(&s.index, 1),
                                 std::span<const double>(&error, 1));
        }
      });
    }
  }
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  return 2.0 * static_cast<double>(threads * ops_per_thread) / elapsed;
}

template double sample_update_throughput(PrioritizedReplayBuffer&, std::size_t, std::size_t,
                                         std::uint64_t);
template double sample_update_throughput(GlobalLockReplayBuffer&, std::size_t, std::size_t,
                                         std::uint64_t);
template void prefill(PrioritizedReplayBuffer&, std::uint64_t);
template void prefill(GlobalLockReplayBuffer&, std::uint64_t);

std::vector<BenchResult> bench_ksweep(const KSweepOptions& o) {
  if (o.capacities.empty() || o.fanouts.empty()) {
    throw ParameterError("k-sweep needs at least one capacity and one fanout");
  }
  if (o.threads < 1 || o.ops_per_thread < 1) throw ParameterError("threads and ops must be >= 1");
  if (o.repetitions < 3) throw ParameterError("at least 3 repetitions are required");

  std::vector<BenchResult> rows;
  for (std::size_t capacity : o.capacities) {
    BufferConfig bc{.capacity = capacity, .fanout = 2, .state_dim = kBenchStateDim};
    GlobalLockReplayBuffer baseline(bc);
    prefill(baseline, o.seed);
    const Dispersion base = repeat(o.repetitions, [&] {
      return sample_update_throughput(baseline, o.threads, o.ops_per_thread, o.seed);
    });

    for (std::size_t fanout : o.fanouts) {
      bc.fanout = fanout;
      PrioritizedReplayBuffer buffer(bc);
      prefill(buffer, o.seed);
      const Dispersion d = repeat(o.repetitions, [&] {
        return sample_update_throughput(buffer, o.threads, o.ops_per_thread, o.seed);
      });

      BenchResult r;
      r.scenario = "two-lock-kary";
      r.capacity = capacity;
      r.fanout = fanout;
      r.threads = o.threads;
      r.ops_per_thread = o.ops_per_thread;
      r.ops_per_sec = d;
      r.baseline = "global-lock-binary";
      r.baseline_ops_per_sec = base;
      r.speedup = d.median / base.median;
      r.repetitions = o.repetitions;
      r.verified = buffer.verify().ok() && baseline.verify().ok();
      if (o.threads > hardware_cores()) {
        append_note(r.note, "oversubscribed:" + std::to_string(hardware_cores()) + "-cores");
      }
      if (!buffer.tree().cache_aligned_fanout()) append_note(r.note, "fanout-not-cacheline-multiple");
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

std::vector<ScaleResult> bench_scalability(const ScaleOptions& o) {
  if (o.core_counts.empty()) throw ParameterError("no core counts given");
  if (o.repetitions < 3) throw ParameterError("at least 3 repetitions are required");
  const std::size_t hw = hardware_cores();
  std::vector<ScaleResult> rows;
  for (std::size_t cores : o.core_counts) {
    if (cores < 1) throw ParameterError("core counts must be >= 1");
    ScaleResult row;
    row.cores = cores;
    row.repetitions = o.repetitions;
    if (cores <= 2) {
      row.actors = 1;
      row.learners = 1;
      if (cores == 1) append_note(row.note, "actor-and-learner-share-one-core");
    } else {
      RoleWorkbench bench(o.train);
      const ProfileOptions popts{.allow_oversubscription = true};
      const auto per_point = std::chrono::duration<double>(o.profile_seconds);
      const ThroughputProfile fa =
          profile(Role::actor, cores - 1, per_point, bench.actor_workload(), popts);
      const ThroughputProfile fl =
          profile(Role::learner, cores - 1, per_point, bench.learner_workload(), popts);
      const Allocation a = solve_allocation(fa, fl, o.train.update_interval, cores);
      row.actors = a.actors;
      row.learners = a.learners;
      if (a.approximate) append_note(row.note, "approximate-allocation");
    }
    if (cores > hw) append_note(row.note, "oversubscribed:" + std::to_string(hw) + "-cores");

    TrainConfig cfg = o.train;
    cfg.actors = row.actors;
    cfg.learners = row.learners;
    cfg.metrics_every = 0;
    cfg.buffer.capacity = std::max(cfg.buffer.capacity, 64 * cfg.actors);
    row.steps_per_sec = repeat(o.repetitions, [&] {
      const TrainingReport rep = train(cfg);
      if (!rep.failures.empty()) throw Error("training failed: " + rep.failures.front());
      return rep.steps_per_sec;
    });
    rows.push_back(std::move(row));
  }
  for (ScaleResult& r : rows) r.speedup = r.steps_per_sec.median / rows.front().steps_per_sec.median;
  return rows;
}

void write_ksweep_csv(std::ostream& out, const std::vector<BenchResult>& rows) {
  out << "scenario,capacity,fanout,threads,ops_per_thread,ops_per_sec_median,ops_per_sec_min,"
         "ops_per_sec_max,baseline,baseline_ops_per_sec_median,speedup,repetitions,verified,note\n";
  const auto precision = out.precision(10);
  for (const BenchResult& r : rows) {
    out << r.scenario << ',' << r.capacity << ',' << r.fanout << ',' << r.threads << ','
        << r.ops_per_thread << ',' << r.ops_per_sec.median << ',' << r.ops_per_sec.min << ','
        << r.ops_per_sec.max << ',' << r.baseline << ',' << r.baseline_ops_per_sec.median << ','
        << r.speedup << ',' << r.repetitions << ',' << (r.verified ? 1 : 0) << ',' << r.note
        << '\n';
  }
  out.precision(precision);
}

void write_scale_csv(std::ostream& out, const std::vector<ScaleResult>& rows) {
  out << "cores,actors,learners,steps_per_sec_median,steps_per_sec_min,steps_per_sec_max,"
         "speedup,repetitions,note\n";
  const auto precision = out.precision(10);
  for (const ScaleResult& r : rows) {
    out << r.cores << ',' << r.actors << ',' << r.learners << ',' << r.steps_per_sec.median
        << ',' << r.steps_per_sec.min << ',' << r.steps_per_sec.max << ',' << r.speedup << ','
        << r.repetitions << ',' << r.note << '\n';
  }
  out.precision(precision);
}

}  // namespace parl::bench
