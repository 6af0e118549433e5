#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "parl/harness.hpp"

namespace parl::bench {

struct Dispersion {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

Dispersion summarize(std::vector<double> samples);

struct BenchResult {
  std::string scenario;
  std::size_t capacity = 0;
  std::size_t fanout = 0;
  std::size_t threads = 0;
  std::size_t ops_per_thread = 0;
  Dispersion ops_per_sec;
  std::string baseline;
  Dispersion baseline_ops_per_sec;
  double speedup = 0.0;  // median / baseline median
  std::size_t repetitions = 0;
  bool verified = false;  // quiescent consistency held after the runs
  std::string note;
};

struct KSweepOptions {
  std::vector<std::size_t> capacities{1000, 10000, 100000};
  std::vector<std::size_t> fanouts{2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
  std::size_t threads = 4;
  std::size_t ops_per_thread = 1000;
  std::size_t repetitions = 5;
  std::uint64_t seed = 1;
};

// Throughput of `threads` workers each doing ops_per_thread rounds of
// sample(1) + update_priority on a shared pre-filled buffer. Counts both
// calls of a round as operations.
template <class Buffer>
double sample_update_throughput(Buffer& buffer, std::size_t threads, std::size_t ops_per_thread,
                                std::uint64_t seed);

// Fills every slot and assigns random priorities.
template <class Buffer>
void prefill(Buffer& buffer, std::uint64_t seed);

// For each capacity: measures the global-lock binary baseline once, then the
// two-lock buffer at every fanout. One warm-up repetition is discarded.
std::vector<BenchResult> bench_ksweep(const KSweepOptions& options);

struct ScaleOptions {
  std::vector<std::size_t> core_counts{1, 2};
  TrainConfig train;
  std::size_t repetitions = 3;
  double profile_seconds = 0.2;
};

struct ScaleResult {
  std::size_t cores = 0;
  std::size_t actors = 0;
  std::size_t learners = 0;
  Dispersion steps_per_sec;
  double speedup = 1.0;  // against the first row
  std::size_t repetitions = 0;
  std::string note;
};

// Runs train() at each core budget with a DSE-derived actor/learner split.
std::vector<ScaleResult> bench_scalability(const ScaleOptions& options);

void write_ksweep_csv(std::ostream& out, const std::vector<BenchResult>& rows);
void write_scale_csv(std::ostream& out, const std::vector<ScaleResult>& rows);

extern template double sample_update_throughput(PrioritizedReplayBuffer&, std::size_t,
                                                std::size_t, std::uint64_t);
extern template double sample_update_throughput(GlobalLockReplayBuffer&, std::size_t,
                                                std::size_t, std::uint64_t);
extern template void prefill(PrioritizedReplayBuffer&, std::uint64_t);
extern template void prefill(GlobalLockReplayBuffer&, std::uint64_t);

}  // namespace parl::bench
