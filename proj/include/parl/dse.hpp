#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace parl {

enum class Role { actor, learner };

std::string to_string(Role role);
Role parse_role(const std::string& text);

struct ProfilePoint {
  std::size_t cores;
  double ops_per_sec;
};

// Aggregate throughput against thread count for one role. Points are strictly
// increasing in cores, finite and positive; at least two are required.
class ThroughputProfile {
 public:
  ThroughputProfile(Role role, std::vector<ProfilePoint> points);

  Role role() const noexcept { return role_; }
  const std::vector<ProfilePoint>& points() const noexcept { return points_; }
  std::size_t min_cores() const noexcept { return points_.front().cores; }
  std::size_t max_cores() const noexcept { return points_.back().cores; }

  // Linear interpolation between measured points. Throws ParameterError
  // outside [min_cores, max_cores]; no extrapolation.
  double at(std::size_t cores) const;

 private:
  Role role_;
  std::vector<ProfilePoint> points_;
};

struct Allocation {
  std::size_t actors = 0;
  std::size_t learners = 0;
  double actor_throughput = 0.0;
  double learner_throughput = 0.0;
  // f_a(x_a) / (update_interval * f_l(x_l))
  double ratio = 0.0;
  // No pair met the tolerance; this is the closest one.
  bool approximate = false;
  std::size_t pairs_evaluated = 0;
};

inline constexpr double kDefaultAllocationTolerance = 0.1;

/// Exhaustive search over integer core splits (x_a, x_l), x_a, x_l >= 1,
/// x_a + x_l <= total_cores.
///
/// Among pairs whose ratio f_a(x_a) / (update_interval * f_l(x_l)) is within
/// [1 - tolerance, 1 + tolerance], returns the one with the highest learner
/// throughput, then the fewest cores, then the fewest actor cores. If none
/// qualifies, returns the pair minimizing |f_a - update_interval * f_l| with
/// `approximate` set.
Allocation solve_allocation(const ThroughputProfile& actor, const ThroughputProfile& learner,
                            double update_interval, std::size_t total_cores,
                            double tolerance = kDefaultAllocationTolerance);

// One unit of role work executed by a profiling thread.
using WorkloadOp = std::function<void()>;
using WorkloadFactory = std::function<WorkloadOp(std::size_t thread_id)>;

struct ProfileOptions {
  // Permit more threads than hardware cores (sleep-bound synthetic loads).
  bool allow_oversubscription = false;
};

// Runs 1..max_cores threads of `make_op` for `per_point` each and records the
// aggregate operations per second.
ThroughputProfile profile(Role role, std::size_t max_cores,
                          std::chrono::duration<double> per_point,
                          const WorkloadFactory& make_op, ProfileOptions options = {});

// CSV with header role,cores,ops_per_sec.
void write_profile_csv(std::ostream& out, const ThroughputProfile& profile, bool header = true);
// Reads every row of the given role. Throws ParameterError on malformed input.
ThroughputProfile read_profile_csv(std::istream& in, Role role);

std::string allocation_csv_header();
std::string allocation_csv_row(const Allocation& a, double update_interval,
                               std::size_t total_cores, double tolerance);
std::string allocation_summary(const Allocation& a);

}  // namespace parl
