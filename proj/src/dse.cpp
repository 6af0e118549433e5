#include "parl/dse.hpp"

#include <atomic>
#include <barrier>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "parl/error.hpp"

namespace parl {

std::string to_string(Role role) { return role == Role::actor ? "actor" : "learner"; }

Role parse_role(const std::string& text) {
  if (text == "actor") return Role::actor;
  if (text == "learner") return Role::learner;
  throw ParameterError("unknown role '" + text + "' (expected actor or learner)");
}

ThroughputProfile::ThroughputProfile(Role role, std::vector<ProfilePoint> points)
    : role_(role), points_(std::move(points)) {
  if (points_.size() < 2) throw ParameterError("a throughput profile needs at least 2 points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const ProfilePoint& p = points_[i];
    if (p.cores < 1) throw ParameterError("profile core counts must be >= 1");
    if (!(p.ops_per_sec > 0.0) || !std::isfinite(p.ops_per_sec)) {
      throw ParameterError("profile throughput must be finite and positive");
    }
    if (i > 0 && p.cores <= points_[i - 1].cores) {
      throw ParameterError("profile core counts must be strictly increasing");
    }
  }
}

double ThroughputProfile::at(std::size_t cores) const {
  if (cores < min_cores() || cores > max_cores()) {
    throw ParameterError(to_string(role_) + " profile does not cover " + std::to_string(cores) +
                         " cores");
  }
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const ProfilePoint& lo = points_[i - 1];
    const ProfilePoint& hi = points_[i];
    if (cores == lo.cores) return lo.ops_per_sec;
    if (cores <= hi.cores) {
      const double t = static_cast<double>(cores - lo.cores) / static_cast<double>(hi.cores - lo.cores);
      return lo.ops_per_sec + t * (hi.ops_per_sec - lo.ops_per_sec);
    }
  }
  return points_.back().ops_per_sec;
}

Allocation solve_allocation(const ThroughputProfile& actor, const ThroughputProfile& learner,
                            double update_interval, std::size_t total_cores, double tolerance) {
  if (total_cores < 2) throw ParameterError("allocation needs at least 2 cores");
  if (!(update_interval > 0.0) || !std::isfinite(update_interval)) {
    throw ParameterError("update_interval must be positive");
  }
  if (!(tolerance >= 0.0) || !std::isfinite(tolerance)) {
    throw ParameterError("tolerance must be non-negative");
  }

  Allocation best;
  bool have_exact = false;
  Allocation closest;
  double closest_gap = std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;

  for (std::size_t xa = 1; xa < total_cores; ++xa) {
    const double fa = actor.at(xa);
    for (std::size_t xl = 1; xa + xl <= total_cores; ++xl) {
      const double fl = learner.at(xl);
      ++evaluated;
      const double demand = update_interval * fl;
      Allocation cand{xa, xl, fa, fl, fa / demand, false, 0};
      if (std::abs(cand.ratio - 1.0) <= tolerance) {
        const bool better =
            !have_exact || fl > best.learner_throughput ||
            (fl == best.learner_throughput &&
             (xa + xl < best.actors + best.learners ||
              (xa + xl == best.actors + best.learners && xa < best.actors)));
        if (better) {
          best = cand;
          have_exact = true;
        }
      }
      const double gap = std::abs(fa - demand);
      if (gap < closest_gap ||
          (gap == closest_gap && xa + xl < closest.actors + closest.learners)) {
        closest = cand;
        closest_gap = gap;
      }
    }
  }
  Allocation result = have_exact ? best : closest;
  result.approximate = !have_exact;
  result.pairs_evaluated = evaluated;
  return result;
}

ThroughputProfile profile(Role role, std::size_t max_cores,
                          std::chrono::duration<double> per_point,
                          const WorkloadFactory& make_op, ProfileOptions options) {
  if (max_cores < 2) throw ParameterError("profiling needs max_cores >= 2");
  if (!(per_point.count() > 0.0)) throw ParameterError("profiling duration must be positive");
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (max_cores > hw && !options.allow_oversubscription) {
    throw ParameterError("max_cores " + std::to_string(max_cores) + " exceeds the " +
                         std::to_string(hw) + " available cores");
  }

  using Clock = std::chrono::steady_clock;
  std::vector<ProfilePoint> points;
  for (std::size_t x = 1; x <= max_cores; ++x) {
    std::vector<WorkloadOp> ops;
    ops.reserve(x);
    for (std::size_t t = 0; t < x; ++t) ops.push_back(make_op(t));

    std::atomic<std::uint64_t> completed{0};
    Clock::time_point start;
    Clock::time_point deadline;
    std::barrier sync(static_cast<std::ptrdiff_t>(x), [&]() noexcept {
      start = Clock::now();
      deadline = start + std::chrono::duration_cast<Clock::duration>(per_point);
    });
    {
      std::vector<std::jthread> threads;
      for (std::size_t t = 0; t < x; ++t) {
        threads.emplace_back([&, t] {
          sync.arrive_and_wait();
          std::uint64_t n = 0;
          while (Clock::now() < deadline) {
            ops[t]();
            ++n;
          }
          completed.fetch_add(n);
        });
      }
    }
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    const double rate = static_cast<double>(completed.load()) / elapsed;
    if (!(rate > 0.0)) throw Error("profiled workload made no progress");
    points.push_back({x, rate});
  }
  return ThroughputProfile(role, std::move(points));
}

void write_profile_csv(std::ostream& out, const ThroughputProfile& p, bool header) {
  if (header) out << "role,cores,ops_per_sec\n";
  const auto precision = out.precision(12);
  for (const ProfilePoint& pt : p.points()) {
    out << to_string(p.role()) << ',' << pt.cores << ',' << pt.ops_per_sec << '\n';
  }
  out.precision(precision);
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

ThroughputProfile read_profile_csv(std::istream& in, Role role) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<ProfilePoint> points;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (fields.size() != 3) {
      throw ParameterError("line " + std::to_string(line_no) + ": expected 3 fields");
    }
    if (!saw_header && fields[0] == "role") {
      if (fields[1] != "cores" || fields[2] != "ops_per_sec") {
        throw ParameterError("unexpected profile CSV header");
      }
      saw_header = true;
      continue;
    }
    saw_header = true;
    const Role r = parse_role(fields[0]);
    if (r != role) continue;
    try {
      std::size_t used = 0;
      const unsigned long long cores = std::stoull(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("cores");
      const double ops = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("ops");
      points.push_back({static_cast<std::size_t>(cores), ops});
    } catch (const std::logic_error&) {
      throw ParameterError("line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return ThroughputProfile(role, std::move(points));
}

std::string allocation_csv_header() {
  return "actors,learners,actor_ops_per_sec,learner_ops_per_sec,ratio,approximate,"
         "update_interval,total_cores,tolerance,pairs_evaluated";
}

std::string allocation_csv_row(const Allocation& a, double update_interval,
                               std::size_t total_cores, double tolerance) {
  std::ostringstream out;
  out.precision(12);
  out << a.actors << ',' << a.learners << ',' << a.actor_throughput << ','
      << a.learner_throughput << ',' << a.ratio << ',' << (a.approximate ? 1 : 0) << ','
      << update_interval << ',' << total_cores << ',' << tolerance << ',' << a.pairs_evaluated;
  return out.str();
}

std::string allocation_summary(const Allocation& a) {
  std::ostringstream out;
  out.precision(6);
  out << "actors=" << a.actors << " learners=" << a.learners
      << " actor_ops_per_sec=" << a.actor_throughput
      << " learner_ops_per_sec=" << a.learner_throughput << " ratio=" << a.ratio
      << (a.approximate ? " (approximate)" : "");
  return out.str();
}

}  // namespace parl
