#include <doctest.h>

#include <random>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "parl/dse.hpp"
#include "parl/error.hpp"

using namespace parl;

namespace {

ThroughputProfile linear(Role role, double slope, std::size_t max_cores) {
  std::vector<ProfilePoint> pts;
  for (std::size_t x = 1; x <= max_cores; ++x) pts.push_back({x, slope * static_cast<double>(x)});
  return ThroughputProfile(role, pts);
}

}  // namespace

TEST_CASE("profile validation and interpolation") {
  CHECK_THROWS_AS(ThroughputProfile(Role::actor, {{1, 10.0}}), ParameterError);
  CHECK_THROWS_AS(ThroughputProfile(Role::actor, {{2, 10.0}, {2, 20.0}}), ParameterError);
  CHECK_THROWS_AS(ThroughputProfile(Role::actor, {{1, 10.0}, {2, -1.0}}), ParameterError);
  CHECK_THROWS_AS(ThroughputProfile(Role::actor, {{0, 10.0}, {2, 1.0}}), ParameterError);
  const ThroughputProfile p(Role::learner, {{1, 10.0}, {3, 30.0}, {4, 32.0}});
  CHECK(p.at(1) == 10.0);
  CHECK(p.at(2) == doctest::Approx(20.0));
  CHECK(p.at(4) == 32.0);
  CHECK_THROWS_AS(p.at(0), ParameterError);
  CHECK_THROWS_AS(p.at(5), ParameterError);
  CHECK(parse_role("actor") == Role::actor);
  CHECK_THROWS_AS(parse_role("critic"), ParameterError);
}

TEST_CASE("allocation examples") {
  SUBCASE("linear 100x vs 50x, six cores") {
    const Allocation a =
        solve_allocation(linear(Role::actor, 100, 5), linear(Role::learner, 50, 5), 1.0, 6, 0.01);
    CHECK(a.actors == 2);
    CHECK(a.learners == 4);
    CHECK_FALSE(a.approximate);
    CHECK(a.ratio == doctest::Approx(1.0));
    CHECK(a.pairs_evaluated <= 36);
    CHECK(a.pairs_evaluated == 15);
    const Allocation d =
        solve_allocation(linear(Role::actor, 100, 5), linear(Role::learner, 50, 5), 1.0, 6);
    CHECK(d.actors == 2);
    CHECK(d.learners == 4);
  }
  SUBCASE("identical curves, two cores") {
    const Allocation a =
        solve_allocation(linear(Role::actor, 70, 2), linear(Role::learner, 70, 2), 1.0, 2);
    CHECK(a.actors == 1);
    CHECK(a.learners == 1);
  }
  SUBCASE("update interval 2 follows the stated objective") {
    // (1,1), (2,2) and (3,3) are all exact; the highest learner throughput
    // within six cores is (3,3).
    const Allocation a =
        solve_allocation(linear(Role::actor, 100, 5), linear(Role::learner, 50, 5), 2.0, 6);
    CHECK(a.actors == 3);
    CHECK(a.learners == 3);
    CHECK(a.ratio == doctest::Approx(1.0));
    const Allocation four =
        solve_allocation(linear(Role::actor, 100, 5), linear(Role::learner, 50, 5), 2.0, 4);
    CHECK(four.actors == 2);
    CHECK(four.learners == 2);
  }
  SUBCASE("no feasible pair falls back to the closest") {
    const Allocation a =
        solve_allocation(linear(Role::actor, 1000, 3), linear(Role::learner, 10, 3), 1.0, 4, 0.1);
    CHECK(a.approximate);
    CHECK(a.actors == 1);
    CHECK(a.learners == 3);
  }
  SUBCASE("errors") {
    const auto fa = linear(Role::actor, 100, 5);
    const auto fl = linear(Role::learner, 50, 5);
    CHECK_THROWS_AS(solve_allocation(fa, fl, 1.0, 1), ParameterError);
    CHECK_THROWS_AS(solve_allocation(fa, fl, 0.0, 4), ParameterError);
    CHECK_THROWS_AS(solve_allocation(fa, fl, 1.0, 4, -0.5), ParameterError);
    // Profiles must cover every split of the budget.
    CHECK_THROWS_AS(solve_allocation(fa, fl, 1.0, 8), ParameterError);
  }
}

TEST_CASE("solver matches brute force on random profiles") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> gain(0.2, 3.0);
  std::uniform_real_distribution<double> base(10.0, 200.0);
  std::uniform_int_distribution<std::size_t> cores(2, 12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = cores(rng);
    std::vector<ProfilePoint> a, l;
    double va = base(rng), vl = base(rng);
    for (std::size_t x = 1; x < m; ++x) {
      a.push_back({x, va});
      l.push_back({x, vl});
      va += base(rng) * gain(rng) * 0.3;
      vl += base(rng) * gain(rng) * 0.3;
    }
    if (m == 2) {
      a.push_back({2, va});
      l.push_back({2, vl});
    }
    const ThroughputProfile fa(Role::actor, a), fl(Role::learner, l);
    const double ui = gain(rng);
    const double tau = trial % 3 == 0 ? 0.01 : 0.1;
    const Allocation got = solve_allocation(fa, fl, ui, m, tau);
    const oracle::Split want = oracle::best_split([&](std::size_t x) { return fa.at(x); },
                                                  [&](std::size_t x) { return fl.at(x); }, ui, m,
                                                  tau);
    CHECK(got.actors == want.actors);
    CHECK(got.learners == want.learners);
    CHECK(got.approximate == want.approximate);
    CHECK(got.pairs_evaluated <= m * m);
    CHECK(got.pairs_evaluated == m * (m - 1) / 2);
  }
}

TEST_CASE("linear profiles solve in closed form") {
  // With f_a = a x and f_l = b x the exact splits satisfy a x_a = ui b x_l.
  for (std::size_t m = 3; m <= 20; ++m) {
    const Allocation s =
        solve_allocation(linear(Role::actor, 100, m - 1), linear(Role::learner, 50, m - 1), 1.0, m,
                         0.0);
    // Best exact split: x_l = 2 x_a with 3 x_a <= m.
    if (m >= 3) {
      CHECK(s.actors == m / 3);
      CHECK(s.learners == 2 * (m / 3));
    }
  }
}

TEST_CASE("profiling a calibrated sleeping workload is linear") {
  const WorkloadFactory sleeper = [](std::size_t) -> WorkloadOp {
    return [] { std::this_thread::sleep_for(std::chrono::milliseconds(10)); };
  };
  const ThroughputProfile p = profile(Role::actor, 4, std::chrono::milliseconds(400), sleeper,
                                      {.allow_oversubscription = true});
  REQUIRE(p.points().size() == 4);
  double sxy = 0, sxx = 0;
  for (const ProfilePoint& pt : p.points()) {
    const double x = static_cast<double>(pt.cores);
    sxy += x * pt.ops_per_sec;
    sxx += x * x;
    CHECK(pt.ops_per_sec == doctest::Approx(100.0 * x).epsilon(0.1));
  }
  CHECK(sxy / sxx == doctest::Approx(100.0).epsilon(0.1));
}

TEST_CASE("profiling rejects degenerate requests") {
  const WorkloadFactory noop = [](std::size_t) -> WorkloadOp { return [] {}; };
  CHECK_THROWS_AS(profile(Role::actor, 2, std::chrono::seconds(0), noop), ParameterError);
  CHECK_THROWS_AS(profile(Role::actor, 1, std::chrono::milliseconds(10), noop), ParameterError);
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  CHECK_THROWS_AS(profile(Role::actor, hw + 1, std::chrono::milliseconds(10), noop),
                  ParameterError);
}

TEST_CASE("profile CSV round trip") {
  const ThroughputProfile a(Role::actor, {{1, 100.5}, {2, 180.25}});
  const ThroughputProfile l(Role::learner, {{1, 40.0}, {2, 75.0}, {3, 101.0}});
  std::stringstream csv;
  write_profile_csv(csv, a);
  write_profile_csv(csv, l, false);
  const std::string text = csv.str();
  std::istringstream in1(text), in2(text);
  const ThroughputProfile a2 = read_profile_csv(in1, Role::actor);
  const ThroughputProfile l2 = read_profile_csv(in2, Role::learner);
  CHECK(a2.points().size() == 2);
  CHECK(a2.at(2) == 180.25);
  CHECK(l2.points().size() == 3);

  std::istringstream bad("role,cores,ops_per_sec\nactor,1,abc\nactor,2,5\n");
  CHECK_THROWS_AS(read_profile_csv(bad, Role::actor), ParameterError);
  std::istringstream short_row("actor,1\n");
  CHECK_THROWS_AS(read_profile_csv(short_row, Role::actor), ParameterError);
  std::istringstream one("actor,1,5\n");
  CHECK_THROWS_AS(read_profile_csv(one, Role::actor), ParameterError);

  const Allocation alloc{2, 4, 200, 200, 1.0, false, 15};
  const std::string row = allocation_csv_row(alloc, 1.0, 6, 0.1);
  CHECK(row.rfind("2,4,", 0) == 0);
  const std::string header = allocation_csv_header();
  CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
}
