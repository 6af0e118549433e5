// parl: benchmarks, training, profiling and core allocation.
//
//   parl bench-ksweep [--capacity N ...] [--fanout K ...] [--threads T] [--ops N] [--out f.csv]
//   parl bench-scale  [--cores C ...] [--config f.ini] [--steps N] [--out f.csv]
//   parl train        --config f.ini [--seed S] [--steps N] [--out metrics.csv] [--summary f]
//   parl profile      --role actor|learner|both [--max-cores C] [--duration s] [--out f.csv]
//   parl dse          --actor-profile a.csv [--learner-profile l.csv] --max-cores M

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <thread>

#include "parl/bench.hpp"
#include "parl/config.hpp"
#include "parl/dse.hpp"
#include "parl/error.hpp"
#include "parl/harness.hpp"
#include "parl/version.hpp"
#include "parl/workloads.hpp"

namespace {

using namespace parl;

// Runs `emit` against the file at `path`, or stdout when the path is empty.
void with_output(const std::string& path, const std::function<void(std::ostream&)>& emit) {
  if (path.empty()) {
    emit(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write " + path);
  emit(out);
  if (!out) throw Error("write failed for " + path);
}

TrainConfig base_config(const std::string& path) {
  return path.empty() ? TrainConfig{} : load_train_config(path).config;
}

ThroughputProfile load_profile(const std::string& path, Role role) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open profile " + path);
  return read_profile_csv(in, role);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prioritized replay buffer benchmarks and training tools"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // bench-ksweep
  bench::KSweepOptions ks;
  std::string ks_out;
  auto* ksweep = app.add_subcommand("bench-ksweep", "Two-lock K-ary buffer vs global-lock binary baseline");
  ksweep->add_option("--capacity", ks.capacities, "Buffer capacities")->check(CLI::PositiveNumber);
  ksweep->add_option("--fanout", ks.fanouts, "Tree fanouts")->check(CLI::Range(2, 1 << 20));
  ksweep->add_option("--threads", ks.threads, "Worker threads")->check(CLI::PositiveNumber);
  ksweep->add_option("--ops", ks.ops_per_thread, "Sample+update rounds per thread")
      ->check(CLI::PositiveNumber);
  ksweep->add_option("--reps", ks.repetitions, "Timed repetitions (>= 3)");
  ksweep->add_option("--seed", ks.seed, "Random seed");
  ksweep->add_option("--out", ks_out, "CSV output (default stdout)");

  // bench-scale
  bench::ScaleOptions sc;
  std::string sc_config, sc_out;
  std::optional<std::uint64_t> sc_steps, sc_seed;
  auto* scale = app.add_subcommand("bench-scale", "Training throughput at several core budgets");
  scale->add_option("--cores", sc.core_counts, "Core budgets")->check(CLI::PositiveNumber);
  scale->add_option("--config", sc_config, "Training config (INI)");
  scale->add_option("--steps", sc_steps, "Environment steps per run");
  scale->add_option("--seed", sc_seed, "Random seed");
  scale->add_option("--reps", sc.repetitions, "Repetitions per budget (>= 3)");
  scale->add_option("--update-interval", sc.train.update_interval, "Learner iterations per step");
  scale->add_option("--out", sc_out, "CSV output (default stdout)");

  // train
  std::string tr_config, tr_out, tr_summary;
  std::optional<std::uint64_t> tr_seed, tr_steps;
  auto* trn = app.add_subcommand("train", "Run the actor/learner harness");
  trn->add_option("--config", tr_config, "Training config (INI)")->required();
  trn->add_option("--seed", tr_seed, "Override the config seed");
  trn->add_option("--steps", tr_steps, "Override the step budget");
  trn->add_option("--out", tr_out, "Metrics CSV path");
  trn->add_option("--summary", tr_summary, "Summary report path");

  // profile
  std::string pr_role = "both", pr_config, pr_out;
  std::size_t pr_max = std::max(1u, std::thread::hardware_concurrency());
  double pr_duration = 0.5;
  bool pr_oversubscribe = false;
  auto* prof = app.add_subcommand("profile", "Measure role throughput against thread count");
  prof->add_option("--role", pr_role, "actor, learner or both")
      ->check(CLI::IsMember({"actor", "learner", "both"}));
  prof->add_option("--max-cores", pr_max, "Largest thread count")->check(CLI::Range(2, 4096));
  prof->add_option("--duration", pr_duration, "Seconds per point")->check(CLI::PositiveNumber);
  prof->add_option("--config", pr_config, "Training config (INI)");
  prof->add_flag("--oversubscribe", pr_oversubscribe, "Allow more threads than cores");
  prof->add_option("--out", pr_out, "CSV output (default stdout)");

  // dse
  std::string ds_actor, ds_learner, ds_out;
  double ds_ui = 1.0, ds_tol = kDefaultAllocationTolerance;
  std::size_t ds_max = 0;
  auto* dse = app.add_subcommand("dse", "Choose the actor/learner core split");
  dse->add_option("--actor-profile", ds_actor, "Profile CSV with actor rows")->required();
  dse->add_option("--learner-profile", ds_learner, "Profile CSV with learner rows (default: actor file)");
  dse->add_option("--update-interval", ds_ui, "Learner iterations per step")->check(CLI::PositiveNumber);
  dse->add_option("--max-cores", ds_max, "Total core budget")->required()->check(CLI::Range(2, 1 << 20));
  dse->add_option("--tolerance", ds_tol, "Allowed relative ratio error")->check(CLI::NonNegativeNumber);
  dse->add_option("--out", ds_out, "CSV output for the chosen allocation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ksweep) {
      const auto rows = bench::bench_ksweep(ks);
      with_output(ks_out, [&](std::ostream& o) { bench::write_ksweep_csv(o, rows); });
    } else if (*scale) {
      const double ui = sc.train.update_interval;
      sc.train = base_config(sc_config);
      if (scale->count("--update-interval")) sc.train.update_interval = ui;
      if (sc_steps) {
        sc.train.steps = *sc_steps;
      } else if (sc_config.empty()) {
        sc.train.steps = 50000;
      }
      if (sc_seed) sc.train.seed = *sc_seed;
      validate(sc.train);
      const auto rows = bench::bench_scalability(sc);
      with_output(sc_out, [&](std::ostream& o) { bench::write_scale_csv(o, rows); });
    } else if (*trn) {
      TrainFile file = load_train_config(tr_config);
      if (tr_seed) file.config.seed = *tr_seed;
      if (tr_steps) file.config.steps = *tr_steps;
      validate(file.config);
      const std::string metrics = !tr_out.empty() ? tr_out
                                  : !file.metrics_path.empty() ? file.metrics_path
                                                               : "train_metrics.csv";
      const std::string summary = !tr_summary.empty() ? tr_summary
                                  : !file.summary_path.empty() ? file.summary_path
                                                               : "train_summary.txt";
      const TrainingReport report = train(file.config);
      with_output(metrics, [&](std::ostream& o) { report.write_metrics_csv(o); });
      with_output(summary, [&](std::ostream& o) { report.write_summary(o); });
      std::cout << report.summary_line() << '\n';
      if (!report.failures.empty()) {
        for (const auto& f : report.failures) std::cerr << "parl: training failure: " << f << '\n';
        return 1;
      }
    } else if (*prof) {
      RoleWorkbench bench(base_config(pr_config));
      const ProfileOptions opts{.allow_oversubscription = pr_oversubscribe};
      const auto per_point = std::chrono::duration<double>(pr_duration);
      std::vector<ThroughputProfile> profiles;
      for (Role role : {Role::actor, Role::learner}) {
        if (pr_role != "both" && parse_role(pr_role) != role) continue;
        profiles.push_back(profile(role, pr_max, per_point, bench.workload(role), opts));
      }
      with_output(pr_out, [&](std::ostream& o) {
        for (std::size_t i = 0; i < profiles.size(); ++i) write_profile_csv(o, profiles[i], i == 0);
      });
    } else if (*dse) {
      const ThroughputProfile fa = load_profile(ds_actor, Role::actor);
      const ThroughputProfile fl = load_profile(ds_learner.empty() ? ds_actor : ds_learner, Role::learner);
      const Allocation a = solve_allocation(fa, fl, ds_ui, ds_max, ds_tol);
      std::cout << allocation_summary(a) << '\n';
      if (!ds_out.empty()) {
        with_output(ds_out, [&](std::ostream& o) {
          o << allocation_csv_header() << '\n' << allocation_csv_row(a, ds_ui, ds_max, ds_tol) << '\n';
        });
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "parl: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
