#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "rav/checks.hpp"
#include "rav/runtime.hpp"
#include "rav/scenario_io.hpp"

#ifndef RAV_SCENARIO_DIR
#define RAV_SCENARIO_DIR "scenarios"
#endif

namespace {

std::string resolve_scenario(const std::string& arg) {
  namespace fs = std::filesystem;
  if (fs::exists(arg)) return arg;
  if (arg.find('/') == std::string::npos && arg.find('.') == std::string::npos) {
    const std::string candidate = std::string(RAV_SCENARIO_DIR) + "/" + arg + ".scn";
    if (fs::exists(candidate)) return candidate;
  }
  return arg;  // let the loader report the failure
}

struct Overrides {
  double dt = 0.0;
  int substeps = 0;
  double horizon = 0.0;
  double tau = 0.0;
  bool warm_start = false;
};

void apply_overrides(rav::Scenario& sc, const Overrides& ov) {
  if (ov.dt > 0) sc.schedule.dt_slow = ov.dt;
  if (ov.horizon > 0) sc.schedule.horizon = ov.horizon;
  if (ov.warm_start) sc.schedule.warm_start = true;
  if (ov.tau > 0) {
    // Keep dt_fast / tau fixed so the fast flow stays resolved.
    if (ov.substeps <= 0) {
      const double ratio = sc.params.tau / ov.tau;
      sc.schedule.fast_substeps = static_cast<std::size_t>(
          std::ceil(static_cast<double>(sc.schedule.fast_substeps) * ratio));
    }
    sc.params.tau = ov.tau;
  }
  if (ov.substeps > 0) sc.schedule.fast_substeps = static_cast<std::size_t>(ov.substeps);
}

int status_to_exit(rav::RunStatus s) { return s == rav::RunStatus::ok ? 0 : 1; }

const char* status_name(rav::RunStatus s) {
  switch (s) {
    case rav::RunStatus::ok: return "ok";
    case rav::RunStatus::violation: return "violation";
    case rav::RunStatus::refused: return "refused";
    case rav::RunStatus::infeasible: return "infeasible";
    case rav::RunStatus::nonfinite: return "nonfinite";
  }
  return "?";
}

int cmd_run(const std::string& scenario_arg, const std::string& mode_str,
            const std::string& out_dir, const Overrides& ov) {
  rav::Scenario sc = rav::load_scenario(resolve_scenario(scenario_arg));
  for (const std::string& n : sc.notices) std::cerr << "notice: " << n << "\n";
  apply_overrides(sc, ov);

  const rav::RunMode mode =
      mode_str == "centralized" ? rav::RunMode::centralized : rav::RunMode::distributed;
  const rav::RunResult result = rav::run(sc.params, sc.initial_states, mode, sc.schedule);

  std::filesystem::create_directories(out_dir);
  rav::write_trajectory(result.trajectory, sc.params.n, sc.params.m, out_dir + "/trajectory.csv");
  rav::write_metrics(result.metrics, out_dir + "/metrics.csv");
  const std::string summary =
      rav::write_run_summary(result, sc.params, out_dir + "/summary.txt");
  std::cout << summary;
  return status_to_exit(result.status);
}

int cmd_compare(const std::string& scenario_arg, const std::string& out_dir,
                const Overrides& ov) {
  rav::Scenario sc = rav::load_scenario(resolve_scenario(scenario_arg));
  apply_overrides(sc, ov);
  std::filesystem::create_directories(out_dir);

  const rav::FrozenStateGap frozen = rav::frozen_state_gap(
      sc.initial_states, sc.params, sc.schedule.dt_fast(), 1e-6 / sc.params.tau, 30000000);

  const rav::RunResult dist =
      rav::run(sc.params, sc.initial_states, rav::RunMode::distributed, sc.schedule);
  const rav::RunResult cent =
      rav::run(sc.params, sc.initial_states, rav::RunMode::centralized, sc.schedule);

  rav::write_trajectory(dist.trajectory, sc.params.n, sc.params.m,
                        out_dir + "/trajectory_distributed.csv");
  rav::write_trajectory(cent.trajectory, sc.params.n, sc.params.m,
                        out_dir + "/trajectory_centralized.csv");
  rav::write_metrics(dist.metrics, out_dir + "/metrics_distributed.csv");
  rav::write_metrics(cent.metrics, out_dir + "/metrics_centralized.csv");

  double max_gap = 0.0;
  const std::size_t common = std::min(dist.trajectory.size(), cent.trajectory.size());
  for (std::size_t base = 0; base + sc.params.num_agents <= common;
       base += sc.params.num_agents) {
    double step_gap2 = 0.0;
    for (std::size_t i = 0; i < sc.params.num_agents; ++i) {
      rav::Vec d = dist.trajectory[base + i].x;
      d -= cent.trajectory[base + i].x;
      step_gap2 += rav::dot(d, d);
    }
    max_gap = std::max(max_gap, std::sqrt(step_gap2));
  }

  std::ostringstream os;
  os << "frozen-state control gap (inf norm): " << rav::format_double(frozen.control_gap_inf)
     << "\n"
     << "frozen-state w vs local control gap: " << rav::format_double(frozen.w_vs_ubar_inf)
     << "\n"
     << "coupled-constraint violation of joint optimizer: "
     << rav::format_double(frozen.eq_original_violation) << "\n"
     << "max over time |x_distributed - x_centralized|: " << rav::format_double(max_gap) << "\n"
     << "distributed status: " << status_name(dist.status) << "\n"
     << "centralized status: " << status_name(cent.status) << "\n";
  const std::string text = os.str();
  std::ofstream f(out_dir + "/compare.txt");
  f << text;
  std::cout << text;

  if (dist.status != rav::RunStatus::ok || cent.status != rav::RunStatus::ok) return 1;
  return 0;
}

int cmd_check(std::uint64_t seed, const std::string& mutate) {
  rav::Mutation mutation = rav::Mutation::none;
  if (mutate == "clf-sign") mutation = rav::Mutation::clf_sign_flip;
  else if (mutate == "lambda2-grad") mutation = rav::Mutation::lambda2_grad_error;
  else if (!mutate.empty()) {
    std::cerr << "unknown mutation '" << mutate << "'\n";
    return 2;
  }
  const auto results = rav::run_property_checks(seed, mutation);
  bool all = true;
  for (const auto& r : results) {
    std::cout << "CHECK " << r.name << " " << (r.pass ? "PASS" : "FAIL") << " (" << r.detail
              << ")\n";
    all = all && r.pass;
  }
  std::cout << (all ? "ALL CHECKS PASSED" : "CHECK FAILURES PRESENT") << "\n";
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent reach-avoid control toolkit"};
  app.require_subcommand(1);

  std::string scenario = "paper_sec6";
  std::string mode = "distributed";
  std::string out_dir = "out";
  Overrides ov;
  std::uint64_t seed = 12345;
  std::string mutate;

  auto add_common = [&](CLI::App* sub, bool with_mode) {
    sub->add_option("--scenario", scenario, "Scenario file or bare name under scenarios/");
    if (with_mode)
      sub->add_option("--mode", mode, "distributed|centralized")
          ->check(CLI::IsMember({"distributed", "centralized"}));
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--dt", ov.dt, "Slow step override");
    sub->add_option("--substeps", ov.substeps, "Fast substeps per slow step");
    sub->add_option("--horizon", ov.horizon, "Horizon override (time units)");
    sub->add_option("--tau", ov.tau, "Fast time-scale override");
    sub->add_flag("--warm-start", ov.warm_start, "Start fast variables at their equilibrium");
    sub->add_option("--seed", seed, "Seed for randomized test batteries");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "Simulate a scenario and write outputs");
  add_common(run_cmd, true);
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "Run both modes and report their gaps");
  add_common(compare_cmd, false);
  CLI::App* check_cmd = app.add_subcommand("check", "Run the property-check battery");
  check_cmd->add_option("--seed", seed, "Seed for randomized test batteries");
  check_cmd->add_option("--mutate", mutate,
                        "Fault injection for battery validation: clf-sign|lambda2-grad");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(scenario, mode, out_dir, ov);
    if (compare_cmd->parsed()) return cmd_compare(scenario, out_dir, ov);
    if (check_cmd->parsed()) return cmd_check(seed, mutate);
  } catch (const rav::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
