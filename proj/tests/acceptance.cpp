// Acceptance suite: each numbered criterion prints one PASS/FAIL line and
// the process exits nonzero if any of them failed.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "rav/checks.hpp"
#include "rav/runtime.hpp"
#include "rav/scenario_io.hpp"

using namespace rav;

namespace {

int failures = 0;

void report(int criterion, const std::string& label, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, label.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

struct ScenarioOutcome {
  bool ok = false;
  std::string detail;
};

// The four scenario-level checks shared by criteria 1 and 2: every agent
// ends inside its target, pairwise distance respects d0, obstacle
// clearance stays nonnegative, and the binary-graph connectivity never
// drops to zero.
ScenarioOutcome check_scenario_run(const Scenario& sc, RunMode mode) {
  ScenarioOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult r = run(sc.params, sc.initial_states, mode, sc.schedule);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.status != RunStatus::ok && r.status != RunStatus::violation) {
    out.detail = "run did not complete: " + r.message;
    return out;
  }
  double min_pair = 1e300, min_clear = 1e300, min_l2 = 1e300;
  for (const MetricsRow& m : r.metrics) {
    min_pair = std::min(min_pair, m.min_pair_dist);
    min_clear = std::min(min_clear, m.min_obs_clearance);
    min_l2 = std::min(min_l2, m.lambda2_binary);
  }
  // Final per-agent target membership from the trajectory tail.
  double final_resid = -1e300;
  const double t_end = r.trajectory.back().t;
  for (auto it = r.trajectory.rbegin(); it != r.trajectory.rend() && it->t == t_end; ++it)
    final_resid = std::max(final_resid, dot(it->x, sc.params.sigma.matvec(it->x)) - 1.0);

  const bool targets = final_resid <= 0.0;
  const bool pair_ok = min_pair >= sc.params.comm.d0 - 1e-6;
  const bool clear_ok = min_clear >= -1e-6;
  const bool conn_ok = min_l2 > 0.0;
  out.ok = targets && pair_ok && clear_ok && conn_ok;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "final max residual %.4g, min pair %.4g, min clearance %.3g, min binary "
                "lambda2 %.3g, %.0f s",
                final_resid, min_pair, min_clear, min_l2, secs);
  out.detail = buf;
  return out;
}

}  // namespace

int main() {
  const Scenario sc = builtin_paper_sec6();

  {
    const ScenarioOutcome o = check_scenario_run(sc, RunMode::distributed);
    report(1, "distributed benchmark run reaches targets safely", o.ok, o.detail);
  }
  {
    const ScenarioOutcome o = check_scenario_run(sc, RunMode::centralized);
    report(2, "centralized baseline run reaches targets safely", o.ok, o.detail);
  }
  {
    // Frozen initial state: local controls at the fast equilibrium against
    // the joint solve, plus feasibility of the joint optimizer for the
    // original coupled constraints.
    FrozenStateGap g;
    bool ran = true;
    std::string detail;
    try {
      g = frozen_state_gap(sc.initial_states, sc.params, sc.params.tau / 200.0,
                           1e-6 / sc.params.tau, 30000000);
      char buf[160];
      std::snprintf(buf, sizeof(buf), "control gap %.3g (<= 1e-3), coupled violation %.3g (<= 1e-7)",
                    g.control_gap_inf, g.eq_original_violation);
      detail = buf;
    } catch (const std::exception& e) {
      ran = false;
      detail = e.what();
    }
    report(3, "equilibrium local controls reproduce the joint optimizer",
           ran && g.control_gap_inf <= 1e-3 && g.eq_original_violation <= 1e-7, detail);
  }
  {
    const CheckResult r = checks_detail::check_w_monotonicity(
        2024, 10, sc.params.tau / 10000.0, 60000000);
    report(4, "merit function decreases and converges on fast runs", r.pass, r.detail);
  }
  {
    const CheckResult r = checks_detail::check_qp_battery(2025, 100);
    report(5, "QP solver matches the projected-gradient oracle", r.pass, r.detail);
  }
  {
    const CheckResult a = checks_detail::check_lambda2_gradient(2026, 50, Mutation::none);
    const CheckResult b = checks_detail::check_adjacency_gradient(2027, 50);
    const CheckResult c = checks_detail::check_hv_gradient(2028, 50);
    report(6, "analytic gradients match central differences", a.pass && b.pass && c.pass,
           a.detail + " | " + b.detail + " | " + c.detail);
  }
  {
    const CheckResult r = checks_detail::check_continuity_at_dc(2029, 50);
    report(7, "constraint blocks are continuous across the communication radius", r.pass,
           r.detail);
  }
  {
    const CheckResult r = checks_detail::check_decomposition(2030, 100, Mutation::none);
    report(8, "mismatch decomposition identities hold", r.pass, r.detail);
  }
  {
    // One message-passing tick must equal one monolithic fast step.
    const ScenarioParams& p = sc.params;
    const auto& x = sc.initial_states;
    const ConnectivityInfo conn = lambda2_with_grad(x, p.comm);
    std::vector<ConstraintBlock> blocks;
    for (std::size_t i = 0; i < 5; ++i) blocks.push_back(assemble_block(i, x, p, conn));
    const EdgeSet edges = neighbors(x, p.comm);
    const double dt = p.tau / 200.0;

    std::mt19937_64 rng(2031);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      FastState fast0 = make_fast_state(p);
      for (auto& f : fast0) {
        for (std::size_t k = 0; k < f.w.size(); ++k) f.w[k] = u(rng);
        for (std::size_t j = 0; j < 5; ++j) f.z_pair_own[j] = u(rng);
        f.z_c = u(rng);
        f.z_clf = u(rng);
        for (std::size_t r = 0; r < f.y.size(); ++r) f.y[r] = std::fabs(u(rng));
      }
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
          if (i == j) continue;
          const RowLayout rl(5, p.obstacles.size(), p.m, j);
          fast0[i].z_pair_other[j] = fast0[j].z_pair_own[i];
          fast0[i].y_pair_other[j] = fast0[j].y[rl.inter(i)];
          fast0[i].z_c_copies[j] = fast0[j].z_c;
          fast0[i].z_clf_copies[j] = fast0[j].z_clf;
        }

      FastState mono = fast0;
      fast_step(x, mono, dt, p, blocks);

      std::vector<AgentNode> nodes(5);
      for (std::size_t i = 0; i < 5; ++i) {
        nodes[i].id = static_cast<int>(i);
        nodes[i].x = x[i];
        nodes[i].fast = fast0[i];
      }
      const auto inboxes = tick_exchange(nodes, edges, conn);
      FastScratch scratch = make_fast_scratch(p);
      std::vector<PeerData> peers(5);
      for (std::size_t i = 0; i < 5; ++i)
        agent_fast_update(nodes[i], inboxes[i], x, p, blocks[i], dt, scratch, peers);

      for (std::size_t i = 0; i < 5; ++i) {
        const FastVarsAgent& a = nodes[i].fast;
        const FastVarsAgent& b = mono[i];
        for (std::size_t k = 0; k < p.m; ++k)
          worst = std::max(worst, std::fabs(a.w[k] - b.w[k]));
        for (std::size_t j = 0; j < 5; ++j) {
          worst = std::max(worst, std::fabs(a.z_pair_own[j] - b.z_pair_own[j]));
          worst = std::max(worst, std::fabs(a.z_pair_other[j] - b.z_pair_other[j]));
        }
        worst = std::max(worst, std::fabs(a.z_c - b.z_c));
        worst = std::max(worst, std::fabs(a.z_clf - b.z_clf));
        for (std::size_t r = 0; r < a.y.size(); ++r)
          worst = std::max(worst, std::fabs(a.y[r] - b.y[r]));
      }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "10 random states, max deviation %.3g", worst);
    report(9, "message-passing tick equals the monolithic fast step", worst <= 1e-12, buf);
  }

  std::printf(failures ? "ACCEPTANCE: %d criterion(s) FAILED\n" : "ACCEPTANCE: all criteria passed\n",
              failures);
  return failures ? 1 : 0;
}
