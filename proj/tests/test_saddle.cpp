#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rav/checks.hpp"
#include "rav/qp.hpp"
#include "rav/saddle.hpp"
#include "rav/scenario_io.hpp"

using namespace rav;

namespace {

Scenario bench() { return builtin_paper_sec6(); }

FastState equilibrium_at_start(const Scenario& sc) {
  EquilibriumOptions opts;
  opts.dt_fast = sc.params.tau / 200.0;
  return run_to_equilibrium(sc.initial_states, make_fast_state(sc.params), sc.params,
                            1e-7 / sc.params.tau, opts);
}

}  // namespace

TEST_CASE("generic saddle flow: equality toy converges to (1, -1)") {
  SaddleProblem p;
  p.wdiag = Vec{1.0};
  p.q = Vec{0.0};
  p.gineq = Mat(0, 1);
  p.hineq = Vec(0);
  p.aeq = Mat(1, 1);
  p.aeq(0, 0) = 1.0;
  p.beq = Vec{1.0};
  SaddleFlowState s{Vec{0.0}, Vec(0), Vec{0.0}};
  s = generic_saddle_flow(p, s, 1e-3, 40000);
  CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(s.mu[0] == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("generic saddle flow: inequality toy converges to (1, 1)") {
  SaddleProblem p;
  p.wdiag = Vec{1.0};
  p.q = Vec{0.0};
  p.gineq = Mat(1, 1);
  p.gineq(0, 0) = -1.0;  // -v <= -1
  p.hineq = Vec{-1.0};
  p.aeq = Mat(0, 1);
  p.beq = Vec(0);
  SaddleFlowState s{Vec{0.0}, Vec{0.0}, Vec(0)};
  s = generic_saddle_flow(p, s, 1e-3, 60000);
  CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(s.y[0] == doctest::Approx(1.0).epsilon(1e-5));

  // Merit at (2, 1): grad_v L = v - y = 1, grad_y L = 1 - v = -1 with
  // y > 0 included, so W = 1 > 0.
  const double v = 2.0, y = 1.0;
  const double w_toy = 0.5 * ((v - y) * (v - y) + (1.0 - v) * (1.0 - v));
  CHECK(w_toy > 0.0);
}

TEST_CASE("generic saddle flow limit matches the QP solver") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    SaddleProblem p;
    const std::size_t n = 3;
    p.wdiag = Vec(n);
    for (std::size_t k = 0; k < n; ++k) p.wdiag[k] = 1.0 + std::fabs(u(rng));
    p.q = Vec(n);
    p.gineq = Mat(4, n);
    p.hineq = Vec(4);
    Vec v0(n);
    for (std::size_t k = 0; k < n; ++k) v0[k] = u(rng);
    for (std::size_t r = 0; r < 4; ++r) {
      double av = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        p.gineq(r, k) = u(rng);
        av += p.gineq(r, k) * v0[k];
      }
      p.hineq[r] = av + (r % 2 ? 0.0 : 0.4);
    }
    p.aeq = Mat(0, n);
    p.beq = Vec(0);

    SaddleFlowState s{Vec(n), Vec(4), Vec(0)};
    s = generic_saddle_flow(p, s, 5e-4, 3000000);

    QPInstance inst;
    inst.dim = n;
    inst.weights = p.wdiag;
    inst.a = p.gineq;
    inst.b = p.hineq;
    const QPSolution sol = solve(inst);
    REQUIRE(sol.status == QPStatus::solved);
    Vec d = s.x;
    d -= sol.v;
    CHECK(norm2(d) <= 1e-4);
  }
}

TEST_CASE("fast derivatives vanish at the equilibrium") {
  const Scenario sc = bench();
  const FastState eq = equilibrium_at_start(sc);
  const ConnectivityInfo conn = lambda2_with_grad(sc.initial_states, sc.params.comm);
  std::vector<ConstraintBlock> blocks;
  for (std::size_t i = 0; i < 5; ++i)
    blocks.push_back(assemble_block(i, sc.initial_states, sc.params, conn));
  const auto derivs = fast_derivatives(sc.initial_states, eq, sc.params, blocks);
  for (const auto& d : derivs) CHECK(d.max_abs() <= 1e-7 / sc.params.tau * 1.01);
}

TEST_CASE("isolated pair: mismatch decays, dual frozen") {
  Scenario sc = bench();
  ScenarioParams& p = sc.params;
  // Agent 0 far away from everyone.
  std::vector<Vec> x = sc.initial_states;
  x[0] = Vec{10.0, 10.0};
  const ConnectivityInfo conn = lambda2_with_grad(x, p.comm);
  std::vector<ConstraintBlock> blocks;
  for (std::size_t i = 0; i < 5; ++i) blocks.push_back(assemble_block(i, x, p, conn));

  FastState fast = make_fast_state(p);
  fast[0].z_pair_own[1] = 0.8;
  fast[0].z_pair_other[1] = -0.3;
  const RowLayout rl(5, p.obstacles.size(), p.m, 0);
  fast[0].y[rl.inter(1)] = 0.4;

  const auto derivs = fast_derivatives(x, fast, p, blocks);
  CHECK(derivs[0].dz_pair_own[1] ==
        doctest::Approx(-p.xi * 0.8 / p.tau).epsilon(1e-12));
  CHECK(derivs[0].dz_pair_other[1] ==
        doctest::Approx(-p.xi * -0.3 / p.tau).epsilon(1e-12));
  // The pair row of an isolated agent evaluates to exactly zero, so the
  // projected dual derivative vanishes and y stays frozen.
  CHECK(derivs[0].dy[rl.inter(1)] == 0.0);

  // Closed-form decay tracks the Euler iterates to first order.
  FastState stepped = fast;
  const double dt = p.tau / 20.0;
  for (int k = 0; k < 20; ++k) fast_step(x, stepped, dt, p, blocks);
  const double expect = 0.8 * std::exp(-p.xi * dt * 20 / p.tau);
  CHECK(std::fabs(stepped[0].z_pair_own[1] - expect) <= 0.02 * expect);
  CHECK(stepped[0].y[rl.inter(1)] == 0.4);
}

TEST_CASE("connectivity coupling telescopes to zero") {
  const Scenario sc = bench();
  const ScenarioParams& p = sc.params;
  const auto& x = sc.initial_states;
  const ConnectivityInfo conn = lambda2_with_grad(x, p.comm);
  std::vector<ConstraintBlock> blocks;
  for (std::size_t i = 0; i < 5; ++i) blocks.push_back(assemble_block(i, x, p, conn));

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1, 1);
  FastState fast = make_fast_state(p);
  for (auto& f : fast) {
    f.z_c = u(rng);
    f.z_clf = u(rng);
    for (std::size_t r = 0; r < f.y.size(); ++r) f.y[r] = std::fabs(u(rng));
  }
  const auto derivs = fast_derivatives(x, fast, p, blocks);
  double conn_sum = 0.0, clf_sum = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    conn_sum += p.tau * derivs[i].dz_c + p.xi * fast[i].z_c;
    clf_sum += p.tau * derivs[i].dz_clf + p.xi * fast[i].z_clf;
  }
  CHECK(std::fabs(conn_sum) <= 1e-12);
  CHECK(std::fabs(clf_sum) <= 1e-12);
}

TEST_CASE("fast_step: fixed point, decay law, dual nonnegativity") {
  const Scenario sc = bench();
  const ScenarioParams& p = sc.params;
  const auto& x = sc.initial_states;

  // Fixed point: stepping from the equilibrium changes nothing measurable.
  const FastState eq = equilibrium_at_start(sc);
  const ConnectivityInfo conn = lambda2_with_grad(x, p.comm);
  std::vector<ConstraintBlock> blocks;
  for (std::size_t i = 0; i < 5; ++i) blocks.push_back(assemble_block(i, x, p, conn));
  FastState stepped = eq;
  fast_step(x, stepped, p.tau / 200.0, p, blocks);
  for (std::size_t i = 0; i < 5; ++i) {
    Vec dw = stepped[i].w;
    dw -= eq[i].w;
    CHECK(norm_inf(dw) <= 1e-8);
  }

  // Dual nonnegativity over many randomized steps.
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-1, 1);
  FastState f = make_fast_state(p);
  for (auto& a : f) {
    for (std::size_t k = 0; k < a.w.size(); ++k) a.w[k] = u(rng);
    for (std::size_t r = 0; r < a.y.size(); ++r) a.y[r] = std::fabs(u(rng));
  }
  for (int k = 0; k < 10000; ++k) {
    fast_step(x, f, p.tau / 200.0, p, blocks);
    if (k % 100 == 0)
      for (const auto& a : f)
        for (std::size_t r = 0; r < a.y.size(); ++r) CHECK(a.y[r] >= 0.0);
  }
  for (const auto& a : f)
    for (std::size_t r = 0; r < a.y.size(); ++r) CHECK(a.y[r] >= 0.0);

  CHECK_THROWS_AS(fast_step(x, f, 0.0, p, blocks), std::invalid_argument);
}

TEST_CASE("merit at the saddle is numerically zero, positive away from it") {
  const Scenario sc = bench();
  const ScenarioParams& p = sc.params;
  const auto& x = sc.initial_states;
  const ConnectivityInfo conn = lambda2_with_grad(x, p.comm);
  std::vector<ConstraintBlock> blocks;
  for (std::size_t i = 0; i < 5; ++i) blocks.push_back(assemble_block(i, x, p, conn));

  const FastState eq = equilibrium_at_start(sc);
  const MeritReport at_eq = merit_W(x, eq, p, blocks);
  CHECK(at_eq.w <= 1e-10);
  CHECK(merit_W_full(x, eq, p, blocks, eq) <= 1e-10);

  FastState off = eq;
  off[0].w[0] += 0.5;
  const MeritReport away = merit_W(x, off, p, blocks);
  CHECK(away.w > 1e-4);
  CHECK(merit_W_full(x, off, p, blocks, eq) >= away.w);
  // Per-agent contributions sum to the total.
  double sum = 0.0;
  for (double wi : away.per_agent) sum += wi;
  CHECK(sum == doctest::Approx(away.w).epsilon(1e-12));
}

TEST_CASE("merit is monotone along sampled fast trajectories") {
  const CheckResult r = checks_detail::check_w_monotonicity(
      7, 2, builtin_paper_sec6().params.tau / 10000.0, 40000000);
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("run_to_equilibrium returns immediately from the saddle") {
  const Scenario sc = bench();
  const FastState eq = equilibrium_at_start(sc);
  EquilibriumOptions opts;
  opts.dt_fast = sc.params.tau / 200.0;
  opts.max_iters = 10;  // only enough for the immediate exit
  const FastState again = run_to_equilibrium(sc.initial_states, eq, sc.params,
                                             1e-6 / sc.params.tau, opts);
  for (std::size_t i = 0; i < 5; ++i) {
    Vec d = again[i].w;
    d -= eq[i].w;
    CHECK(norm_inf(d) <= 1e-12);
  }
}

TEST_CASE("run_to_equilibrium reports non-convergence with the final merit") {
  const Scenario sc = bench();
  EquilibriumOptions opts;
  opts.dt_fast = sc.params.tau / 200.0;
  opts.max_iters = 3;
  FastState far = make_fast_state(sc.params);
  far[0].w[0] = 1.0;
  CHECK_THROWS_AS(run_to_equilibrium(sc.initial_states, far, sc.params, 1e-12, opts),
                  SaddleConvergenceError);
}

TEST_CASE("equilibrium is the KKT point of the joint problem") {
  const Scenario sc = bench();
  const ScenarioParams& p = sc.params;
  const auto& x = sc.initial_states;
  const ConnectivityInfo conn = lambda2_with_grad(x, p.comm);
  std::vector<ConstraintBlock> blocks;
  for (std::size_t i = 0; i < 5; ++i) blocks.push_back(assemble_block(i, x, p, conn));
  const FastState eq = equilibrium_at_start(sc);

  // Feasibility and complementary slackness of the limit.
  for (std::size_t i = 0; i < 5; ++i) {
    const ZLayout zl(5, i);
    Vec z(zl.size());
    for (std::size_t j = 0; j < 5; ++j) {
      if (j != i) {
        z[zl.pair_own(j)] = eq[i].z_pair_own[j];
        z[zl.pair_other(j)] = eq[j].z_pair_own[i];
        z[zl.conn(j)] = eq[j].z_c;
        z[zl.clf(j)] = eq[j].z_clf;
      }
    }
    z[zl.conn(i)] = eq[i].z_c;
    z[zl.clf(i)] = eq[i].z_clf;
    const Vec rows = eval_local(blocks[i], eq[i].w, z);
    double comp = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      CHECK(rows[r] <= 1e-6);
      comp += eq[i].y[r] * rows[r];
    }
    CHECK(std::fabs(comp) <= 1e-6);
  }

  // w* agrees with the local controls at z* and with the joint optimizer.
  const CentralizedSolution cs = solve_centralized(x, p, conn);
  for (std::size_t i = 0; i < 5; ++i) {
    const Vec u_i = solve_local(blocks[i], slice_agent_z(cs.z, i, 5));
    for (std::size_t q = 0; q < p.m; ++q) {
      CHECK(std::fabs(eq[i].w[q] - u_i[q]) <= 1e-4);
      CHECK(std::fabs(eq[i].w[q] - cs.u[i * p.m + q]) <= 1e-3);
    }
  }
}
