#include "rav/checks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rav/constraints.hpp"
#include "rav/graph.hpp"
#include "rav/numerics.hpp"
#include "rav/qp.hpp"
#include "rav/runtime.hpp"
#include "rav/saddle.hpp"
#include "rav/scenario_io.hpp"

namespace rav {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<Vec> random_positions(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<Vec> x(n, Vec(2));
  for (auto& p : x) {
    p[0] = uniform(rng, lo, hi);
    p[1] = uniform(rng, lo, hi);
  }
  return x;
}

double rel_err(const Vec& got, const Vec& want) {
  Vec d = got;
  d -= want;
  const double denom = std::max(norm2(want), 1e-10);
  return norm2(d) / denom;
}

CheckResult make_result(const std::string& name, bool pass, const std::string& detail) {
  return {name, pass, detail};
}

// Feasible-by-construction random instance: b is set from a known interior
// point plus nonnegative slack, occasionally zero to force active rows.
QPInstance random_feasible_qp(Rng& rng) {
  QPInstance inst;
  inst.dim = 2 + static_cast<std::size_t>(uniform(rng, 0, 4.999));
  const std::size_t rows = 2 + static_cast<std::size_t>(uniform(rng, 0, 10.999));
  inst.weights = Vec(inst.dim);
  for (std::size_t k = 0; k < inst.dim; ++k) inst.weights[k] = uniform(rng, 0.5, 2.0);
  inst.a = Mat(rows, inst.dim);
  inst.b = Vec(rows);
  Vec v0(inst.dim);
  for (std::size_t k = 0; k < inst.dim; ++k) v0[k] = uniform(rng, -1.0, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const bool zero_row = uniform(rng, 0, 1) < 0.05;
    double av = 0.0;
    for (std::size_t k = 0; k < inst.dim; ++k) {
      inst.a(r, k) = zero_row ? 0.0 : uniform(rng, -1.0, 1.0);
      av += inst.a(r, k) * v0[k];
    }
    const double slack = uniform(rng, 0, 1) < 0.3 ? 0.0 : uniform(rng, 0.0, 1.0);
    inst.b[r] = av + slack;
  }
  return inst;
}

ScenarioParams benchmark_params() { return builtin_paper_sec6().params; }

}  // namespace

namespace checks_detail {

CheckResult check_sym_eig(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  std::ostringstream os;
  double worst = 0.0;
  for (std::size_t trial = 0; trial < count; ++trial) {
    const std::size_t n = 3 + trial % 6;
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        m(i, j) = uniform(rng, -2, 2);
        m(j, i) = m(i, j);
      }
    const SymEig eig = sym_eig(m);
    // Reconstruction residual and orthonormality.
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k)
          s += eig.eigenvectors(i, k) * eig.eigenvalues[k] * eig.eigenvectors(j, k);
        resid = std::max(resid, std::fabs(s - m(i, j)));
      }
    double trace = 0.0, eigsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      trace += m(i, i);
      eigsum += eig.eigenvalues[i];
    }
    const double scale = std::max(1.0, m.norm_inf());
    worst = std::max(worst, resid / scale);
    worst = std::max(worst, std::fabs(trace - eigsum) / scale);
  }
  os << "worst normalized residual " << worst;
  return make_result("sym_eig_reconstruction", worst <= 1e-10, os.str());
}

CheckResult check_lambda2_gradient(std::uint64_t seed, std::size_t count, Mutation mutation) {
  Rng rng(seed);
  const ScenarioParams params = benchmark_params();
  double worst = 0.0;
  std::size_t accepted = 0, attempts = 0;
  while (accepted < count && attempts < 100 * count) {
    ++attempts;
    const auto x = random_positions(rng, 5, -0.8, 0.8);
    const ConnectivityInfo info = lambda2_with_grad(x, params.comm);
    if (info.eigengap < 0.1) continue;
    ++accepted;
    Vec flat(10);
    for (std::size_t i = 0; i < 5; ++i) {
      flat[2 * i] = x[i][0];
      flat[2 * i + 1] = x[i][1];
    }
    const Vec fd = finite_diff_grad(
        [&](const Vec& v) {
          std::vector<Vec> xs(5, Vec(2));
          for (std::size_t i = 0; i < 5; ++i) {
            xs[i][0] = v[2 * i];
            xs[i][1] = v[2 * i + 1];
          }
          return laplacian_lambda2(weighted_laplacian(xs, params.comm)).lambda2;
        },
        flat, 1e-5);
    Vec analytic(10);
    for (std::size_t i = 0; i < 5; ++i) {
      analytic[2 * i] = info.grad[i][0];
      analytic[2 * i + 1] = info.grad[i][1];
    }
    if (mutation == Mutation::lambda2_grad_error) analytic *= 1.001;
    worst = std::max(worst, rel_err(analytic, fd));
  }
  std::ostringstream os;
  os << accepted << " configs, worst relative error " << worst;
  return make_result("lambda2_gradient_vs_fd", accepted == count && worst <= 1e-4, os.str());
}

CheckResult check_adjacency_gradient(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  const ScenarioParams params = benchmark_params();
  double worst = 0.0;
  std::size_t accepted = 0;
  while (accepted < count) {
    Vec p(2), q(2);
    p[0] = uniform(rng, -1, 1);
    p[1] = uniform(rng, -1, 1);
    const double r = uniform(rng, 0.05, params.comm.d_c - params.comm.eps_c - 0.05);
    const double th = uniform(rng, 0, 6.2831853);
    q[0] = p[0] + r * std::cos(th);
    q[1] = p[1] + r * std::sin(th);
    Vec analytic;
    adjacency_weight(p, q, params.comm, &analytic);
    if (norm2(analytic) < 1e-8) continue;
    ++accepted;
    const Vec fd = finite_diff_grad(
        [&](const Vec& v) { return adjacency_weight(v, q, params.comm); }, p, 1e-6);
    worst = std::max(worst, rel_err(analytic, fd));
  }
  std::ostringstream os;
  os << count << " pairs, worst relative error " << worst;
  return make_result("adjacency_gradient_vs_fd", worst <= 1e-4, os.str());
}

CheckResult check_hv_gradient(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  const ScenarioParams params = benchmark_params();
  double worst = 0.0;
  std::size_t accepted = 0;
  while (accepted < count) {
    Vec x(2);
    x[0] = uniform(rng, -2.5, 2.5);
    x[1] = uniform(rng, -2.5, 2.5);
    const ValueGrad hv = hV_product(x, params);
    if (norm2(hv.grad) < 1e-6) continue;  // inside or on the target set
    ++accepted;
    const Vec fd = finite_diff_grad(
        [&](const Vec& v) { return hV_product(v, params).value; }, x, 1e-5);
    worst = std::max(worst, rel_err(hv.grad, fd));
  }
  std::ostringstream os;
  os << count << " points, worst relative error " << worst;
  return make_result("hv_gradient_vs_fd", worst <= 1e-4, os.str());
}

CheckResult check_qp_battery(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  double worst_gap = 0.0, worst_kkt = 0.0;
  std::size_t misclassified = 0;
  for (std::size_t trial = 0; trial < count; ++trial) {
    const QPInstance inst = random_feasible_qp(rng);
    const QPSolution sol = solve(inst);
    if (sol.status != QPStatus::solved) {
      ++misclassified;
      continue;
    }
    worst_kkt = std::max(worst_kkt, sol.kkt_residual);
    const Vec oracle = brute_force_oracle(inst);
    Vec d = sol.v;
    d -= oracle;
    worst_gap = std::max(worst_gap, norm2(d));
  }
  std::ostringstream os;
  os << count << " instances, worst |solver-oracle| " << worst_gap << ", worst KKT "
     << worst_kkt << ", misclassified " << misclassified;
  return make_result("qp_solver_vs_oracle",
                     misclassified == 0 && worst_gap <= 1e-6 && worst_kkt <= 1e-8, os.str());
}

CheckResult check_w_monotonicity(std::uint64_t seed, std::size_t runs, double dt_fast,
                                 std::size_t budget) {
  Rng rng(seed);
  const Scenario sc = builtin_paper_sec6();
  const ScenarioParams& params = sc.params;
  const std::vector<Vec>& x = sc.initial_states;

  const ConnectivityInfo conn = lambda2_with_grad(x, params.comm);
  std::vector<ConstraintBlock> blocks;
  for (std::size_t i = 0; i < x.size(); ++i) blocks.push_back(assemble_block(i, x, params, conn));

  // Monitor cadence: one sample per tau/20 of fast time.
  const std::size_t sample_every =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.tau / 20.0 / dt_fast)));

  double worst_increase = 0.0;
  double worst_final_w = 0.0;
  bool all_converged = true;
  for (std::size_t run_i = 0; run_i < runs; ++run_i) {
    FastState fast = make_fast_state(params);
    // Random start in the unit ball; duals nonnegative, copies coherent.
    double norm2_acc = 0.0;
    for (auto& f : fast) {
      for (std::size_t k = 0; k < f.w.size(); ++k) f.w[k] = uniform(rng, -1, 1);
      for (std::size_t j = 0; j < fast.size(); ++j) f.z_pair_own[j] = uniform(rng, -1, 1);
      f.z_c = uniform(rng, -1, 1);
      f.z_clf = uniform(rng, -1, 1);
      for (std::size_t r = 0; r < f.y.size(); ++r) f.y[r] = std::fabs(uniform(rng, -1, 1));
      norm2_acc += f.norm() * f.norm();
    }
    const double scale = uniform(rng, 0.1, 1.0) / std::max(std::sqrt(norm2_acc), 1e-12);
    for (auto& f : fast) {
      f.w *= scale;
      for (auto& v : f.z_pair_own) v *= scale;
      f.z_c *= scale;
      f.z_clf *= scale;
      f.y *= scale;
    }
    for (std::size_t i = 0; i < fast.size(); ++i)
      for (std::size_t j = 0; j < fast.size(); ++j) {
        if (i == j) continue;
        const RowLayout rl(fast.size(), params.obstacles.size(), params.m, j);
        fast[i].z_pair_other[j] = fast[j].z_pair_own[i];
        fast[i].y_pair_other[j] = fast[j].y[rl.inter(i)];
        fast[i].z_c_copies[j] = fast[j].z_c;
        fast[i].z_clf_copies[j] = fast[j].z_clf;
      }

    double w_prev = merit_W(x, fast, params, blocks).w;
    bool converged = false;
    for (std::size_t step = 1; step <= budget; ++step) {
      fast_step(x, fast, dt_fast, params, blocks);
      if (step % sample_every != 0) continue;
      const double w_now = merit_W(x, fast, params, blocks).w;
      worst_increase = std::max(worst_increase, w_now - w_prev);
      w_prev = w_now;
      if (w_now < 1e-6) {
        converged = true;
        worst_final_w = std::max(worst_final_w, w_now);
        break;
      }
    }
    if (!converged) {
      all_converged = false;
      worst_final_w = std::max(worst_final_w, w_prev);
    }
  }
  std::ostringstream os;
  os << runs << " runs, worst sample-to-sample increase " << worst_increase
     << ", all reached 1e-6: " << (all_converged ? "yes" : "no");
  return make_result("merit_monotone_and_convergent",
                     worst_increase <= 1e-9 && all_converged, os.str());
}

CheckResult check_decomposition(std::uint64_t seed, std::size_t count, Mutation mutation) {
  Rng rng(seed);
  const ScenarioParams params = benchmark_params();
  const std::size_t n = params.num_agents;
  const GlobalZLayout gl(n);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < count; ++trial) {
    const auto x = random_positions(rng, n, -2.5, 2.5);
    std::vector<Vec> u(n, Vec(params.m));
    for (auto& ui : u)
      for (std::size_t k = 0; k < params.m; ++k) ui[k] = uniform(rng, -1, 1);
    Vec zg(gl.size());
    for (std::size_t k = 0; k < zg.size(); ++k) zg[k] = uniform(rng, -1, 1);

    const ConnectivityInfo conn = lambda2_with_grad(x, params.comm);
    std::vector<ConstraintBlock> blocks;
    std::vector<Vec> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
      ConstraintBlock bk = assemble_block(i, x, params, conn);
      if (mutation == Mutation::clf_sign_flip) {
        const RowLayout rl(n, params.obstacles.size(), params.m, i);
        bk.phi[rl.clf()] = -bk.phi[rl.clf()];
      }
      rows[i] = eval_local(bk, u[i], slice_agent_z(zg, i, n));
      blocks.push_back(std::move(bk));
    }

    // Pairwise: g_i^{i,j} + g_j^{j,i} = -h_ij * g_inter.
    for (std::size_t i = 0; i < n; ++i) {
      const RowLayout rli(n, params.obstacles.size(), params.m, i);
      for (std::size_t j = i + 1; j < n; ++j) {
        const RowLayout rlj(n, params.obstacles.size(), params.m, j);
        const double lhs = rows[i][rli.inter(j)] + rows[j][rlj.inter(i)];
        const double h = truncation_weight(x[i], x[j], params.comm);
        const double rhs = -h * g_inter(u[i], u[j], x[i], x[j], params);
        worst = std::max(worst, std::fabs(lhs - rhs));
      }
    }
    // Connectivity: sum_i g_i^c = -g^c.
    {
      double lhs = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const RowLayout rl(n, params.obstacles.size(), params.m, i);
        lhs += rows[i][rl.conn()];
      }
      worst = std::max(worst, std::fabs(lhs + g_conn(x, u, params, conn)));
    }
    // Task constraint: sum_i g_i^clf = g_clf.
    {
      double lhs = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const RowLayout rl(n, params.obstacles.size(), params.m, i);
        lhs += rows[i][rl.clf()];
      }
      worst = std::max(worst, std::fabs(lhs - g_clf(x, u, params)));
    }
  }
  std::ostringstream os;
  os << count << " samples, worst identity defect " << worst;
  return make_result("mismatch_decomposition_identities", worst <= 1e-10, os.str());
}

CheckResult check_block_scalar_agreement(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  const ScenarioParams params = benchmark_params();
  const std::size_t n = params.num_agents;
  const GlobalZLayout gl(n);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < count; ++trial) {
    const auto x = random_positions(rng, n, -2.5, 2.5);
    std::vector<Vec> u(n, Vec(params.m));
    for (auto& ui : u)
      for (std::size_t k = 0; k < params.m; ++k) ui[k] = uniform(rng, -1, 1);
    Vec zg(gl.size());
    for (std::size_t k = 0; k < zg.size(); ++k) zg[k] = uniform(rng, -1, 1);

    const ConnectivityInfo conn = lambda2_with_grad(x, params.comm);
    Vec z_c(n), z_clf(n);
    for (std::size_t i = 0; i < n; ++i) {
      z_c[i] = zg[gl.conn(i)];
      z_clf[i] = zg[gl.clf(i)];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const ConstraintBlock bk = assemble_block(i, x, params, conn);
      const Vec rows = eval_local(bk, u[i], slice_agent_z(zg, i, n));
      const RowLayout rl(n, params.obstacles.size(), params.m, i);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double want =
            g_inter_local(u[i], zg[gl.pair(i, j)], zg[gl.pair(j, i)], x[i], x[j], params);
        worst = std::max(worst, std::fabs(rows[rl.inter(j)] - want));
      }
      for (std::size_t k = 0; k < params.obstacles.size(); ++k)
        worst = std::max(worst, std::fabs(rows[rl.obstacle(k)] + g_obs(u[i], x[i], k, params)));
      worst = std::max(worst,
                       std::fabs(rows[rl.conn()] - g_conn_local(i, u[i], z_c, x, params, conn)));
      worst = std::max(worst,
                       std::fabs(rows[rl.clf()] - g_clf_local(i, u[i], z_clf, x, params)));
      for (std::size_t q = 0; q < params.m; ++q) {
        worst = std::max(worst, std::fabs(rows[rl.bound_upper(q)] - (u[i][q] - params.c)));
        worst = std::max(worst, std::fabs(rows[rl.bound_lower(q)] - (-u[i][q] - params.c)));
      }
    }
  }
  std::ostringstream os;
  os << count << " samples, worst row defect " << worst;
  return make_result("block_rows_match_scalar_builders", worst <= 1e-10, os.str());
}

CheckResult check_continuity_at_dc(std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  const ScenarioParams params = benchmark_params();
  const std::size_t n = params.num_agents;
  double worst = 0.0;
  std::size_t accepted = 0;
  while (accepted < count) {
    auto x = random_positions(rng, n, -2.0, 2.0);
    const std::size_t i = static_cast<std::size_t>(uniform(rng, 0, 4.999));
    std::size_t j = static_cast<std::size_t>(uniform(rng, 0, 4.999));
    if (j == i) j = (j + 1) % n;
    // Place the pair straddling the communication radius.
    const double th = uniform(rng, 0, 6.2831853);
    Vec dir{std::cos(th), std::sin(th)};
    auto place = [&](double dist) {
      x[j][0] = x[i][0] + dist * dir[0];
      x[j][1] = x[i][1] + dist * dir[1];
    };
    place(params.comm.d_c - 1e-9);
    const ConnectivityInfo conn_in = lambda2_with_grad(x, params.comm);
    if (conn_in.eigengap < 1e-3) continue;
    std::vector<ConstraintBlock> inside, outside;
    for (std::size_t a = 0; a < n; ++a) inside.push_back(assemble_block(a, x, params, conn_in));
    place(params.comm.d_c + 1e-9);
    const ConnectivityInfo conn_out = lambda2_with_grad(x, params.comm);
    if (conn_out.eigengap < 1e-3) continue;
    for (std::size_t a = 0; a < n; ++a) outside.push_back(assemble_block(a, x, params, conn_out));
    ++accepted;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t r = 0; r < inside[a].psi.rows(); ++r) {
        for (std::size_t q = 0; q < inside[a].psi.cols(); ++q)
          worst = std::max(worst, std::fabs(inside[a].psi(r, q) - outside[a].psi(r, q)));
        for (std::size_t q = 0; q < inside[a].theta.cols(); ++q)
          worst = std::max(worst, std::fabs(inside[a].theta(r, q) - outside[a].theta(r, q)));
        worst = std::max(worst, std::fabs(inside[a].phi[r] - outside[a].phi[r]));
      }
    }
    // The weights themselves are continuous across their cutoffs as well.
    Vec p0{0.0, 0.0};
    Vec p1{params.comm.d_c - 1e-9, 0.0};
    Vec p2{params.comm.d_c + 1e-9, 0.0};
    worst = std::max(worst, std::fabs(truncation_weight(p0, p1, params.comm) -
                                      truncation_weight(p0, p2, params.comm)));
    const double cut = params.comm.d_c - params.comm.eps_c;
    Vec q1{cut - 1e-9, 0.0};
    Vec q2{cut + 1e-9, 0.0};
    worst = std::max(worst, std::fabs(adjacency_weight(p0, q1, params.comm) -
                                      adjacency_weight(p0, q2, params.comm)));
  }
  std::ostringstream os;
  os << count << " sweeps, worst entry jump " << worst;
  return make_result("block_continuity_across_cutoff", worst <= 1e-7, os.str());
}

}  // namespace checks_detail

std::vector<CheckResult> run_property_checks(std::uint64_t seed, Mutation mutation) {
  using namespace checks_detail;
  std::vector<CheckResult> out;
  out.push_back(check_sym_eig(seed + 1, 20));
  out.push_back(check_lambda2_gradient(seed + 2, 50, mutation));
  out.push_back(check_adjacency_gradient(seed + 3, 50));
  out.push_back(check_hv_gradient(seed + 4, 50));
  out.push_back(check_qp_battery(seed + 5, 100));
  out.push_back(check_w_monotonicity(seed + 6, 2, builtin_paper_sec6().params.tau / 10000.0,
                                     30000000));
  out.push_back(check_decomposition(seed + 7, 100, mutation));
  out.push_back(check_block_scalar_agreement(seed + 8, 50));
  out.push_back(check_continuity_at_dc(seed + 9, 50));
  return out;
}

}  // namespace rav
