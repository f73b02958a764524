#include "rav/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rav {

namespace {
constexpr double kFeasTol = 1e-8;
constexpr double kDepTol = 1e-12;
}  // namespace

void QPInstance::validate() const {
  if (weights.size() != dim) throw std::invalid_argument("QPInstance: weights size mismatch");
  for (std::size_t k = 0; k < dim; ++k)
    if (!(weights[k] > 0)) throw std::invalid_argument("QPInstance: weights must be positive");
  if (a.rows() != b.size()) throw std::invalid_argument("QPInstance: A rows vs b mismatch");
  if (a.rows() > 0 && a.cols() != dim)
    throw std::invalid_argument("QPInstance: A cols vs dim mismatch");
  detail::require_finite(a, "QPInstance");
  detail::require_finite(b, "QPInstance");
}

QPSolution solve(const QPInstance& inst) {
  inst.validate();
  const std::size_t n = inst.dim;
  const std::size_t rows = inst.a.rows();

  QPSolution sol;
  sol.v = Vec(n);
  sol.duals = Vec(rows);

  std::vector<std::size_t> active;
  std::vector<double> mu_active;
  Vec v(n);

  auto row_dot_v = [&](std::size_t r) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += inst.a(r, k) * v[k];
    return s;
  };
  auto winv_row = [&](std::size_t r, Vec& out) {
    for (std::size_t k = 0; k < n; ++k) out[k] = inst.a(r, k) / inst.weights[k];
  };

  const std::size_t outer_cap = 50 * (rows + n + 2);
  const std::size_t bland_after = 3 * (rows + 2);
  std::size_t outer = 0;

  for (; outer < outer_cap; ++outer) {
    // Pick a violated row: most violated, lowest index on ties; pure
    // lowest-index once the iteration count suggests degeneracy.
    std::size_t p = rows;
    double worst = kFeasTol;
    for (std::size_t r = 0; r < rows; ++r) {
      if (std::find(active.begin(), active.end(), r) != active.end()) continue;
      const double res = row_dot_v(r) - inst.b[r];
      if (res > worst) {
        worst = res;
        p = r;
        if (outer >= bland_after) break;
      }
    }
    if (p == rows) {
      sol.status = QPStatus::solved;
      sol.v = v;
      for (std::size_t k = 0; k < active.size(); ++k) sol.duals[active[k]] = mu_active[k];
      sol.kkt_residual = kkt_residual(inst, sol);
      return sol;
    }

    // Zero rows can only be infeasible outright.
    double row_norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) row_norm += inst.a(p, k) * inst.a(p, k);
    if (row_norm == 0.0) {
      sol.status = QPStatus::infeasible;
      sol.cert_row = static_cast<int>(p);
      sol.cert_violation = worst;
      sol.farkas = Vec(rows);
      sol.farkas[p] = 1.0;
      sol.report = "row " + std::to_string(p) + " is 0 <= " + std::to_string(inst.b[p]) +
                   " with negative rhs";
      return sol;
    }

    Vec wia(n);
    winv_row(p, wia);  // W^-1 a_p

    double mu_p = 0.0;
    for (std::size_t inner = 0; inner <= rows + 2; ++inner) {
      const std::size_t k_act = active.size();
      // r = M^-1 A_S W^-1 a_p with M = A_S W^-1 A_S^T; z = W^-1(a_p - A_S^T r).
      Vec r(k_act);
      if (k_act > 0) {
        Mat m(k_act, k_act);
        Vec rhs(k_act);
        for (std::size_t iR = 0; iR < k_act; ++iR) {
          for (std::size_t jR = 0; jR <= iR; ++jR) {
            double s = 0.0;
            for (std::size_t q = 0; q < n; ++q)
              s += inst.a(active[iR], q) * inst.a(active[jR], q) / inst.weights[q];
            m(iR, jR) = s;
            m(jR, iR) = s;
          }
          double s = 0.0;
          for (std::size_t q = 0; q < n; ++q) s += inst.a(active[iR], q) * wia[q];
          rhs[iR] = s;
        }
        r = solve_linear(m, rhs);
      }
      Vec z = wia;
      for (std::size_t iR = 0; iR < k_act; ++iR) {
        const double ri = r[iR];
        if (ri == 0.0) continue;
        for (std::size_t q = 0; q < n; ++q)
          z[q] -= ri * inst.a(active[iR], q) / inst.weights[q];
      }
      double apz = 0.0;
      for (std::size_t q = 0; q < n; ++q) apz += inst.a(p, q) * z[q];

      const double res_p = row_dot_v(p) - inst.b[p];
      const double inf = std::numeric_limits<double>::infinity();
      const double t2 = apz > kDepTol * std::max(1.0, row_norm) ? res_p / apz : inf;

      double t1 = inf;
      std::size_t drop_pos = k_act;
      for (std::size_t iR = 0; iR < k_act; ++iR) {
        if (r[iR] > kDepTol) {
          const double ratio = mu_active[iR] / r[iR];
          if (ratio < t1) {
            t1 = ratio;
            drop_pos = iR;
          }
        }
      }

      const double t = std::min(t1, t2);
      if (t == inf) {
        sol.status = QPStatus::infeasible;
        sol.cert_row = static_cast<int>(p);
        sol.cert_violation = res_p;
        sol.farkas = Vec(rows);
        sol.farkas[p] = 1.0;
        for (std::size_t iR = 0; iR < k_act; ++iR) sol.farkas[active[iR]] = -r[iR];
        sol.report = "constraint row " + std::to_string(p) + " violated by " +
                     std::to_string(res_p) + " and irreducible against the active set";
        return sol;
      }

      if (t > 0.0) {
        for (std::size_t q = 0; q < n; ++q) v[q] -= t * z[q];
        for (std::size_t iR = 0; iR < k_act; ++iR) mu_active[iR] -= t * r[iR];
        mu_p += t;
      }
      if (t2 <= t1) {
        active.push_back(p);
        mu_active.push_back(mu_p);
        break;
      }
      active.erase(active.begin() + static_cast<long>(drop_pos));
      mu_active.erase(mu_active.begin() + static_cast<long>(drop_pos));
    }
  }

  sol.status = QPStatus::max_iter;
  sol.v = v;
  for (std::size_t k = 0; k < active.size(); ++k) sol.duals[active[k]] = mu_active[k];
  sol.report = "iteration cap " + std::to_string(outer_cap) + " reached";
  return sol;
}

double kkt_residual(const QPInstance& inst, const QPSolution& sol) {
  const std::size_t n = inst.dim;
  const std::size_t rows = inst.a.rows();
  double stat = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double s = inst.weights[k] * sol.v[k];
    for (std::size_t r = 0; r < rows; ++r) s += inst.a(r, k) * sol.duals[r];
    stat = std::max(stat, std::fabs(s));
  }
  double primal = 0.0, dual_neg = 0.0, comp = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double av = 0.0;
    for (std::size_t k = 0; k < n; ++k) av += inst.a(r, k) * sol.v[k];
    primal = std::max(primal, av - inst.b[r]);
    dual_neg = std::max(dual_neg, -sol.duals[r]);
    comp += sol.duals[r] * (av - inst.b[r]);
  }
  return std::max({stat, std::max(primal, 0.0), std::max(dual_neg, 0.0), std::fabs(comp)});
}

Vec brute_force_oracle_from(const QPInstance& inst, const Vec& mu0) {
  inst.validate();
  const std::size_t n = inst.dim;
  const std::size_t rows = inst.a.rows();
  if (mu0.size() != rows) throw std::invalid_argument("oracle: mu0 size mismatch");

  // Lipschitz bound for the dual gradient: ||A W^-1 A^T||_inf upper bound.
  double lips = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double row_sum = 0.0;
    for (std::size_t s = 0; s < rows; ++s) {
      double e = 0.0;
      for (std::size_t k = 0; k < n; ++k) e += inst.a(r, k) * inst.a(s, k) / inst.weights[k];
      row_sum += std::fabs(e);
    }
    lips = std::max(lips, row_sum);
  }
  const double alpha0 = lips > 0 ? 1.0 / lips : 1.0;

  Vec mu = mu0;
  Vec v(n);
  for (std::size_t it = 0; it < 20000000; ++it) {
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r) s += inst.a(r, k) * mu[r];
      v[k] = -s / inst.weights[k];
    }
    const double alpha = alpha0 / (1.0 + static_cast<double>(it) / 4e6);
    double move = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      double av = 0.0;
      for (std::size_t k = 0; k < n; ++k) av += inst.a(r, k) * v[k];
      const double next = std::max(0.0, mu[r] + alpha * (av - inst.b[r]));
      move = std::max(move, std::fabs(next - mu[r]) / alpha);
      mu[r] = next;
    }
    if (move <= 1e-10) break;
  }
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += inst.a(r, k) * mu[r];
    v[k] = -s / inst.weights[k];
  }
  return v;
}

Vec brute_force_oracle(const QPInstance& inst) {
  return brute_force_oracle_from(inst, Vec(inst.a.rows()));
}

Vec solve_local(const ConstraintBlock& block, const Vec& z_i) {
  const std::size_t m = block.psi.cols();
  QPInstance inst;
  inst.dim = m;
  inst.weights = Vec(m, 1.0);
  inst.a = block.psi;
  inst.b = block.theta.matvec(z_i);
  for (std::size_t r = 0; r < inst.b.size(); ++r) inst.b[r] = -(inst.b[r] + block.phi[r]);

  const QPSolution sol = solve(inst);
  if (sol.status == QPStatus::solved) return sol.v;

  // Recover the layout from the block shape for a readable report.
  const std::size_t num_agents = (block.theta.cols() + 2) / 4;
  std::string name = "row " + std::to_string(sol.cert_row);
  if (sol.cert_row >= 0 && block.phi.size() >= num_agents + 1 + 2 * m) {
    // Agent id is unknown here; report the row role only.
    RowLayout rl(num_agents, block.phi.size() - num_agents - 1 - 2 * m, m, 0);
    name = rl.row_name(static_cast<std::size_t>(sol.cert_row));
  }
  throw InfeasibleError("local control problem " +
                        std::string(sol.status == QPStatus::infeasible ? "infeasible" : "stalled") +
                        ": worst " + name + " violated by " + std::to_string(sol.cert_violation));
}

GlobalZLayout::GlobalZLayout(std::size_t num_agents) : n_(num_agents) {
  if (num_agents < 2) throw std::invalid_argument("GlobalZLayout: need at least 2 agents");
}

std::size_t GlobalZLayout::pair(std::size_t owner, std::size_t other) const {
  if (owner == other || owner >= n_ || other >= n_)
    throw std::invalid_argument("GlobalZLayout: bad pair");
  const std::size_t a = std::min(owner, other);
  const std::size_t b = std::max(owner, other);
  // index of (a,b) among lexicographic pairs
  const std::size_t idx = a * n_ - a * (a + 1) / 2 + (b - a - 1);
  return 2 * idx + (owner == a ? 0 : 1);
}

Vec slice_agent_z(const Vec& z_global, std::size_t i, std::size_t num_agents) {
  const GlobalZLayout gl(num_agents);
  const ZLayout zl(num_agents, i);
  Vec z(zl.size());
  for (std::size_t j = 0; j < num_agents; ++j) {
    if (j != i) {
      z[zl.pair_own(j)] = z_global[gl.pair(i, j)];
      z[zl.pair_other(j)] = z_global[gl.pair(j, i)];
    }
    z[zl.conn(j)] = z_global[gl.conn(j)];
    z[zl.clf(j)] = z_global[gl.clf(j)];
  }
  return z;
}

QPInstance build_recast_qp(const std::vector<Vec>& x, const ScenarioParams& params,
                           const ConnectivityInfo& conn,
                           const std::vector<ConstraintBlock>& blocks) {
  const std::size_t n_agents = x.size();
  const std::size_t m = params.m;
  const GlobalZLayout gl(n_agents);
  const std::size_t nu = n_agents * m;
  const std::size_t nz = gl.size();

  QPInstance inst;
  inst.dim = nu + nz;
  inst.weights = Vec(inst.dim, 1.0);
  for (std::size_t k = nu; k < inst.dim; ++k) inst.weights[k] = params.xi;

  std::size_t total_rows = 0;
  for (const auto& bk : blocks) total_rows += bk.phi.size();
  inst.a = Mat(total_rows, inst.dim);
  inst.b = Vec(total_rows);

  std::size_t row0 = 0;
  for (std::size_t i = 0; i < n_agents; ++i) {
    const ConstraintBlock& bk = blocks[i];
    const ZLayout zl(n_agents, i);
    for (std::size_t r = 0; r < bk.phi.size(); ++r) {
      for (std::size_t q = 0; q < m; ++q) inst.a(row0 + r, i * m + q) = bk.psi(r, q);
      for (std::size_t j = 0; j < n_agents; ++j) {
        if (j != i) {
          inst.a(row0 + r, nu + gl.pair(i, j)) = bk.theta(r, zl.pair_own(j));
          inst.a(row0 + r, nu + gl.pair(j, i)) = bk.theta(r, zl.pair_other(j));
        }
        inst.a(row0 + r, nu + gl.conn(j)) = bk.theta(r, zl.conn(j));
        inst.a(row0 + r, nu + gl.clf(j)) = bk.theta(r, zl.clf(j));
      }
      inst.b[row0 + r] = -bk.phi[r];
    }
    row0 += bk.phi.size();
  }
  (void)conn;
  return inst;
}

QPInstance build_original_qp(const std::vector<Vec>& x, const ScenarioParams& params,
                             const ConnectivityInfo& conn, const EdgeSet& edges) {
  const std::size_t n_agents = x.size();
  const std::size_t m = params.m;
  const std::size_t nu = n_agents * m;
  const Dynamics& dyn = params.dynamics();
  const std::size_t rows =
      edges.edges.size() + n_agents * params.obstacles.size() + 2 + 2 * m * n_agents;

  QPInstance inst;
  inst.dim = nu;
  inst.weights = Vec(nu, 1.0);
  inst.a = Mat(rows, nu);
  inst.b = Vec(rows);

  std::size_t r = 0;
  Vec zero_u(m);
  // -g_inter <= 0 on current edges.
  for (const auto& [i, j] : edges.edges) {
    const auto iu = static_cast<std::size_t>(i);
    const auto ju = static_cast<std::size_t>(j);
    Vec grad(x[iu].size());
    for (std::size_t q = 0; q < grad.size(); ++q) grad[q] = 2.0 * (x[iu][q] - x[ju][q]);
    const Vec lg_i = dyn.G(x[iu]).matvec_t(grad);
    const Vec lg_j = dyn.G(x[ju]).matvec_t(grad);
    for (std::size_t q = 0; q < m; ++q) {
      inst.a(r, iu * m + q) = -lg_i[q];
      inst.a(r, ju * m + q) = lg_j[q];
    }
    inst.b[r] = g_inter(zero_u, zero_u, x[iu], x[ju], params);
    ++r;
  }
  // -g_obs <= 0 for every agent and obstacle.
  for (std::size_t i = 0; i < n_agents; ++i) {
    for (std::size_t k = 0; k < params.obstacles.size(); ++k) {
      Vec grad(x[i].size());
      for (std::size_t q = 0; q < grad.size(); ++q)
        grad[q] = 2.0 * (x[i][q] - params.obstacles[k].center[q]);
      const Vec lg = dyn.G(x[i]).matvec_t(grad);
      for (std::size_t q = 0; q < m; ++q) inst.a(r, i * m + q) = -lg[q];
      inst.b[r] = g_obs(zero_u, x[i], k, params);
      ++r;
    }
  }
  // -g_c <= 0.
  for (std::size_t i = 0; i < n_agents; ++i) {
    const Vec lg = dyn.G(x[i]).matvec_t(conn.grad[i]);
    for (std::size_t q = 0; q < m; ++q) inst.a(r, i * m + q) = -lg[q];
  }
  {
    std::vector<Vec> zero_us(n_agents, zero_u);
    inst.b[r] = g_conn(x, zero_us, params, conn);
    ++r;
    // g_clf <= 0.
    for (std::size_t i = 0; i < n_agents; ++i) {
      const Vec lg = dyn.G(x[i]).matvec_t(hV_product(x[i], params).grad);
      for (std::size_t q = 0; q < m; ++q) inst.a(r, i * m + q) = lg[q];
    }
    inst.b[r] = -g_clf(x, zero_us, params);
    ++r;
  }
  // Bounds.
  for (std::size_t i = 0; i < n_agents; ++i) {
    for (std::size_t q = 0; q < m; ++q) {
      inst.a(r, i * m + q) = 1.0;
      inst.b[r] = params.c;
      ++r;
      inst.a(r, i * m + q) = -1.0;
      inst.b[r] = params.c;
      ++r;
    }
  }
  return inst;
}

CentralizedSolution solve_centralized(const std::vector<Vec>& x, const ScenarioParams& params,
                                      const ConnectivityInfo& conn) {
  const std::size_t n_agents = x.size();
  const std::size_t m = params.m;
  std::vector<ConstraintBlock> blocks;
  blocks.reserve(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) blocks.push_back(assemble_block(i, x, params, conn));

  const QPInstance inst = build_recast_qp(x, params, conn, blocks);
  CentralizedSolution out;
  out.qp = solve(inst);
  if (out.qp.status != QPStatus::solved)
    throw InfeasibleError("joint recast problem not solved: " + out.qp.report);

  const std::size_t nu = n_agents * m;
  out.u = Vec(nu);
  for (std::size_t k = 0; k < nu; ++k) out.u[k] = out.qp.v[k];
  out.z = Vec(inst.dim - nu);
  for (std::size_t k = nu; k < inst.dim; ++k) out.z[k - nu] = out.qp.v[k];

  // Cross-check against the original coupled constraint set.
  const EdgeSet edges = neighbors(x, params.comm);
  const QPInstance orig = build_original_qp(x, params, conn, edges);
  double viol = 0.0;
  for (std::size_t r = 0; r < orig.a.rows(); ++r) {
    double av = 0.0;
    for (std::size_t k = 0; k < nu; ++k) av += orig.a(r, k) * out.u[k];
    viol = std::max(viol, av - orig.b[r]);
  }
  out.eq_original_violation = std::max(viol, 0.0);
  return out;
}

}  // namespace rav
