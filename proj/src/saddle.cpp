#include "rav/saddle.hpp"

#include <algorithm>
#include <cmath>

namespace rav {

double FastVarsAgent::norm() const {
  double s = dot(w, w) + z_c * z_c + z_clf * z_clf + dot(y, y);
  for (double v : z_pair_own) s += v * v;
  return std::sqrt(s);
}

bool FastVarsAgent::is_finite() const {
  if (!w.is_finite() || !y.is_finite()) return false;
  if (!std::isfinite(z_c) || !std::isfinite(z_clf)) return false;
  for (double v : z_pair_own)
    if (!std::isfinite(v)) return false;
  for (double v : z_pair_other)
    if (!std::isfinite(v)) return false;
  return true;
}

FastState make_fast_state(const ScenarioParams& params) {
  const std::size_t n_agents = params.num_agents;
  FastState fast(n_agents);
  for (auto& f : fast) {
    f.w = Vec(params.m);
    f.z_pair_own.assign(n_agents, 0.0);
    f.z_pair_other.assign(n_agents, 0.0);
    f.y_pair_other.assign(n_agents, 0.0);
    f.z_c_copies.assign(n_agents, 0.0);
    f.z_clf_copies.assign(n_agents, 0.0);
    f.y = Vec(params.rows_per_agent());
  }
  return fast;
}

double FastDerivs::max_abs() const {
  double m = norm_inf(dw);
  m = std::max(m, norm_inf(dy));
  m = std::max(m, std::fabs(dz_c));
  m = std::max(m, std::fabs(dz_clf));
  for (double v : dz_pair_own) m = std::max(m, std::fabs(v));
  for (double v : dz_pair_other) m = std::max(m, std::fabs(v));
  return m;
}

FastScratch make_fast_scratch(const ScenarioParams& params) {
  FastScratch s;
  s.z = Vec(4 * params.num_agents - 2);
  s.g = Vec(params.rows_per_agent());
  s.d.dw = Vec(params.m);
  s.d.dz_pair_own.assign(params.num_agents, 0.0);
  s.d.dz_pair_other.assign(params.num_agents, 0.0);
  s.d.dy = Vec(params.rows_per_agent());
  return s;
}

namespace {

void eval_rows_into(const ConstraintBlock& block, const Vec& u, const Vec& z, Vec& g) {
  const std::size_t rows = block.phi.size();
  const std::size_t m = block.psi.cols();
  const std::size_t nz = block.theta.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = block.phi[r];
    for (std::size_t k = 0; k < m; ++k) s += block.psi(r, k) * u[k];
    for (std::size_t k = 0; k < nz; ++k) {
      const double t = block.theta(r, k);
      if (t != 0.0) s += t * z[k];
    }
    g[r] = s;
  }
}

}  // namespace

void compute_agent_derivs(std::size_t i, const std::vector<Vec>& x,
                          const ScenarioParams& params, const ConstraintBlock& block,
                          const FastVarsAgent& f, const std::vector<PeerData>& peers,
                          FastDerivs& out, Vec& z_buf, Vec& g_buf) {
  const std::size_t n_agents = x.size();
  const std::size_t m = params.m;
  const ZLayout zl(n_agents, i);
  const RowLayout rl(n_agents, params.obstacles.size(), m, i);
  const double tau = params.tau;
  const double xi = params.xi;

  // Assemble z^{i}: own entries plus the freshest view of each peer's.
  for (std::size_t j = 0; j < n_agents; ++j) {
    if (j != i) {
      z_buf[zl.pair_own(j)] = f.z_pair_own[j];
      z_buf[zl.pair_other(j)] = peers[j].present ? peers[j].z_pair : f.z_pair_other[j];
      z_buf[zl.conn(j)] = peers[j].present ? peers[j].z_c : f.z_c_copies[j];
      z_buf[zl.clf(j)] = peers[j].present ? peers[j].z_clf : f.z_clf_copies[j];
    }
  }
  z_buf[zl.conn(i)] = f.z_c;
  z_buf[zl.clf(i)] = f.z_clf;

  eval_rows_into(block, f.w, z_buf, g_buf);

  // tau dw = -w - Psi^T y
  for (std::size_t k = 0; k < m; ++k) {
    double s = f.w[k];
    for (std::size_t r = 0; r < block.psi.rows(); ++r) s += block.psi(r, k) * f.y[r];
    out.dw[k] = -s / tau;
  }

  // Mismatch dynamics; coupling only where a link exists.
  double conn_coupling = 0.0;
  double clf_coupling = 0.0;
  const double h_i = h_i_smoothing(V_i_value(x[i], params));
  for (std::size_t j = 0; j < n_agents; ++j) {
    if (j == i) {
      out.dz_pair_own[j] = 0.0;
      out.dz_pair_other[j] = 0.0;
      continue;
    }
    const double y_own_pair = f.y[rl.inter(j)];
    if (peers[j].present) {
      const double h = truncation_weight(x[i], x[j], params.comm);
      out.dz_pair_own[j] = (-xi * f.z_pair_own[j] - h * (y_own_pair - peers[j].y_pair)) / tau;
      // Mirror of the peer's own update, with the peer's value first so the
      // arithmetic matches bit for bit.
      out.dz_pair_other[j] =
          (-xi * f.z_pair_other[j] - h * (peers[j].y_pair - y_own_pair)) / tau;
      conn_coupling += h * (f.y[rl.conn()] - peers[j].y_c);
      const double h_j = h_i_smoothing(V_i_value(x[j], params));
      clf_coupling += h * h_i * h_j * (f.y[rl.clf()] - peers[j].y_clf);
    } else {
      out.dz_pair_own[j] = -xi * f.z_pair_own[j] / tau;
      out.dz_pair_other[j] = -xi * f.z_pair_other[j] / tau;
    }
  }
  out.dz_c = (-xi * f.z_c - conn_coupling) / tau;
  out.dz_clf = (-xi * f.z_clf - clf_coupling) / tau;

  // tau dy = [g]^+_y componentwise; frozen rows (h = 0) carry g = 0.
  for (std::size_t r = 0; r < g_buf.size(); ++r)
    out.dy[r] = proj_plus(g_buf[r], f.y[r]) / tau;
}

void agent_fast_substep(std::size_t i, const std::vector<Vec>& x,
                        const ScenarioParams& params, const ConstraintBlock& block,
                        const std::vector<PeerData>& peers, double dt, FastVarsAgent& f,
                        FastScratch& scratch) {
  const std::size_t n_agents = x.size();
  // Copies refresh from the snapshot before stepping.
  for (std::size_t j = 0; j < n_agents; ++j) {
    if (!peers[j].present) continue;
    f.z_pair_other[j] = peers[j].z_pair;
    f.y_pair_other[j] = peers[j].y_pair;
    f.z_c_copies[j] = peers[j].z_c;
    f.z_clf_copies[j] = peers[j].z_clf;
  }

  compute_agent_derivs(i, x, params, block, f, peers, scratch.d, scratch.z, scratch.g);

  const FastDerivs& d = scratch.d;
  for (std::size_t k = 0; k < f.w.size(); ++k) {
    f.w[k] += dt * d.dw[k];
    if (!std::isfinite(f.w[k]))
      throw IntegrationError("non-finite w[" + std::to_string(k) + "] of agent " +
                             std::to_string(i));
  }
  for (std::size_t j = 0; j < n_agents; ++j) {
    if (j == i) continue;
    f.z_pair_own[j] += dt * d.dz_pair_own[j];
    f.z_pair_other[j] += dt * d.dz_pair_other[j];
    if (!std::isfinite(f.z_pair_own[j]))
      throw IntegrationError("non-finite z_pair[" + std::to_string(j) + "] of agent " +
                             std::to_string(i));
  }
  f.z_c += dt * d.dz_c;
  f.z_clf += dt * d.dz_clf;
  if (!std::isfinite(f.z_c) || !std::isfinite(f.z_clf))
    throw IntegrationError("non-finite mismatch scalar of agent " + std::to_string(i));
  for (std::size_t r = 0; r < f.y.size(); ++r) {
    const double next = f.y[r] + dt * d.dy[r];
    if (!std::isfinite(next))
      throw IntegrationError("non-finite y[" + std::to_string(r) + "] of agent " +
                             std::to_string(i));
    f.y[r] = next > 0.0 ? next : 0.0;
  }
}

std::vector<std::vector<PeerData>> snapshot_peers(const std::vector<Vec>& x,
                                                  const FastState& fast,
                                                  const ScenarioParams& params,
                                                  const EdgeSet& edges) {
  const std::size_t n_agents = x.size();
  std::vector<std::vector<PeerData>> peers(n_agents, std::vector<PeerData>(n_agents));
  for (std::size_t i = 0; i < n_agents; ++i) {
    for (int jn : edges.nbrs[i]) {
      const auto j = static_cast<std::size_t>(jn);
      const RowLayout rl(n_agents, params.obstacles.size(), params.m, j);
      PeerData& p = peers[i][j];
      p.present = true;
      p.z_pair = fast[j].z_pair_own[i];
      p.y_pair = fast[j].y[rl.inter(i)];
      p.z_c = fast[j].z_c;
      p.y_c = fast[j].y[rl.conn()];
      p.z_clf = fast[j].z_clf;
      p.y_clf = fast[j].y[rl.clf()];
    }
  }
  return peers;
}

std::vector<FastDerivs> fast_derivatives(const std::vector<Vec>& x, const FastState& fast,
                                         const ScenarioParams& params,
                                         const std::vector<ConstraintBlock>& blocks) {
  const EdgeSet edges = neighbors(x, params.comm);
  const auto peers = snapshot_peers(x, fast, params, edges);
  std::vector<FastDerivs> out;
  out.reserve(fast.size());
  FastScratch scratch = make_fast_scratch(params);
  for (std::size_t i = 0; i < fast.size(); ++i) {
    compute_agent_derivs(i, x, params, blocks[i], fast[i], peers[i], scratch.d, scratch.z,
                         scratch.g);
    out.push_back(scratch.d);
  }
  return out;
}

void fast_step(const std::vector<Vec>& x, FastState& fast, double dt,
               const ScenarioParams& params, const std::vector<ConstraintBlock>& blocks) {
  if (!(dt > 0)) throw std::invalid_argument("fast_step: dt must be positive");
  const EdgeSet edges = neighbors(x, params.comm);
  const auto peers = snapshot_peers(x, fast, params, edges);
  FastScratch scratch = make_fast_scratch(params);
  for (std::size_t i = 0; i < fast.size(); ++i)
    agent_fast_substep(i, x, params, blocks[i], peers[i], dt, fast[i], scratch);
}

MeritReport merit_W(const std::vector<Vec>& x, const FastState& fast,
                    const ScenarioParams& params, const std::vector<ConstraintBlock>& blocks) {
  const std::size_t n_agents = x.size();
  const std::size_t m = params.m;
  const std::size_t rows = params.rows_per_agent();
  const EdgeSet edges = neighbors(x, params.comm);

  MeritReport rep;
  rep.per_agent.assign(n_agents, 0.0);
  double stat2 = 0.0, primal2 = 0.0;

  Vec z_buf(4 * n_agents - 2), g_buf(rows);
  for (std::size_t i = 0; i < n_agents; ++i) {
    const FastVarsAgent& f = fast[i];
    const ZLayout zl(n_agents, i);
    const RowLayout rl(n_agents, params.obstacles.size(), m, i);
    double agent_acc = 0.0;

    // grad_w L = w + Psi^T y
    for (std::size_t k = 0; k < m; ++k) {
      double s = f.w[k];
      for (std::size_t r = 0; r < rows; ++r) s += blocks[i].psi(r, k) * f.y[r];
      agent_acc += s * s;
      stat2 += s * s;
    }

    // grad over this agent's own mismatch variables
    const double h_i = h_i_smoothing(V_i_value(x[i], params));
    double conn_coupling = 0.0, clf_coupling = 0.0;
    for (std::size_t j = 0; j < n_agents; ++j) {
      if (j == i) continue;
      double gz = params.xi * f.z_pair_own[j];
      if (edges.adjacent(static_cast<int>(i), static_cast<int>(j))) {
        const double h = truncation_weight(x[i], x[j], params.comm);
        const RowLayout rlj(n_agents, params.obstacles.size(), m, j);
        gz += h * (f.y[rl.inter(j)] - fast[j].y[rlj.inter(i)]);
        conn_coupling += h * (f.y[rl.conn()] - fast[j].y[rlj.conn()]);
        const double h_j = h_i_smoothing(V_i_value(x[j], params));
        clf_coupling += h * h_i * h_j * (f.y[rl.clf()] - fast[j].y[rlj.clf()]);
      }
      agent_acc += gz * gz;
      stat2 += gz * gz;
    }
    const double gzc = params.xi * f.z_c + conn_coupling;
    const double gzclf = params.xi * f.z_clf + clf_coupling;
    agent_acc += gzc * gzc + gzclf * gzclf;
    stat2 += gzc * gzc + gzclf * gzclf;

    // Dual gradient terms: rows outside the strict exclusion set J.
    for (std::size_t j = 0; j < n_agents; ++j) {
      if (j != i) {
        z_buf[zl.pair_own(j)] = f.z_pair_own[j];
        z_buf[zl.pair_other(j)] = fast[j].z_pair_own[i];
        z_buf[zl.conn(j)] = fast[j].z_c;
        z_buf[zl.clf(j)] = fast[j].z_clf;
      }
    }
    z_buf[zl.conn(i)] = f.z_c;
    z_buf[zl.clf(i)] = f.z_clf;
    eval_rows_into(blocks[i], f.w, z_buf, g_buf);
    for (std::size_t r = 0; r < rows; ++r) {
      if (f.y[r] == 0.0 && g_buf[r] < 0.0) {
        rep.active_exclusion_set.push_back(i * rows + r);
      } else {
        agent_acc += g_buf[r] * g_buf[r];
        primal2 += g_buf[r] * g_buf[r];
      }
    }
    rep.per_agent[i] = 0.5 * agent_acc;
  }
  rep.stationarity_norm = std::sqrt(stat2);
  rep.primal_norm = std::sqrt(primal2);
  rep.w = 0.5 * (stat2 + primal2);
  return rep;
}

double merit_W_full(const std::vector<Vec>& x, const FastState& fast,
                    const ScenarioParams& params, const std::vector<ConstraintBlock>& blocks,
                    const FastState& equilibrium) {
  double dist2 = 0.0;
  for (std::size_t i = 0; i < fast.size(); ++i) {
    const FastVarsAgent& a = fast[i];
    const FastVarsAgent& b = equilibrium[i];
    for (std::size_t k = 0; k < a.w.size(); ++k) dist2 += (a.w[k] - b.w[k]) * (a.w[k] - b.w[k]);
    for (std::size_t j = 0; j < a.z_pair_own.size(); ++j)
      dist2 += (a.z_pair_own[j] - b.z_pair_own[j]) * (a.z_pair_own[j] - b.z_pair_own[j]);
    dist2 += (a.z_c - b.z_c) * (a.z_c - b.z_c) + (a.z_clf - b.z_clf) * (a.z_clf - b.z_clf);
    for (std::size_t r = 0; r < a.y.size(); ++r) dist2 += (a.y[r] - b.y[r]) * (a.y[r] - b.y[r]);
  }
  return merit_W(x, fast, params, blocks).w + 0.5 * dist2;
}

FastState run_to_equilibrium(const std::vector<Vec>& x, const FastState& fast0,
                             const ScenarioParams& params, double tol,
                             const EquilibriumOptions& opts) {
  if (!(tol > 0)) throw std::invalid_argument("run_to_equilibrium: tol must be positive");
  const double dt = opts.dt_fast > 0 ? opts.dt_fast : params.tau / 20.0;

  const ConnectivityInfo conn = lambda2_with_grad(x, params.comm);
  std::vector<ConstraintBlock> blocks;
  for (std::size_t i = 0; i < x.size(); ++i) blocks.push_back(assemble_block(i, x, params, conn));

  FastState fast = fast0;
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    if (it % opts.check_every == 0) {
      const auto derivs = fast_derivatives(x, fast, params, blocks);
      double m = 0.0;
      for (const auto& d : derivs) m = std::max(m, d.max_abs());
      if (m <= tol) return fast;
    }
    fast_step(x, fast, dt, params, blocks);
  }
  const double final_w = merit_W(x, fast, params, blocks).w;
  throw SaddleConvergenceError(
      "run_to_equilibrium: budget " + std::to_string(opts.max_iters) +
          " exhausted, final merit " + std::to_string(final_w),
      final_w);
}

SaddleFlowState generic_saddle_flow(const SaddleProblem& p, SaddleFlowState s, double dt,
                                    std::size_t steps) {
  const std::size_t n = p.wdiag.size();
  const std::size_t ni = p.gineq.rows();
  const std::size_t ne = p.aeq.rows();
  if (s.x.size() != n || s.y.size() != ni || s.mu.size() != ne)
    throw std::invalid_argument("generic_saddle_flow: state dimension mismatch");

  Vec dx(n);
  for (std::size_t step = 0; step < steps; ++step) {
    for (std::size_t k = 0; k < n; ++k) {
      double g = p.wdiag[k] * s.x[k] + (p.q.size() ? p.q[k] : 0.0);
      for (std::size_t r = 0; r < ni; ++r) g += p.gineq(r, k) * s.y[r];
      for (std::size_t r = 0; r < ne; ++r) g += p.aeq(r, k) * s.mu[r];
      dx[k] = -g;
    }
    Vec gy(ni);
    for (std::size_t r = 0; r < ni; ++r) {
      double v = -p.hineq[r];
      for (std::size_t k = 0; k < n; ++k) v += p.gineq(r, k) * s.x[k];
      gy[r] = proj_plus(v, s.y[r]);
    }
    Vec gmu(ne);
    for (std::size_t r = 0; r < ne; ++r) {
      double v = -p.beq[r];
      for (std::size_t k = 0; k < n; ++k) v += p.aeq(r, k) * s.x[k];
      gmu[r] = v;
    }
    for (std::size_t k = 0; k < n; ++k) s.x[k] += dt * dx[k];
    for (std::size_t r = 0; r < ni; ++r) s.y[r] = std::max(0.0, s.y[r] + dt * gy[r]);
    for (std::size_t r = 0; r < ne; ++r) s.mu[r] += dt * gmu[r];
    if (!s.x.is_finite()) throw IntegrationError("generic_saddle_flow: non-finite state");
  }
  return s;
}

}  // namespace rav
