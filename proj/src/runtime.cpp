#include "rav/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rav {

void TickSchedule::validate() const {
  if (!(dt_slow > 0)) throw std::invalid_argument("TickSchedule: dt_slow must be positive");
  if (fast_substeps < 10) throw std::invalid_argument("TickSchedule: need at least 10 substeps");
  if (!(horizon > 0)) throw std::invalid_argument("TickSchedule: horizon must be positive");
}

std::vector<std::vector<Message>> tick_exchange(std::vector<AgentNode>& nodes,
                                                const EdgeSet& edges,
                                                const ConnectivityInfo& conn) {
  std::vector<std::vector<Message>> inboxes(nodes.size());
  tick_exchange_into(nodes, edges, conn, inboxes);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].inbox = inboxes[i];
    nodes[i].outbox.clear();
  }
  // A node's outbox holds what it sent, in its neighbor order.
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (const Message& msg : inboxes[i])
      nodes[static_cast<std::size_t>(msg.sender)].outbox.push_back(msg);
  return inboxes;
}

void tick_exchange_into(const std::vector<AgentNode>& nodes, const EdgeSet& edges,
                        const ConnectivityInfo& conn,
                        std::vector<std::vector<Message>>& inboxes) {
  const std::size_t n = nodes.size();
  if (inboxes.size() != n) inboxes.assign(n, {});
  // Message construction needs row offsets, recoverable from the node itself.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nbrs = edges.nbrs[i];
    inboxes[i].resize(nbrs.size());
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const auto j = static_cast<std::size_t>(nbrs[k]);
      Message& msg = inboxes[i][k];
      const AgentNode& from = nodes[j];
      const std::size_t num_agents = n;
      const std::size_t m = from.fast.w.size();
      const std::size_t num_obs = from.fast.y.size() - num_agents - 1 - 2 * m;
      const RowLayout rl(num_agents, num_obs, m, j);
      msg.sender = from.id;
      msg.x_sender = from.x;
      msg.z_pair = from.fast.z_pair_own[i];
      msg.y_pair = from.fast.y[rl.inter(i)];
      msg.z_c = from.fast.z_c;
      msg.y_c = from.fast.y[rl.conn()];
      msg.z_clf = from.fast.z_clf;
      msg.y_clf = from.fast.y[rl.clf()];
      msg.hc_grad_slice = conn.grad[j];
    }
  }
}

void agent_fast_update(AgentNode& node, const std::vector<Message>& inbox,
                       const std::vector<Vec>& x_snapshot, const ScenarioParams& params,
                       const ConstraintBlock& block, double dt_fast, FastScratch& scratch,
                       std::vector<PeerData>& peers_buf) {
  const std::size_t n = params.num_agents;
  if (peers_buf.size() != n) peers_buf.assign(n, PeerData{});
  for (auto& p : peers_buf) p.present = false;
  for (const Message& msg : inbox) {
    PeerData& p = peers_buf[static_cast<std::size_t>(msg.sender)];
    p.present = true;
    p.z_pair = msg.z_pair;
    p.y_pair = msg.y_pair;
    p.z_c = msg.z_c;
    p.y_c = msg.y_c;
    p.z_clf = msg.z_clf;
    p.y_clf = msg.y_clf;
  }
  agent_fast_substep(static_cast<std::size_t>(node.id), x_snapshot, params, block, peers_buf,
                     dt_fast, node.fast, scratch);
}

Vec agent_control(const AgentNode& node, const ScenarioParams& params,
                  const ConstraintBlock& block) {
  const std::size_t n = params.num_agents;
  const auto i = static_cast<std::size_t>(node.id);
  const ZLayout zl(n, i);
  Vec z(zl.size());
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) {
      z[zl.pair_own(j)] = node.fast.z_pair_own[j];
      z[zl.pair_other(j)] = node.fast.z_pair_other[j];
      z[zl.conn(j)] = node.fast.z_c_copies[j];
      z[zl.clf(j)] = node.fast.z_clf_copies[j];
    }
  }
  z[zl.conn(i)] = node.fast.z_c;
  z[zl.clf(i)] = node.fast.z_clf;
  return solve_local(block, z);
}

SlowState slow_step(const SlowState& state, const std::vector<Vec>& controls,
                    const ScenarioParams& params, double dt_slow, StepMethod method) {
  const Dynamics& dyn = params.dynamics();
  SlowState next;
  next.time = state.time + dt_slow;
  next.x.resize(state.x.size());
  for (std::size_t i = 0; i < state.x.size(); ++i) {
    const Vec& xi = state.x[i];
    const Vec& ui = controls[i];
    auto rhs = [&](const Vec& xv) {
      Vec r = dyn.F(xv);
      const Vec gu = dyn.G(xv).matvec(ui);
      for (std::size_t k = 0; k < r.size(); ++k) r[k] += gu[k];
      return r;
    };
    Vec xn = xi;
    if (method == StepMethod::euler) {
      const Vec k1 = rhs(xi);
      for (std::size_t k = 0; k < xn.size(); ++k) xn[k] += dt_slow * k1[k];
    } else {
      const Vec k1 = rhs(xi);
      Vec tmp = xi;
      for (std::size_t k = 0; k < xn.size(); ++k) tmp[k] = xi[k] + 0.5 * dt_slow * k1[k];
      const Vec k2 = rhs(tmp);
      for (std::size_t k = 0; k < xn.size(); ++k) tmp[k] = xi[k] + 0.5 * dt_slow * k2[k];
      const Vec k3 = rhs(tmp);
      for (std::size_t k = 0; k < xn.size(); ++k) tmp[k] = xi[k] + dt_slow * k3[k];
      const Vec k4 = rhs(tmp);
      for (std::size_t k = 0; k < xn.size(); ++k)
        xn[k] += dt_slow / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    if (!xn.is_finite())
      throw IntegrationError("slow_step: non-finite state for agent " + std::to_string(i));
    next.x[i] = xn;
  }
  next.edges = neighbors(next.x, params.comm);
  next.conn = lambda2_with_grad(next.x, params.comm);
  return next;
}

MetricsRow collect_metrics(double t, const std::vector<Vec>& x, const ScenarioParams& params,
                           const FastState* fast, const std::vector<ConstraintBlock>* blocks) {
  MetricsRow row;
  row.t = t;
  row.lambda2_binary = binary_lambda2(x, params.comm.d_c);

  double min_pair = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      Vec d = x[i];
      d -= x[j];
      min_pair = std::min(min_pair, norm2(d));
    }
  }
  row.min_pair_dist = min_pair;

  double min_clear = 1e30;  // sentinel when the scenario has no obstacles
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (const Obstacle& o : params.obstacles) {
      Vec d = x[i];
      d -= o.center;
      min_clear = std::min(min_clear, norm2(d) - o.radius);
    }
  }
  row.min_obs_clearance = min_clear;

  double v_total = 0.0;
  double max_resid = -std::numeric_limits<double>::infinity();
  for (const Vec& xi : x) {
    v_total += hV_product(xi, params).value;
    max_resid = std::max(max_resid, dot(xi, params.sigma.matvec(xi)) - 1.0);
  }
  row.v_total = v_total;
  row.max_target_residual = max_resid;

  if (fast && blocks) {
    const MeritReport rep = merit_W(x, *fast, params, *blocks);
    row.w_per_agent = rep.per_agent;
    double mw = 0.0;
    for (double wv : rep.per_agent) mw = std::max(mw, wv);
    row.max_w = mw;
  }

  row.violation = row.min_pair_dist < params.comm.d0 - 1e-6 ||
                  row.min_obs_clearance < -1e-6 || !(row.lambda2_binary > 0.0);
  return row;
}

namespace {

std::string state_dump(double t, const std::vector<Vec>& x) {
  std::ostringstream os;
  os << "t=" << t << " positions:";
  for (std::size_t i = 0; i < x.size(); ++i) {
    os << " agent" << i << "=(";
    for (std::size_t k = 0; k < x[i].size(); ++k) os << (k ? "," : "") << x[i][k];
    os << ")";
  }
  return os.str();
}

}  // namespace

RunResult run(const ScenarioParams& params, const std::vector<Vec>& x0, RunMode mode,
              const TickSchedule& schedule_in) {
  params.validate();
  schedule_in.validate();
  RunResult result;

  TickSchedule schedule = schedule_in;
  // Resolve the fast manifold: dt_fast <= tau/10, met by shrinking dt_slow.
  const double dt_fast_cap = params.tau / 10.0;
  if (schedule.dt_fast() > dt_fast_cap) {
    schedule.dt_slow = dt_fast_cap * static_cast<double>(schedule.fast_substeps);
    result.notes.push_back("dt_slow reduced to " + std::to_string(schedule.dt_slow) +
                           " so dt_fast resolves tau/10");
  }

  // Initial-condition gate: the safety constraint and nonnegative
  // connectivity margin must hold at t0.
  {
    const MetricsRow m0 = collect_metrics(0.0, x0, params, nullptr, nullptr);
    const ConnectivityInfo conn0 = lambda2_with_grad(x0, params.comm);
    std::ostringstream why;
    if (m0.min_pair_dist < params.comm.d0)
      why << "initial min pairwise distance " << m0.min_pair_dist << " < d0 " << params.comm.d0
          << "; ";
    if (m0.min_obs_clearance < 0.0)
      why << "initial obstacle clearance " << m0.min_obs_clearance << " < 0; ";
    if (conn0.lambda2 - params.chi < 0.0)
      why << "initial connectivity margin " << (conn0.lambda2 - params.chi) << " < 0; ";
    if (!why.str().empty()) {
      result.status = RunStatus::refused;
      result.message = "initial condition rejected: " + why.str();
      return result;
    }
  }

  const std::size_t n_agents = params.num_agents;
  const std::size_t ticks = static_cast<std::size_t>(std::llround(schedule.horizon / schedule.dt_slow));

  std::vector<AgentNode> nodes(n_agents);
  FastState fast0 = make_fast_state(params);
  if (schedule.warm_start && mode == RunMode::distributed) {
    EquilibriumOptions opts;
    opts.dt_fast = schedule.dt_fast();
    opts.max_iters = 20000000;
    try {
      fast0 = run_to_equilibrium(x0, fast0, params, 1e-6 / params.tau, opts);
    } catch (const SaddleConvergenceError& e) {
      result.status = RunStatus::infeasible;
      result.message = std::string("warm start failed: ") + e.what();
      return result;
    }
  }
  for (std::size_t i = 0; i < n_agents; ++i) {
    nodes[i].id = static_cast<int>(i);
    nodes[i].x = x0[i];
    nodes[i].fast = fast0[i];
    nodes[i].dynamics = params.dynamics();
    nodes[i].u = Vec(params.m);
  }

  SlowState state;
  state.time = 0.0;
  state.x = x0;
  state.edges = neighbors(x0, params.comm);
  state.conn = lambda2_with_grad(x0, params.comm);

  std::vector<ConstraintBlock> blocks(n_agents);
  std::vector<std::vector<Message>> inboxes(n_agents);
  std::vector<PeerData> peers_buf(n_agents);
  FastScratch scratch = make_fast_scratch(params);
  FastState fast_view(n_agents);
  std::vector<Vec> controls(n_agents, Vec(params.m));

  result.trajectory.reserve((ticks + 1) * n_agents);
  result.metrics.reserve(ticks + 1);

  for (std::size_t k = 0; k <= ticks; ++k) {
    const double t = static_cast<double>(k) * schedule.dt_slow;
    state.time = t;

    for (std::size_t i = 0; i < n_agents; ++i)
      blocks[i] = assemble_block(i, state.x, params, state.conn);

    try {
      if (mode == RunMode::distributed) {
        for (std::size_t sub = 0; sub < schedule.fast_substeps; ++sub) {
          tick_exchange_into(nodes, state.edges, state.conn, inboxes);
          for (std::size_t i = 0; i < n_agents; ++i)
            agent_fast_update(nodes[i], inboxes[i], state.x, params, blocks[i],
                              schedule.dt_fast(), scratch, peers_buf);
        }
        for (std::size_t i = 0; i < n_agents; ++i) {
          controls[i] = agent_control(nodes[i], params, blocks[i]);
          nodes[i].u = controls[i];
        }
      } else {
        const CentralizedSolution cs = solve_centralized(state.x, params, state.conn);
        for (std::size_t i = 0; i < n_agents; ++i) {
          for (std::size_t q = 0; q < params.m; ++q) controls[i][q] = cs.u[i * params.m + q];
          nodes[i].u = controls[i];
        }
      }
    } catch (const InfeasibleError& e) {
      result.status = RunStatus::infeasible;
      result.message = std::string(e.what()) + " | " + state_dump(t, state.x);
      return result;
    } catch (const IntegrationError& e) {
      result.status = RunStatus::nonfinite;
      result.message = std::string(e.what()) + " | " + state_dump(t, state.x);
      return result;
    }

    for (std::size_t i = 0; i < n_agents; ++i) fast_view[i] = nodes[i].fast;
    MetricsRow row;
    if (mode == RunMode::distributed)
      row = collect_metrics(t, state.x, params, &fast_view, &blocks);
    else
      row = collect_metrics(t, state.x, params, nullptr, nullptr);
    result.any_violation = result.any_violation || row.violation;
    result.metrics.push_back(row);
    for (std::size_t i = 0; i < n_agents; ++i)
      result.trajectory.push_back({t, static_cast<int>(i), state.x[i], controls[i]});

    if (k == ticks) break;
    try {
      state = slow_step(state, controls, params, schedule.dt_slow);
    } catch (const IntegrationError& e) {
      result.status = RunStatus::nonfinite;
      result.message = std::string(e.what()) + " | " + state_dump(t, state.x);
      return result;
    }
    for (std::size_t i = 0; i < n_agents; ++i) nodes[i].x = state.x[i];
  }

  result.status = result.any_violation ? RunStatus::violation : RunStatus::ok;
  return result;
}

FrozenStateGap frozen_state_gap(const std::vector<Vec>& x, const ScenarioParams& params,
                                double dt_fast, double tol, std::size_t max_iters) {
  FrozenStateGap out;
  const ConnectivityInfo conn = lambda2_with_grad(x, params.comm);
  const CentralizedSolution cs = solve_centralized(x, params, conn);
  out.u_central = cs.u;
  out.eq_original_violation = cs.eq_original_violation;

  EquilibriumOptions opts;
  opts.dt_fast = dt_fast;
  opts.max_iters = max_iters;
  const FastState eq = run_to_equilibrium(x, make_fast_state(params), params, tol, opts);

  std::vector<ConstraintBlock> blocks;
  for (std::size_t i = 0; i < x.size(); ++i) blocks.push_back(assemble_block(i, x, params, conn));

  out.u_local = Vec(x.size() * params.m);
  double gap = 0.0, wgap = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const ZLayout zl(x.size(), i);
    Vec z(zl.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j != i) {
        z[zl.pair_own(j)] = eq[i].z_pair_own[j];
        z[zl.pair_other(j)] = eq[j].z_pair_own[i];
        z[zl.conn(j)] = eq[j].z_c;
        z[zl.clf(j)] = eq[j].z_clf;
      }
    }
    z[zl.conn(i)] = eq[i].z_c;
    z[zl.clf(i)] = eq[i].z_clf;
    const Vec u_i = solve_local(blocks[i], z);
    for (std::size_t q = 0; q < params.m; ++q) {
      out.u_local[i * params.m + q] = u_i[q];
      gap = std::max(gap, std::fabs(u_i[q] - cs.u[i * params.m + q]));
      wgap = std::max(wgap, std::fabs(eq[i].w[q] - u_i[q]));
    }
  }
  out.control_gap_inf = gap;
  out.w_vs_ubar_inf = wgap;
  return out;
}

}  // namespace rav
