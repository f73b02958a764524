#ifndef RAV_RUNTIME_HPP
#define RAV_RUNTIME_HPP

#include <string>
#include <vector>

#include "rav/constraints.hpp"
#include "rav/graph.hpp"
#include "rav/qp.hpp"
#include "rav/saddle.hpp"

namespace rav {

// Payload exchanged along one edge per fast tick; snapshotted before any
// node steps.
struct Message {
  int sender = -1;
  Vec x_sender;
  double z_pair = 0.0;  // sender's mismatch entry for the receiver's pair
  double y_pair = 0.0;
  double z_c = 0.0;
  double y_c = 0.0;
  double z_clf = 0.0;
  double y_clf = 0.0;
  Vec hc_grad_slice;  // sender's slice of the connectivity gradient
};

struct AgentNode {
  int id = -1;
  Vec x;
  FastVarsAgent fast;
  std::vector<Message> inbox;
  std::vector<Message> outbox;
  Dynamics dynamics;
  Vec u;  // most recent local control
};

// Slow/fast step sizes. dt_fast = dt_slow / fast_substeps must resolve the
// fast time scale (<= tau/10); run() shrinks dt_slow when it does not.
struct TickSchedule {
  double dt_slow = 0.01;
  std::size_t fast_substeps = 20;
  double horizon = 300.0;
  bool warm_start = false;

  double dt_fast() const { return dt_slow / static_cast<double>(fast_substeps); }
  void validate() const;
};

struct MetricsRow {
  double t = 0.0;
  double lambda2_binary = 0.0;
  double min_pair_dist = 0.0;
  double min_obs_clearance = 0.0;
  double v_total = 0.0;
  double max_target_residual = 0.0;
  double max_w = 0.0;
  bool violation = false;          // in-memory flag, not serialized
  std::vector<double> w_per_agent;  // in-memory only; files carry max_w
};

struct TrajectoryRow {
  double t = 0.0;
  int agent = 0;
  Vec x;
  Vec u;
};

struct SlowState {
  double time = 0.0;
  std::vector<Vec> x;
  EdgeSet edges;
  ConnectivityInfo conn;
};

enum class RunMode { distributed, centralized };
enum class StepMethod { euler, rk4 };
enum class RunStatus { ok, violation, refused, infeasible, nonfinite };

struct RunResult {
  std::vector<TrajectoryRow> trajectory;
  std::vector<MetricsRow> metrics;
  RunStatus status = RunStatus::ok;
  std::string message;
  std::vector<std::string> notes;
  bool any_violation = false;
};

// One synchronous exchange: every node receives exactly one message per
// current neighbor, all snapshotted before any node steps. Fills each
// node's outbox (in neighbor order) and inbox, and returns the inboxes.
std::vector<std::vector<Message>> tick_exchange(std::vector<AgentNode>& nodes,
                                                const EdgeSet& edges,
                                                const ConnectivityInfo& conn);

// Allocation-free variant for the inner loop; refills preallocated inboxes.
void tick_exchange_into(const std::vector<AgentNode>& nodes, const EdgeSet& edges,
                        const ConnectivityInfo& conn,
                        std::vector<std::vector<Message>>& inboxes);

// One fast Euler substep for a node from its inbox; absent neighbors decay
// in closed form (their truncation weight is exactly zero).
void agent_fast_update(AgentNode& node, const std::vector<Message>& inbox,
                       const std::vector<Vec>& x_snapshot, const ScenarioParams& params,
                       const ConstraintBlock& block, double dt_fast, FastScratch& scratch,
                       std::vector<PeerData>& peers_buf);

// Local control via the per-agent problem at the node's current mismatch.
Vec agent_control(const AgentNode& node, const ScenarioParams& params,
                  const ConstraintBlock& block);

// Explicit Euler (default) or RK4 with zero-order-hold controls.
SlowState slow_step(const SlowState& state, const std::vector<Vec>& controls,
                    const ScenarioParams& params, double dt_slow,
                    StepMethod method = StepMethod::euler);

MetricsRow collect_metrics(double t, const std::vector<Vec>& x, const ScenarioParams& params,
                           const FastState* fast, const std::vector<ConstraintBlock>* blocks);

RunResult run(const ScenarioParams& params, const std::vector<Vec>& x0, RunMode mode,
              const TickSchedule& schedule);

// Stacked controls from local problems at the fast equilibrium for frozen
// x, against the joint solve; used by the compare command and tests.
struct FrozenStateGap {
  double control_gap_inf = 0.0;   // || ubar(x, z*) - u* ||_inf
  double w_vs_ubar_inf = 0.0;     // || w* - ubar(x, z*) ||_inf
  double eq_original_violation = 0.0;
  Vec u_local;
  Vec u_central;
};
FrozenStateGap frozen_state_gap(const std::vector<Vec>& x, const ScenarioParams& params,
                                double dt_fast, double tol, std::size_t max_iters);

}  // namespace rav

#endif
