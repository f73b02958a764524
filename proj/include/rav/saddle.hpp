#ifndef RAV_SADDLE_HPP
#define RAV_SADDLE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "rav/constraints.hpp"
#include "rav/graph.hpp"
#include "rav/numerics.hpp"

namespace rav {

class IntegrationError : public std::runtime_error {
 public:
  explicit IntegrationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised by run_to_equilibrium when the budget is exhausted; carries the
// final merit value.
class SaddleConvergenceError : public std::runtime_error {
 public:
  SaddleConvergenceError(const std::string& what, double final_w)
      : std::runtime_error(what), final_w(final_w) {}
  double final_w;
};

// Fast variables owned by one agent, plus the locally maintained copies of
// every peer's pair mismatch/dual and of peer z^c / z^clf entries. Copies
// are refreshed from messages while a link exists and evolved by the same
// decay law while it does not, so they track the peer's authoritative
// values exactly.
struct FastVarsAgent {
  Vec w;                              // control surrogate, m
  std::vector<double> z_pair_own;     // entry j: z_i^{i,j} (slot i unused)
  std::vector<double> z_pair_other;   // entry j: copy of z_j^{i,j}
  std::vector<double> y_pair_other;   // entry j: copy of y_j^{i,j}
  double z_c = 0.0;
  double z_clf = 0.0;
  std::vector<double> z_c_copies;     // entry j: copy of z_j^c (slot i unused)
  std::vector<double> z_clf_copies;   // entry j: copy of z_j^clf
  Vec y;                              // duals, M_i, componentwise >= 0

  double norm() const;
  bool is_finite() const;
};

using FastState = std::vector<FastVarsAgent>;

// All-zero fast variables sized for the scenario.
FastState make_fast_state(const ScenarioParams& params);

// Snapshot of what one peer shares for the fast update.
struct PeerData {
  bool present = false;
  double z_pair = 0.0;  // peer's z_j^{i,j}
  double y_pair = 0.0;  // peer's y_j^{i,j}
  double z_c = 0.0;
  double y_c = 0.0;
  double z_clf = 0.0;
  double y_clf = 0.0;
};

// Time-derivatives of one agent's fast variables (already scaled by 1/tau).
struct FastDerivs {
  Vec dw;
  std::vector<double> dz_pair_own;
  std::vector<double> dz_pair_other;
  double dz_c = 0.0;
  double dz_clf = 0.0;
  Vec dy;  // projected: passes through when y > 0, clamps negatives at y = 0

  double max_abs() const;
};

// Reusable buffers for the substep loop.
struct FastScratch {
  Vec z;  // 4N-2 assembly buffer
  Vec g;  // M_i row values
  FastDerivs d;
};
FastScratch make_fast_scratch(const ScenarioParams& params);

// Derivatives for agent i from its own variables plus peer snapshots.
// Coupling terms are evaluated only where a peer is present; elsewhere the
// truncation weight vanishes and the mismatch decays freely.
void compute_agent_derivs(std::size_t i, const std::vector<Vec>& x,
                          const ScenarioParams& params, const ConstraintBlock& block,
                          const FastVarsAgent& f, const std::vector<PeerData>& peers,
                          FastDerivs& out, Vec& z_buf, Vec& g_buf);

// Copy-in from peers, derivative evaluation, and one Euler substep.
void agent_fast_substep(std::size_t i, const std::vector<Vec>& x,
                        const ScenarioParams& params, const ConstraintBlock& block,
                        const std::vector<PeerData>& peers, double dt, FastVarsAgent& f,
                        FastScratch& scratch);

// Peer snapshot table built from authoritative values (row i = peers of i).
std::vector<std::vector<PeerData>> snapshot_peers(const std::vector<Vec>& x,
                                                  const FastState& fast,
                                                  const ScenarioParams& params,
                                                  const EdgeSet& edges);

// Monolithic view: derivatives of every agent's fast variables.
std::vector<FastDerivs> fast_derivatives(const std::vector<Vec>& x, const FastState& fast,
                                         const ScenarioParams& params,
                                         const std::vector<ConstraintBlock>& blocks);

// Monolithic synchronous Euler substep of length dt over all agents.
void fast_step(const std::vector<Vec>& x, FastState& fast, double dt,
               const ScenarioParams& params, const std::vector<ConstraintBlock>& blocks);

// Merit function over the fast variables: 1/2 ||grad_w,z L||^2 plus the
// squared non-excluded dual gradients. Zero exactly at the saddle point.
struct MeritReport {
  double w = 0.0;
  std::vector<std::size_t> active_exclusion_set;  // global row ids, i * M_i + r
  double stationarity_norm = 0.0;
  double primal_norm = 0.0;
  std::vector<double> per_agent;  // contributions summing to w
};

MeritReport merit_W(const std::vector<Vec>& x, const FastState& fast,
                    const ScenarioParams& params, const std::vector<ConstraintBlock>& blocks);

// Test-side variant that adds the squared distance to a known equilibrium.
double merit_W_full(const std::vector<Vec>& x, const FastState& fast,
                    const ScenarioParams& params, const std::vector<ConstraintBlock>& blocks,
                    const FastState& equilibrium);

struct EquilibriumOptions {
  double dt_fast = 0.0;          // 0 means tau/20
  std::size_t max_iters = 20000000;
  std::size_t check_every = 50;  // derivative-norm test cadence
};

// Iterates fast_step at frozen x until max |derivative| <= tol.
FastState run_to_equilibrium(const std::vector<Vec>& x, const FastState& fast0,
                             const ScenarioParams& params, double tol,
                             const EquilibriumOptions& opts = {});

// Generic projected saddle-point flow for
//   min 1/2 x^T diag(w) x + q^T x  s.t.  G x <= h,  A x = b.
struct SaddleProblem {
  Vec wdiag;
  Vec q;
  Mat gineq;
  Vec hineq;
  Mat aeq;
  Vec beq;
};

struct SaddleFlowState {
  Vec x;
  Vec y;   // >= 0, one per inequality row
  Vec mu;  // one per equality row
};

SaddleFlowState generic_saddle_flow(const SaddleProblem& problem, SaddleFlowState state,
                                    double dt, std::size_t steps);

// [a]_b^+ : a when b > 0, max(0, a) when b = 0.
inline double proj_plus(double a, double b) { return b > 0.0 ? a : (a > 0.0 ? a : 0.0); }

}  // namespace rav

#endif
