#ifndef RAV_QP_HPP
#define RAV_QP_HPP

#include <string>
#include <vector>

#include "rav/constraints.hpp"
#include "rav/numerics.hpp"

namespace rav {

// Raised when a constraint system admits no solution; carries the
// violation report.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& report) : std::runtime_error(report) {}
};

// Strictly convex QP: min 1/2 sum_k w_k v_k^2  s.t.  A v <= b.
struct QPInstance {
  std::size_t dim = 0;
  Vec weights;  // positive, per coordinate
  Mat a;        // rows x dim
  Vec b;

  void validate() const;
};

enum class QPStatus { solved, infeasible, max_iter };

struct QPSolution {
  Vec v;
  Vec duals;  // one per row, >= 0 when solved
  double kkt_residual = 0.0;
  QPStatus status = QPStatus::max_iter;
  // Infeasibility certificate: the offending row, its violation at the
  // final iterate, and the Farkas combination proving emptiness.
  int cert_row = -1;
  double cert_violation = 0.0;
  Vec farkas;
  std::string report;
};

// Dual active-set solver: starts at the unconstrained optimum (origin)
// and adds violated constraints with Goldfarb-Idnani full/partial steps.
// Deterministic: most-violated selection with lowest-index tie-break,
// switching to pure lowest-index (Bland) if iterations pile up.
QPSolution solve(const QPInstance& instance);

// max of stationarity, primal violation, dual negativity, and
// complementary-slackness magnitudes.
double kkt_residual(const QPInstance& instance, const QPSolution& solution);

// Projected-gradient oracle on the dual (trivial nonnegativity
// projection), run to stationarity 1e-10 with a diminishing step
// schedule. Shares no code with solve().
Vec brute_force_oracle(const QPInstance& instance);
// Same, but exposes the start point so fixed-point behavior can be tested.
Vec brute_force_oracle_from(const QPInstance& instance, const Vec& mu0);

// Local control problem: min 1/2 |u|^2 s.t. Psi u <= -(Theta z + phi).
// Throws InfeasibleError naming the worst row.
Vec solve_local(const ConstraintBlock& block, const Vec& z_i);

// Index map for the stacked mismatch vector of the joint recast problem:
// pairs (a<b) lexicographic, two entries each (owner a then owner b),
// then z^c (N) and z^clf (N).
struct GlobalZLayout {
  explicit GlobalZLayout(std::size_t num_agents);
  std::size_t size() const { return n_ * n_ + n_; }
  std::size_t pair(std::size_t owner, std::size_t other) const;
  std::size_t conn(std::size_t agent) const { return n_ * (n_ - 1) + agent; }
  std::size_t clf(std::size_t agent) const { return n_ * (n_ - 1) + n_ + agent; }
  std::size_t num_agents() const { return n_; }

 private:
  std::size_t n_;
};

// Extracts agent i's slice z^{i} (ZLayout order) from the global vector.
Vec slice_agent_z(const Vec& z_global, std::size_t i, std::size_t num_agents);

// Joint recast problem over (u, z): cost 1/2(|u|^2 + xi |z|^2) with every
// agent's block rows.
QPInstance build_recast_qp(const std::vector<Vec>& x, const ScenarioParams& params,
                           const ConnectivityInfo& conn,
                           const std::vector<ConstraintBlock>& blocks);

// Original coupled problem over u only: inter-agent rows on current edges,
// obstacle rows, one connectivity row, one clf row, and bounds.
QPInstance build_original_qp(const std::vector<Vec>& x, const ScenarioParams& params,
                             const ConnectivityInfo& conn, const EdgeSet& edges);

struct CentralizedSolution {
  Vec u;         // stacked controls, N*m
  Vec z;         // global mismatch vector
  double eq_original_violation = 0.0;  // max violation of the coupled rows at u
  QPSolution qp;
};

// Solves the joint recast problem and cross-checks the optimizer against
// the original coupled constraint set.
CentralizedSolution solve_centralized(const std::vector<Vec>& x, const ScenarioParams& params,
                                      const ConnectivityInfo& conn);

}  // namespace rav

#endif
