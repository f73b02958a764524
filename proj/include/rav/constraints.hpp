#ifndef RAV_CONSTRAINTS_HPP
#define RAV_CONSTRAINTS_HPP

#include <functional>
#include <vector>

#include "rav/graph.hpp"
#include "rav/numerics.hpp"

namespace rav {

// Circular obstacle.
struct Obstacle {
  Vec center;
  double radius = 0.0;
};

// Control-affine dynamics callbacks: xdot = F(x) + G(x) u.
struct Dynamics {
  std::function<Vec(const Vec&)> F;  // n
  std::function<Mat(const Vec&)> G;  // n x m

  static Dynamics single_integrator(std::size_t n);
};

// Optional replacement for the linear class-K gains gamma1/gamma2.
using ClassK = std::function<double(double)>;

// Full parameter set for a scenario. Gains gamma1/gamma2 act linearly
// unless a ClassK map is supplied to the scalar builders.
struct ScenarioParams {
  CommParams comm;
  double gamma1 = 2.0;
  double gamma2 = 2.0;
  double gamma3 = 0.01;
  double gamma4 = 1.0;
  double chi = 0.1;      // connectivity floor
  double epsilon = 0.5;  // target shrink, 0 < epsilon < 1
  double xi = 0.5;       // mismatch regularizer
  double tau = 0.002;    // fast timescale
  double c = 2.0;        // per-component control bound
  Mat sigma;             // n x n SPD target shape
  std::vector<Obstacle> obstacles;
  std::size_t num_agents = 0;  // N
  std::size_t m = 2;           // control dimension
  std::size_t n = 2;           // state dimension
  mutable Dynamics dyn;        // defaults to single integrator when unset

  std::size_t num_obstacles() const { return obstacles.size(); }
  // Rows per agent: (N-1) inter + K obstacle + 1 connectivity + 1 clf + 2m bounds.
  std::size_t rows_per_agent() const { return num_agents + num_obstacles() + 1 + 2 * m; }

  void validate() const;
  const Dynamics& dynamics() const;
};

// Index map for the per-agent mismatch vector
//   z^{i} = col({z_i^{i,j}, z_j^{i,j}}_{j != i, ascending j}, z^c, z^clf)
// of length 4N-2 (z^c and z^clf carry one entry per agent).
struct ZLayout {
  ZLayout(std::size_t num_agents, std::size_t agent);

  std::size_t size() const { return 4 * n_ - 2; }
  // Slot of z_i^{i,j}, the entry owned by this agent for pair {i,j}.
  std::size_t pair_own(std::size_t j) const;
  // Slot of z_j^{i,j}, the entry owned by the other agent of the pair.
  std::size_t pair_other(std::size_t j) const;
  std::size_t conn(std::size_t agent) const { return 2 * (n_ - 1) + agent; }
  std::size_t clf(std::size_t agent) const { return 2 * (n_ - 1) + n_ + agent; }

  std::size_t agent() const { return i_; }
  std::size_t num_agents() const { return n_; }

 private:
  std::size_t n_, i_;
  std::size_t pair_index(std::size_t j) const;  // rank of j among peers of i
};

// Row order inside a per-agent block and its dual vector:
// inter rows (j != i ascending), obstacle rows, connectivity, clf,
// then +I / -I control bounds.
struct RowLayout {
  RowLayout(std::size_t num_agents, std::size_t num_obstacles, std::size_t m,
            std::size_t agent);

  std::size_t rows() const { return n_ + k_ + 1 + 2 * m_; }
  std::size_t inter(std::size_t j) const;
  std::size_t obstacle(std::size_t k) const { return n_ - 1 + k; }
  std::size_t conn() const { return n_ - 1 + k_; }
  std::size_t clf() const { return n_ - 1 + k_ + 1; }
  std::size_t bound_upper(std::size_t comp) const { return n_ - 1 + k_ + 2 + comp; }
  std::size_t bound_lower(std::size_t comp) const { return n_ - 1 + k_ + 2 + m_ + comp; }

  // Human-readable row name for diagnostics.
  std::string row_name(std::size_t row) const;

 private:
  std::size_t n_, k_, m_, i_;
};

// Per-agent constraint system g_i(u_i; z^{i}, x) = Psi u_i + Theta z^{i} + phi,
// feasible iff every row is <= 0.
struct ConstraintBlock {
  Mat psi;    // M_i x m
  Mat theta;  // M_i x (4N-2)
  Vec phi;    // M_i
};

struct ValueGrad {
  double value = 0.0;
  Vec grad;
};

// Target shortfall V_i = max(0, x^T Sigma x - 1 + epsilon) with gradient
// 2 Sigma x outside the shrunk target set and 0 inside.
ValueGrad V_i(const Vec& x_i, const ScenarioParams& params);

// Allocation-free value-only form for hot loops.
double V_i_value(const Vec& x_i, const ScenarioParams& params);

// Smoothed product h_i(x_i) V_i(x_i); value and gradient vanish together
// on the target boundary.
ValueGrad hV_product(const Vec& x_i, const ScenarioParams& params);

// Pairwise collision constraint; satisfied iff >= 0.
double g_inter(const Vec& u_i, const Vec& u_j, const Vec& x_i, const Vec& x_j,
               const ScenarioParams& params, const ClassK& gamma1_map = {});

// Obstacle constraint for obstacle k; satisfied iff >= 0.
double g_obs(const Vec& u_i, const Vec& x_i, std::size_t k, const ScenarioParams& params,
             const ClassK& gamma2_map = {});

// Connectivity constraint over all agents; satisfied iff >= 0.
double g_conn(const std::vector<Vec>& x, const std::vector<Vec>& u,
              const ScenarioParams& params, const ConnectivityInfo& conn);

// Stacked task-convergence constraint; satisfied iff <= 0.
double g_clf(const std::vector<Vec>& x, const std::vector<Vec>& u,
             const ScenarioParams& params);

// Mismatch-split scalar forms backing the block rows. All are in
// "<= 0 feasible" convention.
double g_inter_local(const Vec& u_i, double z_own, double z_other, const Vec& x_i,
                     const Vec& x_j, const ScenarioParams& params);
double g_conn_local(std::size_t i, const Vec& u_i, const Vec& z_c,
                    const std::vector<Vec>& x, const ScenarioParams& params,
                    const ConnectivityInfo& conn);
double g_clf_local(std::size_t i, const Vec& u_i, const Vec& z_clf,
                   const std::vector<Vec>& x, const ScenarioParams& params);

// Assembles the full per-agent block from one state snapshot.
ConstraintBlock assemble_block(std::size_t i, const std::vector<Vec>& x,
                               const ScenarioParams& params, const ConnectivityInfo& conn);

// Evaluates Psi u + Theta z + phi.
Vec eval_local(const ConstraintBlock& block, const Vec& u_i, const Vec& z_i);

}  // namespace rav

#endif
