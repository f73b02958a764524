#ifndef RAV_GRAPH_HPP
#define RAV_GRAPH_HPP

#include <utility>
#include <vector>

#include "rav/numerics.hpp"

namespace rav {

// Communication / proximity parameters shared across the toolkit.
struct CommParams {
  double d_c = 0.9;    // communication range
  double eps_c = 0.1;  // communication margin, 0 < eps_c < d_c
  double sigma = 1.0;  // adjacency normalizer, > 0
  double d0 = 0.1;     // minimum safe inter-agent distance, 0 < d0 < d_c

  void validate() const;
};

// Undirected proximity edges at strict range < d_c plus per-agent
// neighbor lists.
struct EdgeSet {
  std::vector<std::pair<int, int>> edges;  // i < j
  std::vector<std::vector<int>> nbrs;      // ascending ids per agent

  bool adjacent(int i, int j) const;
};

// Weighted Laplacian spectrum data used by the connectivity constraint.
// grad[i] is the derivative of lambda2 with respect to agent i's position,
// valid when grad_reliable (eigengap >= 1e-8).
struct ConnectivityInfo {
  Mat laplacian;
  double lambda2 = 0.0;
  Vec v2;
  std::vector<Vec> grad;
  double eigengap = 0.0;
  bool grad_reliable = true;
};

// Smooth truncation weight: exp(-1/(d_c - |p_i - p_j|)) inside range,
// exactly 0 at and beyond d_c.
double truncation_weight(const Vec& p_i, const Vec& p_j, const CommParams& params);

// Scalar smoothing map exp(-1/v) for v > 0, 0 at v = 0. Rejects negative
// input with std::domain_error.
double h_i_smoothing(double v_i_value);

// Adjacency weight with cutoff d_c - eps_c; optionally writes the gradient
// with respect to p_i.
double adjacency_weight(const Vec& p_i, const Vec& p_j, const CommParams& params,
                        Vec* grad_pi = nullptr);

EdgeSet neighbors(const std::vector<Vec>& positions, const CommParams& params);

Mat weighted_laplacian(const std::vector<Vec>& positions, const CommParams& params);

ConnectivityInfo lambda2_with_grad(const std::vector<Vec>& positions, const CommParams& params);

// lambda2 of the 0/1 Laplacian with edges at strict distance < d_c.
double binary_lambda2(const std::vector<Vec>& positions, double d_c);

// Second-smallest eigenvalue (and its eigenvector, orthogonal to the ones
// vector by construction) of a Laplacian with exact zero row sums. Also
// reports the eigengap min(l2 - l1, l3 - l2).
struct Lambda2Result {
  double lambda2;
  Vec v2;
  double eigengap;
};
Lambda2Result laplacian_lambda2(const Mat& laplacian);

}  // namespace rav

#endif
