#include "rav/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rav {

void CommParams::validate() const {
  if (!(d_c > 0)) throw std::invalid_argument("CommParams: d_c must be positive");
  if (!(eps_c > 0 && eps_c < d_c))
    throw std::invalid_argument("CommParams: need 0 < eps_c < d_c");
  if (!(d0 > 0 && d0 < d_c)) throw std::invalid_argument("CommParams: need 0 < d0 < d_c");
  if (!(sigma > 0)) throw std::invalid_argument("CommParams: sigma must be positive");
}

bool EdgeSet::adjacent(int i, int j) const {
  const auto& n = nbrs[static_cast<std::size_t>(i)];
  return std::binary_search(n.begin(), n.end(), j);
}

namespace {

double distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double truncation_weight(const Vec& p_i, const Vec& p_j, const CommParams& params) {
  detail::require_finite(p_i, "truncation_weight");
  detail::require_finite(p_j, "truncation_weight");
  const double slack = params.d_c - distance(p_i, p_j);
  if (slack <= 0.0) return 0.0;
  return std::exp(-1.0 / slack);
}

double h_i_smoothing(double v_i_value) {
  if (v_i_value < 0.0) throw std::domain_error("h_i_smoothing: negative input");
  if (v_i_value == 0.0) return 0.0;
  return std::exp(-1.0 / v_i_value);
}

double adjacency_weight(const Vec& p_i, const Vec& p_j, const CommParams& params,
                        Vec* grad_pi) {
  detail::require_finite(p_i, "adjacency_weight");
  detail::require_finite(p_j, "adjacency_weight");
  const double cutoff = params.d_c - params.eps_c;
  double d2 = 0.0;
  for (std::size_t k = 0; k < p_i.size(); ++k) {
    const double d = p_i[k] - p_j[k];
    d2 += d * d;
  }
  if (grad_pi) *grad_pi = Vec(p_i.size());
  if (d2 > cutoff * cutoff) return 0.0;
  const double e = cutoff * cutoff - d2;
  const double expo = std::exp(e * e / params.sigma);
  if (grad_pi) {
    const double coeff = expo * (2.0 * e / params.sigma) * (-2.0);
    for (std::size_t k = 0; k < p_i.size(); ++k) (*grad_pi)[k] = coeff * (p_i[k] - p_j[k]);
  }
  return expo - 1.0;
}

EdgeSet neighbors(const std::vector<Vec>& positions, const CommParams& params) {
  if (positions.size() < 2) throw std::invalid_argument("neighbors: need at least 2 agents");
  const int n = static_cast<int>(positions.size());
  EdgeSet es;
  es.nbrs.resize(positions.size());
  for (int i = 0; i < n; ++i) {
    detail::require_finite(positions[static_cast<std::size_t>(i)], "neighbors");
    for (int j = i + 1; j < n; ++j) {
      if (distance(positions[static_cast<std::size_t>(i)],
                   positions[static_cast<std::size_t>(j)]) < params.d_c) {
        es.edges.emplace_back(i, j);
        es.nbrs[static_cast<std::size_t>(i)].push_back(j);
        es.nbrs[static_cast<std::size_t>(j)].push_back(i);
      }
    }
  }
  for (auto& lst : es.nbrs) std::sort(lst.begin(), lst.end());
  return es;
}

Mat weighted_laplacian(const std::vector<Vec>& positions, const CommParams& params) {
  const std::size_t n = positions.size();
  Mat l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double a = adjacency_weight(positions[i], positions[j], params);
      l(i, j) = -a;
      l(i, i) += a;
    }
  }
  return l;
}

Lambda2Result laplacian_lambda2(const Mat& laplacian) {
  const std::size_t n = laplacian.rows();
  if (n < 2) throw std::invalid_argument("laplacian_lambda2: need at least 2 nodes");

  // Reduce onto the orthogonal complement of the ones vector via the
  // Householder reflection mapping e_1 to 1/sqrt(n); columns 2..n of the
  // reflector span that complement, so the reduced matrix carries exactly
  // the spectrum l2 <= ... <= ln and v2 comes out orthogonal to ones.
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  Vec v(n, inv_sqrt_n);
  v[0] -= 1.0;
  const double vtv = dot(v, v);
  Mat q(n, n - 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n - 1; ++j)
      q(i, j) = (i == j + 1 ? 1.0 : 0.0) - 2.0 * v[i] * v[j + 1] / vtv;

  const Mat b = q.transposed().matmul(laplacian.matmul(q));
  // Symmetrize away reduction roundoff before the Jacobi sweep.
  Mat bs(n - 1, n - 1);
  for (std::size_t i = 0; i < n - 1; ++i)
    for (std::size_t j = 0; j < n - 1; ++j) bs(i, j) = 0.5 * (b(i, j) + b(j, i));

  const SymEig eig = sym_eig(bs);
  Lambda2Result out;
  out.lambda2 = eig.eigenvalues[0];
  Vec w(n - 1);
  for (std::size_t i = 0; i < n - 1; ++i) w[i] = eig.eigenvectors(i, 0);
  out.v2 = q.matvec(w);
  // Deterministic sign for the lifted eigenvector as well.
  for (std::size_t i = 0; i < n; ++i) {
    if (std::fabs(out.v2[i]) > 1e-12) {
      if (out.v2[i] < 0)
        for (std::size_t k = 0; k < n; ++k) out.v2[k] = -out.v2[k];
      break;
    }
  }
  const double gap_below = out.lambda2;  // lambda1 = 0 for any Laplacian
  const double gap_above = (n >= 3) ? eig.eigenvalues[1] - eig.eigenvalues[0]
                                    : std::numeric_limits<double>::infinity();
  out.eigengap = std::min(gap_below, gap_above);
  return out;
}

ConnectivityInfo lambda2_with_grad(const std::vector<Vec>& positions,
                                   const CommParams& params) {
  const std::size_t n = positions.size();
  ConnectivityInfo info;
  info.laplacian = weighted_laplacian(positions, params);
  const Lambda2Result lr = laplacian_lambda2(info.laplacian);
  info.lambda2 = lr.lambda2;
  info.v2 = lr.v2;
  info.eigengap = lr.eigengap;
  info.grad_reliable = lr.eigengap >= 1e-8;

  info.grad.assign(n, Vec(positions[0].size()));
  Vec da;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      adjacency_weight(positions[i], positions[j], params, &da);
      const double dv = info.v2[i] - info.v2[j];
      const double w = dv * dv;
      for (std::size_t k = 0; k < da.size(); ++k) info.grad[i][k] += w * da[k];
    }
  }
  return info;
}

double binary_lambda2(const std::vector<Vec>& positions, double d_c) {
  const std::size_t n = positions.size();
  Mat l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (distance(positions[i], positions[j]) < d_c) {
        l(i, j) = -1.0;
        l(i, i) += 1.0;
      }
    }
  }
  return laplacian_lambda2(l).lambda2;
}

}  // namespace rav
