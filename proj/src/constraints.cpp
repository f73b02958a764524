#include "rav/constraints.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rav {

Dynamics Dynamics::single_integrator(std::size_t n) {
  Dynamics d;
  d.F = [n](const Vec&) { return Vec(n); };
  d.G = [n](const Vec&) { return Mat::identity(n); };
  return d;
}

void ScenarioParams::validate() const {
  comm.validate();
  if (!(gamma3 > 0)) throw std::invalid_argument("ScenarioParams: gamma3 must be positive");
  if (!(gamma4 > 0)) throw std::invalid_argument("ScenarioParams: gamma4 must be positive");
  if (!(xi > 0)) throw std::invalid_argument("ScenarioParams: xi must be positive");
  if (!(tau > 0)) throw std::invalid_argument("ScenarioParams: tau must be positive");
  if (!(c > 0)) throw std::invalid_argument("ScenarioParams: c must be positive");
  if (!(epsilon > 0 && epsilon < 1))
    throw std::invalid_argument("ScenarioParams: need 0 < epsilon < 1");
  if (sigma.rows() != n || sigma.cols() != n)
    throw std::invalid_argument("ScenarioParams: Sigma must be n x n");
  if (sigma.asymmetry() > 1e-12 * std::max(1.0, sigma.norm_inf()))
    throw std::invalid_argument("ScenarioParams: Sigma must be symmetric");
  const SymEig eig = sym_eig(sigma);
  if (eig.eigenvalues[0] <= 0)
    throw std::invalid_argument("ScenarioParams: Sigma must be positive definite");
  for (const Obstacle& o : obstacles) {
    if (!(o.radius > 0)) throw std::invalid_argument("ScenarioParams: obstacle radius must be positive");
    if (o.center.size() != n)
      throw std::invalid_argument("ScenarioParams: obstacle center dimension mismatch");
  }
  if (num_agents < 2) throw std::invalid_argument("ScenarioParams: need at least 2 agents");
}

const Dynamics& ScenarioParams::dynamics() const {
  if (!dyn.F || !dyn.G) dyn = Dynamics::single_integrator(n);
  return dyn;
}

ZLayout::ZLayout(std::size_t num_agents, std::size_t agent) : n_(num_agents), i_(agent) {
  if (agent >= num_agents) throw std::invalid_argument("ZLayout: agent out of range");
}

std::size_t ZLayout::pair_index(std::size_t j) const {
  if (j == i_ || j >= n_) throw std::invalid_argument("ZLayout: bad pair peer");
  return j < i_ ? j : j - 1;
}

std::size_t ZLayout::pair_own(std::size_t j) const { return 2 * pair_index(j); }
std::size_t ZLayout::pair_other(std::size_t j) const { return 2 * pair_index(j) + 1; }

RowLayout::RowLayout(std::size_t num_agents, std::size_t num_obstacles, std::size_t m,
                     std::size_t agent)
    : n_(num_agents), k_(num_obstacles), m_(m), i_(agent) {}

std::size_t RowLayout::inter(std::size_t j) const {
  if (j == i_ || j >= n_) throw std::invalid_argument("RowLayout: bad inter peer");
  return j < i_ ? j : j - 1;
}

std::string RowLayout::row_name(std::size_t row) const {
  if (row < n_ - 1) {
    const std::size_t j = row < i_ ? row : row + 1;
    return "inter(" + std::to_string(i_) + "," + std::to_string(j) + ")";
  }
  if (row < n_ - 1 + k_) return "obstacle " + std::to_string(row - (n_ - 1));
  if (row == conn()) return "connectivity";
  if (row == clf()) return "clf";
  const std::size_t b = row - (n_ - 1 + k_ + 2);
  if (b < m_) return "bound +u[" + std::to_string(b) + "]";
  return "bound -u[" + std::to_string(b - m_) + "]";
}

namespace {

double apply_gamma(double gain, const ClassK& map, double s) {
  return map ? map(s) : gain * s;
}

// h_inter = |x_i - x_j|^2 - d0^2 with gradient 2(x_i - x_j) in x_i.
double h_inter_value(const Vec& x_i, const Vec& x_j, double d0) {
  double s = 0.0;
  for (std::size_t k = 0; k < x_i.size(); ++k) {
    const double d = x_i[k] - x_j[k];
    s += d * d;
  }
  return s - d0 * d0;
}

// h_obs = |x_i - s_k|^2 - r_k^2 with gradient 2(x_i - s_k).
double h_obs_value(const Vec& x_i, const Obstacle& o) {
  double s = 0.0;
  for (std::size_t k = 0; k < x_i.size(); ++k) {
    const double d = x_i[k] - o.center[k];
    s += d * d;
  }
  return s - o.radius * o.radius;
}

}  // namespace

ValueGrad V_i(const Vec& x_i, const ScenarioParams& params) {
  const Vec sx = params.sigma.matvec(x_i);
  const double raw = dot(x_i, sx) - 1.0 + params.epsilon;
  ValueGrad out;
  out.grad = Vec(x_i.size());
  if (raw <= 0.0) return out;
  out.value = raw;
  for (std::size_t k = 0; k < x_i.size(); ++k) out.grad[k] = 2.0 * sx[k];
  return out;
}

double V_i_value(const Vec& x_i, const ScenarioParams& params) {
  double quad = 0.0;
  for (std::size_t r = 0; r < x_i.size(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < x_i.size(); ++c) s += params.sigma(r, c) * x_i[c];
    quad += x_i[r] * s;
  }
  const double raw = quad - 1.0 + params.epsilon;
  return raw > 0.0 ? raw : 0.0;
}

ValueGrad hV_product(const Vec& x_i, const ScenarioParams& params) {
  const ValueGrad v = V_i(x_i, params);
  ValueGrad out;
  out.grad = Vec(x_i.size());
  if (v.value <= 0.0) return out;
  const double h = std::exp(-1.0 / v.value);
  out.value = h * v.value;
  // d(hV)/dV = e^{-1/V} (1 + 1/V); chain through grad V = 2 Sigma x.
  const double coeff = h * (1.0 + 1.0 / v.value);
  for (std::size_t k = 0; k < x_i.size(); ++k) out.grad[k] = coeff * v.grad[k];
  return out;
}

double g_inter(const Vec& u_i, const Vec& u_j, const Vec& x_i, const Vec& x_j,
               const ScenarioParams& params, const ClassK& gamma1_map) {
  const Dynamics& dyn = params.dynamics();
  const double h = h_inter_value(x_i, x_j, params.comm.d0);
  Vec grad_i(x_i.size());
  for (std::size_t k = 0; k < x_i.size(); ++k) grad_i[k] = 2.0 * (x_i[k] - x_j[k]);
  Vec grad_j = grad_i;
  grad_j *= -1.0;

  double val = apply_gamma(params.gamma1, gamma1_map, h);
  val += dot(grad_i, dyn.F(x_i)) + dot(grad_i, dyn.G(x_i).matvec(u_i));
  val += dot(grad_j, dyn.F(x_j)) + dot(grad_j, dyn.G(x_j).matvec(u_j));
  return val;
}

double g_obs(const Vec& u_i, const Vec& x_i, std::size_t k, const ScenarioParams& params,
             const ClassK& gamma2_map) {
  if (k >= params.obstacles.size()) throw std::out_of_range("g_obs: obstacle index");
  const Dynamics& dyn = params.dynamics();
  const Obstacle& o = params.obstacles[k];
  const double h = h_obs_value(x_i, o);
  Vec grad(x_i.size());
  for (std::size_t q = 0; q < x_i.size(); ++q) grad[q] = 2.0 * (x_i[q] - o.center[q]);
  return dot(grad, dyn.F(x_i)) + dot(grad, dyn.G(x_i).matvec(u_i)) +
         apply_gamma(params.gamma2, gamma2_map, h);
}

double g_conn(const std::vector<Vec>& x, const std::vector<Vec>& u,
              const ScenarioParams& params, const ConnectivityInfo& conn) {
  const Dynamics& dyn = params.dynamics();
  const double hc = conn.lambda2 - params.chi;
  double val = params.gamma4 * hc;
  for (std::size_t i = 0; i < x.size(); ++i) {
    val += dot(conn.grad[i], dyn.F(x[i]));
    val += dot(conn.grad[i], dyn.G(x[i]).matvec(u[i]));
  }
  return val;
}

double g_clf(const std::vector<Vec>& x, const std::vector<Vec>& u,
             const ScenarioParams& params) {
  const Dynamics& dyn = params.dynamics();
  double val = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const ValueGrad hv = hV_product(x[i], params);
    val += dot(hv.grad, dyn.F(x[i])) + dot(hv.grad, dyn.G(x[i]).matvec(u[i])) +
           params.gamma3 * hv.value;
  }
  return val;
}

double g_inter_local(const Vec& u_i, double z_own, double z_other, const Vec& x_i,
                     const Vec& x_j, const ScenarioParams& params) {
  const Dynamics& dyn = params.dynamics();
  const double w = truncation_weight(x_i, x_j, params.comm);
  if (w == 0.0) return 0.0;
  const double h = h_inter_value(x_i, x_j, params.comm.d0);
  Vec grad_i(x_i.size());
  for (std::size_t k = 0; k < x_i.size(); ++k) grad_i[k] = 2.0 * (x_i[k] - x_j[k]);
  const double lf = dot(grad_i, dyn.F(x_i));
  const double lg_u = dot(grad_i, dyn.G(x_i).matvec(u_i));
  return w * (-lf - lg_u - 0.5 * params.gamma1 * h + (z_own - z_other));
}

double g_conn_local(std::size_t i, const Vec& u_i, const Vec& z_c,
                    const std::vector<Vec>& x, const ScenarioParams& params,
                    const ConnectivityInfo& conn) {
  const Dynamics& dyn = params.dynamics();
  const double hc = conn.lambda2 - params.chi;
  double val = -dot(conn.grad[i], dyn.F(x[i])) - dot(conn.grad[i], dyn.G(x[i]).matvec(u_i)) -
               params.gamma4 * hc / static_cast<double>(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j == i) continue;
    val += truncation_weight(x[i], x[j], params.comm) * (z_c[i] - z_c[j]);
  }
  return val;
}

double g_clf_local(std::size_t i, const Vec& u_i, const Vec& z_clf,
                   const std::vector<Vec>& x, const ScenarioParams& params) {
  const Dynamics& dyn = params.dynamics();
  const ValueGrad hv = hV_product(x[i], params);
  double val = dot(hv.grad, dyn.F(x[i])) + dot(hv.grad, dyn.G(x[i]).matvec(u_i)) +
               params.gamma3 * hv.value;
  const double h_i = h_i_smoothing(V_i(x[i], params).value);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j == i) continue;
    const double h_j = h_i_smoothing(V_i(x[j], params).value);
    val += truncation_weight(x[i], x[j], params.comm) * h_i * h_j * (z_clf[i] - z_clf[j]);
  }
  return val;
}

ConstraintBlock assemble_block(std::size_t i, const std::vector<Vec>& x,
                               const ScenarioParams& params, const ConnectivityInfo& conn) {
  const std::size_t n_agents = x.size();
  if (i >= n_agents) throw std::invalid_argument("assemble_block: agent out of range");
  const Dynamics& dyn = params.dynamics();
  const std::size_t m = params.m;
  const ZLayout zl(n_agents, i);
  const RowLayout rl(n_agents, params.obstacles.size(), m, i);

  ConstraintBlock block;
  block.psi = Mat(rl.rows(), m);
  block.theta = Mat(rl.rows(), zl.size());
  block.phi = Vec(rl.rows());

  const Mat g_i = dyn.G(x[i]);
  const Vec f_i = dyn.F(x[i]);

  // Inter-agent rows: -h_ij * (L_F h + L_G h u) - h_ij * gamma1(h)/2 + h_ij (z_i - z_j).
  for (std::size_t j = 0; j < n_agents; ++j) {
    if (j == i) continue;
    const std::size_t r = rl.inter(j);
    const double w = truncation_weight(x[i], x[j], params.comm);
    if (w == 0.0) continue;  // row stays identically zero past the cutoff
    const double h = h_inter_value(x[i], x[j], params.comm.d0);
    Vec grad(x[i].size());
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = 2.0 * (x[i][k] - x[j][k]);
    const Vec lg = g_i.matvec_t(grad);  // row vector L_G h as a Vec
    for (std::size_t k = 0; k < m; ++k) block.psi(r, k) = -w * lg[k];
    block.theta(r, zl.pair_own(j)) = w;
    block.theta(r, zl.pair_other(j)) = -w;
    block.phi[r] = -w * (dot(grad, f_i) + 0.5 * params.gamma1 * h);
  }

  // Obstacle rows: -(L_F h + L_G h u) - gamma2(h).
  for (std::size_t k = 0; k < params.obstacles.size(); ++k) {
    const std::size_t r = rl.obstacle(k);
    Vec grad(x[i].size());
    for (std::size_t q = 0; q < grad.size(); ++q)
      grad[q] = 2.0 * (x[i][q] - params.obstacles[k].center[q]);
    const Vec lg = g_i.matvec_t(grad);
    for (std::size_t q = 0; q < m; ++q) block.psi(r, q) = -lg[q];
    block.phi[r] = -dot(grad, f_i) - params.gamma2 * h_obs_value(x[i], params.obstacles[k]);
  }

  // Connectivity row: -(L_F h_c + L_G h_c u) - gamma4 h_c / N + sum_j h_ij (z_i^c - z_j^c).
  {
    const std::size_t r = rl.conn();
    const Vec lg = g_i.matvec_t(conn.grad[i]);
    for (std::size_t q = 0; q < m; ++q) block.psi(r, q) = -lg[q];
    double diag = 0.0;
    for (std::size_t j = 0; j < n_agents; ++j) {
      if (j == i) continue;
      const double w = truncation_weight(x[i], x[j], params.comm);
      block.theta(r, zl.conn(j)) = -w;
      diag += w;
    }
    block.theta(r, zl.conn(i)) = diag;
    block.phi[r] = -dot(conn.grad[i], f_i) -
                   params.gamma4 * (conn.lambda2 - params.chi) / static_cast<double>(n_agents);
  }

  // CLF row: +(L_F (hV) + L_G (hV) u) + gamma3 hV + sum_j h_ij h_i h_j (z_i - z_j).
  {
    const std::size_t r = rl.clf();
    const ValueGrad hv = hV_product(x[i], params);
    const Vec lg = g_i.matvec_t(hv.grad);
    for (std::size_t q = 0; q < m; ++q) block.psi(r, q) = lg[q];
    const double h_i = h_i_smoothing(V_i(x[i], params).value);
    double diag = 0.0;
    for (std::size_t j = 0; j < n_agents; ++j) {
      if (j == i) continue;
      const double h_j = h_i_smoothing(V_i(x[j], params).value);
      const double w = truncation_weight(x[i], x[j], params.comm) * h_i * h_j;
      block.theta(r, zl.clf(j)) = -w;
      diag += w;
    }
    block.theta(r, zl.clf(i)) = diag;
    block.phi[r] = dot(hv.grad, f_i) + params.gamma3 * hv.value;
  }

  // Control bounds: u - c <= 0 and -u - c <= 0.
  for (std::size_t q = 0; q < m; ++q) {
    block.psi(rl.bound_upper(q), q) = 1.0;
    block.phi[rl.bound_upper(q)] = -params.c;
    block.psi(rl.bound_lower(q), q) = -1.0;
    block.phi[rl.bound_lower(q)] = -params.c;
  }
  return block;
}

Vec eval_local(const ConstraintBlock& block, const Vec& u_i, const Vec& z_i) {
  if (u_i.size() != block.psi.cols()) throw std::invalid_argument("eval_local: u size mismatch");
  if (z_i.size() != block.theta.cols()) throw std::invalid_argument("eval_local: z size mismatch");
  Vec g = block.psi.matvec(u_i);
  const Vec tz = block.theta.matvec(z_i);
  for (std::size_t r = 0; r < g.size(); ++r) g[r] += tz[r] + block.phi[r];
  return g;
}

}  // namespace rav
