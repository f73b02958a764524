#include "rav/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rav {

namespace {

void check_same_size(const Vec& a, const Vec& b, const char* op) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(op) + ": size mismatch " +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}

}  // namespace

bool Vec::is_finite() const {
  for (double x : v_)
    if (!std::isfinite(x)) return false;
  return true;
}

Vec& Vec::operator+=(const Vec& o) {
  check_same_size(*this, o, "Vec::+=");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}

Vec& Vec::operator-=(const Vec& o) {
  check_same_size(*this, o, "Vec::-=");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}

Vec& Vec::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

double dot(const Vec& a, const Vec& b) {
  check_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const Vec& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i]));
  return m;
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::diag(const Vec& d) {
  Mat m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

bool Mat::is_finite() const {
  for (double x : a_)
    if (!std::isfinite(x)) return false;
  return true;
}

double Mat::asymmetry() const {
  double m = 0.0;
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i + 1; j < cols_; ++j)
      m = std::max(m, std::fabs((*this)(i, j) - (*this)(j, i)));
  return m;
}

Vec Mat::matvec(const Vec& x) const {
  if (x.size() != cols_) throw std::invalid_argument("Mat::matvec: size mismatch");
  Vec y(rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    const double* row = a_.data() + i * cols_;
    for (std::size_t j = 0; j < cols_; ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

Vec Mat::matvec_t(const Vec& x) const {
  if (x.size() != rows_) throw std::invalid_argument("Mat::matvec_t: size mismatch");
  Vec y(cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    const double* row = a_.data() + i * cols_;
    const double xi = x[i];
    for (std::size_t j = 0; j < cols_; ++j) y[j] += row[j] * xi;
  }
  return y;
}

Mat Mat::matmul(const Mat& b) const {
  if (cols_ != b.rows_) throw std::invalid_argument("Mat::matmul: size mismatch");
  Mat c(rows_, b.cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = 0; k < cols_; ++k) {
      const double aik = (*this)(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Mat Mat::transposed() const {
  Mat t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Mat::norm_inf() const {
  double m = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) s += std::fabs((*this)(i, j));
    m = std::max(m, s);
  }
  return m;
}

double Mat::frobenius() const {
  double s = 0.0;
  for (double x : a_) s += x * x;
  return std::sqrt(s);
}

namespace detail {

void require_finite(const Vec& v, const char* where) {
  if (!v.is_finite()) throw std::invalid_argument(std::string(where) + ": non-finite input");
}

void require_finite(const Mat& m, const char* where) {
  if (!m.is_finite()) throw std::invalid_argument(std::string(where) + ": non-finite input");
}

}  // namespace detail

namespace {

// Applies the deterministic sign convention: first component with
// magnitude above 1e-12 is made positive.
void fix_eigvec_signs(Mat& v) {
  for (std::size_t k = 0; k < v.cols(); ++k) {
    double sign = 0.0;
    for (std::size_t i = 0; i < v.rows(); ++i) {
      if (std::fabs(v(i, k)) > 1e-12) {
        sign = v(i, k) > 0 ? 1.0 : -1.0;
        break;
      }
    }
    if (sign < 0)
      for (std::size_t i = 0; i < v.rows(); ++i) v(i, k) = -v(i, k);
  }
}

}  // namespace

SymEig sym_eig(const Mat& m) {
  detail::require_finite(m, "sym_eig");
  if (!m.is_square()) throw std::invalid_argument("sym_eig: matrix not square");
  const std::size_t n = m.rows();
  const double scale = std::max(1.0, m.norm_inf());
  if (m.asymmetry() > 1e-12 * scale)
    throw std::invalid_argument("sym_eig: matrix not symmetric within 1e-12");

  Mat a = m;
  Mat v = Mat::identity(n);
  const double off_tol = 1e-15 * std::max(1.0, a.frobenius());

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    off = std::sqrt(2.0 * off);
    if (off <= off_tol) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        const double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r != p && r != q) {
            const double arp = a(r, p), arq = a(r, q);
            a(r, p) = arp - s * (arq + tau * arp);
            a(p, r) = a(r, p);
            a(r, q) = arq + s * (arp - tau * arq);
            a(q, r) = a(r, q);
          }
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  // Sort ascending, carrying eigenvector columns along.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  SymEig out;
  out.eigenvalues = Vec(n);
  out.eigenvectors = Mat(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = v(i, order[k]);
  }
  fix_eigvec_signs(out.eigenvectors);
  return out;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  detail::require_finite(x, "finite_diff_grad");
  if (!(h > 0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  Vec g(x.size());
  Vec xp = x, xm = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x[k];
    xp[k] = orig + h;
    xm[k] = orig - h;
    g[k] = (f(xp) - f(xm)) / (2.0 * h);
    xp[k] = orig;
    xm[k] = orig;
  }
  return g;
}

namespace {

struct Lu {
  Mat lu;                  // packed L\U factors
  std::vector<int> piv;    // row permutation
  bool singular = false;
};

Lu lu_factor(const Mat& a) {
  const std::size_t n = a.rows();
  Lu f;
  f.lu = a;
  f.piv.resize(n);
  std::iota(f.piv.begin(), f.piv.end(), 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::fabs(f.lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double cand = std::fabs(f.lu(i, k));
      if (cand > best) {
        best = cand;
        p = i;
      }
    }
    if (best == 0.0) {
      f.singular = true;
      return f;
    }
    if (p != k) {
      std::swap(f.piv[p], f.piv[k]);
      for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(p, j), f.lu(k, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      f.lu(i, k) /= f.lu(k, k);
      const double lik = f.lu(i, k);
      if (lik == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) f.lu(i, j) -= lik * f.lu(k, j);
    }
  }
  return f;
}

Vec lu_solve(const Lu& f, const Vec& b) {
  const std::size_t n = f.lu.rows();
  Vec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[f.piv[i]];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) x[i] -= f.lu(i, j) * x[j];
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) x[i] -= f.lu(i, j) * x[j];
    x[i] /= f.lu(i, i);
  }
  return x;
}

double cond_from_factor(const Mat& a, const Lu& f) {
  if (f.singular) return std::numeric_limits<double>::infinity();
  const std::size_t n = a.rows();
  // ||A^-1||_inf from explicit columns of the inverse; fine at these sizes.
  double inv_norm = 0.0;
  std::vector<double> row_sums(n, 0.0);
  Vec e(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vec col = lu_solve(f, e);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) row_sums[i] += std::fabs(col[i]);
  }
  for (double s : row_sums) inv_norm = std::max(inv_norm, s);
  return a.norm_inf() * inv_norm;
}

}  // namespace

double condition_inf(const Mat& a) {
  detail::require_finite(a, "condition_inf");
  if (!a.is_square()) throw std::invalid_argument("condition_inf: matrix not square");
  return cond_from_factor(a, lu_factor(a));
}

Vec solve_linear(const Mat& a, const Vec& b) {
  detail::require_finite(a, "solve_linear");
  detail::require_finite(b, "solve_linear");
  if (!a.is_square()) throw std::invalid_argument("solve_linear: matrix not square");
  if (a.rows() != b.size()) throw std::invalid_argument("solve_linear: rhs size mismatch");
  if (a.rows() == 0) return Vec();
  Lu f = lu_factor(a);
  if (f.singular) throw SingularMatrixError("solve_linear: singular matrix");
  const double cond = cond_from_factor(a, f);
  if (!(cond < 1e12))
    throw SingularMatrixError("solve_linear: condition estimate " + std::to_string(cond) +
                              " exceeds 1e12");
  return lu_solve(f, b);
}

}  // namespace rav
