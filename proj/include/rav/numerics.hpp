#ifndef RAV_NUMERICS_HPP
#define RAV_NUMERICS_HPP

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace rav {

// Thrown by solve_linear when the system is singular or the condition
// estimate exceeds the 1e12 gate.
class SingularMatrixError : public std::runtime_error {
 public:
  explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

// Small dense column vector of doubles.
class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t n, double fill = 0.0) : v_(n, fill) {}
  Vec(std::initializer_list<double> xs) : v_(xs) {}
  explicit Vec(std::vector<double> xs) : v_(std::move(xs)) {}

  std::size_t size() const { return v_.size(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  const std::vector<double>& raw() const { return v_; }

  bool is_finite() const;

  Vec& operator+=(const Vec& o);
  Vec& operator-=(const Vec& o);
  Vec& operator*=(double s);

  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator*(Vec a, double s) { return a *= s; }

 private:
  std::vector<double> v_;
};

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
double norm_inf(const Vec& a);

// Dense row-major matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static Mat identity(std::size_t n);
  static Mat diag(const Vec& d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }
  const std::vector<double>& raw() const { return a_; }

  bool is_finite() const;
  bool is_square() const { return rows_ == cols_; }
  // Max abs asymmetry |a_ij - a_ji|.
  double asymmetry() const;

  Vec matvec(const Vec& x) const;       // A x
  Vec matvec_t(const Vec& x) const;     // A^T x
  Mat matmul(const Mat& b) const;       // A B
  Mat transposed() const;

  double norm_inf() const;              // max row sum of |a_ij|
  double frobenius() const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

// Eigendecomposition of a symmetric matrix: M = V diag(lambda) V^T with
// eigenvalues ascending and orthonormal eigenvector columns. Each
// eigenvector has its first nonzero component made positive so results
// are deterministic.
struct SymEig {
  Vec eigenvalues;   // ascending
  Mat eigenvectors;  // column k pairs with eigenvalues[k]
};

// Cyclic Jacobi rotations; intended for the small symmetric matrices that
// arise here (N up to a few dozen). Throws std::invalid_argument on
// non-square or asymmetric (beyond 1e-12 relative) input.
SymEig sym_eig(const Mat& m);

// Central-difference gradient of f at x with step h, O(h^2) accurate.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h);

// Solves A x = b by LU with partial pivoting. Throws SingularMatrixError
// when a pivot vanishes or the infinity-norm condition estimate is at or
// above 1e12.
Vec solve_linear(const Mat& a, const Vec& b);

// Infinity-norm condition estimate ||A||_inf * ||A^-1||_inf. Returns +inf
// for singular A.
double condition_inf(const Mat& a);

namespace detail {
void require_finite(const Vec& v, const char* where);
void require_finite(const Mat& m, const char* where);
}  // namespace detail

}  // namespace rav

#endif
