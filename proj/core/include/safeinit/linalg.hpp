#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace safeinit::linalg {

// Shared numeric tolerances for the dense kernel.
struct NumericConfig {
  double eig_reconstruct_tol = 1e-10;   // relative, Frobenius
  double cholesky_pivot_tol = 1e-12;    // non-PD detection
  double solve_residual_tol = 1e-9;     // relative to rhs
  double condition_limit = 1e12;        // solve refuses beyond this
  int jacobi_max_sweeps = 100;
};

// Dense row-major real matrix; all entries finite by construction use.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> entries);

  static Matrix identity(std::size_t n);
  static Matrix column(const std::vector<double>& v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool all_finite() const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Symmetric matrix: symmetrized on construction so symmetry is exact.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim) : full_(dim, dim) {}
  // Builds (m + m^T)/2.
  static SymMatrix from(const Matrix& m);
  static SymMatrix identity(std::size_t n);
  static SymMatrix diag(const std::vector<double>& d);

  std::size_t dim() const { return full_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return full_(i, j); }
  void set(std::size_t i, std::size_t j, double v) {
    full_(i, j) = v;
    full_(j, i) = v;
  }
  const Matrix& as_matrix() const { return full_; }

 private:
  Matrix full_;
};

struct EigDecomp {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // columns, orthonormal
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Matrix transpose(const Matrix& m);
double frobenius_norm(const Matrix& m);
double norm2(const std::vector<double>& v);
std::vector<double> matvec(const Matrix& m, const std::vector<double>& v);
double dot(const std::vector<double>& a, const std::vector<double>& b);

// Cyclic Jacobi; eigenvalues ascending, V^T V = I.
EigDecomp sym_eig(const SymMatrix& m, const NumericConfig& cfg = {});

// Lower-triangular L with L L^T = m. Throws NotPositiveDefiniteError.
Matrix cholesky(const SymMatrix& m, const NumericConfig& cfg = {});

// Gaussian elimination with partial pivoting; refuses ill-conditioned m.
Matrix solve(const Matrix& m, const Matrix& rhs, const NumericConfig& cfg = {});
Matrix inverse(const Matrix& m, const NumericConfig& cfg = {});

// Nearest PSD matrix in Frobenius norm (eigenvalue clipping).
SymMatrix psd_project(const SymMatrix& m, const NumericConfig& cfg = {});

struct MaxEig {
  double value;
  std::vector<double> vector;  // unit top eigenvector
};
MaxEig max_eig(const SymMatrix& m, const NumericConfig& cfg = {});
double min_eigenvalue(const SymMatrix& m, const NumericConfig& cfg = {});

// Condition estimate: extreme singular-value ratio via eig(m^T m).
double condition_estimate(const Matrix& m, const NumericConfig& cfg = {});

// Spectral radius of a (possibly nonsymmetric) square matrix, estimated by
// repeated squaring with norm tracking: ||m^(2^k)||_2^(1/2^k).
double spectral_radius(const Matrix& m, int squarings = 9);

}  // namespace safeinit::linalg
