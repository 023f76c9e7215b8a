#include "safeinit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "safeinit/errors.hpp"

namespace safeinit::linalg {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> entries)
    : rows_(rows), cols_(cols), data_(entries) {
  if (data_.size() != rows * cols) throw ModelError("matrix literal size mismatch");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(const std::vector<double>& v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

SymMatrix SymMatrix::from(const Matrix& m) {
  if (m.rows() != m.cols()) throw ModelError("SymMatrix::from: not square");
  SymMatrix s(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i; j < m.cols(); ++j) s.set(i, j, 0.5 * (m(i, j) + m(j, i)));
  return s;
}

SymMatrix SymMatrix::identity(std::size_t n) { return from(Matrix::identity(n)); }

SymMatrix SymMatrix::diag(const std::vector<double>& d) {
  SymMatrix s(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) s.set(i, i, d[i]);
  return s;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ModelError("matrix add: shape mismatch");
  Matrix r = a;
  for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] += b.data()[i];
  return r;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ModelError("matrix sub: shape mismatch");
  Matrix r = a;
  for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] -= b.data()[i];
  return r;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ModelError("matrix mul: shape mismatch");
  Matrix r(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
    }
  return r;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix r = a;
  for (double& x : r.data()) x *= s;
  return r;
}

Matrix transpose(const Matrix& m) {
  Matrix r(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) r(j, i) = m(i, j);
  return r;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double x : m.data()) s += x * x;
  return std::sqrt(s);
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> matvec(const Matrix& m, const std::vector<double>& v) {
  if (m.cols() != v.size()) throw ModelError("matvec: shape mismatch");
  std::vector<double> r(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) r[i] += m(i, j) * v[j];
  return r;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

EigDecomp sym_eig(const SymMatrix& m, const NumericConfig& cfg) {
  const std::size_t n = m.dim();
  Matrix a = m.as_matrix();
  if (!a.all_finite()) throw NumericalError("sym_eig: non-finite input");
  Matrix v = Matrix::identity(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };

  const double scale = frobenius_norm(a);
  const double stop = 1e-14 * (1.0 + scale);
  int sweep = 0;
  while (off_norm() > stop) {
    if (++sweep > cfg.jacobi_max_sweeps)
      throw NumericalError("sym_eig: Jacobi failed to converge");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  EigDecomp d;
  d.eigenvalues.resize(n);
  d.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    d.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) d.eigenvectors(i, j) = v(i, order[j]);
  }
  return d;
}

Matrix cholesky(const SymMatrix& m, const NumericConfig& cfg) {
  const std::size_t n = m.dim();
  const double scale = frobenius_norm(m.as_matrix());
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= cfg.cholesky_pivot_tol * (1.0 + scale))
      throw NotPositiveDefiniteError("cholesky: non-positive pivot at column " +
                                     std::to_string(j));
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

double condition_estimate(const Matrix& m, const NumericConfig& cfg) {
  SymMatrix mtm = SymMatrix::from(transpose(m) * m);
  EigDecomp d = sym_eig(mtm, cfg);
  double lo = std::max(d.eigenvalues.front(), 0.0);
  double hi = std::max(d.eigenvalues.back(), 0.0);
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(hi / lo);
}

Matrix solve(const Matrix& m, const Matrix& rhs, const NumericConfig& cfg) {
  if (m.rows() != m.cols()) throw ModelError("solve: matrix not square");
  if (m.rows() != rhs.rows()) throw ModelError("solve: rhs shape mismatch");
  const std::size_t n = m.rows();

  if (condition_estimate(m, cfg) > cfg.condition_limit)
    throw SingularMatrixError("solve: matrix singular or ill-conditioned");

  Matrix a = m;
  Matrix x = rhs;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
    if (std::abs(a(piv, col)) < 1e-300)
      throw SingularMatrixError("solve: zero pivot");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
      for (std::size_t j = 0; j < x.cols(); ++j) std::swap(x(col, j), x(piv, j));
    }
    for (std::size_t i = col + 1; i < n; ++i) {
      double f = a(i, col) / a(col, col);
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) a(i, j) -= f * a(col, j);
      for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= f * x(col, j);
    }
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double s = x(ii, j);
      for (std::size_t k = ii + 1; k < n; ++k) s -= a(ii, k) * x(k, j);
      x(ii, j) = s / a(ii, ii);
    }
  }

  double res = frobenius_norm(m * x - rhs);
  if (!(res <= cfg.solve_residual_tol * (1.0 + frobenius_norm(rhs))))
    throw NumericalError("solve: residual too large");
  return x;
}

Matrix inverse(const Matrix& m, const NumericConfig& cfg) {
  return solve(m, Matrix::identity(m.rows()), cfg);
}

SymMatrix psd_project(const SymMatrix& m, const NumericConfig& cfg) {
  EigDecomp d = sym_eig(m, cfg);
  const std::size_t n = m.dim();
  Matrix r(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    double lam = std::max(d.eigenvalues[k], 0.0);
    if (lam == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        r(i, j) += lam * d.eigenvectors(i, k) * d.eigenvectors(j, k);
  }
  return SymMatrix::from(r);
}

MaxEig max_eig(const SymMatrix& m, const NumericConfig& cfg) {
  EigDecomp d = sym_eig(m, cfg);
  const std::size_t n = m.dim();
  MaxEig r;
  r.value = d.eigenvalues.back();
  r.vector.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.vector[i] = d.eigenvectors(i, n - 1);
  return r;
}

double min_eigenvalue(const SymMatrix& m, const NumericConfig& cfg) {
  return sym_eig(m, cfg).eigenvalues.front();
}

double spectral_radius(const Matrix& m, int squarings) {
  if (m.rows() != m.cols()) throw ModelError("spectral_radius: not square");
  Matrix p = m;
  double log_scale = 0.0;
  double k = 1.0;
  for (int s = 0; s < squarings; ++s) {
    double nrm = frobenius_norm(p);
    if (nrm == 0.0) return 0.0;
    p = (1.0 / nrm) * p;
    log_scale = log_scale + std::log(nrm) / k;
    p = p * p;
    k *= 2.0;
  }
  double nrm = frobenius_norm(p);
  if (nrm == 0.0) return 0.0;
  return std::exp(log_scale + std::log(nrm) / k);
}

}  // namespace safeinit::linalg
