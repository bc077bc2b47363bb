#include "bregdistill/linalg.hpp"

#include <cmath>
#include <string>

#include "bregdistill/errors.hpp"

namespace bregdistill {

Matrix::Matrix(std::size_t rows, std::size_t cols, Vec data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data has " + std::to_string(data_.size()) +
                     " entries, expected " + std::to_string(rows * cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) throw ShapeError("ragged matrix initializer");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matrix product shape mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("matrix sum shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

Vec operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ShapeError("matrix-vector shape mismatch");
  Vec out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    out[i] = acc;
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot product length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Matrix cholesky(const Matrix& spd) {
  const std::size_t n = spd.rows();
  if (spd.cols() != n) throw ShapeError("cholesky of non-square matrix");
  Matrix lower(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = spd(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= lower(j, k) * lower(j, k);
    if (!(diag > 0.0)) throw DomainError("matrix is not positive definite");
    lower(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = spd(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= lower(i, k) * lower(j, k);
      lower(i, j) = v / lower(j, j);
    }
  }
  return lower;
}

Vec forward_substitute(const Matrix& lower, std::span<const double> b) {
  const std::size_t n = lower.rows();
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= lower(i, k) * y[k];
    y[i] = v / lower(i, i);
  }
  return y;
}

Vec back_substitute_transposed(const Matrix& lower, std::span<const double> y) {
  const std::size_t n = lower.rows();
  Vec x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double v = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) v -= lower(k, ii) * x[k];
    x[ii] = v / lower(ii, ii);
  }
  return x;
}

namespace {

// LU with partial pivoting; returns the determinant and fills the inverse if requested.
double lu_solve(const Matrix& square, Matrix* inverse_out) {
  const std::size_t n = square.rows();
  if (square.cols() != n) throw ShapeError("expected a square matrix");
  Matrix a = square;
  Matrix inv = Matrix::identity(n);
  double det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (a(pivot, col) == 0.0) {
      if (inverse_out) throw DomainError("matrix is singular");
      return 0.0;
    }
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a(pivot, c), a(col, c));
        std::swap(inv(pivot, c), inv(col, c));
      }
      det = -det;
    }
    const double p = a(col, col);
    det *= p;
    for (std::size_t c = 0; c < n; ++c) {
      a(col, c) /= p;
      inv(col, c) /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a(r, c) -= f * a(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  if (inverse_out) *inverse_out = std::move(inv);
  return det;
}

}  // namespace

double determinant(const Matrix& square) { return lu_solve(square, nullptr); }

Matrix inverse(const Matrix& square) {
  Matrix inv;
  lu_solve(square, &inv);
  return inv;
}

}  // namespace bregdistill
