#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace bregdistill {

using Vec = std::vector<double>;

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, Vec data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  Matrix transpose() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Vec operator*(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
// Throws DomainError if the matrix is not positive definite.
Matrix cholesky(const Matrix& spd);

// Solves L y = b for lower-triangular L.
Vec forward_substitute(const Matrix& lower, std::span<const double> b);
// Solves L^T x = y for lower-triangular L.
Vec back_substitute_transposed(const Matrix& lower, std::span<const double> y);

double determinant(const Matrix& square);
Matrix inverse(const Matrix& square);

}  // namespace bregdistill
