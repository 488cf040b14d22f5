#pragma once

#include <cstddef>
#include <vector>

#include "tpc/common.hpp"

namespace tpc {

/// Dense row-major matrix of doubles. Deliberately minimal: the network code
/// needs products, transposed products and elementwise work, nothing more.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major, rows*cols entries

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
  }
};

/// y = M x; x.size() must equal M.cols.
std::vector<double> matvec(const Matrix& m, const std::vector<double>& x);

/// y = M^T x; x.size() must equal M.rows.
std::vector<double> matvec_transposed(const Matrix& m, const std::vector<double>& x);

/// M += a * b^T (outer product accumulate).
void add_outer(Matrix& m, const std::vector<double>& a, const std::vector<double>& b);

}  // namespace tpc
