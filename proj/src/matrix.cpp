#include "tpc/matrix.hpp"

namespace tpc {

std::vector<double> matvec(const Matrix& m, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != m.cols) {
    throw Error(Errc::ShapeMismatch, "matvec: vector length != cols");
  }
  std::vector<double> y(static_cast<std::size_t>(m.rows), 0.0);
  const double* row = m.data.data();
  for (int r = 0; r < m.rows; ++r, row += m.cols) {
    double acc = 0.0;
    for (int c = 0; c < m.cols; ++c) acc += row[c] * x[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(r)] = acc;
  }
  return y;
}

std::vector<double> matvec_transposed(const Matrix& m, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != m.rows) {
    throw Error(Errc::ShapeMismatch, "matvec_transposed: vector length != rows");
  }
  std::vector<double> y(static_cast<std::size_t>(m.cols), 0.0);
  const double* row = m.data.data();
  for (int r = 0; r < m.rows; ++r, row += m.cols) {
    const double xr = x[static_cast<std::size_t>(r)];
    for (int c = 0; c < m.cols; ++c) y[static_cast<std::size_t>(c)] += row[c] * xr;
  }
  return y;
}

void add_outer(Matrix& m, const std::vector<double>& a, const std::vector<double>& b) {
  if (static_cast<int>(a.size()) != m.rows || static_cast<int>(b.size()) != m.cols) {
    throw Error(Errc::ShapeMismatch, "add_outer: shape mismatch");
  }
  double* row = m.data.data();
  for (int r = 0; r < m.rows; ++r, row += m.cols) {
    const double ar = a[static_cast<std::size_t>(r)];
    for (int c = 0; c < m.cols; ++c) row[c] += ar * b[static_cast<std::size_t>(c)];
  }
}

}  // namespace tpc
