#include "openrg/linalg.hpp"

#include <algorithm>

namespace openrg {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CMatrix identity(Eigen::Index n) { return CMatrix::Identity(n, n); }

double relative_difference(const CMatrix& a, const CMatrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  return (a - b).norm() / scale;
}

double commutator_norm(const CMatrix& a, const CMatrix& b) {
  return (a * b - b * a).norm();
}

double relative_commutator(const CMatrix& a, const CMatrix& b) {
  const double scale = a.norm() * b.norm();
  if (scale == 0.0) return 0.0;
  return commutator_norm(a, b) / scale;
}

CMatrix trace_leading_qubit(const CMatrix& m) {
  const Eigen::Index n = m.rows() / 2;
  return m.topLeftCorner(n, n) + m.bottomRightCorner(n, n);
}

}  // namespace openrg
