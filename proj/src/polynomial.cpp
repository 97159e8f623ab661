#include "openrg/polynomial.hpp"

#include <algorithm>

#include <Eigen/Eigenvalues>

#include "openrg/errors.hpp"

namespace openrg::poly {

CVector from_roots(const CVector& roots) {
  CVector c = CVector::Ones(1);
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    CVector next = CVector::Zero(c.size() + 1);
    next.tail(c.size()) += c;
    next.head(c.size()) -= roots(i) * c;
    c = std::move(next);
  }
  return c;
}

Complex evaluate(const CVector& c, Complex x) {
  Complex acc = 0.0;
  for (Eigen::Index i = c.size() - 1; i >= 0; --i) acc = acc * x + c(i);
  return acc;
}

CVector derivative(const CVector& c) {
  if (c.size() <= 1) return CVector::Zero(1);
  CVector d(c.size() - 1);
  for (Eigen::Index i = 1; i < c.size(); ++i) d(i - 1) = static_cast<double>(i) * c(i);
  return d;
}

CVector multiply(const CVector& a, const CVector& b) {
  CVector out = CVector::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i, b.size()) += a(i) * b;
  return out;
}

CVector add(const CVector& a, const CVector& b) {
  CVector out = CVector::Zero(std::max(a.size(), b.size()));
  out.head(a.size()) += a;
  out.head(b.size()) += b;
  return out;
}

CVector shift(const CVector& c, int k) {
  CVector out = CVector::Zero(c.size() + k);
  out.tail(c.size()) = c;
  return out;
}

CVector trim(const CVector& c, double tol) {
  const double scale = c.cwiseAbs().maxCoeff();
  Eigen::Index n = c.size();
  while (n > 1 && std::abs(c(n - 1)) <= tol * scale) --n;
  return c.head(n);
}

CVector roots(const CVector& c) {
  const CVector p = trim(c);
  const Eigen::Index n = p.size() - 1;
  if (n == 0) {
    if (p(0) == Complex{}) throw DomainError("roots of the zero polynomial");
    return CVector(0);
  }
  CMatrix companion = CMatrix::Zero(n, n);
  companion.bottomLeftCorner(n - 1, n - 1).setIdentity();
  companion.col(n - 1) = -p.head(n) / p(n);
  Eigen::ComplexEigenSolver<CMatrix> solver(companion, false);
  CVector r = solver.eigenvalues();

  const CVector dp = derivative(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    Complex x = r(i);
    double best = std::abs(evaluate(p, x));
    for (int it = 0; it < 5 && best > 0.0; ++it) {
      const Complex slope = evaluate(dp, x);
      if (slope == Complex{}) break;
      const Complex trial = x - evaluate(p, x) / slope;
      const double value = std::abs(evaluate(p, trial));
      if (!(value < best)) break;
      x = trial;
      best = value;
    }
    r(i) = x;
  }
  return r;
}

}  // namespace openrg::poly
