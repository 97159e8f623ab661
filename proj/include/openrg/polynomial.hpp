#pragma once

// Dense univariate polynomials with complex coefficients, stored in ascending
// order: c(0) + c(1) x + ... + c(n) x^n.

#include "openrg/linalg.hpp"

namespace openrg::poly {

CVector from_roots(const CVector& roots);
Complex evaluate(const CVector& c, Complex x);
CVector derivative(const CVector& c);
CVector multiply(const CVector& a, const CVector& b);
CVector add(const CVector& a, const CVector& b);
/// Multiply by x^k.
CVector shift(const CVector& c, int k);
/// Drops trailing coefficients with |c| <= tol * max|c|.
CVector trim(const CVector& c, double tol = 0.0);

/// Roots from the eigenvalues of the companion matrix, each polished by a few
/// Newton steps on the polynomial itself. Throws DomainError for a zero
/// polynomial.
CVector roots(const CVector& c);

}  // namespace openrg::poly
