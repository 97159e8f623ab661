#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace openrg {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Kronecker product a (x) b, with a as the more significant factor.
CMatrix kron(const CMatrix& a, const CMatrix& b);

CMatrix identity(Eigen::Index n);

/// ||a - b||_F / max(||a||_F, ||b||_F); zero when both vanish.
double relative_difference(const CMatrix& a, const CMatrix& b);

/// ||ab - ba||_F
double commutator_norm(const CMatrix& a, const CMatrix& b);

/// Frobenius norm of [a, b] scaled by ||a||_F ||b||_F.
double relative_commutator(const CMatrix& a, const CMatrix& b);

/// Partial trace over the leading 2-dim factor of a (2n x 2n) matrix.
CMatrix trace_leading_qubit(const CMatrix& m);

/// Principal square root; single place so the branch choice is auditable.
inline Complex principal_sqrt(Complex z) { return std::sqrt(z); }

}  // namespace openrg
