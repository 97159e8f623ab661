#pragma once

// Spin-1/2 many-body operators of the open rational Richardson-Gaudin model:
// the Hamiltonian with the environment (pair exchange) term, the
// nine-parameter conserved family obtained from the transfer matrix, the
// reduced family tau_j^*, the gauge chain relating them, and dense exact
// diagonalisation.

#include <cstdint>
#include <optional>
#include <vector>

#include "openrg/algebra.hpp"
#include "openrg/spin.hpp"

namespace openrg {

struct ModelParams {
  int length = 0;
  std::vector<double> z;  // couplings z_j = 1 / eps_j
  double G = 1.0;         // pairing strength
  double Gamma = 0.0;     // environment coupling

  double alpha() const { return 1.0 / G; }
  double gamma() const { return 2.0 * Gamma / G; }
  double lambda() const { return -gamma(); }

  std::vector<Complex> eps() const;
  /// Throws DomainError naming the violated invariant.
  void validate(int cap = kDefaultLengthCap) const;
  ChainSpec chain(Complex eta = 0.0) const;
  /// beta = psi = phi = delta = mu = xi = 0 with alpha, gamma, lambda as derived.
  EtaExpansion expansion() const;
};

/// Boundary data surviving once K^- is diagonal (psi = phi = delta = mu = 0).
struct DiagonalBoundary {
  Complex xi, alpha, gamma, lambda;
};

ManyBodyOperator hamiltonian(const ModelParams& params);

/// Nine-parameter conserved operator tau_j, term for term.
ManyBodyOperator tau_general(int j, const ChainSpec& chain, const EtaExpansion& ep);

/// tau_j^* for arbitrary inhomogeneities and boundary coefficients.
ManyBodyOperator tau_star(int j, const std::vector<Complex>& eps, Complex alpha, Complex gamma,
                          Complex lambda);
ManyBodyOperator tau_star(int j, const ModelParams& params);

// Stages of the reduction from tau_j (diagonal K^-) to tau_j^*.
/// eps_j tau_j / ((eps_j - xi)(eps_j + xi)), including its identity terms.
ManyBodyOperator tau_semi_diagonal(int j, const std::vector<Complex>& eps, const DiagonalBoundary& b);
/// tau_semi_diagonal without the identity terms.
ManyBodyOperator tau_gauge_stage1(int j, const std::vector<Complex>& eps, const DiagonalBoundary& b);
/// Closed form of U tau^(1) U^-1.
ManyBodyOperator tau_gauge_stage2(int j, const std::vector<Complex>& eps, const DiagonalBoundary& b);
/// (eps_j^2 - xi^2) / eps_j^2 * tau^(2).
ManyBodyOperator tau_gauge_stage3(int j, const std::vector<Complex>& eps, const DiagonalBoundary& b);

/// U op U^-1 with U = prod_j diag(sqrt((eps_j + xi)/(eps_j - xi)), 1) in (up, down).
ManyBodyOperator gauge_transform(const ManyBodyOperator& op, Complex xi,
                                 const std::vector<Complex>& eps);

struct SpectrumOptions {
  std::uint64_t seed = 1;
  /// Relative gap (in units of ||op||) below which eigenvalues form a cluster.
  double cluster_tol = 1e-8;
};

struct SpectrumResult {
  RVector eigenvalues;         // ascending
  CMatrix eigenvectors;        // orthonormal columns
  CMatrix conserved;           // conserved(m, j) = <v_m| tau_j |v_m>
  int clusters_refined = 0;
};

/// Hermitian eigendecomposition. Degenerate clusters are re-diagonalised with
/// a seeded random real combination of `commuting_set`, giving a joint basis.
SpectrumResult exact_spectrum(const ManyBodyOperator& op,
                              const std::vector<ManyBodyOperator>& commuting_set = {},
                              const SpectrumOptions& options = {});

struct JointSpectrum {
  CMatrix eigenvectors;  // unit-norm columns
  CMatrix eigenvalues;   // eigenvalues(m, j) for ops[j]
};

/// Joint eigenbasis of a commuting, not necessarily normal family, from the
/// eigenvectors of a seeded random combination.
JointSpectrum joint_spectrum(const std::vector<ManyBodyOperator>& ops, std::uint64_t seed = 1);

struct QuasiClassicalResult {
  ManyBodyOperator extrapolated;  // eta -> 0 limit of the pole coefficient
  ManyBodyOperator expected;      // tau_general
  double residual = 0.0;          // relative Frobenius difference
};

/// Residue of t(u) at u = eps_j, from a 4-point circle of radius `radius`.
CMatrix transfer_pole_residue(int j, const ChainSpec& chain, const BoundaryParams& bp,
                              double radius = 1e-4);

/// Extracts lim (u - eps_j) t(u) / eta^2 at each eta sample and extrapolates
/// polynomially to eta = 0, comparing against tau_general.
QuasiClassicalResult quasiclassical_check(int j, const std::vector<Complex>& eps,
                                          const EtaExpansion& ep,
                                          const std::vector<double>& eta_samples);

}  // namespace openrg
