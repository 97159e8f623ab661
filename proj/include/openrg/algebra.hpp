#pragma once

// Boundary inverse-scattering building blocks for the rational (XXX) R-matrix:
// R, the two K-matrices, the spin-1/2 Lax operator, single- and double-row
// monodromies, the double-row transfer matrix, and residual checks for the
// algebraic identities they satisfy.
//
// K-matrices and the transfer matrix are in the shifted convention
// (u -> u - eta/2, eps_j -> eps_j - eta/2). The unshifted K-matrices are only
// used by the reflection-equation residuals.

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "openrg/linalg.hpp"
#include "openrg/spin.hpp"

namespace openrg {

inline constexpr double kPoleGuard = 1e-8;

struct ChainSpec {
  int length = 0;
  std::vector<Complex> eps;  // inhomogeneities eps_1..eps_L
  Complex eta{0.0, 0.0};

  /// Throws DomainError naming the violated invariant.
  void validate() const;
  /// validate() plus eta != 0.
  void validate_full_eta() const;

  ChainSpec negated() const;
};

struct BoundaryParams {
  Complex xi_minus, psi_minus, phi_minus;
  Complex xi_plus, psi_plus, phi_plus;

  /// psi <-> phi on both boundaries (the transpose of each K-matrix).
  BoundaryParams transposed() const;
};

/// Coefficients of the linear eta-dependence of the boundary parameters.
struct EtaExpansion {
  Complex xi, psi, phi, alpha, beta, gamma, delta, lambda, mu;

  /// Throws DomainError if psi*phi + 1 == 0.
  void validate() const;
  BoundaryParams at(Complex eta) const;
  /// psi <-> phi, gamma <-> lambda, delta <-> mu.
  EtaExpansion swapped() const;
};

/// Dense complex matrix on 1, 2 or 3 auxiliary qubits.
class AuxMatrix {
 public:
  explicit AuxMatrix(CMatrix m);
  const CMatrix& matrix() const { return m_; }
  Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  CMatrix m_;
};

AuxMatrix r_matrix(Complex u, Complex eta);
AuxMatrix permutation_matrix();

AuxMatrix k_minus(Complex u, const BoundaryParams& bp, Complex eta);
AuxMatrix k_plus(Complex u, const BoundaryParams& bp, Complex eta);
AuxMatrix k_minus_unshifted(Complex u, const BoundaryParams& bp);
AuxMatrix k_plus_unshifted(Complex u, const BoundaryParams& bp, Complex eta);

/// The four N x N blocks of a Lax operator, indexed [2*row + col] of the
/// auxiliary matrix.
using AuxBlocks = std::array<CMatrix, 4>;

AuxBlocks lax_blocks(Complex u, int site, const ChainSpec& chain);

/// L_{aj}(u) on auxiliary (x) physical space, dimension 2 * 2^L.
ManyBodyOperator lax(Complex u, int site, const ChainSpec& chain);

/// Embeds an operator on (aux (x) physical) into slot `slot` of `n_aux`
/// auxiliary factors.
CMatrix lift_aux(const CMatrix& aux_times_phys, int slot, int n_aux);

/// T_a(u) = L_{aL}(u - eps_L) ... L_{a1}(u - eps_1).
CMatrix monodromy(Complex u, const ChainSpec& chain);
/// L_{a1}(u + eps_1) ... L_{aL}(u + eps_L).
CMatrix dual_monodromy(Complex u, const ChainSpec& chain);
/// T(u) K^-(u) T~(u) as a dense (2N x 2N) matrix.
CMatrix double_row_monodromy(Complex u, const ChainSpec& chain, const BoundaryParams& bp);

/// t(u) = tr_a K^+(u) T(u) K^-(u) T~(u), built by O(L 4^L) sparse updates.
ManyBodyOperator transfer_matrix(Complex u, const ChainSpec& chain, const BoundaryParams& bp);

/// Throws DomainError if u is within kPoleGuard of 0 or +-eps_j.
void check_spectral_point(Complex u, const ChainSpec& chain);

using RMatrixFn = std::function<AuxMatrix(Complex u, Complex eta)>;

// Relative Frobenius residuals of the algebraic identities.
double ybe_residual(Complex u, Complex v, Complex eta, const RMatrixFn& r = r_matrix);
double reflection_minus_residual(Complex u, Complex v, const BoundaryParams& bp, Complex eta);
double reflection_plus_residual(Complex u, Complex v, const BoundaryParams& bp, Complex eta);
double rll_residual(Complex u, Complex v, int site, const ChainSpec& chain);
double lax_inverse_residual(Complex u, int site, const ChainSpec& chain);
double rtt_residual(Complex u, Complex v, const ChainSpec& chain);
double rtrt_residual(Complex u, Complex v, const ChainSpec& chain, const BoundaryParams& bp);
double transfer_commutator_residual(Complex u, Complex v, const ChainSpec& chain,
                                    const BoundaryParams& bp);
/// || t(u, eps) - t(u, -eps)^T |_{psi <-> phi} || relative.
double transfer_transpose_residual(Complex u, const ChainSpec& chain, const BoundaryParams& bp);

struct ResidualRow {
  std::string name;
  double residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct StructureReport {
  std::vector<ResidualRow> rows;
  bool pass = false;
};

struct StructureOptions {
  /// Added to R(u)(0,0) in the Yang-Baxter check only; fault injection.
  double r_perturbation = 0.0;
};

/// Pure-algebra identity threshold for a chain of the given length.
double identity_threshold(int length);

StructureReport structure_report(const ChainSpec& chain, const BoundaryParams& bp,
                                 const std::vector<std::pair<Complex, Complex>>& samples,
                                 const StructureOptions& options = {});

}  // namespace openrg
