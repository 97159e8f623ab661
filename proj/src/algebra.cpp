#include "openrg/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "openrg/errors.hpp"

namespace openrg {

namespace {

std::string fmt(Complex z) {
  std::ostringstream os;
  os << z;
  return os.str();
}

bool is_finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

CMatrix elementary(int row, int col) {
  CMatrix e = CMatrix::Zero(2, 2);
  e(row, col) = 1.0;
  return e;
}

// Right multiplication of a dense N x N block by single-site operators.
CMatrix times_sz(const CMatrix& m, int site) {
  CMatrix out(m.rows(), m.cols());
  const Eigen::Index bit = Eigen::Index{1} << (site - 1);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    out.col(c) = ((c & bit) ? 0.5 : -0.5) * m.col(c);
  }
  return out;
}

CMatrix times_splus(const CMatrix& m, int site) {
  CMatrix out = CMatrix::Zero(m.rows(), m.cols());
  const Eigen::Index bit = Eigen::Index{1} << (site - 1);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (!(c & bit)) out.col(c) = m.col(c | bit);
  }
  return out;
}

CMatrix times_sminus(const CMatrix& m, int site) {
  CMatrix out = CMatrix::Zero(m.rows(), m.cols());
  const Eigen::Index bit = Eigen::Index{1} << (site - 1);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (c & bit) out.col(c) = m.col(c & ~bit);
  }
  return out;
}

// M <- M * L_{aj}(u) with M stored as four auxiliary blocks.
void times_lax(AuxBlocks& m, Complex u, int site, Complex eta) {
  if (std::abs(u) < kPoleGuard) {
    throw DomainError("Lax operator evaluated at its pole (argument " + fmt(u) + ")");
  }
  const Complex c = eta / u;
  for (int x = 0; x < 2; ++x) {
    const CMatrix& a = m[2 * x];
    const CMatrix& b = m[2 * x + 1];
    const CMatrix a_sz = times_sz(a, site);
    const CMatrix b_sz = times_sz(b, site);
    CMatrix left = a + c * a_sz + c * times_splus(b, site);
    CMatrix right = c * times_sminus(a, site) + b - c * b_sz;
    m[2 * x] = std::move(left);
    m[2 * x + 1] = std::move(right);
  }
}

void times_aux(AuxBlocks& m, const AuxMatrix& k) {
  for (int x = 0; x < 2; ++x) {
    CMatrix left = m[2 * x] * k(0, 0) + m[2 * x + 1] * k(1, 0);
    CMatrix right = m[2 * x] * k(0, 1) + m[2 * x + 1] * k(1, 1);
    m[2 * x] = std::move(left);
    m[2 * x + 1] = std::move(right);
  }
}

CMatrix two_aux(const AuxMatrix& r, Eigen::Index n) { return kron(r.matrix(), identity(n)); }

double residual(const CMatrix& lhs, const CMatrix& rhs) { return relative_difference(lhs, rhs); }

void require_site(int site, const ChainSpec& chain) {
  if (site < 1 || site > chain.length) {
    throw DomainError("site index " + std::to_string(site) + " outside [1, " +
                      std::to_string(chain.length) + "]");
  }
}

}  // namespace

void ChainSpec::validate() const {
  if (length < 1) throw DomainError("chain length must be positive");
  if (static_cast<int>(eps.size()) != length) {
    throw DomainError("expected " + std::to_string(length) + " inhomogeneities, got " +
                      std::to_string(eps.size()));
  }
  for (int j = 0; j < length; ++j) {
    if (!is_finite(eps[j])) throw DomainError("inhomogeneity eps_" + std::to_string(j + 1) + " is not finite");
    if (std::abs(eps[j]) < kPoleGuard) {
      throw DomainError("inhomogeneities must be nonzero: eps_" + std::to_string(j + 1) + " = 0");
    }
    for (int k = j + 1; k < length; ++k) {
      if (std::abs(eps[j] - eps[k]) < kPoleGuard) {
        throw DomainError("inhomogeneities must be distinct: eps_" + std::to_string(j + 1) +
                          " == eps_" + std::to_string(k + 1));
      }
      if (std::abs(eps[j] + eps[k]) < kPoleGuard) {
        throw DomainError("inhomogeneities must satisfy eps_j != -eps_k: eps_" +
                          std::to_string(j + 1) + " == -eps_" + std::to_string(k + 1));
      }
    }
  }
  if (!is_finite(eta)) throw DomainError("eta is not finite");
}

void ChainSpec::validate_full_eta() const {
  validate();
  if (eta == Complex{}) throw DomainError("eta must be nonzero for full-eta objects");
}

ChainSpec ChainSpec::negated() const {
  ChainSpec out = *this;
  for (auto& e : out.eps) e = -e;
  return out;
}

BoundaryParams BoundaryParams::transposed() const {
  return {xi_minus, phi_minus, psi_minus, xi_plus, phi_plus, psi_plus};
}

void EtaExpansion::validate() const {
  if (std::abs(psi * phi + 1.0) < kPoleGuard) {
    throw DomainError("psi*phi + 1 must be nonzero (branch point of sqrt(psi*phi + 1))");
  }
}

BoundaryParams EtaExpansion::at(Complex eta) const {
  return BoundaryParams{
      -xi + eta * beta, psi + eta * delta, phi + eta * mu,
      xi + eta * alpha, psi + eta * gamma, phi + eta * lambda,
  };
}

EtaExpansion EtaExpansion::swapped() const {
  return {xi, phi, psi, alpha, beta, lambda, mu, gamma, delta};
}

AuxMatrix::AuxMatrix(CMatrix m) : m_(std::move(m)) {
  const auto d = m_.rows();
  if (m_.cols() != d || (d != 2 && d != 4 && d != 8)) {
    throw DomainError("auxiliary matrix must be 2x2, 4x4 or 8x8");
  }
}

AuxMatrix permutation_matrix() {
  CMatrix p = CMatrix::Zero(4, 4);
  p(0, 0) = p(3, 3) = p(1, 2) = p(2, 1) = 1.0;
  return AuxMatrix(p);
}

AuxMatrix r_matrix(Complex u, Complex eta) {
  return AuxMatrix(u * identity(4) + eta * permutation_matrix().matrix());
}

AuxMatrix k_minus(Complex u, const BoundaryParams& bp, Complex eta) {
  const Complex w = u - eta / 2.0;
  CMatrix k(2, 2);
  k << bp.xi_minus + w, bp.psi_minus * w, bp.phi_minus * w, bp.xi_minus - w;
  return AuxMatrix(k);
}

AuxMatrix k_plus(Complex u, const BoundaryParams& bp, Complex eta) {
  const Complex w = u + eta / 2.0;
  CMatrix k(2, 2);
  k << bp.xi_plus + w, bp.psi_plus * w, bp.phi_plus * w, bp.xi_plus - w;
  return AuxMatrix(k);
}

AuxMatrix k_minus_unshifted(Complex u, const BoundaryParams& bp) {
  return k_minus(u, bp, 0.0);
}

AuxMatrix k_plus_unshifted(Complex u, const BoundaryParams& bp, Complex eta) {
  return k_plus(u + eta / 2.0, bp, eta);
}

AuxBlocks lax_blocks(Complex u, int site, const ChainSpec& chain) {
  require_site(site, chain);
  if (std::abs(u) < kPoleGuard) {
    throw DomainError("Lax operator evaluated at its pole u = 0");
  }
  const Complex c = chain.eta / u;
  const CMatrix id = identity(static_cast<Eigen::Index>(hilbert_dim(chain.length, 62)));
  const CMatrix sz = site_operator(SpinOp::Z, site, chain.length).matrix;
  return {id + c * sz, c * site_operator(SpinOp::Minus, site, chain.length).matrix,
          c * site_operator(SpinOp::Plus, site, chain.length).matrix, id - c * sz};
}

ManyBodyOperator lax(Complex u, int site, const ChainSpec& chain) {
  const AuxBlocks b = lax_blocks(u, site, chain);
  const Eigen::Index n = b[0].rows();
  CMatrix out(2 * n, 2 * n);
  out << b[0], b[1], b[2], b[3];
  return ManyBodyOperator{std::move(out), chain.length, 1};
}

CMatrix lift_aux(const CMatrix& op, int slot, int n_aux) {
  const Eigen::Index n = op.rows() / 2;
  const Eigen::Index aux_dim = Eigen::Index{1} << n_aux;
  CMatrix out = CMatrix::Zero(aux_dim * n, aux_dim * n);
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      CMatrix aux = CMatrix::Identity(1, 1);
      for (int s = 0; s < n_aux; ++s) {
        aux = kron(aux, s == slot ? elementary(x, y) : identity(2));
      }
      out += kron(aux, op.block(x * n, y * n, n, n));
    }
  }
  return out;
}

CMatrix monodromy(Complex u, const ChainSpec& chain) {
  const auto n = static_cast<Eigen::Index>(hilbert_dim(chain.length, 62));
  CMatrix t = identity(2 * n);
  for (int j = chain.length; j >= 1; --j) t = t * lax(u - chain.eps[j - 1], j, chain).matrix;
  return t;
}

CMatrix dual_monodromy(Complex u, const ChainSpec& chain) {
  const auto n = static_cast<Eigen::Index>(hilbert_dim(chain.length, 62));
  CMatrix t = identity(2 * n);
  for (int j = 1; j <= chain.length; ++j) t = t * lax(u + chain.eps[j - 1], j, chain).matrix;
  return t;
}

CMatrix double_row_monodromy(Complex u, const ChainSpec& chain, const BoundaryParams& bp) {
  const auto n = static_cast<Eigen::Index>(hilbert_dim(chain.length, 62));
  return monodromy(u, chain) * kron(k_minus(u, bp, chain.eta).matrix(), identity(n)) *
         dual_monodromy(u, chain);
}

void check_spectral_point(Complex u, const ChainSpec& chain) {
  if (std::abs(u) < kPoleGuard) throw DomainError("spectral parameter " + fmt(u) + " at pole u = 0");
  for (int j = 0; j < chain.length; ++j) {
    if (std::abs(u - chain.eps[j]) < kPoleGuard || std::abs(u + chain.eps[j]) < kPoleGuard) {
      throw DomainError("spectral parameter " + fmt(u) + " at pole u = +-eps_" +
                        std::to_string(j + 1));
    }
  }
}

ManyBodyOperator transfer_matrix(Complex u, const ChainSpec& chain, const BoundaryParams& bp) {
  chain.validate();
  check_spectral_point(u, chain);
  const auto n = static_cast<Eigen::Index>(hilbert_dim(chain.length));
  const AuxMatrix kp = k_plus(u, bp, chain.eta);
  AuxBlocks m;
  for (int i = 0; i < 4; ++i) m[i] = kp(i / 2, i % 2) * identity(n);
  for (int j = chain.length; j >= 1; --j) times_lax(m, u - chain.eps[j - 1], j, chain.eta);
  times_aux(m, k_minus(u, bp, chain.eta));
  for (int j = 1; j <= chain.length; ++j) times_lax(m, u + chain.eps[j - 1], j, chain.eta);
  return ManyBodyOperator{m[0] + m[3], chain.length, 0};
}

double ybe_residual(Complex u, Complex v, Complex eta, const RMatrixFn& r) {
  const CMatrix i2 = identity(2);
  const CMatrix p23 = kron(i2, permutation_matrix().matrix());
  auto r12 = [&](Complex x) { return kron(r(x, eta).matrix(), i2); };
  auto r23 = [&](Complex x) { return kron(i2, r(x, eta).matrix()); };
  auto r13 = [&](Complex x) { return CMatrix(p23 * r12(x) * p23); };
  const CMatrix lhs = r12(u - v) * r13(u) * r23(v);
  const CMatrix rhs = r23(v) * r13(u) * r12(u - v);
  return residual(lhs, rhs);
}

double reflection_minus_residual(Complex u, Complex v, const BoundaryParams& bp, Complex eta) {
  const CMatrix i2 = identity(2);
  const CMatrix p = permutation_matrix().matrix();
  auto r12 = [&](Complex x) { return r_matrix(x, eta).matrix(); };
  auto r21 = [&](Complex x) { return CMatrix(p * r12(x) * p); };
  const CMatrix k1 = kron(k_minus_unshifted(u, bp).matrix(), i2);
  const CMatrix k2 = kron(i2, k_minus_unshifted(v, bp).matrix());
  const CMatrix lhs = r12(u - v) * k1 * r21(u + v) * k2;
  const CMatrix rhs = k2 * r12(u + v) * k1 * r21(u - v);
  return residual(lhs, rhs);
}

double reflection_plus_residual(Complex u, Complex v, const BoundaryParams& bp, Complex eta) {
  const CMatrix i2 = identity(2);
  const CMatrix p = permutation_matrix().matrix();
  auto r12 = [&](Complex x) { return r_matrix(x, eta).matrix(); };
  auto r21 = [&](Complex x) { return CMatrix(p * r12(x) * p); };
  const CMatrix k1 = kron(k_plus_unshifted(u, bp, eta).matrix(), i2);
  const CMatrix k2 = kron(i2, k_plus_unshifted(v, bp, eta).matrix());
  const Complex s = -u - v - 2.0 * eta;
  const CMatrix lhs = r12(v - u) * k1 * r21(s) * k2;
  const CMatrix rhs = k2 * r12(s) * k1 * r21(v - u);
  return residual(lhs, rhs);
}

double rll_residual(Complex u, Complex v, int site, const ChainSpec& chain) {
  const CMatrix la = lift_aux(lax(u, site, chain).matrix, 0, 2);
  const CMatrix lb = lift_aux(lax(v, site, chain).matrix, 1, 2);
  const CMatrix r = two_aux(r_matrix(u - v, chain.eta), la.rows() / 4);
  return residual(r * la * lb, lb * la * r);
}

double lax_inverse_residual(Complex u, int site, const ChainSpec& chain) {
  const Complex eta = chain.eta;
  const CMatrix prod = lax(u, site, chain).matrix * lax(eta - u, site, chain).matrix;
  const Complex scalar = 1.0 + eta * eta * 0.75 / (u * (eta - u));
  return residual(prod, scalar * identity(prod.rows()));
}

double rtt_residual(Complex u, Complex v, const ChainSpec& chain) {
  const CMatrix ta = lift_aux(monodromy(u, chain), 0, 2);
  const CMatrix tb = lift_aux(monodromy(v, chain), 1, 2);
  const CMatrix r = two_aux(r_matrix(u - v, chain.eta), ta.rows() / 4);
  return residual(r * ta * tb, tb * ta * r);
}

double rtrt_residual(Complex u, Complex v, const ChainSpec& chain, const BoundaryParams& bp) {
  const CMatrix ta = lift_aux(double_row_monodromy(u, chain, bp), 0, 2);
  const CMatrix tb = lift_aux(double_row_monodromy(v, chain, bp), 1, 2);
  const Eigen::Index n = ta.rows() / 4;
  const CMatrix r_diff = two_aux(r_matrix(u - v, chain.eta), n);
  // The shifted convention moves the sum argument by -eta; R_ba = R_ab here.
  const CMatrix r_sum = two_aux(r_matrix(u + v - chain.eta, chain.eta), n);
  return residual(r_diff * ta * r_sum * tb, tb * r_sum * ta * r_diff);
}

double transfer_commutator_residual(Complex u, Complex v, const ChainSpec& chain,
                                    const BoundaryParams& bp) {
  const CMatrix tu = transfer_matrix(u, chain, bp).matrix;
  const CMatrix tv = transfer_matrix(v, chain, bp).matrix;
  return relative_commutator(tu, tv);
}

double transfer_transpose_residual(Complex u, const ChainSpec& chain, const BoundaryParams& bp) {
  const CMatrix t = transfer_matrix(u, chain, bp).matrix;
  const CMatrix t_mirror = transfer_matrix(u, chain.negated(), bp.transposed()).matrix;
  return residual(t, t_mirror.transpose());
}

double identity_threshold(int length) { return length <= 4 ? 1e-12 : 1e-11; }

StructureReport structure_report(const ChainSpec& chain, const BoundaryParams& bp,
                                 const std::vector<std::pair<Complex, Complex>>& samples,
                                 const StructureOptions& options) {
  chain.validate_full_eta();
  if (samples.empty()) throw DomainError("structure_report needs at least one (u, v) sample");
  for (const auto& [u, v] : samples) {
    check_spectral_point(u, chain);
    check_spectral_point(v, chain);
    if (std::abs(chain.eta - u) < kPoleGuard) {
      throw DomainError("sample u = " + fmt(u) + " puts L(eta - u) on its pole");
    }
  }

  const RMatrixFn corrupted = [&](Complex x, Complex eta) {
    CMatrix r = r_matrix(x, eta).matrix();
    r(0, 0) += options.r_perturbation;
    return AuxMatrix(r);
  };

  const double tight = 1e-12;
  const double chain_tol = identity_threshold(chain.length);
  std::vector<ResidualRow> rows = {
      {"yang_baxter", 0.0, tight},        {"reflection_minus", 0.0, tight},
      {"reflection_plus", 0.0, tight},    {"rll", 0.0, chain_tol},
      {"lax_inverse", 0.0, chain_tol},    {"rtt", 0.0, chain_tol},
      {"rtrt", 0.0, chain_tol},           {"transfer_commutator", 0.0, chain_tol},
      {"transfer_transpose", 0.0, chain_tol},
  };
  auto bump = [&](std::size_t i, double r) { rows[i].residual = std::max(rows[i].residual, r); };

  for (const auto& [u, v] : samples) {
    bump(0, ybe_residual(u, v, chain.eta, options.r_perturbation != 0.0 ? corrupted : RMatrixFn(r_matrix)));
    bump(1, reflection_minus_residual(u, v, bp, chain.eta));
    bump(2, reflection_plus_residual(u, v, bp, chain.eta));
    for (int j = 1; j <= chain.length; ++j) {
      bump(3, rll_residual(u, v, j, chain));
      bump(4, lax_inverse_residual(u, j, chain));
    }
    bump(5, rtt_residual(u, v, chain));
    bump(6, rtrt_residual(u, v, chain, bp));
    bump(7, transfer_commutator_residual(u, v, chain, bp));
    bump(8, transfer_transpose_residual(u, chain, bp));
  }

  StructureReport report;
  report.pass = true;
  for (auto& row : rows) {
    row.pass = std::isfinite(row.residual) && row.residual < row.threshold;
    report.pass = report.pass && row.pass;
  }
  report.rows = std::move(rows);
  return report;
}

}  // namespace openrg
