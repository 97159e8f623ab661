#include "openrg/manybody.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "openrg/errors.hpp"

namespace openrg {

namespace {

constexpr SpinOp Sp = SpinOp::Plus;
constexpr SpinOp Sm = SpinOp::Minus;
constexpr SpinOp Sz = SpinOp::Z;

void require_index(int j, int length) {
  if (j < 1 || j > length) {
    throw DomainError("operator index " + std::to_string(j) + " outside [1, " +
                      std::to_string(length) + "]");
  }
}

void require_distinct_squares(const std::vector<Complex>& eps) {
  for (std::size_t j = 0; j < eps.size(); ++j) {
    if (std::abs(eps[j]) < kPoleGuard) throw DomainError("inhomogeneities must be nonzero");
    for (std::size_t k = j + 1; k < eps.size(); ++k) {
      if (std::abs(eps[j] * eps[j] - eps[k] * eps[k]) < kPoleGuard) {
        throw DomainError("eps_j^2 must be distinct (eps_" + std::to_string(j + 1) + ", eps_" +
                          std::to_string(k + 1) + ")");
      }
    }
  }
}

}  // namespace

std::vector<Complex> ModelParams::eps() const {
  std::vector<Complex> out;
  out.reserve(z.size());
  for (double zj : z) out.emplace_back(1.0 / zj);
  return out;
}

void ModelParams::validate(int cap) const {
  if (length < 1) throw DomainError("model length must be positive");
  if (length > cap) {
    throw DomainError("model length " + std::to_string(length) + " exceeds the cap " +
                      std::to_string(cap));
  }
  if (static_cast<int>(z.size()) != length) {
    throw DomainError("expected " + std::to_string(length) + " couplings z, got " +
                      std::to_string(z.size()));
  }
  for (int j = 0; j < length; ++j) {
    if (!(z[j] > 0.0) || !std::isfinite(z[j])) {
      throw DomainError("couplings must be positive and finite: z_" + std::to_string(j + 1));
    }
    for (int k = j + 1; k < length; ++k) {
      if (std::abs(z[j] - z[k]) < kPoleGuard) {
        throw DomainError("couplings must be distinct (equivalently eps_j != eps_k): z_" +
                          std::to_string(j + 1) + " == z_" + std::to_string(k + 1));
      }
    }
  }
  if (G == 0.0 || !std::isfinite(G)) throw DomainError("pairing strength G must be nonzero");
  if (!std::isfinite(Gamma)) throw DomainError("environment coupling Gamma must be finite");
}

ChainSpec ModelParams::chain(Complex eta) const { return ChainSpec{length, eps(), eta}; }

EtaExpansion ModelParams::expansion() const {
  return EtaExpansion{0.0, 0.0, 0.0, alpha(), 0.0, gamma(), 0.0, lambda(), 0.0};
}

ManyBodyOperator hamiltonian(const ModelParams& params) {
  params.validate(62);
  const int n = params.length;
  const auto& z = params.z;
  OperatorBuilder h(n);
  for (int k = 1; k <= n; ++k) {
    h.add(z[k - 1] * z[k - 1], {{Sz, k}});
    h.add(params.Gamma * z[k - 1], {{Sp, k}});
    h.add(params.Gamma * z[k - 1], {{Sm, k}});
    for (int j = 1; j <= n; ++j) {
      if (j != k) h.add(-params.G * z[k - 1] * z[j - 1], {{Sp, k}, {Sm, j}});
    }
  }
  return std::move(h).build();
}

ManyBodyOperator tau_general(int j, const ChainSpec& chain, const EtaExpansion& ep) {
  chain.validate();
  require_index(j, chain.length);
  const auto& e = chain.eps;
  const Complex ej = e[j - 1];
  const Complex xi = ep.xi, psi = ep.psi, phi = ep.phi;
  const Complex ab = ep.alpha + ep.beta;
  const Complex gd = ep.gamma - ep.delta;
  const Complex lm = ep.lambda - ep.mu;

  OperatorBuilder t(chain.length);
  const Complex exchange = (1.0 + psi * phi) * ej * ej - xi * xi;
  for (int k = 1; k <= chain.length; ++k) {
    if (k == j) continue;
    const Complex c = exchange / (ej - e[k - 1]);
    t.add(2.0 * c, {{Sz, j}, {Sz, k}});
    t.add(c, {{Sp, j}, {Sm, k}});
    t.add(c, {{Sm, j}, {Sp, k}});
  }
  for (int k = 1; k <= chain.length; ++k) {
    const Complex d = 1.0 / (ej + e[k - 1]);
    t.add(d * 2.0 * (ej + xi) * (ej - xi), {{Sz, j}, {Sz, k}});
    t.add(-d * (ej - xi) * (ej - xi), {{Sp, j}, {Sm, k}});
    t.add(-d * (ej + xi) * (ej + xi), {{Sm, j}, {Sp, k}});
    t.add(d * 2.0 * psi * ej * (ej + xi), {{Sz, j}, {Sp, k}});
    t.add(d * 2.0 * psi * ej * (ej - xi), {{Sp, j}, {Sz, k}});
    t.add(d * 2.0 * phi * ej * (ej + xi), {{Sm, j}, {Sz, k}});
    t.add(d * 2.0 * phi * ej * (ej - xi), {{Sz, j}, {Sm, k}});
    t.add(d * ej * ej * psi * psi, {{Sp, j}, {Sp, k}});
    t.add(d * ej * ej * phi * phi, {{Sm, j}, {Sm, k}});
    t.add(-d * 2.0 * psi * phi * ej * ej, {{Sz, j}, {Sz, k}});
  }
  t.add(2.0 * ab * ej - 2.0 * xi + psi * lm * ej * ej - phi * gd * ej * ej, {{Sz, j}});
  t.add(psi * ab * ej - xi * gd * ej - psi * xi + gd * ej * ej, {{Sp, j}});
  t.add(phi * ab * ej - xi * lm * ej - phi * xi - lm * ej * ej, {{Sm, j}});
  return std::move(t).build();
}

ManyBodyOperator tau_star(int j, const std::vector<Complex>& eps, Complex alpha, Complex gamma,
                          Complex lambda) {
  const int n = static_cast<int>(eps.size());
  require_index(j, n);
  require_distinct_squares(eps);
  const Complex ej = eps[j - 1];
  OperatorBuilder t(n);
  for (int k = 1; k <= n; ++k) {
    if (k == j) continue;
    const Complex ek = eps[k - 1];
    const Complex den = ej * ej - ek * ek;
    t.add(4.0 * ej * ej / den, {{Sz, j}, {Sz, k}});
    t.add(2.0 * ej * ek / den, {{Sp, j}, {Sm, k}});
    t.add(2.0 * ej * ek / den, {{Sm, j}, {Sp, k}});
  }
  t.add(2.0 * alpha, {{Sz, j}});
  t.add(gamma * ej, {{Sp, j}});
  t.add(-lambda * ej, {{Sm, j}});
  return std::move(t).build();
}

ManyBodyOperator tau_star(int j, const ModelParams& params) {
  params.validate(62);
  return tau_star(j, params.eps(), params.alpha(), params.gamma(), params.lambda());
}

ManyBodyOperator tau_gauge_stage1(int j, const std::vector<Complex>& eps, const DiagonalBoundary& b) {
  const int n = static_cast<int>(eps.size());
  require_index(j, n);
  require_distinct_squares(eps);
  const Complex ej = eps[j - 1], xi = b.xi;
  if (std::abs(ej * ej - xi * xi) < kPoleGuard) throw DomainError("eps_j = +-xi");
  OperatorBuilder t(n);
  for (int k = 1; k <= n; ++k) {
    if (k == j) continue;
    const Complex ek = eps[k - 1];
    const Complex den = ej * ej - ek * ek;
    t.add(4.0 * ej * ej / den, {{Sz, j}, {Sz, k}});
    t.add(2.0 * ej * ej / den * (ek + xi) / (ej + xi), {{Sp, j}, {Sm, k}});
    t.add(2.0 * ej * ej / den * (ek - xi) / (ej - xi), {{Sm, j}, {Sp, k}});
  }
  t.add(2.0 * b.alpha * ej * ej / (ej * ej - xi * xi), {{Sz, j}});
  t.add(b.gamma * ej * ej / (ej + xi), {{Sp, j}});
  t.add(-b.lambda * ej * ej / (ej - xi), {{Sm, j}});
  return std::move(t).build();
}

ManyBodyOperator tau_semi_diagonal(int j, const std::vector<Complex>& eps, const DiagonalBoundary& b) {
  ManyBodyOperator t = tau_gauge_stage1(j, eps, b);
  const Complex ej = eps[j - 1], xi = b.xi;
  const Complex shift = 0.25 - 0.5 * (ej * ej + xi * xi) / (ej * ej - xi * xi);
  t.matrix.diagonal().array() += shift;
  return t;
}

ManyBodyOperator tau_gauge_stage2(int j, const std::vector<Complex>& eps, const DiagonalBoundary& b) {
  const int n = static_cast<int>(eps.size());
  require_index(j, n);
  require_distinct_squares(eps);
  const Complex ej = eps[j - 1], xi = b.xi;
  const Complex root_j = principal_sqrt(ej * ej - xi * xi);
  if (std::abs(root_j) < kPoleGuard) throw DomainError("eps_j = +-xi");
  OperatorBuilder t(n);
  for (int k = 1; k <= n; ++k) {
    if (k == j) continue;
    const Complex ek = eps[k - 1];
    const Complex den = ej * ej - ek * ek;
    const Complex hop = 2.0 * ej * ej / den * principal_sqrt(ek * ek - xi * xi) / root_j;
    t.add(4.0 * ej * ej / den, {{Sz, j}, {Sz, k}});
    t.add(hop, {{Sp, j}, {Sm, k}});
    t.add(hop, {{Sm, j}, {Sp, k}});
  }
  t.add(2.0 * b.alpha * ej * ej / (ej * ej - xi * xi), {{Sz, j}});
  t.add(b.gamma * ej * ej / root_j, {{Sp, j}});
  t.add(-b.lambda * ej * ej / root_j, {{Sm, j}});
  return std::move(t).build();
}

ManyBodyOperator tau_gauge_stage3(int j, const std::vector<Complex>& eps, const DiagonalBoundary& b) {
  ManyBodyOperator t = tau_gauge_stage2(j, eps, b);
  const Complex ej = eps[j - 1];
  t.matrix *= (ej * ej - b.xi * b.xi) / (ej * ej);
  return t;
}

ManyBodyOperator gauge_transform(const ManyBodyOperator& op, Complex xi,
                                 const std::vector<Complex>& eps) {
  const int n = static_cast<int>(eps.size());
  if (op.aux_factors != 0 || op.length != n) {
    throw DomainError("gauge_transform: operator and chain lengths differ");
  }
  std::vector<Complex> g(n);
  for (int j = 0; j < n; ++j) {
    if (std::abs(eps[j] - xi) < kPoleGuard || std::abs(eps[j] + xi) < kPoleGuard) {
      throw DomainError("gauge_transform: eps_" + std::to_string(j + 1) + " = +-xi");
    }
    g[j] = principal_sqrt((eps[j] + xi) / (eps[j] - xi));
  }
  const Eigen::Index dim = op.dim();
  CVector weight(dim);
  for (Eigen::Index b = 0; b < dim; ++b) {
    Complex w = 1.0;
    for (int j = 0; j < n; ++j) {
      if (b & (Eigen::Index{1} << j)) w *= g[j];
    }
    weight(b) = w;
  }
  ManyBodyOperator out = op;
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) out.matrix(r, c) *= weight(r) / weight(c);
  }
  return out;
}

SpectrumResult exact_spectrum(const ManyBodyOperator& op,
                              const std::vector<ManyBodyOperator>& commuting_set,
                              const SpectrumOptions& options) {
  if (!op.is_hermitian(1e-12)) {
    throw DomainError("exact_spectrum: operator is not Hermitian");
  }
  SpectrumResult result;
  if (op.matrix.imag().isZero(0.0)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.matrix.real());
    result.eigenvalues = solver.eigenvalues();
    result.eigenvectors = solver.eigenvectors().cast<Complex>();
  } else {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(op.matrix);
    result.eigenvalues = solver.eigenvalues();
    result.eigenvectors = solver.eigenvectors();
  }

  const Eigen::Index dim = op.dim();
  const double scale = std::max(result.eigenvalues.cwiseAbs().maxCoeff(), 1e-300);
  if (!commuting_set.empty()) {
    std::mt19937_64 gen(options.seed);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    CMatrix mix = CMatrix::Zero(dim, dim);
    for (const auto& t : commuting_set) mix += coeff(gen) * t.matrix;

    Eigen::Index start = 0;
    while (start < dim) {
      Eigen::Index stop = start + 1;
      while (stop < dim &&
             result.eigenvalues(stop) - result.eigenvalues(stop - 1) < options.cluster_tol * scale) {
        ++stop;
      }
      const Eigen::Index size = stop - start;
      if (size > 1) {
        const CMatrix block = result.eigenvectors.middleCols(start, size);
        CMatrix reduced = block.adjoint() * mix * block;
        reduced = 0.5 * (reduced + reduced.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<CMatrix> inner(reduced);
        result.eigenvectors.middleCols(start, size) = block * inner.eigenvectors();
        ++result.clusters_refined;
      }
      start = stop;
    }
  }

  result.conserved = CMatrix::Zero(dim, static_cast<Eigen::Index>(commuting_set.size()));
  for (std::size_t j = 0; j < commuting_set.size(); ++j) {
    const CMatrix tv = commuting_set[j].matrix * result.eigenvectors;
    result.conserved.col(static_cast<Eigen::Index>(j)) =
        (result.eigenvectors.conjugate().cwiseProduct(tv)).colwise().sum().transpose();
  }
  return result;
}

JointSpectrum joint_spectrum(const std::vector<ManyBodyOperator>& ops, std::uint64_t seed) {
  if (ops.empty()) throw DomainError("joint_spectrum needs at least one operator");
  const Eigen::Index dim = ops.front().dim();
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  CMatrix mix = CMatrix::Zero(dim, dim);
  for (const auto& t : ops) mix += coeff(gen) * t.matrix;

  Eigen::ComplexEigenSolver<CMatrix> solver(mix);
  JointSpectrum out;
  out.eigenvectors = solver.eigenvectors();
  out.eigenvectors.colwise().normalize();
  out.eigenvalues = CMatrix(dim, static_cast<Eigen::Index>(ops.size()));
  for (std::size_t j = 0; j < ops.size(); ++j) {
    const CMatrix tv = ops[j].matrix * out.eigenvectors;
    out.eigenvalues.col(static_cast<Eigen::Index>(j)) =
        (out.eigenvectors.conjugate().cwiseProduct(tv)).colwise().sum().transpose();
  }
  return out;
}

CMatrix transfer_pole_residue(int j, const ChainSpec& chain, const BoundaryParams& bp, double radius) {
  require_index(j, chain.length);
  const Complex centre = chain.eps[j - 1];
  const Complex unit[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
  CMatrix acc;
  for (const Complex w : unit) {
    const Complex offset = radius * w;
    CMatrix term = offset * transfer_matrix(centre + offset, chain, bp).matrix;
    if (acc.size() == 0) {
      acc = std::move(term);
    } else {
      acc += term;
    }
  }
  return acc / 4.0;
}

QuasiClassicalResult quasiclassical_check(int j, const std::vector<Complex>& eps,
                                          const EtaExpansion& ep,
                                          const std::vector<double>& eta_samples) {
  if (eta_samples.size() < 2) {
    throw DomainError("quasiclassical_check needs at least two eta samples");
  }
  for (std::size_t a = 0; a < eta_samples.size(); ++a) {
    const double eta = eta_samples[a];
    if (!(eta > 0.0) || eta > 0.1) {
      throw DomainError("eta samples must lie in (0, 0.1], got " + std::to_string(eta));
    }
    for (std::size_t b = a + 1; b < eta_samples.size(); ++b) {
      if (eta_samples[b] == eta) throw DomainError("eta samples must be distinct");
    }
  }
  const int n = static_cast<int>(eps.size());
  ChainSpec chain{n, eps, 0.0};
  chain.validate();
  require_index(j, n);

  // C(eta) is a polynomial of degree <= 2L + 2, so averaging over a circle of
  // 2L + 4 points in the complex eta plane with radius eta_s returns C(0) up to
  // rounding. The per-radius estimates are then extrapolated as before.
  const int points = 2 * n + 4;
  const double pi = std::acos(-1.0);
  std::vector<CMatrix> coeffs;
  for (const double radius : eta_samples) {
    CMatrix acc;
    for (int m = 0; m < points; ++m) {
      const Complex eta = std::polar(radius, 2.0 * pi * (m + 0.5) / points);
      chain.eta = eta;
      CMatrix term = transfer_pole_residue(j, chain, ep.at(eta)) / (eta * eta);
      if (acc.size() == 0) {
        acc = std::move(term);
      } else {
        acc += term;
      }
    }
    coeffs.push_back(acc / static_cast<double>(points));
  }
  // Lagrange extrapolation of the sampled coefficients to eta = 0.
  CMatrix limit = CMatrix::Zero(coeffs.front().rows(), coeffs.front().cols());
  for (std::size_t a = 0; a < eta_samples.size(); ++a) {
    double weight = 1.0;
    for (std::size_t b = 0; b < eta_samples.size(); ++b) {
      if (b != a) weight *= eta_samples[b] / (eta_samples[b] - eta_samples[a]);
    }
    limit += weight * coeffs[a];
  }
  chain.eta = 0.0;
  QuasiClassicalResult out{ManyBodyOperator{limit, n, 0}, tau_general(j, chain, ep), 0.0};
  out.residual = relative_difference(out.extrapolated.matrix, out.expected.matrix);
  return out;
}

}  // namespace openrg
