// Linear recovery of Bethe roots from conserved-operator eigenvalues.
//
// With y_i = 1 / v_i^2 and nodes w_j = z_j^2 the eigenvalue formula fixes
// R'(w_j) / R(w_j) for the monic polynomial R with roots y_i. R is written in
// Cauchy form over the nodes, the weights follow from a linear solve, and the
// roots are the eigenvalues of an arrowhead matrix. Roots far from every node
// are extremely sensitive to the data, so the whole chain runs in quadruple
// precision and finishes with a simultaneous Newton (Aberth) polish.

#include <quadmath.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "bethe_detail.hpp"
#include "openrg/bethe.hpp"

namespace openrg {

namespace {

using qreal = __float128;
using qcomplex = __complex128;
using QVector = std::vector<qcomplex>;

qcomplex qc(qreal re, qreal im = 0) {
  qcomplex z;
  __real__ z = re;
  __imag__ z = im;
  return z;
}

qcomplex qc(Complex z) { return qc(static_cast<qreal>(z.real()), static_cast<qreal>(z.imag())); }

Complex to_complex(qcomplex z) {
  return {static_cast<double>(__real__ z), static_cast<double>(__imag__ z)};
}

qreal qabs(qcomplex z) { return cabsq(z); }

bool is_zero(qcomplex z) { return __real__ z == 0 && __imag__ z == 0; }

class QMatrix {
 public:
  QMatrix(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, qc(0)) {}
  qcomplex& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  qcomplex operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  CMatrix to_double() const {
    CMatrix m(rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) m(i, j) = to_complex((*this)(i, j));
    }
    return m;
  }

 private:
  int rows_, cols_;
  std::vector<qcomplex> a_;
};

/// Gaussian elimination with partial pivoting.
QVector solve_square(QMatrix A, QVector b) {
  const int n = A.rows();
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i) {
      if (qabs(A(i, k)) > qabs(A(p, k))) p = i;
    }
    if (is_zero(A(p, k))) throw DomainError("root reconstruction: singular system");
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(A(k, j), A(p, j));
      std::swap(b[k], b[p]);
    }
    for (int i = k + 1; i < n; ++i) {
      const qcomplex f = A(i, k) / A(k, k);
      for (int j = k; j < n; ++j) A(i, j) -= f * A(k, j);
      b[i] -= f * b[k];
    }
  }
  QVector x(n);
  for (int i = n - 1; i >= 0; --i) {
    qcomplex acc = b[i];
    for (int j = i + 1; j < n; ++j) acc -= A(i, j) * x[j];
    x[i] = acc / A(i, i);
  }
  return x;
}

qcomplex conj(qcomplex z) { return qc(__real__ z, -__imag__ z); }

/// Normal equations; quadruple precision absorbs the squared condition.
QVector least_squares(const QMatrix& A, const QVector& b) {
  const int m = A.cols();
  QMatrix N(m, m);
  QVector rhs(m, qc(0));
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < A.rows(); ++k) rhs[i] += conj(A(k, i)) * b[k];
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < A.rows(); ++k) N(i, j) += conj(A(k, i)) * A(k, j);
    }
  }
  return solve_square(N, rhs);
}

/// Roots of R_M(y) = prod_m (y - w_m) (1 + sum_m c_m / (y - w_m)).
QVector cauchy_roots(const QVector& w, const QVector& c) {
  const int m = static_cast<int>(c.size());
  CMatrix arrow(m, m);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) arrow(i, k) = -to_complex(c[i]);
    arrow(i, i) += to_complex(w[i]);
  }
  Eigen::ComplexEigenSolver<CMatrix> eig(arrow, false);
  QVector y(m);
  for (int i = 0; i < m; ++i) y[i] = qc(eig.eigenvalues()(i));

  const qreal tol = 1e-30;
  for (int sweep = 0; sweep < 100; ++sweep) {
    qreal worst = 0;
    for (int i = 0; i < m; ++i) {
      qcomplex f = qc(1), df = qc(0), log_p = qc(0), others = qc(0);
      bool on_node = false;
      for (int k = 0; k < m; ++k) {
        const qcomplex d = y[i] - w[k];
        if (is_zero(d)) on_node = true;
        if (on_node) break;
        f += c[k] / d;
        df -= c[k] / (d * d);
        log_p += qc(1) / d;
      }
      if (on_node || is_zero(f)) continue;
      for (int k = 0; k < m; ++k) {
        if (k != i && !is_zero(y[i] - y[k])) others += qc(1) / (y[i] - y[k]);
      }
      const qcomplex denom = df / f + log_p - others;
      if (is_zero(denom)) continue;
      const qcomplex step = qc(1) / denom;
      y[i] -= step;
      const qreal scale = qabs(y[i]) > 1e-300 ? qabs(y[i]) : 1;
      if (qabs(step) / scale > worst) worst = qabs(step) / scale;
    }
    if (!(worst > tol)) break;
  }
  return y;
}

qcomplex sum_over_others(int j, const QVector& e) {
  qcomplex acc = qc(0);
  for (int k = 0; k < static_cast<int>(e.size()); ++k) {
    if (k != j) acc += e[j] / (e[j] - e[k]);
  }
  return acc;
}

/// Solves R'(w_j) = t_j R(w_j) given s_j = sum_i 1 / (e_j - x_i).
Reconstruction reconstruct(const QVector& e, const QVector& s, int finite) {
  const int n = static_cast<int>(e.size());
  if (finite < 0 || finite > n) throw DomainError("finite root count outside [0, L]");
  const int m = finite;

  QVector w(n), shifted(n);
  for (int j = 0; j < n; ++j) {
    w[j] = qc(1) / e[j];
    const qcomplex t = e[j] * (qc(n) - e[j] * s[j]);
    shifted[j] = t - qc(n - m) / w[j];
  }

  Reconstruction out;
  out.condition = 1.0;
  CVector y = CVector::Zero(n);
  if (m == 0) {
    qreal worst = 0;
    for (const auto& v : shifted) worst = qabs(v) > worst ? qabs(v) : worst;
    out.consistency = static_cast<double>(worst);
    out.weights = CVector(0);
  } else {
    QMatrix A(n, m);
    QVector b(n);
    for (int j = 0; j < n; ++j) {
      qcomplex sigma = qc(0);
      for (int k = 0; k < m; ++k) {
        if (k != j) sigma += qc(1) / (w[j] - w[k]);
      }
      if (j < m) {
        for (int k = 0; k < m; ++k) {
          if (k != j) A(j, k) = qc(1) / (w[j] - w[k]);
        }
        A(j, j) = sigma - shifted[j];
        b[j] = qc(-1);
      } else {
        const qcomplex g = sigma - shifted[j];
        for (int k = 0; k < m; ++k) {
          const qcomplex d = w[j] - w[k];
          A(j, k) = g / d - qc(1) / (d * d);
        }
        b[j] = qc(0) - g;
      }
    }

    Eigen::JacobiSVD<CMatrix> svd(A.to_double());
    const auto& sv = svd.singularValues();
    out.condition = sv(m - 1) > 0.0 ? sv(0) / sv(m - 1) : std::numeric_limits<double>::infinity();
    if (!(out.condition <= kConditionCap)) {
      throw IllConditionedError("root reconstruction: condition number " + std::to_string(out.condition) +
                                    " exceeds the cap",
                                out.condition);
    }
    const QVector c = (m == n) ? solve_square(A, b) : least_squares(A, b);
    qreal worst = 0;
    for (int j = 0; j < n; ++j) {
      qcomplex r = qc(0) - b[j];
      for (int k = 0; k < m; ++k) r += A(j, k) * c[k];
      worst = qabs(r) > worst ? qabs(r) : worst;
    }
    out.consistency = static_cast<double>(worst);
    out.weights = CVector(m);
    for (int k = 0; k < m; ++k) out.weights(k) = to_complex(c[k]);

    const QVector roots = cauchy_roots(QVector(w.begin(), w.begin() + m), c);
    for (int k = 0; k < m; ++k) y(k) = to_complex(roots[k]);
  }

  out.roots = BetheRoots::from_inverse(y, RootSource::Reconstruction);
  for (int k = 0; k < m; ++k) {
    if (out.roots.at_infinity[k]) {
      throw DomainError("reconstructed root " + std::to_string(k + 1) + " lies at infinity");
    }
  }
  return out;
}

QVector model_squares(const ModelParams& params) {
  QVector e(params.length);
  for (int j = 0; j < params.length; ++j) {
    const qreal z = params.z[j];
    e[j] = qc(1 / (z * z));
  }
  return e;
}

Reconstruction reduced_reconstruction(const QVector& lambda, const ModelParams& params, int finite) {
  const int n = params.length;
  const QVector e = model_squares(params);
  const qreal alpha = qreal(1) / qreal(params.G);
  QVector s(n);
  for (int j = 0; j < n; ++j) s[j] = (sum_over_others(j, e) - alpha - lambda[j]) / (qc(2) * e[j]);
  Reconstruction rec = reconstruct(e, s, finite < 0 ? n : finite);
  rec.lambda_star = CVector(n);
  for (int j = 0; j < n; ++j) rec.lambda_star(j) = to_complex(lambda[j]);
  rec.roots.update_flags(params.eps());
  const CVector r = bae_residual(rec.roots, params);
  rec.roots.residual_norm = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  return rec;
}

/// <v|tau_j^*|v> / <v|v>. A Rayleigh quotient is second order in the
/// eigenvector error, so a double eigenvector determines the eigenvalue of
/// the exact operator well past double rounding.
QVector reduced_expectation(const CVector& v, const ModelParams& params) {
  const int n = params.length;
  const std::size_t dim = std::size_t{1} << n;
  if (static_cast<std::size_t>(v.size()) != dim) throw DomainError("state dimension does not match 2^L");
  QVector x(dim);
  qreal norm = 0;
  for (std::size_t b = 0; b < dim; ++b) {
    x[b] = qc(v(b));
    norm += __real__ x[b] * __real__ x[b] + __imag__ x[b] * __imag__ x[b];
  }
  if (!(norm > 0)) throw DomainError("zero state");

  std::vector<qreal> eps(n);
  for (int j = 0; j < n; ++j) eps[j] = qreal(1) / qreal(params.z[j]);
  const qreal alpha = qreal(1) / qreal(params.G);
  const qreal gamma = qreal(2) * qreal(params.Gamma) / qreal(params.G);

  // Site expectations of S^z_j S^z_k, S^+_j S^-_k, S^z_j and S^+_j.
  std::vector<qreal> zz(static_cast<std::size_t>(n) * n, 0), mz(n, 0);
  std::vector<qcomplex> pm(static_cast<std::size_t>(n) * n, qc(0)), raise(n, qc(0));
  for (std::size_t b = 0; b < dim; ++b) {
    if (is_zero(x[b])) continue;
    const qreal weight = __real__ x[b] * __real__ x[b] + __imag__ x[b] * __imag__ x[b];
    for (int j = 0; j < n; ++j) {
      const bool up_j = b >> j & 1U;
      const qreal sj = up_j ? 0.5 : -0.5;
      mz[j] += weight * sj;
      if (!up_j) raise[j] += conj(x[b | std::size_t{1} << j]) * x[b];
      for (int k = 0; k < n; ++k) {
        if (k == j) continue;
        const bool up_k = b >> k & 1U;
        zz[j * n + k] += weight * sj * (up_k ? 0.5 : -0.5);
        if (!up_j && up_k) pm[j * n + k] += conj(x[(b | std::size_t{1} << j) ^ (std::size_t{1} << k)]) * x[b];
      }
    }
  }

  QVector out(n);
  for (int j = 0; j < n; ++j) {
    qcomplex acc = qc(2 * alpha * mz[j]);
    // gamma eps_j (<S+_j> + <S-_j>), and <S-_j> = conj <S+_j>.
    acc += qc(gamma * eps[j]) * (raise[j] + conj(raise[j]));
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      const qreal den = eps[j] * eps[j] - eps[k] * eps[k];
      acc += qc(4 * eps[j] * eps[j] / den * zz[j * n + k]);
      acc += qc(2 * eps[j] * eps[k] / den) * (pm[j * n + k] + pm[k * n + j]);
    }
    out[j] = acc / qc(norm);
  }
  return out;
}

}  // namespace

Reconstruction roots_from_conserved(const CVector& lambda_star, const ModelParams& params, int finite_roots) {
  params.validate(62);
  if (lambda_star.size() != params.length) throw DomainError("expected one eigenvalue per site");
  if (!lambda_star.allFinite()) throw DomainError("conserved eigenvalues must be finite");
  QVector lambda(params.length);
  for (int j = 0; j < params.length; ++j) lambda[j] = qc(lambda_star(j));
  return reduced_reconstruction(lambda, params, finite_roots);
}

Reconstruction roots_from_state(const CVector& state, const ModelParams& params, int finite_roots) {
  params.validate(62);
  if (!state.allFinite()) throw DomainError("state must be finite");
  return reduced_reconstruction(reduced_expectation(state, params), params, finite_roots);
}

Reconstruction roots_from_conserved_general(const CVector& lambda, const ChainSpec& chain,
                                            const EtaExpansion& ep) {
  chain.validate();
  const int n = chain.length;
  if (lambda.size() != n) throw DomainError("expected one eigenvalue per site");
  if (!lambda.allFinite()) throw DomainError("conserved eigenvalues must be finite");
  QVector e(n), s(n);
  for (int j = 0; j < n; ++j) {
    const qcomplex eps = qc(chain.eps[j]);
    e[j] = eps * eps;
  }
  for (int j = 0; j < n; ++j) {
    const detail::GeneralEigenvalueTerms g = detail::general_eigenvalue_terms(chain.eps[j], ep);
    if (std::abs(g.A) < kPoleGuard) {
      throw DomainError("eps_j^2 (psi phi + 1) = xi^2 at j = " + std::to_string(j + 1));
    }
    s[j] = (sum_over_others(j, e) + qc(0.75) - (qc(lambda(j)) - qc(g.C)) / qc(g.A)) / (qc(2) * e[j]);
  }
  Reconstruction rec = reconstruct(e, s, n);
  rec.lambda_star = lambda;
  rec.roots.update_flags(chain.eps);
  const CVector r = bae_residual_general(rec.roots, chain, ep);
  rec.roots.residual_norm = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  return rec;
}

}  // namespace openrg
