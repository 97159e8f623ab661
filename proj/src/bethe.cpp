#include "openrg/bethe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "bethe_detail.hpp"
#include "openrg/polynomial.hpp"

namespace openrg {

namespace {

const Complex kInf{std::numeric_limits<double>::infinity(), 0.0};

std::vector<Complex> squares(const std::vector<Complex>& eps) {
  std::vector<Complex> e;
  e.reserve(eps.size());
  for (Complex x : eps) e.push_back(x * x);
  return e;
}

void require_length(const BetheRoots& roots, std::size_t length) {
  if (static_cast<std::size_t>(roots.size()) != length) {
    throw DomainError("expected " + std::to_string(length) + " roots, got " +
                      std::to_string(roots.size()));
  }
}

void require_nonzero(Complex value, const std::string& what) {
  if (std::abs(value) < kPoleGuard) throw DomainError(what);
}

std::string root_label(Eigen::Index k) { return "root " + std::to_string(k + 1); }

/// Scalars of the normalised quasi-classical equations
/// [A + (x s2 - xi2) S_k - kappa P_k] / x_k.
struct QcCoefficients {
  Complex A, s2, xi2, kappa;
};

QcCoefficients general_coefficients(const EtaExpansion& ep) {
  ep.validate();
  const Complex s = principal_sqrt(ep.psi * ep.phi + 1.0);
  const Complex m = (ep.lambda - ep.mu) * ep.psi + (ep.gamma - ep.delta) * ep.phi;
  QcCoefficients c;
  c.A = (ep.alpha + ep.beta) * s + s * s - ep.xi * m / (2.0 * s);
  c.s2 = s * s;
  c.xi2 = ep.xi * ep.xi;
  c.kappa = 0.25 * ((ep.gamma - ep.delta) * (ep.lambda - ep.mu) - m * m / (4.0 * s * s));
  return c;
}

void check_infinite_roots(const BetheRoots& roots, Complex kappa) {
  if (kappa != Complex{} && roots.finite_count() != roots.size()) {
    throw DomainError("roots at infinity require a vanishing inhomogeneous term");
  }
}

void check_x_configuration(const BetheRoots& roots, const std::vector<Complex>& e) {
  const Eigen::Index n = roots.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (roots.at_infinity[k]) continue;
    const Complex xk = roots.squared(k);
    require_nonzero(xk, root_label(k) + ": v_k^2 = 0");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != k && !roots.at_infinity[i] && std::abs(xk - roots.squared(i)) < kPoleGuard) {
        throw DomainError(root_label(k) + " coincides with " + root_label(i));
      }
    }
    for (std::size_t l = 0; l < e.size(); ++l) {
      if (std::abs(xk - e[l]) < kPoleGuard) {
        throw DomainError(root_label(k) + ": v_k^2 = eps_" + std::to_string(l + 1) + "^2");
      }
    }
  }
}

struct XTerms {
  Complex S;      // sum_i 2/(x_k - x_i) - sum_l 1/(x_k - e_l)
  Complex dS;     // dS/dx_k
  Complex ratio;  // prod_l (x_k - e_l) / prod_i (x_k - x_i)
  Complex logd;   // d log(ratio) / dx_k
};

XTerms x_terms(Eigen::Index k, const BetheRoots& roots, const std::vector<Complex>& e) {
  XTerms t{0.0, 0.0, 1.0, 0.0};
  const Complex xk = roots.squared(k);
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    if (i == k || roots.at_infinity[i]) continue;
    const Complex d = xk - roots.squared(i);
    t.S += 2.0 / d;
    t.dS -= 2.0 / (d * d);
    t.ratio /= d;
    t.logd -= 1.0 / d;
  }
  for (Complex el : e) {
    const Complex d = xk - el;
    t.S -= 1.0 / d;
    t.dS += 1.0 / (d * d);
    t.ratio *= d;
    t.logd += 1.0 / d;
  }
  return t;
}

CVector residual_normalised(const BetheRoots& roots, const std::vector<Complex>& e,
                            const QcCoefficients& c) {
  check_infinite_roots(roots, c.kappa);
  check_x_configuration(roots, e);
  CVector r = CVector::Zero(roots.size());
  for (Eigen::Index k = 0; k < roots.size(); ++k) {
    if (roots.at_infinity[k]) continue;
    const Complex xk = roots.squared(k);
    const XTerms t = x_terms(k, roots, e);
    r(k) = (c.A + (xk * c.s2 - c.xi2) * t.S - c.kappa * t.ratio) / xk;
  }
  return r;
}

CMatrix jacobian_normalised(const BetheRoots& roots, const std::vector<Complex>& e,
                            const QcCoefficients& c) {
  check_infinite_roots(roots, c.kappa);
  check_x_configuration(roots, e);
  std::vector<Eigen::Index> finite;
  for (Eigen::Index k = 0; k < roots.size(); ++k) {
    if (!roots.at_infinity[k]) finite.push_back(k);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(finite.size());
  CMatrix J = CMatrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const Eigen::Index k = finite[a];
    const Complex xk = roots.squared(k);
    const XTerms t = x_terms(k, roots, e);
    const Complex B = xk * c.s2 - c.xi2;
    const Complex N = c.A + B * t.S - c.kappa * t.ratio;
    for (Eigen::Index b = 0; b < n; ++b) {
      const Eigen::Index i = finite[b];
      if (i == k) {
        J(a, b) = (c.s2 * t.S + B * t.dS - c.kappa * t.ratio * t.logd) / xk - N / (xk * xk);
      } else {
        const Complex d = xk - roots.squared(i);
        J(a, b) = (2.0 * B / (d * d) - c.kappa * t.ratio / d) / xk;
      }
    }
  }
  return J;
}

void check_y_configuration(const BetheRoots& roots, const std::vector<Complex>& w) {
  const Eigen::Index n = roots.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    const Complex yk = roots.inverse(k);
    require_nonzero(yk, root_label(k) + ": y_k = 0 (root at infinity)");
    for (Eigen::Index i = 0; i < k; ++i) {
      if (std::abs(yk - roots.inverse(i)) < kPoleGuard) {
        throw DomainError(root_label(k) + " coincides with " + root_label(i));
      }
    }
    for (std::size_t l = 0; l < w.size(); ++l) {
      if (std::abs(yk - w[l]) < kPoleGuard) {
        throw DomainError(root_label(k) + ": y_k = z_" + std::to_string(l + 1) + "^2");
      }
    }
  }
}

/// prod_l (1 - y_k / w_l) / prod_{i != k} (1 - y_k / y_i)
Complex y_ratio(Eigen::Index k, const CVector& y, const std::vector<Complex>& w) {
  Complex t = 1.0;
  for (Complex wl : w) t *= 1.0 - y(k) / wl;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (i != k) t /= 1.0 - y(k) / y(i);
  }
  return t;
}

CVector residual_y(const BetheRoots& roots, const std::vector<Complex>& w, Complex alpha, Complex gl) {
  check_y_configuration(roots, w);
  const CVector& y = roots.inverse;
  CVector r(y.size());
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    Complex acc = alpha + 1.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (i != k) acc += 2.0 * y(i) / (y(i) - y(k));
    }
    for (Complex wl : w) acc += wl / (y(k) - wl);
    acc -= gl / (4.0 * y(k)) * y_ratio(k, y, w);
    r(k) = acc;
  }
  return r;
}

CMatrix jacobian_y(const BetheRoots& roots, const std::vector<Complex>& w, Complex gl) {
  check_y_configuration(roots, w);
  const CVector& y = roots.inverse;
  const Eigen::Index n = y.size();
  CMatrix J(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Complex t = y_ratio(k, y, w);
    Complex diag = 0.0, logd = -1.0 / y(k);
    for (Complex wl : w) {
      diag -= wl / ((y(k) - wl) * (y(k) - wl));
      logd += 1.0 / (y(k) - wl);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == k) continue;
      const Complex d = y(i) - y(k);
      diag += 2.0 * y(i) / (d * d);
      logd += 1.0 / d;
      J(k, i) = -2.0 * y(k) / (d * d) + gl / 4.0 * t / (y(i) * d);
    }
    J(k, k) = diag - gl / 4.0 * (t / y(k)) * logd;
  }
  return J;
}

struct NewtonOutcome {
  CVector u;
  int iterations = 0;
  double residual = 0.0;
};

template <class Residual, class Jacobian>
NewtonOutcome damped_newton(CVector u, Residual&& residual, Jacobian&& jacobian,
                            const NewtonOptions& o) {
  CVector r = residual(u);
  double norm = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  for (int it = 0; it < o.max_iterations; ++it) {
    if (!(norm > o.tolerance)) return {u, it, norm};
    if (!std::isfinite(norm)) throw ConvergenceError("Newton iteration diverged", norm);

    // Row and column equilibration; roots of very different size make the
    // raw Jacobian look rank deficient to the LU threshold.
    CMatrix J = jacobian(u);
    RVector rows = J.rowwise().norm(), cols = RVector::Ones(J.cols());
    if ((rows.array() == 0.0).any()) throw DomainError("Newton: singular Jacobian");
    J = rows.cwiseInverse().cast<Complex>().asDiagonal() * J;
    cols = J.colwise().norm().transpose();
    if ((cols.array() == 0.0).any()) throw DomainError("Newton: singular Jacobian");
    J = J * cols.cwiseInverse().cast<Complex>().asDiagonal();
    Eigen::FullPivLU<CMatrix> lu(J);
    if (!lu.isInvertible()) throw DomainError("Newton: singular Jacobian");
    const CVector step =
        cols.cwiseInverse().cast<Complex>().asDiagonal() * lu.solve(-(rows.cwiseInverse().cast<Complex>().asDiagonal() * r));

    // Halving is judged on the 2-norm, for which the Newton direction is
    // always a descent direction; convergence is judged on the max-norm.
    const double merit = r.norm();
    double scale = 1.0;
    bool accepted = false;
    CVector trial, trial_r;
    double trial_norm = 0.0;
    for (int h = 0; h <= o.max_halvings; ++h, scale *= 0.5) {
      trial = u + scale * step;
      try {
        trial_r = residual(trial);
      } catch (const DomainError&) {
        continue;
      }
      trial_norm = trial_r.cwiseAbs().maxCoeff();
      if (trial_r.norm() < merit || !(trial_norm > o.tolerance)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw ConvergenceError("Newton: no decrease after " + std::to_string(o.max_halvings) +
                                 " step halvings",
                             norm);
    }
    const double moved = scale * step.norm();
    u = std::move(trial);
    r = std::move(trial_r);
    norm = trial_norm;
    if (moved <= o.step_tolerance * (1.0 + u.norm())) {
      if (norm < o.accept_tolerance) return {u, it + 1, norm};
      throw ConvergenceError("Newton stagnated", norm);
    }
  }
  if (!(norm > o.tolerance)) return {u, o.max_iterations, norm};
  throw ConvergenceError("Newton did not converge in " + std::to_string(o.max_iterations) +
                             " iterations",
                         norm);
}

BetheRoots with_finite_x(const BetheRoots& base, const CVector& finite_x) {
  CVector x = base.squared;
  Eigen::Index a = 0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (!base.at_infinity[k]) x(k) = finite_x(a++);
  }
  BetheRoots out = BetheRoots::from_squared(x, base.source);
  return out;
}

CVector finite_x(const BetheRoots& roots) {
  CVector out(roots.finite_count());
  Eigen::Index a = 0;
  for (Eigen::Index k = 0; k < roots.size(); ++k) {
    if (!roots.at_infinity[k]) out(a++) = roots.squared(k);
  }
  return out;
}

double max_abs(const CVector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

Complex sum_over_others(int j, const std::vector<Complex>& e) {
  Complex acc = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (static_cast<int>(k) != j) acc += e[j] / (e[j] - e[k]);
  }
  return acc;
}

/// sum_i 2 e_j / (e_j - x_i), written in y so that roots at infinity drop out.
Complex root_sum(int j, const BetheRoots& roots, const std::vector<Complex>& e) {
  Complex acc = 0.0;
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    const Complex y = roots.inverse(i);
    const Complex d = e[j] * y - 1.0;
    if (std::abs(d) < kPoleGuard) {
      throw DomainError(root_label(i) + ": v_i^2 = eps_" + std::to_string(j + 1) + "^2");
    }
    acc += 2.0 * e[j] * y / d;
  }
  return acc;
}

}  // namespace

namespace detail {

GeneralEigenvalueTerms general_eigenvalue_terms(Complex eps, const EtaExpansion& ep) {
  ep.validate();
  const Complex s = principal_sqrt(ep.psi * ep.phi + 1.0);
  const Complex m = (ep.lambda - ep.mu) * ep.psi + (ep.gamma - ep.delta) * ep.phi;
  return {(eps * eps * s * s - ep.xi * ep.xi) / eps,
          -eps * s * s - (ep.alpha + ep.beta) * eps * s + ep.xi * eps * m / (2.0 * s)};
}

}  // namespace detail

const char* to_string(RootSource source) {
  switch (source) {
    case RootSource::Reconstruction: return "reconstruction";
    case RootSource::Newton: return "newton";
    case RootSource::Continuation: return "continuation";
    case RootSource::HeineStieltjes: return "heine-stieltjes";
    case RootSource::FullEta: return "full-eta";
  }
  return "unknown";
}

BetheRoots BetheRoots::from_squared(const CVector& x, RootSource source) {
  BetheRoots r;
  r.source = source;
  r.squared = x;
  r.inverse = CVector(x.size());
  r.at_infinity.assign(x.size(), false);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::isinf(std::abs(x(i)))) {
      r.squared(i) = kInf;
      r.inverse(i) = 0.0;
      r.at_infinity[i] = true;
    } else {
      if (x(i) == Complex{}) throw DomainError(root_label(i) + ": v^2 = 0");
      r.inverse(i) = 1.0 / x(i);
    }
  }
  return r;
}

BetheRoots BetheRoots::from_inverse(const CVector& y, RootSource source, double infinity_tol) {
  BetheRoots r;
  r.source = source;
  r.inverse = y;
  r.squared = CVector(y.size());
  r.at_infinity.assign(y.size(), false);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (std::abs(y(i)) < infinity_tol) {
      r.inverse(i) = 0.0;
      r.squared(i) = kInf;
      r.at_infinity[i] = true;
    } else {
      r.squared(i) = 1.0 / y(i);
    }
  }
  return r;
}

int BetheRoots::finite_count() const {
  return static_cast<int>(std::count(at_infinity.begin(), at_infinity.end(), false));
}

void BetheRoots::update_flags(const std::vector<Complex>& eps) {
  near_collision = near_pole = false;
  const std::vector<Complex> e = squares(eps);
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (at_infinity[i]) continue;
    const double scale = std::max(1.0, std::abs(squared(i)));
    for (Eigen::Index k = i + 1; k < size(); ++k) {
      if (!at_infinity[k] && std::abs(squared(i) - squared(k)) < kCollisionTol * scale) {
        near_collision = true;
      }
    }
    for (Complex el : e) {
      if (std::abs(squared(i) - el) < kCollisionTol * scale) near_pole = true;
    }
  }
}

QPolynomial QPolynomial::from_roots(const CVector& roots) {
  return {poly::from_roots(roots), roots};
}

QPolynomial QPolynomial::from_coefficients(const CVector& coefficients) {
  QPolynomial q;
  q.coefficients = CVector(coefficients.size() + 1);
  q.coefficients.head(coefficients.size()) = coefficients;
  q.coefficients(coefficients.size()) = 1.0;
  q.roots = poly::roots(q.coefficients);
  return q;
}

double QPolynomial::reexpansion_error() const {
  const CVector back = poly::from_roots(roots);
  if (back.size() != coefficients.size()) return std::numeric_limits<double>::infinity();
  return (back - coefficients).cwiseAbs().maxCoeff() / coefficients.cwiseAbs().maxCoeff();
}

Complex qc_conserved_eigenvalue(int j, const BetheRoots& roots, const ModelParams& params) {
  params.validate(62);
  require_length(roots, params.length);
  if (j < 1 || j > params.length) throw DomainError("index j outside [1, L]");
  const std::vector<Complex> e = squares(params.eps());
  return sum_over_others(j - 1, e) - root_sum(j - 1, roots, e) - params.alpha();
}

CVector qc_conserved_eigenvalues(const BetheRoots& roots, const ModelParams& params) {
  CVector out(params.length);
  for (int j = 1; j <= params.length; ++j) out(j - 1) = qc_conserved_eigenvalue(j, roots, params);
  return out;
}

Complex qc_conserved_eigenvalue_general(int j, const BetheRoots& roots, const ChainSpec& chain,
                                        const EtaExpansion& ep) {
  chain.validate();
  require_length(roots, chain.length);
  if (j < 1 || j > chain.length) throw DomainError("index j outside [1, L]");
  const std::vector<Complex> e = squares(chain.eps);
  const detail::GeneralEigenvalueTerms g = detail::general_eigenvalue_terms(chain.eps[j - 1], ep);
  return g.A * (sum_over_others(j - 1, e) - root_sum(j - 1, roots, e) + 0.75) + g.C;
}

CVector bae_residual(const BetheRoots& roots, const ModelParams& params) {
  params.validate(62);
  require_length(roots, params.length);
  const std::vector<Complex> e = squares(params.eps());
  const Complex gl = params.gamma() * params.lambda();
  check_infinite_roots(roots, gl);
  check_x_configuration(roots, e);
  CVector r = CVector::Zero(roots.size());
  for (Eigen::Index k = 0; k < roots.size(); ++k) {
    if (roots.at_infinity[k]) continue;
    const Complex xk = roots.squared(k);
    Complex lhs = (params.alpha() + 1.0) / xk;
    Complex num = 1.0, den = 1.0;
    for (Eigen::Index i = 0; i < roots.size(); ++i) {
      if (i == k || roots.at_infinity[i]) continue;
      lhs += 2.0 / (xk - roots.squared(i));
      den *= xk - roots.squared(i);
    }
    for (Complex el : e) {
      lhs -= 1.0 / (xk - el);
      num *= xk - el;
    }
    r(k) = lhs - gl / (4.0 * xk) * num / den;
  }
  return r;
}

CVector bae_residual_y(const BetheRoots& roots, const ModelParams& params) {
  params.validate(62);
  require_length(roots, params.length);
  std::vector<Complex> w;
  for (double z : params.z) w.emplace_back(z * z);
  return residual_y(roots, w, params.alpha(), params.gamma() * params.lambda());
}

CVector bae_residual_general(const BetheRoots& roots, const ChainSpec& chain, const EtaExpansion& ep) {
  chain.validate();
  require_length(roots, chain.length);
  return residual_normalised(roots, squares(chain.eps), general_coefficients(ep));
}

BaeSystem BaeSystem::from_model(const ModelParams& params, BaeForm form) {
  params.validate(62);
  if (form == BaeForm::General) throw DomainError("use BaeSystem::general for the general form");
  return {form, params.eps(), params.expansion()};
}

BaeSystem BaeSystem::general(const ChainSpec& chain, const EtaExpansion& ep) {
  chain.validate();
  ep.validate();
  return {BaeForm::General, chain.eps, ep};
}

CVector BaeSystem::residual(const BetheRoots& roots) const {
  require_length(roots, eps.size());
  const std::vector<Complex> e = squares(eps);
  switch (form) {
    case BaeForm::V:
      return residual_normalised(roots, e, {ep.alpha + 1.0, 1.0, 0.0, ep.gamma * ep.lambda / 4.0});
    case BaeForm::Y: {
      std::vector<Complex> w;
      for (Complex el : e) w.push_back(1.0 / el);
      return residual_y(roots, w, ep.alpha, ep.gamma * ep.lambda);
    }
    case BaeForm::General:
      return residual_normalised(roots, e, general_coefficients(ep));
  }
  return {};
}

CMatrix BaeSystem::jacobian(const BetheRoots& roots) const {
  require_length(roots, eps.size());
  const std::vector<Complex> e = squares(eps);
  switch (form) {
    case BaeForm::V:
      return jacobian_normalised(roots, e, {ep.alpha + 1.0, 1.0, 0.0, ep.gamma * ep.lambda / 4.0});
    case BaeForm::Y: {
      std::vector<Complex> w;
      for (Complex el : e) w.push_back(1.0 / el);
      return jacobian_y(roots, w, ep.gamma * ep.lambda);
    }
    case BaeForm::General:
      return jacobian_normalised(roots, e, general_coefficients(ep));
  }
  return {};
}

EnergyEstimate energy_from_roots(const BetheRoots& roots, const ModelParams& params) {
  params.validate(62);
  require_length(roots, params.length);
  const CVector& y = roots.inverse;
  Complex sum_y = y.sum();
  double sum_z2 = 0.0;
  for (double z : params.z) sum_z2 += z * z;

  Complex env = 0.0;
  if (params.Gamma != 0.0) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      Complex term = 1.0;
      for (double z : params.z) term *= 1.0 - y(i) / (z * z);
      for (Eigen::Index k = 0; k < y.size(); ++k) {
        if (k == i) continue;
        const Complex d = y(k) - y(i);
        if (std::abs(d) < kPoleGuard * std::max(1.0, std::abs(y(k)))) {
          throw DomainError("energy: " + root_label(i) + " coincides with " + root_label(k));
        }
        term *= y(k) / d;
      }
      env += term;
    }
  }
  EnergyEstimate out;
  out.energy = (1.0 + params.G) * sum_y - 0.5 * sum_z2 + params.Gamma * params.Gamma / params.G * env;
  out.residual_warning = roots.residual_norm > 1e-6;
  return out;
}

Complex conserved_energy(const BetheRoots& roots, const ModelParams& params) {
  const CVector lam = qc_conserved_eigenvalues(roots, params);
  Complex acc = 0.0;
  for (int j = 0; j < params.length; ++j) acc += params.z[j] * params.z[j] * lam(j);
  return acc / (2.0 * params.alpha());
}

BetheRoots newton_refine(const BetheRoots& initial, const BaeSystem& system, const NewtonOptions& options) {
  require_length(initial, system.eps.size());
  BetheRoots out;
  if (system.form == BaeForm::Y) {
    const NewtonOutcome res = damped_newton(
        initial.inverse,
        [&](const CVector& y) { return system.residual(BetheRoots::from_inverse(y, initial.source, 0.0)); },
        [&](const CVector& y) { return system.jacobian(BetheRoots::from_inverse(y, initial.source, 0.0)); },
        options);
    out = BetheRoots::from_inverse(res.u, RootSource::Newton, 0.0);
    out.iterations = res.iterations;
    out.residual_norm = res.residual;
  } else {
    const NewtonOutcome res = damped_newton(
        finite_x(initial),
        [&](const CVector& x) { return system.residual(with_finite_x(initial, x)); },
        [&](const CVector& x) { return system.jacobian(with_finite_x(initial, x)); }, options);
    out = with_finite_x(initial, res.u);
    out.source = RootSource::Newton;
    out.iterations = res.iterations;
    out.residual_norm = res.residual;
  }
  out.update_flags(system.eps);
  return out;
}

std::vector<ContinuationPoint> continuation_solve(const ModelParams& params,
                                                  const std::vector<double>& gamma_path,
                                                  const BetheRoots& seeds,
                                                  const ContinuationOptions& options) {
  params.validate(62);
  require_length(seeds, params.length);
  if (gamma_path.empty()) throw DomainError("continuation path is empty");
  for (std::size_t i = 1; i < gamma_path.size(); ++i) {
    const double a = gamma_path[i] - gamma_path[i - 1];
    const double b = gamma_path[1] - gamma_path[0];
    if (a == 0.0 || (a > 0.0) != (b > 0.0)) throw DomainError("continuation path must be strictly monotone");
  }

  auto at = [&](double gamma) {
    ModelParams p = params;
    p.Gamma = gamma;
    return p;
  };
  auto min_gap = [](const CVector& y) {
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      for (Eigen::Index k = i + 1; k < y.size(); ++k) gap = std::min(gap, std::abs(y(i) - y(k)));
    }
    return gap;
  };
  auto make_point = [&](double gamma, BetheRoots roots) {
    ContinuationPoint pt;
    pt.Gamma = gamma;
    pt.escaped = roots.inverse.size() > 0 && roots.inverse.cwiseAbs().minCoeff() < options.escape_tol;
    pt.collided = min_gap(roots.inverse) < options.collision_tol;
    roots.source = RootSource::Continuation;
    if (!pt.collided) pt.energy = energy_from_roots(roots, at(gamma)).energy;
    pt.roots = std::move(roots);
    return pt;
  };

  std::vector<ContinuationPoint> path;
  if (min_gap(seeds.inverse) < options.collision_tol) {
    path.push_back(make_point(gamma_path.front(), seeds));
    return path;
  }
  BetheRoots current;
  try {
    current = newton_refine(seeds, BaeSystem::from_model(at(gamma_path.front()), BaeForm::Y), options.newton);
  } catch (const DomainError& err) {
    throw ContinuationError(std::string("seeds rejected at the path start: ") + err.what(),
                            std::numeric_limits<double>::infinity(), make_point(gamma_path.front(), seeds));
  } catch (const ConvergenceError& err) {
    throw ContinuationError(std::string("seeds did not converge at the path start: ") + err.what(),
                            err.last_residual(), make_point(gamma_path.front(), seeds));
  }
  path.push_back(make_point(gamma_path.front(), current));
  if (path.back().collided) return path;

  double g = gamma_path.front();
  CVector previous_y = current.inverse;
  double previous_g = g;
  bool have_previous = false;
  for (std::size_t target = 1; target < gamma_path.size(); ++target) {
    const double goal = gamma_path[target];
    double h = goal - g;
    while (g != goal) {
      if (std::abs(h) > std::abs(goal - g)) h = goal - g;
      const double next = (std::abs(goal - g - h) < 1e-15) ? goal : g + h;
      CVector guess = current.inverse;
      if (have_previous && g != previous_g) {
        guess += (current.inverse - previous_y) * ((next - g) / (g - previous_g));
      }
      try {
        BetheRoots refined = newton_refine(BetheRoots::from_inverse(guess, RootSource::Continuation, 0.0),
                                           BaeSystem::from_model(at(next), BaeForm::Y), options.newton);
        for (Eigen::Index i = 0; i < guess.size(); ++i) {
          const double scale = std::max(std::abs(current.inverse(i)), options.escape_tol);
          if (std::abs(refined.inverse(i) - guess(i)) > options.max_corrector * scale) {
            throw DomainError("corrector jumped branches");
          }
        }
        previous_y = current.inverse;
        previous_g = g;
        have_previous = true;
        current = std::move(refined);
        g = next;
        h *= 2.0;
        if (min_gap(current.inverse) < options.collision_tol) {
          path.push_back(make_point(g, current));
          return path;
        }
      } catch (const std::exception& err) {
        h *= 0.5;
        if (std::abs(h) < options.min_step) {
          const double last = dynamic_cast<const ConvergenceError*>(&err)
                                  ? static_cast<const ConvergenceError&>(err).last_residual()
                                  : std::numeric_limits<double>::infinity();
          throw ContinuationError("continuation step fell below the minimum at Gamma = " +
                                      std::to_string(g) + ": " + err.what(),
                                  last, make_point(g, current));
        }
      }
    }
    path.push_back(make_point(g, current));
  }
  return path;
}

namespace {

struct HsPieces {
  CVector a;   // x P
  CVector b;   // (alpha + 1) P - x P'
  CVector rhs; // (gamma lambda / 4) P^2
  int length = 0;
};

HsPieces hs_pieces(const ModelParams& params) {
  params.validate(62);
  CVector e(params.length);
  for (int j = 0; j < params.length; ++j) e(j) = 1.0 / (params.z[j] * params.z[j]);
  const CVector P = poly::from_roots(e);
  HsPieces h;
  h.length = params.length;
  h.a = poly::shift(P, 1);
  h.b = poly::add((params.alpha() + 1.0) * P, -poly::shift(poly::derivative(P), 1));
  h.rhs = params.gamma() * params.lambda() / 4.0 * poly::multiply(P, P);
  return h;
}

CVector padded(const CVector& c, Eigen::Index size) {
  CVector out = CVector::Zero(size);
  const Eigen::Index n = std::min(size, c.size());
  out.head(n) = c.head(n);
  return out;
}

/// a Q'' + b Q' as a length 2L+1 vector.
CVector hs_q_part(const HsPieces& h, const CVector& q) {
  const Eigen::Index size = 2 * h.length + 1;
  const CVector dq = poly::derivative(q);
  const CVector ddq = poly::derivative(dq);
  return padded(poly::add(poly::multiply(h.a, ddq), poly::multiply(h.b, dq)), size);
}

CVector hs_residual(const HsPieces& h, const CVector& q, const CVector& v) {
  const Eigen::Index size = 2 * h.length + 1;
  return hs_q_part(h, q) + padded(poly::multiply(v, q), size) - padded(h.rhs, size);
}

CVector monomial(int m) {
  CVector c = CVector::Zero(m + 1);
  c(m) = 1.0;
  return c;
}

void require_monic_degree(const QPolynomial& Q, int length) {
  if (Q.coefficients.size() != length + 1) {
    throw DomainError("Q must have degree L = " + std::to_string(length));
  }
  if (std::abs(Q.coefficients(length) - 1.0) > 1e-14) throw DomainError("Q must be monic");
}

HeineStieltjesResult hs_finish(const HsPieces& h, const CVector& q, const CVector& v, int iterations) {
  HeineStieltjesResult out;
  out.Q = QPolynomial::from_coefficients(q.head(h.length));
  out.V = v;
  out.coefficient_residual = max_abs(hs_residual(h, out.Q.coefficients, v));
  out.iterations = iterations;
  out.roots = BetheRoots::from_squared(out.Q.roots, RootSource::HeineStieltjes);
  return out;
}

}  // namespace

CVector heine_stieltjes_residual(const ModelParams& params, const CVector& q, const CVector& v) {
  const HsPieces h = hs_pieces(params);
  if (q.size() != h.length + 1 || v.size() != h.length + 1) {
    throw DomainError("Q and V must both have degree L");
  }
  return hs_residual(h, q, v);
}

HeineStieltjesResult van_vleck_for(const ModelParams& params, const QPolynomial& Q) {
  const HsPieces h = hs_pieces(params);
  require_monic_degree(Q, h.length);
  const Eigen::Index size = 2 * h.length + 1;
  CMatrix A(size, h.length + 1);
  for (int m = 0; m <= h.length; ++m) A.col(m) = padded(poly::shift(Q.coefficients, m), size);
  const CVector b = padded(h.rhs, size) - hs_q_part(h, Q.coefficients);
  const CVector v = A.colPivHouseholderQr().solve(b);
  HeineStieltjesResult out = hs_finish(h, Q.coefficients, v, 0);
  return out;
}

HeineStieltjesResult heine_stieltjes_solve(const ModelParams& params, const QPolynomial& initial,
                                           const NewtonOptions& options) {
  const HsPieces h = hs_pieces(params);
  const int n = h.length;
  require_monic_degree(initial, n);
  const CVector v0 = van_vleck_for(params, initial).V;

  CVector u(2 * n + 1);
  u.head(n) = initial.coefficients.head(n);
  u.tail(n + 1) = v0;
  auto split = [&](const CVector& x) {
    CVector q(n + 1);
    q.head(n) = x.head(n);
    q(n) = 1.0;
    return std::make_pair(q, CVector(x.tail(n + 1)));
  };
  const NewtonOutcome res = damped_newton(
      u,
      [&](const CVector& x) {
        const auto [q, v] = split(x);
        return hs_residual(h, q, v);
      },
      [&](const CVector& x) {
        const auto [q, v] = split(x);
        const Eigen::Index size = 2 * n + 1;
        CMatrix J(size, size);
        for (int m = 0; m < n; ++m) {
          const CVector xm = monomial(m);
          J.col(m) = hs_q_part(h, xm) + padded(poly::multiply(v, xm), size);
        }
        for (int m = 0; m <= n; ++m) J.col(n + m) = padded(poly::shift(q, m), size);
        return J;
      },
      options);
  const auto [q, v] = split(res.u);
  return hs_finish(h, q, v, res.iterations);
}

namespace {

struct FullEtaScalars {
  Complex s_minus, s_plus, c_eig, c_bae;
};

FullEtaScalars full_eta_scalars(const BoundaryParams& bp) {
  FullEtaScalars f;
  const Complex pm = bp.psi_minus * bp.phi_minus + 1.0;
  const Complex pp = bp.psi_plus * bp.phi_plus + 1.0;
  require_nonzero(pm, "psi- phi- + 1 = 0");
  require_nonzero(pp, "psi+ phi+ + 1 = 0");
  f.s_minus = principal_sqrt(pm);
  f.s_plus = principal_sqrt(pp);
  const Complex cross = bp.psi_minus * bp.phi_plus + bp.phi_minus * bp.psi_plus;
  f.c_eig = 2.0 * ((0.5 * cross + 1.0) / (f.s_minus * f.s_plus) - 1.0);
  f.c_bae = cross + 2.0 - 2.0 * f.s_minus * f.s_plus;
  return f;
}

/// Lambda(u); with pole > 0 the factor 1 / (u - eps_pole) is removed, giving
/// the residue when evaluated at u = eps_pole.
Complex lambda_impl(Complex u, const BetheRoots& roots, const ChainSpec& chain, const BoundaryParams& bp,
                    int pole) {
  chain.validate_full_eta();
  require_length(roots, chain.length);
  const Complex eta = chain.eta;
  require_nonzero(u, "Lambda(u): pole at u = 0");
  for (int l = 0; l < chain.length; ++l) {
    if (l + 1 != pole) require_nonzero(u - chain.eps[l], "Lambda(u): pole at u = eps");
    require_nonzero(u + chain.eps[l], "Lambda(u): pole at u = -eps");
  }
  const FullEtaScalars f = full_eta_scalars(bp);
  const Complex hm = bp.xi_minus / f.s_minus, hp = bp.xi_plus / f.s_plus;

  Complex a = (2.0 * u - eta) / (2.0 * u) * (u + hm + eta / 2.0) * (u + hp + eta / 2.0);
  Complex d = (2.0 * u + eta) / (2.0 * u) * (u - hm - eta / 2.0) * (u - hp - eta / 2.0);
  Complex third = f.c_eig * (u * u - eta * eta / 4.0);
  for (int l = 0; l < chain.length; ++l) {
    const Complex el = chain.eps[l];
    const Complex den = (l + 1 == pole) ? (u + el) : (u - el) * (u + el);
    a *= (u - el - eta / 2.0) * (u + el - eta / 2.0) / den;
    d *= (u - el + eta / 2.0) * (u + el + eta / 2.0) / den;
    third *= ((u + el) * (u + el) - eta * eta / 4.0) * ((u - el) * (u - el) - eta * eta / 4.0) / den;
  }
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    const Complex y = roots.inverse(i);
    const Complex den = 1.0 - u * u * y;
    require_nonzero(den, "Lambda(u): pole at u = +-v_" + std::to_string(i + 1));
    a *= (1.0 - (u + eta) * (u + eta) * y) / den;
    d *= (1.0 - (u - eta) * (u - eta) * y) / den;
    third *= -y / den;
  }
  return f.s_minus * f.s_plus * (a + d + third);
}

}  // namespace

Complex lambda_full(Complex u, const BetheRoots& roots, const ChainSpec& chain, const BoundaryParams& bp) {
  return lambda_impl(u, roots, chain, bp, 0);
}

Complex lambda_full_residue(int j, const BetheRoots& roots, const ChainSpec& chain,
                            const BoundaryParams& bp) {
  if (j < 1 || j > chain.length) throw DomainError("index j outside [1, L]");
  return lambda_impl(chain.eps[j - 1], roots, chain, bp, j);
}

CVector bae_full_residual(const BetheRoots& roots, const ChainSpec& chain, const BoundaryParams& bp,
                          bool negate) {
  chain.validate_full_eta();
  require_length(roots, chain.length);
  if (roots.finite_count() != roots.size()) throw DomainError("full-eta equations need finite roots");
  check_x_configuration(roots, squares(chain.eps));
  const FullEtaScalars f = full_eta_scalars(bp);
  const Complex eta = chain.eta;
  CVector r(roots.size());
  for (Eigen::Index k = 0; k < roots.size(); ++k) {
    Complex v = principal_sqrt(roots.squared(k));
    if (negate) v = -v;
    Complex plus = 2.0 * eta / v * (v * f.s_minus + bp.xi_minus + eta / 2.0 * f.s_minus) *
                   (v * f.s_plus + bp.xi_plus + eta / 2.0 * f.s_plus);
    Complex minus = 2.0 * eta / v * (v * f.s_minus - bp.xi_minus - eta / 2.0 * f.s_minus) *
                    (v * f.s_plus - bp.xi_plus - eta / 2.0 * f.s_plus);
    for (Complex el : chain.eps) {
      plus /= (v + eta / 2.0) * (v + eta / 2.0) - el * el;
      minus /= (v - eta / 2.0) * (v - eta / 2.0) - el * el;
    }
    for (Eigen::Index i = 0; i < roots.size(); ++i) {
      if (i == k) continue;
      plus *= (v + eta) * (v + eta) - roots.squared(i);
      minus *= (v - eta) * (v - eta) - roots.squared(i);
    }
    r(k) = plus - minus + f.c_bae;
  }
  return r;
}

std::vector<BetheRoots> solve_full_bae_single_site(const ChainSpec& chain, const BoundaryParams& bp) {
  chain.validate_full_eta();
  if (chain.length != 1) throw DomainError("the direct full-eta solver handles L = 1 only");
  const FullEtaScalars f = full_eta_scalars(bp);
  const Complex eta = chain.eta, e = chain.eps[0] * chain.eps[0];
  auto lin = [](Complex c0, Complex c1) {
    CVector p(2);
    p << c0, c1;
    return p;
  };
  CVector dplus(3), dminus(3);
  dplus << eta * eta / 4.0 - e, eta, 1.0;
  dminus << eta * eta / 4.0 - e, -eta, 1.0;
  const CVector p = poly::multiply(lin(bp.xi_minus + eta / 2.0 * f.s_minus, f.s_minus),
                                   lin(bp.xi_plus + eta / 2.0 * f.s_plus, f.s_plus));
  const CVector m = poly::multiply(lin(-bp.xi_minus - eta / 2.0 * f.s_minus, f.s_minus),
                                   lin(-bp.xi_plus - eta / 2.0 * f.s_plus, f.s_plus));
  // v D+ D- times the residual; it vanishes at v = 0, so divide by v.
  CVector N = poly::add(2.0 * eta * poly::multiply(p, dminus), -2.0 * eta * poly::multiply(m, dplus));
  N = poly::add(N, f.c_bae * poly::shift(poly::multiply(dplus, dminus), 1));
  const double scale = N.cwiseAbs().maxCoeff();
  N = poly::trim(N, 1e-14);
  CVector reduced = N.tail(N.size() - 1);
  if (std::abs(N(0)) > 1e-12 * scale) throw DomainError("full-eta polynomial does not vanish at v = 0");

  std::vector<BetheRoots> out;
  std::vector<Complex> seen;
  for (Complex v : poly::roots(reduced)) {
    const Complex x = v * v;
    if (std::abs(x) < kPoleGuard) continue;
    if (std::abs((v + eta / 2.0) * (v + eta / 2.0) - e) < kPoleGuard ||
        std::abs((v - eta / 2.0) * (v - eta / 2.0) - e) < kPoleGuard) {
      continue;
    }
    bool duplicate = false;
    for (Complex s : seen) duplicate = duplicate || std::abs(s - x) < 1e-8 * std::max(1.0, std::abs(x));
    if (duplicate) continue;
    seen.push_back(x);
    CVector xs(1);
    xs << x;
    BetheRoots roots = BetheRoots::from_squared(xs, RootSource::FullEta);
    roots.residual_norm = max_abs(bae_full_residual(roots, chain, bp));
    out.push_back(std::move(roots));
  }
  return out;
}

std::vector<Complex> full_eta_energies_single_site(const ModelParams& params, const FullEtaOptions& options) {
  params.validate(62);
  if (params.length != 1) throw DomainError("full-eta energies are implemented for L = 1");
  if (params.Gamma == 0.0) throw DomainError("full-eta energies need Gamma != 0 (finite roots)");
  if (options.points < 4 || !(options.radius > 0.0)) throw DomainError("bad eta contour");
  const EtaExpansion ep = params.expansion();
  const Complex eps = params.eps()[0], e = eps * eps;
  const Complex kappa = ep.gamma * ep.lambda / 4.0;
  CVector quadratic(3);
  quadratic << -(ep.alpha + 1.0) * e - kappa * e * e, ep.alpha + 2.0 * kappa * e, -kappa;
  const CVector qc = poly::roots(quadratic);

  const double pi = std::acos(-1.0);
  std::vector<Complex> energies;
  for (Complex x0 : qc) {
    Complex acc = 0.0;
    for (int m = 0; m < options.points; ++m) {
      const Complex eta = std::polar(options.radius, 2.0 * pi * (m + 0.5) / options.points);
      const ChainSpec chain{1, {eps}, eta};
      const BoundaryParams bp = ep.at(eta);
      const std::vector<BetheRoots> sols = solve_full_bae_single_site(chain, bp);
      if (sols.empty()) throw ConvergenceError("no full-eta solution on the contour", 0.0);
      const BetheRoots* best = &sols.front();
      for (const auto& s : sols) {
        if (std::abs(s.squared(0) - x0) < std::abs(best->squared(0) - x0)) best = &s;
      }
      acc += lambda_full_residue(1, *best, chain, bp) / (eta * eta);
    }
    const Complex lambda1 = acc / static_cast<double>(options.points);
    const Complex lambda_star = lambda1 / eps + 0.25;
    energies.push_back(lambda_star / (2.0 * ep.alpha * e));
  }
  return energies;
}

SpectrumMatchReport spectrum_match(const ModelParams& params, const SpectrumMatchOptions& options) {
  params.validate(options.cap);
  const int n = params.length;
  const ManyBodyOperator h = hamiltonian(params);
  std::vector<ManyBodyOperator> taus;
  for (int j = 1; j <= n; ++j) taus.push_back(tau_star(j, params));
  SpectrumOptions so;
  so.seed = options.seed;
  const SpectrumResult ed = exact_spectrum(h, taus, so);

  SpectrumMatchReport report;
  report.sector_mode = params.Gamma == 0.0;
  if (report.sector_mode) {
    report.diagnostics.push_back(
        "Gamma = 0: inhomogeneous term vanishes; using u(1)-sector-resolved reconstruction");
  }
  const RVector sz = total_sz(n).matrix.diagonal().real();
  const BaeSystem system = BaeSystem::from_model(params, BaeForm::V);

  for (Eigen::Index m = 0; m < ed.eigenvalues.size(); ++m) {
    MatchRecord rec;
    rec.index = static_cast<int>(m);
    rec.energy_ed = ed.eigenvalues(m);
    rec.finite_roots = n;
    if (report.sector_mode) {
      const double mag = ed.eigenvectors.col(m).cwiseAbs2().dot(sz);
      rec.finite_roots = static_cast<int>(std::lround(mag + 0.5 * n));
    }
    try {
      Reconstruction r = roots_from_state(ed.eigenvectors.col(m), params, rec.finite_roots);
      rec.lambda_star = r.lambda_star;
      rec.condition = r.condition;
      rec.roots = r.roots;
      try {
        rec.roots = newton_refine(r.roots, system, options.newton);
      } catch (const std::exception& err) {
        // The y-form is better scaled when some roots sit near infinity.
        try {
          if (r.roots.finite_count() != n) throw;
          rec.roots = newton_refine(r.roots, BaeSystem::from_model(params, BaeForm::Y), options.newton);
        } catch (const std::exception&) {
          rec.diagnostic = std::string("refinement failed, keeping reconstruction: ") + err.what();
        }
      }
      rec.bae_residual = max_abs(bae_residual(rec.roots, params));
      rec.roots.residual_norm = rec.bae_residual;
      rec.energy_bethe = energy_from_roots(rec.roots, params).energy;
      rec.abs_error = std::abs(rec.energy_bethe - rec.energy_ed);
      rec.rel_error = rec.abs_error / std::max(std::abs(rec.energy_ed), 1.0);
      rec.matched = rec.bae_residual < options.residual_tolerance && rec.rel_error < options.tolerance;
      if (!rec.matched && rec.diagnostic.empty()) {
        rec.diagnostic = "residual or energy outside tolerance";
      }
    } catch (const std::exception& err) {
      rec.diagnostic = std::string("reconstruction failed: ") + err.what();
      rec.energy_bethe = Complex(std::numeric_limits<double>::quiet_NaN(), 0.0);
      rec.abs_error = rec.rel_error = rec.bae_residual = std::numeric_limits<double>::infinity();
    }
    report.max_rel_error = std::max(report.max_rel_error, rec.rel_error);
    report.max_residual = std::max(report.max_residual, rec.bae_residual);
    if (rec.matched) ++report.matched;
    report.records.push_back(std::move(rec));
  }
  return report;
}

}  // namespace openrg
