#pragma once

// Bethe ansatz side of the model: eigenvalue formulas, the quasi-classical
// and full-eta Bethe equations, root solvers, the energy formula and the
// end-to-end comparison against exact diagonalisation.
//
// Roots are stored as squared roots x_i = v_i^2 together with y_i = 1 / x_i.
// A root with |y_i| below the infinity threshold is a root at infinity in v:
// its y is stored as exactly 0 and its x as +inf.

#include <cstdint>
#include <string>
#include <vector>

#include "openrg/algebra.hpp"
#include "openrg/errors.hpp"
#include "openrg/manybody.hpp"

namespace openrg {

inline constexpr double kInfinityThreshold = 1e-10;
inline constexpr double kCollisionTol = 1e-9;
inline constexpr double kConditionCap = 1e12;

enum class RootSource { Reconstruction, Newton, Continuation, HeineStieltjes, FullEta };
const char* to_string(RootSource source);

struct BetheRoots {
  CVector squared;                // x_i = v_i^2
  CVector inverse;                // y_i = v_i^-2
  std::vector<bool> at_infinity;  // y_i == 0
  double residual_norm = -1.0;    // max |r_k|, negative until computed
  RootSource source = RootSource::Reconstruction;
  bool near_collision = false;    // min |x_i - x_k| (or |y_i - y_k|) < kCollisionTol
  bool near_pole = false;         // some x_i within kCollisionTol of an eps_l^2
  int iterations = 0;

  static BetheRoots from_squared(const CVector& x, RootSource source = RootSource::Reconstruction);
  static BetheRoots from_inverse(const CVector& y, RootSource source = RootSource::Reconstruction,
                                 double infinity_tol = kInfinityThreshold);

  int size() const { return static_cast<int>(squared.size()); }
  int finite_count() const;
  /// Sets near_collision and near_pole against the given inhomogeneities.
  void update_flags(const std::vector<Complex>& eps);
};

struct QPolynomial {
  CVector coefficients;  // ascending, monic
  CVector roots;

  static QPolynomial from_roots(const CVector& roots);
  /// Monic coefficients given the L non-leading ones.
  static QPolynomial from_coefficients(const CVector& coefficients);
  /// max |coefficients - expand(roots)| relative to max |coefficients|.
  double reexpansion_error() const;
};

// Conserved-operator eigenvalues.
Complex qc_conserved_eigenvalue(int j, const BetheRoots& roots, const ModelParams& params);
CVector qc_conserved_eigenvalues(const BetheRoots& roots, const ModelParams& params);
Complex qc_conserved_eigenvalue_general(int j, const BetheRoots& roots, const ChainSpec& chain,
                                        const EtaExpansion& ep);

// Quasi-classical Bethe equations. Roots at infinity are skipped (they
// decouple) and are only admitted when gamma * lambda == 0.
CVector bae_residual(const BetheRoots& roots, const ModelParams& params);
CVector bae_residual_y(const BetheRoots& roots, const ModelParams& params);
/// The nine-parameter equations, divided by x_k so that the reduced case
/// coincides with bae_residual.
CVector bae_residual_general(const BetheRoots& roots, const ChainSpec& chain, const EtaExpansion& ep);

enum class BaeForm { V, Y, General };

/// One of the three residual forms bundled with its analytic Jacobian. The
/// V and General forms are differentiated in x, the Y form in y; only the
/// finite roots are unknowns.
struct BaeSystem {
  BaeForm form = BaeForm::V;
  std::vector<Complex> eps;
  EtaExpansion ep{};

  static BaeSystem from_model(const ModelParams& params, BaeForm form = BaeForm::V);
  static BaeSystem general(const ChainSpec& chain, const EtaExpansion& ep);

  CVector residual(const BetheRoots& roots) const;
  CMatrix jacobian(const BetheRoots& roots) const;
};

struct EnergyEstimate {
  Complex energy;
  bool residual_warning = false;  // roots.residual_norm > 1e-6
};

EnergyEstimate energy_from_roots(const BetheRoots& roots, const ModelParams& params);

/// (1 / 2 alpha) sum_j eps_j^-2 lambda_j^*. Equals the energy at Bethe roots.
Complex conserved_energy(const BetheRoots& roots, const ModelParams& params);

struct Reconstruction {
  BetheRoots roots;
  double condition = 0.0;
  double consistency = 0.0;  // least-squares residual when finite_roots < L
  CVector weights;           // Cauchy weights c_m
  CVector lambda_star;       // the eigenvalues the roots were built from
};

/// Linear recovery of the roots from conserved-operator eigenvalues. With
/// finite_roots = M < L the remaining L - M roots are placed at infinity
/// (u(1) sector with M up spins, Gamma = 0). Throws IllConditionedError when
/// the condition number exceeds kConditionCap.
Reconstruction roots_from_conserved(const CVector& lambda_star, const ModelParams& params,
                                    int finite_roots = -1);
/// Reconstruction from an eigenvector of the reduced family. The
/// eigenvalues are re-evaluated as Rayleigh quotients in quadruple precision;
/// roots far from every z_j^2 are sensitive far beyond double rounding.
Reconstruction roots_from_state(const CVector& state, const ModelParams& params, int finite_roots = -1);
Reconstruction roots_from_conserved_general(const CVector& lambda, const ChainSpec& chain,
                                            const EtaExpansion& ep);

struct NewtonOptions {
  int max_iterations = 100;
  double tolerance = 1e-12;
  double step_tolerance = 1e-14;
  /// A step-size stop is only accepted below this residual.
  double accept_tolerance = 1e-8;
  int max_halvings = 20;
};

/// Damped Newton on the chosen residual. Throws ConvergenceError on failure
/// and DomainError on a singular Jacobian or configuration.
BetheRoots newton_refine(const BetheRoots& initial, const BaeSystem& system,
                         const NewtonOptions& options = {});

struct ContinuationOptions {
  double min_step = 1e-6;
  double escape_tol = 1e-6;
  double collision_tol = kCollisionTol;
  /// A corrector may move a root by at most this fraction of its size
  /// (floored at escape_tol); larger moves count as a branch jump.
  double max_corrector = 0.2;
  NewtonOptions newton{};
};

struct ContinuationPoint {
  double Gamma = 0.0;
  BetheRoots roots;
  Complex energy;
  bool escaped = false;   // some |y_i| < escape_tol
  bool collided = false;  // tracking stopped at a collision
};

/// Raised when the step control fails; carries the last converged point.
class ContinuationError : public ConvergenceError {
 public:
  ContinuationError(const std::string& what, double last_residual, ContinuationPoint last_good)
      : ConvergenceError(what, last_residual), last_good_(std::move(last_good)) {}
  const ContinuationPoint& last_good() const noexcept { return last_good_; }

 private:
  ContinuationPoint last_good_;
};

/// Tracks a root configuration along the Gamma path using the y-form
/// equations. Tracking stops (without throwing) at a collision; the last
/// point then has collided = true.
std::vector<ContinuationPoint> continuation_solve(const ModelParams& params,
                                                  const std::vector<double>& gamma_path,
                                                  const BetheRoots& seeds,
                                                  const ContinuationOptions& options = {});

struct HeineStieltjesResult {
  QPolynomial Q;
  CVector V;  // ascending, degree L
  double coefficient_residual = 0.0;
  int iterations = 0;
  BetheRoots roots;
};

/// Coefficients of x P Q'' + ((alpha + 1) P - x P') Q' + V Q - (gamma lambda / 4) P^2.
CVector heine_stieltjes_residual(const ModelParams& params, const CVector& q, const CVector& v);
/// Least-squares V for a fixed monic Q.
HeineStieltjesResult van_vleck_for(const ModelParams& params, const QPolynomial& Q);
HeineStieltjesResult heine_stieltjes_solve(const ModelParams& params, const QPolynomial& initial,
                                           const NewtonOptions& options = {});

// Full-eta transfer-matrix eigenvalue and Bethe equations.
Complex lambda_full(Complex u, const BetheRoots& roots, const ChainSpec& chain, const BoundaryParams& bp);
/// lim_{u -> eps_j} (u - eps_j) Lambda(u), evaluated in closed form.
Complex lambda_full_residue(int j, const BetheRoots& roots, const ChainSpec& chain,
                            const BoundaryParams& bp);
/// The Bethe residual of each root, evaluated at v_k = +sqrt(x_k) unless
/// `negate` selects -sqrt(x_k).
CVector bae_full_residual(const BetheRoots& roots, const ChainSpec& chain, const BoundaryParams& bp,
                          bool negate = false);
/// All admissible solutions of the single-site full-eta equation.
std::vector<BetheRoots> solve_full_bae_single_site(const ChainSpec& chain, const BoundaryParams& bp);

struct FullEtaOptions {
  double radius = 0.05;
  int points = 16;
};

/// Single-site energies from the full-eta machinery: at each eta on a circle
/// the Bethe equation is solved, the residue of Lambda at eps_1 gives eta^2
/// lambda_1(eta), and the circle average returns lambda_1 at eta = 0.
/// Energies are ordered like the quasi-classical roots they continue.
std::vector<Complex> full_eta_energies_single_site(const ModelParams& params,
                                                   const FullEtaOptions& options = {});

struct SpectrumMatchOptions {
  std::uint64_t seed = 1;
  double tolerance = 1e-8;
  double residual_tolerance = 1e-8;
  int cap = kDefaultLengthCap;
  NewtonOptions newton{};
};

struct MatchRecord {
  int index = 0;
  double energy_ed = 0.0;
  Complex energy_bethe;
  double abs_error = 0.0;
  double rel_error = 0.0;  // |dE| / max(|E_ed|, 1)
  double bae_residual = 0.0;
  int finite_roots = 0;
  double condition = 0.0;
  CVector lambda_star;
  BetheRoots roots;
  bool matched = false;
  std::string diagnostic;
};

struct SpectrumMatchReport {
  std::vector<MatchRecord> records;
  double max_rel_error = 0.0;
  double max_residual = 0.0;
  int matched = 0;
  bool sector_mode = false;  // Gamma = 0: u(1)-sector-resolved reconstruction
  std::vector<std::string> diagnostics;

  bool all_matched() const { return matched == static_cast<int>(records.size()); }
};

SpectrumMatchReport spectrum_match(const ModelParams& params, const SpectrumMatchOptions& options = {});

}  // namespace openrg
