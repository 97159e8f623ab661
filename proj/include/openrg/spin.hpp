#pragma once

// Spin-1/2 chain primitives shared by the operator and transfer-matrix code.
//
// Basis convention: a basis state is an integer b in [0, 2^L). Bit (j-1) of b
// is set iff site j is spin-up (S^z = +1/2). Site 1 is the least significant
// bit. Auxiliary spaces, when present, are leading (more significant) tensor
// factors, and inside a 2x2 auxiliary matrix row/column 0 is "up".

#include <cstdint>
#include <initializer_list>
#include <utility>

#include "openrg/linalg.hpp"

namespace openrg {

inline constexpr int kDefaultLengthCap = 12;

enum class SpinOp { Plus, Minus, Z };

struct ManyBodyOperator {
  CMatrix matrix;
  int length = 0;      // number of physical sites
  int aux_factors = 0; // leading 2-dim auxiliary factors

  Eigen::Index dim() const { return matrix.rows(); }
  bool is_hermitian(double tol = 1e-12) const;
};

/// 2^L, throwing if L is outside [0, cap].
std::size_t hilbert_dim(int length, int cap = kDefaultLengthCap);

/// Single-site operator with 1-based site index, identity elsewhere.
ManyBodyOperator site_operator(SpinOp kind, int site, int length);

/// Matrix element of a site operator acting on basis state b: returns
/// (amplitude, image). Amplitude 0 means the state is annihilated.
std::pair<double, std::uint64_t> apply_site(SpinOp kind, int site, std::uint64_t b);

struct SiteFactor {
  SpinOp op;
  int site;  // 1-based
};

/// Accumulates coefficient * (product of site operators) terms into a dense
/// matrix by acting on basis states; factors apply right to left.
class OperatorBuilder {
 public:
  explicit OperatorBuilder(int length);

  void add_identity(Complex coeff);
  void add(Complex coeff, std::initializer_list<SiteFactor> factors);

  const CMatrix& matrix() const { return matrix_; }
  ManyBodyOperator build() &&;

 private:
  int length_;
  CMatrix matrix_;
};

/// Total magnetisation operator sum_k S_k^z.
ManyBodyOperator total_sz(int length);

}  // namespace openrg
