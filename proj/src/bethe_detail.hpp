#pragma once

// Helpers shared between the Bethe sources.

#include "openrg/algebra.hpp"

namespace openrg::detail {

/// lambda_j = A_j (sum_k e_j/(e_j - e_k) - sum_i 2 e_j/(e_j - x_i) + 3/4) + C_j
struct GeneralEigenvalueTerms {
  Complex A, C;
};

GeneralEigenvalueTerms general_eigenvalue_terms(Complex eps, const EtaExpansion& ep);

}  // namespace openrg::detail
