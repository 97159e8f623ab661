#include "openrg/spin.hpp"

#include <string>
#include <vector>

#include "openrg/errors.hpp"

namespace openrg {

bool ManyBodyOperator::is_hermitian(double tol) const {
  const double scale = std::max(matrix.norm(), 1.0);
  return (matrix - matrix.adjoint()).norm() <= tol * scale;
}

std::size_t hilbert_dim(int length, int cap) {
  if (length < 0 || length > cap) {
    throw DomainError("chain length " + std::to_string(length) +
                      " outside [0, " + std::to_string(cap) + "]");
  }
  return std::size_t{1} << length;
}

std::pair<double, std::uint64_t> apply_site(SpinOp kind, int site, std::uint64_t b) {
  const std::uint64_t bit = std::uint64_t{1} << (site - 1);
  const bool up = (b & bit) != 0;
  switch (kind) {
    case SpinOp::Z:
      return {up ? 0.5 : -0.5, b};
    case SpinOp::Plus:
      return up ? std::pair{0.0, b} : std::pair{1.0, b | bit};
    case SpinOp::Minus:
      return up ? std::pair{1.0, b & ~bit} : std::pair{0.0, b};
  }
  return {0.0, b};
}

ManyBodyOperator site_operator(SpinOp kind, int site, int length) {
  if (site < 1 || site > length) {
    throw DomainError("site index " + std::to_string(site) + " outside [1, " +
                      std::to_string(length) + "]");
  }
  OperatorBuilder builder(length);
  builder.add(1.0, {{kind, site}});
  return std::move(builder).build();
}

OperatorBuilder::OperatorBuilder(int length) : length_(length) {
  const auto n = static_cast<Eigen::Index>(hilbert_dim(length, 62));
  matrix_ = CMatrix::Zero(n, n);
}

void OperatorBuilder::add_identity(Complex coeff) {
  matrix_.diagonal().array() += coeff;
}

void OperatorBuilder::add(Complex coeff, std::initializer_list<SiteFactor> factors) {
  if (coeff == Complex{}) return;
  std::vector<SiteFactor> ops(factors);
  for (const auto& f : ops) {
    if (f.site < 1 || f.site > length_) {
      throw DomainError("site index " + std::to_string(f.site) + " out of range");
    }
  }
  const auto n = static_cast<std::uint64_t>(matrix_.rows());
  for (std::uint64_t col = 0; col < n; ++col) {
    double amp = 1.0;
    std::uint64_t state = col;
    for (auto it = ops.rbegin(); it != ops.rend() && amp != 0.0; ++it) {
      auto [a, next] = apply_site(it->op, it->site, state);
      amp *= a;
      state = next;
    }
    if (amp != 0.0) {
      matrix_(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(col)) +=
          coeff * amp;
    }
  }
}

ManyBodyOperator OperatorBuilder::build() && {
  return ManyBodyOperator{std::move(matrix_), length_, 0};
}

ManyBodyOperator total_sz(int length) {
  OperatorBuilder builder(length);
  for (int k = 1; k <= length; ++k) builder.add(1.0, {{SpinOp::Z, k}});
  return std::move(builder).build();
}

}  // namespace openrg
