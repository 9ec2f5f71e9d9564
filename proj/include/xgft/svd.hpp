#pragma once

#include <vector>

#include "xgft/tensor.hpp"

namespace xgft {

struct SvdResult {
  Tensor u;                    // D×D, orthogonal
  std::vector<double> sigma;   // non-negative, descending
  Tensor v;                    // D×D, orthogonal
};

// Full SVD of a square matrix by cyclic one-sided Jacobi. Sign convention:
// the largest-magnitude entry of each U column is non-negative. Rejects
// non-finite inputs.
SvdResult svd_decompose(const Tensor& a);

// ‖U·diag(sigma)·Vᵀ − A‖_F, for reconstruction checks.
double svd_reconstruction_error(const SvdResult& r, const Tensor& a);

// max |MᵀM − I| entry, for orthogonality checks.
double orthogonality_defect(const Tensor& m);

}  // namespace xgft
