#ifndef CALLO_LINALG_HPP
#define CALLO_LINALG_HPP

#include "callo/tensor.hpp"

namespace callo {

struct EigenResult {
    Tensor values;  // [n], descending
    Tensor vectors; // [n,n], column i pairs with values[i]
};

// Symmetric eigendecomposition by cyclic Jacobi rotations. Deterministic;
// columns carry a canonical sign (largest-magnitude entry positive).
EigenResult jacobi_eigen(const Tensor& sym);

} // namespace callo

#endif // CALLO_LINALG_HPP
