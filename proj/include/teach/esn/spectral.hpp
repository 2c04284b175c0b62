#pragma once

#include <Eigen/Sparse>

#include <cstdint>

namespace teach::esn {

struct SpectralEstimate {
    double radius = 0;
    int iterations = 0;
    bool converged = false;
};

/// Largest |eigenvalue| of a square matrix by block power iteration with
/// Rayleigh-Ritz extraction, so complex-conjugate dominant pairs converge
/// as well as real ones. Stops when the Ritz residual falls below
/// tol * radius. When the block spans the whole space the Ritz values are
/// the exact spectrum. A defective dominant eigenvalue (e.g. a nilpotent
/// matrix larger than the block) converges slowly and may come back with
/// `converged` false. Deterministic per seed.
SpectralEstimate spectral_radius(const Eigen::SparseMatrix<double>& m, double tol = 1e-9, int max_iter = 20000,
                                 std::uint64_t seed = 0x5eed);

}  // namespace teach::esn
