#include "teach/esn/spectral.hpp"

#include "teach/common/error.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <random>

namespace teach::esn {
namespace {

constexpr Eigen::Index kBlock = 24;

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

}  // namespace

SpectralEstimate spectral_radius(const Eigen::SparseMatrix<double>& m, double tol, int max_iter, std::uint64_t seed) {
    if (m.rows() != m.cols()) {
        throw ValidationError("spectral radius needs a square matrix");
    }
    const Eigen::Index n = m.rows();
    if (n == 0 || m.nonZeros() == 0) {
        return {0.0, 0, true};
    }
    const Eigen::Index k = std::min(n, kBlock);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd q(n, k);
    for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index i = 0; i < n; ++i) q(i, j) = gauss(rng);
    q = orthonormalize(q);

    SpectralEstimate est;
    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::MatrixXd wq = m * q;
        if (wq.norm() == 0.0) {
            return {0.0, it, true};
        }
        const Eigen::MatrixXd h = q.transpose() * wq;
        Eigen::EigenSolver<Eigen::MatrixXd> ritz(h, /*computeEigenvectors=*/true);
        Eigen::Index best = 0;
        ritz.eigenvalues().cwiseAbs().maxCoeff(&best);
        const std::complex<double> theta = ritz.eigenvalues()(best);
        est.radius = std::abs(theta);
        est.iterations = it;

        if (k == n) {
            // q is a basis of the full space, so h is similar to m.
            est.converged = true;
            return est;
        }
        const Eigen::VectorXcd y = ritz.eigenvectors().col(best);
        const Eigen::VectorXcd v = q.cast<std::complex<double>>() * y;
        const Eigen::VectorXcd wv = wq.cast<std::complex<double>>() * y;
        const double residual = (wv - theta * v).norm() / v.norm();
        if (residual <= tol * est.radius || est.radius == 0.0) {
            est.converged = true;
            return est;
        }
        q = orthonormalize(wq);
    }
    return est;
}

}  // namespace teach::esn
