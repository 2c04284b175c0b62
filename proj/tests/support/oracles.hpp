#pragma once

// Reference computations used only by tests. Deliberately naive.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace teach::testing_support {

/// Ridge readout by forming the normal equations in long double and solving
/// them with partially pivoted Gaussian elimination.
inline std::vector<long double> ridge_oracle(const Eigen::MatrixXd& s, const Eigen::RowVectorXd& y, double lambda) {
    const auto d = static_cast<std::size_t>(s.rows());
    const auto t = static_cast<std::size_t>(s.cols());
    std::vector<std::vector<long double>> a(d, std::vector<long double>(d + 1, 0.0L));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            long double acc = 0;
            for (std::size_t c = 0; c < t; ++c) {
                acc += static_cast<long double>(s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c))) *
                       s(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
            }
            a[i][j] = acc + (i == j ? static_cast<long double>(lambda) : 0.0L);
        }
        long double rhs = 0;
        for (std::size_t c = 0; c < t; ++c) {
            rhs += static_cast<long double>(s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c))) *
                   y(static_cast<Eigen::Index>(c));
        }
        a[i][d] = rhs;
    }
    for (std::size_t col = 0; col < d; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < d; ++r) {
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        }
        if (a[pivot][col] == 0) throw std::runtime_error("oracle: singular");
        std::swap(a[col], a[pivot]);
        for (std::size_t r = col + 1; r < d; ++r) {
            const long double f = a[r][col] / a[col][col];
            for (std::size_t k = col; k <= d; ++k) a[r][k] -= f * a[col][k];
        }
    }
    std::vector<long double> w(d);
    for (std::size_t i = d; i-- > 0;) {
        long double acc = a[i][d];
        for (std::size_t k = i + 1; k < d; ++k) acc -= a[i][k] * w[k];
        w[i] = acc / a[i][i];
    }
    return w;
}

/// Largest |eigenvalue| from a full dense eigendecomposition.
inline double dense_spectral_radius(const Eigen::SparseMatrix<double>& m) {
    const Eigen::MatrixXd d(m);
    return Eigen::EigenSolver<Eigen::MatrixXd>(d, false).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace teach::testing_support
