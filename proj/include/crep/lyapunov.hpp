#pragma once

#include <algorithm>
#include <complex>

#include <Eigen/Dense>

#include "crep/errors.hpp"

namespace crep {

/// max |A X + X A^T + W|
inline double lyapunov_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x, const Eigen::MatrixXd& w) {
    return (a * x + x * a.transpose() + w).cwiseAbs().maxCoeff();
}

/// Solves A X + X A^T + W = 0 for X (Bartels-Stewart on the complex Schur
/// form A = Z T Z^H). Requires lambda_i(A) + conj(lambda_j(A)) != 0 for all
/// pairs, which holds whenever A is Hurwitz. The result is symmetrized.
inline Eigen::MatrixXd solve_continuous_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& w) {
    using Complex = std::complex<double>;
    const Eigen::Index n = a.rows();
    if (a.cols() != n || w.rows() != n || w.cols() != n) {
        throw NumericalError("Lyapunov operands have mismatched shapes");
    }
    if (n == 0) return Eigen::MatrixXd(0, 0);

    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(a.cast<Complex>());
    if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition failed");
    const Eigen::MatrixXcd& t = schur.matrixT();
    const Eigen::MatrixXcd& z = schur.matrixU();

    // T Y + Y T^H = F,  Y = Z^H X Z,  F = -Z^H W Z.
    const Eigen::MatrixXcd f = -(z.adjoint() * w.cast<Complex>() * z);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    const double scale = std::max(t.cwiseAbs().maxCoeff(), 1.0);

    // Column j of Y T^H couples only columns k >= j, so sweep backwards.
    for (Eigen::Index j = n - 1; j >= 0; --j) {
        Eigen::VectorXcd rhs = f.col(j);
        for (Eigen::Index k = j + 1; k < n; ++k) rhs -= std::conj(t(j, k)) * y.col(k);

        const Complex shift = std::conj(t(j, j));
        for (Eigen::Index i = n - 1; i >= 0; --i) {
            Complex acc = rhs[i];
            for (Eigen::Index k = i + 1; k < n; ++k) acc -= t(i, k) * y(k, j);
            const Complex pivot = t(i, i) + shift;
            if (std::abs(pivot) <= 1e-14 * scale) {
                throw NumericalError("Lyapunov operator is singular (A has eigenvalues symmetric about the imaginary axis)");
            }
            y(i, j) = acc / pivot;
        }
    }

    Eigen::MatrixXd x = (z * y * z.adjoint()).real();
    return 0.5 * (x + x.transpose());
}

}  // namespace crep
