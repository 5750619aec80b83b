#include <catch_amalgamated.hpp>

#include <random>

#include <Eigen/Dense>

#include "crep/lyapunov.hpp"

namespace {

// Column-major vec: (I kron A + A kron I) vec(X) = -vec(W).
Eigen::MatrixXd kronecker_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& w) {
    const auto n = a.rows();
    Eigen::MatrixXd op = Eigen::MatrixXd::Zero(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index k = 0; k < n; ++k) {
                // (A X)_{ij} = sum_k A_ik X_kj ; (X A^T)_{ij} = sum_k X_ik A_jk
                op(i + j * n, k + j * n) += a(i, k);
                op(i + j * n, i + k * n) += a(j, k);
            }
        }
    }
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(w.data(), n * n);
    const Eigen::VectorXd x = op.fullPivLu().solve(rhs);
    return Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
}

Eigen::MatrixXd random_hurwitz(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = g(rng);
    Eigen::EigenSolver<Eigen::MatrixXd> eig(a, false);
    const double shift = eig.eigenvalues().real().maxCoeff() + 0.1 + std::abs(g(rng));
    a.diagonal().array() -= shift;
    return a;
}

}  // namespace

TEST_CASE("Schur solver agrees with the Kronecker-product solve") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 9);
        const Eigen::MatrixXd a = random_hurwitz(rng, n);
        Eigen::MatrixXd b(n, 1 + static_cast<Eigen::Index>(rng() % 3));
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = g(rng);
        const Eigen::MatrixXd w = b * b.transpose();

        const Eigen::MatrixXd x = crep::solve_continuous_lyapunov(a, w);
        const Eigen::MatrixXd oracle = kronecker_solve(a, w);
        const double scale = std::max(1.0, oracle.cwiseAbs().maxCoeff());
        CHECK((x - oracle).cwiseAbs().maxCoeff() <= 1e-9 * scale);
        CHECK(crep::lyapunov_residual(a, x, w) <= 1e-9 * std::max(1.0, w.cwiseAbs().maxCoeff()) * scale);
        CHECK((x - x.transpose()).cwiseAbs().maxCoeff() == 0.0);
        // Covariance of a stable system driven by white noise is positive semidefinite.
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(x).eigenvalues().minCoeff() >= -1e-9 * scale);
    }
}

TEST_CASE("scalar and diagonal closed forms") {
    Eigen::MatrixXd a(1, 1), w(1, 1);
    a << -2.0;
    w << 3.0;
    CHECK_THAT(crep::solve_continuous_lyapunov(a, w)(0, 0), Catch::Matchers::WithinRel(0.75, 1e-15));

    Eigen::MatrixXd d = Eigen::Vector3d(-1.0, -2.0, -4.0).asDiagonal();
    Eigen::MatrixXd wd = Eigen::Matrix3d::Ones();
    const auto x = crep::solve_continuous_lyapunov(d, wd);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK_THAT(x(i, j), Catch::Matchers::WithinRel(1.0 / -(d(i, i) + d(j, j)), 1e-14));
}

TEST_CASE("rotation-dominated system with complex eigenvalues") {
    Eigen::MatrixXd a(2, 2);
    a << -0.1, 5.0, -5.0, -0.1;
    const Eigen::MatrixXd w = Eigen::Matrix2d::Identity();
    // A = -0.1 I + skew, so X = I / 0.2.
    const auto x = crep::solve_continuous_lyapunov(a, w);
    CHECK((x - 5.0 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("singular operator and bad shapes raise NumericalError") {
    Eigen::MatrixXd a(2, 2);
    a << 1.0, 0.0, 0.0, -1.0;  // lambda_1 + lambda_2 = 0
    CHECK_THROWS_AS(crep::solve_continuous_lyapunov(a, Eigen::Matrix2d::Identity()), crep::NumericalError);
    CHECK_THROWS_AS(crep::solve_continuous_lyapunov(a, Eigen::Matrix3d::Identity()), crep::NumericalError);
    CHECK(crep::solve_continuous_lyapunov(Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, 0)).size() == 0);
}
