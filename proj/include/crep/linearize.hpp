#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Dense>

#include "crep/errors.hpp"
#include "crep/grid_model.hpp"
#include "crep/lyapunov.hpp"
#include "crep/power_flow.hpp"

namespace crep {

/// Eigenvalues of M^{-1/2} L_c M^{-1/2} below this are the structural zero mode.
inline constexpr double kZeroEigenvalueTolerance = 1e-10;
/// Relative Lyapunov residual accepted by solve_lyapunov.
inline constexpr double kLyapunovRelativeTolerance = 1e-8;

/// Linear stochastic system dx = A x dt + B dv, y = C x around delta*.
struct LinearizedModel {
    Eigen::MatrixXd laplacian;      // L_c, n x n
    Eigen::MatrixXd sys_matrix;     // A, 2n x 2n
    Eigen::MatrixXd input_matrix;   // B, 2n x n
    Eigen::MatrixXd output_matrix;  // C, (m+n) x 2n
};

/// Modal form with the zero (rotational) mode removed.
struct SpectralReduction {
    Eigen::VectorXd eigenvalues;    // ascending, eigenvalues[0] == 0
    Eigen::MatrixXd eigenvectors;   // orthogonal U
    Eigen::MatrixXd reduced_sys;    // A_2, (2n-1) x (2n-1)
    Eigen::MatrixXd reduced_input;  // B_2, (2n-1) x n
    Eigen::MatrixXd reduced_output; // C_2, (m+n) x (2n-1)
    Eigen::VectorXd inv_sqrt_inertia;
    Eigen::MatrixXd incidence;
};

/// Stationary covariance of the reduced state and of the output.
struct VarianceReport {
    Eigen::MatrixXd q_x;  // (2n-1) x (2n-1)
    Eigen::MatrixXd q_y;  // (m+n) x (m+n), blocks [[Q_delta, .], [Q_delta_omega, Q_omega]]
    Eigen::VectorXd sigma2_delta;
    Eigen::VectorXd sigma2_omega;
    double lyapunov_residual = 0.0;

    Eigen::MatrixXd q_delta() const {
        const auto m = sigma2_delta.size();
        return q_y.topLeftCorner(m, m);
    }
    Eigen::MatrixXd q_omega() const {
        const auto n = sigma2_omega.size();
        return q_y.bottomRightCorner(n, n);
    }
    Eigen::MatrixXd q_delta_omega() const {
        return q_y.bottomLeftCorner(sigma2_omega.size(), sigma2_delta.size());
    }
};

inline LinearizedModel build_linearization(const Network& net, const SynchronousState& state) {
    const auto n = static_cast<Eigen::Index>(net.node_count());
    const auto m = static_cast<Eigen::Index>(net.line_count());
    const Eigen::VectorXd inertia = net.inertias();
    const Eigen::VectorXd inv_m = inertia.cwiseInverse();

    LinearizedModel model;
    model.laplacian = weighted_laplacian(net, state.phase);

    model.sys_matrix = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    model.sys_matrix.topRightCorner(n, n).setIdentity();
    model.sys_matrix.bottomLeftCorner(n, n) = -(inv_m.asDiagonal() * model.laplacian);
    model.sys_matrix.bottomRightCorner(n, n) = -(inv_m.cwiseProduct(net.dampings())).asDiagonal().toDenseMatrix();

    model.input_matrix = Eigen::MatrixXd::Zero(2 * n, n);
    model.input_matrix.bottomRows(n) = inv_m.cwiseProduct(net.noises()).asDiagonal().toDenseMatrix();

    model.output_matrix = Eigen::MatrixXd::Zero(m + n, 2 * n);
    model.output_matrix.topLeftCorner(m, n) = incidence(net).transpose();
    model.output_matrix.bottomRightCorner(n, n).setIdentity();
    return model;
}

/// Eigen-decomposes the symmetric similarity M^{-1/2} L_c M^{-1/2} and forms
/// the reduced triple (A_2, B_2, C_2) by deleting the zero mode.
///
/// Throws DegenerateError if the smallest eigenvalue is not a numerical zero
/// or if lambda_2 <= 1e-10 (marginally stable state).
inline SpectralReduction spectral_reduce(const LinearizedModel& model, const Network& net) {
    const auto n = static_cast<Eigen::Index>(net.node_count());
    const auto m = static_cast<Eigen::Index>(net.line_count());
    if (n < 2) throw DegenerateError("spectral reduction needs at least two nodes");

    SpectralReduction red;
    red.inv_sqrt_inertia = net.inertias().cwiseSqrt().cwiseInverse();
    red.incidence = incidence(net);
    const auto w = red.inv_sqrt_inertia.asDiagonal();

    Eigen::MatrixXd sym = w * model.laplacian * w;
    sym = 0.5 * (sym + sym.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");

    red.eigenvalues = eig.eigenvalues();
    red.eigenvectors = eig.eigenvectors();
    if (std::abs(red.eigenvalues[0]) >= kZeroEigenvalueTolerance) {
        throw DegenerateError("weighted Laplacian has no numerical zero eigenvalue");
    }
    red.eigenvalues[0] = 0.0;
    if (red.eigenvalues[1] <= kZeroEigenvalueTolerance) {
        throw DegenerateError("second smallest eigenvalue is numerically zero; variance undefined");
    }

    // Sign convention: first nonzero entry of every eigenvector is positive.
    for (Eigen::Index q = 0; q < n; ++q) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(red.eigenvectors(i, q)) > 1e-12) {
                if (red.eigenvectors(i, q) < 0.0) red.eigenvectors.col(q) *= -1.0;
                break;
            }
        }
    }

    const Eigen::MatrixXd& u = red.eigenvectors;
    const Eigen::VectorXd inv_m = net.inertias().cwiseInverse();
    const Eigen::MatrixXd modal_damping = u.transpose() * inv_m.cwiseProduct(net.dampings()).asDiagonal() * u;

    // Full modal system in coordinates (z, w) = (U^T M^{1/2} delta, U^T M^{1/2} omega).
    Eigen::MatrixXd a_e = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    a_e.topRightCorner(n, n).setIdentity();
    a_e.bottomLeftCorner(n, n) = -red.eigenvalues.asDiagonal().toDenseMatrix();
    a_e.bottomRightCorner(n, n) = -modal_damping;

    Eigen::MatrixXd b_e = Eigen::MatrixXd::Zero(2 * n, n);
    b_e.bottomRows(n) = u.transpose() * red.inv_sqrt_inertia.cwiseProduct(net.noises()).asDiagonal();

    Eigen::MatrixXd c_e = Eigen::MatrixXd::Zero(m + n, 2 * n);
    c_e.topLeftCorner(m, n) = red.incidence.transpose() * w * u;
    c_e.bottomRightCorner(n, n) = w * u;

    const Eigen::Index r = 2 * n - 1;
    red.reduced_sys = a_e.bottomRightCorner(r, r);
    red.reduced_input = b_e.bottomRows(r);
    red.reduced_output = c_e.rightCols(r);
    return red;
}

/// Stationary covariance: A_2 Q + Q A_2^T + B_2 B_2^T = 0, Q_y = C_2 Q C_2^T.
inline VarianceReport solve_lyapunov(const SpectralReduction& red) {
    const Eigen::MatrixXd bbt = red.reduced_input * red.reduced_input.transpose();
    VarianceReport report;
    report.q_x = solve_continuous_lyapunov(red.reduced_sys, bbt);
    report.lyapunov_residual = lyapunov_residual(red.reduced_sys, report.q_x, bbt);
    const double scale = bbt.cwiseAbs().maxCoeff();
    if (!report.q_x.allFinite() || report.lyapunov_residual > kLyapunovRelativeTolerance * scale) {
        throw NumericalError("Lyapunov residual exceeds tolerance; reduced system is near singular");
    }

    report.q_y = red.reduced_output * report.q_x * red.reduced_output.transpose();
    report.q_y = 0.5 * (report.q_y + report.q_y.transpose());
    const auto m = red.incidence.cols();
    const auto n = red.incidence.rows();
    report.sigma2_delta = report.q_y.diagonal().head(m).cwiseMax(0.0);
    report.sigma2_omega = report.q_y.diagonal().tail(n).cwiseMax(0.0);
    return report;
}

/// S = C^T M^{-1/2} U_hat Lambda_{n-1}^{-1} U_hat^T M^{-1/2} C. With uniform
/// noise-to-damping ratio eta, Q_delta = eta/2 * S; in general
/// eta_min/2 * S <= Q_delta <= eta_max/2 * S.
inline Eigen::MatrixXd weighted_resistance_matrix(const SpectralReduction& red) {
    const auto n = red.eigenvalues.size();
    const Eigen::MatrixXd g = red.incidence.transpose() * red.inv_sqrt_inertia.asDiagonal() *
                              red.eigenvectors.rightCols(n - 1);
    return g * red.eigenvalues.tail(n - 1).cwiseInverse().asDiagonal() * g.transpose();
}

/// (min, max) over nodes of b_i^2 / d_i.
inline std::pair<double, double> noise_damping_ratio_bounds(const Network& net) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& node : net.nodes()) {
        const double eta = node.noise * node.noise / node.damping;
        lo = std::min(lo, eta);
        hi = std::max(hi, eta);
    }
    return {lo, hi};
}

}  // namespace crep
