#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "crep/errors.hpp"
#include "crep/grid_model.hpp"

namespace crep {

/// Phase-security margin: a line difference counts as inside the domain only
/// if it is strictly below pi/2 - kDomainMargin.
inline constexpr double kDomainMargin = 1e-12;

struct PowerFlowOptions {
    double tol = 1e-10;
    int max_iter = 50;
    int max_halvings = 30;
};

/// Equilibrium of the lossless swing network, gauge fixed so phase[0] == 0.
struct SynchronousState {
    Eigen::VectorXd phase;               // delta*, radians
    Eigen::VectorXd output_phase_diffs;  // C^T delta*, one entry per line
    double residual = 0.0;               // max-norm power mismatch
    int iterations = 0;
};

/// P_i - sum_j l_ij sin(delta_i - delta_j) for every node.
inline Eigen::VectorXd power_mismatch(const Network& net, const Eigen::VectorXd& phase) {
    Eigen::VectorXd mismatch = net.powers();
    for (std::size_t k = 0; k < net.line_count(); ++k) {
        const auto i = static_cast<Eigen::Index>(net.from_index(k));
        const auto j = static_cast<Eigen::Index>(net.to_index(k));
        const double flow = net.lines()[k].capacity * std::sin(phase[i] - phase[j]);
        mismatch[i] -= flow;
        mismatch[j] += flow;
    }
    return mismatch;
}

/// Weighted Laplacian with weights l_ij cos(delta_i - delta_j); also the
/// Jacobian of the line-flow sums with respect to the phases.
inline Eigen::MatrixXd weighted_laplacian(const Network& net, const Eigen::VectorXd& phase) {
    const auto n = static_cast<Eigen::Index>(net.node_count());
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < net.line_count(); ++k) {
        const auto i = static_cast<Eigen::Index>(net.from_index(k));
        const auto j = static_cast<Eigen::Index>(net.to_index(k));
        const double w = net.lines()[k].capacity * std::cos(phase[i] - phase[j]);
        lap(i, j) -= w;
        lap(j, i) -= w;
        lap(i, i) += w;
        lap(j, j) += w;
    }
    return lap;
}

inline bool in_phase_domain(const Network& net, const Eigen::VectorXd& phase) {
    const double bound = std::numbers::pi / 2.0 - kDomainMargin;
    for (std::size_t k = 0; k < net.line_count(); ++k) {
        const double diff = phase[static_cast<Eigen::Index>(net.from_index(k))] -
                            phase[static_cast<Eigen::Index>(net.to_index(k))];
        if (!(std::abs(diff) < bound)) return false;
    }
    return true;
}

inline Eigen::VectorXd line_phase_differences(const Network& net, const Eigen::VectorXd& phase) {
    Eigen::VectorXd diffs(static_cast<Eigen::Index>(net.line_count()));
    for (std::size_t k = 0; k < net.line_count(); ++k) {
        diffs[static_cast<Eigen::Index>(k)] = phase[static_cast<Eigen::Index>(net.from_index(k))] -
                                             phase[static_cast<Eigen::Index>(net.to_index(k))];
    }
    return diffs;
}

namespace detail {

// Mismatch with the global imbalance (sum P_i, at most 1e-9 for a valid
// network) removed; no phase vector can change that part.
inline Eigen::VectorXd balanced_mismatch(const Network& net, const Eigen::VectorXd& phase) {
    Eigen::VectorXd mismatch = power_mismatch(net, phase);
    mismatch.array() -= mismatch.mean();
    return mismatch;
}

}  // namespace detail

/// Damped Newton-Raphson on the reduced system (node 1 is the phase
/// reference), started from the flat profile.
///
/// Throws NoSynchronousStateError if the iteration stalls, exceeds max_iter,
/// or converges to a point outside |delta_i - delta_j| < pi/2.
inline SynchronousState solve_synchronous_state(const Network& net, const PowerFlowOptions& options = {}) {
    if (!(options.tol > 0.0)) throw DomainError("power flow tolerance must be positive");
    using Reason = NoSynchronousStateError::Reason;

    const auto n = static_cast<Eigen::Index>(net.node_count());
    Eigen::VectorXd phase = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd mismatch = detail::balanced_mismatch(net, phase);
    double residual = mismatch.lpNorm<Eigen::Infinity>();
    int iter = 0;

    while (residual > options.tol) {
        if (iter >= options.max_iter) {
            throw NoSynchronousStateError(Reason::no_convergence,
                                          "Newton iteration did not converge in " +
                                              std::to_string(options.max_iter) + " iterations");
        }
        ++iter;
        const Eigen::MatrixXd jac = weighted_laplacian(net, phase).bottomRightCorner(n - 1, n - 1);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible()) {
            throw NoSynchronousStateError(Reason::no_convergence, "singular power-flow Jacobian");
        }
        Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
        step.tail(n - 1) = lu.solve(mismatch.tail(n - 1));
        if (!step.allFinite()) throw NoSynchronousStateError(Reason::no_convergence, "non-finite Newton step");

        bool decreased = false;
        for (int h = 0; h <= options.max_halvings; ++h) {
            Eigen::VectorXd trial = phase + step;
            Eigen::VectorXd trial_mismatch = detail::balanced_mismatch(net, trial);
            const double trial_residual = trial_mismatch.lpNorm<Eigen::Infinity>();
            if (trial_residual < residual) {
                phase = std::move(trial);
                mismatch = std::move(trial_mismatch);
                residual = trial_residual;
                decreased = true;
                break;
            }
            step *= 0.5;
        }
        if (!decreased) {
            throw NoSynchronousStateError(Reason::no_convergence, "mismatch cannot be reduced further");
        }
    }

    if (!in_phase_domain(net, phase)) {
        throw NoSynchronousStateError(Reason::out_of_domain, "equilibrium violates |delta_i - delta_j| < pi/2");
    }

    SynchronousState state;
    state.output_phase_diffs = line_phase_differences(net, phase);
    state.phase = std::move(phase);
    state.residual = residual;
    state.iterations = iter;
    return state;
}

/// Expected output y* = (C^T delta*, 0): m line differences then n zero frequencies.
inline Eigen::VectorXd synchronous_output(const SynchronousState& state, const Network& net) {
    const auto m = static_cast<Eigen::Index>(net.line_count());
    const auto n = static_cast<Eigen::Index>(net.node_count());
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m + n);
    y.head(m) = state.output_phase_diffs;
    return y;
}

}  // namespace crep
