#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "crep/errors.hpp"
#include "crep/grid_model.hpp"
#include "crep/linearize.hpp"
#include "crep/power_flow.hpp"

namespace crep {

inline constexpr double kDefaultFrequencyTolerance = 0.02;  // rad/s

/// Probability that a N(mean, sigma^2) phase difference leaves (-pi/2, pi/2).
inline double escape_prob_line(double mean, double sigma) {
    constexpr double half_pi = std::numbers::pi / 2.0;
    if (!(std::abs(mean) < half_pi)) throw DomainError("line mean phase difference must lie in (-pi/2, pi/2)");
    if (!(sigma >= 0.0)) throw DomainError("standard deviation must be nonnegative");
    if (sigma == 0.0) return 0.0;
    // Upper and lower tails separately through erfc, so tiny probabilities keep precision.
    const double upper = (half_pi - mean) / sigma;
    const double lower = (half_pi + mean) / sigma;
    return 0.5 * std::erfc(upper / std::numbers::sqrt2) + 0.5 * std::erfc(lower / std::numbers::sqrt2);
}

/// Probability that a N(0, sigma^2) frequency deviation leaves (-eps, eps).
inline double escape_prob_freq(double sigma, double eps) {
    if (!(eps > 0.0)) throw DomainError("frequency tolerance eps must be positive");
    if (!(sigma >= 0.0)) throw DomainError("standard deviation must be nonnegative");
    if (sigma == 0.0) return 0.0;
    return std::erfc(eps / (sigma * std::numbers::sqrt2));
}

struct CrepReport {
    Eigen::VectorXd f_delta;  // per line
    Eigen::VectorXd f_omega;  // per node
    double phi = 0.0;
    double phi_delta = 0.0;
    double phi_omega = 0.0;
    int argmax_line = -1;  // 0-based, -1 when there are no lines
    int argmax_node = -1;  // 0-based
    double epsilon = kDefaultFrequencyTolerance;
};

namespace detail {

// Lowest index wins ties.
inline int argmax_lowest(const Eigen::VectorXd& v) {
    int best = -1;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (best < 0 || v[i] > v[best]) best = static_cast<int>(i);
    }
    return best;
}

}  // namespace detail

/// Escape probabilities and their infinity norms from a solved variance report.
inline CrepReport crep_from_variance(const SynchronousState& state, const VarianceReport& variance, double eps) {
    CrepReport report;
    report.epsilon = eps;
    const auto m = variance.sigma2_delta.size();
    const auto n = variance.sigma2_omega.size();
    report.f_delta.resize(m);
    report.f_omega.resize(n);
    for (Eigen::Index k = 0; k < m; ++k) {
        report.f_delta[k] = escape_prob_line(state.output_phase_diffs[k], std::sqrt(variance.sigma2_delta[k]));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        report.f_omega[i] = escape_prob_freq(std::sqrt(variance.sigma2_omega[i]), eps);
    }
    report.argmax_line = detail::argmax_lowest(report.f_delta);
    report.argmax_node = detail::argmax_lowest(report.f_omega);
    report.phi_delta = report.argmax_line >= 0 ? report.f_delta[report.argmax_line] : 0.0;
    report.phi_omega = report.argmax_node >= 0 ? report.f_omega[report.argmax_node] : 0.0;
    report.phi = std::max(report.phi_delta, report.phi_omega);
    return report;
}

/// Every intermediate of the CREP computation for one network.
struct CrepAnalysis {
    SynchronousState state;
    LinearizedModel model;
    SpectralReduction reduction;
    VarianceReport variance;
    CrepReport crep;
};

/// Power flow, linearization, spectral reduction, Lyapunov solve, escape
/// probabilities. Propagates NoSynchronousStateError and DegenerateError.
inline CrepAnalysis analyze_crep(const Network& net, double eps = kDefaultFrequencyTolerance,
                                 const PowerFlowOptions& pf = {}) {
    if (!(eps > 0.0)) throw DomainError("frequency tolerance eps must be positive");
    CrepAnalysis out;
    out.state = solve_synchronous_state(net, pf);
    out.model = build_linearization(net, out.state);
    out.reduction = spectral_reduce(out.model, net);
    out.variance = solve_lyapunov(out.reduction);
    out.crep = crep_from_variance(out.state, out.variance, eps);
    return out;
}

inline CrepReport crep(const Network& net, double eps = kDefaultFrequencyTolerance) {
    return analyze_crep(net, eps).crep;
}

// ---------------------------------------------------------------------------
// Single machine, infinite bus

struct SmibResult {
    double sigma2_delta = 0.0;
    double sigma2_omega = 0.0;
    double f_delta = 0.0;
};

/// Closed-form stationary variances of the linearized SMIB model
/// M w' = P - D w - K sin(delta) + b xi, and the line escape probability.
inline SmibResult smib_analytic(double inertia, double damping, double capacity, double power, double noise) {
    if (!(inertia > 0.0 && damping > 0.0 && capacity > 0.0 && noise >= 0.0)) {
        throw DomainError("SMIB parameters must be positive");
    }
    if (!(power >= 0.0 && power < capacity)) throw DomainError("SMIB requires 0 <= P < K");
    const double stiffness = std::sqrt(capacity * capacity - power * power);
    SmibResult r;
    r.sigma2_delta = noise * noise / (2.0 * damping * stiffness);
    r.sigma2_omega = noise * noise / (2.0 * inertia * damping);
    r.f_delta = escape_prob_line(std::asin(power / capacity), std::sqrt(r.sigma2_delta));
    return r;
}

/// Two-node network whose line/node-1 statistics reproduce the SMIB model.
///
/// Both nodes share the damping-to-inertia ratio D/M, and their reduced
/// inertia m1 m2 / (m1 + m2) equals M, so the relative coordinate obeys the
/// SMIB equation exactly. Node 2 carries inertia `bus_ratio` * M and no noise,
/// so node-1 frequency statistics match up to O(1 / bus_ratio).
inline Network smib_embedding(double inertia, double damping, double capacity, double power, double noise,
                              double bus_ratio = 1e12) {
    const double m2 = bus_ratio * inertia;
    const double m1 = inertia * m2 / (m2 - inertia);
    const double rate = damping / inertia;
    std::vector<Node> nodes{
        Node{1, power, m1, rate * m1, noise * m1 / inertia},
        Node{2, -power, m2, rate * m2, 0.0},
    };
    std::vector<Line> lines{Line{1, 2, capacity}};
    return Network::create(std::move(nodes), std::move(lines));
}

}  // namespace crep
