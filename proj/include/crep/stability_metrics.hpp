#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crep/crep_metric.hpp"
#include "crep/errors.hpp"
#include "crep/grid_model.hpp"
#include "crep/hitting_time.hpp"
#include "crep/linearize.hpp"
#include "crep/lyapunov.hpp"
#include "crep/power_flow.hpp"

namespace crep {

inline constexpr double kStructuralZeroTolerance = 1e-9;

/// Smallest |Re mu| over eigenvalues of `a` whose magnitude exceeds 1e-9.
/// At most `structural_zeros` eigenvalues may fall below that threshold.
inline double min_abs_real_nonzero(const Eigen::MatrixXd& a, int structural_zeros) {
    Eigen::EigenSolver<Eigen::MatrixXd> eig(a, false);
    if (eig.info() != Eigen::Success) throw NumericalError("nonsymmetric eigensolver failed");
    int zeros = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        const std::complex<double> mu = eig.eigenvalues()[i];
        if (std::abs(mu) < kStructuralZeroTolerance) {
            ++zeros;
            continue;
        }
        best = std::min(best, std::abs(mu.real()));
    }
    if (zeros > structural_zeros) {
        throw DegenerateError("Jacobian has " + std::to_string(zeros) + " near-zero eigenvalues, expected at most " +
                              std::to_string(structural_zeros));
    }
    return best;
}

/// min |Re mu_i| over the nonzero eigenvalues of the full 2n x 2n Jacobian.
inline double linear_stability(const LinearizedModel& model) {
    return min_abs_real_nonzero(model.sys_matrix, 1);
}

/// ||G||_2^2 = tr(C Q_c C^T) with A Q_c + Q_c A^T + B B^T = 0.
inline double h2_squared_controllability(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                         const Eigen::MatrixXd& c) {
    const Eigen::MatrixXd qc = solve_continuous_lyapunov(a, b * b.transpose());
    return (c * qc * c.transpose()).trace();
}

/// ||G||_2^2 = tr(B^T Q_o B) with Q_o A + A^T Q_o + C^T C = 0.
inline double h2_squared_observability(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                       const Eigen::MatrixXd& c) {
    const Eigen::MatrixXd qo = solve_continuous_lyapunov(a.transpose(), c.transpose() * c);
    return (b.transpose() * qo * b).trace();
}

/// Squared H2 norm of the reduced system, i.e. tr(Q_y).
inline double h2_norm_squared(const SpectralReduction& red) {
    return solve_lyapunov(red).q_y.trace();
}

/// Same quantity through the observability Gramian.
inline double h2_norm_squared_observability(const SpectralReduction& red) {
    return h2_squared_observability(red.reduced_sys, red.reduced_input, red.reduced_output);
}

/// Small-angle order parameter 1 - ||delta||^2 / n on the mean-centered phases.
inline double order_parameter(const SynchronousState& state) {
    const auto n = static_cast<double>(state.phase.size());
    const Eigen::VectorXd centered = state.phase.array() - state.phase.mean();
    return 1.0 - centered.squaredNorm() / n;
}

/// Same formula in the reference gauge (phase of node 1 fixed to zero).
inline double order_parameter_reference(const SynchronousState& state) {
    return 1.0 - state.phase.squaredNorm() / static_cast<double>(state.phase.size());
}

/// |(1/n) sum_j exp(i delta_j)|, gauge invariant.
inline double kuramoto_order_magnitude(const SynchronousState& state) {
    std::complex<double> sum{0.0, 0.0};
    for (Eigen::Index j = 0; j < state.phase.size(); ++j) sum += std::polar(1.0, state.phase[j]);
    return std::abs(sum) / static_cast<double>(state.phase.size());
}

struct MetricsBundle {
    double min_re_mu = 0.0;
    double h2_squared = 0.0;
    double trace_q_delta = 0.0;
    double trace_q_omega = 0.0;
    double cohesiveness = 0.0;  // ||y*_delta||_inf
    double gamma = 1.0;         // centered gauge
    double gamma_reference = 1.0;
    double kuramoto_r = 1.0;
    CrepReport crep;
};

inline MetricsBundle metrics_from_analysis(const CrepAnalysis& a) {
    MetricsBundle b;
    b.min_re_mu = linear_stability(a.model);
    b.trace_q_delta = a.variance.sigma2_delta.sum();
    b.trace_q_omega = a.variance.sigma2_omega.sum();
    b.h2_squared = a.variance.q_y.trace();
    b.cohesiveness = a.state.output_phase_diffs.size() > 0 ? a.state.output_phase_diffs.lpNorm<Eigen::Infinity>() : 0.0;
    b.gamma = order_parameter(a.state);
    b.gamma_reference = order_parameter_reference(a.state);
    b.kuramoto_r = kuramoto_order_magnitude(a.state);
    b.crep = a.crep;
    return b;
}

inline MetricsBundle compute_metrics(const Network& net, double eps = kDefaultFrequencyTolerance) {
    return metrics_from_analysis(analyze_crep(net, eps));
}

// ---------------------------------------------------------------------------
// Braess comparison

struct BraessScenario {
    enum class Kind { add_line, set_capacity };
    Network base;
    Kind kind = Kind::set_capacity;
    int from = 0;  // add_line: node ids
    int to = 0;
    int line = 0;  // set_capacity: 0-based line index
    double capacity = 0.0;

    static BraessScenario add_line(Network base, int from, int to, double capacity) {
        return BraessScenario{std::move(base), Kind::add_line, from, to, 0, capacity};
    }
    static BraessScenario set_capacity(Network base, int line, double capacity) {
        return BraessScenario{std::move(base), Kind::set_capacity, 0, 0, line, capacity};
    }
};

/// The network after applying the scenario's change.
inline Network modified_network(const BraessScenario& s) {
    std::vector<Line> lines = s.base.lines();
    if (s.kind == BraessScenario::Kind::add_line) {
        if (s.base.find_line(s.from, s.to) >= 0) {
            throw ValidationError("add_line: nodes " + std::to_string(s.from) + " and " + std::to_string(s.to) +
                                  " are already connected");
        }
        lines.push_back(Line{s.from, s.to, s.capacity});
    } else {
        if (s.line < 0 || s.line >= static_cast<int>(lines.size())) throw ValidationError("set_capacity: no such line");
        lines[static_cast<std::size_t>(s.line)].capacity = s.capacity;
    }
    return with_lines(s.base, std::move(lines));
}

enum class Verdict { improves, degrades, unchanged };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::improves: return "improves";
        case Verdict::degrades: return "degrades";
        case Verdict::unchanged: return "unchanged";
    }
    return "unchanged";
}

struct MetricComparison {
    std::string name;
    double before = 0.0;
    double after = 0.0;
    bool higher_is_better = true;
    Verdict verdict = Verdict::unchanged;
    double before_half_width = 0.0;  // hitting time only
    double after_half_width = 0.0;
};

struct BraessVerdict {
    std::vector<MetricComparison> metrics;  // t_e (optional), phi_delta, min_re_mu, gamma
    MetricsBundle before;
    MetricsBundle after;
    std::optional<HittingTimeEstimate> hitting_before;
    std::optional<HittingTimeEstimate> hitting_after;
    std::vector<std::string> paradox_metrics;  // metrics degraded by added capacity
    bool metrics_disagree = false;              // some metric improves while another degrades
};

/// Side of a Braess comparison that had no admissible state.
class BraessSideError : public Error {
  public:
    BraessSideError(std::string side, const std::string& what)
        : Error(side + " network: " + what), side_(std::move(side)) {}
    const std::string& side() const noexcept { return side_; }

  private:
    std::string side_;
};

inline Verdict compare_values(double before, double after, bool higher_is_better) {
    const double tol = 1e-12 * std::max(std::abs(before), std::abs(after));
    if (std::abs(after - before) <= tol) return Verdict::unchanged;
    const bool up = after > before;
    return up == higher_is_better ? Verdict::improves : Verdict::degrades;
}

/// Table of t_e, ||f_delta||_inf, min |Re mu| and gamma before and after a
/// topology or capacity change, with per-metric verdicts.
inline BraessVerdict braess_compare(const BraessScenario& scenario, double eps = kDefaultFrequencyTolerance,
                                    const std::optional<SimConfig>& sim = std::nullopt, unsigned workers = 0) {
    const Network after_net = modified_network(scenario);

    auto side = [&](const Network& net, const char* label, std::optional<HittingTimeEstimate>& hit) {
        try {
            auto analysis = analyze_crep(net, eps);
            if (sim) hit = estimate_hitting_time(net, analysis.state, *sim, workers);
            return metrics_from_analysis(analysis);
        } catch (const Error& e) {
            throw BraessSideError(label, e.what());
        }
    };

    BraessVerdict v;
    v.before = side(scenario.base, "base", v.hitting_before);
    v.after = side(after_net, "modified", v.hitting_after);

    auto add = [&](std::string name, double before, double after, bool higher_is_better) {
        MetricComparison c{std::move(name), before, after, higher_is_better, compare_values(before, after, higher_is_better)};
        v.metrics.push_back(c);
    };
    if (v.hitting_before && v.hitting_after) {
        add("t_e", v.hitting_before->mean, v.hitting_after->mean, true);
        v.metrics.back().before_half_width = v.hitting_before->half_width;
        v.metrics.back().after_half_width = v.hitting_after->half_width;
    }
    add("phi_delta", v.before.crep.phi_delta, v.after.crep.phi_delta, false);
    add("min_re_mu", v.before.min_re_mu, v.after.min_re_mu, true);
    add("gamma", v.before.gamma, v.after.gamma, true);

    const bool adds_capacity =
        scenario.kind == BraessScenario::Kind::add_line ||
        scenario.capacity > scenario.base.lines()[static_cast<std::size_t>(scenario.line)].capacity;
    bool any_improves = false;
    bool any_degrades = false;
    for (const auto& c : v.metrics) {
        any_improves = any_improves || c.verdict == Verdict::improves;
        if (c.verdict == Verdict::degrades) {
            any_degrades = true;
            if (adds_capacity) v.paradox_metrics.push_back(c.name);
        }
    }
    v.metrics_disagree = any_improves && any_degrades;
    return v;
}

}  // namespace crep
