#pragma once

#include <atomic>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "crep/errors.hpp"
#include "crep/grid_model.hpp"
#include "crep/power_flow.hpp"
#include "crep/rng.hpp"

namespace crep {

/// Which components of the critical set stop a trajectory.
enum class ExitMode { phase_only, freq_only, both };

inline const char* to_string(ExitMode mode) {
    switch (mode) {
        case ExitMode::phase_only: return "phase_only";
        case ExitMode::freq_only: return "freq_only";
        case ExitMode::both: return "both";
    }
    return "both";
}

inline ExitMode exit_mode_from_string(const std::string& s) {
    if (s == "phase_only") return ExitMode::phase_only;
    if (s == "freq_only") return ExitMode::freq_only;
    if (s == "both") return ExitMode::both;
    throw ParseError("unknown exit mode \"" + s + "\" (expected phase_only, freq_only or both)");
}

struct SimConfig {
    double dt = 1e-3;
    double t_max = 1e5;
    std::int64_t n_samples = 1000;
    double eps = 0.02;
    std::uint64_t master_seed = 0;
    ExitMode exit_mode = ExitMode::both;
};

inline void validate(const SimConfig& cfg) {
    if (!(cfg.dt > 0.0)) throw ValidationError("dt must be positive");
    if (!(cfg.t_max >= cfg.dt)) throw ValidationError("t_max must be at least dt");
    if (cfg.n_samples < 1) throw ValidationError("n_samples must be at least 1");
    if (!(cfg.eps >= 0.0)) throw ValidationError("eps must be nonnegative");
}

enum class ComponentKind { none, line, node };

struct TrajectoryOutcome {
    bool exited = false;
    double exit_time = 0.0;  // t_max when censored
    std::int64_t steps = 0;
    ComponentKind kind = ComponentKind::none;
    int component = -1;  // 0-based line or node index

    // State at the exit step and the step before it (empty when censored).
    std::vector<double> phase_at_exit, freq_at_exit;
    std::vector<double> phase_before_exit, freq_before_exit;
};

struct HittingTimeEstimate {
    double mean = 0.0;
    double half_width = 0.0;  // 95% normal-approximation interval
    std::int64_t n_exited = 0;
    std::int64_t n_censored = 0;
    std::vector<std::int64_t> exit_line_histogram;
    std::vector<std::int64_t> exit_node_histogram;
};

namespace detail {

struct ExitCheck {
    ComponentKind kind = ComponentKind::none;
    int component = -1;
};

// Lines precede nodes in the output ordering, so a simultaneous violation is
// attributed to the lowest-index line.
inline ExitCheck first_violation(const Network& net, const SimConfig& cfg, const std::vector<double>& phase,
                                 const std::vector<double>& freq) {
    constexpr double half_pi = std::numbers::pi / 2.0;
    if (cfg.exit_mode != ExitMode::freq_only) {
        for (std::size_t k = 0; k < net.line_count(); ++k) {
            if (std::abs(phase[net.from_index(k)] - phase[net.to_index(k)]) >= half_pi) {
                return {ComponentKind::line, static_cast<int>(k)};
            }
        }
    }
    if (cfg.exit_mode != ExitMode::phase_only) {
        for (std::size_t i = 0; i < freq.size(); ++i) {
            if (std::abs(freq[i]) >= cfg.eps) return {ComponentKind::node, static_cast<int>(i)};
        }
    }
    return {};
}

}  // namespace detail

/// Euler-Maruyama path of the nonlinear stochastic swing system from
/// (delta*, 0), stopped at the first step whose state leaves the monitored
/// part of the critical set, or censored at t_max.
inline TrajectoryOutcome simulate_trajectory(const Network& net, const SynchronousState& state, const SimConfig& cfg,
                                             std::uint64_t trajectory_index) {
    validate(cfg);
    const std::size_t n = net.node_count();
    const std::size_t m = net.line_count();

    std::vector<double> power(n), damping(n), inv_inertia(n), kick(n);
    const double sqrt_dt = std::sqrt(cfg.dt);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& node = net.nodes()[i];
        power[i] = node.power;
        damping[i] = node.damping;
        inv_inertia[i] = 1.0 / node.inertia;
        kick[i] = node.noise / node.inertia * sqrt_dt;
    }
    std::vector<std::size_t> from(m), to(m);
    std::vector<double> capacity(m);
    for (std::size_t k = 0; k < m; ++k) {
        from[k] = net.from_index(k);
        to[k] = net.to_index(k);
        capacity[k] = net.lines()[k].capacity;
    }

    std::vector<double> phase(state.phase.data(), state.phase.data() + n);
    std::vector<double> freq(n, 0.0);
    std::vector<double> next_phase(n), next_freq(n), accel(n);

    std::mt19937_64 engine(stream_seed(cfg.master_seed, trajectory_index));
    std::normal_distribution<double> gauss(0.0, 1.0);

    const auto n_steps = static_cast<std::int64_t>(std::floor(cfg.t_max / cfg.dt + 1e-9));
    TrajectoryOutcome out;
    for (std::int64_t step = 1; step <= n_steps; ++step) {
        for (std::size_t i = 0; i < n; ++i) accel[i] = power[i] - damping[i] * freq[i];
        for (std::size_t k = 0; k < m; ++k) {
            const double flow = capacity[k] * std::sin(phase[from[k]] - phase[to[k]]);
            accel[from[k]] -= flow;
            accel[to[k]] += flow;
        }
        for (std::size_t i = 0; i < n; ++i) {
            next_phase[i] = phase[i] + freq[i] * cfg.dt;
            next_freq[i] = freq[i] + accel[i] * inv_inertia[i] * cfg.dt + kick[i] * gauss(engine);
        }

        const auto hit = detail::first_violation(net, cfg, next_phase, next_freq);
        if (hit.kind != ComponentKind::none) {
            out.exited = true;
            out.steps = step;
            out.exit_time = static_cast<double>(step) * cfg.dt;
            out.kind = hit.kind;
            out.component = hit.component;
            out.phase_before_exit = std::move(phase);
            out.freq_before_exit = std::move(freq);
            out.phase_at_exit = std::move(next_phase);
            out.freq_at_exit = std::move(next_freq);
            return out;
        }
        phase.swap(next_phase);
        freq.swap(next_freq);
    }
    out.steps = n_steps;
    out.exit_time = static_cast<double>(n_steps) * cfg.dt;
    return out;
}

/// Monte-Carlo mean first hitting time over n_samples independent paths.
///
/// Trajectory k always draws from the stream seeded by (master_seed, k), and
/// results are reduced in index order, so the estimate is bit-identical for
/// any `workers` (0 selects the hardware concurrency). Censored paths are
/// excluded from the mean and counted separately.
inline HittingTimeEstimate estimate_hitting_time(const Network& net, const SynchronousState& state,
                                                 const SimConfig& cfg, unsigned workers = 0) {
    validate(cfg);
    const auto total = static_cast<std::size_t>(cfg.n_samples);
    std::vector<TrajectoryOutcome> outcomes(total);

    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, total));

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next.fetch_add(1); k < total; k = next.fetch_add(1)) {
            auto outcome = simulate_trajectory(net, state, cfg, k);
            outcome.phase_at_exit.clear();
            outcome.freq_at_exit.clear();
            outcome.phase_before_exit.clear();
            outcome.freq_before_exit.clear();
            outcomes[k] = std::move(outcome);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    HittingTimeEstimate est;
    est.exit_line_histogram.assign(net.line_count(), 0);
    est.exit_node_histogram.assign(net.node_count(), 0);
    double sum = 0.0;
    for (const auto& o : outcomes) {
        if (!o.exited) {
            ++est.n_censored;
            continue;
        }
        ++est.n_exited;
        sum += o.exit_time;
        if (o.kind == ComponentKind::line) ++est.exit_line_histogram[static_cast<std::size_t>(o.component)];
        if (o.kind == ComponentKind::node) ++est.exit_node_histogram[static_cast<std::size_t>(o.component)];
    }
    if (est.n_exited == 0) {
        throw AllCensoredError("no trajectory left the critical set before t_max; mean hitting time undefined");
    }
    est.mean = sum / static_cast<double>(est.n_exited);
    if (est.n_exited > 1) {
        double ss = 0.0;
        for (const auto& o : outcomes) {
            if (o.exited) ss += (o.exit_time - est.mean) * (o.exit_time - est.mean);
        }
        const double sd = std::sqrt(ss / static_cast<double>(est.n_exited - 1));
        constexpr double z975 = 1.959963984540054;
        est.half_width = z975 * sd / std::sqrt(static_cast<double>(est.n_exited));
    }
    return est;
}

/// Solves the synchronous state first; NoSynchronousStateError propagates.
inline HittingTimeEstimate estimate_hitting_time(const Network& net, const SimConfig& cfg, unsigned workers = 0) {
    return estimate_hitting_time(net, solve_synchronous_state(net), cfg, workers);
}

}  // namespace crep
