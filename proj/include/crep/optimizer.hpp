#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "crep/crep_metric.hpp"
#include "crep/errors.hpp"
#include "crep/grid_model.hpp"
#include "crep/stability_metrics.hpp"

namespace crep {

enum class DecisionVariable { generation, inertia, damping, line_capacity };

enum class ObjectiveKind {
    crep_phi,
    crep_phi_delta,
    crep_phi_omega,
    trace_q_delta,
    trace_q_omega,
    max_sigma2_omega,
    phase_cohesiveness,
    order_parameter,
};

inline const char* to_string(DecisionVariable v) {
    switch (v) {
        case DecisionVariable::generation: return "generation";
        case DecisionVariable::inertia: return "inertia";
        case DecisionVariable::damping: return "damping";
        case DecisionVariable::line_capacity: return "line_capacity";
    }
    return "generation";
}

inline DecisionVariable decision_variable_from_string(const std::string& s) {
    if (s == "generation") return DecisionVariable::generation;
    if (s == "inertia") return DecisionVariable::inertia;
    if (s == "damping") return DecisionVariable::damping;
    if (s == "line_capacity") return DecisionVariable::line_capacity;
    throw ParseError("unknown decision variable \"" + s + "\"");
}

inline const char* to_string(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::crep_phi: return "crep_phi";
        case ObjectiveKind::crep_phi_delta: return "crep_phi_delta";
        case ObjectiveKind::crep_phi_omega: return "crep_phi_omega";
        case ObjectiveKind::trace_q_delta: return "trace_q_delta";
        case ObjectiveKind::trace_q_omega: return "trace_q_omega";
        case ObjectiveKind::max_sigma2_omega: return "max_sigma2_omega";
        case ObjectiveKind::phase_cohesiveness: return "phase_cohesiveness";
        case ObjectiveKind::order_parameter: return "order_parameter";
    }
    return "crep_phi";
}

inline ObjectiveKind objective_kind_from_string(const std::string& s) {
    for (auto k : {ObjectiveKind::crep_phi, ObjectiveKind::crep_phi_delta, ObjectiveKind::crep_phi_omega,
                   ObjectiveKind::trace_q_delta, ObjectiveKind::trace_q_omega, ObjectiveKind::max_sigma2_omega,
                   ObjectiveKind::phase_cohesiveness, ObjectiveKind::order_parameter}) {
        if (s == to_string(k)) return k;
    }
    throw ParseError("unknown objective \"" + s + "\"");
}

inline bool is_crep_kind(ObjectiveKind k) {
    return k == ObjectiveKind::crep_phi || k == ObjectiveKind::crep_phi_delta || k == ObjectiveKind::crep_phi_omega;
}

/// The order parameter is maximized; every other objective is minimized.
inline bool is_maximized(ObjectiveKind k) { return k == ObjectiveKind::order_parameter; }

/// Decision variables: one family, a subset of its entries, a total budget
/// and per-entry box bounds. Indices are 0-based node or line indices.
struct DecisionSpec {
    DecisionVariable variable = DecisionVariable::line_capacity;
    std::vector<int> indices;
    double budget = 0.0;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

struct SearchConfig {
    std::uint64_t seed = 1;
    int max_evaluations = 2000;
    int population_factor = 15;
    double differential_weight = 0.7;
    double crossover_rate = 0.9;
    bool polish = true;
    int polish_evaluations = 400;
};

struct OptimizationResult {
    Eigen::VectorXd theta;
    double objective_initial = 0.0;
    double objective_final = 0.0;
    bool feasible = false;
    int evaluations = 0;
    std::vector<std::pair<int, double>> history;  // (iteration, best objective so far)
};

// ---------------------------------------------------------------------------
// Objectives

/// Scalar objective of one network. Networks without an admissible, non
/// degenerate synchronous state score 1 for the CREP kinds (the ceiling of a
/// probability), -inf for the maximized order parameter, +inf otherwise.
inline double evaluate_objective(const Network& net, ObjectiveKind kind, double eps = kDefaultFrequencyTolerance) {
    try {
        if (kind == ObjectiveKind::phase_cohesiveness || kind == ObjectiveKind::order_parameter) {
            const auto state = solve_synchronous_state(net);
            if (kind == ObjectiveKind::order_parameter) return order_parameter(state);
            return state.output_phase_diffs.size() > 0 ? state.output_phase_diffs.lpNorm<Eigen::Infinity>() : 0.0;
        }
        const auto a = analyze_crep(net, eps);
        switch (kind) {
            case ObjectiveKind::crep_phi: return a.crep.phi;
            case ObjectiveKind::crep_phi_delta: return a.crep.phi_delta;
            case ObjectiveKind::crep_phi_omega: return a.crep.phi_omega;
            case ObjectiveKind::trace_q_delta: return a.variance.sigma2_delta.sum();
            case ObjectiveKind::trace_q_omega: return a.variance.sigma2_omega.sum();
            case ObjectiveKind::max_sigma2_omega: return a.variance.sigma2_omega.maxCoeff();
            default: break;
        }
    } catch (const NoSynchronousStateError&) {
    } catch (const DegenerateError&) {
    } catch (const NumericalError&) {
    }
    if (is_crep_kind(kind)) return 1.0;
    if (is_maximized(kind)) return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::infinity();
}

/// True when `value` is the infeasibility encoding of evaluate_objective.
inline bool is_penalty(ObjectiveKind kind, double value) {
    if (is_crep_kind(kind)) return value >= 1.0;
    return std::isinf(value);
}

// ---------------------------------------------------------------------------
// Feasible set {sum theta = budget, lower <= theta <= upper}

/// Euclidean projection onto the budget hyperplane intersected with the box:
/// theta_i = clamp(x_i - tau, lower_i, upper_i) with tau chosen so the sum
/// hits the budget.
inline Eigen::VectorXd project_to_budget_box(const Eigen::VectorXd& x, double budget, const Eigen::VectorXd& lower,
                                             const Eigen::VectorXd& upper) {
    const auto dim = x.size();
    auto clamped = [&](double tau) {
        Eigen::VectorXd t(dim);
        for (Eigen::Index i = 0; i < dim; ++i) t[i] = std::clamp(x[i] - tau, lower[i], upper[i]);
        return t;
    };
    if (dim == 0) return Eigen::VectorXd(0);

    double lo = (x - upper).minCoeff();  // sum = sum(upper) >= budget
    double hi = (x - lower).maxCoeff();  // sum = sum(lower) <= budget
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (clamped(mid).sum() > budget) lo = mid;
        else hi = mid;
    }
    double tau = 0.5 * (lo + hi);

    // Exact solve on the free set identified by bisection.
    Eigen::VectorXd theta = clamped(tau);
    double free_sum = 0.0;
    double fixed_sum = 0.0;
    int free_count = 0;
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (theta[i] > lower[i] && theta[i] < upper[i]) {
            free_sum += x[i];
            ++free_count;
        } else {
            fixed_sum += theta[i];
        }
    }
    if (free_count > 0) {
        tau = (free_sum + fixed_sum - budget) / free_count;
        Eigen::VectorXd exact = clamped(tau);
        if (std::abs(exact.sum() - budget) <= std::abs(theta.sum() - budget)) theta = exact;
    }
    return theta;
}

/// Current values of the decision variables in `net`.
inline Eigen::VectorXd decision_values(const Network& net, const DecisionSpec& spec) {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(spec.indices.size()));
    for (std::size_t j = 0; j < spec.indices.size(); ++j) {
        const auto idx = static_cast<std::size_t>(spec.indices[j]);
        switch (spec.variable) {
            case DecisionVariable::generation: theta[j] = net.nodes()[idx].power; break;
            case DecisionVariable::inertia: theta[j] = net.nodes()[idx].inertia; break;
            case DecisionVariable::damping: theta[j] = net.nodes()[idx].damping; break;
            case DecisionVariable::line_capacity: theta[j] = net.lines()[idx].capacity; break;
        }
    }
    return theta;
}

/// `net` with the decision variables replaced by theta.
inline Network apply_decision(const Network& net, const DecisionSpec& spec, const Eigen::VectorXd& theta) {
    if (spec.variable == DecisionVariable::line_capacity) {
        std::vector<Line> lines = net.lines();
        for (std::size_t j = 0; j < spec.indices.size(); ++j) lines[spec.indices[j]].capacity = theta[j];
        return with_lines(net, std::move(lines));
    }
    std::vector<Node> nodes = net.nodes();
    for (std::size_t j = 0; j < spec.indices.size(); ++j) {
        auto& node = nodes[spec.indices[j]];
        switch (spec.variable) {
            case DecisionVariable::generation: node.power = theta[j]; break;
            case DecisionVariable::inertia: node.inertia = theta[j]; break;
            case DecisionVariable::damping: node.damping = theta[j]; break;
            default: break;
        }
    }
    return with_nodes(net, std::move(nodes));
}

/// Checks the spec against the network and the objective.
///
/// Throws InfeasibleSpecError when the feasible set is empty or the
/// objective cannot depend on the chosen variables.
inline void validate_spec(const Network& net, const DecisionSpec& spec, ObjectiveKind kind) {
    const auto dim = spec.indices.size();
    const bool on_lines = spec.variable == DecisionVariable::line_capacity;
    const std::size_t limit = on_lines ? net.line_count() : net.node_count();

    if (dim == 0) throw InfeasibleSpecError("decision spec selects no variables");
    if (static_cast<std::size_t>(spec.lower.size()) != dim || static_cast<std::size_t>(spec.upper.size()) != dim) {
        throw InfeasibleSpecError("bounds must have one entry per decision variable");
    }
    std::set<int> seen;
    for (int idx : spec.indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= limit) throw InfeasibleSpecError("decision index out of range");
        if (!seen.insert(idx).second) throw InfeasibleSpecError("duplicate decision index");
    }
    for (std::size_t j = 0; j < dim; ++j) {
        if (!(spec.lower[j] <= spec.upper[j])) throw InfeasibleSpecError("lower bound exceeds upper bound");
        if (spec.variable != DecisionVariable::generation && !(spec.lower[j] > 0.0)) {
            throw InfeasibleSpecError(std::string(to_string(spec.variable)) + " lower bounds must be positive");
        }
    }
    constexpr double slack = 1e-9;
    if (spec.budget < spec.lower.sum() - slack || spec.budget > spec.upper.sum() + slack) {
        throw InfeasibleSpecError("budget lies outside [sum(lower), sum(upper)]");
    }

    if (spec.variable == DecisionVariable::generation) {
        double fixed = 0.0;
        for (std::size_t i = 0; i < net.node_count(); ++i) {
            if (!seen.count(static_cast<int>(i))) fixed += net.nodes()[i].power;
        }
        for (int idx : spec.indices) {
            if (!(net.nodes()[static_cast<std::size_t>(idx)].power > 0.0)) {
                throw InfeasibleSpecError("generation index " + std::to_string(idx + 1) + " is not a generator");
            }
        }
        if (std::abs(spec.budget + fixed) > kPowerBalanceTolerance) {
            throw InfeasibleSpecError("generation budget does not balance the fixed injections");
        }
    }

    if ((spec.variable == DecisionVariable::inertia || spec.variable == DecisionVariable::damping) &&
        (kind == ObjectiveKind::order_parameter || kind == ObjectiveKind::phase_cohesiveness)) {
        throw InfeasibleSpecError(std::string(to_string(kind)) + " does not depend on " + to_string(spec.variable));
    }
}

// ---------------------------------------------------------------------------
// Search

namespace detail {

// Nelder-Mead on an unconstrained function; returns the best vertex found.
inline std::pair<Eigen::VectorXd, double> nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                                      const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                                                      int max_evaluations, int& evaluations) {
    const auto dim = start.size();
    std::vector<Eigen::VectorXd> simplex;
    std::vector<double> values;
    simplex.push_back(start);
    values.push_back(f(start));
    ++evaluations;
    int used = 1;
    for (Eigen::Index i = 0; i < dim; ++i) {
        Eigen::VectorXd v = start;
        v[i] += step[i];
        simplex.push_back(v);
        values.push_back(f(v));
        ++evaluations;
        ++used;
    }

    std::vector<std::size_t> order(simplex.size());
    while (used < max_evaluations) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
        const auto best = order.front();
        const auto worst = order.back();
        const auto second = order[order.size() - 2];
        if (std::abs(values[worst] - values[best]) <= 1e-14 * (std::abs(values[best]) + 1e-300)) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
        for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += simplex[order[i]];
        centroid /= static_cast<double>(dim);

        auto eval = [&](const Eigen::VectorXd& p) {
            ++evaluations;
            ++used;
            return f(p);
        };

        const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
        const double fr = eval(reflected);
        if (fr < values[best]) {
            const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        const Eigen::VectorXd contracted =
            outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                    : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
        const double fc = eval(contracted);
        if (fc < (outside ? fr : values[worst])) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < simplex.size(); ++i) {
            if (i == best) continue;
            simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
            values[i] = eval(simplex[i]);
        }
    }
    const auto it = std::min_element(values.begin(), values.end());
    return {simplex[static_cast<std::size_t>(it - values.begin())], *it};
}

}  // namespace detail

/// Minimizes (or, for the order parameter, maximizes) the objective over the
/// decision variables.
///
/// Differential evolution (rand/1/bin, population population_factor * dim)
/// whose every trial vector is projected onto the feasible set, followed by a
/// Nelder-Mead polish of the projected objective. The initial population
/// holds the network's own values and the uniform split of the budget.
/// Missing synchronous states are handled by the penalty encoding of
/// evaluate_objective; if no evaluated candidate is admissible,
/// NoFeasiblePointError is thrown.
inline OptimizationResult optimize(const Network& net, const DecisionSpec& spec, ObjectiveKind kind,
                                   double eps = kDefaultFrequencyTolerance, const SearchConfig& cfg = {}) {
    validate_spec(net, spec, kind);
    const auto dim = static_cast<Eigen::Index>(spec.indices.size());
    const double sign = is_maximized(kind) ? -1.0 : 1.0;

    OptimizationResult result;
    auto project = [&](const Eigen::VectorXd& x) { return project_to_budget_box(x, spec.budget, spec.lower, spec.upper); };
    // Scores are minimized; score = sign * objective.
    auto score = [&](const Eigen::VectorXd& theta) {
        ++result.evaluations;
        return sign * evaluate_objective(apply_decision(net, spec, theta), kind, eps);
    };

    const Eigen::VectorXd start = project(decision_values(net, spec));
    const double start_score = score(start);
    result.objective_initial = sign * start_score;

    Eigen::VectorXd best = start;
    double best_score = start_score;
    result.history.emplace_back(0, sign * best_score);

    const bool single_point = dim == 1 || (spec.upper - spec.lower).maxCoeff() <= 0.0;
    if (!single_point) {
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const auto pop_size = std::max<Eigen::Index>(4, cfg.population_factor * dim);

        std::vector<Eigen::VectorXd> pop;
        std::vector<double> scores;
        pop.push_back(start);
        scores.push_back(start_score);
        const Eigen::VectorXd uniform = project(Eigen::VectorXd::Constant(dim, spec.budget / static_cast<double>(dim)));
        pop.push_back(uniform);
        scores.push_back(score(uniform));
        while (static_cast<Eigen::Index>(pop.size()) < pop_size) {
            Eigen::VectorXd x(dim);
            for (Eigen::Index j = 0; j < dim; ++j) x[j] = spec.lower[j] + unit(rng) * (spec.upper[j] - spec.lower[j]);
            x = project(x);
            pop.push_back(x);
            scores.push_back(score(x));
        }
        auto update_best = [&](const Eigen::VectorXd& x, double s) {
            if (s < best_score) {
                best_score = s;
                best = x;
            }
        };
        for (std::size_t i = 0; i < pop.size(); ++i) update_best(pop[i], scores[i]);
        result.history.emplace_back(1, sign * best_score);

        std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
        std::uniform_int_distribution<Eigen::Index> pick_dim(0, dim - 1);
        int generation = 1;
        while (result.evaluations < cfg.max_evaluations) {
            ++generation;
            for (std::size_t i = 0; i < pop.size() && result.evaluations < cfg.max_evaluations; ++i) {
                std::size_t r1, r2, r3;
                do { r1 = pick(rng); } while (r1 == i);
                do { r2 = pick(rng); } while (r2 == i || r2 == r1);
                do { r3 = pick(rng); } while (r3 == i || r3 == r1 || r3 == r2);
                const Eigen::VectorXd mutant = pop[r1] + cfg.differential_weight * (pop[r2] - pop[r3]);
                Eigen::VectorXd trial = pop[i];
                const auto forced = pick_dim(rng);
                for (Eigen::Index j = 0; j < dim; ++j) {
                    if (j == forced || unit(rng) < cfg.crossover_rate) trial[j] = mutant[j];
                }
                trial = project(trial);
                const double s = score(trial);
                if (s <= scores[i]) {
                    pop[i] = trial;
                    scores[i] = s;
                    update_best(trial, s);
                }
            }
            result.history.emplace_back(generation, sign * best_score);
        }

        if (cfg.polish && cfg.polish_evaluations > dim + 1) {
            Eigen::VectorXd step = 0.05 * (spec.upper - spec.lower);
            for (Eigen::Index j = 0; j < dim; ++j) {
                if (step[j] == 0.0) step[j] = 1e-3 * std::max(1.0, std::abs(best[j]));
            }
            int polish_evals = 0;
            auto [point, value] = detail::nelder_mead([&](const Eigen::VectorXd& x) { return score(project(x)); }, best,
                                                      step, cfg.polish_evaluations, polish_evals);
            if (value < best_score) {
                best_score = value;
                best = project(point);
            }
            result.history.emplace_back(generation + 1, sign * best_score);
        }
    }

    result.theta = best;
    result.objective_final = sign * best_score;
    result.feasible = !is_penalty(kind, result.objective_final);
    if (!result.feasible) {
        throw NoFeasiblePointError("no evaluated candidate has an admissible synchronous state");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Max-frequency-variance equivalence

struct EquivalenceCheck {
    bool all_agree = true;
    int samples = 0;            // admissible samples used
    int argmax_agreements = 0;  // samples whose sigma^2 argmax attains max f_omega
    int pair_agreements = 0;
    int pairs = 0;
};

/// Samples feasible theta and verifies that ||f_omega||_inf and
/// ||sigma_omega^2||_inf order the samples identically and that the node of
/// largest frequency variance attains the largest escape probability.
inline EquivalenceCheck min_max_sigma_equivalence_check(const Network& net, const DecisionSpec& spec,
                                                         double eps = kDefaultFrequencyTolerance, int samples = 50,
                                                         std::uint64_t seed = 7) {
    validate_spec(net, spec, ObjectiveKind::crep_phi_omega);
    const auto dim = static_cast<Eigen::Index>(spec.indices.size());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<double> sigma_norms, f_norms;
    EquivalenceCheck check;
    for (int s = 0; s < samples; ++s) {
        Eigen::VectorXd x(dim);
        for (Eigen::Index j = 0; j < dim; ++j) x[j] = spec.lower[j] + unit(rng) * (spec.upper[j] - spec.lower[j]);
        const Eigen::VectorXd theta = project_to_budget_box(x, spec.budget, spec.lower, spec.upper);
        CrepAnalysis a;
        try {
            a = analyze_crep(apply_decision(net, spec, theta), eps);
        } catch (const Error&) {
            continue;
        }
        ++check.samples;
        const auto& sigma2 = a.variance.sigma2_omega;
        const auto& f = a.crep.f_omega;
        const int top = detail::argmax_lowest(sigma2);
        if (f[top] == f.maxCoeff()) ++check.argmax_agreements;
        else check.all_agree = false;
        sigma_norms.push_back(sigma2.maxCoeff());
        f_norms.push_back(f.maxCoeff());
    }
    for (std::size_t a = 0; a < sigma_norms.size(); ++a) {
        for (std::size_t b = a + 1; b < sigma_norms.size(); ++b) {
            ++check.pairs;
            bool ok;
            if (sigma_norms[a] < sigma_norms[b]) ok = f_norms[a] <= f_norms[b];
            else if (sigma_norms[a] > sigma_norms[b]) ok = f_norms[a] >= f_norms[b];
            else ok = f_norms[a] == f_norms[b];
            if (ok) ++check.pair_agreements;
            else check.all_agree = false;
        }
    }
    return check;
}

}  // namespace crep
