#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "support.hpp"

using Catch::Matchers::WithinAbs;
using crep::DecisionSpec;
using crep::DecisionVariable;
using crep::ObjectiveKind;

namespace {

DecisionSpec make_spec(DecisionVariable v, std::vector<int> idx, double budget, double lo, double hi) {
    DecisionSpec s;
    s.variable = v;
    s.budget = budget;
    s.lower = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(idx.size()), lo);
    s.upper = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(idx.size()), hi);
    s.indices = std::move(idx);
    return s;
}

// Two identical generators feeding one load through identical lines.
crep::Network two_generators(double p1, double p2) {
    return crep::Network::create({{1, p1, 1, 1, 0.3}, {2, p2, 1, 1, 0.3}, {3, -(p1 + p2), 1, 1, 0.3}},
                                 {{1, 3, 2.0}, {2, 3, 2.0}});
}

crep::SearchConfig small_search(std::uint64_t seed = 1) {
    crep::SearchConfig cfg;
    cfg.seed = seed;
    cfg.max_evaluations = 300;
    cfg.polish_evaluations = 150;
    return cfg;
}

}  // namespace

TEST_CASE("evaluate_objective examples") {
    CHECK(crep::evaluate_objective(testing_support::two_node(1.0, 2.0, 0.0), ObjectiveKind::crep_phi) == 0.0);
    const auto flat = crep::Network::create({{1, 0, 1, 1, 0.1}, {2, 0, 1, 1, 0.1}}, {{1, 2, 1}});
    CHECK(crep::evaluate_objective(flat, ObjectiveKind::order_parameter) == 1.0);
    CHECK_THAT(crep::evaluate_objective(testing_support::two_node(1.0, 2.0), ObjectiveKind::phase_cohesiveness),
               WithinAbs(0.523599, 1e-6));
}

TEST_CASE("infeasible networks score the penalty") {
    const auto overloaded = testing_support::two_node(3.0, 2.0);
    CHECK(crep::evaluate_objective(overloaded, ObjectiveKind::crep_phi) == 1.0);
    CHECK(crep::evaluate_objective(overloaded, ObjectiveKind::crep_phi_delta) == 1.0);
    CHECK(crep::evaluate_objective(overloaded, ObjectiveKind::crep_phi_omega) == 1.0);
    for (auto kind : {ObjectiveKind::trace_q_delta, ObjectiveKind::trace_q_omega, ObjectiveKind::max_sigma2_omega,
                      ObjectiveKind::phase_cohesiveness}) {
        CHECK(crep::evaluate_objective(overloaded, kind) == std::numeric_limits<double>::infinity());
    }
    CHECK(crep::evaluate_objective(overloaded, ObjectiveKind::order_parameter) ==
          -std::numeric_limits<double>::infinity());
}

TEST_CASE("baseline objectives match the analysis quantities") {
    std::mt19937_64 rng(61);
    const auto net = testing_support::random_network(rng, {4, 6});
    const auto a = crep::analyze_crep(net, 0.05);
    CHECK(crep::evaluate_objective(net, ObjectiveKind::crep_phi, 0.05) == a.crep.phi);
    CHECK(crep::evaluate_objective(net, ObjectiveKind::trace_q_delta, 0.05) == a.variance.sigma2_delta.sum());
    CHECK(crep::evaluate_objective(net, ObjectiveKind::trace_q_omega, 0.05) == a.variance.sigma2_omega.sum());
    CHECK(crep::evaluate_objective(net, ObjectiveKind::max_sigma2_omega, 0.05) == a.variance.sigma2_omega.maxCoeff());
    const Eigen::VectorXd centered = a.state.phase.array() - a.state.phase.mean();
    CHECK_THAT(crep::evaluate_objective(net, ObjectiveKind::order_parameter),
               WithinAbs(1.0 - centered.squaredNorm() / static_cast<double>(net.node_count()), 1e-15));
}

TEST_CASE("projection onto the budget box") {
    std::mt19937_64 rng(62);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng() % 7);
        Eigen::VectorXd lo(dim), hi(dim), x(dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            lo[i] = -1.0 + 2.0 * u(rng);
            hi[i] = lo[i] + (trial % 5 == 0 ? 0.0 : 3.0 * u(rng));
            x[i] = -5.0 + 10.0 * u(rng);
        }
        const double budget = lo.sum() + u(rng) * (hi.sum() - lo.sum());
        const Eigen::VectorXd theta = crep::project_to_budget_box(x, budget, lo, hi);

        CHECK(std::abs(theta.sum() - budget) <= 1e-9);
        for (Eigen::Index i = 0; i < dim; ++i) {
            CHECK(theta[i] >= lo[i]);
            CHECK(theta[i] <= hi[i]);
        }
        // Nearest point: no random feasible point is closer.
        for (int probe = 0; probe < 20; ++probe) {
            Eigen::VectorXd y(dim);
            for (Eigen::Index i = 0; i < dim; ++i) y[i] = lo[i] + u(rng) * (hi[i] - lo[i]);
            y = crep::project_to_budget_box(y, budget, lo, hi);
            CHECK((x - theta).norm() <= (x - y).norm() + 1e-9);
        }
        // Optimality conditions: theta_i = clamp(x_i - tau) for a common tau.
        double tau = std::numeric_limits<double>::quiet_NaN();
        for (Eigen::Index i = 0; i < dim; ++i) {
            if (theta[i] > lo[i] + 1e-12 && theta[i] < hi[i] - 1e-12) tau = x[i] - theta[i];
        }
        if (!std::isnan(tau)) {
            for (Eigen::Index i = 0; i < dim; ++i) {
                if (theta[i] > lo[i] + 1e-12 && theta[i] < hi[i] - 1e-12) CHECK_THAT(x[i] - theta[i], WithinAbs(tau, 1e-9));
                else if (theta[i] <= lo[i] + 1e-12) CHECK(x[i] - lo[i] <= tau + 1e-9);
                else CHECK(x[i] - hi[i] >= tau - 1e-9);
            }
        }
    }
}

TEST_CASE("projection keeps feasible points fixed") {
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(4, 0.5);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(4, 3.0);
    Eigen::VectorXd x(4);
    x << 1.0, 2.0, 0.5, 2.5;
    CHECK((crep::project_to_budget_box(x, 6.0, lo, hi) - x).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("symmetric generators split the budget equally") {
    const auto net = two_generators(1.4, 0.6);
    const auto spec = make_spec(DecisionVariable::generation, {0, 1}, 2.0, 0.2, 1.8);
    const auto r = crep::optimize(net, spec, ObjectiveKind::crep_phi_delta, 0.02, small_search());
    CHECK_THAT(r.theta[0], WithinAbs(1.0, 1e-3));
    CHECK_THAT(r.theta[1], WithinAbs(1.0, 1e-3));
    CHECK(r.objective_final <= r.objective_initial);
    CHECK(r.feasible);
}

TEST_CASE("degenerate box returns the bounds after one evaluation") {
    const auto net = testing_support::triangle();
    auto spec = make_spec(DecisionVariable::line_capacity, {0, 1, 2}, 0.0, 0.0, 0.0);
    spec.lower << 1.5, 2.5, 3.0;
    spec.upper = spec.lower;
    spec.budget = spec.lower.sum();
    const auto r = crep::optimize(net, spec, ObjectiveKind::crep_phi);
    CHECK(r.evaluations == 1);
    CHECK(r.theta == spec.lower);
    CHECK(r.objective_final == crep::evaluate_objective(crep::apply_decision(net, spec, spec.lower), ObjectiveKind::crep_phi));
}

TEST_CASE("line-capacity search dominates the uniform starting point") {
    const auto net = crep::load_network(testing_support::data_path("ring5.json"));
    const auto m = static_cast<int>(net.line_count());
    std::vector<int> idx(static_cast<std::size_t>(m));
    std::iota(idx.begin(), idx.end(), 0);
    const double total = net.capacities().sum();
    const auto spec = make_spec(DecisionVariable::line_capacity, idx, total, 0.2 * total / m, total);
    const auto uniform = crep::apply_decision(net, spec, Eigen::VectorXd::Constant(m, total / m));
    const double baseline = crep::evaluate_objective(uniform, ObjectiveKind::crep_phi_delta);
    const auto r = crep::optimize(uniform, spec, ObjectiveKind::crep_phi_delta, 0.02, small_search());
    CHECK(r.objective_initial == baseline);
    CHECK(r.objective_final <= baseline);
    CHECK(std::abs(r.theta.sum() - total) <= 1e-9);
    CHECK(r.theta.minCoeff() >= spec.lower[0]);
}

TEST_CASE("best-so-far history is monotone and the search is reproducible") {
    const auto net = testing_support::triangle(2.0, 0.3);
    const auto spec = make_spec(DecisionVariable::line_capacity, {0, 1, 2}, 6.0, 0.5, 4.0);
    const auto a = crep::optimize(net, spec, ObjectiveKind::trace_q_delta, 0.02, small_search(5));
    const auto b = crep::optimize(net, spec, ObjectiveKind::trace_q_delta, 0.02, small_search(5));
    for (std::size_t i = 1; i < a.history.size(); ++i) {
        CHECK(a.history[i].second <= a.history[i - 1].second);
        CHECK(a.history[i].first > a.history[i - 1].first);
    }
    CHECK(a.history.back().second == a.objective_final);
    CHECK(a.theta == b.theta);
    CHECK(a.evaluations == b.evaluations);
    CHECK(a.objective_final == b.objective_final);
}

TEST_CASE("order parameter is maximized") {
    const auto net = crep::Network::create({{1, 1.0, 1, 1, 0.1}, {2, 0.5, 1, 1, 0.1}, {3, -1.5, 1, 1, 0.1}},
                                           {{1, 2, 1.0}, {2, 3, 1.0}, {1, 3, 1.0}});
    const auto spec = make_spec(DecisionVariable::line_capacity, {0, 1, 2}, 3.0, 0.3, 2.4);
    const auto r = crep::optimize(net, spec, ObjectiveKind::order_parameter, 0.02, small_search());
    CHECK(r.objective_final >= r.objective_initial);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i].second >= r.history[i - 1].second);
}

TEST_CASE("synchronous-state baselines do not depend on inertia or damping") {
    std::mt19937_64 rng(63);
    const auto net = testing_support::random_network(rng, {4, 7});
    const auto n = static_cast<int>(net.node_count());
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    const double gamma = crep::evaluate_objective(net, ObjectiveKind::order_parameter);
    const double coh = crep::evaluate_objective(net, ObjectiveKind::phase_cohesiveness);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (auto v : {DecisionVariable::inertia, DecisionVariable::damping}) {
        const auto spec = make_spec(v, idx, 1.0 * n, 0.1, 3.0);
        CHECK_THROWS_AS(crep::optimize(net, spec, ObjectiveKind::order_parameter), crep::InfeasibleSpecError);
        CHECK_THROWS_AS(crep::optimize(net, spec, ObjectiveKind::phase_cohesiveness), crep::InfeasibleSpecError);
        for (int trial = 0; trial < 5; ++trial) {
            Eigen::VectorXd theta(n);
            for (int i = 0; i < n; ++i) theta[i] = u(rng);
            const auto changed = crep::apply_decision(net, spec, theta);
            CHECK(crep::evaluate_objective(changed, ObjectiveKind::order_parameter) == gamma);
            CHECK(crep::evaluate_objective(changed, ObjectiveKind::phase_cohesiveness) == coh);
        }
    }
}

TEST_CASE("infeasible specifications are rejected") {
    const auto net = two_generators(1.0, 1.0);
    // Budget outside [sum lower, sum upper].
    CHECK_THROWS_AS(crep::optimize(net, make_spec(DecisionVariable::line_capacity, {0, 1}, 10.0, 0.5, 3.0),
                                   ObjectiveKind::crep_phi),
                    crep::InfeasibleSpecError);
    // Load node is not a generator.
    CHECK_THROWS_AS(crep::optimize(net, make_spec(DecisionVariable::generation, {0, 2}, 2.0, -3.0, 3.0),
                                   ObjectiveKind::crep_phi),
                    crep::InfeasibleSpecError);
    // Generation budget must balance the fixed load.
    CHECK_THROWS_AS(crep::optimize(net, make_spec(DecisionVariable::generation, {0, 1}, 2.5, 0.2, 2.0),
                                   ObjectiveKind::crep_phi),
                    crep::InfeasibleSpecError);
    CHECK_THROWS_AS(crep::optimize(net, make_spec(DecisionVariable::inertia, {0, 0}, 2.0, 0.5, 2.0),
                                   ObjectiveKind::crep_phi),
                    crep::InfeasibleSpecError);
    CHECK_THROWS_AS(crep::optimize(net, make_spec(DecisionVariable::inertia, {0, 5}, 2.0, 0.5, 2.0),
                                   ObjectiveKind::crep_phi),
                    crep::InfeasibleSpecError);
    CHECK_THROWS_AS(crep::optimize(net, make_spec(DecisionVariable::damping, {0, 1}, 2.0, 0.0, 2.0),
                                   ObjectiveKind::crep_phi),
                    crep::InfeasibleSpecError);
    CHECK_THROWS_AS(crep::optimize(net, make_spec(DecisionVariable::damping, {}, 0.0, 0.0, 2.0), ObjectiveKind::crep_phi),
                    crep::InfeasibleSpecError);
}

TEST_CASE("no admissible candidate raises NoFeasiblePointError") {
    const auto net = testing_support::two_node(1.0, 2.0);
    const auto spec = make_spec(DecisionVariable::line_capacity, {0}, 0.5, 0.5, 0.5);
    CHECK_THROWS_AS(crep::optimize(net, spec, ObjectiveKind::crep_phi), crep::NoFeasiblePointError);
}

TEST_CASE("frequency norms order candidates like the largest frequency variance") {
    const auto net = crep::load_network(testing_support::data_path("ring5.json"));
    const auto n = static_cast<int>(net.node_count());
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    const double total = net.inertias().sum();
    const auto check = crep::min_max_sigma_equivalence_check(
        net, make_spec(DecisionVariable::inertia, idx, total, 0.2 * total / n, 0.5 * total), 0.02, 30);
    CHECK(check.all_agree);
    CHECK(check.samples == 30);
    CHECK(check.argmax_agreements == 30);
    CHECK(check.pair_agreements == check.pairs);
}

TEST_CASE("single noisy node makes the equivalence trivial") {
    const auto net = crep::Network::create({{1, 0.5, 1, 1, 0.4}, {2, -0.5, 1, 1, 0.0}}, {{1, 2, 2.0}});
    const auto check = crep::min_max_sigma_equivalence_check(
        net, make_spec(DecisionVariable::damping, {0, 1}, 2.0, 0.3, 1.7), 0.02, 10);
    CHECK(check.all_agree);
}

TEST_CASE("componentwise larger frequency variances give larger escape probabilities") {
    const Eigen::Vector3d small(0.0001, 0.0004, 0.0002);
    const Eigen::Vector3d large(0.0002, 0.0005, 0.0009);
    double f_small = 0.0, f_large = 0.0;
    for (int i = 0; i < 3; ++i) {
        f_small = std::max(f_small, crep::escape_prob_freq(std::sqrt(small[i]), 0.02));
        f_large = std::max(f_large, crep::escape_prob_freq(std::sqrt(large[i]), 0.02));
    }
    CHECK(f_small < f_large);
    CHECK(crep::escape_prob_freq(std::sqrt(large[2]), 0.02) == f_large);
}

TEST_CASE("enum names round trip") {
    for (auto k : {ObjectiveKind::crep_phi, ObjectiveKind::crep_phi_delta, ObjectiveKind::crep_phi_omega,
                   ObjectiveKind::trace_q_delta, ObjectiveKind::trace_q_omega, ObjectiveKind::max_sigma2_omega,
                   ObjectiveKind::phase_cohesiveness, ObjectiveKind::order_parameter}) {
        CHECK(crep::objective_kind_from_string(crep::to_string(k)) == k);
    }
    for (auto v : {DecisionVariable::generation, DecisionVariable::inertia, DecisionVariable::damping,
                   DecisionVariable::line_capacity}) {
        CHECK(crep::decision_variable_from_string(crep::to_string(v)) == v);
    }
    CHECK_THROWS_AS(crep::objective_kind_from_string("phi"), crep::ParseError);
}
