#pragma once

// JSON views of the report types. Node and line references are emitted
// 1-based (node ids, line declaration order); absent references are null.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "crep/crep_metric.hpp"
#include "crep/hitting_time.hpp"
#include "crep/linearize.hpp"
#include "crep/optimizer.hpp"
#include "crep/power_flow.hpp"
#include "crep/stability_metrics.hpp"

namespace crep::io {

using nlohmann::json;

inline json to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline json to_json(const std::vector<std::int64_t>& v) { return json(v); }

inline json one_based(int index) { return index < 0 ? json(nullptr) : json(index + 1); }

inline json to_json(const SynchronousState& s) {
    return {{"phase", to_json(s.phase)},
            {"output_phase_diffs", to_json(s.output_phase_diffs)},
            {"residual", s.residual},
            {"iterations", s.iterations}};
}

inline json to_json(const VarianceReport& v) {
    return {{"sigma2_delta", to_json(v.sigma2_delta)},
            {"sigma2_omega", to_json(v.sigma2_omega)},
            {"lyapunov_residual", v.lyapunov_residual}};
}

inline json to_json(const CrepReport& c) {
    return {{"f_delta", to_json(c.f_delta)},   {"f_omega", to_json(c.f_omega)},
            {"phi", c.phi},                    {"phi_delta", c.phi_delta},
            {"phi_omega", c.phi_omega},        {"argmax_line", one_based(c.argmax_line)},
            {"argmax_node", one_based(c.argmax_node)}, {"epsilon", c.epsilon}};
}

inline json to_json(const MetricsBundle& b) {
    return {{"min_re_mu", b.min_re_mu},
            {"h2_squared", b.h2_squared},
            {"trace_q_delta", b.trace_q_delta},
            {"trace_q_omega", b.trace_q_omega},
            {"cohesiveness", b.cohesiveness},
            {"gamma", b.gamma},
            {"gamma_reference", b.gamma_reference},
            {"kuramoto_r", b.kuramoto_r}};
}

inline json to_json(const SimConfig& c) {
    return {{"dt", c.dt},
            {"t_max", c.t_max},
            {"n_samples", c.n_samples},
            {"eps", c.eps},
            {"master_seed", c.master_seed},
            {"exit_mode", to_string(c.exit_mode)}};
}

inline json to_json(const HittingTimeEstimate& e) {
    return {{"mean", e.mean},
            {"half_width", e.half_width},
            {"ci_low", e.mean - e.half_width},
            {"ci_high", e.mean + e.half_width},
            {"n_exited", e.n_exited},
            {"n_censored", e.n_censored},
            {"exit_line_histogram", to_json(e.exit_line_histogram)},
            {"exit_node_histogram", to_json(e.exit_node_histogram)}};
}

inline json to_json(const OptimizationResult& r) {
    json history = json::array();
    for (const auto& [iteration, best] : r.history) history.push_back({{"iteration", iteration}, {"best", best}});
    return {{"theta", to_json(r.theta)},
            {"objective_initial", r.objective_initial},
            {"objective_final", r.objective_final},
            {"feasible", r.feasible},
            {"evaluations", r.evaluations},
            {"history", history}};
}

inline json to_json(const BraessVerdict& v) {
    json metrics = json::array();
    for (const auto& c : v.metrics) {
        json row = {{"name", c.name},
                    {"before", c.before},
                    {"after", c.after},
                    {"higher_is_better", c.higher_is_better},
                    {"verdict", to_string(c.verdict)}};
        if (c.name == "t_e") {
            row["before_half_width"] = c.before_half_width;
            row["after_half_width"] = c.after_half_width;
        }
        metrics.push_back(row);
    }
    json out = {{"metrics", metrics},
                {"before", to_json(v.before)},
                {"after", to_json(v.after)},
                {"paradox_metrics", v.paradox_metrics},
                {"metrics_disagree", v.metrics_disagree}};
    out["before"]["crep"] = to_json(v.before.crep);
    out["after"]["crep"] = to_json(v.after.crep);
    if (v.hitting_before) out["hitting_before"] = to_json(*v.hitting_before);
    if (v.hitting_after) out["hitting_after"] = to_json(*v.hitting_after);
    return out;
}

}  // namespace crep::io
