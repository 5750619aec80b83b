// crep: command-line front end (analyze, sweep, hitting-time, optimize, braess).
//
// Exit codes: 0 success, 1 input or usage error, 2 no admissible state /
// all trajectories censored / infeasible decision spec, 3 no feasible point.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crep/crep.hpp"

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct UsageError : crep::Error {
    using crep::Error::Error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw crep::ParseError("cannot open file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw crep::Error("cannot write " + path);
    out << text;
}

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(cur);
    if (!s.empty() && s.back() == sep) parts.emplace_back();
    return parts;
}

double to_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("invalid number \"" + s + "\" in " + what);
}

int to_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("invalid integer \"" + s + "\" in " + what);
}

// Shared Monte-Carlo flags.
struct SimFlags {
    crep::SimConfig cfg;
    std::string exit_mode = "both";
    unsigned workers = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--dt", cfg.dt, "Euler-Maruyama step (s)")->capture_default_str();
        cmd->add_option("--tmax", cfg.t_max, "censoring horizon (s)")->capture_default_str();
        cmd->add_option("--samples", cfg.n_samples, "number of trajectories")->capture_default_str();
        cmd->add_option("--seed", cfg.master_seed, "master seed")->capture_default_str();
        cmd->add_option("--exit-mode", exit_mode, "phase_only | freq_only | both")->capture_default_str();
        cmd->add_option("--workers", workers, "worker threads (0 = hardware concurrency)")->capture_default_str();
    }
    crep::SimConfig resolve(double eps) {
        cfg.eps = eps;
        cfg.exit_mode = crep::exit_mode_from_string(exit_mode);
        crep::validate(cfg);
        return cfg;
    }
};

json power_flow_echo(const crep::PowerFlowOptions& pf) {
    return {{"tol", pf.tol}, {"max_iter", pf.max_iter}, {"max_halvings", pf.max_halvings}};
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
    std::string network;
    double eps = crep::kDefaultFrequencyTolerance;
    std::string out;
    bool with_hitting_time = false;
    SimFlags sim;
};

int run_analyze(AnalyzeArgs& a) {
    const auto t0 = Clock::now();
    const std::string text = read_file(a.network);
    const auto net = crep::parse_network(text);
    const double t_load = elapsed_ms(t0);

    const crep::PowerFlowOptions pf;
    auto t = Clock::now();
    crep::CrepAnalysis analysis;
    analysis.state = crep::solve_synchronous_state(net, pf);
    const double t_pf = elapsed_ms(t);
    t = Clock::now();
    analysis.model = crep::build_linearization(net, analysis.state);
    analysis.reduction = crep::spectral_reduce(analysis.model, net);
    const double t_lin = elapsed_ms(t);
    t = Clock::now();
    analysis.variance = crep::solve_lyapunov(analysis.reduction);
    const double t_lyap = elapsed_ms(t);
    t = Clock::now();
    analysis.crep = crep::crep_from_variance(analysis.state, analysis.variance, a.eps);
    const auto metrics = crep::metrics_from_analysis(analysis);
    const double t_metrics = elapsed_ms(t);

    json config = {{"eps", a.eps}, {"power_flow", power_flow_echo(pf)}};
    json report = {
        {"input", {{"network", a.network}, {"network_hash", fnv1a_hex(text)}, {"nodes", net.node_count()},
                   {"lines", net.line_count()}}},
        {"synchronous_state", crep::io::to_json(analysis.state)},
        {"variance", crep::io::to_json(analysis.variance)},
        {"crep", crep::io::to_json(analysis.crep)},
        {"metrics", crep::io::to_json(metrics)},
    };
    json timings = {{"load", t_load}, {"power_flow", t_pf}, {"linearize", t_lin}, {"lyapunov", t_lyap},
                    {"metrics", t_metrics}};
    if (a.with_hitting_time) {
        const auto cfg = a.sim.resolve(a.eps);
        config["hitting_time"] = crep::io::to_json(cfg);
        t = Clock::now();
        report["hitting_time"] = crep::io::to_json(crep::estimate_hitting_time(net, analysis.state, cfg, a.sim.workers));
        timings["hitting_time"] = elapsed_ms(t);
    }
    report["config"] = config;
    report["timings_ms"] = timings;
    emit(a.out, report.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
    std::string network;
    std::string param;
    std::string range;
    std::string metrics = "phi,phi_delta,phi_omega";
    double eps = crep::kDefaultFrequencyTolerance;
    std::string out;
    SimFlags sim;
};

// Current total of a sweepable family. Pt is the total generation.
double family_total(const crep::Network& net, const std::string& param) {
    double total = 0.0;
    if (param == "Lt") {
        for (const auto& l : net.lines()) total += l.capacity;
        return total;
    }
    for (const auto& n : net.nodes()) {
        if (param == "Pt") total += n.power > 0.0 ? n.power : 0.0;
        else if (param == "Mt") total += n.inertia;
        else if (param == "Dt") total += n.damping;
    }
    return total;
}

// Every component scaled by the same factor, so each keeps its share.
crep::Network scale_family(const crep::Network& net, const std::string& param, double factor) {
    if (param == "Lt") {
        auto lines = net.lines();
        for (auto& l : lines) l.capacity *= factor;
        return crep::with_lines(net, std::move(lines));
    }
    auto nodes = net.nodes();
    for (auto& n : nodes) {
        if (param == "Pt") n.power *= factor;
        else if (param == "Mt") n.inertia *= factor;
        else n.damping *= factor;
    }
    return crep::with_nodes(net, std::move(nodes));
}

int run_sweep(SweepArgs& a) {
    if (a.param != "Pt" && a.param != "Lt" && a.param != "Mt" && a.param != "Dt") {
        throw UsageError("--param must be one of Pt, Lt, Mt, Dt");
    }
    const auto parts = split(a.range, ':');
    if (parts.size() != 3) throw UsageError("--range must be lo:hi:steps");
    const double lo = to_double(parts[0], "--range");
    const double hi = to_double(parts[1], "--range");
    const int steps = to_int(parts[2], "--range");
    if (steps < 1) throw UsageError("--range needs at least one step");

    static const std::vector<std::string> known{"phi",           "phi_delta",     "phi_omega",        "min_re_mu",
                                                "h2_squared",    "trace_q_delta", "trace_q_omega",    "max_sigma2_omega",
                                                "cohesiveness",  "gamma",         "kuramoto_r",       "t_e",
                                                "t_e_half_width"};
    const auto metrics = split(a.metrics, ',');
    bool wants_hitting = false;
    for (const auto& m : metrics) {
        if (std::find(known.begin(), known.end(), m) == known.end()) throw UsageError("unknown metric \"" + m + "\"");
        wants_hitting = wants_hitting || m == "t_e" || m == "t_e_half_width";
    }
    std::optional<crep::SimConfig> sim;
    if (wants_hitting) sim = a.sim.resolve(a.eps);

    const auto base = crep::load_network(a.network);
    const double total = family_total(base, a.param);
    if (!(total > 0.0)) throw UsageError("cannot scale " + a.param + ": current total is zero");

    std::ostringstream csv;
    csv << a.param << ",feasible";
    for (const auto& m : metrics) csv << ',' << m;
    csv << '\n';
    for (int s = 0; s < steps; ++s) {
        const double t = steps == 1 ? 0.0 : static_cast<double>(s) / (steps - 1);
        const double value = lo * (1.0 - t) + hi * t;
        std::map<std::string, double> row;
        bool feasible = true;
        try {
            const auto net = scale_family(base, a.param, value / total);
            const auto analysis = crep::analyze_crep(net, a.eps);
            const auto b = crep::metrics_from_analysis(analysis);
            row = {{"phi", b.crep.phi},
                   {"phi_delta", b.crep.phi_delta},
                   {"phi_omega", b.crep.phi_omega},
                   {"min_re_mu", b.min_re_mu},
                   {"h2_squared", b.h2_squared},
                   {"trace_q_delta", b.trace_q_delta},
                   {"trace_q_omega", b.trace_q_omega},
                   {"max_sigma2_omega", analysis.variance.sigma2_omega.maxCoeff()},
                   {"cohesiveness", b.cohesiveness},
                   {"gamma", b.gamma},
                   {"kuramoto_r", b.kuramoto_r}};
            if (sim) {
                try {
                    const auto est = crep::estimate_hitting_time(net, analysis.state, *sim, a.sim.workers);
                    row["t_e"] = est.mean;
                    row["t_e_half_width"] = est.half_width;
                } catch (const crep::AllCensoredError&) {
                }
            }
        } catch (const crep::ValidationError&) {
            feasible = false;
        } catch (const crep::NoSynchronousStateError&) {
            feasible = false;
        } catch (const crep::DegenerateError&) {
            feasible = false;
        } catch (const crep::NumericalError&) {
            feasible = false;
        }
        csv << fmt(value) << ',' << (feasible ? 1 : 0);
        for (const auto& m : metrics) {
            csv << ',';
            if (auto it = row.find(m); it != row.end()) csv << fmt(it->second);
        }
        csv << '\n';
    }
    emit(a.out, csv.str());
    return 0;
}

// ---------------------------------------------------------------------------
// hitting-time

struct HittingArgs {
    std::string network;
    double eps = crep::kDefaultFrequencyTolerance;
    std::string out;
    SimFlags sim;
};

int run_hitting_time(HittingArgs& a) {
    const auto cfg = a.sim.resolve(a.eps);
    const std::string text = read_file(a.network);
    const auto net = crep::parse_network(text);
    const auto est = crep::estimate_hitting_time(net, cfg, a.sim.workers);
    // No timings or worker count: output depends only on the inputs.
    json doc = {{"input", {{"network", a.network}, {"network_hash", fnv1a_hex(text)}}},
                {"config", crep::io::to_json(cfg)},
                {"estimate", crep::io::to_json(est)}};
    emit(a.out, doc.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// optimize

struct OptimizeArgs {
    std::string network;
    std::string decision = "line_capacity";
    std::string objective = "crep_phi";
    std::optional<double> budget;
    std::string bounds;
    std::uint64_t seed = 1;
    int max_evaluations = crep::SearchConfig{}.max_evaluations;
    double eps = crep::kDefaultFrequencyTolerance;
    std::string out;
    std::string network_out;
};

std::vector<double> number_array(const json& doc, const char* key) {
    if (!doc.contains(key) || !doc[key].is_array()) throw crep::ParseError(std::string("bounds: \"") + key + "\" must be an array");
    std::vector<double> v;
    for (const auto& x : doc[key]) {
        if (!x.is_number()) throw crep::ParseError(std::string("bounds: \"") + key + "\" must hold numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

int run_optimize(OptimizeArgs& a) {
    const auto net = crep::load_network(a.network);
    crep::DecisionSpec spec;
    spec.variable = crep::decision_variable_from_string(a.decision);
    const auto kind = crep::objective_kind_from_string(a.objective);
    const bool on_lines = spec.variable == crep::DecisionVariable::line_capacity;

    if (!a.bounds.empty()) {
        json doc;
        try {
            doc = json::parse(read_file(a.bounds));
        } catch (const json::parse_error& e) {
            throw crep::ParseError(std::string("malformed bounds JSON: ") + e.what());
        }
        for (const auto& [key, _] : doc.items()) {
            if (key != "indices" && key != "lower" && key != "upper") throw crep::ParseError("bounds: unknown field \"" + key + "\"");
        }
        if (doc.contains("indices")) {
            for (const auto& x : doc["indices"]) {
                if (!x.is_number_integer()) throw crep::ParseError("bounds: indices must be integers");
                spec.indices.push_back(x.get<int>() - 1);
            }
        }
    }
    if (spec.indices.empty()) {
        const std::size_t count = on_lines ? net.line_count() : net.node_count();
        for (std::size_t i = 0; i < count; ++i) {
            if (spec.variable == crep::DecisionVariable::generation && !(net.nodes()[i].power > 0.0)) continue;
            spec.indices.push_back(static_cast<int>(i));
        }
    }
    const std::size_t limit = on_lines ? net.line_count() : net.node_count();
    for (int idx : spec.indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= limit) throw crep::InfeasibleSpecError("decision index out of range");
    }

    const Eigen::VectorXd current = crep::decision_values(net, spec);
    spec.budget = a.budget.value_or(current.sum());
    const auto dim = static_cast<Eigen::Index>(spec.indices.size());
    if (!a.bounds.empty()) {
        const json doc = json::parse(read_file(a.bounds));
        const auto lower = number_array(doc, "lower");
        const auto upper = number_array(doc, "upper");
        if (static_cast<Eigen::Index>(lower.size()) != dim || static_cast<Eigen::Index>(upper.size()) != dim) {
            throw crep::InfeasibleSpecError("bounds: lower/upper must have one entry per decision variable");
        }
        spec.lower = Eigen::Map<const Eigen::VectorXd>(lower.data(), dim);
        spec.upper = Eigen::Map<const Eigen::VectorXd>(upper.data(), dim);
    } else {
        // Default box: each entry between a tenth of its current value and the whole budget.
        spec.lower = 0.1 * current;
        spec.upper = Eigen::VectorXd::Constant(dim, spec.budget);
    }

    crep::SearchConfig search;
    search.seed = a.seed;
    search.max_evaluations = a.max_evaluations;
    const auto result = crep::optimize(net, spec, kind, a.eps, search);

    std::vector<int> one_based;
    for (int idx : spec.indices) one_based.push_back(idx + 1);
    json doc = {{"config",
                 {{"decision", a.decision},
                  {"objective", a.objective},
                  {"eps", a.eps},
                  {"budget", spec.budget},
                  {"indices", one_based},
                  {"lower", crep::io::to_json(spec.lower)},
                  {"upper", crep::io::to_json(spec.upper)},
                  {"seed", search.seed},
                  {"max_evaluations", search.max_evaluations},
                  {"population_factor", search.population_factor},
                  {"differential_weight", search.differential_weight},
                  {"crossover_rate", search.crossover_rate},
                  {"polish_evaluations", search.polish_evaluations}}},
                {"result", crep::io::to_json(result)}};

    std::string network_out = a.network_out;
    if (network_out.empty() && !a.out.empty() && a.out != "-") {
        network_out = a.out;
        if (network_out.size() > 5 && network_out.ends_with(".json")) network_out.resize(network_out.size() - 5);
        network_out += "_network.json";
    }
    if (!network_out.empty()) {
        crep::save_network(crep::apply_decision(net, spec, result.theta), network_out);
        doc["network_out"] = network_out;
    }
    emit(a.out, doc.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// braess

struct BraessArgs {
    std::string network;
    std::string add_line;
    std::string set_capacity;
    bool with_hitting_time = false;
    double eps = crep::kDefaultFrequencyTolerance;
    std::string out;
    SimFlags sim;
};

int run_braess(BraessArgs& a) {
    const auto net = crep::load_network(a.network);
    std::optional<crep::BraessScenario> scenario;
    json change;
    if (!a.add_line.empty()) {
        const auto p = split(a.add_line, ':');
        if (p.size() != 3) throw UsageError("--add-line must be i:j:capacity");
        const int i = to_int(p[0], "--add-line");
        const int j = to_int(p[1], "--add-line");
        const double cap = to_double(p[2], "--add-line");
        scenario = crep::BraessScenario::add_line(net, i, j, cap);
        change = {{"kind", "add_line"}, {"from", i}, {"to", j}, {"capacity", cap}};
    } else if (!a.set_capacity.empty()) {
        const auto p = split(a.set_capacity, ':');
        if (p.size() != 2) throw UsageError("--set-capacity must be k:capacity");
        const int k = to_int(p[0], "--set-capacity");
        const double cap = to_double(p[1], "--set-capacity");
        if (k < 1 || static_cast<std::size_t>(k) > net.line_count()) throw UsageError("--set-capacity: no line " + p[0]);
        scenario = crep::BraessScenario::set_capacity(net, k - 1, cap);
        change = {{"kind", "set_capacity"}, {"line", k}, {"capacity", cap}};
    } else {
        throw UsageError("one of --add-line or --set-capacity is required");
    }

    std::optional<crep::SimConfig> sim;
    json config = {{"eps", a.eps}};
    if (a.with_hitting_time) {
        sim = a.sim.resolve(a.eps);
        config["hitting_time"] = crep::io::to_json(*sim);
    }
    const auto verdict = crep::braess_compare(*scenario, a.eps, sim, a.sim.workers);
    json doc = crep::io::to_json(verdict);
    doc["change"] = change;
    doc["config"] = config;
    emit(a.out, doc.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Critical escape probability analysis of stochastic swing-equation networks"};
    app.require_subcommand(1);

    AnalyzeArgs analyze;
    auto* c_analyze = app.add_subcommand("analyze", "power flow, variances, CREP and stability metrics");
    c_analyze->add_option("network", analyze.network, "network JSON file")->required();
    c_analyze->add_option("--eps", analyze.eps, "frequency tolerance (rad/s)")->capture_default_str();
    c_analyze->add_option("--out", analyze.out, "report path (default stdout)");
    c_analyze->add_flag("--with-hitting-time", analyze.with_hitting_time, "add a Monte-Carlo hitting-time estimate");
    analyze.sim.attach(c_analyze);

    SweepArgs sweep;
    auto* c_sweep = app.add_subcommand("sweep", "scale one parameter family and tabulate metrics as CSV");
    c_sweep->add_option("network", sweep.network, "network JSON file")->required();
    c_sweep->add_option("--param", sweep.param, "Pt | Lt | Mt | Dt")->required();
    c_sweep->add_option("--range", sweep.range, "lo:hi:steps, absolute totals")->required();
    c_sweep->add_option("--metrics", sweep.metrics, "comma-separated metric columns")->capture_default_str();
    c_sweep->add_option("--eps", sweep.eps, "frequency tolerance (rad/s)")->capture_default_str();
    c_sweep->add_option("--out", sweep.out, "CSV path (default stdout)");
    sweep.sim.attach(c_sweep);

    HittingArgs hitting;
    auto* c_hit = app.add_subcommand("hitting-time", "Monte-Carlo mean first hitting time");
    c_hit->add_option("network", hitting.network, "network JSON file")->required();
    c_hit->add_option("--eps", hitting.eps, "frequency tolerance (rad/s)")->capture_default_str();
    c_hit->add_option("--out", hitting.out, "JSON path (default stdout)");
    hitting.sim.attach(c_hit);

    OptimizeArgs opt;
    auto* c_opt = app.add_subcommand("optimize", "minimize an objective over one parameter family");
    c_opt->add_option("network", opt.network, "network JSON file")->required();
    c_opt->add_option("--decision", opt.decision, "generation | inertia | damping | line_capacity")->capture_default_str();
    c_opt->add_option("--objective", opt.objective,
                      "crep_phi | crep_phi_delta | crep_phi_omega | trace_q_delta | trace_q_omega | max_sigma2_omega | "
                      "phase_cohesiveness | order_parameter")
        ->capture_default_str();
    c_opt->add_option("--budget", opt.budget, "total of the decision variables (default: current total)");
    c_opt->add_option("--bounds", opt.bounds, "JSON {indices (1-based), lower, upper}");
    c_opt->add_option("--seed", opt.seed, "search seed")->capture_default_str();
    c_opt->add_option("--max-evals", opt.max_evaluations, "differential-evolution evaluation budget")->capture_default_str();
    c_opt->add_option("--eps", opt.eps, "frequency tolerance (rad/s)")->capture_default_str();
    c_opt->add_option("--out", opt.out, "result JSON path (default stdout)");
    c_opt->add_option("--network-out", opt.network_out, "optimized network path (default <out>_network.json)");

    BraessArgs braess;
    auto* c_braess = app.add_subcommand("braess", "compare metrics before and after a line change");
    c_braess->add_option("network", braess.network, "network JSON file")->required();
    auto* o_add = c_braess->add_option("--add-line", braess.add_line, "i:j:capacity (node ids)");
    auto* o_set = c_braess->add_option("--set-capacity", braess.set_capacity, "k:capacity (1-based line)");
    o_add->excludes(o_set);
    c_braess->add_flag("--with-hitting-time", braess.with_hitting_time, "include Monte-Carlo t_e");
    c_braess->add_option("--eps", braess.eps, "frequency tolerance (rad/s)")->capture_default_str();
    c_braess->add_option("--out", braess.out, "JSON path (default stdout)");
    braess.sim.attach(c_braess);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (c_analyze->parsed()) return run_analyze(analyze);
        if (c_sweep->parsed()) return run_sweep(sweep);
        if (c_hit->parsed()) return run_hitting_time(hitting);
        if (c_opt->parsed()) return run_optimize(opt);
        if (c_braess->parsed()) return run_braess(braess);
    } catch (const crep::NoFeasiblePointError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const crep::NoSynchronousStateError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const crep::DegenerateError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const crep::NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const crep::AllCensoredError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const crep::InfeasibleSpecError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const crep::BraessSideError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
