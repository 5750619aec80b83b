#pragma once

// Shared fixtures for the test executables.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "crep/crep.hpp"

namespace testing_support {

inline std::string data_path(const std::string& name) { return std::string(CREP_DATA_DIR) + "/" + name; }

inline crep::Network two_node(double p, double cap, double noise = 0.1) {
    return crep::Network::create({{1, p, 1.0, 1.0, noise}, {2, -p, 1.0, 1.0, noise}}, {{1, 2, cap}});
}

inline crep::Network path3(double cap = 2.0, double noise = 0.1) {
    return crep::Network::create({{1, 1.0, 1.0, 1.0, noise}, {2, 0.0, 1.0, 1.0, noise}, {3, -1.0, 1.0, 1.0, noise}},
                                 {{1, 2, cap}, {2, 3, cap}});
}

inline crep::Network triangle(double cap = 2.0, double noise = 0.1) {
    return crep::Network::create({{1, 1.0, 1.0, 1.0, noise}, {2, 0.0, 1.0, 1.0, noise}, {3, -1.0, 1.0, 1.0, noise}},
                                 {{1, 2, cap}, {2, 3, cap}, {3, 1, cap}});
}

struct RandomNetworkOptions {
    int min_nodes = 2;
    int max_nodes = 8;
    bool uniform_ratio = false;  // b_i^2 / d_i identical across nodes
    bool unit_inertia = false;
};

/// Random connected network with an admissible synchronous state.
///
/// A random spanning tree plus a few chords; injections are drawn with zero
/// mean and capacities are large enough that every line stays well inside
/// the phase domain.
inline crep::Network random_network(std::mt19937_64& rng, const RandomNetworkOptions& opt = {}) {
    std::uniform_int_distribution<int> size(opt.min_nodes, opt.max_nodes);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        const int n = size(rng);
        std::vector<crep::Node> nodes;
        double total = 0.0;
        for (int i = 1; i <= n; ++i) {
            const double p = 2.0 * u(rng) - 1.0;
            total += p;
            const double m = opt.unit_inertia ? 1.0 : 0.5 + 2.0 * u(rng);
            const double d = 0.3 + 1.5 * u(rng);
            const double b = opt.uniform_ratio ? 0.2 * std::sqrt(d) : 0.05 + 0.3 * u(rng);
            nodes.push_back({i, p, m, d, b});
        }
        for (auto& node : nodes) node.power -= total / n;
        double sum = 0.0;
        for (int i = 0; i + 1 < n; ++i) sum += nodes[static_cast<std::size_t>(i)].power;
        nodes.back().power = -sum;

        std::vector<crep::Line> lines;
        for (int i = 2; i <= n; ++i) {
            std::uniform_int_distribution<int> parent(1, i - 1);
            lines.push_back({parent(rng), i, 2.0 + 3.0 * u(rng)});
        }
        const int chords = n >= 3 ? static_cast<int>(u(rng) * n) : 0;
        for (int c = 0; c < chords; ++c) {
            std::uniform_int_distribution<int> pick(1, n);
            const int a = pick(rng);
            const int b = pick(rng);
            if (a == b) continue;
            bool exists = false;
            for (const auto& l : lines) exists = exists || (std::min(l.from, l.to) == std::min(a, b) && std::max(l.from, l.to) == std::max(a, b));
            if (!exists) lines.push_back({a, b, 2.0 + 3.0 * u(rng)});
        }
        auto net = crep::Network::create(std::move(nodes), std::move(lines));
        try {
            (void)crep::solve_synchronous_state(net);
            return net;
        } catch (const crep::NoSynchronousStateError&) {
        }
    }
}

}  // namespace testing_support
