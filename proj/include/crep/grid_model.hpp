#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "crep/errors.hpp"

namespace crep {

/// A bus of the swing-equation network. Ids are 1-based.
struct Node {
    int id = 0;
    double power = 0.0;    // injection, > 0 generation, < 0 load
    double inertia = 1.0;  // m_i > 0
    double damping = 1.0;  // d_i > 0
    double noise = 0.0;    // b_i >= 0
};

/// A lossless transmission line between two node ids.
struct Line {
    int from = 0;
    int to = 0;
    double capacity = 1.0;  // effective susceptance l_ij > 0
};

inline constexpr double kPowerBalanceTolerance = 1e-9;

/// Validated, immutable network. Construct through Network::create.
class Network {
  public:
    static Network create(std::vector<Node> nodes, std::vector<Line> lines);

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<Line>& lines() const noexcept { return lines_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t line_count() const noexcept { return lines_.size(); }

    /// 0-based endpoints of line k.
    std::size_t from_index(std::size_t k) const { return static_cast<std::size_t>(lines_[k].from - 1); }
    std::size_t to_index(std::size_t k) const { return static_cast<std::size_t>(lines_[k].to - 1); }

    Eigen::VectorXd powers() const;
    Eigen::VectorXd inertias() const;
    Eigen::VectorXd dampings() const;
    Eigen::VectorXd noises() const;
    Eigen::VectorXd capacities() const;

    /// Returns the index of the line joining a and b (either orientation), or -1.
    int find_line(int a, int b) const;

  private:
    Network(std::vector<Node> nodes, std::vector<Line> lines)
        : nodes_(std::move(nodes)), lines_(std::move(lines)) {}

    std::vector<Node> nodes_;
    std::vector<Line> lines_;
};

namespace detail {

inline bool is_connected(std::size_t n, const std::vector<Line>& lines) {
    if (n == 0) return false;
    std::vector<std::vector<std::size_t>> adjacency(n);
    for (const auto& line : lines) {
        adjacency[line.from - 1].push_back(line.to - 1);
        adjacency[line.to - 1].push_back(line.from - 1);
    }
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        auto u = frontier.front();
        frontier.pop();
        for (auto v : adjacency[u]) {
            if (!seen[v]) {
                seen[v] = true;
                ++reached;
                frontier.push(v);
            }
        }
    }
    return reached == n;
}

}  // namespace detail

inline Network Network::create(std::vector<Node> nodes, std::vector<Line> lines) {
    if (nodes.empty()) throw ValidationError("network has no nodes");

    std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
    const auto n = nodes.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& node = nodes[i];
        if (node.id != static_cast<int>(i + 1)) {
            throw ValidationError("node ids must be the contiguous range 1.." + std::to_string(n));
        }
        if (!std::isfinite(node.power) || !std::isfinite(node.inertia) || !std::isfinite(node.damping) ||
            !std::isfinite(node.noise)) {
            throw ValidationError("node " + std::to_string(node.id) + " has a non-finite parameter");
        }
        if (node.inertia <= 0.0) throw ValidationError("node " + std::to_string(node.id) + ": nonpositive inertia");
        if (node.damping <= 0.0) throw ValidationError("node " + std::to_string(node.id) + ": nonpositive damping");
        if (node.noise < 0.0) throw ValidationError("node " + std::to_string(node.id) + ": negative noise");
    }

    std::set<std::pair<int, int>> pairs;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const auto& line = lines[k];
        const auto tag = "line " + std::to_string(k + 1);
        if (line.from < 1 || line.from > static_cast<int>(n) || line.to < 1 || line.to > static_cast<int>(n)) {
            throw ValidationError(tag + ": endpoint is not a node id");
        }
        if (line.from == line.to) throw ValidationError(tag + ": self loop");
        if (!std::isfinite(line.capacity) || line.capacity <= 0.0) {
            throw ValidationError(tag + ": nonpositive capacity");
        }
        auto key = std::minmax(line.from, line.to);
        if (!pairs.insert(key).second) {
            throw ValidationError(tag + ": duplicate line between nodes " + std::to_string(key.first) + " and " +
                                  std::to_string(key.second));
        }
    }

    if (lines.size() + 1 < n || !detail::is_connected(n, lines)) {
        throw ValidationError("disconnected graph");
    }

    double total = 0.0;
    for (const auto& node : nodes) total += node.power;
    if (std::abs(total) > kPowerBalanceTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "power imbalance: sum of injections is " << total;
        throw ValidationError(msg.str());
    }

    return Network(std::move(nodes), std::move(lines));
}

inline Eigen::VectorXd Network::powers() const {
    Eigen::VectorXd v(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) v[i] = nodes_[i].power;
    return v;
}

inline Eigen::VectorXd Network::inertias() const {
    Eigen::VectorXd v(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) v[i] = nodes_[i].inertia;
    return v;
}

inline Eigen::VectorXd Network::dampings() const {
    Eigen::VectorXd v(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) v[i] = nodes_[i].damping;
    return v;
}

inline Eigen::VectorXd Network::noises() const {
    Eigen::VectorXd v(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) v[i] = nodes_[i].noise;
    return v;
}

inline Eigen::VectorXd Network::capacities() const {
    Eigen::VectorXd v(lines_.size());
    for (std::size_t k = 0; k < lines_.size(); ++k) v[k] = lines_[k].capacity;
    return v;
}

inline int Network::find_line(int a, int b) const {
    for (std::size_t k = 0; k < lines_.size(); ++k) {
        const auto& line = lines_[k];
        if ((line.from == a && line.to == b) || (line.from == b && line.to == a)) return static_cast<int>(k);
    }
    return -1;
}

/// Node-by-line incidence matrix: +1 at the declared start, -1 at the end.
inline Eigen::MatrixXd incidence(const Network& net) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(net.node_count()),
                                              static_cast<Eigen::Index>(net.line_count()));
    for (std::size_t k = 0; k < net.line_count(); ++k) {
        c(static_cast<Eigen::Index>(net.from_index(k)), static_cast<Eigen::Index>(k)) = 1.0;
        c(static_cast<Eigen::Index>(net.to_index(k)), static_cast<Eigen::Index>(k)) = -1.0;
    }
    return c;
}

// ---------------------------------------------------------------------------
// On-disk format

namespace detail {

inline void reject_unknown_fields(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                                  const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* name : allowed) known = known || it.key() == name;
        if (!known) throw ParseError(where + ": unknown field \"" + it.key() + "\"");
    }
}

inline double number_field(const nlohmann::json& obj, const char* name, const std::string& where) {
    auto it = obj.find(name);
    if (it == obj.end()) throw ParseError(where + ": missing field \"" + name + "\"");
    if (!it->is_number()) throw ParseError(where + ": field \"" + name + "\" must be a number");
    return it->get<double>();
}

inline int integer_field(const nlohmann::json& obj, const char* name, const std::string& where) {
    auto it = obj.find(name);
    if (it == obj.end()) throw ParseError(where + ": missing field \"" + name + "\"");
    if (!it->is_number_integer()) throw ParseError(where + ": field \"" + name + "\" must be an integer");
    return it->get<int>();
}

}  // namespace detail

/// Builds and validates a network from its JSON document.
inline Network network_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("network document must be a JSON object");
    detail::reject_unknown_fields(doc, {"nodes", "lines"}, "network");
    if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw ParseError("network: \"nodes\" must be an array");
    if (!doc.contains("lines") || !doc["lines"].is_array()) throw ParseError("network: \"lines\" must be an array");

    std::vector<Node> nodes;
    for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
        const auto& item = doc["nodes"][i];
        const auto where = "nodes[" + std::to_string(i) + "]";
        if (!item.is_object()) throw ParseError(where + " must be an object");
        detail::reject_unknown_fields(item, {"id", "power", "inertia", "damping", "noise"}, where);
        nodes.push_back(Node{detail::integer_field(item, "id", where), detail::number_field(item, "power", where),
                             detail::number_field(item, "inertia", where),
                             detail::number_field(item, "damping", where), detail::number_field(item, "noise", where)});
    }

    std::vector<Line> lines;
    for (std::size_t k = 0; k < doc["lines"].size(); ++k) {
        const auto& item = doc["lines"][k];
        const auto where = "lines[" + std::to_string(k) + "]";
        if (!item.is_object()) throw ParseError(where + " must be an object");
        detail::reject_unknown_fields(item, {"from", "to", "capacity"}, where);
        lines.push_back(Line{detail::integer_field(item, "from", where), detail::integer_field(item, "to", where),
                             detail::number_field(item, "capacity", where)});
    }

    return Network::create(std::move(nodes), std::move(lines));
}

inline nlohmann::json network_to_json(const Network& net) {
    nlohmann::json doc;
    doc["nodes"] = nlohmann::json::array();
    for (const auto& node : net.nodes()) {
        doc["nodes"].push_back({{"id", node.id},
                                {"power", node.power},
                                {"inertia", node.inertia},
                                {"damping", node.damping},
                                {"noise", node.noise}});
    }
    doc["lines"] = nlohmann::json::array();
    for (const auto& line : net.lines()) {
        doc["lines"].push_back({{"from", line.from}, {"to", line.to}, {"capacity", line.capacity}});
    }
    return doc;
}

inline Network parse_network(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed network JSON: ") + e.what());
    }
    return network_from_json(doc);
}

inline Network load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open network file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_network(buffer.str());
}

inline void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write network file: " + path);
    out << network_to_json(net).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Rebuilding helpers (each returns a freshly validated network)

inline Network with_nodes(const Network& net, std::vector<Node> nodes) {
    return Network::create(std::move(nodes), net.lines());
}

inline Network with_lines(const Network& net, std::vector<Line> lines) {
    return Network::create(net.nodes(), std::move(lines));
}

}  // namespace crep
