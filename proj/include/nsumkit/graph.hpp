#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "nsumkit/degree_models.hpp"
#include "nsumkit/errors.hpp"
#include "nsumkit/rng.hpp"

namespace nsumkit {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Undirected simple graph in compressed sparse row form; neighbour lists are
// sorted. Immutable once built.
class Topology {
public:
    Topology() = default;

    /// Builds from an edge list. Self-loops and repeated pairs are rejected.
    Topology(std::size_t nodes, std::span<const Edge> edges) : offsets_(nodes + 1, 0) {
        for (const auto& [u, v] : edges) {
            if (u >= nodes || v >= nodes) throw DomainError("edge endpoint out of range");
            if (u == v) throw DomainError("self-loop in edge list");
            ++offsets_[u + 1];
            ++offsets_[v + 1];
        }
        std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
        neighbors_.resize(offsets_.back());
        std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
        for (const auto& [u, v] : edges) {
            neighbors_[fill[u]++] = v;
            neighbors_[fill[v]++] = u;
        }
        for (std::size_t i = 0; i < nodes; ++i) {
            auto first = neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
            auto last = neighbors_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
            std::sort(first, last);
            if (std::adjacent_find(first, last) != last)
                throw DomainError("parallel edge in edge list");
        }
    }

    std::size_t nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t edges() const { return neighbors_.size() / 2; }
    std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }

    std::span<const NodeId> neighbors(NodeId v) const {
        return {neighbors_.data() + offsets_[v], degree(v)};
    }

    bool has_edge(NodeId u, NodeId v) const {
        const auto nb = neighbors(u);
        return std::binary_search(nb.begin(), nb.end(), v);
    }

    double density() const {
        const double m = static_cast<double>(nodes());
        return m < 2 ? 0.0 : static_cast<double>(edges()) / (m * (m - 1.0) / 2.0);
    }

    double mean_degree() const {
        return nodes() ? 2.0 * static_cast<double>(edges()) / static_cast<double>(nodes()) : 0.0;
    }

private:
    std::vector<std::size_t> offsets_;
    std::vector<NodeId> neighbors_;
};

struct Graph {
    std::shared_ptr<const Topology> topology = std::make_shared<Topology>();
    std::vector<std::uint8_t> hidden; // one flag per node

    Graph() = default;
    explicit Graph(Topology t)
        : topology(std::make_shared<const Topology>(std::move(t))), hidden(topology->nodes(), 0) {}

    std::size_t nodes() const { return topology->nodes(); }
    std::size_t hidden_count() const {
        return static_cast<std::size_t>(std::count(hidden.begin(), hidden.end(), 1));
    }
};

/// Exactly `count` of `nodes` flags set, chosen uniformly without replacement.
inline std::vector<std::uint8_t> draw_hidden(std::size_t nodes, std::size_t count, Engine& eng) {
    if (count > nodes) throw DomainError("more hidden nodes than nodes");
    std::vector<std::uint8_t> flags(nodes, 0);
    // Floyd's algorithm: `count` iterations, no auxiliary permutation.
    for (std::size_t j = nodes - count; j < nodes; ++j) {
        const auto t = static_cast<std::size_t>(uniform_index(eng, j + 1));
        if (flags[t]) flags[j] = 1;
        else flags[t] = 1;
    }
    return flags;
}

inline std::size_t hidden_size_for(std::size_t nodes, double q) {
    return static_cast<std::size_t>(std::llround(q * static_cast<double>(nodes)));
}

/// Relabels the graph with round(q * M) hidden nodes; previous labels are discarded.
inline Graph assign_hidden(const Graph& graph, double q, const RngStream& rng) {
    detail::require_domain(q > 0.0 && q <= 1.0, "prevalence q must lie in (0, 1]");
    const std::size_t count = hidden_size_for(graph.nodes(), q);
    if (count == 0) throw DomainError("round(q * M) is zero: no hidden nodes");
    Engine eng = rng.engine();
    Graph out;
    out.topology = graph.topology;
    out.hidden = draw_hidden(graph.nodes(), count, eng);
    return out;
}

/// Degree d_i and hidden-neighbour count d_i^u of every node.
inline DegreeSample degrees(const Topology& topo, std::span<const std::uint8_t> hidden) {
    if (hidden.size() != topo.nodes()) throw DomainError("label vector does not match graph");
    DegreeSample out;
    out.d.resize(topo.nodes());
    out.d_u.resize(topo.nodes());
    for (NodeId v = 0; v < topo.nodes(); ++v) {
        std::int64_t hits = 0;
        for (NodeId w : topo.neighbors(v)) hits += hidden[w];
        out.d[v] = static_cast<std::int64_t>(topo.degree(v));
        out.d_u[v] = hits;
    }
    return out;
}

inline DegreeSample degrees(const Graph& graph) { return degrees(*graph.topology, graph.hidden); }

struct AuditReport {
    bool simple = true;    // no self-loops, no parallel edges
    bool symmetric = true; // v in N(u) iff u in N(v)
    bool handshake = true; // sum of degrees = 2|E|

    bool ok() const { return simple && symmetric && handshake; }
};

inline AuditReport audit(const Topology& topo) {
    AuditReport report;
    std::size_t degree_sum = 0;
    for (NodeId u = 0; u < topo.nodes(); ++u) {
        const auto nb = topo.neighbors(u);
        degree_sum += nb.size();
        for (std::size_t k = 0; k < nb.size(); ++k) {
            if (nb[k] == u) report.simple = false;
            if (k > 0 && nb[k] == nb[k - 1]) report.simple = false;
            if (!topo.has_edge(nb[k], u)) report.symmetric = false;
        }
    }
    report.handshake = degree_sum == 2 * topo.edges();
    return report;
}

/// Debug dump: one "u v" line per edge with u < v, 0-indexed.
inline void write_edge_list(std::ostream& os, const Topology& topo) {
    for (NodeId u = 0; u < topo.nodes(); ++u)
        for (NodeId v : topo.neighbors(u))
            if (u < v) os << u << ' ' << v << '\n';
}

} // namespace nsumkit
