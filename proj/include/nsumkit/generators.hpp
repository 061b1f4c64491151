#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nsumkit/errors.hpp"
#include "nsumkit/graph.hpp"
#include "nsumkit/rng.hpp"

namespace nsumkit {

// ---- model specifications -------------------------------------------------------

struct ErSpec {
    double p = 0.1;
};

// exp(theta_edge * edges + theta_triangle * triangles / triangle_scale),
// sampled by a Metropolis single-dyad toggle chain started from ER(start_p).
// An unset theta_edge is calibrated so the sampled density hits
// target_density. triangle_scale defaults to sqrt(M - 2); 1 gives the raw
// triangle count, which at M = 1000 and density 0.1 is degenerate for
// |theta_triangle| above roughly 0.05.
struct ErgmSpec {
    std::optional<double> theta_edge;
    double theta_triangle = -1.0;
    std::optional<double> triangle_scale;
    std::optional<std::uint64_t> proposals; // default 10 * M^2
    double start_p = 0.1;
    double target_density = 0.1;
};

// Growth with attachment weight degree^power. With core_nodes > 0 the first
// core_nodes nodes form an ER(core_p) subgraph instead of the seed clique.
struct PaSpec {
    double power = 1.4;
    std::optional<std::size_t> m_per_step; // default M / 20
    std::size_t core_nodes = 0;
    double core_p = 0.1;
};

struct SbmSpec {
    std::vector<double> block_fractions;
    std::vector<std::vector<double>> block_matrix;
};

// Ring lattice with `nei` neighbours per side, each lattice edge rewired with p_rewire.
struct SmallWorldSpec {
    std::size_t nei = 50;
    double p_rewire = 0.1;
};

enum class DeviationFamily { PaMixture, Sbm2Block, ErgmPlus, ErgmMinus };

struct DeviationSpec {
    DeviationFamily family = DeviationFamily::Sbm2Block;
    double delta = 0.0;
    double base_p = 0.1;
};

using GraphModelSpec =
    std::variant<ErSpec, ErgmSpec, PaSpec, SbmSpec, SmallWorldSpec, DeviationSpec>;

inline constexpr std::size_t kErgmMaxNodes = 1000;

inline std::string family_name(DeviationFamily f) {
    switch (f) {
    case DeviationFamily::PaMixture: return "PA-mixture";
    case DeviationFamily::Sbm2Block: return "SBM-2block";
    case DeviationFamily::ErgmPlus: return "ERGM-plus";
    case DeviationFamily::ErgmMinus: return "ERGM-minus";
    }
    return "unknown";
}

inline std::optional<DeviationFamily> parse_family(std::string_view name) {
    for (auto f : {DeviationFamily::PaMixture, DeviationFamily::Sbm2Block,
                   DeviationFamily::ErgmPlus, DeviationFamily::ErgmMinus})
        if (family_name(f) == name) return f;
    return std::nullopt;
}

inline std::string model_name(const GraphModelSpec& spec) {
    struct Namer {
        std::string operator()(const ErSpec&) const { return "ER"; }
        std::string operator()(const ErgmSpec&) const { return "ERGM"; }
        std::string operator()(const PaSpec&) const { return "PA"; }
        std::string operator()(const SbmSpec&) const { return "SBM"; }
        std::string operator()(const SmallWorldSpec&) const { return "SmallWorld"; }
        std::string operator()(const DeviationSpec& d) const { return family_name(d.family); }
    };
    return std::visit(Namer{}, spec);
}

inline SbmSpec default_sbm() {
    return {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
            {{0.18, 0.15, 0.10}, {0.15, 0.12, 0.05}, {0.10, 0.05, 0.02}}};
}

/// The five reference models at their default parameters, in ER, ERGM, PA,
/// SBM, small-world order.
inline std::vector<GraphModelSpec> default_models() {
    return {ErSpec{0.1}, ErgmSpec{}, PaSpec{}, default_sbm(), SmallWorldSpec{}};
}

inline bool requires_ergm(const GraphModelSpec& spec) {
    if (std::holds_alternative<ErgmSpec>(spec)) return true;
    if (const auto* d = std::get_if<DeviationSpec>(&spec))
        return d->family == DeviationFamily::ErgmPlus || d->family == DeviationFamily::ErgmMinus;
    return false;
}

// ---- validation -------------------------------------------------------------

namespace detail {

inline void require_prob(double p, const char* what) {
    require_domain(p >= 0.0 && p <= 1.0, std::string(what) + " must lie in [0, 1]");
}

inline std::size_t pa_default_m(std::size_t M) { return std::max<std::size_t>(1, M / 20); }

inline void validate_spec(const GraphModelSpec& spec, std::size_t M) {
    require_domain(M >= 2, "graph needs at least two nodes");
    std::visit(
        [M](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ErSpec>) {
                require_prob(s.p, "edge probability");
            } else if constexpr (std::is_same_v<T, ErgmSpec>) {
                require_prob(s.start_p, "ERGM start density");
                require_domain(s.target_density > 0.0 && s.target_density < 1.0,
                               "ERGM target density must lie in (0, 1)");
                require_domain(std::isfinite(s.theta_triangle), "triangle coefficient must be finite");
                require_domain(!s.triangle_scale || *s.triangle_scale > 0.0,
                               "triangle scale must be positive");
            } else if constexpr (std::is_same_v<T, PaSpec>) {
                require_domain(s.power > 0.0, "attachment power must be positive");
                const std::size_t m = s.m_per_step.value_or(pa_default_m(M));
                require_domain(m >= 1 && m < M, "edges per step must lie in [1, M)");
                require_domain(s.core_nodes <= M, "ER core larger than graph");
                require_prob(s.core_p, "core edge probability");
            } else if constexpr (std::is_same_v<T, SbmSpec>) {
                const std::size_t k = s.block_fractions.size();
                require_domain(k >= 1 && s.block_matrix.size() == k, "block matrix shape mismatch");
                double total = 0.0;
                for (double f : s.block_fractions) {
                    require_domain(f >= 0.0, "block fractions must be non-negative");
                    total += f;
                }
                require_domain(std::fabs(total - 1.0) < 1e-9, "block fractions must sum to 1");
                for (std::size_t a = 0; a < k; ++a) {
                    require_domain(s.block_matrix[a].size() == k, "block matrix must be square");
                    for (std::size_t b = 0; b < k; ++b) {
                        require_prob(s.block_matrix[a][b], "block probability");
                        require_domain(s.block_matrix[a][b] == s.block_matrix[b][a],
                                       "block matrix must be symmetric");
                    }
                }
            } else if constexpr (std::is_same_v<T, SmallWorldSpec>) {
                require_domain(s.nei >= 1 && 2 * s.nei < M, "lattice needs 1 <= nei < M / 2");
                require_prob(s.p_rewire, "rewiring probability");
            } else {
                require_domain(s.delta >= 0.0 && s.delta <= 1.0, "delta must lie in [0, 1]");
                require_domain(s.base_p > 0.0 && s.base_p <= 0.5, "base_p must lie in (0, 0.5]");
            }
        },
        spec);
}

// ---- ER and SBM via geometric skipping (Batagelj & Brandes) -------------------

inline void er_edges(NodeId offset, std::size_t n, double p, Engine& eng, std::vector<Edge>& out) {
    if (n < 2 || p <= 0.0) return;
    if (p >= 1.0) {
        for (std::size_t v = 1; v < n; ++v)
            for (std::size_t w = 0; w < v; ++w)
                out.emplace_back(offset + static_cast<NodeId>(w), offset + static_cast<NodeId>(v));
        return;
    }
    const double lp = std::log1p(-p);
    std::int64_t v = 1;
    std::int64_t w = -1;
    const auto nn = static_cast<std::int64_t>(n);
    while (v < nn) {
        const std::int64_t skip = geometric_skip(eng, lp);
        if (skip > nn * nn) break;
        w += 1 + skip;
        while (w >= v && v < nn) {
            w -= v;
            ++v;
        }
        if (v < nn)
            out.emplace_back(offset + static_cast<NodeId>(w), offset + static_cast<NodeId>(v));
    }
}

inline void bipartite_edges(NodeId a, std::size_t na, NodeId b, std::size_t nb, double p,
                            Engine& eng, std::vector<Edge>& out) {
    if (na == 0 || nb == 0 || p <= 0.0) return;
    const auto total = static_cast<std::int64_t>(na * nb);
    if (p >= 1.0) {
        for (std::int64_t k = 0; k < total; ++k)
            out.emplace_back(a + static_cast<NodeId>(k / static_cast<std::int64_t>(nb)),
                             b + static_cast<NodeId>(k % static_cast<std::int64_t>(nb)));
        return;
    }
    const double lp = std::log1p(-p);
    std::int64_t k = -1;
    for (;;) {
        const std::int64_t skip = geometric_skip(eng, lp);
        if (skip >= total) break;
        k += 1 + skip;
        if (k >= total) break;
        out.emplace_back(a + static_cast<NodeId>(k / static_cast<std::int64_t>(nb)),
                         b + static_cast<NodeId>(k % static_cast<std::int64_t>(nb)));
    }
}

/// Block sizes by largest remainder, so they sum to M exactly.
inline std::vector<std::size_t> block_sizes(const std::vector<double>& fractions, std::size_t M) {
    std::vector<std::size_t> sizes(fractions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const double exact = fractions[i] * static_cast<double>(M);
        sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        assigned += sizes[i];
        remainders.emplace_back(-(exact - static_cast<double>(sizes[i])), i);
    }
    std::stable_sort(remainders.begin(), remainders.end());
    for (std::size_t k = 0; assigned < M; ++k, ++assigned) ++sizes[remainders[k % sizes.size()].second];
    return sizes;
}

inline Topology generate_sbm(const SbmSpec& s, std::size_t M, Engine& eng) {
    const auto sizes = block_sizes(s.block_fractions, M);
    std::vector<NodeId> start(sizes.size(), 0);
    for (std::size_t i = 1; i < sizes.size(); ++i)
        start[i] = start[i - 1] + static_cast<NodeId>(sizes[i - 1]);
    std::vector<Edge> edges;
    for (std::size_t a = 0; a < sizes.size(); ++a) {
        er_edges(start[a], sizes[a], s.block_matrix[a][a], eng, edges);
        for (std::size_t b = a + 1; b < sizes.size(); ++b)
            bipartite_edges(start[a], sizes[a], start[b], sizes[b], s.block_matrix[a][b], eng,
                            edges);
    }
    return Topology(M, edges);
}

// ---- preferential attachment ------------------------------------------------------

// Fenwick tree over non-negative weights with prefix search.
class FenwickSampler {
public:
    explicit FenwickSampler(std::size_t n) : tree_(n + 1, 0.0), top_(std::bit_floor(n ? n : 1)) {}

    void add(std::size_t i, double delta) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
    }

    double total() const {
        double s = 0.0;
        for (std::size_t i = tree_.size() - 1; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    std::size_t find(double target) const {
        std::size_t pos = 0;
        for (std::size_t step = top_; step > 0; step >>= 1) {
            const std::size_t next = pos + step;
            if (next < tree_.size() && tree_[next] <= target) {
                pos = next;
                target -= tree_[next];
            }
        }
        return pos; // 0-based index of the element
    }

private:
    std::vector<double> tree_;
    std::size_t top_;
};

inline Topology generate_pa(const PaSpec& s, std::size_t M, Engine& eng) {
    const std::size_t m = s.m_per_step.value_or(pa_default_m(M));
    std::vector<Edge> edges;
    std::vector<std::size_t> deg(M, 0);
    std::size_t start;
    if (s.core_nodes > 0 && s.core_nodes >= m) {
        er_edges(0, s.core_nodes, s.core_p, eng, edges);
        start = s.core_nodes;
    } else {
        start = std::min(M, std::max<std::size_t>(m, 2));
        for (std::size_t v = 1; v < start; ++v)
            for (std::size_t w = 0; w < v; ++w)
                edges.emplace_back(static_cast<NodeId>(w), static_cast<NodeId>(v));
    }
    for (const auto& [u, v] : edges) {
        ++deg[u];
        ++deg[v];
    }

    std::vector<double> weight_of(M + 1);
    for (std::size_t d = 0; d <= M; ++d) weight_of[d] = std::pow(static_cast<double>(d), s.power);

    FenwickSampler tree(M);
    for (std::size_t v = 0; v < start; ++v) tree.add(v, weight_of[deg[v]]);

    std::vector<NodeId> picks;
    std::vector<std::uint8_t> picked(M, 0);
    for (std::size_t v = start; v < M; ++v) {
        const std::size_t k = std::min(m, v);
        picks.clear();
        for (std::size_t r = 0; r < k; ++r) {
            std::size_t t = M;
            for (int attempt = 0; attempt < 8 && t == M; ++attempt) {
                const double total = tree.total();
                if (!(total > 1e-9)) break;
                t = tree.find(uniform01(eng) * total);
                if (t >= v || picked[t] || deg[t] == 0) t = M; // rounding residue
            }
            if (t == M) {
                // No attachment weight left: uniform over remaining earlier nodes.
                std::vector<NodeId> rest;
                for (std::size_t w = 0; w < v; ++w)
                    if (!picked[w]) rest.push_back(static_cast<NodeId>(w));
                t = rest[uniform_index(eng, rest.size())];
            }
            picked[t] = 1;
            picks.push_back(static_cast<NodeId>(t));
            tree.add(t, -weight_of[deg[t]]);
        }
        for (NodeId t : picks) {
            picked[t] = 0;
            edges.emplace_back(t, static_cast<NodeId>(v));
            ++deg[t];
            tree.add(t, weight_of[deg[t]]);
        }
        deg[v] = k;
        tree.add(v, weight_of[k]);
    }
    return Topology(M, edges);
}

// ---- small world -----------------------------------------------------------------------

inline Topology generate_small_world(const SmallWorldSpec& s, std::size_t M, Engine& eng) {
    std::vector<std::vector<NodeId>> adj(M);
    for (std::size_t u = 0; u < M; ++u)
        for (std::size_t k = 1; k <= s.nei; ++k) {
            const auto w = static_cast<NodeId>((u + k) % M);
            adj[u].push_back(w);
            adj[w].push_back(static_cast<NodeId>(u));
        }
    auto linked = [&](NodeId a, NodeId b) {
        return std::find(adj[a].begin(), adj[a].end(), b) != adj[a].end();
    };
    auto unlink = [&](NodeId a, NodeId b) {
        adj[a].erase(std::find(adj[a].begin(), adj[a].end(), b));
        adj[b].erase(std::find(adj[b].begin(), adj[b].end(), a));
    };
    // Watts-Strogatz order: lattice distance outer, node inner.
    for (std::size_t k = 1; k <= s.nei; ++k)
        for (std::size_t u = 0; u < M; ++u) {
            const auto a = static_cast<NodeId>(u);
            const auto b = static_cast<NodeId>((u + k) % M);
            if (uniform01(eng) >= s.p_rewire) continue;
            if (!linked(a, b) || adj[a].size() >= M - 1) continue;
            NodeId c;
            do {
                c = static_cast<NodeId>(uniform_index(eng, M));
            } while (c == a || linked(a, c));
            unlink(a, b);
            adj[a].push_back(c);
            adj[c].push_back(a);
        }
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < M; ++u)
        for (NodeId w : adj[u])
            if (u < w) edges.emplace_back(static_cast<NodeId>(u), w);
    return Topology(M, edges);
}

} // namespace detail

// ---- ERGM ---------------------------------------------------------------------------------

// Dense bit-matrix state for the toggle chain; common-neighbour counts
// (the triangle change statistic) are popcounts of row intersections.
class ErgmChain {
public:
    ErgmChain(std::size_t M, double theta_edge, double theta_triangle, double triangle_scale = 1.0)
        : M_(M), words_((M + 63) / 64), bits_(M * words_, 0), add_(M), remove_(M) {
        for (std::size_t c = 0; c < M; ++c) {
            const double change =
                theta_edge + theta_triangle * static_cast<double>(c) / triangle_scale;
            add_[c] = change >= 0.0 ? 1.0 : std::exp(change);
            remove_[c] = change <= 0.0 ? 1.0 : std::exp(-change);
        }
    }

    void seed_er(double p, Engine& eng) {
        std::vector<Edge> edges;
        detail::er_edges(0, M_, p, eng, edges);
        for (const auto& [u, v] : edges) set(u, v, true);
        edges_ = edges.size();
    }

    void run(std::uint64_t proposals, Engine& eng) {
        for (std::uint64_t k = 0; k < proposals; ++k) {
            const auto i = static_cast<NodeId>(uniform_index(eng, M_));
            auto j = static_cast<NodeId>(uniform_index(eng, M_ - 1));
            if (j >= i) ++j;
            const std::size_t c = common_neighbors(i, j);
            const bool present = test(i, j);
            const double accept = present ? remove_[c] : add_[c];
            if (accept < 1.0 && uniform01(eng) >= accept) continue;
            set(i, j, !present);
            edges_ += present ? -1 : 1;
        }
    }

    std::size_t edges() const { return static_cast<std::size_t>(edges_); }
    double density() const {
        return static_cast<double>(edges_) / (static_cast<double>(M_) * (M_ - 1) / 2.0);
    }

    Topology topology() const {
        std::vector<Edge> edges;
        edges.reserve(static_cast<std::size_t>(edges_));
        for (NodeId u = 0; u < M_; ++u)
            for (NodeId v = u + 1; v < M_; ++v)
                if (test(u, v)) edges.emplace_back(u, v);
        return Topology(M_, edges);
    }

private:
    bool test(NodeId u, NodeId v) const { return (bits_[u * words_ + v / 64] >> (v % 64)) & 1u; }

    void set(NodeId u, NodeId v, bool on) {
        const std::uint64_t mu = std::uint64_t{1} << (v % 64);
        const std::uint64_t mv = std::uint64_t{1} << (u % 64);
        if (on) {
            bits_[u * words_ + v / 64] |= mu;
            bits_[v * words_ + u / 64] |= mv;
        } else {
            bits_[u * words_ + v / 64] &= ~mu;
            bits_[v * words_ + u / 64] &= ~mv;
        }
    }

    std::size_t common_neighbors(NodeId u, NodeId v) const {
        const std::uint64_t* a = &bits_[u * words_];
        const std::uint64_t* b = &bits_[v * words_];
        std::size_t c = 0;
        for (std::size_t w = 0; w < words_; ++w) c += static_cast<std::size_t>(std::popcount(a[w] & b[w]));
        return c;
    }

    std::size_t M_;
    std::size_t words_;
    std::vector<std::uint64_t> bits_;
    std::vector<double> add_;
    std::vector<double> remove_;
    std::int64_t edges_ = 0;
};

inline std::uint64_t ergm_default_proposals(std::size_t M) {
    return 10ull * static_cast<std::uint64_t>(M) * static_cast<std::uint64_t>(M);
}

inline double ergm_default_triangle_scale(std::size_t M) {
    return std::sqrt(static_cast<double>(M > 2 ? M - 2 : 1));
}

inline Topology sample_ergm(std::size_t M, double theta_edge, double theta_triangle,
                            double triangle_scale, std::uint64_t proposals, double start_p,
                            Engine& eng) {
    if (M > kErgmMaxNodes)
        throw InfeasibleError("ERGM sampling is limited to M <= 1000 nodes");
    ErgmChain chain(M, theta_edge, theta_triangle, triangle_scale);
    chain.seed_er(start_p, eng);
    chain.run(proposals, eng);
    return chain.topology();
}

struct ErgmCalibration {
    double theta_edge = 0.0;
    double density = 0.0;  // mean pilot density at theta_edge
    bool converged = false; // |density - target| <= tolerance
    int evaluations = 0;
};

/// Finds theta_edge by bisection on the mean density of `pilots` chains.
/// Pilot chains reuse the same substreams at every step, so the objective is
/// a deterministic function of theta_edge.
inline ErgmCalibration calibrate_ergm_edge(const ErgmSpec& spec, std::size_t M,
                                           const RngStream& rng, double tolerance = 0.01,
                                           int pilots = 2) {
    if (M > kErgmMaxNodes)
        throw InfeasibleError("ERGM sampling is limited to M <= 1000 nodes");
    const double target = spec.target_density;
    const double logit = std::log(target / (1.0 - target));
    if (spec.theta_triangle == 0.0) return {logit, target, true, 0};

    const std::uint64_t proposals = spec.proposals.value_or(ergm_default_proposals(M));
    const double scale = spec.triangle_scale.value_or(ergm_default_triangle_scale(M));
    ErgmCalibration result;
    auto mean_density = [&](double theta_edge) {
        ++result.evaluations;
        double sum = 0.0;
        for (int k = 0; k < pilots; ++k) {
            Engine eng = rng.child("pilot").child(static_cast<std::uint64_t>(k)).engine();
            ErgmChain chain(M, theta_edge, spec.theta_triangle, scale);
            chain.seed_er(spec.start_p, eng);
            chain.run(proposals, eng);
            sum += chain.density();
        }
        return sum / pilots;
    };

    // Mean-field fixed point: logit(p) = theta_e + theta_t (M - 2) p^2 / scale.
    const double guess =
        logit - spec.theta_triangle * static_cast<double>(M - 2) * target * target / scale;
    double lo = guess - 0.5;
    double hi = guess + 0.5;
    double f_lo = mean_density(lo);
    for (int k = 0; k < 8 && f_lo > target; ++k) f_lo = mean_density(lo -= 1.0);
    double f_hi = mean_density(hi);
    for (int k = 0; k < 8 && f_hi < target; ++k) f_hi = mean_density(hi += 1.0);

    double best = std::fabs(f_lo - target) < std::fabs(f_hi - target) ? lo : hi;
    double best_f = best == lo ? f_lo : f_hi;
    for (int it = 0; it < 24 && std::fabs(best_f - target) > tolerance / 5.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = mean_density(mid);
        if (std::fabs(f - target) < std::fabs(best_f - target)) {
            best = mid;
            best_f = f;
        }
        (f < target ? lo : hi) = mid;
        if (hi - lo < 1e-6) break;
    }
    result.theta_edge = best;
    result.density = best_f;
    result.converged = std::fabs(best_f - target) <= tolerance;
    return result;
}

// ---- deviation families ------------------------------------------------------------------

/// Concrete model for a deviation family at `delta`. Every family reduces to
/// ER(base_p) in distribution at delta = 0.
inline GraphModelSpec deviation_spec(DeviationFamily family, double delta, std::size_t M,
                                     double base_p = 0.1) {
    detail::require_domain(delta >= 0.0 && delta <= 1.0, "delta must lie in [0, 1]");
    detail::require_domain(base_p > 0.0 && base_p <= 0.5, "base_p must lie in (0, 0.5]");
    switch (family) {
    case DeviationFamily::PaMixture: {
        PaSpec pa;
        pa.core_nodes = static_cast<std::size_t>(
            std::floor(static_cast<double>(M) * (1.0 - delta) + 1e-9));
        pa.core_p = base_p;
        pa.m_per_step = detail::pa_default_m(M);
        return pa;
    }
    case DeviationFamily::Sbm2Block: {
        const double on = base_p * (1.0 + delta);
        const double off = base_p * (1.0 - delta);
        return SbmSpec{{0.5, 0.5}, {{on, off}, {off, on}}};
    }
    case DeviationFamily::ErgmPlus:
    case DeviationFamily::ErgmMinus: {
        ErgmSpec e;
        e.theta_triangle = family == DeviationFamily::ErgmPlus ? delta : -delta;
        e.target_density = base_p;
        e.start_p = base_p;
        return e;
    }
    }
    throw DomainError("unknown deviation family");
}

struct ResolvedModel {
    GraphModelSpec spec;                   // concrete, no unset parameters
    std::optional<ErgmCalibration> calibration;
};

/// Expands deviation specs and fills defaults that depend on M. ERGM specs
/// without theta_edge are calibrated here, once, rather than per graph.
inline ResolvedModel resolve_model(const GraphModelSpec& spec, std::size_t M, const RngStream& rng) {
    detail::validate_spec(spec, M);
    ResolvedModel out{spec, std::nullopt};
    if (const auto* d = std::get_if<DeviationSpec>(&spec))
        out.spec = deviation_spec(d->family, d->delta, M, d->base_p);
    if (auto* pa = std::get_if<PaSpec>(&out.spec)) {
        if (!pa->m_per_step) pa->m_per_step = detail::pa_default_m(M);
    } else if (auto* e = std::get_if<ErgmSpec>(&out.spec)) {
        if (M > kErgmMaxNodes)
            throw InfeasibleError("ERGM sampling is limited to M <= 1000 nodes");
        if (!e->proposals) e->proposals = ergm_default_proposals(M);
        if (!e->triangle_scale) e->triangle_scale = ergm_default_triangle_scale(M);
        if (!e->theta_edge) {
            out.calibration = calibrate_ergm_edge(*e, M, rng.child("calibrate"));
            e->theta_edge = out.calibration->theta_edge;
        }
    }
    detail::validate_spec(out.spec, M);
    return out;
}

/// Draws the topology of a resolved (concrete) model.
inline Topology generate_topology(const GraphModelSpec& concrete, std::size_t M, Engine& eng) {
    return std::visit(
        [&](const auto& s) -> Topology {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ErSpec>) {
                std::vector<Edge> edges;
                detail::er_edges(0, M, s.p, eng, edges);
                return Topology(M, edges);
            } else if constexpr (std::is_same_v<T, ErgmSpec>) {
                if (!s.theta_edge) throw UsageError("ERGM spec must be resolved before sampling");
                return sample_ergm(M, *s.theta_edge, s.theta_triangle,
                                   s.triangle_scale.value_or(ergm_default_triangle_scale(M)),
                                   s.proposals.value_or(ergm_default_proposals(M)), s.start_p,
                                   eng);
            } else if constexpr (std::is_same_v<T, PaSpec>) {
                return detail::generate_pa(s, M, eng);
            } else if constexpr (std::is_same_v<T, SbmSpec>) {
                return detail::generate_sbm(s, M, eng);
            } else if constexpr (std::is_same_v<T, SmallWorldSpec>) {
                return detail::generate_small_world(s, M, eng);
            } else {
                throw UsageError("deviation spec must be resolved before sampling");
            }
        },
        concrete);
}

/// One graph from `spec` on M nodes, all nodes unlabelled.
inline Graph generate(const GraphModelSpec& spec, std::size_t M, const RngStream& rng) {
    const ResolvedModel resolved = resolve_model(spec, M, rng);
    Engine eng = rng.child("graph").engine();
    return Graph(generate_topology(resolved.spec, M, eng));
}

} // namespace nsumkit
