#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "nsumkit/degree_models.hpp"
#include "nsumkit/design.hpp"
#include "nsumkit/estimator.hpp"
#include "nsumkit/generators.hpp"
#include "nsumkit/graph.hpp"
#include "nsumkit/rng.hpp"
#include "nsumkit/stats.hpp"

namespace nsumkit {

enum class RespondentPool {
    All,       // sample from V, hidden members included
    NonHidden, // sample from V \ U
};

enum class IntervalMethod {
    PlugIn,        // variance from n_hat and p_hat = mean(d) / M
    TrueParameter, // variance from the true N and realised mean degree
};

struct SimOptions {
    double epsilon = 0.1;
    std::size_t replicates = 500;
    RespondentPool pool = RespondentPool::All;
    IntervalMethod interval = IntervalMethod::PlugIn;
    ZConvention z_convention = ZConvention::ExactQuantile;
    double design_effect = 1.0;
    std::size_t threads = 0; // 0: hardware concurrency
    // Draw graphs from a stream keyed by (M, replicate) only, so different
    // models consume the same random numbers (paired comparisons).
    bool shared_graph_stream = false;
};

struct SimResult {
    std::string model;
    std::optional<double> delta;
    std::size_t M = 0;
    double q = 0.0;
    double alpha = 0.0;
    double epsilon = 0.0;

    std::size_t n_used = 0; // rounded mean of per-replicate sample sizes
    double mean_rel_err = std::numeric_limits<double>::quiet_NaN();
    double sd_rel_err = std::numeric_limits<double>::quiet_NaN();
    double coverage = std::numeric_limits<double>::quiet_NaN();
    std::size_t replicates_run = 0; // non-degenerate replicates
    std::size_t degenerate = 0;
    bool infeasible = false;
    bool truncated = false; // some replicate had n clamped at the pool size
    double mean_density = std::numeric_limits<double>::quiet_NaN();
    std::optional<ErgmCalibration> calibration;

    // Raw accumulators; `merge` pools two runs over disjoint replicate blocks.
    RunningStats rel_err_stats;
    RunningStats cover_stats;
    RunningStats n_stats;
    RunningStats density_stats;

    double rel_err_sem() const { return rel_err_stats.sem(); }

    void finalize() {
        replicates_run = rel_err_stats.count();
        if (replicates_run == 0) return;
        mean_rel_err = rel_err_stats.mean();
        sd_rel_err = rel_err_stats.sd();
        coverage = cover_stats.mean();
        n_used = static_cast<std::size_t>(std::llround(n_stats.mean()));
        if (density_stats.count()) mean_density = density_stats.mean();
    }

    void merge(const SimResult& other) {
        rel_err_stats.merge(other.rel_err_stats);
        cover_stats.merge(other.cover_stats);
        n_stats.merge(other.n_stats);
        density_stats.merge(other.density_stats);
        degenerate += other.degenerate;
        truncated = truncated || other.truncated;
        finalize();
    }
};

// ---- parallel execution ------------------------------------------------------------

inline std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index
/// writes its own slot, so results do not depend on scheduling.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
    threads = std::min(resolve_threads(threads), count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i; !failed && (i = next.fetch_add(1)) < count;) {
                try {
                    body(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// ---- stream addressing ---------------------------------------------------------------------

namespace detail {

inline std::string fmt_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Canonical text of a model spec; its hash addresses the model's graph streams.
inline std::string model_descriptor(const GraphModelSpec& spec) {
    struct Describe {
        std::string opt(const std::optional<double>& v) const { return v ? fmt_real(*v) : "auto"; }
        std::string operator()(const ErSpec& s) const { return "ER(p=" + fmt_real(s.p) + ")"; }
        std::string operator()(const ErgmSpec& s) const {
            return "ERGM(te=" + opt(s.theta_edge) + ",tt=" + fmt_real(s.theta_triangle) +
                   ",scale=" + opt(s.triangle_scale) + ",proposals=" +
                   (s.proposals ? std::to_string(*s.proposals) : "auto") +
                   ",start=" + fmt_real(s.start_p) + ",target=" + fmt_real(s.target_density) + ")";
        }
        std::string operator()(const PaSpec& s) const {
            return "PA(power=" + fmt_real(s.power) + ",m=" +
                   (s.m_per_step ? std::to_string(*s.m_per_step) : "auto") +
                   ",core=" + std::to_string(s.core_nodes) + ",core_p=" + fmt_real(s.core_p) + ")";
        }
        std::string operator()(const SbmSpec& s) const {
            std::string out = "SBM(f=";
            for (double f : s.block_fractions) out += fmt_real(f) + ";";
            out += ",B=";
            for (const auto& row : s.block_matrix)
                for (double b : row) out += fmt_real(b) + ";";
            return out + ")";
        }
        std::string operator()(const SmallWorldSpec& s) const {
            return "SW(nei=" + std::to_string(s.nei) + ",p=" + fmt_real(s.p_rewire) + ")";
        }
        std::string operator()(const DeviationSpec& s) const {
            return family_name(s.family) + "(delta=" + fmt_real(s.delta) +
                   ",p=" + fmt_real(s.base_p) + ")";
        }
    };
    return std::visit(Describe{}, spec);
}

inline RngStream model_stream(const RngStream& root, const GraphModelSpec& spec, std::size_t M) {
    return root.child("model").child(model_descriptor(spec)).child(static_cast<std::uint64_t>(M));
}

// Labels and respondent orders are keyed by (M, q, replicate) only, so every
// model and alpha level sees the same hidden set and the same respondent
// order (common random numbers).
inline RngStream label_stream(const RngStream& root, std::size_t M, double q, std::size_t rep) {
    return root.child("labels").child(static_cast<std::uint64_t>(M))
        .child(std::bit_cast<std::uint64_t>(q)).child(static_cast<std::uint64_t>(rep));
}

inline RngStream respondent_stream(const RngStream& root, std::size_t M, double q,
                                   std::size_t rep) {
    return root.child("respondents").child(static_cast<std::uint64_t>(M))
        .child(std::bit_cast<std::uint64_t>(q)).child(static_cast<std::uint64_t>(rep));
}

struct Outcome {
    double rel_err = 0.0;
    bool covered = false;
    std::int64_t n = 0;
    bool degenerate = false;
    bool truncated = false;
};

/// One survey on a labelled graph for each alpha level.
inline void survey_alphas(const Topology& topo, std::span<const std::uint8_t> hidden,
                          std::size_t N, double q, std::span<const double> alphas,
                          const SimOptions& opt, const RngStream& respondents,
                          std::span<Outcome> out) {
    const std::size_t M = topo.nodes();
    const DegreeSample deg = degrees(topo, hidden);
    double sum_all = 0.0;
    for (auto d : deg.d) sum_all += static_cast<double>(d);
    const double d_bar = sum_all / static_cast<double>(M);

    std::vector<NodeId> pool;
    pool.reserve(M);
    for (NodeId v = 0; v < M; ++v)
        if (opt.pool == RespondentPool::All || !hidden[v]) pool.push_back(v);

    std::vector<std::int64_t> n_alpha(alphas.size(), 0);
    std::int64_t n_max = 0;
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        Outcome& o = out[a];
        o = Outcome{};
        if (d_bar <= 0.0 || pool.empty()) {
            o.degenerate = true;
            continue;
        }
        StudyDesign design{opt.epsilon, alphas[a], opt.design_effect, opt.z_convention};
        const SampleSize ss =
            min_sample_size_detail(design, {static_cast<std::int64_t>(M), q, d_bar});
        std::int64_t n = ss.n;
        o.truncated = ss.truncated;
        if (n > static_cast<std::int64_t>(pool.size())) {
            n = static_cast<std::int64_t>(pool.size());
            o.truncated = true;
        }
        n_alpha[a] = n;
        n_max = std::max(n_max, n);
    }
    if (n_max == 0) return;

    // Partial Fisher-Yates: the first n_max entries are a uniform ordered sample.
    Engine eng = respondents.engine();
    for (std::int64_t i = 0; i < n_max; ++i) {
        const auto j = static_cast<std::size_t>(i) +
                       static_cast<std::size_t>(uniform_index(eng, pool.size() - static_cast<std::size_t>(i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    std::vector<std::int64_t> pre_d(static_cast<std::size_t>(n_max) + 1, 0);
    std::vector<std::int64_t> pre_du(static_cast<std::size_t>(n_max) + 1, 0);
    for (std::int64_t i = 0; i < n_max; ++i) {
        const NodeId v = pool[static_cast<std::size_t>(i)];
        pre_d[static_cast<std::size_t>(i) + 1] = pre_d[static_cast<std::size_t>(i)] + deg.d[v];
        pre_du[static_cast<std::size_t>(i) + 1] = pre_du[static_cast<std::size_t>(i)] + deg.d_u[v];
    }

    const double Md = static_cast<double>(M);
    const double Nd = static_cast<double>(N);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        Outcome& o = out[a];
        if (o.degenerate) continue;
        const auto n = static_cast<std::size_t>(n_alpha[a]);
        o.n = n_alpha[a];
        const double sd = static_cast<double>(pre_d[n]);
        const double sdu = static_cast<double>(pre_du[n]);
        if (sd <= 0.0) {
            o.degenerate = true;
            continue;
        }
        const double n_hat = std::clamp(Md * sdu / sd, 0.0, Md);
        double variance;
        if (opt.interval == IntervalMethod::PlugIn) {
            const double p_hat = sd / static_cast<double>(n) / Md;
            variance = (n_hat / static_cast<double>(n)) * (1.0 - p_hat) / p_hat;
        } else {
            const double p = d_bar / Md;
            variance = (Nd / static_cast<double>(n)) * (1.0 - p) / p;
        }
        const Interval ci = normal_interval(n_hat, variance, static_cast<std::int64_t>(M), alphas[a]);
        o.rel_err = std::fabs(n_hat - Nd) / Nd;
        o.covered = ci.contains(Nd);
    }
}

} // namespace detail

/// One (model, M) block over a q x alpha grid, replicates
/// [first_replicate, first_replicate + opt.replicates). Each replicate draws
/// one graph and reuses it across the grid. Results are q-major, alpha-minor.
inline std::vector<SimResult> simulate_block(const GraphModelSpec& model, std::size_t M,
                                             std::span<const double> q_grid,
                                             std::span<const double> alpha_grid,
                                             const SimOptions& opt, const RngStream& root,
                                             std::size_t first_replicate = 0) {
    detail::require_domain(!q_grid.empty() && !alpha_grid.empty(), "grids must be non-empty");
    detail::require_domain(opt.epsilon > 0.0, "epsilon must be positive");
    detail::require_domain(opt.replicates >= 1, "replicates must be at least 1");
    for (double q : q_grid) {
        detail::require_domain(q > 0.0 && q <= 1.0, "prevalence must lie in (0, 1]");
        detail::require_domain(hidden_size_for(M, q) >= 1, "round(q * M) is zero");
    }
    for (double a : alpha_grid) detail::require_domain(a > 0.0 && a < 1.0, "alpha must lie in (0, 1)");

    std::vector<SimResult> results;
    const std::string name = model_name(model);
    std::optional<double> delta;
    if (const auto* d = std::get_if<DeviationSpec>(&model)) delta = d->delta;
    for (double q : q_grid)
        for (double a : alpha_grid) {
            SimResult r;
            r.model = name;
            r.delta = delta;
            r.M = M;
            r.q = q;
            r.alpha = a;
            r.epsilon = opt.epsilon;
            results.push_back(std::move(r));
        }

    if (requires_ergm(model) && M > kErgmMaxNodes) {
        for (auto& r : results) r.infeasible = true;
        return results;
    }

    const RngStream mstream = detail::model_stream(root, model, M);
    const ResolvedModel resolved = resolve_model(model, M, mstream);

    const std::size_t cells = results.size();
    const std::size_t reps = opt.replicates;
    std::vector<detail::Outcome> outcomes(cells * reps);
    std::vector<double> densities(reps);

    parallel_for(reps, opt.threads, [&](std::size_t k) {
        const std::size_t rep = first_replicate + k;
        const RngStream gbase = opt.shared_graph_stream
                                    ? root.child("graph").child(static_cast<std::uint64_t>(M))
                                    : mstream.child("graph");
        Engine geng = gbase.child(static_cast<std::uint64_t>(rep)).engine();
        const Topology topo = generate_topology(resolved.spec, M, geng);
        densities[k] = topo.density();
        for (std::size_t qi = 0; qi < q_grid.size(); ++qi) {
            const double q = q_grid[qi];
            const std::size_t N = hidden_size_for(M, q);
            Engine leng = detail::label_stream(root, M, q, rep).engine();
            const auto hidden = draw_hidden(M, N, leng);
            std::vector<detail::Outcome> row(alpha_grid.size());
            detail::survey_alphas(topo, hidden, N, q, alpha_grid, opt,
                                  detail::respondent_stream(root, M, q, rep), row);
            for (std::size_t ai = 0; ai < alpha_grid.size(); ++ai)
                outcomes[(qi * alpha_grid.size() + ai) * reps + k] = row[ai];
        }
    });

    // Fixed reduction order: replicate index ascending.
    for (std::size_t c = 0; c < cells; ++c) {
        SimResult& r = results[c];
        r.calibration = resolved.calibration;
        for (std::size_t k = 0; k < reps; ++k) {
            const auto& o = outcomes[c * reps + k];
            r.density_stats.add(densities[k]);
            if (o.degenerate) {
                ++r.degenerate;
                continue;
            }
            r.rel_err_stats.add(o.rel_err);
            r.cover_stats.add(o.covered ? 1.0 : 0.0);
            r.n_stats.add(static_cast<double>(o.n));
            r.truncated = r.truncated || o.truncated;
        }
        r.finalize();
    }
    return results;
}

inline SimResult simulate_cell(std::size_t M, double q, double alpha, const GraphModelSpec& model,
                               const SimOptions& opt, const RngStream& root,
                               std::size_t first_replicate = 0) {
    const double qs[] = {q};
    const double as[] = {alpha};
    return simulate_block(model, M, qs, as, opt, root, first_replicate).front();
}

// ---- factorial design --------------------------------------------------------------------

struct SimConfig {
    std::vector<std::size_t> M_grid;
    std::vector<double> q_grid;
    std::vector<double> alpha_grid;
    std::vector<GraphModelSpec> models;
    SimOptions options;
    std::uint64_t seed = 0;

    void validate() const {
        detail::require_domain(!M_grid.empty() && !q_grid.empty() && !alpha_grid.empty() &&
                                   !models.empty(),
                               "all grids must be non-empty");
        detail::require_domain(options.replicates >= 1, "replicates must be at least 1");
    }
};

/// q grid .01, .03, ..., .51 (upper end inclusive).
inline std::vector<double> default_q_grid() {
    std::vector<double> q;
    for (int k = 1; k <= 51; k += 2) q.push_back(k / 100.0);
    return q;
}

/// One result per (model, M, q, alpha), in that nesting order with models in
/// config order and the numeric grids ascending.
inline std::vector<SimResult> run_factorial(const SimConfig& config) {
    config.validate();
    auto Ms = config.M_grid;
    auto qs = config.q_grid;
    auto as = config.alpha_grid;
    std::sort(Ms.begin(), Ms.end());
    std::sort(qs.begin(), qs.end());
    std::sort(as.begin(), as.end());
    const RngStream root(config.seed);
    std::vector<SimResult> out;
    for (const auto& model : config.models)
        for (std::size_t M : Ms) {
            auto block = simulate_block(model, M, qs, as, config.options, root);
            out.insert(out.end(), std::make_move_iterator(block.begin()),
                       std::make_move_iterator(block.end()));
        }
    return out;
}

// ---- deviation sweep -------------------------------------------------------------------------

struct SweepConfig {
    std::vector<DeviationFamily> families{DeviationFamily::PaMixture, DeviationFamily::Sbm2Block,
                                          DeviationFamily::ErgmPlus, DeviationFamily::ErgmMinus};
    std::vector<double> delta_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::size_t M = 1000;
    double q = 0.1;
    double alpha = 0.05;
    double base_p = 0.1;
    bool er_baseline = true; // prepend a pure ER(base_p) row
    SimOptions options{.shared_graph_stream = true};
    std::uint64_t seed = 0;
};

inline std::vector<SimResult> run_deviation_sweep(const SweepConfig& config) {
    detail::require_domain(!config.families.empty() && !config.delta_grid.empty(),
                           "sweep grids must be non-empty");
    for (double d : config.delta_grid)
        detail::require_domain(d >= 0.0 && d <= 1.0, "delta must lie in [0, 1]");
    const RngStream root(config.seed);
    std::vector<SimResult> out;
    if (config.er_baseline)
        out.push_back(simulate_cell(config.M, config.q, config.alpha, ErSpec{config.base_p},
                                    config.options, root));
    for (auto family : config.families)
        for (double delta : config.delta_grid)
            out.push_back(simulate_cell(config.M, config.q, config.alpha,
                                        DeviationSpec{family, delta, config.base_p},
                                        config.options, root));
    return out;
}

// ---- retrospective case studies ------------------------------------------------------------

struct CaseStudy {
    std::string name;
    std::int64_t n_study = 0;
    std::int64_t M = 0;
    std::int64_t N_hat = 0;
    double d_bar = 0.0;
    double d_bar_u = 0.0;

    void validate() const {
        detail::require_domain(n_study >= 1 && n_study <= M, "need 1 <= n_study <= M");
        detail::require_domain(N_hat >= 1 && N_hat <= M, "need 1 <= N_hat <= M");
        detail::require_domain(d_bar > 0.0 && d_bar <= static_cast<double>(M), "need 0 < d_bar <= M");
        detail::require_domain(d_bar_u >= 0.0 && d_bar_u <= static_cast<double>(N_hat),
                               "need 0 <= d_bar_u <= N_hat");
    }
};

/// The seven published surveys of the retrospective table.
inline std::vector<CaseStudy> case_studies() {
    return {
        {"Heroin users in Nebraska", 550, 1879321, 368, 604, 0.118},
        {"FSW in Taiyuan, China", 7964, 3454927, 3866, 137, 0.15},
        {"MMT users in Kerman, Iran", 2550, 611401, 5289, 235, 2.03},
        {"FSW in Chongqing, China", 2957, 28000000, 31576, 311, 0.077},
        {"MSM in Shanghai, China", 3907, 24000000, 36354, 236, 0.159},
        {"HIV+ individuals in US", 1554, 250000000, 800000, 286, 0.91},
        {"MSM in Japan", 1500, 62348977, 1789416, 174, 5.09},
    };
}

/// Published relative errors and minimum sample sizes, in case_studies() order.
inline std::vector<double> published_rel_err() {
    return {0.02, 0.03, 0.01, 0.78, 0.56, 0.02, 0.02};
}
inline std::vector<std::int64_t> published_n_min() {
    return {3383, 2610, 197, 1141, 1119, 438, 81};
}

/// Relative bias of the estimator's probability limit, |M d_bar_u / d_bar - N_hat| / N_hat.
inline double retro_bias(const CaseStudy& c) {
    c.validate();
    const double limit = static_cast<double>(c.M) * c.d_bar_u / c.d_bar;
    return std::fabs(limit - static_cast<double>(c.N_hat)) / static_cast<double>(c.N_hat);
}

struct RetroResult {
    double rel_err = 0.0;
    double rel_err_sem = 0.0;
    std::int64_t n_min = 0;
    std::size_t replicates = 0;
    std::size_t degenerate = 0;
};

enum class RetroSampling {
    SufficientStatistic, // draw sum(d) ~ Bin(n M, p_d) and sum(d_u) ~ Bin(n N_hat, p_u) directly
    PerRespondent,       // draw each of the n_study pairs
};

/// Mean relative error of replicate estimates against the published N_hat,
/// each replicate surveying n_study respondents under the retrospective
/// binomial model, and the minimum sample size for the published inputs.
/// Both sampling paths give the same distribution of the estimate; the
/// estimator depends on the sample only through the two sums.
inline RetroResult run_retrospective(const CaseStudy& c, double epsilon, double alpha,
                                     std::size_t replicates, const RngStream& rng,
                                     std::size_t threads = 0,
                                     RetroSampling sampling = RetroSampling::SufficientStatistic) {
    c.validate();
    detail::require_domain(replicates >= 1, "replicates must be at least 1");
    RetroResult out;
    const StudyDesign design{epsilon, alpha, 1.0, ZConvention::ExactQuantile};
    out.n_min = min_sample_size(
        design, {c.M, static_cast<double>(c.N_hat) / static_cast<double>(c.M), c.d_bar});

    const DegreeModel model = RetroBinomial{c.M, c.N_hat, c.d_bar, c.d_bar_u};
    const RngStream base = rng.child("retro").child(c.name);
    const auto n = static_cast<std::size_t>(c.n_study);
    const double Nd = static_cast<double>(c.N_hat);
    const double pd = c.d_bar / static_cast<double>(c.M);
    const double pu = c.d_bar_u / Nd;
    std::vector<double> errs(replicates, std::numeric_limits<double>::quiet_NaN());
    parallel_for(replicates, threads, [&](std::size_t r) {
        const RngStream stream = base.child(static_cast<std::uint64_t>(r));
        double sum_d;
        double sum_du;
        if (sampling == RetroSampling::SufficientStatistic) {
            Engine eng = stream.engine();
            sum_d = static_cast<double>(binomial(eng, c.n_study * c.M, pd));
            sum_du = static_cast<double>(binomial(eng, c.n_study * c.N_hat, pu));
        } else {
            const DegreeSample s = sample_degrees(model, n, stream);
            sum_d = static_cast<double>(std::accumulate(s.d.begin(), s.d.end(), std::int64_t{0}));
            sum_du = static_cast<double>(std::accumulate(s.d_u.begin(), s.d_u.end(), std::int64_t{0}));
        }
        if (sum_d <= 0.0) return;
        const double n_hat = detail::clamp_population(static_cast<double>(c.M) * sum_du / sum_d, c.M);
        errs[r] = std::fabs(n_hat - Nd) / Nd;
    });
    RunningStats stats;
    for (double e : errs) {
        if (std::isnan(e)) ++out.degenerate;
        else stats.add(e);
    }
    out.replicates = stats.count();
    out.rel_err = stats.mean();
    out.rel_err_sem = stats.sem();
    return out;
}

} // namespace nsumkit
