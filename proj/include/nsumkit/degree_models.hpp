#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "nsumkit/errors.hpp"
#include "nsumkit/rng.hpp"

namespace nsumkit {

// General population of size M with hidden prevalence q and mean degree d_bar.
struct PopulationSpec {
    std::int64_t M = 0;
    double q = 0.0;
    double d_bar = 0.0;

    std::int64_t hidden_size() const { return std::llround(q * static_cast<double>(M)); }
    double tie_probability() const { return d_bar / static_cast<double>(M); }

    void validate() const {
        detail::require_domain(M >= 2, "population size M must be at least 2");
        detail::require_domain(q > 0.0 && q <= 1.0, "prevalence q must lie in (0, 1]");
        // d_bar = M is admitted: the retrospective model Bin(M, d_bar / M) reaches it.
        detail::require_domain(d_bar > 0.0 && d_bar <= static_cast<double>(M),
                               "mean degree must lie in (0, M]");
        const auto N = hidden_size();
        detail::require_domain(N >= 1 && N <= M, "round(q * M) must lie in [1, M]");
    }
};

// ---- degree models ----------------------------------------------------------

/// d ~ Bin(M-1, p), d_u ~ Bin(N, p) independently.
struct MarginalBinomial {
    std::int64_t M;
    std::int64_t N;
    double p;
};

/// d ~ Bin(M-1, p), d_u | d ~ Hypergeometric(M-1, N, d).
struct HypergeometricConditional {
    std::int64_t M;
    std::int64_t N;
    double p;
};

/// d ~ Bin(M-1, p), d_u | d ~ Bin(d, p).
struct ConditionalBinomial {
    std::int64_t M;
    double p;
};

/// d supplied by the caller, d_u | d ~ Bin(d, N/M).
struct Killworth {
    std::int64_t M;
    std::int64_t N;
    std::vector<std::int64_t> d;
};

/// Retrospective model: d ~ Bin(M, d_bar/M), d_u ~ Bin(N_hat, d_bar_u/N_hat).
struct RetroBinomial {
    std::int64_t M;
    std::int64_t N_hat;
    double d_bar;
    double d_bar_u;
};

using DegreeModel =
    std::variant<MarginalBinomial, HypergeometricConditional, ConditionalBinomial, Killworth,
                 RetroBinomial>;

struct DegreeSample {
    std::vector<std::int64_t> d;
    std::vector<std::int64_t> d_u;

    std::size_t size() const { return d.size(); }

    void validate() const {
        if (d.size() != d_u.size()) throw DomainError("degree sample columns differ in length");
        if (d.empty()) throw DomainError("degree sample is empty");
        for (std::size_t i = 0; i < d.size(); ++i)
            if (d[i] < 0 || d_u[i] < 0) throw DomainError("degrees must be non-negative");
    }
};

struct ModelMoments {
    double mean_d = 0.0;
    double var_d = 0.0;
    double mean_du = 0.0;
    double var_du = 0.0;
};

namespace detail {

inline void require_probability(double p, const char* what) {
    require_domain(p >= 0.0 && p <= 1.0, std::string(what) + " must lie in [0, 1]");
}

inline void validate_model(const DegreeModel& model) {
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            require_domain(m.M >= 2, "population size M must be at least 2");
            if constexpr (std::is_same_v<T, MarginalBinomial> ||
                          std::is_same_v<T, HypergeometricConditional>) {
                require_probability(m.p, "tie probability p");
                require_domain(m.N >= 0 && m.N <= m.M, "hidden size N must lie in [0, M]");
                if constexpr (std::is_same_v<T, HypergeometricConditional>)
                    require_domain(m.N <= m.M - 1, "hypergeometric urn needs N <= M - 1");
            } else if constexpr (std::is_same_v<T, ConditionalBinomial>) {
                require_probability(m.p, "tie probability p");
            } else if constexpr (std::is_same_v<T, Killworth>) {
                require_domain(m.N >= 0 && m.N <= m.M, "hidden size N must lie in [0, M]");
            } else {
                require_domain(m.N_hat >= 1 && m.N_hat <= m.M, "N_hat must lie in [1, M]");
                require_domain(m.d_bar >= 0.0 && m.d_bar <= static_cast<double>(m.M),
                               "d_bar must lie in [0, M]");
                require_domain(m.d_bar_u >= 0.0 && m.d_bar_u <= static_cast<double>(m.N_hat),
                               "d_bar_u must lie in [0, N_hat]");
            }
        },
        model);
}

} // namespace detail

/// n i.i.d. degree pairs from `model`.
inline DegreeSample sample_degrees(const DegreeModel& model, std::size_t n, const RngStream& rng) {
    if (n == 0) throw DomainError("sample_degrees: n must be at least 1");
    detail::validate_model(model);
    if (const auto* kw = std::get_if<Killworth>(&model)) {
        if (kw->d.empty()) throw UsageError("Killworth model requires caller-supplied degrees");
        if (kw->d.size() != n)
            throw UsageError("Killworth model: supplied degree count differs from n");
    }

    Engine eng = rng.engine();
    DegreeSample out;
    out.d.resize(n);
    out.d_u.resize(n);

    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            for (std::size_t i = 0; i < n; ++i) {
                if constexpr (std::is_same_v<T, MarginalBinomial>) {
                    out.d[i] = binomial(eng, m.M - 1, m.p);
                    out.d_u[i] = binomial(eng, m.N, m.p);
                } else if constexpr (std::is_same_v<T, HypergeometricConditional>) {
                    out.d[i] = binomial(eng, m.M - 1, m.p);
                    out.d_u[i] = hypergeometric(eng, m.M - 1, m.N, out.d[i]);
                } else if constexpr (std::is_same_v<T, ConditionalBinomial>) {
                    out.d[i] = binomial(eng, m.M - 1, m.p);
                    out.d_u[i] = binomial(eng, out.d[i], m.p);
                } else if constexpr (std::is_same_v<T, Killworth>) {
                    if (m.d[i] < 0) throw DomainError("Killworth: negative supplied degree");
                    out.d[i] = m.d[i];
                    out.d_u[i] = binomial(eng, m.d[i],
                                          static_cast<double>(m.N) / static_cast<double>(m.M));
                } else {
                    out.d[i] = binomial(eng, m.M, m.d_bar / static_cast<double>(m.M));
                    out.d_u[i] = binomial(eng, m.N_hat, m.d_bar_u / static_cast<double>(m.N_hat));
                }
            }
        },
        model);
    return out;
}

/// Exact marginal moments. Killworth has no model for d and is rejected.
inline ModelMoments model_moments(const DegreeModel& model) {
    detail::validate_model(model);
    return std::visit(
        [](const auto& m) -> ModelMoments {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Killworth>) {
                throw UnsupportedError("model_moments: Killworth model has no marginal for d");
            } else if constexpr (std::is_same_v<T, RetroBinomial>) {
                const double pd = m.d_bar / static_cast<double>(m.M);
                const double pu = m.d_bar_u / static_cast<double>(m.N_hat);
                return {m.d_bar, m.d_bar * (1.0 - pd), m.d_bar_u, m.d_bar_u * (1.0 - pu)};
            } else {
                const double trials = static_cast<double>(m.M - 1);
                const double mu = trials * m.p;
                const double var = trials * m.p * (1.0 - m.p);
                if constexpr (std::is_same_v<T, MarginalBinomial>) {
                    const double N = static_cast<double>(m.N);
                    return {mu, var, N * m.p, N * m.p * (1.0 - m.p)};
                } else if constexpr (std::is_same_v<T, ConditionalBinomial>) {
                    // Tower property: E[Bin(d, p)] = p E d; Var = E[d p(1-p)] + p^2 Var d.
                    return {mu, var, mu * m.p, mu * m.p * (1.0 - m.p) + m.p * m.p * var};
                } else {
                    // Hypergeometric(M-1, N, d): mean d f, variance d f (1-f)(M-1-d)/(M-2).
                    const double f = static_cast<double>(m.N) / trials;
                    const double mean_du = mu * f;
                    double within = 0.0;
                    if (m.M > 2) {
                        const double e_d_rest = mu * trials - (var + mu * mu); // E[d (M-1-d)]
                        within = f * (1.0 - f) * e_d_rest / (trials - 1.0);
                    }
                    return {mu, var, mean_du, within + f * f * var};
                }
            }
        },
        model);
}

} // namespace nsumkit
