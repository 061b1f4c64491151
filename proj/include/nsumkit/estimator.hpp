#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "nsumkit/degree_models.hpp"
#include "nsumkit/errors.hpp"
#include "nsumkit/stats.hpp"

namespace nsumkit {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const { return lo <= x && x <= hi; }
};

struct NsumEstimate {
    double n_hat = 0.0;
    double variance = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n = 0;
    double alpha = 0.05;
};

/// Moments of a ratio X / Y.
struct MomentSet {
    double mu_x = 0.0;
    double mu_y = 0.0;
    double var_x = 0.0;
    double var_y = 0.0;
    double cov_xy = 0.0;
};

namespace detail {

inline double clamp_population(double value, std::int64_t M) {
    return std::clamp(value, 0.0, static_cast<double>(M));
}

inline void require_sample(const DegreeSample& sample) { sample.validate(); }

} // namespace detail

/// Classic scale-up estimate M * sum(d_u) / sum(d), clamped to [0, M].
inline double nsum_estimate(const DegreeSample& sample, std::int64_t M) {
    detail::require_sample(sample);
    detail::require_domain(M >= 1, "population size must be positive");
    const auto sum_d = std::accumulate(sample.d.begin(), sample.d.end(), std::int64_t{0});
    const auto sum_du = std::accumulate(sample.d_u.begin(), sample.d_u.end(), std::int64_t{0});
    if (sum_d == 0) throw DegenerateSampleError("sum of reported degrees is zero");
    const double ratio = static_cast<double>(sum_du) / static_cast<double>(sum_d);
    return detail::clamp_population(static_cast<double>(M) * ratio, M);
}

/// Var(N_hat) treating degrees as fixed: (N/n)(1-p)/p.
inline double variance_conservative(double N, double p, std::size_t n) {
    detail::require_domain(n >= 1, "sample size must be at least 1");
    detail::require_domain(p > 0.0 && p < 1.0, "tie probability must lie in (0, 1)");
    detail::require_domain(N > 0.0, "hidden population size must be positive");
    return (N / static_cast<double>(n)) * (1.0 - p) / p;
}

/// First-order (delta-method) variance of X / Y.
inline double variance_taylor_ratio(const MomentSet& m) {
    detail::require_domain(m.mu_x != 0.0 && m.mu_y != 0.0, "ratio moments need non-zero means");
    const double r2 = (m.mu_x * m.mu_x) / (m.mu_y * m.mu_y);
    return r2 * (m.var_x / (m.mu_x * m.mu_x) - 2.0 * m.cov_xy / (m.mu_x * m.mu_y) +
                 m.var_y / (m.mu_y * m.mu_y));
}

/// Taylor approximation of E[X / Y] of order 1 or 2.
inline double mean_taylor(const MomentSet& m, int order) {
    detail::require_domain(m.mu_y != 0.0, "ratio moments need a non-zero denominator mean");
    const double first = m.mu_x / m.mu_y;
    if (order == 1) return first;
    if (order == 2) {
        const double y2 = m.mu_y * m.mu_y;
        return first - m.cov_xy / y2 + m.mu_x * m.var_y / (y2 * m.mu_y);
    }
    throw UnsupportedError("mean_taylor: only orders 1 and 2 are defined");
}

/// Law-of-total-variance approximation of Var(X / Y), linearising only 1/Y.
/// `expected_conditional_var` is E[Var(X | Y)].
inline double variance_total_decomposition(const MomentSet& m, double expected_conditional_var) {
    detail::require_domain(m.mu_x != 0.0 && m.mu_y != 0.0, "ratio moments need non-zero means");
    const double y2 = m.mu_y * m.mu_y;
    return expected_conditional_var / m.mu_y +
           (m.mu_x * m.mu_x / y2) *
               ((m.var_x - expected_conditional_var) / (m.mu_x * m.mu_x) + m.var_y / y2);
}

// ---------------------------------------------------------------------------
// Closed-form variance table for d ~ Bin(M-1, p). Rows name the model for
// d_u, columns the linearisation. Two cells have no entry.
//
//   row                           | linearise X/Y              | linearise 1/Y
//   d_u ~ Bin(N, p)               | (N/n)(1-p)/p (1 - N/M)     | (N/n)(1-p)/p (np(M-N) + 2 + 1/M + N/M^2)
//   d_u | d ~ Bin(d, p)           | -                          | M p (1-p) (M + 1/n)
//   d_u | d ~ Bin(N, p)           | -                          | (N/n)(1-p)/p (1 + N/M)
// ---------------------------------------------------------------------------
enum class VarianceRow { MarginalBinomial, ConditionalBinomial, ConditionalFixedN };
enum class Linearization { Ratio, Inverse };

struct VarianceInputs {
    double N = 0.0;
    double M = 0.0;
    double p = 0.0;
    std::size_t n = 1;
};

inline double variance_table(VarianceRow row, Linearization method, const VarianceInputs& in) {
    detail::require_domain(in.n >= 1, "sample size must be at least 1");
    detail::require_domain(in.p > 0.0 && in.p < 1.0, "tie probability must lie in (0, 1)");
    detail::require_domain(in.M >= 1.0 && in.N >= 0.0 && in.N <= in.M, "need 0 <= N <= M");
    const double n = static_cast<double>(in.n);
    const double base = (in.N / n) * (1.0 - in.p) / in.p;
    switch (row) {
    case VarianceRow::MarginalBinomial:
        if (method == Linearization::Ratio) return base * (1.0 - in.N / in.M);
        return base * (n * in.p * (in.M - in.N) + 2.0 + 1.0 / in.M + in.N / (in.M * in.M));
    case VarianceRow::ConditionalBinomial:
        if (method == Linearization::Ratio)
            throw UnsupportedError("no X/Y linearisation entry for the conditional binomial row");
        return in.M * in.p * (1.0 - in.p) * (in.M + 1.0 / n);
    case VarianceRow::ConditionalFixedN:
        if (method == Linearization::Ratio)
            throw UnsupportedError("no X/Y linearisation entry for the conditional Bin(N, p) row");
        return base * (1.0 + in.N / in.M);
    }
    throw UnsupportedError("unknown table row");
}

/// Table lookup from a degree model. MarginalBinomial maps to the first row,
/// ConditionalBinomial to the second (its N is not needed).
inline double variance_table(const DegreeModel& model, std::size_t n, Linearization method) {
    if (const auto* m = std::get_if<MarginalBinomial>(&model)) {
        return variance_table(VarianceRow::MarginalBinomial, method,
                              {static_cast<double>(m->N), static_cast<double>(m->M), m->p, n});
    }
    if (const auto* m = std::get_if<ConditionalBinomial>(&model)) {
        return variance_table(VarianceRow::ConditionalBinomial, method,
                              {0.0, static_cast<double>(m->M), m->p, n});
    }
    throw UnsupportedError("variance_table: model has no closed-form table entry");
}

// ---- intervals ----------------------------------------------------------------

/// Normal interval n_hat +- z sqrt(variance), clamped to [0, M].
inline Interval normal_interval(double n_hat, double variance, std::int64_t M, double alpha) {
    detail::require_domain(variance >= 0.0, "variance must be non-negative");
    const double half = z_critical(alpha) * std::sqrt(variance);
    return {detail::clamp_population(n_hat - half, M), detail::clamp_population(n_hat + half, M)};
}

/// Plug-in variance (n_hat / n)(1 - p_hat)/p_hat with p_hat = mean(d) / M.
inline double plugin_variance(double n_hat, const DegreeSample& sample, std::int64_t M) {
    detail::require_sample(sample);
    const auto sum_d = std::accumulate(sample.d.begin(), sample.d.end(), std::int64_t{0});
    const double n = static_cast<double>(sample.size());
    const double p_hat = static_cast<double>(sum_d) / n / static_cast<double>(M);
    if (p_hat <= 0.0) throw DegenerateSampleError("estimated tie probability is zero");
    return (n_hat / n) * (1.0 - p_hat) / p_hat;
}

inline Interval confidence_interval(double n_hat, const DegreeSample& sample, std::int64_t M,
                                    double alpha) {
    detail::require_domain(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    return normal_interval(n_hat, plugin_variance(n_hat, sample, M), M, alpha);
}

/// Point estimate, plug-in variance and interval in one pass.
inline NsumEstimate estimate(const DegreeSample& sample, std::int64_t M, double alpha) {
    NsumEstimate out;
    out.n_hat = nsum_estimate(sample, M);
    out.variance = plugin_variance(out.n_hat, sample, M);
    const Interval ci = normal_interval(out.n_hat, out.variance, M, alpha);
    out.ci_lo = ci.lo;
    out.ci_hi = ci.hi;
    out.n = sample.size();
    out.alpha = alpha;
    return out;
}

} // namespace nsumkit
