#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "nsumkit/degree_models.hpp"
#include "nsumkit/errors.hpp"
#include "nsumkit/stats.hpp"

namespace nsumkit {

enum class ZConvention {
    ExactQuantile,
    ZEqualsTwo, // z_{alpha/2} = 2, the usual back-of-envelope value for alpha = 0.05
};

struct StudyDesign {
    double epsilon = 0.1;
    double alpha = 0.05;
    double design_effect = 1.0;
    ZConvention z_convention = ZConvention::ExactQuantile;

    void validate() const {
        detail::require_domain(epsilon > 0.0, "relative margin of error must be positive");
        detail::require_domain(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
        detail::require_domain(design_effect > 0.0, "design effect must be positive");
    }

    double z() const {
        return z_convention == ZConvention::ZEqualsTwo ? 2.0 : z_critical(alpha);
    }
};

struct SampleSize {
    std::int64_t n = 0;
    double raw = 0.0;     // before ceiling and clamping
    bool truncated = false; // clamp at M was binding
};

namespace detail {

// Ceiling that ignores representation noise a few ulps above an integer.
inline double tolerant_ceil(double x) {
    const double nearest = std::round(x);
    if (std::fabs(x - nearest) <= 1e-9 * std::max(1.0, std::fabs(x))) return nearest;
    return std::ceil(x);
}

} // namespace detail

/// Minimum sample size (z^2/eps^2)(1/q)(1/d_bar - 1/M) D_eff, ceiled and
/// clamped to [1, M], with the pre-ceiling value alongside.
inline SampleSize min_sample_size_detail(const StudyDesign& design, const PopulationSpec& pop) {
    design.validate();
    pop.validate();
    const double z = design.z();
    const double M = static_cast<double>(pop.M);
    const double raw = (z * z) / (design.epsilon * design.epsilon) * (1.0 / pop.q) *
                       (1.0 / pop.d_bar - 1.0 / M) * design.design_effect;
    const double ceiled = detail::tolerant_ceil(raw);
    SampleSize out;
    out.raw = raw;
    out.truncated = ceiled > M;
    out.n = static_cast<std::int64_t>(std::clamp(ceiled, 1.0, M));
    return out;
}

inline std::int64_t min_sample_size(const StudyDesign& design, const PopulationSpec& pop) {
    return min_sample_size_detail(design, pop).n;
}

inline double effective_sample_size(std::int64_t n, double d_eff) {
    detail::require_domain(n >= 1, "sample size must be at least 1");
    detail::require_domain(d_eff > 0.0, "design effect must be positive");
    return static_cast<double>(n) / d_eff;
}

struct SampleSizeGrid {
    std::vector<double> q;
    std::vector<double> d_bar;
    std::vector<std::int64_t> n; // row-major: n[i * d_bar.size() + j] for (q[i], d_bar[j])

    std::int64_t at(std::size_t qi, std::size_t di) const { return n[qi * d_bar.size() + di]; }
};

/// min_sample_size over the product q_grid x dbar_grid, truncated at M.
inline SampleSizeGrid sample_size_grid(const StudyDesign& design, std::int64_t M,
                                       std::span<const double> q_grid,
                                       std::span<const double> dbar_grid) {
    detail::require_domain(!q_grid.empty() && !dbar_grid.empty(), "grids must be non-empty");
    SampleSizeGrid out{{q_grid.begin(), q_grid.end()}, {dbar_grid.begin(), dbar_grid.end()}, {}};
    out.n.reserve(q_grid.size() * dbar_grid.size());
    for (double q : q_grid)
        for (double d : dbar_grid) out.n.push_back(min_sample_size(design, {M, q, d}));
    return out;
}

} // namespace nsumkit
