#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nsumkit/errors.hpp"
#include "nsumkit/stats.hpp"

#ifdef NSUMKIT_HAVE_BOOST
#include <boost/math/distributions/normal.hpp>
#endif

using namespace nsumkit;
using Catch::Approx;

namespace {

// erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (1*3*...*(2n+1)); every term is positive.
long double erf_series(long double x) {
    const long double ax = std::fabs(x);
    long double term = ax;
    long double sum = ax;
    for (int n = 1; n < 2000; ++n) {
        term *= 2.0L * ax * ax / (2.0L * n + 1.0L);
        sum += term;
        if (term < sum * 1e-21L) break;
    }
    const long double value = 2.0L / std::sqrt(3.14159265358979323846264338327950288L) *
                              std::exp(-ax * ax) * sum;
    return x < 0 ? -value : value;
}

long double cdf_oracle(long double x) { return 0.5L * (1.0L + erf_series(x / std::sqrt(2.0L))); }

// Bisection on the series CDF; 200 halvings reach the long double floor.
long double quantile_oracle(long double p) {
    long double lo = -10.0L;
    long double hi = 10.0L;
    for (int i = 0; i < 200; ++i) {
        const long double mid = 0.5L * (lo + hi);
        if (cdf_oracle(mid) < p) lo = mid;
        else hi = mid;
    }
    return 0.5L * (lo + hi);
}

std::vector<double> probe_points() {
    std::vector<double> p;
    for (int k = 1; k <= 980; ++k) p.push_back(k / 981.0);
    for (int e = 1; e <= 10; ++e) {
        p.push_back(std::pow(10.0, -0.5 * e - 1.0));
        p.push_back(1.0 - std::pow(10.0, -0.5 * e - 1.0));
    }
    return p; // 1000 points, 1e-6 .. 1 - 1e-6
}

} // namespace

TEST_CASE("normal_quantile agrees with an erf-series oracle", "[stats]") {
    const auto probes = probe_points();
    REQUIRE(probes.size() == 1000);
    double worst = 0.0;
    for (double p : probes)
        worst = std::max(worst, std::fabs(normal_quantile(p) - static_cast<double>(quantile_oracle(p))));
    CHECK(worst < 1e-6);
}

TEST_CASE("quantile and CDF round-trip", "[stats]") {
    for (double p : probe_points()) CHECK(normal_cdf(normal_quantile(p)) == Approx(p).margin(1e-8));
    for (double x = -6.0; x <= 6.0; x += 0.37)
        CHECK(normal_quantile(normal_cdf(x)) == Approx(x).margin(1e-8));
}

TEST_CASE("normal_quantile reference values", "[stats]") {
    CHECK(normal_quantile(0.975) == Approx(1.959964).margin(1e-6));
    CHECK(normal_quantile(0.5) == 0.0);
    CHECK(normal_quantile(0.995) == Approx(2.575829).margin(1e-6));
    CHECK(normal_quantile(0.025) == Approx(-1.959964).margin(1e-6));
    CHECK(normal_quantile(0.3) == -normal_quantile(0.7));
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(normal_cdf(-1.959964) == Approx(0.025).margin(1e-7));
    CHECK(z_critical(0.05) == Approx(1.959964).margin(1e-6));
    CHECK(z_critical(0.2) == Approx(1.281552).margin(1e-6));
}

TEST_CASE("normal_quantile rejects probabilities outside (0, 1)", "[stats]") {
    CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
    CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
    CHECK_THROWS_AS(normal_quantile(-0.1), DomainError);
    CHECK_THROWS_AS(normal_quantile(std::nan("")), DomainError);
    CHECK_THROWS_AS(normal_cdf(INFINITY), DomainError);
    CHECK_THROWS_AS(z_critical(0.0), DomainError);
    CHECK_THROWS_AS(z_critical(1.0), DomainError);
}

#ifdef NSUMKIT_HAVE_BOOST
TEST_CASE("normal_quantile agrees with Boost.Math in the far tails", "[stats]") {
    const boost::math::normal_distribution<double> normal;
    for (double p : {1e-300, 1e-100, 1e-20, 1e-12, 1e-8, 0.01, 0.2, 0.6, 0.999, 1.0 - 1e-12}) {
        const double expected = boost::math::quantile(normal, p);
        CHECK(normal_quantile(p) == Approx(expected).epsilon(1e-12));
    }
}
#endif

TEST_CASE("summarize uses the n - 1 denominator", "[stats]") {
    const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
    const Summary s = summarize(x);
    CHECK(s.mean == 5.0);
    CHECK(s.sd == Approx(std::sqrt(32.0 / 7.0)));
    CHECK_THROWS_AS(summarize(std::vector<double>{}), DomainError);
}

TEST_CASE("RunningStats merge equals a single pass", "[stats]") {
    RunningStats all;
    RunningStats a;
    RunningStats b;
    for (int i = 0; i < 1000; ++i) {
        const double x = std::sin(i * 0.7) * 10 + i * 0.01;
        all.add(x);
        (i < 371 ? a : b).add(x);
    }
    a.merge(b);
    CHECK(a.count() == all.count());
    CHECK(a.mean() == Approx(all.mean()).epsilon(1e-12));
    CHECK(a.variance() == Approx(all.variance()).epsilon(1e-12));
    CHECK(all.sem() == Approx(all.sd() / std::sqrt(1000.0)));

    RunningStats empty;
    empty.merge(all);
    CHECK(empty.mean() == all.mean());
    CHECK(std::isnan(RunningStats{}.mean()));
}
