#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nsumkit/montecarlo.hpp"

using namespace nsumkit;
using Catch::Approx;

namespace {

SimOptions quick(std::size_t replicates, std::size_t threads = 1) {
    SimOptions o;
    o.replicates = replicates;
    o.threads = threads;
    return o;
}

bool same_stats(const SimResult& a, const SimResult& b) {
    return a.model == b.model && a.M == b.M && a.q == b.q && a.alpha == b.alpha &&
           a.n_used == b.n_used && a.replicates_run == b.replicates_run &&
           a.degenerate == b.degenerate && a.infeasible == b.infeasible &&
           ((std::isnan(a.mean_rel_err) && std::isnan(b.mean_rel_err)) ||
            (a.mean_rel_err == b.mean_rel_err && a.sd_rel_err == b.sd_rel_err &&
             a.coverage == b.coverage));
}

} // namespace

TEST_CASE("factorial output has one row per cell in lexicographic order", "[montecarlo]") {
    SimConfig c;
    c.M_grid = {300, 200};
    c.q_grid = {0.3, 0.1};
    c.alpha_grid = {0.1, 0.05};
    c.models = {ErSpec{0.1}, SmallWorldSpec{10, 0.1}};
    c.options = quick(10);
    c.seed = 4;
    const auto rows = run_factorial(c);
    REQUIRE(rows.size() == 16);
    CHECK(rows[0].model == "ER");
    CHECK(rows[0].M == 200);
    CHECK(rows[0].q == 0.1);
    CHECK(rows[0].alpha == 0.05);
    CHECK(rows[1].alpha == 0.1);
    CHECK(rows[2].q == 0.3);
    CHECK(rows[4].M == 300);
    CHECK(rows[8].model == "SmallWorld");
    for (const auto& r : rows) {
        CHECK(r.replicates_run + r.degenerate == 10);
        CHECK(r.coverage >= 0.0);
        CHECK(r.coverage <= 1.0);
    }

    SimConfig two = c;
    two.M_grid = {200};
    two.q_grid = {0.1, 0.3};
    two.alpha_grid = {0.05};
    two.models = {ErSpec{0.1}};
    CHECK(run_factorial(two).size() == 2);
}

TEST_CASE("reruns and thread counts give identical results", "[montecarlo]") {
    SimConfig c;
    c.M_grid = {250};
    c.q_grid = {0.05, 0.2};
    c.alpha_grid = {0.05, 0.2};
    c.models = {ErSpec{0.1}, PaSpec{}};
    c.options = quick(24, 1);
    c.seed = 99;
    const auto a = run_factorial(c);
    const auto b = run_factorial(c);
    c.options.threads = 3;
    const auto t = run_factorial(c);
    REQUIRE(a.size() == b.size());
    REQUIRE(a.size() == t.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(same_stats(a[i], b[i]));
        CHECK(same_stats(a[i], t[i]));
    }
    c.seed = 100;
    CHECK_FALSE(same_stats(a[0], run_factorial(c)[0]));
}

TEST_CASE("ERGM cells beyond 1000 nodes are infeasible and carry no statistics", "[montecarlo]") {
    const SimResult r = simulate_cell(5000, 0.1, 0.05, ErgmSpec{}, quick(5), RngStream(1));
    CHECK(r.infeasible);
    CHECK(r.replicates_run == 0);
    CHECK(std::isnan(r.mean_rel_err));
    CHECK(std::isnan(r.coverage));
}

TEST_CASE("splitting replicates and pooling changes nothing", "[montecarlo]") {
    const RngStream root(31);
    const double qs[] = {0.1};
    const double as[] = {0.05};
    const SimResult whole = simulate_block(ErSpec{0.1}, 400, qs, as, quick(500), root).front();
    SimResult first = simulate_block(ErSpec{0.1}, 400, qs, as, quick(250), root, 0).front();
    const SimResult second = simulate_block(ErSpec{0.1}, 400, qs, as, quick(250), root, 250).front();
    first.merge(second);
    CHECK(first.replicates_run == whole.replicates_run);
    CHECK(first.n_used == whole.n_used);
    CHECK(first.mean_rel_err == Approx(whole.mean_rel_err).margin(1e-9));
    CHECK(first.sd_rel_err == Approx(whole.sd_rel_err).margin(1e-9));
    CHECK(first.coverage == Approx(whole.coverage).margin(1e-9));
    CHECK(first.mean_density == Approx(whole.mean_density).margin(1e-9));
}

TEST_CASE("single-cell and grouped runs agree", "[montecarlo]") {
    const RngStream root(32);
    const double qs[] = {0.05, 0.2};
    const double as[] = {0.01, 0.1};
    const auto block = simulate_block(ErSpec{0.1}, 300, qs, as, quick(30), root);
    const SimResult cell = simulate_cell(300, 0.2, 0.1, ErSpec{0.1}, quick(30), root);
    CHECK(same_stats(block[3], cell));
}

TEST_CASE("ER meets nominal control across the grid", "[montecarlo][property]") {
    const double qs[] = {0.01, 0.05, 0.11, 0.31, 0.51};
    const double as[] = {0.01, 0.05, 0.1, 0.2};
    const auto rows = simulate_block(ErSpec{0.1}, 1000, qs, as, quick(500, 0), RngStream(33));
    for (const auto& r : rows) {
        INFO("q=" << r.q << " alpha=" << r.alpha << " err=" << r.mean_rel_err << " cov=" << r.coverage);
        CHECK(r.mean_rel_err <= 0.1);
        CHECK(r.coverage >= 1.0 - r.alpha - 2.0 * std::sqrt(r.alpha * (1.0 - r.alpha) / 500.0));
    }
    // Coverage is monotone in alpha within Monte Carlo noise.
    for (std::size_t qi = 0; qi < 5; ++qi) {
        const SimResult& tight = rows[qi * 4 + 0];
        const SimResult& loose = rows[qi * 4 + 3];
        const double se = std::sqrt(tight.coverage * (1 - tight.coverage) / 500.0 +
                                    loose.coverage * (1 - loose.coverage) / 500.0);
        CHECK(tight.coverage + 2 * se >= loose.coverage);
    }
}

TEST_CASE("respondent pool options", "[montecarlo]") {
    SimOptions o = quick(20);
    o.pool = RespondentPool::NonHidden;
    const SimResult r = simulate_cell(200, 0.5, 0.05, ErSpec{0.1}, o, RngStream(34));
    CHECK(r.replicates_run == 20);
    CHECK(r.n_used <= 100);
    o.interval = IntervalMethod::TrueParameter;
    const SimResult t = simulate_cell(200, 0.5, 0.05, ErSpec{0.1}, o, RngStream(34));
    CHECK(t.mean_rel_err == r.mean_rel_err); // same draws, different interval
}

TEST_CASE("truncation at the pool size is flagged", "[montecarlo]") {
    const SimResult r = simulate_cell(200, 0.01, 0.05, ErSpec{0.01}, quick(10), RngStream(35));
    CHECK(r.truncated);
    CHECK(r.n_used == 200);
}

TEST_CASE("invalid cells are rejected", "[montecarlo]") {
    CHECK_THROWS_AS(simulate_cell(100, 0.001, 0.05, ErSpec{}, quick(2), RngStream(1)), DomainError);
    CHECK_THROWS_AS(simulate_cell(100, 0.1, 0.0, ErSpec{}, quick(2), RngStream(1)), DomainError);
    CHECK_THROWS_AS(simulate_cell(100, 0.1, 0.05, ErSpec{}, quick(0), RngStream(1)), DomainError);
    SweepConfig s;
    s.delta_grid = {1.5};
    CHECK_THROWS_AS(run_deviation_sweep(s), DomainError);
}

TEST_CASE("deviation sweep shape", "[montecarlo]") {
    SweepConfig s;
    s.families = {DeviationFamily::PaMixture, DeviationFamily::Sbm2Block};
    s.delta_grid = {0.0, 0.5};
    s.M = 200;
    s.options.replicates = 10;
    s.options.threads = 1;
    const auto rows = run_deviation_sweep(s);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].model == "ER");
    CHECK_FALSE(rows[0].delta.has_value());
    CHECK(rows[1].model == "PA-mixture");
    CHECK(*rows[2].delta == 0.5);
    CHECK(rows[3].model == "SBM-2block");
    // With shared graph streams the delta = 0 PA-mixture reproduces the ER row exactly.
    CHECK(rows[1].mean_rel_err == rows[0].mean_rel_err);
}

TEST_CASE("retrospective bias oracle", "[montecarlo]") {
    const auto cases = case_studies();
    REQUIRE(cases.size() == 7);
    CHECK(retro_bias(cases[3]) == Approx(0.780).margin(0.0005));
    CHECK(retro_bias(cases[4]) == Approx(0.555).margin(0.0005));
    const auto published = published_n_min();
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const RetroResult r = run_retrospective(cases[i], 0.1, 0.05, 2000, RngStream(36));
        INFO(cases[i].name << " rel_err " << r.rel_err << " n_min " << r.n_min);
        CHECK(std::fabs(double(r.n_min) - double(published[i])) / double(published[i]) <= 0.05);
        // Jensen: the mean absolute error is at least the bias of the probability limit,
        // and exceeds it by at most the noise, whose relative sd is about 1 / sqrt(n d_u).
        const double bias = retro_bias(cases[i]);
        const double noise = 1.0 / std::sqrt(double(cases[i].n_study) * cases[i].d_bar_u);
        CHECK(r.rel_err >= bias - 5 * r.rel_err_sem);
        CHECK(r.rel_err <= bias + noise + 5 * r.rel_err_sem);
    }
}

TEST_CASE("bias-dominated retrospective rows sit on the closed-form bias", "[montecarlo]") {
    for (std::size_t i : {3u, 4u}) {
        const CaseStudy c = case_studies()[i];
        const RetroResult r = run_retrospective(c, 0.1, 0.05, 10000, RngStream(37));
        const double bias = retro_bias(c);
        CHECK(std::fabs(r.rel_err - bias) <= bias + 5 * r.rel_err_sem);
        CHECK(r.rel_err == Approx(bias).margin(0.01));
    }
}

TEST_CASE("retrospective sampling paths agree in distribution", "[montecarlo]") {
    const CaseStudy c = case_studies()[2];
    const RetroResult fast = run_retrospective(c, 0.1, 0.05, 3000, RngStream(38), 0,
                                               RetroSampling::SufficientStatistic);
    const RetroResult slow = run_retrospective(c, 0.1, 0.05, 3000, RngStream(39), 0,
                                               RetroSampling::PerRespondent);
    const double se = std::hypot(fast.rel_err_sem, slow.rel_err_sem);
    CHECK(std::fabs(fast.rel_err - slow.rel_err) <= 4 * se);
    CHECK(fast.n_min == slow.n_min);
}

TEST_CASE("retrospective inputs are validated", "[montecarlo]") {
    CaseStudy bad = case_studies()[0];
    bad.d_bar_u = 1e6;
    CHECK_THROWS_AS(run_retrospective(bad, 0.1, 0.05, 10, RngStream(1)), DomainError);
    CHECK_THROWS_AS(run_retrospective(case_studies()[0], 0.1, 0.05, 0, RngStream(1)), DomainError);
}

TEST_CASE("default q grid is inclusive of 0.51", "[montecarlo]") {
    const auto q = default_q_grid();
    CHECK(q.size() == 26);
    CHECK(q.front() == 0.01);
    CHECK(q.back() == 0.51);
}
