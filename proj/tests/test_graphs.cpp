#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <vector>

#include "nsumkit/generators.hpp"
#include "nsumkit/graph.hpp"
#include "nsumkit/stats.hpp"

using namespace nsumkit;
using Catch::Approx;

namespace {

RunningStats densities(const GraphModelSpec& spec, std::size_t M, int graphs, std::uint64_t seed) {
    const RngStream root(seed);
    const ResolvedModel resolved = resolve_model(spec, M, root);
    RunningStats s;
    for (int g = 0; g < graphs; ++g) {
        Engine eng = root.child("graph").child(static_cast<std::uint64_t>(g)).engine();
        const Topology t = generate_topology(resolved.spec, M, eng);
        REQUIRE(audit(t).ok());
        s.add(t.density());
    }
    return s;
}

} // namespace

TEST_CASE("topology rejects malformed edge lists", "[graphs]") {
    const std::vector<Edge> loop{{0, 0}};
    const std::vector<Edge> twice{{0, 1}, {1, 0}};
    const std::vector<Edge> out_of_range{{0, 5}};
    CHECK_THROWS_AS(Topology(3, loop), DomainError);
    CHECK_THROWS_AS(Topology(3, twice), DomainError);
    CHECK_THROWS_AS(Topology(3, out_of_range), DomainError);
}

TEST_CASE("degrees of small graphs", "[graphs]") {
    const Graph empty(Topology(4, std::vector<Edge>{}));
    const DegreeSample z = degrees(empty);
    CHECK(z.d == std::vector<std::int64_t>(4, 0));
    CHECK(z.d_u == std::vector<std::int64_t>(4, 0));

    const std::vector<Edge> tri{{0, 1}, {1, 2}, {0, 2}};
    Graph g(Topology(3, tri));
    g.hidden = {1, 0, 0};
    const DegreeSample s = degrees(g);
    CHECK(s.d == std::vector<std::int64_t>{2, 2, 2});
    CHECK(s.d_u == std::vector<std::int64_t>{0, 1, 1});
    CHECK_THROWS_AS(degrees(*g.topology, std::vector<std::uint8_t>{1}), DomainError);

    std::ostringstream dump;
    write_edge_list(dump, *g.topology);
    CHECK(dump.str() == "0 1\n0 2\n1 2\n");
}

TEST_CASE("ER mean degree", "[graphs]") {
    RunningStats mean_degree;
    for (int g = 0; g < 20; ++g) {
        const Graph graph = generate(ErSpec{0.1}, 1000, RngStream(5).child(g));
        REQUIRE(audit(*graph.topology).ok());
        mean_degree.add(graph.topology->mean_degree());
    }
    CHECK(mean_degree.mean() == Approx(99.9).margin(1.0));
}

TEST_CASE("SBM density with the default block matrix", "[graphs]") {
    CHECK(densities(default_sbm(), 999, 20, 6).mean() == Approx(0.1022).margin(0.005));
    CHECK(detail::block_sizes({1.0 / 3, 1.0 / 3, 1.0 / 3}, 1000) == std::vector<std::size_t>{334, 333, 333});
}

TEST_CASE("PA density", "[graphs]") {
    PaSpec pa;
    pa.m_per_step = 50;
    CHECK(densities(pa, 1000, 10, 7).mean() == Approx(0.10).margin(0.02));
}

TEST_CASE("default models sit near 10% density at M = 1000", "[graphs]") {
    for (const auto& model : default_models()) {
        const int graphs = requires_ergm(model) ? 5 : 20;
        const double mean = densities(model, 1000, graphs, 8).mean();
        INFO(model_name(model) << " density " << mean);
        CHECK(mean >= 0.08);
        CHECK(mean <= 0.12);
    }
}

TEST_CASE("small-world density follows 2 nei / (M - 1) at larger M", "[graphs]") {
    const double mean = densities(SmallWorldSpec{}, 5000, 3, 9).mean();
    CHECK(mean == Approx(100.0 / 4999.0).epsilon(1e-9));
}

TEST_CASE("ERGM chain is near stationarity at the default run length", "[graphs]") {
    const std::size_t M = 1000;
    const RngStream root(10);
    const ResolvedModel resolved = resolve_model(ErgmSpec{}, M, root);
    REQUIRE(resolved.calibration);
    CHECK(resolved.calibration->converged);
    auto spec = std::get<ErgmSpec>(resolved.spec);
    RunningStats base;
    RunningStats doubled;
    for (int g = 0; g < 4; ++g) {
        Engine e1 = root.child("a").child(g).engine();
        Engine e2 = root.child("b").child(g).engine();
        base.add(sample_ergm(M, *spec.theta_edge, spec.theta_triangle, *spec.triangle_scale,
                             *spec.proposals, spec.start_p, e1).density());
        doubled.add(sample_ergm(M, *spec.theta_edge, spec.theta_triangle, *spec.triangle_scale,
                                2 * *spec.proposals, spec.start_p, e2).density());
    }
    CHECK(std::fabs(base.mean() - doubled.mean()) < 0.01);
    CHECK(base.mean() == Approx(0.10).margin(0.01));
}

TEST_CASE("ERGM is infeasible beyond 1000 nodes", "[graphs]") {
    CHECK_THROWS_AS(generate(ErgmSpec{}, 1001, RngStream(1)), InfeasibleError);
    CHECK_THROWS_AS(generate(DeviationSpec{DeviationFamily::ErgmPlus, 0.5}, 2000, RngStream(1)),
                    InfeasibleError);
}

TEST_CASE("invalid specs are domain errors", "[graphs]") {
    CHECK_THROWS_AS(generate(ErSpec{1.5}, 100, RngStream(1)), DomainError);
    CHECK_THROWS_AS(generate(SbmSpec{{0.5, 0.5}, {{0.1, 0.2}, {0.3, 0.1}}}, 100, RngStream(1)), DomainError);
    PaSpec pa;
    pa.power = 0.0;
    CHECK_THROWS_AS(generate(pa, 100, RngStream(1)), DomainError);
    CHECK_THROWS_AS(generate(ErSpec{0.1}, 1, RngStream(1)), DomainError);
    CHECK_THROWS_AS(deviation_spec(DeviationFamily::Sbm2Block, 1.5, 100), DomainError);
}

TEST_CASE("deviation families", "[graphs]") {
    const auto sbm0 = std::get<SbmSpec>(deviation_spec(DeviationFamily::Sbm2Block, 0.0, 1000));
    CHECK(sbm0.block_matrix == std::vector<std::vector<double>>{{0.1, 0.1}, {0.1, 0.1}});
    const auto sbm5 = std::get<SbmSpec>(deviation_spec(DeviationFamily::Sbm2Block, 0.5, 1000));
    CHECK(sbm5.block_matrix[0][0] == Approx(0.15));
    CHECK(sbm5.block_matrix[0][1] == Approx(0.05));
    CHECK(densities(sbm5, 1000, 10, 11).mean() == Approx(0.10).margin(0.005));

    const auto pa1 = std::get<PaSpec>(deviation_spec(DeviationFamily::PaMixture, 1.0, 1000));
    CHECK(pa1.core_nodes == 0);
    CHECK(pa1.m_per_step == 50u);
    const auto pa0 = std::get<PaSpec>(deviation_spec(DeviationFamily::PaMixture, 0.0, 1000));
    CHECK(pa0.core_nodes == 1000);
    const auto pa3 = std::get<PaSpec>(deviation_spec(DeviationFamily::PaMixture, 0.3, 1000));
    CHECK(pa3.core_nodes == 700);

    // At delta = 0 the PA-mixture is ER(0.1) draw for draw.
    Engine e1(12);
    Engine e2(12);
    const Topology mix = generate_topology(pa0, 1000, e1);
    const Topology er = generate_topology(ErSpec{0.1}, 1000, e2);
    CHECK(mix.edges() == er.edges());

    for (auto family : {DeviationFamily::ErgmPlus, DeviationFamily::ErgmMinus}) {
        const auto e = std::get<ErgmSpec>(deviation_spec(family, 0.7, 1000));
        CHECK(std::fabs(e.theta_triangle) == Approx(0.7));
        CHECK((family == DeviationFamily::ErgmPlus) == (e.theta_triangle > 0));
        CHECK_FALSE(e.theta_edge.has_value());
    }
    const auto e0 = resolve_model(DeviationSpec{DeviationFamily::ErgmPlus, 0.0}, 1000, RngStream(3));
    CHECK(*std::get<ErgmSpec>(e0.spec).theta_edge == Approx(std::log(0.1 / 0.9)));
}

TEST_CASE("ERGM deviation families hold density near 10%", "[graphs]") {
    for (auto family : {DeviationFamily::ErgmPlus, DeviationFamily::ErgmMinus}) {
        const double mean = densities(DeviationSpec{family, 1.0}, 1000, 3, 13).mean();
        INFO(family_name(family));
        CHECK(mean == Approx(0.10).margin(0.01));
    }
}

TEST_CASE("hidden labelling", "[graphs]") {
    const Graph g = generate(ErSpec{0.05}, 1000, RngStream(14));
    CHECK(assign_hidden(g, 1.0, RngStream(1)).hidden_count() == 1000);
    const Graph h = assign_hidden(g, 0.1, RngStream(2));
    CHECK(h.hidden_count() == 100);
    CHECK(h.topology == g.topology);
    CHECK(assign_hidden(h, 0.2, RngStream(3)).hidden_count() == 200);
    CHECK_THROWS_AS(assign_hidden(g, 0.0001, RngStream(1)), DomainError);
    CHECK_THROWS_AS(assign_hidden(g, 0.0, RngStream(1)), DomainError);

    std::vector<int> hits(1000, 0);
    for (int r = 0; r < 500; ++r) {
        const Graph l = assign_hidden(g, 0.1, RngStream(15).child(r));
        for (std::size_t v = 0; v < 1000; ++v) hits[v] += l.hidden[v];
    }
    // Each node is hidden in 10% +- 4% of labelings, i.e. 50 +- 20 of 500.
    for (int h2 : hits) REQUIRE(std::abs(h2 - 50) <= 20);
}

TEST_CASE("degree extraction on ER", "[graphs]") {
    const Graph g = assign_hidden(generate(ErSpec{0.1}, 1000, RngStream(16)), 0.1, RngStream(17));
    const DegreeSample s = degrees(g);
    double sum_d = 0;
    double sum_du = 0;
    for (std::size_t v = 0; v < s.size(); ++v) {
        REQUIRE(s.d_u[v] <= s.d[v]);
        sum_d += double(s.d[v]);
        sum_du += double(s.d_u[v]);
    }
    CHECK(sum_d == Approx(2.0 * double(g.topology->edges())));
    CHECK(sum_du == Approx(0.1 * sum_d).epsilon(0.1));
}

TEST_CASE("generation is a pure function of the stream", "[graphs]") {
    for (const auto& model : std::vector<GraphModelSpec>{ErSpec{}, PaSpec{}, default_sbm(), SmallWorldSpec{}}) {
        const Graph a = generate(model, 400, RngStream(18));
        const Graph b = generate(model, 400, RngStream(18));
        std::ostringstream da;
        std::ostringstream db;
        write_edge_list(da, *a.topology);
        write_edge_list(db, *b.topology);
        CHECK(da.str() == db.str());
    }
}
