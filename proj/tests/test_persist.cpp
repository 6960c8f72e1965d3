#include "doctest.h"

#include <random>

#include "idop/persist.hpp"

using namespace idop;

namespace {

WeightedDigraph weighted_triangle() {
    return make_weighted_digraph(3, {{0, 1}, {1, 2}, {2, 0}}, {1.0, 2.0, 3.0});
}

WeightedDigraph random_weighted(int vertices, double density, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<int, int>> arrows;
    std::vector<double> weights;
    for (int a = 0; a < vertices; ++a)
        for (int b = 0; b < vertices; ++b)
            if (a != b && unif(rng) < density) {
                arrows.emplace_back(a, b);
                weights.push_back(std::round(unif(rng) * 10.0) / 2.0);  // ties likely
            }
    return make_weighted_digraph(vertices, arrows, weights);
}

}  // namespace

TEST_CASE("arrow filtration levels on the weighted triangle") {
    Filtration f = arrow_filtration(weighted_triangle());
    REQUIRE(f.level_count() == 4);
    CHECK(f.levels == std::vector<double>{1.0, 1.5, 2.5, 4.0});
    CHECK(f.graphs[0].arrows().empty());
    CHECK(f.graphs[1].arrows().size() == 1);
    CHECK(f.graphs[2].arrows().size() == 2);
    CHECK(f.graphs[3].arrows().size() == 3);
    // nested and final level complete
    CHECK(f.graphs[3] == weighted_triangle().graph);
}

TEST_CASE("equal weights collapse to two levels") {
    WeightedDigraph wd = make_weighted_digraph(3, {{0, 1}, {1, 2}}, {2.5, 2.5});
    Filtration f = arrow_filtration(wd);
    REQUIRE(f.level_count() == 2);
    CHECK(f.graphs[0].arrows().empty());
    CHECK(f.graphs[1].arrows().size() == 2);
}

TEST_CASE("empty graph gives a single empty level") {
    WeightedDigraph wd = make_weighted_digraph(3, {}, {});
    Filtration f = arrow_filtration(wd);
    REQUIRE(f.level_count() == 1);
    CHECK(f.graphs[0].arrows().empty());
}

TEST_CASE("levels match a brute-force threshold scan") {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        WeightedDigraph wd = random_weighted(5, 0.5, rng);
        Filtration f = arrow_filtration(wd);
        for (std::size_t l = 0; l < f.level_count(); ++l) {
            std::vector<std::pair<int, int>> expect;
            for (std::size_t i = 0; i < wd.graph.arrows().size(); ++i)
                if (wd.weights[i] < f.levels[l]) expect.push_back(wd.graph.arrows()[i]);
            std::sort(expect.begin(), expect.end());
            CHECK(f.graphs[l].arrows() == expect);
        }
        // last level is everything
        CHECK(f.graphs.back() == wd.graph);
    }
}

TEST_CASE("descending mode filters heavy arrows first") {
    Filtration f = arrow_filtration(weighted_triangle(), /*descending=*/true);
    REQUIRE(f.level_count() == 4);
    CHECK(f.graphs[0].arrows().empty());
    CHECK(f.graphs[1].arrows() == std::vector<std::pair<int, int>>{{2, 0}});  // weight 3 first
    CHECK(f.graphs[3].arrows().size() == 3);
}

TEST_CASE("path filtration caps the path length") {
    Digraph g(3, {{0, 1}, {1, 2}});
    Filtration f = path_filtration(g, 2);
    REQUIRE(f.level_count() == 3);
    CHECK(f.length_caps == std::vector<int>{0, 1, 2});
    CHECK(f.levels == std::vector<double>{0.0, 1.0, 2.0});
}

TEST_CASE("persistent betti at the final level equals ordinary betti") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 8; ++trial) {
        WeightedDigraph wd = random_weighted(5, 0.4, rng);
        Filtration f = arrow_filtration(wd);
        const double last = f.levels.back();
        for (int p = 0; p <= 2; ++p) {
            auto betti = path_homology<Z2>(wd.graph, p);
            CHECK(persistent_betti<Z2>(f, p, last, last) == betti[static_cast<size_t>(p)]);
        }
    }
}

TEST_CASE("triangle persistence pattern in dimension 1") {
    Filtration f = arrow_filtration(weighted_triangle());
    // the cycle closes only once all three arrows are present (level 3)
    for (std::size_t i = 0; i < f.level_count(); ++i)
        for (std::size_t j = i; j < f.level_count(); ++j) {
            const std::size_t expect = (i == 3 && j == 3) ? 1 : 0;
            CHECK(persistent_betti<Z2>(f, 1, f.levels[i], f.levels[j]) == expect);
            // oracle: per-level homology bounds the persistent rank
            auto bi = path_homology<Z2>(f.graphs[i], 1);
            auto bj = path_homology<Z2>(f.graphs[j], 1);
            CHECK(persistent_betti<Z2>(f, 1, f.levels[i], f.levels[j]) <=
                  std::min(bi[1], bj[1]));
        }
    CHECK_THROWS_AS(persistent_betti<Z2>(f, 1, f.levels[1], f.levels[0]), ValidationError);
    CHECK_THROWS_AS(persistent_betti<Z2>(f, 1, 0.77, f.levels.back()), ValidationError);
}

TEST_CASE("zero homology at both ends gives zero persistence") {
    Filtration f = arrow_filtration(weighted_triangle());
    CHECK(persistent_betti<Z2>(f, 2, f.levels.front(), f.levels.back()) == 0);
}

TEST_CASE("triangle barcode in dimension 1 is a single infinite bar") {
    Filtration f = arrow_filtration(weighted_triangle());
    Barcode code = barcode<Z2>(f, 1);
    REQUIRE(code.intervals.size() == 1);
    CHECK(code.intervals[0].birth == 4.0);  // the level containing all arrows
    CHECK(code.intervals[0].infinite());
    CHECK(code.intervals[0].multiplicity == 1);
}

TEST_CASE("edgeless graph: every vertex is an immortal component") {
    WeightedDigraph wd = make_weighted_digraph(4, {}, {});
    Filtration f = arrow_filtration(wd);
    Barcode code = barcode<Z2>(f, 0);
    REQUIRE(code.intervals.size() == 1);
    CHECK(code.intervals[0].birth == f.levels[0]);
    CHECK(code.intervals[0].infinite());
    CHECK(code.intervals[0].multiplicity == 4);
}

TEST_CASE("path filtration barcode of the line digraph in dimension 0") {
    Digraph g(3, {{0, 1}, {1, 2}});
    Filtration f = path_filtration(g, 2);
    Barcode code = barcode<Z2>(f, 0);
    // three components at k=0; two merge at k=1; one survives
    int dying = 0, immortal = 0;
    for (const auto& iv : code.intervals) {
        CHECK(iv.birth == 0.0);
        if (iv.infinite())
            immortal += iv.multiplicity;
        else {
            CHECK(iv.death == 1.0);
            dying += iv.multiplicity;
        }
    }
    CHECK(dying == 2);
    CHECK(immortal == 1);
}

TEST_CASE("seeded corpus: diagonal consistency, positivity, sum rule") {
    std::mt19937_64 rng(505);
    for (int trial = 0; trial < 50; ++trial) {
        WeightedDigraph wd = random_weighted(3 + trial % 4, 0.45, rng);
        Filtration f = arrow_filtration(wd);
        for (int p = 0; p <= 2; ++p) {
            // barcode construction itself throws on negative multiplicities
            Barcode code = (trial % 2 == 0) ? barcode<Z2>(f, p) : barcode<Rational>(f, p);
            for (std::size_t l = 0; l < f.level_count(); ++l) {
                const double a = f.levels[l];
                const std::size_t direct =
                    path_homology<Rational>(f.graphs[l], p)[static_cast<size_t>(p)];
                const std::size_t direct_z2 =
                    path_homology<Z2>(f.graphs[l], p)[static_cast<size_t>(p)];
                const std::size_t expected = (trial % 2 == 0) ? direct_z2 : direct;
                // diagonal: persistent betti equals the per-level betti
                const std::size_t diag = (trial % 2 == 0)
                                             ? persistent_betti<Z2>(f, p, a, a)
                                             : persistent_betti<Rational>(f, p, a, a);
                CHECK(diag == expected);
                // sum rule: intervals containing the level account for it all
                int covering = 0;
                for (const auto& iv : code.intervals)
                    if (iv.birth <= a && (iv.infinite() || a < iv.death))
                        covering += iv.multiplicity;
                CHECK(static_cast<std::size_t>(covering) == expected);
            }
        }
    }
}
