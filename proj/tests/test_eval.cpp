#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfw/eval.hpp"
#include "test_helpers.hpp"

using namespace cfw;

namespace {

std::vector<Index> iota_items(Index n) {
    std::vector<Index> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

}  // namespace

TEST_CASE("recommend: empty profile yields an empty list") {
    InteractionMatrix urm(2, 3, {{1, 0, 1.0}});
    SimilarityMatrix s(3, {{0, 1, 0.5}});
    auto items = iota_items(3);
    CHECK(recommend(urm, 0, s, items, 5).empty());
}

TEST_CASE("recommend: single similarity edge gives a single path") {
    InteractionMatrix urm(1, 3, {{0, 0, 2.0}});
    SimilarityMatrix s(3, {{0, 2, 0.5}});
    auto items = iota_items(3);
    auto out = recommend(urm, 0, s, items, 3);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == 2);
}

TEST_CASE("recommend never returns profile items") {
    auto urm = testutil::random_matrix(6, 8, 0.5, 3);
    auto sm = testutil::random_matrix(8, 8, 0.6, 4, 1.0);
    std::vector<Entry> offdiag;
    for (const auto& e : sm.entries())
        if (e.row != e.col) offdiag.push_back(e);
    SimilarityMatrix s(8, std::move(offdiag));
    auto items = iota_items(8);
    for (Index u = 0; u < 6; ++u) {
        auto seen = urm.row_indices(u);
        for (Index rec : recommend(urm, u, s, items, 8))
            CHECK(!std::binary_search(seen.begin(), seen.end(), rec));
    }
}

TEST_CASE("recommend matches a dense argsort oracle") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto urm = testutil::random_matrix(5, 7, 0.4, seed);
        auto sm = testutil::random_matrix(7, 7, 0.5, seed + 30, 1.0);
        std::vector<Entry> offdiag;
        for (const auto& e : sm.entries())
            if (e.row != e.col) offdiag.push_back(e);
        SimilarityMatrix s(7, std::move(offdiag));
        auto du = testutil::to_dense(urm);
        auto ds = testutil::to_dense(sm);
        auto items = iota_items(7);
        for (Index u = 0; u < 5; ++u) {
            std::vector<std::pair<double, Index>> scored;
            for (Index j = 0; j < 7; ++j) {
                if (du[u][j] != 0) continue;  // seen
                double score = 0;
                for (Index i = 0; i < 7; ++i)
                    if (i != j) score += du[u][i] * ds[i][j];
                if (score != 0) scored.push_back({score, j});
            }
            std::stable_sort(scored.begin(), scored.end(), [](auto a, auto b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            auto out = recommend(urm, u, s, items, 3);
            REQUIRE(out.size() == std::min<std::size_t>(3, scored.size()));
            for (std::size_t t = 0; t < out.size(); ++t)
                CHECK(out[t] == scored[t].second);
        }
    }
}

TEST_CASE("recommend restricts to the candidate set") {
    InteractionMatrix urm(1, 4, {{0, 0, 1.0}});
    SimilarityMatrix s(4, {{0, 1, 0.9}, {0, 2, 0.5}, {0, 3, 0.7}});
    std::vector<Index> candidates = {2, 3};
    auto out = recommend(urm, 0, s, candidates, 4);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == 3);
    CHECK(out[1] == 2);
}

TEST_CASE("ranking_metrics: ideal ranking scores one everywhere") {
    std::vector<Index> ranked = {4, 7, 9};
    std::vector<Index> relevant = {4, 7, 9};
    auto r = ranking_metrics(ranked, relevant, 3);
    CHECK(r.precision == doctest::Approx(1.0));
    CHECK(r.recall == doctest::Approx(1.0));
    CHECK(r.mrr == doctest::Approx(1.0));
    CHECK(r.map == doctest::Approx(1.0));
    CHECK(r.ndcg == doctest::Approx(1.0));
}

TEST_CASE("ranking_metrics: single hit at rank 3 of 5") {
    // relevant = {9}, ranked = [1,2,9,4,5], cutoff 5.
    std::vector<Index> ranked = {1, 2, 9, 4, 5};
    std::vector<Index> relevant = {9};
    auto r = ranking_metrics(ranked, relevant, 5);
    CHECK(r.precision == doctest::Approx(0.2));
    CHECK(r.recall == doctest::Approx(1.0));
    CHECK(r.mrr == doctest::Approx(1.0 / 3.0));
    CHECK(r.map == doctest::Approx(1.0 / 3.0));
    CHECK(r.ndcg == doctest::Approx(1.0 / std::log2(4.0)));  // 1/log2(1+3)
}

TEST_CASE("ranking_metrics: no hits scores zero") {
    std::vector<Index> ranked = {1, 2, 3};
    std::vector<Index> relevant = {7};
    auto r = ranking_metrics(ranked, relevant, 3);
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.mrr == 0.0);
    CHECK(r.map == 0.0);
    CHECK(r.ndcg == 0.0);
}

TEST_CASE("ranking_metrics: map denominator is min(|relevant|, cutoff)") {
    // 3 relevant, cutoff 2, both slots hit: AP = (1 + 1) / 2 = 1.
    std::vector<Index> ranked = {5, 6};
    std::vector<Index> relevant = {5, 6, 7};
    auto r = ranking_metrics(ranked, relevant, 2);
    CHECK(r.map == doctest::Approx(1.0));
    CHECK(r.recall == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("ranking_metrics rejects an empty relevant set") {
    std::vector<Index> ranked = {1};
    std::vector<Index> relevant;
    CHECK_THROWS_AS(ranking_metrics(ranked, relevant, 1), std::invalid_argument);
}

TEST_CASE("precision*cutoff equals recall*|relevant| on full lists") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Index> ranked(10);
        std::iota(ranked.begin(), ranked.end(), 0);
        std::shuffle(ranked.begin(), ranked.end(), rng);
        std::vector<Index> relevant;
        for (Index i = 0; i < 10; ++i)
            if (rng() % 3 == 0) relevant.push_back(i);
        if (relevant.empty()) relevant.push_back(0);
        int cutoff = 1 + int(rng() % 10);
        auto r = ranking_metrics(ranked, relevant, cutoff);
        CHECK(r.precision * cutoff ==
              doctest::Approx(r.recall * double(relevant.size())).epsilon(1e-12));
    }
}

TEST_CASE("metrics ignore permutations below the cutoff") {
    std::vector<Index> a = {1, 9, 3, 4, 5, 6};
    std::vector<Index> b = {1, 9, 3, 6, 5, 4};
    std::vector<Index> relevant = {4, 9};
    auto ra = ranking_metrics(a, relevant, 3);
    auto rb = ranking_metrics(b, relevant, 3);
    CHECK(ra.precision == rb.precision);
    CHECK(ra.recall == rb.recall);
    CHECK(ra.mrr == rb.mrr);
    CHECK(ra.map == rb.map);
    CHECK(ra.ndcg == rb.ndcg);
}

TEST_CASE("evaluate_ranking matches the per-user composition oracle") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto profile = testutil::random_matrix(8, 10, 0.4, seed);
        auto relevant = testutil::random_matrix(8, 10, 0.3, seed + 40);
        auto sm = testutil::random_matrix(10, 10, 0.5, seed + 80, 1.0);
        std::vector<Entry> offdiag;
        for (const auto& e : sm.entries())
            if (e.row != e.col) offdiag.push_back(e);
        SimilarityMatrix s(10, std::move(offdiag));
        auto items = iota_items(10);
        const int cutoff = 4;

        double p = 0, rc = 0, mrr = 0, map = 0, ndcg = 0;
        int evaluated = 0, skipped = 0;
        for (Index u = 0; u < 8; ++u) {
            std::vector<Index> rel;
            for (Index j : relevant.row_indices(u))
                rel.push_back(j);
            if (profile.row_indices(u).empty()) continue;  // no profile: ignored
            if (rel.empty()) {
                ++skipped;
                continue;
            }
            auto ranked = recommend(profile, u, s, items, cutoff);
            auto row = ranking_metrics(ranked, rel, cutoff);
            p += row.precision;
            rc += row.recall;
            mrr += row.mrr;
            map += row.map;
            ndcg += row.ndcg;
            ++evaluated;
        }
        if (evaluated == 0) continue;
        auto report = evaluate_ranking(s, profile, relevant, items, cutoff);
        CHECK(report.n_users_evaluated == evaluated);
        CHECK(report.precision == doctest::Approx(p / evaluated).epsilon(1e-12));
        CHECK(report.recall == doctest::Approx(rc / evaluated).epsilon(1e-12));
        CHECK(report.mrr == doctest::Approx(mrr / evaluated).epsilon(1e-12));
        CHECK(report.map == doctest::Approx(map / evaluated).epsilon(1e-12));
        CHECK(report.ndcg == doctest::Approx(ndcg / evaluated).epsilon(1e-12));
    }
}

TEST_CASE("evaluate_ranking throws when no user is evaluable") {
    InteractionMatrix profile(2, 3, {});
    InteractionMatrix relevant(2, 3, {{0, 1, 1.0}});
    SimilarityMatrix s(3, {{0, 1, 0.5}});
    auto items = iota_items(3);
    CHECK_THROWS_AS(evaluate_ranking(s, profile, relevant, items, 5),
                    std::runtime_error);
}

TEST_CASE("evaluate_cold: a similarity built for the answer scores perfectly") {
    // 5 users, 10 items. Build a split, then wire each cold item to a warm
    // item every consumer of the cold item also consumed.
    std::vector<Entry> entries;
    for (Index u = 0; u < 5; ++u)
        for (Index i = 0; i < 10; ++i) entries.push_back({u, i, 1.0});
    InteractionMatrix urm(5, 10, std::move(entries));
    auto bundle = split_cold_items(urm, 0.6, 0.2, 0.2, 11);

    Index warm = bundle.items_with(SplitLabel::A)[0];
    std::vector<Entry> sims;
    auto cold = bundle.items_with(SplitLabel::C);
    for (std::size_t t = 0; t < cold.size(); ++t)
        sims.push_back({warm, cold[t], 1.0 - 0.1 * double(t)});
    SimilarityMatrix s(10, std::move(sims));

    auto report = evaluate_cold(s, bundle, int(cold.size()));
    CHECK(report.recall == doctest::Approx(1.0));
    CHECK(report.n_users_evaluated == 5);
}

TEST_CASE("evaluate_cold matches a brute-force replay") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto urm = testutil::random_matrix(12, 15, 0.5, seed);
        auto bundle = split_cold_items(urm, 0.6, 0.2, 0.2, seed + 3);
        auto sm = testutil::random_matrix(15, 15, 0.4, seed + 90, 1.0);
        std::vector<Entry> offdiag;
        for (const auto& e : sm.entries())
            if (e.row != e.col) offdiag.push_back(e);
        SimilarityMatrix s(15, std::move(offdiag));

        // Profile = all warm interactions; relevant = cold interactions.
        std::vector<Entry> warm_entries;
        for (const auto& e : bundle.warm_train().entries())
            warm_entries.push_back(e);
        for (const auto& e : bundle.warm_validation().entries())
            warm_entries.push_back(e);
        InteractionMatrix profile(12, 15, std::move(warm_entries));
        auto cold = bundle.items_with(SplitLabel::C);
        const int cutoff = 5;
        MetricReport expected;
        try {
            expected = evaluate_ranking(s, profile, bundle.cold_test(), cold,
                                        cutoff);
        } catch (const std::runtime_error&) {
            continue;  // no evaluable users in this draw
        }
        auto got = evaluate_cold(s, bundle, cutoff);
        CHECK(got.n_users_evaluated == expected.n_users_evaluated);
        CHECK(got.precision == doctest::Approx(expected.precision).epsilon(1e-12));
        CHECK(got.map == doctest::Approx(expected.map).epsilon(1e-12));
        CHECK(got.ndcg == doctest::Approx(expected.ndcg).epsilon(1e-12));
    }
}

TEST_CASE("metric_by_name resolves every metric and rejects unknowns") {
    MetricReport r;
    r.precision = 1;
    r.recall = 2;
    r.mrr = 3;
    r.map = 4;
    r.ndcg = 5;
    CHECK(metric_by_name(r, "precision") == 1);
    CHECK(metric_by_name(r, "recall") == 2);
    CHECK(metric_by_name(r, "mrr") == 3);
    CHECK(metric_by_name(r, "map") == 4);
    CHECK(metric_by_name(r, "ndcg") == 5);
    CHECK_THROWS_AS(metric_by_name(r, "auc"), std::invalid_argument);
}

TEST_CASE("expand_grid: cartesian product in key order") {
    GridSpec spec;
    spec.values["a"] = {"1", "2"};
    spec.values["b"] = {"x", "y", "z"};
    auto points = expand_grid(spec);
    REQUIRE(points.size() == 6);
    CHECK(points[0] == GridPoint{{"a", "1"}, {"b", "x"}});
    CHECK(points[1] == GridPoint{{"a", "1"}, {"b", "y"}});
    CHECK(points[5] == GridPoint{{"a", "2"}, {"b", "z"}});
}

TEST_CASE("expand_grid: empty spec gives a single empty point") {
    auto points = expand_grid(GridSpec{});
    REQUIRE(points.size() == 1);
    CHECK(points[0].empty());
}

TEST_CASE("grid_search: singleton grid returns its only point") {
    std::vector<GridPoint> points = {{{"k", "5"}}};
    auto result = grid_search(points, [](const GridPoint&) {
        MetricReport r;
        r.map = 0.5;
        return r;
    }, "map");
    CHECK(result.best == points[0]);
    REQUIRE(result.leaderboard.size() == 1);
    CHECK(result.leaderboard[0].second == 0.5);
}

TEST_CASE("grid_search picks the dominant point") {
    std::vector<GridPoint> points;
    for (int k : {1, 2, 3, 4}) points.push_back({{"k", std::to_string(k)}});
    auto result = grid_search(points, [](const GridPoint& p) {
        MetricReport r;
        r.map = p.at("k") == "3" ? 0.9 : 0.1;
        return r;
    }, "map");
    CHECK(result.best.at("k") == "3");
    CHECK(result.leaderboard.front().second == doctest::Approx(0.9));
}

TEST_CASE("grid_search: leaderboard is sorted and ties keep grid order") {
    std::vector<GridPoint> points = {{{"k", "1"}}, {{"k", "2"}}, {{"k", "3"}}};
    auto result = grid_search(points, [](const GridPoint& p) {
        MetricReport r;
        r.map = p.at("k") == "2" ? 0.2 : 0.7;  // 1 and 3 tie at the top
        return r;
    }, "map");
    CHECK(result.best.at("k") == "1");
    REQUIRE(result.leaderboard.size() == 3);
    CHECK(result.leaderboard[0].first.at("k") == "1");
    CHECK(result.leaderboard[1].first.at("k") == "3");
    CHECK(result.leaderboard[2].first.at("k") == "2");
}

TEST_CASE("grid_search tolerates partial failures, throws on total failure") {
    std::vector<GridPoint> points = {{{"k", "1"}}, {{"k", "2"}}};
    auto result = grid_search(points, [](const GridPoint& p) {
        if (p.at("k") == "1") throw std::runtime_error("bad point");
        MetricReport r;
        r.map = 0.3;
        return r;
    }, "map");
    CHECK(result.best.at("k") == "2");
    CHECK(result.leaderboard.size() == 1);

    CHECK_THROWS_AS(grid_search(points, [](const GridPoint&) -> MetricReport {
        throw std::runtime_error("always");
    }, "map"), std::runtime_error);
}

TEST_CASE("grid_search is deterministic") {
    std::vector<GridPoint> points;
    for (int k = 0; k < 10; ++k) points.push_back({{"k", std::to_string(k)}});
    auto eval = [](const GridPoint& p) {
        MetricReport r;
        r.map = double((std::stoi(p.at("k")) * 7) % 10) / 10.0;
        return r;
    };
    auto a = grid_search(points, eval, "map");
    auto b = grid_search(points, eval, "map");
    CHECK(a.best == b.best);
    CHECK(a.leaderboard == b.leaderboard);
}
