#include "fixtures.hpp"

#include "splitrag/fusion.hpp"

#include "doctest.h"

#include <cmath>

using namespace splitrag;

namespace {

KnowledgeGraph conflict_graph() {
    return fixtures::graph({{{"m1", "release_year", "1999"},
                             {"m1", "release_year", "2001"},
                             {"a", "likes", "b"},
                             {"a", "dislikes", "b"},
                             {"m1", "has_genre", "Drama"},
                             {"m1", "has_genre", "Comedy"}},
                            {{"m1", "movie"}, {"1999", "year"}, {"2001", "year"}, {"a", "person"}, {"b", "person"},
                             {"Drama", "genre"}, {"Comedy", "genre"}},
                            {"release_year"},
                            {{"likes", "dislikes"}}});
}

TripleId tid(const KnowledgeGraph& kg, const char* h, const char* r, const char* t) {
    return *kg.find_triple(kg.entity(h), kg.relation(r), kg.entity(t));
}

RetrievalResult result_with(std::size_t agent, std::vector<TripleId> triples) {
    RetrievalResult r;
    r.agent = agent;
    std::sort(triples.begin(), triples.end());
    r.triples = triples;
    return r;
}

ConflictGraph weighted(std::vector<double> w, std::vector<std::pair<std::size_t, std::size_t>> edges) {
    ConflictGraph g;
    for (std::size_t i = 0; i < w.size(); ++i) g.vertices.push_back(static_cast<TripleId>(i));
    g.score = std::move(w);
    for (auto [a, b] : edges) g.edges.push_back({std::min(a, b), std::max(a, b), ConflictRule::functional});
    return g;
}

RetrievalPlan genre_plan(const KnowledgeGraph& kg) {
    RetrievalPlan plan;
    plan.anchors = {kg.entity("m1")};
    plan.answer_pattern = pattern_of(kg, fixtures::path(kg, {"m1", "has_genre", "Drama"}));
    return plan;
}

}  // namespace

TEST_CASE("aggregation unions triples with provenance") {
    auto kg = conflict_graph();
    auto y1 = tid(kg, "m1", "release_year", "1999");
    auto g1 = tid(kg, "m1", "has_genre", "Drama");
    std::map<std::size_t, double> conf{{0, 0.9}, {1, 0.6}};

    std::vector<RetrievalResult> disjoint{result_with(0, {y1}), result_with(1, {g1})};
    CHECK(aggregate(disjoint, conf).triples.size() == 2);

    std::vector<RetrievalResult> shared{result_with(0, {y1}), result_with(1, {y1})};
    auto agg = aggregate(shared, conf);
    REQUIRE(agg.triples.size() == 1);
    CHECK(agg.provenance.at(y1) == std::vector<std::size_t>{0, 1});
    CHECK(agg.score.at(y1) == doctest::Approx(1.5));

    std::vector<RetrievalResult> blank{result_with(0, {})};
    CHECK(aggregate(blank, conf).empty);
    CHECK_THROWS_AS(aggregate(std::vector<RetrievalResult>{}, conf), Error);
}

TEST_CASE("conflict rules") {
    auto kg = conflict_graph();
    ConflictRule rule{};
    CHECK(conflict(kg, kg.triple(tid(kg, "m1", "release_year", "1999")), kg.triple(tid(kg, "m1", "release_year", "2001")),
                   &rule));
    CHECK(rule == ConflictRule::functional);
    CHECK(conflict(kg, kg.triple(tid(kg, "a", "likes", "b")), kg.triple(tid(kg, "a", "dislikes", "b")), &rule));
    CHECK(rule == ConflictRule::negation);
    CHECK(conflict(kg, kg.triple(tid(kg, "a", "dislikes", "b")), kg.triple(tid(kg, "a", "likes", "b"))));
    auto same = kg.triple(tid(kg, "m1", "release_year", "1999"));
    CHECK_FALSE(conflict(kg, same, same));
    CHECK_FALSE(conflict(kg, kg.triple(tid(kg, "m1", "has_genre", "Drama")), kg.triple(tid(kg, "m1", "has_genre", "Comedy"))));

    std::vector<TripleId> all;
    std::map<TripleId, double> score;
    for (TripleId t = 0; t < kg.triple_count(); ++t) {
        all.push_back(t);
        score[t] = 1.0;
    }
    auto g = detect_conflicts(kg, all, score);
    CHECK(g.edges.size() == 2);
    for (const auto& e : g.edges) {
        CHECK(e.a < e.b);
        CHECK(g.conflicting(e.a, e.b));
        CHECK(g.conflicting(e.b, e.a));
    }
}

TEST_CASE("resolution keeps the heaviest conflict-free set") {
    SUBCASE("pair") {
        auto r = resolve(weighted({0.9, 0.4}, {{0, 1}}));
        CHECK(r.kept == std::vector<TripleId>{0});
        CHECK(r.removed == std::vector<TripleId>{1});
    }
    SUBCASE("triangle") {
        auto r = resolve(weighted({0.5, 0.5, 0.9}, {{0, 1}, {1, 2}, {0, 2}}));
        CHECK(r.kept == std::vector<TripleId>{2});
    }
    SUBCASE("edgeless") {
        auto r = resolve(weighted({0.1, 0.2, 0.3}, {}));
        CHECK(r.kept.size() == 3);
        CHECK_FALSE(r.approximate);
    }
}

TEST_CASE("resolution matches the exhaustive optimum") {
    auto cases = fixtures::read_json(fixtures::source_dir() / "tests/fixtures/mwis_cases.json");
    REQUIRE(cases.size() == 200);
    for (const auto& c : cases) {
        auto g = weighted(c["weights"].get<std::vector<double>>(),
                          c["edges"].get<std::vector<std::pair<std::size_t, std::size_t>>>());
        auto r = resolve(g);
        CHECK(std::abs(r.kept_weight - c["best"].get<double>()) < 1e-9);
        for (std::size_t i = 0; i < r.kept.size(); ++i) {
            for (std::size_t j = i + 1; j < r.kept.size(); ++j) CHECK_FALSE(g.conflicting(r.kept[i], r.kept[j]));
        }
    }
}

TEST_CASE("large components fall back to greedy and stay conflict-free") {
    std::vector<double> w;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < 30; ++i) {
        w.push_back(1.0 + static_cast<double>(i % 7) / 10.0);
        if (i > 0) edges.emplace_back(i - 1, i);
    }
    auto g = weighted(w, edges);
    auto r = resolve(g);
    CHECK(r.approximate);
    for (std::size_t i = 0; i < r.kept.size(); ++i) {
        for (std::size_t j = i + 1; j < r.kept.size(); ++j) CHECK_FALSE(g.conflicting(r.kept[i], r.kept[j]));
    }
}

TEST_CASE("stub answer extraction") {
    auto kg = conflict_graph();
    auto drama = tid(kg, "m1", "has_genre", "Drama");
    auto comedy = tid(kg, "m1", "has_genre", "Comedy");
    auto plan = genre_plan(kg);

    SUBCASE("single candidate") {
        std::vector<TripleId> clean{drama};
        auto a = extract_answer(kg, clean, {{drama, 1.0}}, plan);
        CHECK(a.entities == std::vector<std::string>{"Drama"});
    }
    SUBCASE("two candidates ordered by score") {
        std::vector<TripleId> clean{drama, comedy};
        auto a = extract_answer(kg, clean, {{drama, 0.6}, {comedy, 0.9}}, plan);
        CHECK(a.entities == std::vector<std::string>{"Comedy", "Drama"});
        CHECK(a.scores == std::vector<double>{0.9, 0.6});
    }
    SUBCASE("nothing clean") {
        auto a = extract_answer(kg, std::vector<TripleId>{}, {}, plan);
        CHECK(a.text == "unknown");
        CHECK(a.no_evidence);
        CHECK(a.entities.empty());
    }
}

TEST_CASE("fuse drops the weaker side of a conflict before answering") {
    auto kg = conflict_graph();
    auto y1 = tid(kg, "m1", "release_year", "1999");
    auto y2 = tid(kg, "m1", "release_year", "2001");
    RetrievalPlan plan;
    plan.anchors = {kg.entity("m1")};
    plan.answer_pattern = pattern_of(kg, fixtures::path(kg, {"m1", "release_year", "1999"}));
    plan.confidence = {{0, 0.9}, {1, 0.4}};
    std::vector<RetrievalResult> results{result_with(0, {y1}), result_with(1, {y2})};
    auto q = fixtures::question(kg, "q", "when was [m1] released");
    Gateway stub{GatewayConfig{}};

    auto with = fuse(kg, results, q, plan, stub, {true});
    CHECK(with.resolution.removed == std::vector<TripleId>{y2});
    CHECK(with.answer.entities == std::vector<std::string>{"1999"});

    auto without = fuse(kg, results, q, plan, stub, {false});
    CHECK(without.answer.entities == std::vector<std::string>{"1999", "2001"});
}
