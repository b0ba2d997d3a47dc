#include "fixtures.hpp"

#include "splitrag/partition.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>

using namespace splitrag;

namespace {

// Synthetic subgraph with `size` entities and the given segment counts.
Subgraph synthetic(std::size_t id, std::size_t size, const std::vector<std::size_t>& counts) {
    Subgraph s;
    s.id = id;
    for (std::uint32_t i = 0; i < size; ++i) s.entities.push_back(EntityId{i});
    for (std::size_t i = 0; i < counts.size(); ++i) {
        SupportEntry e;
        e.segment.entities = {EntityId{static_cast<std::uint32_t>(i)}};
        e.count = counts[i];
        s.support.push_back(e);
    }
    return s;
}

QuestionBase base_of(const KnowledgeGraph& kg, const std::vector<std::vector<std::string>>& paths) {
    QuestionBase base;
    int n = 0;
    for (const auto& p : paths) {
        base.add(fixtures::question(kg, "q" + std::to_string(n++), "about [" + p.front() + "]", p));
    }
    base.finalize();
    return base;
}

KnowledgeGraph three_triples() {
    return fixtures::graph({{{"m1", "directed_by", "d1"}, {"m2", "directed_by", "d1"}, {"m1", "has_genre", "g1"}},
                            {{"m1", "movie"}, {"m2", "movie"}, {"d1", "director"}, {"g1", "genre"}}});
}

}  // namespace

TEST_CASE("segments sharing a pattern and an entity seed one candidate") {
    auto kg = three_triples();
    auto base = base_of(kg, {{"m1", "directed_by", "d1"}, {"m2", "directed_by", "d1"}});
    PartitionConfig cfg;
    cfg.eta_max = 4;
    auto seeds = Partitioner(kg, base, cfg).seed_candidates();
    REQUIRE(seeds.size() == 1);
    auto want = fixtures::entities(kg, {"m1", "m2", "d1"});
    std::sort(want.begin(), want.end());
    CHECK(seeds[0].entities == want);
    CHECK(is_connected(seeds[0], kg));
}

TEST_CASE("single segment seeds a candidate equal to it") {
    auto kg = three_triples();
    auto base = base_of(kg, {{"m1", "has_genre", "g1"}});
    auto seeds = Partitioner(kg, base, {}).seed_candidates();
    REQUIRE(seeds.size() == 1);
    CHECK(seeds[0].triples == fixtures::path(kg, {"m1", "has_genre", "g1"}).triple_ids(kg));
    CHECK(seeds[0].support.size() == 1);
}

TEST_CASE("same pattern on disjoint entities seeds two candidates that never merge") {
    auto kg = fixtures::graph({{{"m1", "directed_by", "d1"}, {"m2", "directed_by", "d2"}},
                               {{"m1", "movie"}, {"m2", "movie"}, {"d1", "director"}, {"d2", "director"}}});
    auto base = base_of(kg, {{"m1", "directed_by", "d1"}, {"m2", "directed_by", "d2"}});
    PartitionConfig cfg;
    cfg.eta_max = 4;
    cfg.theta_merge = -100.0;
    Partitioner p(kg, base, cfg);
    auto seeds = p.seed_candidates();
    REQUIRE(seeds.size() == 2);
    CHECK_FALSE(p.mergeable(seeds[0], seeds[1]));
    CHECK(p.run().subgraphs.size() == 2);
}

TEST_CASE("no path annotations is an error") {
    auto kg = three_triples();
    QuestionBase base;
    base.add(fixtures::question(kg, "q", "who directed [m1]"));
    base.finalize();
    CHECK_THROWS_AS(Partitioner(kg, base, {}), Error);
}

TEST_CASE("information gain of degenerate and uniform subgraphs") {
    PartitionConfig cfg;
    auto whole = subgraph_information_gain(synthetic(0, 3, {4}), cfg, 3);
    CHECK(whole.conditional_entropy == 0.0);
    CHECK(whole.size_penalty == 0.0);
    CHECK(whole.ig == 0.0);

    auto uniform = subgraph_information_gain(synthetic(0, 2, {1, 1}), cfg, 10);
    CHECK(uniform.conditional_entropy == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("empty support contributes zero entropy with a warning") {
    std::vector<Subgraph> s{synthetic(0, 2, {})};
    Diagnostics diag;
    auto r = information_gain(s, {}, 8, &diag);
    CHECK(r.entries[0].conditional_entropy == 0.0);
    CHECK(diag.warnings.size() == 1);
}

TEST_CASE("information gain matches the brute-force oracle") {
    auto cases = fixtures::read_json(fixtures::source_dir() / "tests/fixtures/ig_cases.json");
    REQUIRE(cases.size() >= 3);
    for (const auto& c : cases) {
        CAPTURE(c["name"].get<std::string>());
        PartitionConfig cfg;
        cfg.lambda = c["lambda"];
        cfg.entropy_sign = c["entropy_sign"];
        std::vector<Subgraph> subs;
        for (const auto& cand : c["candidates"]) {
            subs.push_back(synthetic(subs.size(), cand["size"], cand["support"].get<std::vector<std::size_t>>()));
        }
        auto r = information_gain(subs, cfg, c["total_entities"]);
        for (std::size_t i = 0; i < subs.size(); ++i) {
            const auto& want = c["candidates"][i];
            CHECK(std::abs(r.entries[i].conditional_entropy - want["conditional_entropy"].get<double>()) < 1e-9);
            CHECK(std::abs(r.entries[i].size_penalty - want["size_penalty"].get<double>()) < 1e-9);
            CHECK(std::abs(r.entries[i].ig - want["ig"].get<double>()) < 1e-9);
        }
        CHECK(std::abs(r.total - c["total"].get<double>()) < 1e-9);
    }
}

TEST_CASE("candidates sharing d1 merge with the hand-computed gain") {
    auto kg = three_triples();
    auto base = base_of(kg, {{"m1", "directed_by", "d1"}, {"m2", "directed_by", "d1"}, {"m1", "has_genre", "g1"}});
    PartitionConfig cfg;
    cfg.eta_max = 4;
    Partitioner p(kg, base, cfg);
    auto seeds = p.seed_candidates();
    REQUIRE(seeds.size() == 2);
    // {m1,m2,d1}: ln2 - 0.5*(3/4)ln(4/3); {m1,g1}: -0.5*(1/2)ln2; union: ln3.
    double a = std::log(2.0) - 0.5 * 0.75 * std::log(4.0 / 3.0);
    double b = -0.5 * 0.5 * std::log(2.0);
    CHECK(p.merge_gain(seeds[0], seeds[1]) == doctest::Approx(std::log(3.0) - a - b).epsilon(1e-12));
    auto out = p.greedy_merge(seeds);
    REQUIRE(out.subgraphs.size() == 1);
    CHECK(out.subgraphs[0].size() == 4);
    REQUIRE(out.merges.size() == 1);
    CHECK(out.merges[0].ig_after - out.merges[0].ig_before > cfg.theta_merge);
}

TEST_CASE("capacity blocks a merge whose union exceeds eta_max") {
    auto kg = fixtures::graph({{{"a", "r", "b"}, {"b", "r", "c"}, {"c", "s", "d"}, {"d", "s", "e"}, {"e", "u", "z"}},
                               {{"a", "t"}, {"b", "t"}, {"c", "t"}, {"d", "t"}, {"e", "t"}, {"z", "t"}}});
    auto base = base_of(kg, {{"a", "r", "b", "r", "c"}, {"c", "s", "d", "s", "e"}});
    PartitionConfig cfg;
    cfg.eta_max = 4;
    cfg.theta_merge = -100.0;
    Partitioner p(kg, base, cfg);
    auto seeds = p.seed_candidates();
    REQUIRE(seeds.size() == 2);
    CHECK_FALSE(p.mergeable(seeds[0], seeds[1]));
    auto result = p.run();
    REQUIRE(result.subgraphs.size() == 2);

    SUBCASE("colors: bridge, singleton and uncovered") {
        const auto& colors = result.colors.colors;
        CHECK(colors.at(kg.entity("a")).size() == 1);
        CHECK(colors.at(kg.entity("c")).size() == 2);
        CHECK(colors.at(kg.entity("z")).empty());
        CHECK(result.colors.boundary == fixtures::entities(kg, {"c"}));
        CHECK(result.colors.uncovered == fixtures::entities(kg, {"z"}));
    }
}

TEST_CASE("small subgraphs are absorbed by an overlapping neighbor") {
    auto kg = fixtures::graph({{{"m1", "directed_by", "d1"}, {"m2", "directed_by", "d1"}, {"m3", "directed_by", "d1"},
                                {"m1", "has_genre", "g1"}},
                               {{"m1", "movie"}, {"m2", "movie"}, {"m3", "movie"}, {"d1", "director"}, {"g1", "genre"}}});
    auto base = base_of(kg, {{"m1", "directed_by", "d1"}, {"m2", "directed_by", "d1"}, {"m3", "directed_by", "d1"},
                             {"m1", "has_genre", "g1"}});
    PartitionConfig cfg;
    cfg.eta_max = 5;
    cfg.theta_merge = 100.0;  // no greedy merges
    auto out = Partitioner(kg, base, cfg).run();
    REQUIRE(out.subgraphs.size() == 1);
    REQUIRE(out.absorptions.size() == 1);
    CHECK(out.absorptions[0].into.has_value());
}

TEST_CASE("partition output is deterministic and every triple has one owner") {
    auto kg = three_triples();
    auto base = base_of(kg, {{"m1", "directed_by", "d1"}, {"m2", "directed_by", "d1"}, {"m1", "has_genre", "g1"}});
    PartitionConfig cfg;
    cfg.eta_max = 4;
    auto one = partition_to_json(Partitioner(kg, base, cfg).run(), kg).dump();
    auto two = partition_to_json(Partitioner(kg, base, cfg).run(), kg).dump();
    CHECK(one == two);
    auto back = subgraphs_from_json(nlohmann::json::parse(one), kg);
    std::map<TripleId, int> owners;
    for (const auto& s : back) {
        for (auto t : s.triples) owners[t]++;
    }
    for (const auto& [t, n] : owners) CHECK(n == 1);
}

TEST_CASE("greedy result is never below the initial candidates and within the reachable best") {
    // Five 1-hop segments around two hubs; small enough to enumerate every
    // merge sequence.
    auto kg = fixtures::graph({{{"m1", "directed_by", "d1"},
                                {"m1", "has_genre", "g1"},
                                {"m2", "has_genre", "g1"},
                                {"m2", "starred", "a1"},
                                {"m3", "starred", "a1"},
                                {"m3", "release_year", "y1"}},
                               {{"m1", "movie"}, {"m2", "movie"}, {"m3", "movie"}, {"d1", "director"}, {"g1", "genre"},
                                {"a1", "actor"}, {"y1", "year"}}});
    auto base = base_of(kg, {{"m1", "directed_by", "d1"},
                             {"m1", "has_genre", "g1"},
                             {"m2", "has_genre", "g1"},
                             {"m2", "starred", "a1"},
                             {"m3", "starred", "a1"},
                             {"m3", "release_year", "y1"},
                             {"m1", "directed_by", "d1"}});
    for (double lambda : {0.0, 0.5, 2.0}) {
        CAPTURE(lambda);
        PartitionConfig cfg;
        cfg.lambda = lambda;
        cfg.eta_max = 5;
        cfg.tau_min = 1;
        Partitioner p(kg, base, cfg);
        auto seeds = p.seed_candidates();
        REQUIRE(seeds.size() <= 6);
        auto total = [&](const std::vector<Subgraph>& s) { return information_gain(s, cfg, kg.entity_count()).total; };

        double best = -1e300;
        std::function<void(std::vector<Subgraph>)> explore = [&](std::vector<Subgraph> s) {
            best = std::max(best, total(s));
            for (std::size_t i = 0; i < s.size(); ++i) {
                for (std::size_t j = i + 1; j < s.size(); ++j) {
                    if (!p.mergeable(s[i], s[j])) continue;
                    auto next = s;
                    next[i] = p.unite(s[i], s[j]);
                    next.erase(next.begin() + static_cast<std::ptrdiff_t>(j));
                    explore(next);
                }
            }
        };
        explore(seeds);

        double initial = total(seeds);
        auto out = p.greedy_merge(seeds);
        double greedy = total(out.subgraphs);
        CHECK(greedy >= initial - 1e-12);
        CHECK(greedy <= best + 1e-12);
        for (const auto& m : out.merges) CHECK(m.delta > cfg.theta_merge);
        for (const auto& s : out.subgraphs) {
            CHECK(s.size() <= 5);
            CHECK(is_connected(s, kg));
        }
    }
}

TEST_CASE("eta_max and tau_min defaults") {
    PartitionConfig cfg;
    CHECK(cfg.resolved_eta_max(50) == 13);
    CHECK(cfg.resolved_eta_max(3) == 2);
    CHECK(cfg.resolved_tau_min(50) == 3);
    CHECK(cfg.resolved_tau_min(3) == 2);
    cfg.lambda = -1.0;
    CHECK_THROWS_AS(cfg.validate(10), ConfigError);
}
