#include "fixtures.hpp"

#include "splitrag/pipeline.hpp"
#include "splitrag/router.hpp"

#include "doctest.h"

#include <cmath>
#include <limits>

using namespace splitrag;

namespace {

Subgraph from_triples(const KnowledgeGraph& kg, std::size_t id, std::vector<TripleId> triples) {
    Subgraph s;
    s.id = id;
    std::sort(triples.begin(), triples.end());
    std::set<EntityId> e;
    for (auto t : triples) {
        e.insert(kg.triple(t).head);
        e.insert(kg.triple(t).tail);
    }
    s.triples = triples;
    s.entities.assign(e.begin(), e.end());
    s.signature = signature_of(kg, s.triples);
    return s;
}

struct Toy {
    Dataset ds;
    Config cfg;
    Model model;

    explicit Toy(const std::string& name, Config c = {}) : ds(load_metaqa_style(fixtures::data_dir(name))), cfg(c) {
        model = build_model(ds, cfg);
    }
    Router router() const {
        return Router(ds.kg, ds.train, model.partition.subgraphs, model.allocation, cfg.router);
    }
    const QuestionRecord& train(const std::string& id) const {
        for (const auto& r : ds.train.records()) {
            if (r.id == id) return r;
        }
        throw Error("no training question " + id);
    }
};

}  // namespace

TEST_CASE("identical question ranks first with score 1 when alpha and beta are 0") {
    Config cfg;
    cfg.router.alpha = 0.0;
    cfg.router.beta = 0.0;
    Toy toy("toy_movie", cfg);
    auto router = toy.router();
    const auto& twin = toy.train("train18");
    auto sims = router.similar_questions(twin);
    REQUIRE_FALSE(sims.empty());
    CHECK(sims.front().score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(toy.ds.train.record(sims.front().index).contexts.entity_type_text() == twin.contexts.entity_type_text());
}

TEST_CASE("infinite rank decay leaves only the rank-0 candidate") {
    Config cfg;
    cfg.router.alpha = 0.0;
    cfg.router.beta = std::numeric_limits<double>::infinity();
    cfg.router.k = 30;
    Toy toy("toy_movie", cfg);
    auto sims = toy.router().similar_questions(toy.train("train05"));
    std::size_t nonzero = 0;
    for (const auto& s : sims) {
        if (s.score > 0.0) {
            ++nonzero;
            CHECK(s.rank == 0);
        }
    }
    CHECK(nonzero == 1);
}

TEST_CASE("similarity ranking over ten questions matches the brute-force scorer") {
    auto expected = fixtures::read_json(fixtures::source_dir() / "tests/fixtures/tfidf_expected.json");
    Config cfg;
    cfg.router.alpha = expected["alpha"];
    cfg.router.beta = expected["beta"];
    cfg.router.k = 10;
    Toy toy("tfidf10", cfg);
    auto router = toy.router();
    REQUIRE(toy.ds.test.size() == expected["probes"].size());
    for (std::size_t p = 0; p < toy.ds.test.size(); ++p) {
        const auto& probe = expected["probes"][p];
        CAPTURE(probe["question"].get<std::string>());
        CHECK(toy.ds.test[p].contexts.entity_type_text() == probe["qe"].get<std::string>());
        auto sims = router.similar_questions(toy.ds.test[p]);
        REQUIRE(sims.size() == probe["ranking"].size());
        for (std::size_t r = 0; r < sims.size(); ++r) {
            const auto& want = probe["ranking"][r];
            CHECK(sims[r].index == want["index"].get<std::size_t>());
            CHECK(sims[r].rank == want["rank"].get<std::size_t>());
            CHECK(std::abs(sims[r].cosine - want["cosine"].get<double>()) < 1e-9);
            CHECK(std::abs(sims[r].path_overlap - want["path_overlap"].get<double>()) < 1e-12);
            CHECK(std::abs(sims[r].score - want["score"].get<double>()) < 1e-9);
            if (r > 0) CHECK(sims[r].score <= sims[r - 1].score);
        }
    }
}

TEST_CASE("shared-director question adapts the stored co-director pattern") {
    // "sharing" and "share" stay distinct tokens, so the paraphrase scores
    // about 0.66 against the stored question.
    Config cfg;
    cfg.router.theta_sim = 0.6;
    Toy toy("toy_movie", cfg);
    auto router = toy.router();
    auto q = fixtures::question(toy.ds.kg, "new", "films sharing directors with [Inception] in which genres", {},
                                Preprocessor(Preprocessor::default_stopwords(), {{"films", "movie"}, {"film", "movie"}}));
    auto plan = router.route(q);
    CHECK(plan.mode == PlanMode::similar);
    CHECK(plan.top_similarity >= toy.cfg.router.theta_sim);
    REQUIRE(plan.steps.size() == 2);
    CHECK(plan.steps[0].pattern.key(toy.ds.kg) == "movie -directed_by-> director <-directed_by- movie");
    CHECK(plan.steps[0].anchors == fixtures::entities(toy.ds.kg, {"Inception"}));
    CHECK(plan.steps[1].pattern.key(toy.ds.kg) == "movie -has_genre-> genre");
    REQUIRE(plan.answer_pattern);
    CHECK(plan.answer_pattern->hops() == 3);
    for (const auto& a : plan.assignments) {
        for (auto j : a.subgraphs) CHECK(toy.model.allocation.owner.at(j) == a.agent);
    }
}

TEST_CASE("one-hop twin gives a single-assignment plan") {
    Toy toy("toy_movie");
    auto plan = toy.router().route(toy.train("train05"));
    CHECK(plan.mode == PlanMode::similar);
    REQUIRE(plan.assignments.size() == 1);
    CHECK(plan.assignments[0].match == 1.0);
}

TEST_CASE("stored step whose subgraphs lack the new anchor is rerouted and the plan marked mixed") {
    Toy toy("four_studios");
    auto router = toy.router();
    const auto& ref = toy.train("train00");  // who directed [Movie A0]
    auto q = fixtures::question(toy.ds.kg, "new", "who directed [Movie B1]");
    REQUIRE(toy.ds.train.record(router.similar_questions(q).front().index).id == "train00");
    auto plan = router.route(q);
    CHECK(plan.mode == PlanMode::similar);
    CHECK(plan.matched_question == ref.id);
    CHECK(plan.mixed);
    REQUIRE(plan.assignments.size() == 1);
    CHECK(plan.assignments[0].rerouted);
    bool holds = false;
    for (auto j : plan.assignments[0].subgraphs) holds |= toy.model.partition.subgraphs[j].has_entity(toy.ds.kg.entity("Movie B1"));
    CHECK(holds);
}

TEST_CASE("path-driven routing: load balancing and preconditions") {
    auto kg = fixtures::graph({{{"m1", "directed_by", "d1"}, {"m1", "has_genre", "g1"}},
                               {{"m1", "movie"}, {"d1", "director"}, {"g1", "genre"}}});
    auto dir = *kg.find_triple(kg.entity("m1"), kg.relation("directed_by"), kg.entity("d1"));
    auto gen = *kg.find_triple(kg.entity("m1"), kg.relation("has_genre"), kg.entity("g1"));
    QuestionBase base;
    base.add(fixtures::question(kg, "t", "who directed [m1]", {"m1", "directed_by", "d1"}));
    base.finalize();
    auto q = fixtures::question(kg, "q", "tell me about [m1]");

    SUBCASE("both patterns match one agent and its load rises") {
        std::vector<Subgraph> subs{from_triples(kg, 0, {dir, gen})};
        Allocation alloc;
        alloc.groups = {AgentGroup{0, {0}, {}, 1.0, false}};
        alloc.owner = {0};
        Router router(kg, base, subs, alloc, {});
        auto plan = router.plan_by_paths(q);
        CHECK(plan.mode == PlanMode::path_driven);
        REQUIRE(plan.assignments.size() == 2);
        CHECK(plan.assignments[0].agent == 0);
        CHECK(plan.assignments[1].agent == 0);
        CHECK(plan.confidence.at(0) == 1.0);
    }
    SUBCASE("equal confidence goes to the unloaded agent") {
        std::vector<Subgraph> subs{from_triples(kg, 0, {dir, gen}), from_triples(kg, 1, {gen})};
        Allocation alloc;
        alloc.groups = {AgentGroup{0, {0}, {}, 1.0, false}, AgentGroup{1, {1}, {}, 1.0, false}};
        alloc.owner = {0, 1};
        Router router(kg, base, subs, alloc, {});
        auto plan = router.plan_by_paths(q);
        REQUIRE(plan.assignments.size() == 2);
        REQUIRE(plan.steps[plan.assignments[0].step].pattern.key(kg) == "movie -directed_by-> director");
        CHECK(plan.assignments[0].agent == 0);
        CHECK(plan.assignments[1].agent == 1);
    }
    SUBCASE("no linked entity") {
        std::vector<Subgraph> subs{from_triples(kg, 0, {dir, gen})};
        Allocation alloc;
        alloc.groups = {AgentGroup{0, {0}, {}, 1.0, false}};
        alloc.owner = {0};
        Router router(kg, base, subs, alloc, {});
        auto bare = fixtures::question(kg, "b", "what is a movie");
        CHECK_THROWS_AS(router.plan_by_paths(bare), Error);
        CHECK(router.route(bare).unroutable);
    }
}

TEST_CASE("agent confidence is the clamped mean match") {
    RetrievalPlan plan;
    plan.assignments = {{0, 0, {}, 1.0, false}};
    CHECK(agent_confidence(plan).at(0) == 1.0);
    plan.assignments = {{0, 0, {}, 0.5, false}, {1, 0, {}, 1.0, false}};
    CHECK(agent_confidence(plan).at(0) == doctest::Approx(0.75));
    plan.assignments = {{0, 3, {}, 0.0, true}};
    CHECK(agent_confidence(plan).at(3) == 0.05);
}

TEST_CASE("routing is pure and plans survive a JSON round trip") {
    Toy toy("toy_movie");
    auto router = toy.router();
    for (const auto& q : toy.ds.test) {
        auto a = plan_to_json(router.route(q), toy.ds.kg);
        auto b = plan_to_json(router.route(q), toy.ds.kg);
        CHECK(a == b);
        CHECK(plan_to_json(plan_from_json(a, toy.ds.kg), toy.ds.kg) == a);
    }
}

TEST_CASE("router config validation") {
    RouterConfig cfg;
    cfg.theta_sim = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.alpha = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
