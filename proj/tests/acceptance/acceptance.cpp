// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Tolerances and seeds are fixed here.

#include "fixtures.hpp"

#include "splitrag/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

using namespace splitrag;

namespace fs = std::filesystem;

namespace {

constexpr double kIgTolerance = 1e-9;
constexpr double kMetricTolerance = 1e-12;
constexpr double kMergeLogTolerance = 1e-9;
constexpr std::size_t kRandomGraphs = 20;
constexpr std::uint32_t kGraphSeed = 20240611;
constexpr std::uint32_t kConflictSeed = 77;
constexpr double kPartitionBudget = 10.0;  // seconds
constexpr double kToyBudget = 30.0;         // seconds
constexpr double kMaxReductionRatio = 0.6;

using Clock = std::chrono::steady_clock;

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", x);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

// ---------------------------------------------------------------------------
// Random movie-style graphs with walk annotations.

struct RandomCase {
    KnowledgeGraph kg;
    QuestionBase base;
};

RandomCase random_case(std::uint32_t seed) {
    std::mt19937 rng(seed);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

    std::size_t movies = 15 + pick(26);
    std::size_t directors = 4 + pick(movies / 3);
    std::size_t actors = 6 + pick(movies / 2);
    std::size_t genres = 3 + pick(5);
    std::size_t years = 4 + pick(8);

    fixtures::GraphSpec spec;
    auto add_group = [&](const std::string& prefix, const std::string& type, std::size_t n) {
        std::vector<std::string> names;
        for (std::size_t i = 0; i < n; ++i) {
            names.push_back(prefix + std::to_string(i));
            spec.types.emplace_back(names.back(), type);
        }
        return names;
    };
    auto m = add_group("movie", "movie", movies);
    auto d = add_group("director", "director", directors);
    auto a = add_group("actor", "actor", actors);
    auto g = add_group("genre", "genre", genres);
    auto y = add_group("year", "year", years);

    std::set<std::tuple<std::string, std::string, std::string>> seen;
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> adj;  // entity -> (relation, neighbor)
    auto link = [&](const std::string& h, const std::string& r, const std::string& t) {
        if (!seen.insert({h, r, t}).second) return;
        spec.triples.push_back({h, r, t});
        adj[h].emplace_back(r, t);
        adj[t].emplace_back(r, h);
    };
    for (const auto& movie : m) {
        link(movie, "directed_by", d[pick(d.size())]);
        if (pick(4) == 0) link(movie, "directed_by", d[pick(d.size())]);
        for (std::size_t i = 0, n = 1 + pick(3); i < n; ++i) link(movie, "starred_actors", a[pick(a.size())]);
        for (std::size_t i = 0, n = 1 + pick(2); i < n; ++i) link(movie, "has_genre", g[pick(g.size())]);
        link(movie, "release_year", y[pick(y.size())]);
    }

    RandomCase out{fixtures::graph(spec), {}};
    std::size_t questions = 30 + pick(31);
    for (std::size_t q = 0; q < questions; ++q) {
        std::string at = m[pick(m.size())];
        std::vector<std::string> walk{at};
        std::set<std::string> visited{at};
        std::size_t hops = 1 + pick(3);
        for (std::size_t h = 0; h < hops; ++h) {
            std::vector<std::pair<std::string, std::string>> options;
            for (const auto& e : adj[at]) {
                if (!visited.contains(e.second)) options.push_back(e);
            }
            if (options.empty()) break;
            auto [r, next] = options[pick(options.size())];
            walk.push_back(r);
            walk.push_back(next);
            visited.insert(next);
            at = next;
        }
        if (walk.size() < 3) continue;
        out.base.add(fixtures::question(out.kg, "q" + std::to_string(q), "about [" + walk.front() + "]", walk));
    }
    out.base.finalize();
    return out;
}

struct RandomRun {
    RandomCase c;
    PartitionResult partition;
};

std::vector<RandomRun>& random_runs() {
    static std::vector<RandomRun> runs;
    return runs;
}

Outcome partition_validity() {
    Outcome o;
    PartitionConfig cfg;
    auto t0 = Clock::now();
    std::size_t merges = 0;
    std::size_t subgraphs = 0;
    for (std::size_t i = 0; i < kRandomGraphs; ++i) {
        auto c = random_case(kGraphSeed + static_cast<std::uint32_t>(i));
        if (c.kg.entity_count() > 200) o.fail("graph " + std::to_string(i) + " exceeds 200 entities");
        Partitioner p(c.kg, c.base, cfg);
        auto r = p.run();
        for (const auto& s : r.subgraphs) {
            if (s.size() > r.eta_max) o.fail("graph " + std::to_string(i) + " has a subgraph above eta_max");
            if (!is_connected(s, c.kg)) o.fail("graph " + std::to_string(i) + " has a disconnected subgraph");
        }
        for (const auto& m : r.merges) {
            if (!(m.delta > cfg.theta_merge)) o.fail("merge with delta <= theta_merge");
            if (std::abs((m.ig_after - m.ig_before) - m.delta) > kMergeLogTolerance) o.fail("merge log IG mismatch");
        }
        merges += r.merges.size();
        subgraphs += r.subgraphs.size();
        random_runs().push_back({std::move(c), std::move(r)});
    }
    double secs = seconds_since(t0);
    if (secs >= kPartitionBudget) o.fail("took " + std::to_string(secs) + " s");
    if (o.pass) {
        std::ostringstream s;
        s << kRandomGraphs << " graphs, " << subgraphs << " subgraphs, " << merges << " merges, " << secs << " s";
        o.detail = s.str();
    }
    return o;
}

Outcome ig_oracle() {
    Outcome o;
    auto cases = fixtures::read_json(fixtures::source_dir() / "tests/fixtures/ig_cases.json");
    double worst = 0.0;
    for (const auto& c : cases) {
        PartitionConfig cfg;
        cfg.lambda = c["lambda"];
        cfg.entropy_sign = c["entropy_sign"];
        std::vector<Subgraph> subs;
        for (const auto& cand : c["candidates"]) {
            Subgraph s;
            s.id = subs.size();
            for (std::uint32_t e = 0; e < cand["size"].get<std::uint32_t>(); ++e) s.entities.push_back(EntityId{e});
            std::uint32_t k = 0;
            for (auto n : cand["support"]) {
                SupportEntry entry;
                entry.segment.entities = {EntityId{k++}};
                entry.count = n;
                s.support.push_back(entry);
            }
            subs.push_back(std::move(s));
        }
        if (subs.size() > 6) o.fail("case with more than 6 candidates");
        auto r = information_gain(subs, cfg, c["total_entities"]);
        for (std::size_t i = 0; i < subs.size(); ++i) {
            worst = std::max(worst, std::abs(r.entries[i].ig - c["candidates"][i]["ig"].get<double>()));
        }
        worst = std::max(worst, std::abs(r.total - c["total"].get<double>()));
    }
    if (cases.size() != 5) o.fail("expected 5 cases");
    if (worst > kIgTolerance) o.fail("max error " + std::to_string(worst));
    if (o.pass) o.detail = "5 cases, max error " + sci(worst);
    return o;
}

Outcome allocation_constraints() {
    Outcome o;
    AllocationConfig cfg;
    std::size_t groups = 0;
    std::size_t flagged = 0;
    for (const auto& run : random_runs()) {
        auto a = run_allocation(run.c.base, run.partition.subgraphs, run.c.kg, cfg);
        std::set<std::size_t> covered;
        for (const auto& g : a.groups) {
            covered.insert(g.members.begin(), g.members.end());
            if (g.members.size() > cfg.n_max) o.fail("group above n_max");
            if (g.coherence < cfg.theta_coh) {
                bool reported = std::any_of(a.leftovers.begin(), a.leftovers.end(), [&](const LeftoverRecord& l) {
                    return l.group == g.id && (l.coherence_violation || l.new_group);
                });
                if (!g.from_leftovers || !reported) o.fail("incoherent group not flagged");
                ++flagged;
            }
        }
        if (covered.size() != run.partition.subgraphs.size()) o.fail("subgraphs left without a group");
        for (std::size_t j = 0; j < a.owner.size(); ++j) {
            const auto& m = a.groups.at(a.owner[j]).members;
            if (std::find(m.begin(), m.end(), j) == m.end()) o.fail("owner table disagrees with groups");
        }
        groups += a.groups.size();
    }
    if (random_runs().size() != kRandomGraphs) o.fail("partition suite did not run");
    if (o.pass) o.detail = std::to_string(groups) + " groups, " + std::to_string(flagged) + " flagged leftover groups";
    return o;
}

Outcome routing_determinism() {
    Outcome o;
    auto dir = fixtures::data_dir("toy_movie");
    auto ds = load_metaqa_style(dir);
    Config cfg;
    auto model = build_model(ds, cfg);
    Router router(ds.kg, ds.train, model.partition.subgraphs, model.allocation, cfg.router);
    Preprocessor prep(Preprocessor::default_stopwords(), Preprocessor::load_lexicon(dir / "type_lexicon.tsv"));

    std::ifstream in(fixtures::source_dir() / "tests/fixtures/routing_probes.jsonl");
    std::string line;
    std::size_t twins = 0;
    std::size_t ablated = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        std::string expect = j["expect"];
        j.erase("expect");
        auto q = record_from_json(j, ds.kg, prep);
        auto first = plan_to_json(router.route(q), ds.kg).dump();
        for (int r = 0; r < 2; ++r) {
            if (plan_to_json(router.route(q), ds.kg).dump() != first) o.fail(q.id + " routed differently");
        }
        auto plan = router.route(q);
        if (expect == "similar") {
            ++twins;
            auto sims = router.similar_questions(q);
            if (sims.empty() || std::abs(sims.front().cosine - 1.0) > 1e-9) o.fail(q.id + " has no exact twin");
            if (plan.mode != PlanMode::similar) o.fail(q.id + " did not take the similar branch");
        } else {
            ++ablated;
            if (plan.mode != PlanMode::path_driven) o.fail(q.id + " did not take the path branch");
        }
    }
    if (twins + ablated != 100) o.fail("expected 100 probes");
    if (o.pass) o.detail = std::to_string(twins) + " twins similar, " + std::to_string(ablated) + " ablated path-driven, 3 runs";
    return o;
}

ConflictGraph weighted(const std::vector<double>& w, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    ConflictGraph g;
    for (std::size_t i = 0; i < w.size(); ++i) g.vertices.push_back(static_cast<TripleId>(i));
    g.score = w;
    for (auto [a, b] : edges) g.edges.push_back({std::min(a, b), std::max(a, b), ConflictRule::functional});
    return g;
}

bool independent(const ConflictGraph& g, const Resolution& r) {
    for (std::size_t i = 0; i < r.kept.size(); ++i) {
        for (std::size_t j = i + 1; j < r.kept.size(); ++j) {
            if (g.conflicting(r.kept[i], r.kept[j])) return false;
        }
    }
    return true;
}

Outcome conflict_oracle() {
    Outcome o;
    auto cases = fixtures::read_json(fixtures::source_dir() / "tests/fixtures/mwis_cases.json");
    double worst = 0.0;
    for (const auto& c : cases) {
        auto w = c["weights"].get<std::vector<double>>();
        if (w.size() > 12) o.fail("case above 12 vertices");
        auto g = weighted(w, c["edges"].get<std::vector<std::pair<std::size_t, std::size_t>>>());
        auto r = resolve(g);
        worst = std::max(worst, std::abs(r.kept_weight - c["best"].get<double>()));
        if (!independent(g, r)) o.fail("conflicting pair kept");
    }
    if (cases.size() != 200) o.fail("expected 200 cases");
    if (worst > kIgTolerance) o.fail("max weight error " + std::to_string(worst));

    std::mt19937 rng(kConflictSeed);
    std::uniform_real_distribution<double> weight(0.05, 3.0);
    std::bernoulli_distribution edge(0.12);
    std::size_t greedy = 0;
    for (int t = 0; t < 20; ++t) {
        std::vector<double> w(50);
        for (auto& x : w) x = weight(rng);
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (std::size_t a = 0; a < 50; ++a) {
            for (std::size_t b = a + 1; b < 50; ++b) {
                if (edge(rng)) edges.emplace_back(a, b);
            }
        }
        auto g = weighted(w, edges);
        auto r = resolve(g);
        greedy += r.approximate ? 1 : 0;
        if (!independent(g, r)) o.fail("conflicting pair kept on a 50-vertex graph");
    }
    if (greedy == 0) o.fail("no 50-vertex graph reached greedy mode");
    if (o.pass) {
        o.detail = "200 exact cases, max error " + sci(worst) + ", " + std::to_string(greedy) +
                   " greedy 50-vertex graphs conflict-free";
    }
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Outcome toy_benchmark() {
    Outcome o;
    fixtures::TempDir work("acceptance_toy");
    Config cfg;
    auto t0 = Clock::now();
    std::vector<std::string> reports;
    for (const char* name : {"a", "b"}) {
        StageOptions opt{fixtures::data_dir("toy_movie"), work.path / name, false};
        cmd_partition(cfg, opt);
        cmd_allocate(cfg, opt);
        cmd_route(cfg, opt);
        cmd_answer(cfg, opt);
        cmd_eval(cfg, opt);
        reports.push_back(slurp(opt.out / "eval_report.json"));
    }
    double secs = seconds_since(t0);
    if (reports[0].empty() || reports[0] != reports[1]) o.fail("eval reports differ between runs");
    auto doc = nlohmann::json::parse(reports[0]);
    const auto& s = doc["report"]["summary"];
    double hit = s["hit"];
    double hits1 = s["hits_at_1"];
    if (s["count"] != 20) o.fail("expected 20 test questions");
    if (hit != 1.0) o.fail("Hit " + std::to_string(hit));
    if (hits1 < 0.9) o.fail("Hits@1 " + std::to_string(hits1));
    if (secs >= kToyBudget) o.fail("took " + std::to_string(secs) + " s");
    if (o.pass) {
        std::ostringstream d;
        d << "Hit " << hit << ", Hits@1 " << hits1 << ", F1 " << s["f1"].get<double>() << ", identical reports, " << secs
          << " s for two runs";
        o.detail = d.str();
    }
    return o;
}

Outcome search_space() {
    Outcome o;
    Config cfg;
    auto ds = load_metaqa_style(fixtures::data_dir("four_studios"));
    auto run = run_pipeline(ds, cfg);
    std::size_t worst = 0;
    for (const auto& e : run.report.entries) worst = std::max(worst, e.activated.size());
    double ratio = run.report.search.mean_ratio;
    if (run.report.search.measured == 0) o.fail("no measured questions");
    if (worst > 2) o.fail("a question activated " + std::to_string(worst) + " subgraphs");
    if (ratio > kMaxReductionRatio) o.fail("ratio " + std::to_string(ratio));

    Config single = cfg;
    single.ablation.single_agent = true;
    auto ds2 = load_metaqa_style(fixtures::data_dir("four_studios"));
    auto flat = run_pipeline(ds2, single);
    double flat_ratio = flat.report.search.mean_ratio;
    if (std::abs(flat_ratio - 1.0) > kMetricTolerance) o.fail("single-agent ratio " + std::to_string(flat_ratio));
    if (o.pass) {
        std::ostringstream d;
        d << "partitioned ratio " << ratio << " over " << run.model.partition.subgraphs.size()
          << " subgraphs (max activated " << worst << "), single-agent ratio " << flat_ratio;
        o.detail = d.str();
    }
    return o;
}

Outcome conflict_ablation() {
    Outcome o;
    auto dir = fixtures::data_dir("conflict_movie");
    std::map<std::string, bool> affected;
    {
        std::ifstream in(dir / "qa_test.jsonl");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            affected[j["id"]] = j.value("affected", false);
        }
    }
    auto predictions = [&](bool detect) {
        Config cfg;
        cfg.fusion.detect_conflicts = detect;
        auto ds = load_metaqa_style(dir);
        auto run = run_pipeline(ds, cfg);
        std::map<std::string, std::vector<std::string>> out;
        for (const auto& e : run.report.entries) out[e.score.id] = e.score.predicted;
        return out;
    };
    auto on = predictions(true);
    auto off = predictions(false);
    std::size_t changed = 0;
    std::size_t expected = 0;
    for (const auto& [id, flag] : affected) {
        bool differs = on.at(id) != off.at(id);
        changed += differs ? 1 : 0;
        expected += flag ? 1 : 0;
        if (differs != flag) o.fail(id + (flag ? " should change but did not" : " changed without being affected"));
    }
    if (expected == 0) o.fail("fixture flags no affected question");
    if (o.pass) {
        o.detail = std::to_string(changed) + " of " + std::to_string(affected.size()) +
                   " answers changed, exactly the affected ones";
    }
    return o;
}

Outcome metric_correctness() {
    Outcome o;
    auto doc = fixtures::read_json(fixtures::source_dir() / "tests/fixtures/metric_cases.json");
    double worst = 0.0;
    std::vector<QuestionScore> scores;
    for (const auto& c : doc["cases"]) {
        auto s = score_question("q", c["predicted"], c["gold"]);
        if (s.hit != c["hit"].get<bool>() || s.hit_at_1 != c["hit_at_1"].get<bool>()) o.fail("hit flags differ");
        worst = std::max({worst, std::abs(s.f1 - c["f1"].get<double>()), std::abs(s.precision - c["precision"].get<double>()),
                          std::abs(s.recall - c["recall"].get<double>())});
        scores.push_back(s);
    }
    auto sum = summarize(scores);
    worst = std::max({worst, std::abs(sum.hit - doc["summary"]["hit"].get<double>()),
                      std::abs(sum.hits_at_1 - doc["summary"]["hits_at_1"].get<double>()),
                      std::abs(sum.f1 - doc["summary"]["f1"].get<double>())});
    if (doc["cases"].size() != 10) o.fail("expected 10 cases");
    if (worst > kMetricTolerance) o.fail("max error " + std::to_string(worst));
    if (o.pass) o.detail = "10 cases, max error " + sci(worst);
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"partition validity", partition_validity},
        {"information gain oracle", ig_oracle},
        {"allocation constraints", allocation_constraints},
        {"routing determinism and case split", routing_determinism},
        {"conflict resolution oracle", conflict_oracle},
        {"toy end-to-end benchmark", toy_benchmark},
        {"search-space reduction", search_space},
        {"conflict detection ablation", conflict_ablation},
        {"metric correctness", metric_correctness},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
