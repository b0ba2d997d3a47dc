#include "splitrag/retriever.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <map>

namespace splitrag {

double path_match(const Path& p, std::span<const EntityId> targets) {
    std::set<EntityId> want(targets.begin(), targets.end());
    if (want.empty()) return 0.0;
    std::size_t hit = 0;
    for (EntityId e : want) hit += std::find(p.entities.begin(), p.entities.end(), e) != p.entities.end();
    return static_cast<double>(hit) / static_cast<double>(want.size());
}

double pattern_match(const KnowledgeGraph& kg, const Path& p, const TypePattern& pattern) {
    if (pattern.hops() == 0 || p.entities.empty() || kg.type_of(p.front()) != pattern.start_type) return 0.0;
    std::size_t n = 0;
    while (n < p.hops() && n < pattern.hops()) {
        const auto& want = pattern.steps[n];
        if (p.steps[n].relation != want.relation || p.steps[n].inverse != want.inverse ||
            kg.type_of(p.entities[n + 1]) != want.type)
            break;
        ++n;
    }
    return static_cast<double>(n) / static_cast<double>(pattern.hops());
}

std::vector<Path> traverse(const KnowledgeGraph& kg, std::span<const EntityId> anchors,
                           std::span<const Subgraph* const> subgraphs, const TypePattern& pattern,
                           double theta_match, bool type_level) {
    auto held = [&](TripleId t) {
        return std::any_of(subgraphs.begin(), subgraphs.end(), [&](const Subgraph* s) { return s->has_triple(t); });
    };
    auto in_scope = [&](EntityId e) {
        return std::any_of(subgraphs.begin(), subgraphs.end(), [&](const Subgraph* s) { return s->has_entity(e); });
    };
    auto keep = [&](const Path& p) {
        if (type_level) return p.hops() <= pattern.hops() && pattern_match(kg, p, pattern) >= theta_match;
        return path_match(p, anchors) >= theta_match;
    };

    std::set<Path> out;
    std::set<EntityId> roots(anchors.begin(), anchors.end());
    for (EntityId a : roots) {
        if (!in_scope(a)) continue;
        for (const auto& e1 : kg.edges(a)) {
            if (e1.neighbor == a || !held(e1.triple)) continue;
            Path one{{a, e1.neighbor}, {{e1.relation, e1.inverse}}};
            if (keep(one)) out.insert(one);
            for (const auto& e2 : kg.edges(e1.neighbor)) {
                if (e2.triple == e1.triple || e2.neighbor == a || e2.neighbor == e1.neighbor || !held(e2.triple)) continue;
                Path two{{a, e1.neighbor, e2.neighbor}, {{e1.relation, e1.inverse}, {e2.relation, e2.inverse}}};
                if (keep(two)) out.insert(two);
            }
        }
    }
    return {out.begin(), out.end()};
}

std::vector<Path> traverse(const KnowledgeGraph& kg, const Subquestion& subq, const Subgraph& subgraph,
                           double theta_match) {
    const Subgraph* one[] = {&subgraph};
    return traverse(kg, subq.anchors, one, subq.pattern, theta_match, subq.anchors.empty());
}

std::vector<TripleId> collect_triples(const KnowledgeGraph& kg, std::span<const Path> paths) {
    std::set<TripleId> out;
    for (const auto& p : paths) {
        for (TripleId t : p.triple_ids(kg)) out.insert(t);
    }
    return {out.begin(), out.end()};
}

std::string render_triples(const KnowledgeGraph& kg, std::span<const TripleId> triples) {
    std::vector<std::string> lines;
    for (TripleId t : triples) lines.push_back(kg.render(kg.triple(t)));
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += (out.empty() ? "" : "\n") + l;
    return out;
}

Evidence textualize(const KnowledgeGraph& kg, std::span<const TripleId> triples, Gateway& gateway) {
    Evidence ev;
    if (triples.empty()) {
        ev.no_evidence = true;
        return ev;
    }
    std::string lines = render_triples(kg, triples);
    try {
        auto prompt = PromptTemplate::builtin(Role::summarizer).fill({{"T_clean", lines}});
        ev.text = gateway.complete(Role::summarizer, prompt);
    } catch (const GatewayError&) {
        ev.text = lines;
        ev.degraded = true;
    }
    return ev;
}

namespace {

RetrievalResult run_assignment(const RetrievalPlan& plan, std::size_t index, std::span<const Subgraph> subgraphs,
                               const KnowledgeGraph& kg, Gateway& gateway, const RetrieverConfig& cfg,
                               const std::vector<EntityId>& inherited) {
    auto started = std::chrono::steady_clock::now();
    const auto& a = plan.assignments[index];
    const auto& step = plan.steps.at(a.step);
    RetrievalResult r;
    r.assignment = index;
    r.step = a.step;
    r.agent = a.agent;
    r.type_level = step.anchors.empty();
    try {
        const auto& candidates = r.type_level ? inherited : step.anchors;
        std::vector<const Subgraph*> active;
        for (std::size_t j : a.subgraphs) {
            const auto& s = subgraphs[j];
            bool hit = std::any_of(candidates.begin(), candidates.end(), [&](EntityId e) { return s.has_entity(e); });
            if (hit) {
                active.push_back(&s);
                r.activated.push_back(j);
            }
        }
        for (EntityId e : candidates) {
            if (std::any_of(active.begin(), active.end(), [&](const Subgraph* s) { return s->has_entity(e); })) {
                r.anchors.push_back(e);
            }
        }
        r.paths = traverse(kg, r.anchors, active, step.pattern, cfg.theta_match, r.type_level);
        r.triples = collect_triples(kg, r.paths);
        std::set<EntityId> outs;
        for (const auto& p : r.paths) {
            if (p.hops() == step.pattern.hops() && pattern_match(kg, p, step.pattern) == 1.0) outs.insert(p.back());
        }
        r.outputs.assign(outs.begin(), outs.end());
        auto ev = textualize(kg, r.triples, gateway);
        r.evidence = std::move(ev.text);
        r.no_evidence = ev.no_evidence;
        r.degraded = ev.degraded;
    } catch (const std::exception& e) {
        r = RetrievalResult{};
        r.assignment = index;
        r.step = a.step;
        r.agent = a.agent;
        r.failed = true;
        r.no_evidence = true;
        r.error = e.what();
    }
    r.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return r;
}

}  // namespace

std::vector<RetrievalResult> run_plan(const RetrievalPlan& plan, std::span<const Subgraph> subgraphs,
                                      const KnowledgeGraph& kg, Gateway& gateway, const RetrieverConfig& cfg) {
    const std::size_t n = plan.assignments.size();
    std::vector<RetrievalResult> results(n);
    std::vector<bool> done(n, false);
    std::vector<bool> step_done(plan.steps.size(), false);
    std::map<std::size_t, std::vector<EntityId>> step_outputs;
    const std::size_t workers = std::max<std::size_t>(1, cfg.workers);

    auto step_complete = [&](std::size_t s) {
        for (std::size_t i = 0; i < n; ++i) {
            if (plan.assignments[i].step == s && !done[i]) return false;
        }
        return true;
    };

    std::size_t remaining = n;
    while (remaining > 0) {
        std::vector<std::size_t> wave;
        for (std::size_t i = 0; i < n; ++i) {
            if (done[i]) continue;
            const auto& dep = plan.steps.at(plan.assignments[i].step).depends_on;
            if (!dep || step_complete(*dep)) wave.push_back(i);
        }
        if (wave.empty()) throw Error("plan " + plan.question + " has a dependency cycle");

        for (std::size_t begin = 0; begin < wave.size(); begin += workers) {
            std::size_t end = std::min(wave.size(), begin + workers);
            std::vector<std::future<RetrievalResult>> running;
            for (std::size_t w = begin; w < end; ++w) {
                std::size_t i = wave[w];
                const auto& dep = plan.steps.at(plan.assignments[i].step).depends_on;
                std::vector<EntityId> inherited = dep ? step_outputs[*dep] : std::vector<EntityId>{};
                running.push_back(std::async(std::launch::async, [&, i, inherited = std::move(inherited)] {
                    return run_assignment(plan, i, subgraphs, kg, gateway, cfg, inherited);
                }));
            }
            for (std::size_t w = begin; w < end; ++w) results[wave[w]] = running[w - begin].get();
        }
        for (std::size_t i : wave) {
            done[i] = true;
            --remaining;
        }
        for (std::size_t i : wave) {
            auto& outs = step_outputs[plan.assignments[i].step];
            outs.insert(outs.end(), results[i].outputs.begin(), results[i].outputs.end());
            std::sort(outs.begin(), outs.end());
            outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
        }
    }
    return results;
}

std::vector<std::size_t> activated_subgraphs(std::span<const RetrievalResult> results) {
    std::set<std::size_t> all;
    for (const auto& r : results) all.insert(r.activated.begin(), r.activated.end());
    return {all.begin(), all.end()};
}

std::size_t touched_entities(std::span<const RetrievalResult> results, std::span<const Subgraph> subgraphs) {
    std::size_t n = 0;
    for (std::size_t j : activated_subgraphs(results)) n += subgraphs[j].size();
    return n;
}

nlohmann::json trace_to_json(const RetrievalPlan& plan, std::span<const RetrievalResult> results,
                             std::span<const Subgraph> subgraphs, const KnowledgeGraph& kg) {
    nlohmann::json j;
    j["question"] = plan.question;
    j["mode"] = to_string(plan.mode);
    j["activated_subgraphs"] = activated_subgraphs(results);
    j["touched_entities"] = touched_entities(results, subgraphs);
    j["total_entities"] = kg.entity_count();
    j["results"] = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json rj;
        rj["assignment"] = r.assignment;
        rj["step"] = r.step;
        rj["agent"] = r.agent;
        rj["activated"] = r.activated;
        rj["anchors"] = nlohmann::json::array();
        for (EntityId e : r.anchors) rj["anchors"].push_back(kg.name(e));
        rj["paths"] = nlohmann::json::array();
        for (const auto& p : r.paths) rj["paths"].push_back(p.render(kg));
        rj["triples"] = nlohmann::json::array();
        for (TripleId t : r.triples) rj["triples"].push_back(kg.render(kg.triple(t)));
        rj["outputs"] = nlohmann::json::array();
        for (EntityId e : r.outputs) rj["outputs"].push_back(kg.name(e));
        rj["evidence"] = r.evidence;
        rj["type_level"] = r.type_level;
        rj["no_evidence"] = r.no_evidence;
        rj["degraded"] = r.degraded;
        rj["failed"] = r.failed;
        if (r.failed) rj["error"] = r.error;
        rj["millis"] = r.millis;
        j["results"].push_back(std::move(rj));
    }
    return j;
}

}  // namespace splitrag
