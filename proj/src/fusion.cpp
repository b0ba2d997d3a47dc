#include "splitrag/fusion.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

namespace splitrag {

Aggregate aggregate(std::span<const RetrievalResult> results, const std::map<std::size_t, double>& conf) {
    if (results.empty()) throw Error("aggregate: no retrieval results");
    Aggregate agg;
    std::map<TripleId, std::set<std::size_t>> agents;
    std::vector<std::string> evidence;
    for (const auto& r : results) {
        for (TripleId t : r.triples) agents[t].insert(r.agent);
        if (!r.evidence.empty()) evidence.push_back(r.evidence);
    }
    for (const auto& [t, who] : agents) {
        agg.triples.push_back(t);
        agg.provenance[t].assign(who.begin(), who.end());
        double s = 0.0;
        for (std::size_t a : who) {
            auto it = conf.find(a);
            s += it == conf.end() ? 0.05 : it->second;
        }
        agg.score[t] = s;
    }
    for (const auto& e : evidence) agg.evidence += (agg.evidence.empty() ? "" : "\n") + e;
    agg.empty = agg.triples.empty();
    return agg;
}

bool ConflictGraph::conflicting(std::size_t a, std::size_t b) const {
    if (a > b) std::swap(a, b);
    return std::any_of(edges.begin(), edges.end(), [&](const ConflictEdge& e) { return e.a == a && e.b == b; });
}

bool conflict(const KnowledgeGraph& kg, const Triple& x, const Triple& y, ConflictRule* rule) {
    if (x == y) return false;
    if (x.head == y.head && x.relation == y.relation && x.tail != y.tail && kg.is_functional(x.relation)) {
        if (rule) *rule = ConflictRule::functional;
        return true;
    }
    if (x.head == y.head && x.tail == y.tail && kg.is_negation_pair(x.relation, y.relation)) {
        if (rule) *rule = ConflictRule::negation;
        return true;
    }
    return false;
}

ConflictGraph detect_conflicts(const KnowledgeGraph& kg, std::span<const TripleId> triples,
                               const std::map<TripleId, double>& score) {
    ConflictGraph g;
    std::set<TripleId> unique(triples.begin(), triples.end());
    g.vertices.assign(unique.begin(), unique.end());
    for (TripleId t : g.vertices) {
        auto it = score.find(t);
        g.score.push_back(it == score.end() ? 0.0 : it->second);
    }
    // Both rules need a shared head, so only compare within a head bucket.
    std::map<EntityId, std::vector<std::size_t>> by_head;
    for (std::size_t i = 0; i < g.vertices.size(); ++i) by_head[kg.triple(g.vertices[i]).head].push_back(i);
    for (const auto& [head, idx] : by_head) {
        for (std::size_t x = 0; x < idx.size(); ++x) {
            for (std::size_t y = x + 1; y < idx.size(); ++y) {
                ConflictRule rule{};
                if (conflict(kg, kg.triple(g.vertices[idx[x]]), kg.triple(g.vertices[idx[y]]), &rule)) {
                    g.edges.push_back({std::min(idx[x], idx[y]), std::max(idx[x], idx[y]), rule});
                }
            }
        }
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const ConflictEdge& l, const ConflictEdge& r) {
        return std::pair(l.a, l.b) < std::pair(r.a, r.b);
    });
    return g;
}

namespace {

constexpr double slack = 1e-12;

// Exact search over one component, vertices already in priority order.
std::vector<std::size_t> exact_mwis(const std::vector<double>& w, const std::vector<std::uint32_t>& adj) {
    const std::size_t n = w.size();
    std::vector<double> rest(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;) rest[k] = rest[k + 1] + w[k];
    std::uint32_t best_mask = 0;
    double best = -1.0;
    std::function<void(std::size_t, std::uint32_t, double, std::uint32_t)> search =
        [&](std::size_t k, std::uint32_t mask, double weight, std::uint32_t banned) {
            if (weight + rest[k] <= best + slack) return;
            if (k == n) {
                best = weight;
                best_mask = mask;
                return;
            }
            if (!(banned >> k & 1u)) search(k + 1, mask | (1u << k), weight + w[k], banned | adj[k]);
            search(k + 1, mask, weight, banned);
        };
    search(0, 0, 0.0, 0);
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < n; ++k) {
        if (best_mask >> k & 1u) out.push_back(k);
    }
    return out;
}

}  // namespace

Resolution resolve(const ConflictGraph& g) {
    const std::size_t n = g.vertices.size();
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& e : g.edges) {
        adj[e.a].push_back(e.b);
        adj[e.b].push_back(e.a);
    }
    auto before = [&](std::size_t x, std::size_t y) {
        if (g.score[x] != g.score[y]) return g.score[x] > g.score[y];
        return g.vertices[x] < g.vertices[y];
    };

    Resolution res;
    std::vector<bool> keep(n, false);
    std::vector<bool> seen(n, false);
    for (std::size_t start = 0; start < n; ++start) {
        if (seen[start]) continue;
        std::vector<std::size_t> comp;
        std::queue<std::size_t> todo;
        todo.push(start);
        seen[start] = true;
        while (!todo.empty()) {
            std::size_t v = todo.front();
            todo.pop();
            comp.push_back(v);
            for (std::size_t u : adj[v]) {
                if (!seen[u]) {
                    seen[u] = true;
                    todo.push(u);
                }
            }
        }
        std::sort(comp.begin(), comp.end(), before);

        if (comp.size() <= exact_component_limit) {
            std::map<std::size_t, std::size_t> pos;
            for (std::size_t k = 0; k < comp.size(); ++k) pos[comp[k]] = k;
            std::vector<double> w;
            std::vector<std::uint32_t> mask(comp.size(), 0);
            for (std::size_t k = 0; k < comp.size(); ++k) {
                w.push_back(g.score[comp[k]]);
                for (std::size_t u : adj[comp[k]]) mask[k] |= 1u << pos[u];
            }
            for (std::size_t k : exact_mwis(w, mask)) keep[comp[k]] = true;
        } else {
            res.approximate = true;
            for (std::size_t v : comp) {
                bool clash = std::any_of(adj[v].begin(), adj[v].end(), [&](std::size_t u) { return keep[u]; });
                if (!clash) keep[v] = true;
            }
        }
    }
    for (std::size_t v = 0; v < n; ++v) {
        if (keep[v]) {
            res.kept.push_back(g.vertices[v]);
            res.kept_weight += g.score[v];
        } else {
            res.removed.push_back(g.vertices[v]);
        }
    }
    return res;
}

Answer extract_answer(const KnowledgeGraph& kg, std::span<const TripleId> clean, const std::map<TripleId, double>& score,
                      const RetrievalPlan& plan) {
    Answer ans;
    if (clean.empty()) {
        ans.no_evidence = true;
        ans.text = "unknown";
        return ans;
    }
    auto s_of = [&](TripleId t) {
        auto it = score.find(t);
        return it == score.end() ? 0.0 : it->second;
    };
    std::set<EntityId> anchors(plan.anchors.begin(), plan.anchors.end());
    std::map<EntityId, double> found;

    if (plan.answer_pattern) {
        const auto& pattern = *plan.answer_pattern;
        std::map<EntityId, std::vector<Edge>> adj;
        for (TripleId id : clean) {
            const auto& t = kg.triple(id);
            adj[t.head].push_back({t.tail, t.relation, false, id});
            adj[t.tail].push_back({t.head, t.relation, true, id});
        }
        std::vector<EntityId> visited;
        std::function<void(EntityId, std::size_t, double)> walk = [&](EntityId at, std::size_t k, double weakest) {
            if (k == pattern.hops()) {
                if (!anchors.contains(at)) found[at] = std::max(found[at], weakest);
                return;
            }
            const auto& step = pattern.steps[k];
            auto it = adj.find(at);
            if (it == adj.end()) return;
            for (const auto& e : it->second) {
                if (e.relation != step.relation || e.inverse != step.inverse || kg.type_of(e.neighbor) != step.type) continue;
                if (std::find(visited.begin(), visited.end(), e.neighbor) != visited.end()) continue;
                visited.push_back(e.neighbor);
                walk(e.neighbor, k + 1, std::min(weakest, s_of(e.triple)));
                visited.pop_back();
            }
        };
        for (EntityId a : anchors) {
            if (kg.type_of(a) != pattern.start_type) continue;
            visited = {a};
            walk(a, 0, std::numeric_limits<double>::infinity());
        }
        if (found.empty() && pattern.hops() > 0) {
            ans.fallback_rule = true;
            const auto& last = pattern.steps.back();
            for (TripleId id : clean) {
                const auto& t = kg.triple(id);
                if (t.relation != last.relation) continue;
                EntityId end = last.inverse ? t.head : t.tail;
                if (kg.type_of(end) != last.type || anchors.contains(end)) continue;
                found[end] = std::max(found[end], s_of(id));
            }
        }
    }

    std::vector<std::pair<std::string, double>> ranked;
    for (const auto& [e, s] : found) ranked.emplace_back(kg.name(e), s);
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    for (const auto& [name, s] : ranked) {
        ans.entities.push_back(name);
        ans.scores.push_back(s);
    }
    if (ans.entities.empty()) {
        ans.text = "unknown";
    } else {
        for (const auto& name : ans.entities) ans.text += (ans.text.empty() ? "" : " | ") + name;
    }
    return ans;
}

Answer synthesize(const KnowledgeGraph& kg, std::span<const TripleId> clean, const std::map<TripleId, double>& score,
                  const std::string& evidence, const QuestionRecord& q, const RetrievalPlan& plan, Gateway& gateway) {
    Answer stub = extract_answer(kg, clean, score, plan);
    if (stub.no_evidence) return stub;
    std::string prompt = PromptTemplate::builtin(Role::head_agent)
                             .fill({{"T_clean", render_triples(kg, clean)}, {"E_all", evidence}, {"q_new", q.raw}});
    std::string reply;
    try {
        reply = gateway.complete(Role::head_agent, prompt);
    } catch (const GatewayError&) {
        stub.degraded = true;
        return stub;
    }
    if (gateway.is_stub()) {
        stub.text += "\n" + reply;
        return stub;
    }

    Answer live;
    live.text = reply;
    std::istringstream in(reply);
    std::string first;
    std::getline(in, first);
    std::size_t pos = 0;
    while (pos <= first.size()) {
        auto next = first.find(" | ", pos);
        std::string name = first.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
        while (!name.empty() && std::isspace(static_cast<unsigned char>(name.front()))) name.erase(name.begin());
        if (!name.empty() && kg.find_entity(name) &&
            std::find(live.entities.begin(), live.entities.end(), name) == live.entities.end()) {
            live.entities.push_back(name);
            live.scores.push_back(1.0);
        }
        if (next == std::string::npos) break;
        pos = next + 3;
    }
    if (live.entities.empty()) {
        stub.text = reply;
        stub.fallback_rule = true;
        return stub;
    }
    return live;
}

FusionResult fuse(const KnowledgeGraph& kg, std::span<const RetrievalResult> results, const QuestionRecord& q,
                  const RetrievalPlan& plan, Gateway& gateway, const FusionConfig& cfg) {
    FusionResult f;
    if (results.empty()) {
        f.all.empty = true;
        f.answer.no_evidence = true;
        f.answer.text = "unknown";
        return f;
    }
    f.all = aggregate(results, plan.confidence);
    if (cfg.detect_conflicts) {
        f.graph = detect_conflicts(kg, f.all.triples, f.all.score);
        f.resolution = resolve(f.graph);
    } else {
        f.graph.vertices = f.all.triples;
        for (TripleId t : f.all.triples) f.graph.score.push_back(f.all.score.at(t));
        f.resolution.kept = f.all.triples;
        for (double s : f.graph.score) f.resolution.kept_weight += s;
    }
    f.answer = synthesize(kg, f.resolution.kept, f.all.score, f.all.evidence, q, plan, gateway);
    return f;
}

nlohmann::json fusion_to_json(const FusionResult& f, const KnowledgeGraph& kg) {
    nlohmann::json j;
    auto tri = [&](TripleId t) { return kg.render(kg.triple(t)); };
    j["aggregated"] = f.all.triples.size();
    j["empty_aggregate"] = f.all.empty;
    j["conflicts"] = nlohmann::json::array();
    for (const auto& e : f.graph.edges) {
        j["conflicts"].push_back({{"a", tri(f.graph.vertices[e.a])},
                                  {"b", tri(f.graph.vertices[e.b])},
                                  {"rule", e.rule == ConflictRule::functional ? "functional" : "negation"}});
    }
    j["removed"] = nlohmann::json::array();
    for (TripleId t : f.resolution.removed) {
        j["removed"].push_back({{"triple", tri(t)}, {"score", f.all.score.at(t)}, {"reason", "conflict"}});
    }
    j["kept"] = f.resolution.kept.size();
    j["approximate"] = f.resolution.approximate;
    j["answer"] = f.answer.entities;
    j["answer_scores"] = f.answer.scores;
    j["answer_text"] = f.answer.text;
    j["no_evidence"] = f.answer.no_evidence;
    j["degraded"] = f.answer.degraded;
    j["fallback_rule"] = f.answer.fallback_rule;
    return j;
}

}  // namespace splitrag
