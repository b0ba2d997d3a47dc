#include "splitrag/router.hpp"

#include <algorithm>
#include <cmath>

namespace splitrag {

void RouterConfig::validate() const {
    if (k < 1) throw ConfigError("router.k must be >= 1");
    if (!(alpha >= 0.0)) throw ConfigError("router.alpha must be >= 0");
    if (!(beta >= 0.0)) throw ConfigError("router.beta must be >= 0");
    for (auto [name, v] : {std::pair{"theta_sim", theta_sim}, {"theta_match", theta_match}, {"theta_align", theta_align}}) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("router.") + name + " must lie in [0, 1]");
    }
}

std::string to_string(PlanMode m) { return m == PlanMode::similar ? "similar" : "path-driven"; }

std::map<std::size_t, double> agent_confidence(const RetrievalPlan& plan) {
    std::map<std::size_t, std::pair<double, std::size_t>> acc;
    for (const auto& a : plan.assignments) {
        auto& [sum, n] = acc[a.agent];
        sum += a.match;
        ++n;
    }
    std::map<std::size_t, double> out;
    for (const auto& [agent, sn] : acc) out[agent] = std::clamp(sn.first / static_cast<double>(sn.second), 0.05, 1.0);
    return out;
}

namespace {

// Oriented 1/2-hop patterns of simple walks leaving `anchor`.
std::set<TypePattern> walks_from(const KnowledgeGraph& kg, EntityId anchor) {
    std::set<TypePattern> out;
    TypeId start = kg.type_of(anchor);
    for (const auto& e1 : kg.edges(anchor)) {
        if (e1.neighbor == anchor) continue;
        PatternStep s1{e1.relation, e1.inverse, kg.type_of(e1.neighbor)};
        out.insert(TypePattern{start, {s1}});
        for (const auto& e2 : kg.edges(e1.neighbor)) {
            if (e2.triple == e1.triple || e2.neighbor == anchor || e2.neighbor == e1.neighbor) continue;
            out.insert(TypePattern{start, {s1, PatternStep{e2.relation, e2.inverse, kg.type_of(e2.neighbor)}}});
        }
    }
    return out;
}

TypePattern sub_pattern(const TypePattern& p, std::size_t first, std::size_t count) {
    TypePattern out;
    out.start_type = first == 0 ? p.start_type : p.steps[first - 1].type;
    out.steps.assign(p.steps.begin() + static_cast<std::ptrdiff_t>(first),
                     p.steps.begin() + static_cast<std::ptrdiff_t>(first + count));
    return out;
}

}  // namespace

std::set<TypePattern> inferable_patterns(const KnowledgeGraph& kg, std::span<const EntityId> entities) {
    std::set<TypePattern> out;
    for (EntityId e : entities) {
        for (const auto& p : walks_from(kg, e)) out.insert(p.canonical());
    }
    return out;
}

void build_decompositions(QuestionBase& base, std::span<const Subgraph> subgraphs, const Allocation& alloc,
                          const KnowledgeGraph& kg) {
    auto holder = [&](std::span<const TripleId> ids) -> std::optional<std::size_t> {
        for (const auto& s : subgraphs) {
            if (std::all_of(ids.begin(), ids.end(), [&](TripleId t) { return s.has_triple(t); })) return s.id;
        }
        return std::nullopt;
    };
    for (std::size_t i = 0; i < base.size(); ++i) {
        const auto& rec = base.record(i);
        if (!rec.path) continue;
        std::vector<DecompositionStep> steps;
        bool complete = true;
        for (const auto& seg : split_into_segments(*rec.path)) {
            const Path& p = seg.path();
            auto ids = p.triple_ids(kg);
            TypePattern pattern = pattern_of(kg, p);
            if (auto j = holder(ids)) {
                steps.push_back({pattern, steps.empty(), alloc.owner.at(*j), {*j}});
                continue;
            }
            for (std::size_t h = 0; h < p.hops(); ++h) {
                auto j = holder(std::span<const TripleId>(&ids[h], 1));
                if (!j) {
                    complete = false;
                    break;
                }
                steps.push_back({sub_pattern(pattern, h, 1), steps.empty(), alloc.owner.at(*j), {*j}});
            }
            if (!complete) break;
        }
        base.set_decomposition(i, complete ? std::move(steps) : std::vector<DecompositionStep>{});
    }
}

Router::Router(const KnowledgeGraph& kg, const QuestionBase& base, std::span<const Subgraph> subgraphs,
               const Allocation& alloc, RouterConfig cfg)
    : kg_(kg), base_(base), subgraphs_(subgraphs), alloc_(alloc), cfg_(cfg) {
    cfg_.validate();
    if (!base_.finalized()) throw Error("router: question base is not finalized");
    if (alloc_.owner.size() != subgraphs_.size()) throw Error("router: allocation does not match the partition");
    for (const auto& s : subgraphs_) {
        std::set<TypedRelation> typed;
        std::set<TypeId> types;
        for (TripleId id : s.triples) {
            const auto& t = kg_.triple(id);
            typed.insert({kg_.type_of(t.head), t.relation, kg_.type_of(t.tail)});
        }
        for (EntityId e : s.entities) types.insert(kg_.type_of(e));
        typed_.push_back(std::move(typed));
        types_.push_back(std::move(types));
    }
    for (const auto& rec : base_.records()) {
        std::set<TypePattern> pats;
        if (rec.path) {
            for (const auto& seg : split_into_segments(*rec.path)) pats.insert(pattern_of(kg_, seg.path()).canonical());
        }
        train_patterns_.push_back(std::move(pats));
    }
}

std::vector<SimilarQuestion> Router::similar_questions(const QuestionRecord& q) const {
    auto v = base_.vectorize(q.contexts.entity_type_tokens());
    std::vector<SimilarQuestion> all;
    for (std::size_t i = 0; i < base_.size(); ++i) {
        const auto* vi = base_.vector(i);
        if (!vi) continue;
        all.push_back({i, cosine(v, *vi), 0, 0.0, 0.0, 0.0});
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const SimilarQuestion& a, const SimilarQuestion& b) { return a.cosine > b.cosine; });

    auto linked = q.linked_entities();
    auto inferred = inferable_patterns(kg_, linked);
    for (std::size_t r = 0; r < all.size(); ++r) {
        auto& s = all[r];
        s.rank = r;
        s.sim_etc = r == 0 ? s.cosine : s.cosine * std::exp(-cfg_.beta * static_cast<double>(r));
        const auto& train = train_patterns_[s.index];
        if (!inferred.empty() && !train.empty()) {
            std::size_t common = 0;
            for (const auto& p : train) common += inferred.count(p);
            s.path_overlap = static_cast<double>(common) / static_cast<double>(inferred.size() + train.size() - common);
        }
        s.score = s.sim_etc + cfg_.alpha * s.path_overlap;
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const SimilarQuestion& a, const SimilarQuestion& b) { return a.score > b.score; });
    if (all.size() > cfg_.k) all.resize(cfg_.k);
    return all;
}

std::optional<EntityId> Router::anchor_for(const QuestionRecord& q, TypeId type) const {
    for (EntityId e : q.linked_entities()) {
        if (kg_.type_of(e) == type) return e;
    }
    return std::nullopt;
}

bool Router::anchorable(const QuestionRecord& q, const QuestionRecord& sim) const {
    if (sim.decomposition.empty() || !sim.decomposition.front().anchored) return false;
    return anchor_for(q, sim.decomposition.front().pattern.start_type).has_value();
}

bool Router::subgraphs_hold(std::span<const std::size_t> subgraphs, TripleId t) const {
    return std::any_of(subgraphs.begin(), subgraphs.end(), [&](std::size_t j) { return subgraphs_[j].has_triple(t); });
}

std::vector<std::size_t> Router::agent_subgraphs(std::size_t agent) const {
    for (const auto& g : alloc_.groups) {
        if (g.id == agent) return g.members;
    }
    return {};
}

double Router::anchored_match(const TypePattern& p, EntityId anchor, std::span<const std::size_t> subgraphs) const {
    if (p.hops() == 0 || kg_.type_of(anchor) != p.start_type) return 0.0;
    std::set<EntityId> frontier{anchor};
    std::size_t done = 0;
    for (const auto& step : p.steps) {
        std::set<EntityId> next;
        for (EntityId e : frontier) {
            for (const auto& edge : kg_.edges(e)) {
                if (edge.relation != step.relation || edge.inverse != step.inverse) continue;
                if (kg_.type_of(edge.neighbor) != step.type || edge.neighbor == anchor) continue;
                if (subgraphs_hold(subgraphs, edge.triple)) next.insert(edge.neighbor);
            }
        }
        if (next.empty()) break;
        ++done;
        frontier = std::move(next);
    }
    return static_cast<double>(done) / static_cast<double>(p.hops());
}

double Router::type_match(const TypePattern& p, std::size_t subgraph) const {
    if (p.hops() == 0) return 0.0;
    std::size_t hit = 0;
    TypeId from = p.start_type;
    for (const auto& step : p.steps) {
        TypedRelation key = step.inverse ? TypedRelation{step.type, step.relation, from}
                                         : TypedRelation{from, step.relation, step.type};
        hit += typed_[subgraph].count(key);
        from = step.type;
    }
    return static_cast<double>(hit) / static_cast<double>(p.hops());
}

double Router::cover(const TypePattern& p, std::span<const std::size_t> subgraphs) const {
    std::set<TypeId> need{p.start_type};
    for (const auto& s : p.steps) need.insert(s.type);
    std::size_t have = 0;
    for (TypeId t : need) {
        bool found = std::any_of(subgraphs.begin(), subgraphs.end(), [&](std::size_t j) { return types_[j].contains(t); });
        have += found ? 1 : 0;
    }
    return static_cast<double>(have) / static_cast<double>(need.size());
}

std::string Router::describe(const TypePattern& p, std::optional<EntityId> anchor) const {
    std::string key = p.key(kg_);
    std::string head = anchor ? "[" + kg_.name(*anchor) + "]" : "{previous answers}";
    return head + key.substr(kg_.type_name(p.start_type).size());
}

bool Router::route_anchored(RetrievalPlan& plan, std::map<std::size_t, std::size_t>& load, EntityId anchor,
                            const TypePattern& pattern, std::optional<std::size_t> depends_on,
                            Subquestion::Source source, bool rerouted) const {
    std::map<std::size_t, std::pair<double, std::vector<std::size_t>>> by_agent;
    for (const auto& s : subgraphs_) {
        if (!s.has_entity(anchor)) continue;
        std::size_t j = s.id;
        double m = anchored_match(pattern, anchor, std::span<const std::size_t>(&j, 1));
        if (m < cfg_.theta_match || m == 0.0) continue;
        auto& [conf, subs] = by_agent[alloc_.owner.at(j)];
        conf = std::max(conf, m);
        subs.push_back(j);
    }
    if (by_agent.empty()) return false;

    std::size_t best = by_agent.begin()->first;
    double best_value = -1.0;
    for (const auto& [agent, cs] : by_agent) {
        double value = cs.first / static_cast<double>(1 + load[agent]);
        if (value > best_value) {
            best = agent;
            best_value = value;
        }
    }
    const auto& [conf, subs] = by_agent.at(best);

    if (conf < 1.0 && pattern.hops() == 2) {
        if (!route_anchored(plan, load, anchor, sub_pattern(pattern, 0, 1), depends_on, source, rerouted)) return false;
        Subquestion tail;
        tail.pattern = sub_pattern(pattern, 1, 1);
        tail.depends_on = plan.steps.size() - 1;
        tail.source = source;
        tail.text = describe(tail.pattern, std::nullopt);
        plan.steps.push_back(std::move(tail));
        route_chained(plan, plan.steps.size() - 1, std::nullopt);
        return true;
    }

    Subquestion sq;
    sq.pattern = pattern;
    sq.anchors = {anchor};
    sq.depends_on = depends_on;
    sq.source = source;
    sq.text = describe(pattern, anchor);
    plan.steps.push_back(std::move(sq));
    plan.assignments.push_back({plan.steps.size() - 1, best, subs, conf, rerouted});
    ++load[best];
    return true;
}

void Router::route_chained(RetrievalPlan& plan, std::size_t step, std::optional<std::size_t> preferred_agent) const {
    const TypePattern& pattern = plan.steps[step].pattern;
    std::vector<std::size_t> order;
    if (preferred_agent) order.push_back(*preferred_agent);
    for (const auto& g : alloc_.groups) {
        if (!preferred_agent || g.id != *preferred_agent) order.push_back(g.id);
    }
    bool any = false;
    for (std::size_t agent : order) {
        std::vector<std::size_t> subs;
        double best = 0.0;
        for (std::size_t j : agent_subgraphs(agent)) {
            double m = type_match(pattern, j);
            if (m >= cfg_.theta_match && m > 0.0) {
                subs.push_back(j);
                best = std::max(best, m);
            }
        }
        if (subs.empty()) continue;
        plan.assignments.push_back({step, agent, std::move(subs), best, false});
        any = true;
    }
    if (!any) plan.notes.push_back("step " + std::to_string(step) + " matches no subgraph");
}

RetrievalPlan Router::plan_by_similarity(const QuestionRecord& q, const SimilarQuestion& sim) const {
    const auto& ref = base_.record(sim.index);
    if (ref.decomposition.empty()) {
        auto plan = plan_by_paths(q);
        plan.notes.push_back("matched question " + ref.id + " has no stored decomposition");
        return plan;
    }

    RetrievalPlan plan;
    plan.question = q.id;
    plan.mode = PlanMode::similar;
    plan.matched_question = ref.id;
    plan.top_similarity = sim.score;
    std::map<std::size_t, std::size_t> load;

    TypePattern whole;
    whole.start_type = ref.decomposition.front().pattern.start_type;
    for (const auto& d : ref.decomposition) whole.steps.insert(whole.steps.end(), d.pattern.steps.begin(), d.pattern.steps.end());
    plan.answer_pattern = whole;

    for (const auto& d : ref.decomposition) {
        std::optional<EntityId> anchor;
        if (d.anchored) anchor = anchor_for(q, d.pattern.start_type);

        if (!anchor) {
            // Chained steps run one hop at a time.
            for (std::size_t h = 0; h < d.pattern.hops(); ++h) {
                Subquestion sq;
                sq.pattern = sub_pattern(d.pattern, h, 1);
                sq.depends_on = plan.steps.empty() ? std::nullopt : std::optional<std::size_t>(plan.steps.size() - 1);
                sq.source = Subquestion::Source::template_adapted;
                sq.text = describe(sq.pattern, std::nullopt);
                plan.steps.push_back(std::move(sq));
                route_chained(plan, plan.steps.size() - 1, d.agent);
            }
            continue;
        }
        if (plan.anchors.empty()) plan.anchors.push_back(*anchor);

        bool inside = std::any_of(d.subgraphs.begin(), d.subgraphs.end(),
                                  [&](std::size_t j) { return subgraphs_[j].has_entity(*anchor); });
        double m = anchored_match(d.pattern, *anchor, d.subgraphs);
        if (inside && cover(d.pattern, d.subgraphs) >= cfg_.theta_align && m == 1.0) {
            Subquestion sq;
            sq.pattern = d.pattern;
            sq.anchors = {*anchor};
            sq.source = Subquestion::Source::template_adapted;
            sq.text = describe(d.pattern, *anchor);
            plan.steps.push_back(std::move(sq));
            plan.assignments.push_back({plan.steps.size() - 1, d.agent, d.subgraphs, m, false});
            ++load[d.agent];
            continue;
        }
        plan.mixed = true;
        if (route_anchored(plan, load, *anchor, d.pattern, std::nullopt, Subquestion::Source::template_adapted, true)) {
            continue;
        }
        // Nothing fits: keep the stored assignment at its (possibly zero) match.
        Subquestion sq;
        sq.pattern = d.pattern;
        sq.anchors = {*anchor};
        sq.source = Subquestion::Source::template_adapted;
        sq.text = describe(d.pattern, *anchor);
        plan.steps.push_back(std::move(sq));
        plan.assignments.push_back({plan.steps.size() - 1, d.agent, d.subgraphs, m, true});
        plan.notes.push_back("step " + std::to_string(plan.steps.size() - 1) + " kept on its stored agent without alignment");
        ++load[d.agent];
    }
    if (plan.assignments.empty()) plan.unroutable = true;
    plan.confidence = agent_confidence(plan);
    return plan;
}

RetrievalPlan Router::plan_by_paths(const QuestionRecord& q) const {
    auto linked = q.linked_entities();
    if (linked.empty()) throw Error("question " + q.id + " has no linked entity");

    RetrievalPlan plan;
    plan.question = q.id;
    plan.mode = PlanMode::path_driven;

    std::vector<TypeId> targets;
    for (const auto& t : q.contexts.entity_type) {
        if (t.source != TypeToken::Source::type_word) continue;
        if (auto id = kg_.find_type(t.text)) targets.push_back(*id);
    }

    std::vector<std::pair<EntityId, TypePattern>> candidates;
    std::set<EntityId> seen;
    for (EntityId e : linked) {
        if (!seen.insert(e).second) continue;
        for (const auto& p : walks_from(kg_, e)) candidates.emplace_back(e, p);
    }
    auto wanted = [&](const TypePattern& p) {
        return std::find(targets.begin(), targets.end(), p.end_type()) != targets.end();
    };
    if (std::any_of(candidates.begin(), candidates.end(), [&](const auto& c) { return wanted(c.second); })) {
        std::erase_if(candidates, [&](const auto& c) { return !wanted(c.second); });
    }

    std::map<std::size_t, std::size_t> load;
    std::optional<std::tuple<bool, double, std::size_t>> best_key;
    for (const auto& [anchor, pattern] : candidates) {
        std::size_t before = plan.assignments.size();
        if (!route_anchored(plan, load, anchor, pattern, std::nullopt, Subquestion::Source::path_segment, false)) continue;
        double m = plan.assignments[before].match;
        std::tuple<bool, double, std::size_t> key{!targets.empty() && pattern.end_type() == targets.back(), m,
                                                 pattern.hops()};
        if (!best_key || key > *best_key) {
            best_key = key;
            plan.answer_pattern = pattern;
            plan.anchors = {anchor};
        }
    }
    if (plan.assignments.empty()) {
        plan.unroutable = true;
        plan.notes.push_back("no pattern matches any subgraph");
    }
    plan.confidence = agent_confidence(plan);
    return plan;
}

RetrievalPlan Router::route(const QuestionRecord& q) const {
    auto sims = similar_questions(q);
    double top = sims.empty() ? 0.0 : sims.front().score;
    RetrievalPlan plan;
    if (!sims.empty() && top >= cfg_.theta_sim && anchorable(q, base_.record(sims.front().index))) {
        plan = plan_by_similarity(q, sims.front());
    } else {
        try {
            plan = plan_by_paths(q);
        } catch (const Error& e) {
            plan.question = q.id;
            plan.mode = PlanMode::path_driven;
            plan.unroutable = true;
            plan.notes.push_back(e.what());
        }
    }
    plan.top_similarity = top;
    return plan;
}

nlohmann::json pattern_to_json(const TypePattern& p, const KnowledgeGraph& kg) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : p.steps) {
        steps.push_back({{"relation", kg.name(s.relation)}, {"inverse", s.inverse}, {"type", kg.type_name(s.type)}});
    }
    return {{"start", kg.type_name(p.start_type)}, {"steps", std::move(steps)}};
}

TypePattern pattern_from_json(const nlohmann::json& j, const KnowledgeGraph& kg) {
    auto type = [&](const std::string& name) {
        auto t = kg.find_type(name);
        if (!t) throw Error("unknown entity type '" + name + "'");
        return *t;
    };
    TypePattern p;
    p.start_type = type(j.at("start").get<std::string>());
    for (const auto& s : j.at("steps")) {
        p.steps.push_back({kg.relation(s.at("relation").get<std::string>()), s.at("inverse").get<bool>(),
                           type(s.at("type").get<std::string>())});
    }
    return p;
}

nlohmann::json plan_to_json(const RetrievalPlan& plan, const KnowledgeGraph& kg) {
    nlohmann::json j;
    j["question"] = plan.question;
    j["mode"] = to_string(plan.mode);
    j["mixed"] = plan.mixed;
    j["unroutable"] = plan.unroutable;
    j["matched_question"] = plan.matched_question ? nlohmann::json(*plan.matched_question) : nlohmann::json(nullptr);
    j["top_similarity"] = plan.top_similarity;
    j["steps"] = nlohmann::json::array();
    for (const auto& s : plan.steps) {
        nlohmann::json sj;
        sj["text"] = s.text;
        sj["anchors"] = nlohmann::json::array();
        for (EntityId e : s.anchors) sj["anchors"].push_back(kg.name(e));
        sj["depends_on"] = s.depends_on ? nlohmann::json(*s.depends_on) : nlohmann::json(nullptr);
        sj["pattern"] = pattern_to_json(s.pattern, kg);
        sj["source"] = s.source == Subquestion::Source::template_adapted ? "template-adapted" : "path-segment";
        j["steps"].push_back(std::move(sj));
    }
    j["assignments"] = nlohmann::json::array();
    for (const auto& a : plan.assignments) {
        j["assignments"].push_back({{"step", a.step},
                                    {"agent", a.agent},
                                    {"subgraphs", a.subgraphs},
                                    {"match", a.match},
                                    {"rerouted", a.rerouted}});
    }
    j["anchors"] = nlohmann::json::array();
    for (EntityId e : plan.anchors) j["anchors"].push_back(kg.name(e));
    j["answer_pattern"] = plan.answer_pattern ? pattern_to_json(*plan.answer_pattern, kg) : nlohmann::json(nullptr);
    nlohmann::json conf = nlohmann::json::object();
    for (const auto& [agent, c] : plan.confidence) conf[std::to_string(agent)] = c;
    j["confidence"] = std::move(conf);
    j["notes"] = plan.notes;
    return j;
}

RetrievalPlan plan_from_json(const nlohmann::json& j, const KnowledgeGraph& kg) {
    RetrievalPlan plan;
    plan.question = j.at("question").get<std::string>();
    plan.mode = j.at("mode").get<std::string>() == "similar" ? PlanMode::similar : PlanMode::path_driven;
    plan.mixed = j.at("mixed").get<bool>();
    plan.unroutable = j.at("unroutable").get<bool>();
    if (!j.at("matched_question").is_null()) plan.matched_question = j["matched_question"].get<std::string>();
    plan.top_similarity = j.at("top_similarity").get<double>();
    for (const auto& sj : j.at("steps")) {
        Subquestion s;
        s.text = sj.at("text").get<std::string>();
        for (const auto& a : sj.at("anchors")) s.anchors.push_back(kg.entity(a.get<std::string>()));
        if (!sj.at("depends_on").is_null()) s.depends_on = sj["depends_on"].get<std::size_t>();
        s.pattern = pattern_from_json(sj.at("pattern"), kg);
        s.source = sj.at("source").get<std::string>() == "template-adapted" ? Subquestion::Source::template_adapted
                                                                             : Subquestion::Source::path_segment;
        plan.steps.push_back(std::move(s));
    }
    for (const auto& aj : j.at("assignments")) {
        plan.assignments.push_back({aj.at("step").get<std::size_t>(), aj.at("agent").get<std::size_t>(),
                                    aj.at("subgraphs").get<std::vector<std::size_t>>(), aj.at("match").get<double>(),
                                    aj.at("rerouted").get<bool>()});
    }
    for (const auto& a : j.at("anchors")) plan.anchors.push_back(kg.entity(a.get<std::string>()));
    if (!j.at("answer_pattern").is_null()) plan.answer_pattern = pattern_from_json(j["answer_pattern"], kg);
    for (const auto& [k, v] : j.at("confidence").items()) plan.confidence[std::stoul(k)] = v.get<double>();
    plan.notes = j.value("notes", std::vector<std::string>{});
    return plan;
}

nlohmann::json decompositions_to_json(const QuestionBase& base, const KnowledgeGraph& kg) {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& rec : base.records()) {
        if (rec.decomposition.empty()) continue;
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& d : rec.decomposition) {
            steps.push_back({{"pattern", pattern_to_json(d.pattern, kg)},
                             {"anchored", d.anchored},
                             {"agent", d.agent},
                             {"subgraphs", d.subgraphs}});
        }
        doc[rec.id] = std::move(steps);
    }
    return doc;
}

void decompositions_from_json(QuestionBase& base, const nlohmann::json& doc, const KnowledgeGraph& kg) {
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < base.size(); ++i) by_id[base.record(i).id] = i;
    for (const auto& [id, steps] : doc.items()) {
        auto it = by_id.find(id);
        if (it == by_id.end()) continue;
        std::vector<DecompositionStep> out;
        for (const auto& s : steps) {
            out.push_back({pattern_from_json(s.at("pattern"), kg), s.at("anchored").get<bool>(),
                           s.at("agent").get<std::size_t>(), s.at("subgraphs").get<std::vector<std::size_t>>()});
        }
        base.set_decomposition(it->second, std::move(out));
    }
}

}  // namespace splitrag
