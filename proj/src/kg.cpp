#include "splitrag/kg.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <sstream>

namespace splitrag {

namespace {

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Schema Schema::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error("schema: top-level value must be an object");
    Schema s;
    if (!doc.contains("entity_types") || !doc["entity_types"].is_object())
        throw Error("schema: missing object 'entity_types'");
    for (const auto& [name, type] : doc["entity_types"].items()) {
        if (!type.is_string() || type.get<std::string>().empty())
            throw Error("schema: entity '" + name + "' has no type label");
        s.entity_types.emplace(name, type.get<std::string>());
    }
    if (doc.contains("functional_relations")) {
        for (const auto& r : doc["functional_relations"]) s.functional_relations.insert(r.get<std::string>());
    }
    if (doc.contains("negation_pairs")) {
        for (const auto& pair : doc["negation_pairs"]) {
            if (!pair.is_array() || pair.size() != 2)
                throw Error("schema: negation_pairs entries must be [relation, negated_relation]");
            s.negation_pairs.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
        }
    }
    if (doc.contains("reflexive_relations")) {
        for (const auto& r : doc["reflexive_relations"]) s.reflexive_relations.insert(r.get<std::string>());
    }
    return s;
}

Schema Schema::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open schema file " + file.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("schema " + file.string() + ": " + e.what());
    }
    return from_json(doc);
}

KnowledgeGraph KnowledgeGraph::build(const Schema& schema,
                                     std::span<const NamedTriple> triples,
                                     Diagnostics* diag) {
    if (triples.empty()) throw Error("empty graph");

    KnowledgeGraph g;
    auto intern_type = [&](const std::string& label) {
        auto [it, inserted] = g.type_index_by_name_.try_emplace(label, static_cast<TypeId>(g.type_names_.size()));
        if (inserted) g.type_names_.push_back(label);
        return it->second;
    };
    auto intern_entity = [&](const std::string& name, std::size_t row) {
        if (auto it = g.entity_index_.find(name); it != g.entity_index_.end()) return it->second;
        auto type = schema.entity_types.find(name);
        if (type == schema.entity_types.end())
            throw Error("triple " + std::to_string(row) + ": unknown entity type for '" + name + "'");
        EntityId id{static_cast<std::uint32_t>(g.entity_names_.size())};
        g.entity_names_.push_back(name);
        g.entity_types_.push_back(intern_type(type->second));
        g.entity_index_.emplace(name, id);
        return id;
    };
    auto intern_relation = [&](const std::string& name) {
        auto [it, inserted] =
            g.relation_index_.try_emplace(name, RelationId{static_cast<std::uint32_t>(g.relation_names_.size())});
        if (inserted) g.relation_names_.push_back(name);
        return it->second;
    };

    std::set<Triple> seen;
    for (std::size_t row = 0; row < triples.size(); ++row) {
        const auto& [h, r, t] = triples[row];
        if (h.empty() || r.empty() || t.empty())
            throw Error("triple " + std::to_string(row + 1) + ": empty field");
        Triple tr{intern_entity(h, row + 1), intern_relation(r), intern_entity(t, row + 1)};
        if (tr.head == tr.tail && !schema.reflexive_relations.contains(r))
            throw Error("triple " + std::to_string(row + 1) + ": self-loop on '" + h + "' via non-reflexive relation '" + r + "'");
        if (!seen.insert(tr).second) {
            if (diag) diag->warn("duplicate triple (" + h + ", " + r + ", " + t + ") ignored");
            continue;
        }
        g.triples_.push_back(tr);
    }
    // Typed entities that never occur in a triple are still part of V.
    for (const auto& [name, type] : schema.entity_types) {
        if (!g.entity_index_.contains(name)) intern_entity(name, 0);
    }

    g.out_.assign(g.entity_names_.size(), {});
    g.in_.assign(g.entity_names_.size(), {});
    g.type_index_.assign(g.type_names_.size(), {});
    for (TripleId id = 0; id < g.triples_.size(); ++id) {
        const auto& t = g.triples_[id];
        g.out_[t.head.value].push_back(id);
        g.in_[t.tail.value].push_back(id);
        g.ordered_[{t.head, t.relation}].emplace_back(t.tail, id);
    }
    for (auto& [key, tails] : g.ordered_) std::sort(tails.begin(), tails.end());
    for (std::uint32_t e = 0; e < g.entity_types_.size(); ++e) g.type_index_[g.entity_types_[e]].push_back(EntityId{e});

    for (const auto& name : schema.functional_relations) {
        if (auto r = g.find_relation(name)) g.functional_.insert(*r);
    }
    for (const auto& [a, b] : schema.negation_pairs) {
        auto ra = g.find_relation(a);
        auto rb = g.find_relation(b);
        if (ra && rb) {
            g.negations_.emplace(*ra, *rb);
            g.negations_.emplace(*rb, *ra);
        }
    }
    return g;
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view name) const {
    auto it = entity_index_.find(std::string(name));
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view name) const {
    auto it = relation_index_.find(std::string(name));
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<TypeId> KnowledgeGraph::find_type(std::string_view name) const {
    auto it = type_index_by_name_.find(std::string(name));
    if (it == type_index_by_name_.end()) return std::nullopt;
    return it->second;
}

EntityId KnowledgeGraph::entity(std::string_view name) const {
    if (auto e = find_entity(name)) return *e;
    throw Error("unknown entity '" + std::string(name) + "'");
}

RelationId KnowledgeGraph::relation(std::string_view name) const {
    if (auto r = find_relation(name)) return *r;
    throw Error("unknown relation '" + std::string(name) + "'");
}

std::optional<TripleId> KnowledgeGraph::find_triple(EntityId head, RelationId rel, EntityId tail) const {
    auto it = ordered_.find({head, rel});
    if (it == ordered_.end()) return std::nullopt;
    const auto& tails = it->second;
    auto pos = std::lower_bound(tails.begin(), tails.end(), std::pair{tail, TripleId{0}});
    if (pos == tails.end() || pos->first != tail) return std::nullopt;
    return pos->second;
}

std::vector<EntityId> KnowledgeGraph::tails(EntityId head, RelationId rel) const {
    std::vector<EntityId> out;
    if (auto it = ordered_.find({head, rel}); it != ordered_.end()) {
        for (const auto& [tail, id] : it->second) out.push_back(tail);
    }
    return out;
}

std::vector<Edge> KnowledgeGraph::edges(EntityId e) const {
    std::vector<Edge> out;
    for (TripleId id : out_.at(e.value)) out.push_back({triples_[id].tail, triples_[id].relation, false, id});
    for (TripleId id : in_.at(e.value)) out.push_back({triples_[id].head, triples_[id].relation, true, id});
    return out;
}

bool KnowledgeGraph::is_negation_pair(RelationId a, RelationId b) const {
    return negations_.contains({a, b});
}

std::string KnowledgeGraph::render(const Triple& t) const {
    return name(t.head) + " — " + name(t.relation) + " — " + name(t.tail);
}

KnowledgeGraph load_graph(const std::filesystem::path& triples_file,
                          const std::filesystem::path& schema_file,
                          Diagnostics* diag) {
    std::ifstream in(triples_file);
    if (!in) throw Error("cannot open triples file " + triples_file.string());
    Schema schema = Schema::load(schema_file);

    std::vector<KnowledgeGraph::NamedTriple> rows;
    std::vector<std::size_t> line_of_row;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(std::move(line));
        if (blank(line) || line.front() == '#') continue;
        KnowledgeGraph::NamedTriple fields;
        std::size_t start = 0;
        std::size_t n = 0;
        for (;;) {
            auto tab = line.find('\t', start);
            std::string field = line.substr(start, tab == std::string::npos ? std::string::npos : tab - start);
            if (n >= 3 || field.empty())
                throw ParseError(triples_file.string(), lineno, "expected head<TAB>relation<TAB>tail");
            fields[n++] = std::move(field);
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (n != 3) throw ParseError(triples_file.string(), lineno, "expected head<TAB>relation<TAB>tail");
        rows.push_back(std::move(fields));
        line_of_row.push_back(lineno);
    }
    if (rows.empty()) throw Error("empty graph");

    // Re-raise row-indexed build errors with the file line they came from.
    Diagnostics local;
    try {
        KnowledgeGraph g = KnowledgeGraph::build(schema, rows, &local);
        if (diag) {
            for (auto& w : local.warnings) diag->warn(triples_file.string() + ": " + w);
        }
        return g;
    } catch (const Error& e) {
        std::string msg = e.what();
        if (msg.rfind("triple ", 0) == 0) {
            auto colon = msg.find(':');
            std::size_t row = std::stoul(msg.substr(7, colon - 7));
            if (row >= 1 && row <= line_of_row.size())
                throw ParseError(triples_file.string(), line_of_row[row - 1], msg.substr(colon + 2));
        }
        throw;
    }
}

Path Path::reversed() const {
    Path r;
    r.entities.assign(entities.rbegin(), entities.rend());
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) r.steps.push_back({it->relation, !it->inverse});
    return r;
}

Triple Path::step_triple(std::size_t i) const {
    const auto& s = steps.at(i);
    return s.inverse ? Triple{entities.at(i + 1), s.relation, entities.at(i)}
                     : Triple{entities.at(i), s.relation, entities.at(i + 1)};
}

std::vector<TripleId> Path::triple_ids(const KnowledgeGraph& kg) const {
    std::vector<TripleId> ids;
    ids.reserve(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        auto t = step_triple(i);
        auto id = kg.find_triple(t.head, t.relation, t.tail);
        if (!id) throw Error("path step " + std::to_string(i) + " is not a stored triple");
        ids.push_back(*id);
    }
    return ids;
}

bool Path::valid_in(const KnowledgeGraph& kg) const {
    if (entities.size() != steps.size() + 1) return false;
    for (auto e : entities) {
        if (e.value >= kg.entity_count()) return false;
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i].relation.value >= kg.relation_count()) return false;
        auto t = step_triple(i);
        if (!kg.find_triple(t.head, t.relation, t.tail)) return false;
    }
    return true;
}

std::vector<std::string> Path::to_names(const KnowledgeGraph& kg) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < entities.size(); ++i) {
        out.push_back(kg.name(entities[i]));
        if (i < steps.size()) out.push_back(kg.name(steps[i].relation));
    }
    return out;
}

std::string Path::render(const KnowledgeGraph& kg) const {
    std::string s;
    for (std::size_t i = 0; i < entities.size(); ++i) {
        s += kg.name(entities[i]);
        if (i < steps.size()) {
            s += steps[i].inverse ? " <-" : " -";
            s += kg.name(steps[i].relation);
            s += steps[i].inverse ? "- " : "-> ";
        }
    }
    return s;
}

Path Path::from_names(const KnowledgeGraph& kg, std::span<const std::string> tokens) {
    if (tokens.size() < 3 || tokens.size() % 2 == 0)
        throw Error("path must alternate entity, relation, entity and have at least one hop");
    Path p;
    for (std::size_t i = 0; i < tokens.size(); i += 2) p.entities.push_back(kg.entity(tokens[i]));
    for (std::size_t i = 1; i < tokens.size(); i += 2) {
        RelationId r = kg.relation(tokens[i]);
        EntityId a = p.entities[i / 2];
        EntityId b = p.entities[i / 2 + 1];
        if (kg.find_triple(a, r, b)) {
            p.steps.push_back({r, false});
        } else if (kg.find_triple(b, r, a)) {
            p.steps.push_back({r, true});
        } else {
            throw Error("path step (" + tokens[i - 1] + ", " + tokens[i] + ", " + tokens[i + 1] +
                        ") is not a stored triple in either direction");
        }
    }
    return p;
}

PathSegment::PathSegment(Path path) : path_(std::move(path)) {
    if (path_.hops() < 1 || path_.hops() > 2) throw Error("path segment must have 1 or 2 hops");
}

std::vector<PathSegment> split_into_segments(const Path& path) {
    if (path.hops() == 0) throw Error("cannot split a zero-hop path");
    std::vector<PathSegment> out;
    for (std::size_t start = 0; start < path.hops(); start += 2) {
        std::size_t len = std::min<std::size_t>(2, path.hops() - start);
        Path piece;
        piece.entities.assign(path.entities.begin() + start, path.entities.begin() + start + len + 1);
        piece.steps.assign(path.steps.begin() + start, path.steps.begin() + start + len);
        out.emplace_back(std::move(piece));
    }
    return out;
}

std::set<EntityId> neighbors(const KnowledgeGraph& kg, EntityId e, int depth) {
    if (e.value >= kg.entity_count()) throw Error("unknown entity id " + std::to_string(e.value));
    if (depth < 1 || depth > 2) throw Error("neighbor depth must be 1 or 2");
    std::set<EntityId> seen{e};
    std::vector<EntityId> frontier{e};
    for (int d = 0; d < depth; ++d) {
        std::vector<EntityId> next;
        for (EntityId u : frontier) {
            for (const auto& edge : kg.edges(u)) {
                if (seen.insert(edge.neighbor).second) next.push_back(edge.neighbor);
            }
        }
        frontier = std::move(next);
    }
    seen.erase(e);
    return seen;
}

TypePattern TypePattern::reversed() const {
    TypePattern r;
    if (steps.empty()) {
        r.start_type = start_type;
        return r;
    }
    r.start_type = steps.back().type;
    for (std::size_t i = steps.size(); i-- > 0;) {
        TypeId type = i == 0 ? start_type : steps[i - 1].type;
        r.steps.push_back({steps[i].relation, !steps[i].inverse, type});
    }
    return r;
}

TypePattern TypePattern::canonical() const {
    auto r = reversed();
    return r < *this ? r : *this;
}

std::string TypePattern::key(const KnowledgeGraph& kg) const {
    std::string s = kg.type_name(start_type);
    for (const auto& step : steps) {
        s += step.inverse ? " <-" : " -";
        s += kg.name(step.relation);
        s += step.inverse ? "- " : "-> ";
        s += kg.type_name(step.type);
    }
    return s;
}

TypePattern pattern_of(const KnowledgeGraph& kg, const Path& path) {
    TypePattern p;
    p.start_type = kg.type_of(path.entities.front());
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        p.steps.push_back({path.steps[i].relation, path.steps[i].inverse, kg.type_of(path.entities[i + 1])});
    }
    return p;
}

}  // namespace splitrag
