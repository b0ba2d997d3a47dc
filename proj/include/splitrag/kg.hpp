#pragma once
// Typed triple store.
//
// Entities and relations are interned into dense handles on load. Every
// entity carries exactly one type label taken from the schema file. The
// graph is immutable once built, so it can be shared across worker threads
// without locking.
//
// Indexes:
//   - out/in adjacency: entity -> triple ids, each triple once per direction
//   - type index:       type id -> entities of that type (a partition of V)
//   - ordered index:    (head, relation) -> sorted (tail, triple id) pairs

#include "splitrag/error.hpp"

#include "json.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace splitrag {

template <class Tag>
struct Handle {
    std::uint32_t value = 0;

    friend auto operator<=>(const Handle&, const Handle&) = default;
};

using EntityId = Handle<struct EntityTag>;
using RelationId = Handle<struct RelationTag>;
using TypeId = std::uint32_t;
using TripleId = std::uint32_t;

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;

    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct Schema {
    std::map<std::string, std::string> entity_types;
    std::set<std::string> functional_relations;
    std::vector<std::pair<std::string, std::string>> negation_pairs;
    // Relations allowed to link an entity to itself. Optional key.
    std::set<std::string> reflexive_relations;

    static Schema from_json(const nlohmann::json& doc);
    static Schema load(const std::filesystem::path& file);
};

// One adjacency entry seen from a given entity.
struct Edge {
    EntityId neighbor;
    RelationId relation;
    bool inverse = false;  // true when the stored triple points at us
    TripleId triple = 0;
};

class KnowledgeGraph {
public:
    using NamedTriple = std::array<std::string, 3>;

    // Builds a graph from named triples. Duplicates are dropped with a
    // warning; entities listed in the schema but absent from the triples are
    // kept as isolated nodes.
    static KnowledgeGraph build(const Schema& schema,
                                std::span<const NamedTriple> triples,
                                Diagnostics* diag = nullptr);

    std::size_t entity_count() const noexcept { return entity_names_.size(); }
    std::size_t relation_count() const noexcept { return relation_names_.size(); }
    std::size_t triple_count() const noexcept { return triples_.size(); }
    std::size_t type_count() const noexcept { return type_names_.size(); }

    const std::vector<Triple>& triples() const noexcept { return triples_; }
    const Triple& triple(TripleId id) const { return triples_.at(id); }

    const std::string& name(EntityId e) const { return entity_names_.at(e.value); }
    const std::string& name(RelationId r) const { return relation_names_.at(r.value); }
    const std::string& type_name(TypeId t) const { return type_names_.at(t); }
    TypeId type_of(EntityId e) const { return entity_types_.at(e.value); }
    const std::string& type_label(EntityId e) const { return type_names_.at(type_of(e)); }

    std::optional<EntityId> find_entity(std::string_view name) const;
    std::optional<RelationId> find_relation(std::string_view name) const;
    std::optional<TypeId> find_type(std::string_view name) const;
    EntityId entity(std::string_view name) const;  // throws on unknown name
    RelationId relation(std::string_view name) const;

    std::optional<TripleId> find_triple(EntityId head, RelationId rel, EntityId tail) const;

    const std::vector<TripleId>& out_triples(EntityId e) const { return out_.at(e.value); }
    const std::vector<TripleId>& in_triples(EntityId e) const { return in_.at(e.value); }
    std::vector<Edge> edges(EntityId e) const;  // outgoing first, then incoming
    const std::vector<EntityId>& entities_of_type(TypeId t) const { return type_index_.at(t); }

    // Tails reachable from (head, relation) via the ordered index.
    std::vector<EntityId> tails(EntityId head, RelationId rel) const;

    bool is_functional(RelationId r) const { return functional_.contains(r); }
    bool is_negation_pair(RelationId a, RelationId b) const;

    std::string render(const Triple& t) const;

private:
    std::vector<std::string> entity_names_;
    std::vector<TypeId> entity_types_;
    std::vector<std::string> type_names_;
    std::vector<std::string> relation_names_;
    std::unordered_map<std::string, EntityId> entity_index_;
    std::unordered_map<std::string, RelationId> relation_index_;
    std::unordered_map<std::string, TypeId> type_index_by_name_;

    std::vector<Triple> triples_;
    std::vector<std::vector<TripleId>> out_;
    std::vector<std::vector<TripleId>> in_;
    std::vector<std::vector<EntityId>> type_index_;
    std::map<std::pair<EntityId, RelationId>, std::vector<std::pair<EntityId, TripleId>>> ordered_;

    std::set<RelationId> functional_;
    std::set<std::pair<RelationId, RelationId>> negations_;  // stored both ways
};

// Reads a tab-separated triples file and a JSON schema file.
KnowledgeGraph load_graph(const std::filesystem::path& triples_file,
                          const std::filesystem::path& schema_file,
                          Diagnostics* diag = nullptr);

struct PathStep {
    RelationId relation;
    bool inverse = false;  // traversed against the stored direction

    friend auto operator<=>(const PathStep&, const PathStep&) = default;
};

// Alternating entity/relation chain e1 r12 e2 ... en.
struct Path {
    std::vector<EntityId> entities;
    std::vector<PathStep> steps;

    std::size_t hops() const noexcept { return steps.size(); }
    bool empty() const noexcept { return steps.empty(); }
    EntityId front() const { return entities.front(); }
    EntityId back() const { return entities.back(); }

    Path reversed() const;
    Triple step_triple(std::size_t i) const;
    // Stored triple ids of every step. Throws if a step does not resolve.
    std::vector<TripleId> triple_ids(const KnowledgeGraph& kg) const;
    bool valid_in(const KnowledgeGraph& kg) const;
    std::vector<std::string> to_names(const KnowledgeGraph& kg) const;
    std::string render(const KnowledgeGraph& kg) const;

    // Parses ["e", "r", "e", ...]. Each step is matched forward first, then
    // inverted; an unresolvable step or unknown name throws.
    static Path from_names(const KnowledgeGraph& kg, std::span<const std::string> tokens);

    friend auto operator<=>(const Path&, const Path&) = default;
};

// A path of one or two hops; the partitioner's unit of support.
class PathSegment {
public:
    explicit PathSegment(Path path);

    const Path& path() const noexcept { return path_; }
    std::size_t hops() const noexcept { return path_.hops(); }

    friend auto operator<=>(const PathSegment&, const PathSegment&) = default;

private:
    Path path_;
};

// Greedy left-to-right split into 2-hop pieces; the last one may be 1 hop.
std::vector<PathSegment> split_into_segments(const Path& path);

// Entities within `depth` hops of `e` in either direction, excluding `e`.
std::set<EntityId> neighbors(const KnowledgeGraph& kg, EntityId e, int depth);

// Type-level view of a path: start type, then (relation, direction, type)
// per hop.
struct PatternStep {
    RelationId relation;
    bool inverse = false;
    TypeId type = 0;

    friend auto operator<=>(const PatternStep&, const PatternStep&) = default;
};

struct TypePattern {
    TypeId start_type = 0;
    std::vector<PatternStep> steps;

    std::size_t hops() const noexcept { return steps.size(); }
    TypeId end_type() const { return steps.empty() ? start_type : steps.back().type; }
    TypePattern reversed() const;
    // Orientation-independent form: the smaller of the two readings.
    TypePattern canonical() const;
    std::string key(const KnowledgeGraph& kg) const;

    friend auto operator<=>(const TypePattern&, const TypePattern&) = default;
};

TypePattern pattern_of(const KnowledgeGraph& kg, const Path& path);

}  // namespace splitrag
