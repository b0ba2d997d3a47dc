#pragma once
// Per-agent retrieval: anchored traversal inside the assigned subgraphs,
// triple collection and evidence text.

#include "splitrag/gateway.hpp"
#include "splitrag/kg.hpp"
#include "splitrag/partition.hpp"
#include "splitrag/router.hpp"

#include "json.hpp"

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace splitrag {

struct RetrieverConfig {
    double theta_match = 0.5;
    std::size_t workers = 4;
};

struct RetrievalResult {
    std::size_t assignment = 0;
    std::size_t step = 0;
    std::size_t agent = 0;
    std::vector<EntityId> anchors;       // anchors present in the activated subgraphs
    std::vector<std::size_t> activated;  // subgraphs holding at least one anchor
    std::vector<Path> paths;
    std::vector<TripleId> triples;       // sorted, unique
    std::vector<EntityId> outputs;       // ends of paths realizing the whole step pattern
    std::string evidence;
    bool type_level = false;  // Match replaced by pattern instantiability
    bool no_evidence = false;
    bool degraded = false;
    bool failed = false;
    std::string error;
    double millis = 0.0;
};

// |Entities(p) & Entities(t)| / |Entities(t)|; 0 for an empty `targets`.
double path_match(const Path& p, std::span<const EntityId> targets);

// Share of the pattern's leading steps the path reproduces.
double pattern_match(const KnowledgeGraph& kg, const Path& p, const TypePattern& pattern);

// Simple paths of 1 or 2 hops from the anchors over the subgraphs' triples.
// With linked anchors a path is kept when path_match >= theta_match;
// otherwise (`type_level`) when pattern_match >= theta_match.
std::vector<Path> traverse(const KnowledgeGraph& kg, std::span<const EntityId> anchors,
                           std::span<const Subgraph* const> subgraphs, const TypePattern& pattern,
                           double theta_match, bool type_level);

// Convenience form for one subgraph and a subquestion with linked anchors.
std::vector<Path> traverse(const KnowledgeGraph& kg, const Subquestion& subq, const Subgraph& subgraph,
                           double theta_match);

std::vector<TripleId> collect_triples(const KnowledgeGraph& kg, std::span<const Path> paths);

// Sorted lines, one per triple, as "head — relation — tail".
std::string render_triples(const KnowledgeGraph& kg, std::span<const TripleId> triples);

struct Evidence {
    std::string text;
    bool no_evidence = false;
    bool degraded = false;
};

Evidence textualize(const KnowledgeGraph& kg, std::span<const TripleId> triples, Gateway& gateway);

// One result per assignment in assignment order. Steps run in dependency
// waves; assignments within a wave run on up to cfg.workers threads.
std::vector<RetrievalResult> run_plan(const RetrievalPlan& plan, std::span<const Subgraph> subgraphs,
                                      const KnowledgeGraph& kg, Gateway& gateway, const RetrieverConfig& cfg);

// Distinct activated subgraphs and the entity total over them.
std::vector<std::size_t> activated_subgraphs(std::span<const RetrievalResult> results);
std::size_t touched_entities(std::span<const RetrievalResult> results, std::span<const Subgraph> subgraphs);

nlohmann::json trace_to_json(const RetrievalPlan& plan, std::span<const RetrievalResult> results,
                             std::span<const Subgraph> subgraphs, const KnowledgeGraph& kg);

}  // namespace splitrag
