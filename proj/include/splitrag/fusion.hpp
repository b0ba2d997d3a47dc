#pragma once
// Result fusion: aggregate agent triples, drop logically conflicting ones
// by maximum-weight independent set, then synthesize the answer.

#include "splitrag/gateway.hpp"
#include "splitrag/kg.hpp"
#include "splitrag/question.hpp"
#include "splitrag/retriever.hpp"
#include "splitrag/router.hpp"

#include "json.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace splitrag {

struct Aggregate {
    std::vector<TripleId> triples;                            // TRI_all, sorted
    std::map<TripleId, std::vector<std::size_t>> provenance;  // contributing agents
    std::map<TripleId, double> score;                         // s(tau)
    std::string evidence;                                     // ET_all
    bool empty = false;
};

// Throws Error on an empty result list. Agents missing from `conf` count 0.05.
Aggregate aggregate(std::span<const RetrievalResult> results, const std::map<std::size_t, double>& conf);

enum class ConflictRule { functional, negation };

struct ConflictEdge {
    std::size_t a = 0;  // vertex indices, a < b
    std::size_t b = 0;
    ConflictRule rule = ConflictRule::functional;
};

struct ConflictGraph {
    std::vector<TripleId> vertices;
    std::vector<double> score;
    std::vector<ConflictEdge> edges;

    bool conflicting(std::size_t a, std::size_t b) const;
};

// True when the two triples break a functional relation or a declared
// negation pair.
bool conflict(const KnowledgeGraph& kg, const Triple& x, const Triple& y, ConflictRule* rule = nullptr);

ConflictGraph detect_conflicts(const KnowledgeGraph& kg, std::span<const TripleId> triples,
                               const std::map<TripleId, double>& score);

struct Resolution {
    std::vector<TripleId> kept;  // sorted
    std::vector<TripleId> removed;
    double kept_weight = 0.0;
    bool approximate = false;  // some component above the exact limit
};

inline constexpr std::size_t exact_component_limit = 20;

Resolution resolve(const ConflictGraph& g);

struct Answer {
    std::vector<std::string> entities;  // best first
    std::vector<double> scores;
    std::string text;
    bool no_evidence = false;
    bool degraded = false;
    bool fallback_rule = false;  // pattern walk found nothing
};

// Stub extraction: walk the plan's answer pattern over the clean triples
// from the plan anchors; if that finds nothing, take the answer-side
// endpoints of clean triples matching the pattern's last step.
Answer extract_answer(const KnowledgeGraph& kg, std::span<const TripleId> clean, const std::map<TripleId, double>& score,
                      const RetrievalPlan& plan);

Answer synthesize(const KnowledgeGraph& kg, std::span<const TripleId> clean, const std::map<TripleId, double>& score,
                  const std::string& evidence, const QuestionRecord& q, const RetrievalPlan& plan, Gateway& gateway);

struct FusionConfig {
    bool detect_conflicts = true;
};

struct FusionResult {
    Aggregate all;
    ConflictGraph graph;
    Resolution resolution;
    Answer answer;
};

FusionResult fuse(const KnowledgeGraph& kg, std::span<const RetrievalResult> results, const QuestionRecord& q,
                  const RetrievalPlan& plan, Gateway& gateway, const FusionConfig& cfg);

nlohmann::json fusion_to_json(const FusionResult& f, const KnowledgeGraph& kg);

}  // namespace splitrag
