#pragma once
// Question routing.
//
// A new question either reuses the decomposition of a close training
// question (similar mode) or is split into the 1/2-hop patterns reachable
// from its linked entities (path-driven mode). Each subquestion goes to
// the agent maximizing Conf(a|D) / Load(a).

#include "splitrag/allocation.hpp"
#include "splitrag/error.hpp"
#include "splitrag/kg.hpp"
#include "splitrag/partition.hpp"
#include "splitrag/question.hpp"

#include "json.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace splitrag {

struct RouterConfig {
    std::size_t k = 5;
    double alpha = 0.5;
    double beta = 0.1;
    double theta_sim = 0.85;
    double theta_match = 0.5;
    double theta_align = 0.5;

    void validate() const;
};

struct Subquestion {
    enum class Source { template_adapted, path_segment };

    std::string text;
    std::vector<EntityId> anchors;      // empty when chained
    std::optional<std::size_t> depends_on;  // step whose outputs anchor this one
    TypePattern pattern;                // oriented from the anchor side
    Source source = Source::path_segment;

    TypeId expected_type() const { return pattern.end_type(); }
};

struct Assignment {
    std::size_t step = 0;
    std::size_t agent = 0;
    std::vector<std::size_t> subgraphs;  // all owned by `agent`
    double match = 0.0;
    bool rerouted = false;
};

enum class PlanMode { similar, path_driven };

struct RetrievalPlan {
    std::string question;
    PlanMode mode = PlanMode::path_driven;
    bool mixed = false;
    bool unroutable = false;
    std::optional<std::string> matched_question;
    double top_similarity = 0.0;
    std::vector<Subquestion> steps;
    std::vector<Assignment> assignments;
    std::vector<EntityId> anchors;           // where the answer walk starts
    std::optional<TypePattern> answer_pattern;
    std::map<std::size_t, double> confidence;
    std::vector<std::string> notes;
};

struct SimilarQuestion {
    std::size_t index = 0;  // into the question base
    double cosine = 0.0;
    std::size_t rank = 0;   // position in the raw cosine order
    double sim_etc = 0.0;
    double path_overlap = 0.0;
    double score = 0.0;
};

// Mean match per agent, clamped to [0.05, 1].
std::map<std::size_t, double> agent_confidence(const RetrievalPlan& plan);

// Canonical 1/2-hop patterns reachable from the entities.
std::set<TypePattern> inferable_patterns(const KnowledgeGraph& kg, std::span<const EntityId> entities);

// Stores a decomposition on every path-annotated record: one step per
// segment, split into single hops where no subgraph holds the whole segment.
void build_decompositions(QuestionBase& base, std::span<const Subgraph> subgraphs, const Allocation& alloc,
                          const KnowledgeGraph& kg);

class Router {
public:
    Router(const KnowledgeGraph& kg, const QuestionBase& base, std::span<const Subgraph> subgraphs,
           const Allocation& alloc, RouterConfig cfg);

    std::vector<SimilarQuestion> similar_questions(const QuestionRecord& q) const;
    RetrievalPlan plan_by_similarity(const QuestionRecord& q, const SimilarQuestion& sim) const;
    // Throws Error when q has no linked entity.
    RetrievalPlan plan_by_paths(const QuestionRecord& q) const;
    RetrievalPlan route(const QuestionRecord& q) const;

    // Fraction of the pattern's steps walkable from `anchor` inside the
    // subgraphs (longest matched prefix over hops).
    double anchored_match(const TypePattern& p, EntityId anchor, std::span<const std::size_t> subgraphs) const;
    // Fraction of the pattern's (type, relation, type) steps present in the subgraph.
    double type_match(const TypePattern& p, std::size_t subgraph) const;
    // Share of the pattern's entity types present in the subgraphs.
    double cover(const TypePattern& p, std::span<const std::size_t> subgraphs) const;

    bool anchorable(const QuestionRecord& q, const QuestionRecord& sim) const;

    const RouterConfig& config() const noexcept { return cfg_; }

private:
    using TypedRelation = std::tuple<TypeId, RelationId, TypeId>;

    std::optional<EntityId> anchor_for(const QuestionRecord& q, TypeId type) const;
    bool subgraphs_hold(std::span<const std::size_t> subgraphs, TripleId t) const;
    std::vector<std::size_t> agent_subgraphs(std::size_t agent) const;
    // Anchored step routed by path matching; may emit a second, chained
    // single-hop step when no subgraph covers the whole pattern.
    bool route_anchored(RetrievalPlan& plan, std::map<std::size_t, std::size_t>& load, EntityId anchor,
                        const TypePattern& pattern, std::optional<std::size_t> depends_on,
                        Subquestion::Source source, bool rerouted) const;
    void route_chained(RetrievalPlan& plan, std::size_t step, std::optional<std::size_t> preferred_agent) const;
    std::string describe(const TypePattern& p, std::optional<EntityId> anchor) const;

    const KnowledgeGraph& kg_;
    const QuestionBase& base_;
    std::span<const Subgraph> subgraphs_;
    const Allocation& alloc_;
    RouterConfig cfg_;
    std::vector<std::set<TypedRelation>> typed_;
    std::vector<std::set<TypeId>> types_;
    std::vector<std::set<TypePattern>> train_patterns_;
};

std::string to_string(PlanMode m);

nlohmann::json pattern_to_json(const TypePattern& p, const KnowledgeGraph& kg);
TypePattern pattern_from_json(const nlohmann::json& j, const KnowledgeGraph& kg);

nlohmann::json plan_to_json(const RetrievalPlan& plan, const KnowledgeGraph& kg);
RetrievalPlan plan_from_json(const nlohmann::json& j, const KnowledgeGraph& kg);

nlohmann::json decompositions_to_json(const QuestionBase& base, const KnowledgeGraph& kg);
// Applies decompositions keyed by question id; unknown ids are ignored.
void decompositions_from_json(QuestionBase& base, const nlohmann::json& doc, const KnowledgeGraph& kg);

}  // namespace splitrag
