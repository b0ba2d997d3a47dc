#pragma once
// Question-driven graph partitioning.
//
// Training paths are cut into 1/2-hop segments. Segments with the same
// type pattern that touch each other seed a candidate subgraph; candidates
// are then merged greedily by information gain
//
//     IG(S) = sum_i [ sign * H(P|s_i) - lambda * H(s_i) ]
//     H(P|s_i) = -sum_j P(p_j|s_i) ln P(p_j|s_i)     over the segment support
//     H(s_i)   = |V_si|/|V| * ln(|V|/|V_si|)
//
// (natural log throughout; sign = +1 is the default) subject to a hard
// entity cap per subgraph. Subgraphs own their triples exclusively; only
// boundary entities may carry several colors.

#include "splitrag/error.hpp"
#include "splitrag/kg.hpp"
#include "splitrag/question.hpp"
#include "splitrag/vector.hpp"

#include "json.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace splitrag {

struct PartitionConfig {
    double lambda = 0.5;
    std::optional<std::size_t> eta_max;  // unset: ceil(|V| / 4)
    double theta_merge = 0.0;
    std::size_t t_max = 1000;
    std::optional<std::size_t> tau_min;  // unset: min(3, eta_max)
    int entropy_sign = 1;                // +1 as printed, -1 rewards concentration

    std::size_t resolved_eta_max(std::size_t total_entities) const;
    std::size_t resolved_tau_min(std::size_t total_entities) const;
    // Throws ConfigError when an invariant on the values is broken.
    void validate(std::size_t total_entities) const;
};

// One distinct training segment and how often it occurs.
struct SupportEntry {
    Path segment;  // canonical orientation
    std::size_t count = 0;

    friend auto operator<=>(const SupportEntry&, const SupportEntry&) = default;
};

struct Subgraph {
    std::size_t id = 0;
    std::vector<EntityId> entities;  // sorted, unique
    std::vector<TripleId> triples;   // sorted, unique
    std::vector<SupportEntry> support;
    SparseVector signature;          // (entity type, relation) incidence counts

    std::size_t size() const noexcept { return entities.size(); }
    bool has_entity(EntityId e) const;
    bool has_triple(TripleId t) const;
    std::size_t support_total() const;
};

// Signature of a triple set: "type>relation" for heads, "type<relation" for
// tails.
SparseVector signature_of(const KnowledgeGraph& kg, std::span<const TripleId> triples);

// True when the triples of `s` connect all of its entities.
bool is_connected(const Subgraph& s, const KnowledgeGraph& kg);

struct IgReport {
    struct Entry {
        std::size_t subgraph = 0;
        double conditional_entropy = 0.0;
        double size_penalty = 0.0;
        double ig = 0.0;
    };

    std::vector<Entry> entries;
    double total = 0.0;
};

// Per-subgraph IG term. Empty support contributes zero entropy.
IgReport::Entry subgraph_information_gain(const Subgraph& s, const PartitionConfig& cfg, std::size_t total_entities);

IgReport information_gain(std::span<const Subgraph> subgraphs, const PartitionConfig& cfg,
                          std::size_t total_entities, Diagnostics* diag = nullptr);

struct MergeRecord {
    std::size_t a = 0;
    std::size_t b = 0;
    double delta = 0.0;
    double ig_before = 0.0;
    double ig_after = 0.0;
};

struct AbsorbRecord {
    std::size_t small = 0;
    std::optional<std::size_t> into;  // unset: kept standalone
    double delta = 0.0;
    std::string note;
};

struct MergeOutcome {
    std::vector<Subgraph> subgraphs;
    std::vector<MergeRecord> merges;
    std::vector<AbsorbRecord> absorptions;
    std::size_t rounds = 0;
};

struct ColorMap {
    std::map<EntityId, std::set<std::size_t>> colors;  // every entity; empty = uncovered
    std::vector<EntityId> boundary;                    // two or more colors
    std::vector<EntityId> uncovered;
};

ColorMap assign_colors(std::span<const Subgraph> subgraphs, const KnowledgeGraph& kg);

struct PartitionResult {
    PartitionConfig config;
    std::size_t total_entities = 0;
    std::size_t eta_max = 0;
    std::size_t tau_min = 0;
    std::size_t seed_count = 0;
    std::vector<Subgraph> subgraphs;
    IgReport report;
    std::vector<MergeRecord> merges;
    std::vector<AbsorbRecord> absorptions;
    ColorMap colors;
    std::map<std::string, std::vector<std::string>> clusters;  // cluster key -> question ids
    std::vector<std::string> warnings;
};

class Partitioner {
public:
    Partitioner(const KnowledgeGraph& kg, const QuestionBase& base, PartitionConfig cfg);

    std::vector<Subgraph> seed_candidates(Diagnostics* diag = nullptr) const;
    MergeOutcome greedy_merge(std::vector<Subgraph> candidates) const;
    PartitionResult run() const;

    // Union of two subgraphs with its support recomputed by containment.
    Subgraph unite(const Subgraph& a, const Subgraph& b) const;
    double merge_gain(const Subgraph& a, const Subgraph& b) const;
    bool mergeable(const Subgraph& a, const Subgraph& b) const;

    std::size_t eta_max() const noexcept { return eta_max_; }
    std::size_t tau_min() const noexcept { return tau_min_; }
    const PartitionConfig& config() const noexcept { return cfg_; }

private:
    struct Segment {
        Path path;                      // canonical orientation
        TypePattern pattern;            // canonical
        std::vector<TripleId> triples;  // sorted
        std::vector<EntityId> entities; // sorted
        std::size_t count = 0;
    };

    void catalog_segments(Diagnostics* diag);
    Subgraph make_subgraph(std::size_t id, std::vector<TripleId> triples) const;
    std::vector<SupportEntry> support_of(std::span<const TripleId> triples) const;

    const KnowledgeGraph& kg_;
    const QuestionBase& base_;
    PartitionConfig cfg_;
    std::size_t eta_max_ = 0;
    std::size_t tau_min_ = 0;
    std::vector<Segment> segments_;
    std::map<TripleId, std::vector<std::size_t>> segments_by_triple_;
    std::vector<std::string> catalog_warnings_;
};

nlohmann::json config_to_json(const PartitionConfig& cfg, std::size_t total_entities);
nlohmann::json partition_to_json(const PartitionResult& result, const KnowledgeGraph& kg);
// Rebuilds the subgraphs written by partition_to_json.
std::vector<Subgraph> subgraphs_from_json(const nlohmann::json& doc, const KnowledgeGraph& kg);

}  // namespace splitrag
