#pragma once
// Question/subgraph association and agent territories.
//
// A_ij is the share of q_i's path segments that lie entirely inside
// subgraph j. Groups are carved greedily from the densest coverage set
//     rho(C_i) = sum_j |C_i & C_j| / sqrt(|C_i|)
// trimmed to N_max by coverage frequency and kept only when coherent.

#include "splitrag/error.hpp"
#include "splitrag/partition.hpp"
#include "splitrag/question.hpp"

#include "json.hpp"

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace splitrag {

struct AssociationMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;            // row-major
    std::vector<std::size_t> path_counts;  // |Paths(q_i)|

    double at(std::size_t i, std::size_t j) const { return values.at(i * cols + j); }
    std::vector<double> row(std::size_t i) const;
};

using CoverageSet = std::set<std::size_t>;

// Paths(q_i) are the segments of q_i's path context.
AssociationMatrix build_matrix(const QuestionBase& base, std::span<const Subgraph> subgraphs,
                               const KnowledgeGraph& kg, Diagnostics* diag = nullptr);

std::vector<CoverageSet> coverage_sets(const AssociationMatrix& a);

double coverage_density(const CoverageSet& c, std::span<const CoverageSet> all);

struct AllocationConfig {
    std::size_t n_max = 5;
    double theta_coh = 0.3;

    void validate() const;
};

struct AgentGroup {
    std::size_t id = 0;
    std::vector<std::size_t> members;  // subgraph ids, ascending
    SparseVector centroid;             // mean of unit-length member signatures
    double coherence = 1.0;
    bool from_leftovers = false;
};

// Mean cosine of the unit-length member signatures to their mean.
double group_coherence(std::span<const SparseVector> signatures);
double group_coherence(const AgentGroup& g, std::span<const Subgraph> subgraphs);

struct LeftoverRecord {
    std::size_t subgraph = 0;
    std::size_t group = 0;
    double similarity = 0.0;
    bool new_group = false;
    bool coherence_violation = false;
};

struct CoordinationCost {
    std::size_t by_subgraphs = 0;  // sum_i ceil(|C_i| / N_max)
    std::size_t by_groups = 0;     // sum_i |groups touched by C_i|
};

struct Allocation {
    AllocationConfig config;
    AssociationMatrix matrix;
    std::vector<AgentGroup> groups;
    std::vector<std::size_t> owner;  // subgraph id -> group id
    std::vector<LeftoverRecord> leftovers;
    std::vector<std::size_t> skipped;  // question indices whose candidate failed coherence
    CoordinationCost cost;
    std::vector<std::string> warnings;

    std::vector<std::size_t> groups_touched(std::size_t question) const;
};

// Subgraph ids must equal their positions.
std::vector<AgentGroup> allocate(std::span<const Subgraph> subgraphs, std::span<const CoverageSet> coverage,
                                 const AllocationConfig& cfg, std::vector<LeftoverRecord>* leftovers = nullptr,
                                 std::vector<std::size_t>* skipped = nullptr);

Allocation run_allocation(const QuestionBase& base, std::span<const Subgraph> subgraphs, const KnowledgeGraph& kg,
                          const AllocationConfig& cfg);

CoordinationCost coordination_cost(std::span<const CoverageSet> coverage, std::span<const std::size_t> owner,
                                   std::size_t n_max);

nlohmann::json allocation_to_json(const Allocation& a, const QuestionBase& base);
// Restores groups and ownership; matrix and audit data are not reloaded.
Allocation allocation_from_json(const nlohmann::json& doc, std::span<const Subgraph> subgraphs);

}  // namespace splitrag
