#include "splitrag/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace splitrag {

std::vector<double> AssociationMatrix::row(std::size_t i) const {
    auto first = values.begin() + static_cast<std::ptrdiff_t>(i * cols);
    return {first, first + static_cast<std::ptrdiff_t>(cols)};
}

AssociationMatrix build_matrix(const QuestionBase& base, std::span<const Subgraph> subgraphs,
                               const KnowledgeGraph& kg, Diagnostics* diag) {
    AssociationMatrix a;
    a.rows = base.size();
    a.cols = subgraphs.size();
    a.values.assign(a.rows * a.cols, 0.0);
    a.path_counts.assign(a.rows, 0);
    for (std::size_t i = 0; i < base.size(); ++i) {
        const auto& rec = base.record(i);
        if (!rec.path) {
            if (diag) diag->warn("question " + rec.id + " has no path; association row is zero");
            continue;
        }
        auto segments = split_into_segments(*rec.path);
        a.path_counts[i] = segments.size();
        for (const auto& seg : segments) {
            auto ids = seg.path().triple_ids(kg);
            for (std::size_t j = 0; j < subgraphs.size(); ++j) {
                bool inside = std::all_of(ids.begin(), ids.end(), [&](TripleId t) { return subgraphs[j].has_triple(t); });
                if (inside) a.values[i * a.cols + j] += 1.0;
            }
        }
        for (std::size_t j = 0; j < a.cols; ++j) a.values[i * a.cols + j] /= static_cast<double>(segments.size());
    }
    return a;
}

std::vector<CoverageSet> coverage_sets(const AssociationMatrix& a) {
    std::vector<CoverageSet> out(a.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) {
            if (a.at(i, j) > 0.0) out[i].insert(j);
        }
    }
    return out;
}

double coverage_density(const CoverageSet& c, std::span<const CoverageSet> all) {
    if (c.empty()) return 0.0;
    std::size_t overlap = 0;
    for (const auto& other : all) {
        for (std::size_t j : c) overlap += other.count(j);
    }
    return static_cast<double>(overlap) / std::sqrt(static_cast<double>(c.size()));
}

void AllocationConfig::validate() const {
    if (n_max < 1) throw ConfigError("allocation.n_max must be >= 1");
    if (!std::isfinite(theta_coh)) throw ConfigError("allocation.theta_coh must be finite");
}

namespace {

SparseVector centroid_of(std::span<const SparseVector> signatures) {
    SparseVector mu;
    for (const auto& s : signatures) {
        for (const auto& [k, w] : normalized(s)) mu[k] += w;
    }
    if (!signatures.empty()) {
        for (auto& [k, w] : mu) w /= static_cast<double>(signatures.size());
    }
    return mu;
}

std::vector<SparseVector> signatures_of(const std::vector<std::size_t>& members, std::span<const Subgraph> subgraphs) {
    std::vector<SparseVector> out;
    for (std::size_t m : members) out.push_back(subgraphs[m].signature);
    return out;
}

void refresh(AgentGroup& g, std::span<const Subgraph> subgraphs) {
    auto sigs = signatures_of(g.members, subgraphs);
    g.centroid = centroid_of(sigs);
    g.coherence = group_coherence(sigs);
}

}  // namespace

double group_coherence(std::span<const SparseVector> signatures) {
    if (signatures.empty()) return 0.0;
    if (signatures.size() == 1) return 1.0;
    SparseVector mu = centroid_of(signatures);
    double sum = 0.0;
    for (const auto& s : signatures) sum += cosine(s, mu);
    return sum / static_cast<double>(signatures.size());
}

double group_coherence(const AgentGroup& g, std::span<const Subgraph> subgraphs) {
    auto sigs = signatures_of(g.members, subgraphs);
    return group_coherence(sigs);
}

std::vector<AgentGroup> allocate(std::span<const Subgraph> subgraphs, std::span<const CoverageSet> coverage,
                                 const AllocationConfig& cfg, std::vector<LeftoverRecord>* leftovers,
                                 std::vector<std::size_t>* skipped) {
    cfg.validate();
    for (std::size_t j = 0; j < subgraphs.size(); ++j) {
        if (subgraphs[j].id != j) throw Error("allocate: subgraph ids must be dense and ordered");
    }
    if (subgraphs.empty()) throw Error("allocate: empty partition");

    std::vector<bool> assigned(subgraphs.size(), false);
    std::vector<AgentGroup> groups;

    // Working copy of the coverage sets, indexed by question.
    std::map<std::size_t, CoverageSet> open;
    for (std::size_t i = 0; i < coverage.size(); ++i) {
        if (!coverage[i].empty()) open[i] = coverage[i];
    }

    while (!open.empty()) {
        std::vector<CoverageSet> remaining;
        for (const auto& [i, c] : open) remaining.push_back(c);
        std::size_t best = open.begin()->first;
        double best_rho = -1.0;
        for (const auto& [i, c] : open) {
            double rho = coverage_density(c, remaining);
            if (rho > best_rho) {
                best = i;
                best_rho = rho;
            }
        }

        std::vector<std::size_t> candidate;
        for (std::size_t j : open[best]) {
            if (!assigned[j]) candidate.push_back(j);
        }
        if (candidate.empty()) {
            open.erase(best);
            continue;
        }
        if (candidate.size() > cfg.n_max) {
            std::map<std::size_t, std::size_t> freq;
            for (const auto& c : remaining) {
                for (std::size_t j : c) ++freq[j];
            }
            std::stable_sort(candidate.begin(), candidate.end(),
                             [&](std::size_t x, std::size_t y) { return freq[x] > freq[y]; });
            candidate.resize(cfg.n_max);
            std::sort(candidate.begin(), candidate.end());
        }

        AgentGroup g;
        g.id = groups.size();
        g.members = candidate;
        refresh(g, subgraphs);
        if (g.coherence < cfg.theta_coh) {
            if (skipped) skipped->push_back(best);
            open.erase(best);
            continue;
        }
        // Committed members leave every open set; trimmed remainders stay queued.
        for (std::size_t j : g.members) {
            assigned[j] = true;
            for (auto& [i, c] : open) c.erase(j);
        }
        std::erase_if(open, [](const auto& kv) { return kv.second.empty(); });
        groups.push_back(std::move(g));
    }

    // Leftovers join the most similar group with room, else start their own.
    for (std::size_t j = 0; j < subgraphs.size(); ++j) {
        if (assigned[j]) continue;
        LeftoverRecord rec;
        rec.subgraph = j;
        std::optional<std::size_t> target;
        double best_sim = 0.0;
        for (const auto& g : groups) {
            if (g.members.size() >= cfg.n_max) continue;
            double sim = cosine(subgraphs[j].signature, g.centroid);
            if (sim > best_sim) {
                target = g.id;
                best_sim = sim;
            }
        }
        if (target) {
            auto& g = groups[*target];
            g.members.insert(std::upper_bound(g.members.begin(), g.members.end(), j), j);
            g.from_leftovers = true;
            refresh(g, subgraphs);
            rec.group = g.id;
            rec.similarity = best_sim;
            rec.coherence_violation = g.coherence < cfg.theta_coh;
        } else {
            AgentGroup g;
            g.id = groups.size();
            g.members = {j};
            g.from_leftovers = true;
            refresh(g, subgraphs);
            rec.group = g.id;
            rec.new_group = true;
            groups.push_back(std::move(g));
        }
        assigned[j] = true;
        if (leftovers) leftovers->push_back(rec);
    }
    return groups;
}

CoordinationCost coordination_cost(std::span<const CoverageSet> coverage, std::span<const std::size_t> owner,
                                   std::size_t n_max) {
    CoordinationCost c;
    for (const auto& set : coverage) {
        if (set.empty()) continue;
        c.by_subgraphs += (set.size() + n_max - 1) / n_max;
        std::set<std::size_t> touched;
        for (std::size_t j : set) touched.insert(owner[j]);
        c.by_groups += touched.size();
    }
    return c;
}

std::vector<std::size_t> Allocation::groups_touched(std::size_t question) const {
    std::set<std::size_t> touched;
    for (std::size_t j = 0; j < matrix.cols; ++j) {
        if (matrix.at(question, j) > 0.0) touched.insert(owner.at(j));
    }
    return {touched.begin(), touched.end()};
}

Allocation run_allocation(const QuestionBase& base, std::span<const Subgraph> subgraphs, const KnowledgeGraph& kg,
                          const AllocationConfig& cfg) {
    Allocation a;
    a.config = cfg;
    Diagnostics diag;
    a.matrix = build_matrix(base, subgraphs, kg, &diag);
    auto coverage = coverage_sets(a.matrix);
    a.groups = allocate(subgraphs, coverage, cfg, &a.leftovers, &a.skipped);
    a.owner.assign(subgraphs.size(), 0);
    for (const auto& g : a.groups) {
        for (std::size_t j : g.members) a.owner[j] = g.id;
    }
    a.cost = coordination_cost(coverage, a.owner, cfg.n_max);
    for (const auto& l : a.leftovers) {
        if (l.coherence_violation) {
            diag.warn("group " + std::to_string(l.group) + " fell below theta_coh after absorbing subgraph " +
                      std::to_string(l.subgraph));
        }
    }
    a.warnings = std::move(diag.warnings);
    return a;
}

nlohmann::json allocation_to_json(const Allocation& a, const QuestionBase& base) {
    nlohmann::json doc;
    doc["config"] = {{"n_max", a.config.n_max}, {"theta_coh", a.config.theta_coh}};
    doc["groups"] = nlohmann::json::array();
    for (const auto& g : a.groups) {
        doc["groups"].push_back({{"id", g.id},
                                 {"members", g.members},
                                 {"coherence", g.coherence},
                                 {"from_leftovers", g.from_leftovers}});
    }
    doc["owner"] = a.owner;
    doc["coordination_cost"] = {{"by_subgraphs", a.cost.by_subgraphs}, {"by_groups", a.cost.by_groups}};
    doc["leftovers"] = nlohmann::json::array();
    for (const auto& l : a.leftovers) {
        doc["leftovers"].push_back({{"subgraph", l.subgraph},
                                    {"group", l.group},
                                    {"similarity", l.similarity},
                                    {"new_group", l.new_group},
                                    {"coherence_violation", l.coherence_violation}});
    }
    doc["skipped_questions"] = nlohmann::json::array();
    for (std::size_t i : a.skipped) doc["skipped_questions"].push_back(base.record(i).id);
    nlohmann::json audit = nlohmann::json::array();
    for (std::size_t i = 0; i < a.matrix.rows; ++i) {
        nlohmann::json row;
        row["question"] = base.record(i).id;
        row["paths"] = a.matrix.path_counts[i];
        nlohmann::json assoc = nlohmann::json::object();
        for (std::size_t j = 0; j < a.matrix.cols; ++j) {
            if (a.matrix.at(i, j) > 0.0) assoc[std::to_string(j)] = a.matrix.at(i, j);
        }
        row["association"] = std::move(assoc);
        row["groups"] = a.groups_touched(i);
        audit.push_back(std::move(row));
    }
    doc["audit"] = std::move(audit);
    doc["warnings"] = a.warnings;
    return doc;
}

Allocation allocation_from_json(const nlohmann::json& doc, std::span<const Subgraph> subgraphs) {
    Allocation a;
    a.config.n_max = doc.at("config").at("n_max").get<std::size_t>();
    a.config.theta_coh = doc.at("config").at("theta_coh").get<double>();
    a.owner.assign(subgraphs.size(), 0);
    std::vector<bool> seen(subgraphs.size(), false);
    for (const auto& j : doc.at("groups")) {
        AgentGroup g;
        g.id = j.at("id").get<std::size_t>();
        g.members = j.at("members").get<std::vector<std::size_t>>();
        g.from_leftovers = j.value("from_leftovers", false);
        for (std::size_t m : g.members) {
            if (m >= subgraphs.size() || seen[m]) throw Error("allocation: bad member " + std::to_string(m));
            seen[m] = true;
            a.owner[m] = g.id;
        }
        refresh(g, subgraphs);
        a.groups.push_back(std::move(g));
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw Error("allocation: not every subgraph is owned");
    return a;
}

}  // namespace splitrag
