#include "splitrag/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <utility>

namespace splitrag {

namespace {

template <class T>
std::vector<T> sorted_union(const std::vector<T>& a, const std::vector<T>& b) {
    std::vector<T> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

template <class T>
bool intersects(const std::vector<T>& a, const std::vector<T>& b) {
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            return true;
        }
    }
    return false;
}

template <class T>
std::size_t union_size(const std::vector<T>& a, const std::vector<T>& b) {
    std::size_t common = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    return a.size() + b.size() - common;
}

std::vector<EntityId> endpoints(const KnowledgeGraph& kg, std::span<const TripleId> triples) {
    std::vector<EntityId> out;
    for (TripleId t : triples) {
        out.push_back(kg.triple(t).head);
        out.push_back(kg.triple(t).tail);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Connected components of a triple set, each sorted, ordered by first triple.
std::vector<std::vector<TripleId>> triple_components(const KnowledgeGraph& kg, std::vector<TripleId> triples) {
    std::sort(triples.begin(), triples.end());
    std::map<EntityId, std::vector<std::size_t>> by_entity;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        by_entity[kg.triple(triples[i]).head].push_back(i);
        by_entity[kg.triple(triples[i]).tail].push_back(i);
    }
    std::vector<bool> seen(triples.size(), false);
    std::vector<std::vector<TripleId>> out;
    for (std::size_t start = 0; start < triples.size(); ++start) {
        if (seen[start]) continue;
        std::vector<TripleId> comp;
        std::queue<std::size_t> todo;
        todo.push(start);
        seen[start] = true;
        while (!todo.empty()) {
            std::size_t i = todo.front();
            todo.pop();
            comp.push_back(triples[i]);
            const auto& tr = kg.triple(triples[i]);
            for (EntityId e : {tr.head, tr.tail}) {
                for (std::size_t j : by_entity[e]) {
                    if (!seen[j]) {
                        seen[j] = true;
                        todo.push(j);
                    }
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

double entropy_of_counts(const std::vector<SupportEntry>& support) {
    std::size_t total = 0;
    for (const auto& s : support) total += s.count;
    if (total == 0) return 0.0;
    double h = 0.0;
    for (const auto& s : support) {
        if (s.count == 0) continue;
        double p = static_cast<double>(s.count) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

std::size_t PartitionConfig::resolved_eta_max(std::size_t total_entities) const {
    if (eta_max) return *eta_max;
    return std::max<std::size_t>(2, (total_entities + 3) / 4);
}

std::size_t PartitionConfig::resolved_tau_min(std::size_t total_entities) const {
    if (tau_min) return *tau_min;
    return std::min<std::size_t>(3, resolved_eta_max(total_entities));
}

void PartitionConfig::validate(std::size_t total_entities) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("partition.lambda must be >= 0");
    if (!std::isfinite(theta_merge)) throw ConfigError("partition.theta_merge must be finite");
    std::size_t eta = resolved_eta_max(total_entities);
    if (eta < 2) throw ConfigError("partition.eta_max must be >= 2");
    if (resolved_tau_min(total_entities) > eta) throw ConfigError("partition.tau_min must not exceed eta_max");
    if (entropy_sign != 1 && entropy_sign != -1) throw ConfigError("partition.entropy_sign must be 1 or -1");
}

bool Subgraph::has_entity(EntityId e) const { return std::binary_search(entities.begin(), entities.end(), e); }

bool Subgraph::has_triple(TripleId t) const { return std::binary_search(triples.begin(), triples.end(), t); }

std::size_t Subgraph::support_total() const {
    std::size_t n = 0;
    for (const auto& s : support) n += s.count;
    return n;
}

SparseVector signature_of(const KnowledgeGraph& kg, std::span<const TripleId> triples) {
    SparseVector v;
    for (TripleId id : triples) {
        const auto& t = kg.triple(id);
        const auto& rel = kg.name(t.relation);
        v[kg.type_label(t.head) + ">" + rel] += 1.0;
        v[kg.type_label(t.tail) + "<" + rel] += 1.0;
    }
    return v;
}

bool is_connected(const Subgraph& s, const KnowledgeGraph& kg) {
    if (s.triples.empty()) return s.entities.size() <= 1;
    auto comps = triple_components(kg, s.triples);
    return comps.size() == 1 && endpoints(kg, s.triples) == s.entities;
}

IgReport::Entry subgraph_information_gain(const Subgraph& s, const PartitionConfig& cfg, std::size_t total_entities) {
    IgReport::Entry e;
    e.subgraph = s.id;
    e.conditional_entropy = entropy_of_counts(s.support);
    if (total_entities > 0 && !s.entities.empty()) {
        double frac = static_cast<double>(s.entities.size()) / static_cast<double>(total_entities);
        e.size_penalty = frac * std::log(1.0 / frac);
        if (e.size_penalty < 0.0) e.size_penalty = 0.0;  // |V_s| > |V| only in malformed input
    }
    e.ig = cfg.entropy_sign * e.conditional_entropy - cfg.lambda * e.size_penalty;
    return e;
}

IgReport information_gain(std::span<const Subgraph> subgraphs, const PartitionConfig& cfg,
                          std::size_t total_entities, Diagnostics* diag) {
    IgReport r;
    for (const auto& s : subgraphs) {
        if (s.support_total() == 0 && diag) diag->warn("subgraph " + std::to_string(s.id) + " has empty segment support");
        r.entries.push_back(subgraph_information_gain(s, cfg, total_entities));
        r.total += r.entries.back().ig;
    }
    return r;
}

ColorMap assign_colors(std::span<const Subgraph> subgraphs, const KnowledgeGraph& kg) {
    ColorMap m;
    for (std::uint32_t i = 0; i < kg.entity_count(); ++i) m.colors[EntityId{i}];
    for (const auto& s : subgraphs) {
        for (EntityId e : s.entities) m.colors[e].insert(s.id);
    }
    for (const auto& [e, c] : m.colors) {
        if (c.empty()) m.uncovered.push_back(e);
        if (c.size() >= 2) m.boundary.push_back(e);
    }
    return m;
}

Partitioner::Partitioner(const KnowledgeGraph& kg, const QuestionBase& base, PartitionConfig cfg)
    : kg_(kg), base_(base), cfg_(std::move(cfg)) {
    cfg_.validate(kg_.entity_count());
    eta_max_ = cfg_.resolved_eta_max(kg_.entity_count());
    tau_min_ = cfg_.resolved_tau_min(kg_.entity_count());
    if (base_.path_record_count() == 0) throw Error("no path-annotated training questions");
    Diagnostics diag;
    catalog_segments(&diag);
    catalog_warnings_ = std::move(diag.warnings);
}

void Partitioner::catalog_segments(Diagnostics* diag) {
    std::map<Path, std::size_t> counts;
    for (const auto& rec : base_.records()) {
        if (!rec.path) continue;
        for (const auto& seg : split_into_segments(*rec.path)) {
            const Path& p = seg.path();
            std::size_t distinct = endpoints(kg_, p.triple_ids(kg_)).size();
            if (distinct > eta_max_) {
                if (diag) {
                    diag->warn("segment " + p.render(kg_) + " spans more than eta_max entities; split into single hops");
                }
                for (std::size_t i = 0; i < p.hops(); ++i) {
                    Path hop;
                    hop.entities = {p.entities[i], p.entities[i + 1]};
                    hop.steps = {p.steps[i]};
                    ++counts[canonical_segment(hop)];
                }
            } else {
                ++counts[canonical_segment(p)];
            }
        }
    }
    for (auto& [path, n] : counts) {
        Segment s;
        s.path = path;
        s.pattern = pattern_of(kg_, path).canonical();
        s.triples = path.triple_ids(kg_);
        std::sort(s.triples.begin(), s.triples.end());
        s.triples.erase(std::unique(s.triples.begin(), s.triples.end()), s.triples.end());
        s.entities = endpoints(kg_, s.triples);
        s.count = n;
        segments_.push_back(std::move(s));
    }
    std::stable_sort(segments_.begin(), segments_.end(),
                     [](const Segment& a, const Segment& b) { return a.pattern < b.pattern; });
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        for (TripleId t : segments_[i].triples) segments_by_triple_[t].push_back(i);
    }
}

std::vector<SupportEntry> Partitioner::support_of(std::span<const TripleId> triples) const {
    std::set<std::size_t> touched;
    for (TripleId t : triples) {
        auto it = segments_by_triple_.find(t);
        if (it != segments_by_triple_.end()) touched.insert(it->second.begin(), it->second.end());
    }
    std::vector<SupportEntry> out;
    for (std::size_t i : touched) {
        const auto& seg = segments_[i];
        bool inside = std::all_of(seg.triples.begin(), seg.triples.end(), [&](TripleId t) {
            return std::binary_search(triples.begin(), triples.end(), t);
        });
        if (inside) out.push_back({seg.path, seg.count});
    }
    std::sort(out.begin(), out.end());
    return out;
}

Subgraph Partitioner::make_subgraph(std::size_t id, std::vector<TripleId> triples) const {
    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
    Subgraph s;
    s.id = id;
    s.entities = endpoints(kg_, triples);
    s.support = support_of(triples);
    s.signature = signature_of(kg_, triples);
    s.triples = std::move(triples);
    return s;
}

std::vector<Subgraph> Partitioner::seed_candidates(Diagnostics* diag) const {
    if (diag) {
        for (const auto& w : catalog_warnings_) diag->warn(w);
    }

    // Segments of one pattern that touch each other form a component; a
    // component over the entity cap is cut into chunks grown in index order.
    struct Candidate {
        std::vector<std::size_t> members;
        std::vector<EntityId> entities;
    };
    std::vector<Candidate> candidates;

    std::size_t begin = 0;
    while (begin < segments_.size()) {
        std::size_t end = begin;
        while (end < segments_.size() && segments_[end].pattern == segments_[begin].pattern) ++end;

        std::vector<std::size_t> parent(end - begin);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t j = i + 1; j < end; ++j) {
                if (intersects(segments_[i].entities, segments_[j].entities)) {
                    parent[find(j - begin)] = find(i - begin);
                }
            }
        }
        std::map<std::size_t, std::vector<std::size_t>> comps;  // keyed by root; members ascending
        for (std::size_t i = begin; i < end; ++i) comps[find(i - begin)].push_back(i);
        std::vector<std::vector<std::size_t>> ordered;
        for (auto& [root, members] : comps) ordered.push_back(std::move(members));
        std::sort(ordered.begin(), ordered.end());

        for (const auto& members : ordered) {
            std::vector<bool> placed(members.size(), false);
            std::size_t left = members.size();
            while (left > 0) {
                Candidate c;
                for (std::size_t k = 0; k < members.size(); ++k) {
                    if (!placed[k]) {
                        placed[k] = true;
                        --left;
                        c.members.push_back(members[k]);
                        c.entities = segments_[members[k]].entities;
                        break;
                    }
                }
                bool grew = true;
                while (grew) {
                    grew = false;
                    for (std::size_t k = 0; k < members.size(); ++k) {
                        if (placed[k]) continue;
                        const auto& ents = segments_[members[k]].entities;
                        if (intersects(c.entities, ents) && union_size(c.entities, ents) <= eta_max_) {
                            placed[k] = true;
                            --left;
                            c.members.push_back(members[k]);
                            c.entities = sorted_union(c.entities, ents);
                            grew = true;
                            break;
                        }
                    }
                }
                candidates.push_back(std::move(c));
            }
        }
        begin = end;
    }

    // A triple claimed by several candidates stays with the one whose member
    // segments use it most often; ties go to the earlier candidate.
    std::map<TripleId, std::pair<std::size_t, std::size_t>> owner;  // triple -> (weight, candidate)
    std::vector<std::map<TripleId, std::size_t>> weights(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        for (std::size_t m : candidates[c].members) {
            for (TripleId t : segments_[m].triples) weights[c][t] += segments_[m].count;
        }
        for (const auto& [t, w] : weights[c]) {
            auto it = owner.find(t);
            if (it == owner.end() || w > it->second.first) owner[t] = {w, c};
        }
    }

    std::vector<Subgraph> out;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        std::vector<TripleId> kept;
        for (const auto& [t, w] : weights[c]) {
            if (owner[t].second == c) kept.push_back(t);
        }
        for (auto& comp : triple_components(kg_, std::move(kept))) out.push_back(make_subgraph(out.size(), std::move(comp)));
    }
    return out;
}

Subgraph Partitioner::unite(const Subgraph& a, const Subgraph& b) const {
    return make_subgraph(std::min(a.id, b.id), sorted_union(a.triples, b.triples));
}

bool Partitioner::mergeable(const Subgraph& a, const Subgraph& b) const {
    return intersects(a.entities, b.entities) && union_size(a.entities, b.entities) <= eta_max_;
}

double Partitioner::merge_gain(const Subgraph& a, const Subgraph& b) const {
    std::size_t n = kg_.entity_count();
    return subgraph_information_gain(unite(a, b), cfg_, n).ig - subgraph_information_gain(a, cfg_, n).ig -
           subgraph_information_gain(b, cfg_, n).ig;
}

MergeOutcome Partitioner::greedy_merge(std::vector<Subgraph> candidates) const {
    const std::size_t n = kg_.entity_count();
    std::map<std::size_t, Subgraph> live;
    std::map<std::size_t, double> ig;
    for (auto& s : candidates) {
        std::size_t id = s.id;
        ig[id] = subgraph_information_gain(s, cfg_, n).ig;
        live.emplace(id, std::move(s));
    }
    auto total = [&] {
        double t = 0.0;
        for (const auto& [id, v] : ig) t += v;
        return t;
    };

    std::map<std::pair<std::size_t, std::size_t>, double> gains;
    auto refresh = [&](std::size_t id) {
        for (const auto& [other, s] : live) {
            if (other == id) continue;
            auto key = std::minmax(id, other);
            if (mergeable(live.at(id), s)) {
                gains[{key.first, key.second}] = merge_gain(live.at(id), s);
            } else {
                gains.erase({key.first, key.second});
            }
        }
    };
    auto drop = [&](std::size_t id) {
        std::erase_if(gains, [id](const auto& kv) { return kv.first.first == id || kv.first.second == id; });
        live.erase(id);
        ig.erase(id);
    };
    auto apply = [&](std::size_t a, std::size_t b) {
        Subgraph merged = unite(live.at(a), live.at(b));
        std::size_t keep = merged.id;
        std::size_t gone = keep == a ? b : a;
        drop(gone);
        ig[keep] = subgraph_information_gain(merged, cfg_, n).ig;
        live[keep] = std::move(merged);
        refresh(keep);
        return keep;
    };

    for (const auto& [id, s] : live) {
        for (auto it = live.upper_bound(id); it != live.end(); ++it) {
            if (mergeable(s, it->second)) gains[{id, it->first}] = merge_gain(s, it->second);
        }
    }

    MergeOutcome out;
    while (out.rounds < cfg_.t_max) {
        const std::pair<const std::pair<std::size_t, std::size_t>, double>* best = nullptr;
        for (const auto& kv : gains) {
            if (!best || kv.second > best->second) best = &kv;
        }
        if (!best || !(best->second > cfg_.theta_merge)) break;
        MergeRecord rec;
        rec.a = best->first.first;
        rec.b = best->first.second;
        rec.delta = best->second;
        rec.ig_before = total();
        apply(rec.a, rec.b);
        rec.ig_after = total();
        out.merges.push_back(rec);
        ++out.rounds;
    }

    // Subgraphs below tau_min join the overlapping neighbor with the best
    // gain. One with no neighbor that has room is kept and flagged.
    std::set<std::size_t> standalone;
    for (;;) {
        std::optional<std::size_t> small;
        for (const auto& [id, s] : live) {
            if (s.size() < tau_min_ && !standalone.contains(id)) {
                small = id;
                break;
            }
        }
        if (!small) break;
        std::optional<std::size_t> target;
        double best = 0.0;
        for (const auto& [id, s] : live) {
            if (id == *small || !mergeable(live.at(*small), s)) continue;
            auto key = std::minmax(id, *small);
            double g = gains.at({key.first, key.second});
            if (!target || g > best) {
                target = id;
                best = g;
            }
        }
        AbsorbRecord rec;
        rec.small = *small;
        if (!target) {
            bool overlaps = std::any_of(live.begin(), live.end(), [&](const auto& kv) {
                return kv.first != *small && intersects(kv.second.entities, live.at(*small).entities);
            });
            rec.note = overlaps ? "no overlapping neighbor has room" : "no overlapping neighbor";
            standalone.insert(*small);
            out.absorptions.push_back(std::move(rec));
            continue;
        }
        rec.into = *target;
        rec.delta = best;
        std::size_t keep = apply(*small, *target);
        standalone.erase(keep);
        out.absorptions.push_back(std::move(rec));
    }

    for (auto& [id, s] : live) out.subgraphs.push_back(std::move(s));
    return out;
}

PartitionResult Partitioner::run() const {
    Diagnostics diag;
    auto seeds = seed_candidates(&diag);
    auto merged = greedy_merge(seeds);

    PartitionResult r;
    r.config = cfg_;
    r.total_entities = kg_.entity_count();
    r.eta_max = eta_max_;
    r.tau_min = tau_min_;
    r.seed_count = seeds.size();
    r.merges = std::move(merged.merges);
    r.absorptions = std::move(merged.absorptions);
    r.subgraphs = std::move(merged.subgraphs);
    for (std::size_t i = 0; i < r.subgraphs.size(); ++i) r.subgraphs[i].id = i;
    r.report = information_gain(r.subgraphs, cfg_, r.total_entities, &diag);
    r.colors = assign_colors(r.subgraphs, kg_);
    for (const auto& a : r.absorptions) {
        if (!a.into) diag.warn("subgraph " + std::to_string(a.small) + " below tau_min kept standalone: " + a.note);
    }
    for (const auto& rec : base_.records()) r.clusters[cluster_key(rec, kg_)].push_back(rec.id);
    r.warnings = std::move(diag.warnings);
    return r;
}

nlohmann::json config_to_json(const PartitionConfig& cfg, std::size_t total_entities) {
    return {{"lambda", cfg.lambda},
            {"eta_max", cfg.resolved_eta_max(total_entities)},
            {"theta_merge", cfg.theta_merge},
            {"t_max", cfg.t_max},
            {"tau_min", cfg.resolved_tau_min(total_entities)},
            {"entropy_sign", cfg.entropy_sign}};
}

namespace {

nlohmann::json triple_json(const KnowledgeGraph& kg, TripleId id) {
    const auto& t = kg.triple(id);
    return {kg.name(t.head), kg.name(t.relation), kg.name(t.tail)};
}

}  // namespace

nlohmann::json partition_to_json(const PartitionResult& r, const KnowledgeGraph& kg) {
    nlohmann::json doc;
    doc["config"] = config_to_json(r.config, r.total_entities);
    doc["total_entities"] = r.total_entities;
    doc["seed_count"] = r.seed_count;
    auto& subs = doc["subgraphs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < r.subgraphs.size(); ++i) {
        const auto& s = r.subgraphs[i];
        nlohmann::json j;
        j["id"] = s.id;
        j["entities"] = nlohmann::json::array();
        for (EntityId e : s.entities) j["entities"].push_back(kg.name(e));
        j["triples"] = nlohmann::json::array();
        for (TripleId t : s.triples) j["triples"].push_back(triple_json(kg, t));
        j["support"] = nlohmann::json::array();
        for (const auto& sup : s.support) j["support"].push_back({{"segment", sup.segment.to_names(kg)}, {"count", sup.count}});
        const auto& e = r.report.entries.at(i);
        j["conditional_entropy"] = e.conditional_entropy;
        j["size_penalty"] = e.size_penalty;
        j["ig"] = e.ig;
        subs.push_back(std::move(j));
    }
    doc["ig_total"] = r.report.total;
    doc["merges"] = nlohmann::json::array();
    for (const auto& m : r.merges) {
        doc["merges"].push_back(
            {{"a", m.a}, {"b", m.b}, {"delta", m.delta}, {"ig_before", m.ig_before}, {"ig_after", m.ig_after}});
    }
    doc["absorptions"] = nlohmann::json::array();
    for (const auto& a : r.absorptions) {
        nlohmann::json j{{"small", a.small}, {"delta", a.delta}, {"note", a.note}};
        j["into"] = a.into ? nlohmann::json(*a.into) : nlohmann::json(nullptr);
        doc["absorptions"].push_back(std::move(j));
    }
    nlohmann::json colors = nlohmann::json::object();
    for (const auto& [e, c] : r.colors.colors) {
        if (!c.empty()) colors[kg.name(e)] = c;
    }
    doc["colors"] = std::move(colors);
    doc["boundary"] = nlohmann::json::array();
    for (EntityId e : r.colors.boundary) doc["boundary"].push_back(kg.name(e));
    doc["uncovered"] = nlohmann::json::array();
    for (EntityId e : r.colors.uncovered) doc["uncovered"].push_back(kg.name(e));
    doc["clusters"] = r.clusters;
    doc["warnings"] = r.warnings;
    return doc;
}

std::vector<Subgraph> subgraphs_from_json(const nlohmann::json& doc, const KnowledgeGraph& kg) {
    std::vector<Subgraph> out;
    for (const auto& j : doc.at("subgraphs")) {
        Subgraph s;
        s.id = j.at("id").get<std::size_t>();
        for (const auto& t : j.at("triples")) {
            auto names = t.get<std::vector<std::string>>();
            if (names.size() != 3) throw Error("partition: malformed triple in subgraph " + std::to_string(s.id));
            auto id = kg.find_triple(kg.entity(names[0]), kg.relation(names[1]), kg.entity(names[2]));
            if (!id) throw Error("partition: triple not in graph: " + names[0] + " " + names[1] + " " + names[2]);
            s.triples.push_back(*id);
        }
        std::sort(s.triples.begin(), s.triples.end());
        s.entities = endpoints(kg, s.triples);
        for (const auto& sup : j.at("support")) {
            auto names = sup.at("segment").get<std::vector<std::string>>();
            s.support.push_back({Path::from_names(kg, names), sup.at("count").get<std::size_t>()});
        }
        s.signature = signature_of(kg, s.triples);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace splitrag
