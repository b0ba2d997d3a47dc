#include "splitrag/metrics.hpp"

#include "splitrag/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace splitrag {

QuestionScore score_question(std::string id, std::vector<std::string> predicted, std::vector<std::string> gold) {
    QuestionScore s;
    s.id = std::move(id);
    s.predicted = std::move(predicted);
    s.gold = std::move(gold);
    std::set<std::string> p(s.predicted.begin(), s.predicted.end());
    std::set<std::string> g(s.gold.begin(), s.gold.end());
    std::size_t common = 0;
    for (const auto& x : p) common += g.count(x);
    s.hit = common > 0;
    s.hit_at_1 = !s.predicted.empty() && g.contains(s.predicted.front());
    s.precision = p.empty() ? 0.0 : static_cast<double>(common) / static_cast<double>(p.size());
    s.recall = g.empty() ? 0.0 : static_cast<double>(common) / static_cast<double>(g.size());
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

ScoreSummary summarize(std::span<const QuestionScore> scores) {
    ScoreSummary out;
    out.count = scores.size();
    if (scores.empty()) return out;
    for (const auto& s : scores) {
        out.hit += s.hit ? 1.0 : 0.0;
        out.hits_at_1 += s.hit_at_1 ? 1.0 : 0.0;
        out.f1 += s.f1;
    }
    double n = static_cast<double>(scores.size());
    out.hit /= n;
    out.hits_at_1 /= n;
    out.f1 /= n;
    return out;
}

SearchSpaceReport measure_search_space(std::span<const SearchTrace> traces, std::size_t total_entities,
                                       std::size_t subgraphs) {
    if (traces.empty()) throw Error("measure_search_space: no traces");
    SearchSpaceReport r;
    r.total_entities = total_entities;
    r.subgraphs = subgraphs;
    r.histogram.assign(10, 0);
    r.min_ratio = 1.0;
    for (const auto& t : traces) {
        if (t.empty_retrieval) {
            ++r.excluded;
            continue;
        }
        double ratio = total_entities == 0 ? 0.0 : static_cast<double>(t.touched) / static_cast<double>(total_entities);
        ++r.measured;
        r.mean_ratio += ratio;
        r.min_ratio = std::min(r.min_ratio, ratio);
        r.max_ratio = std::max(r.max_ratio, ratio);
        r.histogram[std::min<std::size_t>(9, static_cast<std::size_t>(ratio * 10.0))]++;
        r.mean_activated += static_cast<double>(t.activated);
        r.mean_touched += static_cast<double>(t.touched);
    }
    if (r.measured > 0) {
        double n = static_cast<double>(r.measured);
        r.mean_ratio /= n;
        r.mean_activated /= n;
        r.mean_touched /= n;
    } else {
        r.min_ratio = 0.0;
    }
    double big_n = static_cast<double>(total_entities);
    r.full_scan_cost = big_n;
    r.partitioned_cost = subgraphs == 0 ? 0.0 : big_n / static_cast<double>(subgraphs) * std::log(static_cast<double>(subgraphs));
    return r;
}

nlohmann::json to_json(const QuestionScore& s) {
    return {{"id", s.id},
            {"predicted", s.predicted},
            {"gold", s.gold},
            {"hit", s.hit},
            {"hit_at_1", s.hit_at_1},
            {"precision", s.precision},
            {"recall", s.recall},
            {"f1", s.f1}};
}

nlohmann::json to_json(const ScoreSummary& s) {
    return {{"count", s.count}, {"hit", s.hit}, {"hits_at_1", s.hits_at_1}, {"f1", s.f1}};
}

nlohmann::json to_json(const SearchSpaceReport& r) {
    return {{"measured", r.measured},
            {"excluded_empty", r.excluded},
            {"total_entities", r.total_entities},
            {"subgraphs", r.subgraphs},
            {"mean_ratio", r.mean_ratio},
            {"min_ratio", r.min_ratio},
            {"max_ratio", r.max_ratio},
            {"histogram", r.histogram},
            {"mean_activated", r.mean_activated},
            {"mean_touched", r.mean_touched},
            {"partitioned_cost", r.partitioned_cost},
            {"full_scan_cost", r.full_scan_cost}};
}

}  // namespace splitrag
