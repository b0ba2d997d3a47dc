#pragma once
// Answer metrics and search-space accounting.

#include "json.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace splitrag {

struct QuestionScore {
    std::string id;
    std::vector<std::string> predicted;  // ranked
    std::vector<std::string> gold;
    bool hit = false;       // some gold entity predicted
    bool hit_at_1 = false;  // top prediction is gold
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Set-based P/R/F1 over distinct names; F1 is 0 when P + R is 0.
QuestionScore score_question(std::string id, std::vector<std::string> predicted, std::vector<std::string> gold);

struct ScoreSummary {
    std::size_t count = 0;
    double hit = 0.0;
    double hits_at_1 = 0.0;
    double f1 = 0.0;
};

ScoreSummary summarize(std::span<const QuestionScore> scores);

struct SearchTrace {
    std::string question;
    std::size_t activated = 0;  // distinct subgraphs
    std::size_t touched = 0;    // entities over the activated subgraphs
    bool empty_retrieval = false;
};

struct SearchSpaceReport {
    std::size_t measured = 0;
    std::size_t excluded = 0;  // empty retrievals
    std::size_t total_entities = 0;
    std::size_t subgraphs = 0;
    double mean_ratio = 0.0;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    std::vector<std::size_t> histogram;  // 10 equal bins over [0, 1]
    double mean_activated = 0.0;
    double mean_touched = 0.0;
    double partitioned_cost = 0.0;  // (N / k) ln k
    double full_scan_cost = 0.0;    // N
};

// Throws Error on an empty trace list.
SearchSpaceReport measure_search_space(std::span<const SearchTrace> traces, std::size_t total_entities,
                                       std::size_t subgraphs);

nlohmann::json to_json(const QuestionScore& s);
nlohmann::json to_json(const ScoreSummary& s);
nlohmann::json to_json(const SearchSpaceReport& r);

}  // namespace splitrag
