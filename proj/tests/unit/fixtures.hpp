#pragma once
// Small graph and question builders shared by the test suites.

#include "splitrag/kg.hpp"
#include "splitrag/question.hpp"

#include "json.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

namespace fixtures {

inline std::filesystem::path source_dir() { return SPLITRAG_SOURCE_DIR; }
inline std::filesystem::path data_dir(const std::string& name) { return source_dir() / "data" / name; }

inline nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

struct GraphSpec {
    std::vector<splitrag::KnowledgeGraph::NamedTriple> triples;
    std::vector<std::pair<std::string, std::string>> types;  // entity, type
    std::vector<std::string> functional;
    std::vector<std::pair<std::string, std::string>> negations;
};

inline splitrag::KnowledgeGraph graph(const GraphSpec& spec, splitrag::Diagnostics* diag = nullptr) {
    splitrag::Schema s;
    for (const auto& [e, t] : spec.types) s.entity_types[e] = t;
    s.functional_relations.insert(spec.functional.begin(), spec.functional.end());
    s.negation_pairs = spec.negations;
    return splitrag::KnowledgeGraph::build(s, spec.triples, diag);
}

// Question whose linked entities are the bracketed names in `text`.
inline splitrag::QuestionRecord question(const splitrag::KnowledgeGraph& kg, const std::string& id,
                                         const std::string& text, std::vector<std::string> path = {},
                                         const splitrag::Preprocessor& prep = splitrag::Preprocessor()) {
    nlohmann::json j{{"id", id}, {"question", text}, {"entities", nlohmann::json::array()}};
    std::size_t pos = 0;
    while ((pos = text.find('[', pos)) != std::string::npos) {
        auto end = text.find(']', pos);
        j["entities"].push_back({{"span", {pos + 1, end}}, {"name", text.substr(pos + 1, end - pos - 1)}});
        pos = end;
    }
    if (!path.empty()) j["path"] = path;
    return splitrag::record_from_json(j, kg, prep);
}

inline splitrag::Path path(const splitrag::KnowledgeGraph& kg, std::initializer_list<std::string> names) {
    std::vector<std::string> tokens(names);
    return splitrag::Path::from_names(kg, tokens);
}

inline std::vector<splitrag::EntityId> entities(const splitrag::KnowledgeGraph& kg,
                                                std::initializer_list<std::string> names) {
    std::vector<splitrag::EntityId> out;
    for (const auto& n : names) out.push_back(kg.entity(n));
    return out;
}

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("splitrag_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }

    std::filesystem::path write(const std::string& name, const std::string& content) const {
        auto p = path / name;
        std::ofstream(p) << content;
        return p;
    }
};

}  // namespace fixtures
