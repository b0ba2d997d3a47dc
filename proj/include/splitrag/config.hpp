#pragma once
// Run configuration: a flat key = value file with [section] headers.
//
//   [partition]
//   lambda = 0.5
//   eta_max = 12        # omit for ceil(|V| / 4)
//
// Unknown sections or keys are errors so that typos cannot silently fall
// back to defaults.

#include "splitrag/allocation.hpp"
#include "splitrag/fusion.hpp"
#include "splitrag/gateway.hpp"
#include "splitrag/partition.hpp"
#include "splitrag/retriever.hpp"
#include "splitrag/router.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace splitrag {

struct DataConfig {
    std::string stopwords;  // file path; empty: built-in list
    std::string lexicon;    // file path; empty: <dataset>/type_lexicon.tsv when present
};

struct AblationConfig {
    bool single_agent = false;  // one subgraph holding the whole graph, one agent
};

struct Config {
    PartitionConfig partition;
    AllocationConfig allocation;
    RouterConfig router;
    RetrieverConfig retriever;
    FusionConfig fusion;
    GatewayConfig gateway;
    DataConfig data;
    AblationConfig ablation;

    // Throws ParseError for malformed lines and unknown keys.
    static Config parse(const std::string& text, const std::string& source = "<config>");
    static Config load(const std::filesystem::path& file);

    // One JSON object per section; used for artifact hashing and echoing.
    nlohmann::json section(const std::string& name) const;
    nlohmann::json to_json() const;
};

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);

}  // namespace splitrag
