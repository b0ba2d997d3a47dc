#pragma once
// Dataset loading, the in-memory pipeline and the staged CLI commands.
//
// A dataset directory holds kb.txt (head<TAB>relation<TAB>tail),
// schema.json, qa_train.jsonl and qa_test.jsonl, plus an optional
// type_lexicon.tsv. Stages write JSON artifacts into an output directory;
// each artifact records the hash of its config sections and of the
// artifact it was built from, and later stages refuse stale inputs.

#include "splitrag/allocation.hpp"
#include "splitrag/config.hpp"
#include "splitrag/fusion.hpp"
#include "splitrag/kg.hpp"
#include "splitrag/metrics.hpp"
#include "splitrag/partition.hpp"
#include "splitrag/question.hpp"
#include "splitrag/retriever.hpp"
#include "splitrag/router.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace splitrag {

struct Dataset {
    KnowledgeGraph kg;
    QuestionBase train;                // finalized
    std::vector<QuestionRecord> test;
    std::string fingerprint;           // sha256 over the input files
    std::vector<std::string> warnings;
};

// QA lines naming unknown entities are skipped with a warning; any other
// malformed line is a ParseError.
Dataset load_metaqa_style(const std::filesystem::path& dir, const DataConfig& data = {});

// One subgraph holding the whole graph (ablation).
PartitionResult single_agent_partition(const KnowledgeGraph& kg, const QuestionBase& base);

struct Model {
    PartitionResult partition;
    Allocation allocation;
};

// Partitions, allocates and stores training decompositions on ds.train.
Model build_model(Dataset& ds, const Config& cfg);

struct QuestionRun {
    RetrievalPlan plan;
    std::vector<RetrievalResult> results;
    FusionResult fusion;
    double millis = 0.0;
};

QuestionRun answer_question(const QuestionRecord& q, const Router& router, std::span<const Subgraph> subgraphs,
                            const KnowledgeGraph& kg, Gateway& gateway, const Config& cfg);

struct EvalEntry {
    QuestionScore score;
    std::string mode;
    bool unroutable = false;
    std::vector<std::size_t> activated;
    std::size_t touched = 0;
    bool empty_retrieval = false;
    std::optional<bool> g_coverage;  // gold path inside the activated subgraphs
};

struct EvalReport {
    std::vector<EvalEntry> entries;
    ScoreSummary summary;
    SearchSpaceReport search;
    std::map<std::string, std::size_t> modes;
    double g_coverage = 0.0;  // over questions with a gold path
    double mean_group_size = 0.0;

    nlohmann::json to_json() const;  // deterministic: no wall times
};

struct AnswerRecord {
    std::string question;
    std::vector<std::string> predicted;
    std::string mode;
    bool unroutable = false;
    std::vector<std::size_t> activated;
    std::size_t touched = 0;
    bool empty_retrieval = false;
};

AnswerRecord answer_record(const QuestionRun& run, std::span<const Subgraph> subgraphs);

EvalReport evaluate(const Dataset& ds, std::span<const Subgraph> subgraphs, const Allocation& alloc,
                    std::span<const AnswerRecord> answers);

struct PipelineRun {
    Model model;
    std::vector<QuestionRun> runs;
    std::vector<AnswerRecord> answers;
    EvalReport report;
};

// Whole pipeline in memory; ds.train gains decompositions.
PipelineRun run_pipeline(Dataset& ds, const Config& cfg);

// Stage failure with the CLI exit code: 2 missing artifact, 3 stale input.
class StageError : public Error {
public:
    StageError(int code, const std::string& what) : Error(what), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

struct StageOptions {
    std::filesystem::path in;   // dataset directory
    std::filesystem::path out;  // artifact directory
    bool compact = false;       // CBOR artifacts
};

// Each returns the config hash it recorded; failures throw StageError,
// ParseError, ConfigError or Error.
std::string cmd_partition(const Config& cfg, const StageOptions& opt);
std::string cmd_allocate(const Config& cfg, const StageOptions& opt);
std::string cmd_route(const Config& cfg, const StageOptions& opt);
std::string cmd_answer(const Config& cfg, const StageOptions& opt);
std::string cmd_eval(const Config& cfg, const StageOptions& opt);

// Reads <dir>/<name>.json or <dir>/<name>.cbor.
std::optional<nlohmann::json> read_artifact(const std::filesystem::path& dir, const std::string& name);
void write_artifact(const std::filesystem::path& dir, const std::string& name, const nlohmann::json& doc, bool compact);

}  // namespace splitrag
