#pragma once
// Question preprocessing and the training question base.
//
// Each question is stored in three forms: a semantic context (stopwords
// removed, linked entities bracketed), an entity-type context (entities and
// type words replaced by type labels) and an optional path context oriented
// from one of its linked entities.

#include "splitrag/kg.hpp"
#include "splitrag/vector.hpp"

#include "json.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace splitrag {

// Character span [begin, end) of `raw` linked to a graph entity.
struct EntityLink {
    std::size_t begin = 0;
    std::size_t end = 0;
    EntityId entity;
};

struct SemanticToken {
    std::string text;
    std::optional<EntityId> entity;  // set for bracketed entity mentions

    std::string render() const { return entity ? "[" + text + "]" : text; }
};

struct TypeToken {
    enum class Source { word, type_word, entity };

    std::string text;
    Source source = Source::word;
};

struct QuestionContexts {
    std::vector<SemanticToken> semantic;
    std::vector<TypeToken> entity_type;

    std::string semantic_text() const;
    std::string entity_type_text() const;
    std::vector<std::string> entity_type_tokens() const;
};

// One step of a stored decomposition: the type pattern of a path segment,
// whether it starts from a linked entity or from the previous step's
// output, and where it was answered from.
struct DecompositionStep {
    TypePattern pattern;     // oriented along the question's path
    bool anchored = true;    // false: chained on the previous step's output
    std::size_t agent = 0;
    std::vector<std::size_t> subgraphs;
};

struct QuestionRecord {
    std::string id;
    std::string raw;
    std::vector<EntityLink> links;
    QuestionContexts contexts;
    std::optional<Path> path;  // starts at one of the linked entities
    std::optional<std::string> qtype;
    std::vector<std::string> answers;
    std::vector<DecompositionStep> decomposition;

    std::vector<EntityId> linked_entities() const;
};

// Stopword removal plus the word -> type label lexicon. A word maps to a
// type if the lexicon lists it, or if it equals a graph type label or that
// label with a trailing "s".
class Preprocessor {
public:
    Preprocessor() : Preprocessor(default_stopwords(), {}) {}
    Preprocessor(std::set<std::string> stopwords, std::map<std::string, std::string> lexicon)
        : stopwords_(std::move(stopwords)), lexicon_(std::move(lexicon)) {}

    static std::set<std::string> default_stopwords();
    static std::set<std::string> load_stopwords(const std::filesystem::path& file);
    static std::map<std::string, std::string> load_lexicon(const std::filesystem::path& file);

    QuestionContexts preprocess(const std::string& raw, std::vector<EntityLink> links,
                                const KnowledgeGraph& kg) const;

    std::optional<std::string> type_word(const std::string& word, const KnowledgeGraph& kg) const;

    const std::set<std::string>& stopwords() const noexcept { return stopwords_; }

private:
    std::set<std::string> stopwords_;
    std::map<std::string, std::string> lexicon_;
};

// Free-function form used by tests and one-off callers.
QuestionContexts preprocess(const std::string& raw, std::vector<EntityLink> links, const KnowledgeGraph& kg,
                            const std::set<std::string>& stopwords);

// Validates `path` against the graph and the record's links and returns the
// record with its path context set, oriented to start at a linked entity.
QuestionRecord attach_path(QuestionRecord rec, Path path, const KnowledgeGraph& kg);

// Parses one QA line: {id, question, entities:[{span:[b,e], name}],
// answers:[...], qtype?, path?:[e, r, e, ...]}.
QuestionRecord record_from_json(const nlohmann::json& line, const KnowledgeGraph& kg, const Preprocessor& prep);
nlohmann::json record_to_json(const QuestionRecord& rec, const KnowledgeGraph& kg);

// Cluster label: qtype plus the sorted multiset of type labels in Q_e.
std::string cluster_key(const QuestionRecord& rec, const KnowledgeGraph& kg);

class QuestionBase {
public:
    std::size_t add(QuestionRecord rec);
    void attach_path(std::size_t index, Path path, const KnowledgeGraph& kg);
    void set_decomposition(std::size_t index, std::vector<DecompositionStep> steps);

    // Freezes document frequencies and builds the vector index.
    void finalize();
    bool finalized() const noexcept { return finalized_; }

    // Unit-length TF-IDF weights (raw term counts, idf = ln((1+N)/(1+df)) + 1
    // with N the number of indexed records). Empty input gives the zero vector.
    SparseVector vectorize(const std::vector<std::string>& tokens) const;

    std::size_t size() const noexcept { return records_.size(); }
    const QuestionRecord& record(std::size_t i) const { return records_.at(i); }
    const std::vector<QuestionRecord>& records() const noexcept { return records_; }

    // Vector of record i; nullptr when its Q_e is empty.
    const SparseVector* vector(std::size_t i) const;
    std::size_t indexed_count() const noexcept { return vectors_.size(); }

    // Records whose path contains the segment (either orientation).
    std::vector<std::size_t> records_with_segment(const PathSegment& seg) const;
    std::size_t path_record_count() const;

private:
    void index_segments(std::size_t index);
    void unindex_segments(std::size_t index);

    std::vector<QuestionRecord> records_;
    std::map<std::string, std::size_t> document_frequency_;
    std::map<std::size_t, SparseVector> vectors_;
    std::map<Path, std::vector<std::size_t>> segment_index_;
    std::size_t indexed_n_ = 0;
    bool finalized_ = false;
};

// Canonical orientation used as the segment index key.
Path canonical_segment(const Path& p);

}  // namespace splitrag
