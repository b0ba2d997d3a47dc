#include "splitrag/question.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace splitrag {

namespace {

bool word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80 || c == '\''; }

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        while (!cur.empty() && cur.front() == '\'') cur.erase(cur.begin());
        if (cur.size() >= 2 && cur.ends_with("'s")) cur.resize(cur.size() - 2);
        while (!cur.empty() && cur.back() == '\'') cur.pop_back();
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
    };
    for (unsigned char c : text) {
        if (word_char(c)) {
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string QuestionContexts::semantic_text() const {
    std::string s;
    for (const auto& t : semantic) {
        if (!s.empty()) s += ' ';
        s += t.render();
    }
    return s;
}

std::string QuestionContexts::entity_type_text() const {
    std::string s;
    for (const auto& t : entity_type) {
        if (!s.empty()) s += ' ';
        s += t.text;
    }
    return s;
}

std::vector<std::string> QuestionContexts::entity_type_tokens() const {
    std::vector<std::string> out;
    out.reserve(entity_type.size());
    for (const auto& t : entity_type) out.push_back(t.text);
    return out;
}

std::vector<EntityId> QuestionRecord::linked_entities() const {
    std::vector<EntityId> out;
    for (const auto& l : links) {
        if (std::find(out.begin(), out.end(), l.entity) == out.end()) out.push_back(l.entity);
    }
    return out;
}

std::set<std::string> Preprocessor::default_stopwords() {
    return {"a",    "an",    "the",   "and",  "or",   "of",    "to",   "in",    "on",   "at",
            "by",   "for",   "with",  "from", "as",   "is",    "are",  "was",   "were", "be",
            "been", "being", "do",    "does", "did",  "what",  "which", "who",  "whom", "whose",
            "when", "where", "why",   "how",  "that", "this",  "these", "those", "it",  "its",
            "there", "their", "they", "them", "he",   "she",   "his",  "her",   "also", "same"};
}

std::set<std::string> Preprocessor::load_stopwords(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open stopword file " + file.string());
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        out.insert(line);
    }
    return out;
}

std::map<std::string, std::string> Preprocessor::load_lexicon(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open type lexicon " + file.string());
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(file.string(), lineno, "expected word<TAB>type");
        out[trim(line.substr(0, tab))] = trim(line.substr(tab + 1));
    }
    return out;
}

std::optional<std::string> Preprocessor::type_word(const std::string& word, const KnowledgeGraph& kg) const {
    if (auto it = lexicon_.find(word); it != lexicon_.end()) return it->second;
    if (kg.find_type(word)) return word;
    if (word.size() > 1 && word.back() == 's') {
        std::string stem = word.substr(0, word.size() - 1);
        if (kg.find_type(stem)) return stem;
    }
    return std::nullopt;
}

QuestionContexts Preprocessor::preprocess(const std::string& raw, std::vector<EntityLink> links,
                                          const KnowledgeGraph& kg) const {
    std::sort(links.begin(), links.end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
    for (std::size_t i = 0; i < links.size(); ++i) {
        const auto& l = links[i];
        if (l.begin >= l.end || l.end > raw.size()) throw Error("entity span out of range");
        if (i > 0 && links[i - 1].end > l.begin) throw Error("overlapping entity spans");
        if (l.entity.value >= kg.entity_count()) throw Error("linked entity not in graph");
    }

    QuestionContexts ctx;
    std::size_t pos = 0;
    auto add_words = [&](std::string_view text) {
        for (auto& w : words_of(text)) {
            if (!stopwords_.contains(w)) ctx.semantic.push_back({std::move(w), std::nullopt});
        }
    };
    for (const auto& l : links) {
        add_words(std::string_view(raw).substr(pos, l.begin - pos));
        ctx.semantic.push_back({raw.substr(l.begin, l.end - l.begin), l.entity});
        pos = l.end;
    }
    add_words(std::string_view(raw).substr(pos));

    for (std::size_t i = 0; i < ctx.semantic.size(); ++i) {
        const auto& tok = ctx.semantic[i];
        if (tok.entity) {
            ctx.entity_type.push_back({kg.type_label(*tok.entity), TypeToken::Source::entity});
            continue;
        }
        auto type = type_word(tok.text, kg);
        if (!type) {
            ctx.entity_type.push_back({tok.text, TypeToken::Source::word});
            continue;
        }
        // "the film [X]": the type word restates the mention that follows.
        if (i + 1 < ctx.semantic.size() && ctx.semantic[i + 1].entity &&
            kg.type_label(*ctx.semantic[i + 1].entity) == *type)
            continue;
        ctx.entity_type.push_back({*type, TypeToken::Source::type_word});
    }
    return ctx;
}

QuestionContexts preprocess(const std::string& raw, std::vector<EntityLink> links, const KnowledgeGraph& kg,
                            const std::set<std::string>& stopwords) {
    return Preprocessor(stopwords, {}).preprocess(raw, std::move(links), kg);
}

QuestionRecord attach_path(QuestionRecord rec, Path path, const KnowledgeGraph& kg) {
    if (path.hops() == 0 || !path.valid_in(kg)) throw Error("question " + rec.id + ": invalid path");
    auto linked = rec.linked_entities();
    auto is_linked = [&](EntityId e) { return std::find(linked.begin(), linked.end(), e) != linked.end(); };
    if (is_linked(path.front())) {
        rec.path = std::move(path);
    } else if (is_linked(path.back())) {
        rec.path = path.reversed();
    } else {
        throw Error("question " + rec.id + ": path endpoints include no linked entity");
    }
    return rec;
}

QuestionRecord record_from_json(const nlohmann::json& line, const KnowledgeGraph& kg, const Preprocessor& prep) {
    QuestionRecord rec;
    const auto& id = line.at("id");
    rec.id = id.is_string() ? id.get<std::string>() : id.dump();
    rec.raw = line.at("question").get<std::string>();
    if (line.contains("entities")) {
        for (const auto& ent : line["entities"]) {
            const auto& span = ent.at("span");
            if (!span.is_array() || span.size() != 2) throw Error("question " + rec.id + ": span must be [begin, end]");
            auto name = ent.at("name").get<std::string>();
            auto e = kg.find_entity(name);
            if (!e) throw Error("question " + rec.id + ": unknown entity '" + name + "'");
            rec.links.push_back({span[0].get<std::size_t>(), span[1].get<std::size_t>(), *e});
        }
    }
    if (line.contains("answers")) {
        for (const auto& a : line["answers"]) rec.answers.push_back(a.get<std::string>());
    }
    if (line.contains("qtype") && line["qtype"].is_string()) rec.qtype = line["qtype"].get<std::string>();
    rec.contexts = prep.preprocess(rec.raw, rec.links, kg);
    if (line.contains("path") && !line["path"].is_null()) {
        auto tokens = line["path"].get<std::vector<std::string>>();
        rec = attach_path(std::move(rec), Path::from_names(kg, tokens), kg);
    }
    return rec;
}

nlohmann::json record_to_json(const QuestionRecord& rec, const KnowledgeGraph& kg) {
    nlohmann::json j;
    j["id"] = rec.id;
    j["question"] = rec.raw;
    j["semantic_context"] = rec.contexts.semantic_text();
    j["entity_type_context"] = rec.contexts.entity_type_text();
    auto ents = nlohmann::json::array();
    for (const auto& l : rec.links) ents.push_back({{"span", {l.begin, l.end}}, {"name", kg.name(l.entity)}});
    j["entities"] = ents;
    j["path"] = rec.path ? nlohmann::json(rec.path->to_names(kg)) : nlohmann::json(nullptr);
    j["qtype"] = rec.qtype ? nlohmann::json(*rec.qtype) : nlohmann::json(nullptr);
    j["answers"] = rec.answers;
    return j;
}

std::string cluster_key(const QuestionRecord& rec, const KnowledgeGraph& kg) {
    (void)kg;
    std::vector<std::string> types;
    for (const auto& t : rec.contexts.entity_type) {
        if (t.source != TypeToken::Source::word) types.push_back(t.text);
    }
    std::sort(types.begin(), types.end());
    std::string key = rec.qtype.value_or("-") + "|";
    for (std::size_t i = 0; i < types.size(); ++i) key += (i ? "," : "") + types[i];
    return key;
}

Path canonical_segment(const Path& p) {
    auto r = p.reversed();
    return r < p ? r : p;
}

std::size_t QuestionBase::add(QuestionRecord rec) {
    if (finalized_) throw Error("question base is finalized");
    records_.push_back(std::move(rec));
    index_segments(records_.size() - 1);
    return records_.size() - 1;
}

void QuestionBase::attach_path(std::size_t index, Path path, const KnowledgeGraph& kg) {
    auto updated = splitrag::attach_path(records_.at(index), std::move(path), kg);
    unindex_segments(index);
    records_[index] = std::move(updated);
    index_segments(index);
}

void QuestionBase::set_decomposition(std::size_t index, std::vector<DecompositionStep> steps) {
    records_.at(index).decomposition = std::move(steps);
}

void QuestionBase::index_segments(std::size_t index) {
    const auto& rec = records_[index];
    if (!rec.path) return;
    for (const auto& seg : split_into_segments(*rec.path)) {
        auto& ids = segment_index_[canonical_segment(seg.path())];
        if (std::find(ids.begin(), ids.end(), index) == ids.end()) ids.push_back(index);
    }
}

void QuestionBase::unindex_segments(std::size_t index) {
    const auto& rec = records_[index];
    if (!rec.path) return;
    for (const auto& seg : split_into_segments(*rec.path)) {
        auto it = segment_index_.find(canonical_segment(seg.path()));
        if (it == segment_index_.end()) continue;
        std::erase(it->second, index);
        if (it->second.empty()) segment_index_.erase(it);
    }
}

void QuestionBase::finalize() {
    document_frequency_.clear();
    vectors_.clear();
    std::size_t n = 0;
    for (const auto& rec : records_) {
        auto tokens = rec.contexts.entity_type_tokens();
        if (tokens.empty()) continue;
        ++n;
        std::set<std::string> unique(tokens.begin(), tokens.end());
        for (const auto& t : unique) ++document_frequency_[t];
    }
    indexed_n_ = n;
    finalized_ = true;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        auto tokens = records_[i].contexts.entity_type_tokens();
        if (!tokens.empty()) vectors_.emplace(i, vectorize(tokens));
    }
}

SparseVector QuestionBase::vectorize(const std::vector<std::string>& tokens) const {
    if (!finalized_) throw Error("question base must be finalized before vectorizing");
    SparseVector v;
    if (tokens.empty()) return v;
    for (const auto& t : tokens) v[t] += 1.0;
    const double n = static_cast<double>(indexed_n_);
    for (auto& [term, w] : v) {
        auto it = document_frequency_.find(term);
        double df = it == document_frequency_.end() ? 0.0 : static_cast<double>(it->second);
        w *= std::log((1.0 + n) / (1.0 + df)) + 1.0;
    }
    return normalized(std::move(v));
}

const SparseVector* QuestionBase::vector(std::size_t i) const {
    auto it = vectors_.find(i);
    return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<std::size_t> QuestionBase::records_with_segment(const PathSegment& seg) const {
    auto it = segment_index_.find(canonical_segment(seg.path()));
    if (it == segment_index_.end()) return {};
    return it->second;
}

std::size_t QuestionBase::path_record_count() const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.path.has_value(); }));
}

}  // namespace splitrag
