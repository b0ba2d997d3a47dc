#include "splitrag/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

namespace splitrag {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot open " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path resolve_in(const fs::path& dir, const std::string& p) {
    fs::path path(p);
    return path.is_relative() ? dir / path : path;
}

std::vector<QuestionRecord> load_qa(const fs::path& file, const KnowledgeGraph& kg, const Preprocessor& prep,
                                    std::vector<std::string>& warnings) {
    std::ifstream in(file);
    if (!in) throw Error("missing QA file " + file.string());
    std::vector<QuestionRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(file.string(), lineno, std::string("malformed JSON: ") + e.what());
        }
        std::vector<std::string> names;
        try {
            if (j.contains("entities")) {
                for (const auto& ent : j.at("entities")) names.push_back(ent.at("name").get<std::string>());
            }
            if (j.contains("path") && j["path"].is_array()) {
                const auto& p = j["path"];
                for (std::size_t i = 0; i < p.size(); i += 2) names.push_back(p[i].get<std::string>());
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(file.string(), lineno, e.what());
        }
        auto unknown = std::find_if(names.begin(), names.end(), [&](const std::string& n) { return !kg.find_entity(n); });
        if (unknown != names.end()) {
            warnings.push_back(file.string() + ":" + std::to_string(lineno) + ": unknown entity '" + *unknown +
                               "', question skipped");
            continue;
        }
        try {
            out.push_back(record_from_json(j, kg, prep));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(file.string(), lineno, e.what());
        } catch (const Error& e) {
            throw ParseError(file.string(), lineno, e.what());
        }
    }
    return out;
}

}  // namespace

Dataset load_metaqa_style(const fs::path& dir, const DataConfig& data) {
    Dataset ds;
    Diagnostics diag;
    const fs::path kb = dir / "kb.txt";
    const fs::path schema = dir / "schema.json";
    const fs::path train = dir / "qa_train.jsonl";
    const fs::path test = dir / "qa_test.jsonl";
    for (const auto& f : {kb, schema, train, test}) {
        if (!fs::exists(f)) throw Error("dataset file missing: " + f.string());
    }
    ds.kg = load_graph(kb, schema, &diag);

    std::set<std::string> stop = Preprocessor::default_stopwords();
    std::map<std::string, std::string> lexicon;
    std::string fp;
    if (!data.stopwords.empty()) {
        auto f = resolve_in(dir, data.stopwords);
        stop = Preprocessor::load_stopwords(f);
        fp += sha256_hex(read_file(f));
    }
    fs::path lex = data.lexicon.empty() ? dir / "type_lexicon.tsv" : resolve_in(dir, data.lexicon);
    if (fs::exists(lex)) {
        lexicon = Preprocessor::load_lexicon(lex);
        fp += sha256_hex(read_file(lex));
    } else if (!data.lexicon.empty()) {
        throw Error("type lexicon not found: " + lex.string());
    }
    Preprocessor prep(std::move(stop), std::move(lexicon));

    for (auto& rec : load_qa(train, ds.kg, prep, diag.warnings)) ds.train.add(std::move(rec));
    ds.train.finalize();
    ds.test = load_qa(test, ds.kg, prep, diag.warnings);

    for (const auto& f : {kb, schema, train, test}) fp += sha256_hex(read_file(f));
    ds.fingerprint = sha256_hex(fp);
    ds.warnings = std::move(diag.warnings);
    return ds;
}

PartitionResult single_agent_partition(const KnowledgeGraph& kg, const QuestionBase& base) {
    PartitionResult r;
    r.total_entities = kg.entity_count();
    r.eta_max = kg.entity_count();
    r.config.eta_max = r.eta_max;
    r.config.tau_min = 1;
    r.tau_min = 1;
    Subgraph s;
    for (std::uint32_t i = 0; i < kg.entity_count(); ++i) s.entities.push_back(EntityId{i});
    for (TripleId t = 0; t < kg.triple_count(); ++t) s.triples.push_back(t);
    std::map<Path, std::size_t> counts;
    for (const auto& rec : base.records()) {
        if (!rec.path) continue;
        for (const auto& seg : split_into_segments(*rec.path)) ++counts[canonical_segment(seg.path())];
    }
    for (const auto& [p, n] : counts) s.support.push_back({p, n});
    s.signature = signature_of(kg, s.triples);
    r.subgraphs.push_back(std::move(s));
    r.seed_count = 1;
    r.report = information_gain(r.subgraphs, r.config, r.total_entities);
    r.colors = assign_colors(r.subgraphs, kg);
    return r;
}

Model build_model(Dataset& ds, const Config& cfg) {
    Model m;
    if (cfg.ablation.single_agent) {
        m.partition = single_agent_partition(ds.kg, ds.train);
    } else {
        m.partition = Partitioner(ds.kg, ds.train, cfg.partition).run();
    }
    m.allocation = run_allocation(ds.train, m.partition.subgraphs, ds.kg, cfg.allocation);
    build_decompositions(ds.train, m.partition.subgraphs, m.allocation, ds.kg);
    return m;
}

QuestionRun answer_question(const QuestionRecord& q, const Router& router, std::span<const Subgraph> subgraphs,
                            const KnowledgeGraph& kg, Gateway& gateway, const Config& cfg) {
    auto started = std::chrono::steady_clock::now();
    QuestionRun run;
    run.plan = router.route(q);
    if (!run.plan.unroutable) run.results = run_plan(run.plan, subgraphs, kg, gateway, cfg.retriever);
    run.fusion = fuse(kg, run.results, q, run.plan, gateway, cfg.fusion);
    run.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return run;
}

AnswerRecord answer_record(const QuestionRun& run, std::span<const Subgraph> subgraphs) {
    AnswerRecord a;
    a.question = run.plan.question;
    a.predicted = run.fusion.answer.entities;
    a.mode = to_string(run.plan.mode);
    a.unroutable = run.plan.unroutable;
    a.activated = activated_subgraphs(run.results);
    a.touched = touched_entities(run.results, subgraphs);
    a.empty_retrieval = run.fusion.all.triples.empty();
    return a;
}

EvalReport evaluate(const Dataset& ds, std::span<const Subgraph> subgraphs, const Allocation& alloc,
                    std::span<const AnswerRecord> answers) {
    std::map<std::string, const AnswerRecord*> by_id;
    for (const auto& a : answers) by_id[a.question] = &a;

    EvalReport rep;
    std::vector<QuestionScore> scores;
    std::vector<SearchTrace> traces;
    std::size_t with_path = 0;
    std::size_t covered = 0;
    for (const auto& q : ds.test) {
        EvalEntry e;
        auto it = by_id.find(q.id);
        if (it == by_id.end()) {
            e.score = score_question(q.id, {}, q.answers);
            e.mode = "missing";
            e.empty_retrieval = true;
        } else {
            const auto& a = *it->second;
            e.score = score_question(q.id, a.predicted, q.answers);
            e.mode = a.mode;
            e.unroutable = a.unroutable;
            e.activated = a.activated;
            e.touched = a.touched;
            e.empty_retrieval = a.empty_retrieval;
        }
        if (q.path) {
            auto ids = q.path->triple_ids(ds.kg);
            bool inside = std::all_of(ids.begin(), ids.end(), [&](TripleId t) {
                return std::any_of(e.activated.begin(), e.activated.end(),
                                   [&](std::size_t j) { return subgraphs[j].has_triple(t); });
            });
            e.g_coverage = inside;
            ++with_path;
            covered += inside ? 1 : 0;
        }
        ++rep.modes[e.mode];
        scores.push_back(e.score);
        traces.push_back({q.id, e.activated.size(), e.touched, e.empty_retrieval});
        rep.entries.push_back(std::move(e));
    }
    rep.summary = summarize(scores);
    if (!traces.empty()) rep.search = measure_search_space(traces, ds.kg.entity_count(), subgraphs.size());
    rep.g_coverage = with_path == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(with_path);
    std::size_t members = 0;
    for (const auto& g : alloc.groups) members += g.members.size();
    rep.mean_group_size = alloc.groups.empty() ? 0.0 : static_cast<double>(members) / static_cast<double>(alloc.groups.size());
    return rep;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["summary"] = splitrag::to_json(summary);
    j["search_space"] = splitrag::to_json(search);
    j["modes"] = modes;
    j["g_coverage"] = g_coverage;
    j["mean_group_size"] = mean_group_size;
    j["questions"] = nlohmann::json::array();
    for (const auto& e : entries) {
        auto q = splitrag::to_json(e.score);
        q["mode"] = e.mode;
        q["unroutable"] = e.unroutable;
        q["activated_subgraphs"] = e.activated;
        q["touched_entities"] = e.touched;
        q["empty_retrieval"] = e.empty_retrieval;
        q["g_coverage"] = e.g_coverage ? nlohmann::json(*e.g_coverage) : nlohmann::json(nullptr);
        j["questions"].push_back(std::move(q));
    }
    return j;
}

PipelineRun run_pipeline(Dataset& ds, const Config& cfg) {
    PipelineRun out;
    out.model = build_model(ds, cfg);
    const auto& subgraphs = out.model.partition.subgraphs;
    Router router(ds.kg, ds.train, subgraphs, out.model.allocation, cfg.router);
    GatewayConfig gcfg = cfg.gateway;
    gcfg.apply_env();
    Gateway gateway(gcfg);
    for (const auto& q : ds.test) {
        out.runs.push_back(answer_question(q, router, subgraphs, ds.kg, gateway, cfg));
        out.answers.push_back(answer_record(out.runs.back(), subgraphs));
    }
    out.report = evaluate(ds, subgraphs, out.model.allocation, out.answers);
    return out;
}

// ---- staged commands ----

std::optional<nlohmann::json> read_artifact(const fs::path& dir, const std::string& name) {
    auto json_file = dir / (name + ".json");
    if (fs::exists(json_file)) {
        try {
            return nlohmann::json::parse(read_file(json_file));
        } catch (const nlohmann::json::exception& e) {
            throw Error(json_file.string() + ": " + e.what());
        }
    }
    auto cbor_file = dir / (name + ".cbor");
    if (fs::exists(cbor_file)) {
        auto bytes = read_file(cbor_file);
        try {
            return nlohmann::json::from_cbor(bytes.begin(), bytes.end());
        } catch (const nlohmann::json::exception& e) {
            throw Error(cbor_file.string() + ": " + e.what());
        }
    }
    return std::nullopt;
}

void write_artifact(const fs::path& dir, const std::string& name, const nlohmann::json& doc, bool compact) {
    fs::create_directories(dir);
    auto json_file = dir / (name + ".json");
    auto cbor_file = dir / (name + ".cbor");
    if (compact) {
        fs::remove(json_file);
        auto bytes = nlohmann::json::to_cbor(doc);
        std::ofstream out(cbor_file, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("cannot write " + cbor_file.string());
    } else {
        fs::remove(cbor_file);
        std::ofstream out(json_file, std::ios::binary);
        out << doc.dump(2) << "\n";
        if (!out) throw Error("cannot write " + json_file.string());
    }
}

namespace {

struct StageInfo {
    const char* name;       // command name
    const char* artifact;   // file written
    std::vector<const char*> sections;
};

const std::vector<StageInfo>& stages() {
    static const std::vector<StageInfo> s = {
        {"partition", "partition", {"partition", "data", "ablation"}},
        {"allocate", "allocation", {"allocation"}},
        {"route", "plans", {"router"}},
        {"answer", "answers", {"retriever", "fusion", "gateway"}},
        {"eval", "eval_report", {}},
    };
    return s;
}

std::string config_hash(const Config& cfg, std::size_t stage) {
    nlohmann::json j = nlohmann::json::object();
    for (const char* s : stages()[stage].sections) j[s] = cfg.section(s);
    return sha256_hex(j.dump());
}

std::string doc_hash(const nlohmann::json& doc) { return sha256_hex(doc.dump()); }

// Loads and checks every artifact before `stage`.
std::vector<nlohmann::json> upstream(const Config& cfg, const StageOptions& opt, std::size_t stage,
                                     const std::string& dataset_fp) {
    std::vector<nlohmann::json> docs;
    for (std::size_t k = 0; k < stage; ++k) {
        const auto& info = stages()[k];
        auto doc = read_artifact(opt.out, info.artifact);
        if (!doc) {
            throw StageError(2, std::string(stages()[stage].name) + ": missing artifact " + info.artifact +
                                    " (run '" + info.name + "' first)");
        }
        if (doc->value("config_sha256", "") != config_hash(cfg, k)) {
            throw StageError(3, std::string(stages()[stage].name) + ": config changed since '" + info.name + "' ran");
        }
        if (k == 0) {
            if (doc->value("dataset_sha256", "") != dataset_fp) {
                throw StageError(3, std::string(stages()[stage].name) + ": dataset changed since 'partition' ran");
            }
        } else if (doc->value("upstream_sha256", "") != doc_hash(docs.back())) {
            throw StageError(3, std::string(stages()[stage].name) + ": artifact " + info.artifact +
                                    " was built from a different " + stages()[k - 1].artifact);
        }
        docs.push_back(std::move(*doc));
    }
    return docs;
}

nlohmann::json header(const Config& cfg, std::size_t stage, const std::vector<nlohmann::json>& docs) {
    nlohmann::json j;
    j["stage"] = stages()[stage].name;
    j["config_sha256"] = config_hash(cfg, stage);
    if (!docs.empty()) j["upstream_sha256"] = doc_hash(docs.back());
    return j;
}

std::vector<Subgraph> load_subgraphs(const nlohmann::json& partition_doc, const KnowledgeGraph& kg) {
    auto subs = subgraphs_from_json(partition_doc.at("result"), kg);
    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (subs[i].id != i) throw Error("partition artifact: subgraph ids are not dense");
    }
    return subs;
}

}  // namespace

std::string cmd_partition(const Config& cfg, const StageOptions& opt) {
    Dataset ds = load_metaqa_style(opt.in, cfg.data);
    PartitionResult r = cfg.ablation.single_agent ? single_agent_partition(ds.kg, ds.train)
                                                  : Partitioner(ds.kg, ds.train, cfg.partition).run();
    auto doc = header(cfg, 0, {});
    doc["dataset_sha256"] = ds.fingerprint;
    doc["dataset_warnings"] = ds.warnings;
    doc["result"] = partition_to_json(r, ds.kg);
    write_artifact(opt.out, "partition", doc, opt.compact);
    return doc["config_sha256"];
}

std::string cmd_allocate(const Config& cfg, const StageOptions& opt) {
    Dataset ds = load_metaqa_style(opt.in, cfg.data);
    auto docs = upstream(cfg, opt, 1, ds.fingerprint);
    auto subgraphs = load_subgraphs(docs[0], ds.kg);
    auto alloc = run_allocation(ds.train, subgraphs, ds.kg, cfg.allocation);
    build_decompositions(ds.train, subgraphs, alloc, ds.kg);
    auto doc = header(cfg, 1, docs);
    doc["result"] = allocation_to_json(alloc, ds.train);
    doc["decompositions"] = decompositions_to_json(ds.train, ds.kg);
    write_artifact(opt.out, "allocation", doc, opt.compact);
    return doc["config_sha256"];
}

std::string cmd_route(const Config& cfg, const StageOptions& opt) {
    Dataset ds = load_metaqa_style(opt.in, cfg.data);
    auto docs = upstream(cfg, opt, 2, ds.fingerprint);
    auto subgraphs = load_subgraphs(docs[0], ds.kg);
    auto alloc = allocation_from_json(docs[1].at("result"), subgraphs);
    decompositions_from_json(ds.train, docs[1].at("decompositions"), ds.kg);
    Router router(ds.kg, ds.train, subgraphs, alloc, cfg.router);
    auto doc = header(cfg, 2, docs);
    doc["plans"] = nlohmann::json::array();
    for (const auto& q : ds.test) doc["plans"].push_back(plan_to_json(router.route(q), ds.kg));
    write_artifact(opt.out, "plans", doc, opt.compact);
    return doc["config_sha256"];
}

std::string cmd_answer(const Config& cfg, const StageOptions& opt) {
    Dataset ds = load_metaqa_style(opt.in, cfg.data);
    auto docs = upstream(cfg, opt, 3, ds.fingerprint);
    auto subgraphs = load_subgraphs(docs[0], ds.kg);
    GatewayConfig gcfg = cfg.gateway;
    gcfg.apply_env();
    Gateway gateway(gcfg);
    std::map<std::string, const QuestionRecord*> by_id;
    for (const auto& q : ds.test) by_id[q.id] = &q;

    auto doc = header(cfg, 3, docs);
    doc["answers"] = nlohmann::json::array();
    nlohmann::json traces = nlohmann::json::array();
    nlohmann::json timings = nlohmann::json::object();
    auto started = std::chrono::steady_clock::now();
    for (const auto& pj : docs[2].at("plans")) {
        QuestionRun run;
        run.plan = plan_from_json(pj, ds.kg);
        auto it = by_id.find(run.plan.question);
        if (it == by_id.end()) throw StageError(3, "answer: plan for unknown question " + run.plan.question);
        auto t0 = std::chrono::steady_clock::now();
        if (!run.plan.unroutable) run.results = run_plan(run.plan, subgraphs, ds.kg, gateway, cfg.retriever);
        run.fusion = fuse(ds.kg, run.results, *it->second, run.plan, gateway, cfg.fusion);
        run.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

        auto rec = answer_record(run, subgraphs);
        nlohmann::json aj{{"question", rec.question},
                          {"predicted", rec.predicted},
                          {"mode", rec.mode},
                          {"unroutable", rec.unroutable},
                          {"activated", rec.activated},
                          {"touched", rec.touched},
                          {"empty_retrieval", rec.empty_retrieval}};
        aj["fusion"] = fusion_to_json(run.fusion, ds.kg);
        doc["answers"].push_back(std::move(aj));
        traces.push_back(trace_to_json(run.plan, run.results, subgraphs, ds.kg));
        timings[rec.question] = run.millis;
    }
    timings["_total_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    write_artifact(opt.out, "answers", doc, opt.compact);
    write_artifact(opt.out, "traces", traces, opt.compact);
    write_artifact(opt.out, "timings", timings, false);
    return doc["config_sha256"];
}

std::string cmd_eval(const Config& cfg, const StageOptions& opt) {
    Dataset ds = load_metaqa_style(opt.in, cfg.data);
    auto docs = upstream(cfg, opt, 4, ds.fingerprint);
    auto subgraphs = load_subgraphs(docs[0], ds.kg);
    auto alloc = allocation_from_json(docs[1].at("result"), subgraphs);
    std::vector<AnswerRecord> answers;
    for (const auto& aj : docs[3].at("answers")) {
        AnswerRecord a;
        a.question = aj.at("question").get<std::string>();
        a.predicted = aj.at("predicted").get<std::vector<std::string>>();
        a.mode = aj.at("mode").get<std::string>();
        a.unroutable = aj.at("unroutable").get<bool>();
        a.activated = aj.at("activated").get<std::vector<std::size_t>>();
        a.touched = aj.at("touched").get<std::size_t>();
        a.empty_retrieval = aj.at("empty_retrieval").get<bool>();
        answers.push_back(std::move(a));
    }
    auto report = evaluate(ds, subgraphs, alloc, answers);
    auto doc = header(cfg, 4, docs);
    doc["report"] = report.to_json();
    write_artifact(opt.out, "eval_report", doc, false);
    return doc["config_sha256"];
}

}  // namespace splitrag
