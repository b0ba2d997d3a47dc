#include "splitrag/gateway.hpp"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace splitrag {

std::string to_string(Role r) {
    switch (r) {
    case Role::subgraph_agent:
        return "subgraph-agent";
    case Role::head_agent:
        return "head-agent";
    case Role::summarizer:
        return "summarizer";
    }
    return "unknown";
}

namespace {

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

// Text after the first line equal to `marker`, up to the next blank line.
std::string block_after(const std::string& prompt, const std::string& marker) {
    auto pos = prompt.find(marker);
    if (pos == std::string::npos) return {};
    pos += marker.size();
    auto end = prompt.find("\n\n", pos);
    std::string block = prompt.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    while (!block.empty() && (block.front() == '\n' || block.front() == ' ')) block.erase(block.begin());
    return block;
}

struct SlotGuard {
    std::counting_semaphore<1024>& sem;
    std::atomic<std::size_t>& in_flight;

    SlotGuard(std::counting_semaphore<1024>& s, std::atomic<std::size_t>& n, std::atomic<std::size_t>& peak)
        : sem(s), in_flight(n) {
        sem.acquire();
        std::size_t now = ++in_flight;
        std::size_t seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
    }
    ~SlotGuard() {
        --in_flight;
        sem.release();
    }
};

}  // namespace

void GatewayConfig::apply_env() {
    if (endpoint.empty()) endpoint = env_or_empty("SPLITRAG_LLM_ENDPOINT");
    if (model_agent.empty()) model_agent = env_or_empty("SPLITRAG_LLM_MODEL_AGENT");
    if (model_head.empty()) model_head = env_or_empty("SPLITRAG_LLM_MODEL_HEAD");
}

void GatewayConfig::validate() const {
    if (max_retries < 0) throw ConfigError("gateway.max_retries must be >= 0");
    if (max_in_flight < 1 || max_in_flight > 1024) throw ConfigError("gateway.max_in_flight must lie in [1, 1024]");
    if (kind == Kind::stub) return;
    if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
        throw ConfigError("gateway.endpoint must be an http(s) URL");
    }
    if (model_agent.empty() || model_head.empty()) throw ConfigError("gateway: agent and head model names are required");
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = body.find('{', pos)) != std::string::npos) {
        auto end = body.find('}', pos);
        if (end == std::string::npos) break;
        std::string name = body.substr(pos + 1, end - pos - 1);
        bool ident = !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
            return std::isalnum(c) || c == '_';
        });
        if (ident && std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
        pos = end + 1;
    }
    return out;
}

std::string PromptTemplate::fill(const std::map<std::string, std::string>& values) const {
    std::string out = body;
    for (const auto& name : placeholders()) {
        auto it = values.find(name);
        if (it == values.end()) throw Error("prompt placeholder {" + name + "} is not filled");
        std::string key = "{" + name + "}";
        std::size_t pos = 0;
        while ((pos = out.find(key, pos)) != std::string::npos) {
            out.replace(pos, key.size(), it->second);
            pos += it->second.size();
        }
    }
    return out;
}

PromptTemplate PromptTemplate::builtin(Role role) {
    switch (role) {
    case Role::subgraph_agent:
        return {role,
                "Given Subgraph Context:\n"
                "- Entity Types: {T_entity}\n"
                "- Relation Types: {T_relations}\n"
                "- Coverage: this subgraph mainly holds {label} relations\n"
                "Given Current Subquestion: {Q_sub}\n"
                "\n"
                "Task:\n"
                "1. Work out what the subquestion needs.\n"
                "2. Write a graph query over the subgraph schema that returns the triples answering it.\n"
                "\n"
                "Constraints:\n"
                "- Only entities and relations listed above may appear.\n"
                "\n"
                "Reply as JSON: {\"query\": \"...\", \"reasoning\": \"...\"}\n"};
    case Role::head_agent:
        return {role,
                "Given verified facts:\n{T_clean}\n"
                "\n"
                "Supporting evidence:\n{E_all}\n"
                "\n"
                "Original question: {q_new}\n"
                "\n"
                "Answer the question from the facts above and explain briefly. "
                "Put the answer entities on the first line, separated by \" | \".\n"};
    case Role::summarizer:
        return {role,
                "Rewrite these knowledge graph facts as short evidence sentences, one per line.\n"
                "Facts:\n{T_clean}\n"};
    }
    throw Error("unknown prompt role");
}

Gateway::Gateway(GatewayConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    slots_ = std::make_unique<std::counting_semaphore<1024>>(static_cast<std::ptrdiff_t>(cfg_.max_in_flight));
    if (cfg_.kind == GatewayConfig::Kind::http) {
        token_ = env_or_empty(cfg_.token_env.c_str());
        if (token_.empty()) throw ConfigError("gateway: environment variable " + cfg_.token_env + " is not set");
    }
}

Gateway::~Gateway() = default;

std::string Gateway::stub_reply(Role role, const std::string& prompt) {
    switch (role) {
    case Role::summarizer: {
        auto lines = split_lines(block_after(prompt, "Facts:\n"));
        std::sort(lines.begin(), lines.end());
        std::string out;
        for (const auto& l : lines) out += (out.empty() ? "" : "\n") + l;
        return out;
    }
    case Role::head_agent:
        return block_after(prompt, "Given verified facts:\n");
    case Role::subgraph_agent:
        return R"({"query": "native traversal", "reasoning": "anchored walk inside the assigned subgraphs"})";
    }
    return {};
}

std::string Gateway::complete(Role role, const std::string& prompt) {
    SlotGuard guard(*slots_, in_flight_, peak_);
    if (is_stub()) {
        ++attempts_;
        return stub_reply(role, prompt);
    }
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(cfg_.backoff * (1 << (attempt - 1)));
        ++attempts_;
        try {
            return post(role, prompt);
        } catch (const GatewayError& e) {
            last_error = e.what();
        }
    }
    throw GatewayError("gateway: " + std::to_string(cfg_.max_retries + 1) + " attempts failed: " + last_error);
}

std::string Gateway::post(Role role, const std::string& prompt) {
    auto scheme_end = cfg_.endpoint.find("://");
    auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    std::string origin = cfg_.endpoint.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);

    httplib::Client client(origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout).count();
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout).count() % 1000000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    nlohmann::json body;
    body["model"] = role == Role::head_agent ? cfg_.model_head : cfg_.model_agent;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = 0;
    httplib::Headers headers{{"Authorization", "Bearer " + token_}};

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw GatewayError("request failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) throw GatewayError("HTTP " + std::to_string(res->status));
    try {
        auto reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw GatewayError(std::string("malformed response: ") + e.what());
    }
}

}  // namespace splitrag
