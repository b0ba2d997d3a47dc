#pragma once
// Chat-completion gateway with a deterministic offline stub.

#include "splitrag/error.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

namespace splitrag {

enum class Role { subgraph_agent, head_agent, summarizer };

std::string to_string(Role r);

class GatewayError : public Error {
public:
    using Error::Error;
};

struct GatewayConfig {
    enum class Kind { stub, http };

    Kind kind = Kind::stub;
    std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
    std::string model_agent;
    std::string model_head;
    std::string token_env = "SPLITRAG_LLM_TOKEN";
    std::chrono::milliseconds timeout{30000};
    int max_retries = 2;
    std::size_t max_in_flight = 4;
    std::chrono::milliseconds backoff{200};

    // Fills endpoint and model names from SPLITRAG_LLM_* where unset.
    void apply_env();
    void validate() const;
};

// Placeholders are written {name}; fill() rejects any left unfilled.
struct PromptTemplate {
    Role role = Role::summarizer;
    std::string body;

    std::vector<std::string> placeholders() const;
    std::string fill(const std::map<std::string, std::string>& values) const;

    static PromptTemplate builtin(Role role);
};

class Gateway {
public:
    explicit Gateway(GatewayConfig cfg);
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    // Throws GatewayError once retries are exhausted.
    std::string complete(Role role, const std::string& prompt);

    bool is_stub() const noexcept { return cfg_.kind == GatewayConfig::Kind::stub; }
    const GatewayConfig& config() const noexcept { return cfg_; }

    std::size_t attempts() const noexcept { return attempts_.load(); }
    std::size_t peak_in_flight() const noexcept { return peak_.load(); }

    // Deterministic canned reply used by the stub.
    static std::string stub_reply(Role role, const std::string& prompt);

private:
    std::string post(Role role, const std::string& prompt);

    GatewayConfig cfg_;
    std::string token_;
    std::unique_ptr<std::counting_semaphore<1024>> slots_;
    std::atomic<std::size_t> attempts_{0};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> peak_{0};
};

}  // namespace splitrag
