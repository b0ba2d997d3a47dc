#include "splitrag/config.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace splitrag {

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

// Drops a trailing "# comment" that is not inside quotes.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

struct Reader {
    const std::string& source;
    std::size_t line;

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(source, line, what); }

    std::string text(const std::string& v) const {
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
        return v;
    }
    double real(const std::string& v) const {
        double out = 0.0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || ptr != v.data() + v.size()) fail("expected a number, got '" + v + "'");
        return out;
    }
    std::size_t count(const std::string& v) const {
        std::size_t out = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || ptr != v.data() + v.size()) fail("expected a non-negative integer, got '" + v + "'");
        return out;
    }
    int integer(const std::string& v) const {
        int out = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || ptr != v.data() + v.size()) fail("expected an integer, got '" + v + "'");
        return out;
    }
    bool boolean(const std::string& v) const {
        if (v == "true") return true;
        if (v == "false") return false;
        fail("expected true or false, got '" + v + "'");
    }
};

using Setter = std::function<void(Config&, const Reader&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"partition.lambda", [](Config& c, const Reader& r, const std::string& v) { c.partition.lambda = r.real(v); }},
        {"partition.eta_max", [](Config& c, const Reader& r, const std::string& v) { c.partition.eta_max = r.count(v); }},
        {"partition.theta_merge",
         [](Config& c, const Reader& r, const std::string& v) { c.partition.theta_merge = r.real(v); }},
        {"partition.t_max", [](Config& c, const Reader& r, const std::string& v) { c.partition.t_max = r.count(v); }},
        {"partition.tau_min", [](Config& c, const Reader& r, const std::string& v) { c.partition.tau_min = r.count(v); }},
        {"partition.entropy_sign",
         [](Config& c, const Reader& r, const std::string& v) { c.partition.entropy_sign = r.integer(v); }},
        {"allocation.n_max", [](Config& c, const Reader& r, const std::string& v) { c.allocation.n_max = r.count(v); }},
        {"allocation.theta_coh",
         [](Config& c, const Reader& r, const std::string& v) { c.allocation.theta_coh = r.real(v); }},
        {"router.k", [](Config& c, const Reader& r, const std::string& v) { c.router.k = r.count(v); }},
        {"router.alpha", [](Config& c, const Reader& r, const std::string& v) { c.router.alpha = r.real(v); }},
        {"router.beta", [](Config& c, const Reader& r, const std::string& v) { c.router.beta = r.real(v); }},
        {"router.theta_sim", [](Config& c, const Reader& r, const std::string& v) { c.router.theta_sim = r.real(v); }},
        {"router.theta_match",
         [](Config& c, const Reader& r, const std::string& v) {
             c.router.theta_match = r.real(v);
             c.retriever.theta_match = c.router.theta_match;
         }},
        {"router.theta_align", [](Config& c, const Reader& r, const std::string& v) { c.router.theta_align = r.real(v); }},
        {"retriever.workers", [](Config& c, const Reader& r, const std::string& v) { c.retriever.workers = r.count(v); }},
        {"fusion.detect_conflicts",
         [](Config& c, const Reader& r, const std::string& v) { c.fusion.detect_conflicts = r.boolean(v); }},
        {"gateway.kind",
         [](Config& c, const Reader& r, const std::string& v) {
             auto s = r.text(v);
             if (s == "stub") {
                 c.gateway.kind = GatewayConfig::Kind::stub;
             } else if (s == "http") {
                 c.gateway.kind = GatewayConfig::Kind::http;
             } else {
                 r.fail("gateway.kind must be stub or http");
             }
         }},
        {"gateway.endpoint", [](Config& c, const Reader& r, const std::string& v) { c.gateway.endpoint = r.text(v); }},
        {"gateway.model_agent",
         [](Config& c, const Reader& r, const std::string& v) { c.gateway.model_agent = r.text(v); }},
        {"gateway.model_head", [](Config& c, const Reader& r, const std::string& v) { c.gateway.model_head = r.text(v); }},
        {"gateway.token_env", [](Config& c, const Reader& r, const std::string& v) { c.gateway.token_env = r.text(v); }},
        {"gateway.timeout_ms",
         [](Config& c, const Reader& r, const std::string& v) {
             c.gateway.timeout = std::chrono::milliseconds(r.count(v));
         }},
        {"gateway.max_retries",
         [](Config& c, const Reader& r, const std::string& v) { c.gateway.max_retries = r.integer(v); }},
        {"gateway.max_in_flight",
         [](Config& c, const Reader& r, const std::string& v) { c.gateway.max_in_flight = r.count(v); }},
        {"gateway.backoff_ms",
         [](Config& c, const Reader& r, const std::string& v) {
             c.gateway.backoff = std::chrono::milliseconds(r.count(v));
         }},
        {"data.stopwords", [](Config& c, const Reader& r, const std::string& v) { c.data.stopwords = r.text(v); }},
        {"data.lexicon", [](Config& c, const Reader& r, const std::string& v) { c.data.lexicon = r.text(v); }},
        {"ablation.single_agent",
         [](Config& c, const Reader& r, const std::string& v) { c.ablation.single_agent = r.boolean(v); }},
    };
    return table;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& source) {
    Config cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        Reader r{source, line_no};
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') r.fail("unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) r.fail("expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) r.fail("expected key = value");
        std::string full = section.empty() ? key : section + "." + key;
        auto it = setters().find(full);
        if (it == setters().end()) r.fail("unknown setting '" + full + "'");
        it->second(cfg, r, value);
    }
    cfg.router.validate();
    cfg.allocation.validate();
    if (cfg.partition.lambda < 0.0) throw ConfigError("partition.lambda must be >= 0");
    return cfg;
}

Config Config::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open config " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), file.string());
}

nlohmann::json Config::section(const std::string& name) const {
    if (name == "partition") {
        nlohmann::json j{{"lambda", partition.lambda},
                         {"theta_merge", partition.theta_merge},
                         {"t_max", partition.t_max},
                         {"entropy_sign", partition.entropy_sign}};
        j["eta_max"] = partition.eta_max ? nlohmann::json(*partition.eta_max) : nlohmann::json(nullptr);
        j["tau_min"] = partition.tau_min ? nlohmann::json(*partition.tau_min) : nlohmann::json(nullptr);
        return j;
    }
    if (name == "allocation") return {{"n_max", allocation.n_max}, {"theta_coh", allocation.theta_coh}};
    if (name == "router") {
        return {{"k", router.k},
                {"alpha", router.alpha},
                {"beta", router.beta},
                {"theta_sim", router.theta_sim},
                {"theta_match", router.theta_match},
                {"theta_align", router.theta_align}};
    }
    if (name == "retriever") return {{"workers", retriever.workers}, {"theta_match", retriever.theta_match}};
    if (name == "fusion") return {{"detect_conflicts", fusion.detect_conflicts}};
    if (name == "gateway") {
        return {{"kind", gateway.kind == GatewayConfig::Kind::stub ? "stub" : "http"},
                {"endpoint", gateway.endpoint},
                {"model_agent", gateway.model_agent},
                {"model_head", gateway.model_head},
                {"token_env", gateway.token_env},
                {"timeout_ms", gateway.timeout.count()},
                {"max_retries", gateway.max_retries},
                {"max_in_flight", gateway.max_in_flight},
                {"backoff_ms", gateway.backoff.count()}};
    }
    if (name == "data") return {{"stopwords", data.stopwords}, {"lexicon", data.lexicon}};
    if (name == "ablation") return {{"single_agent", ablation.single_agent}};
    throw Error("unknown config section '" + name + "'");
}

nlohmann::json Config::to_json() const {
    nlohmann::json j;
    for (const char* s : {"partition", "allocation", "router", "retriever", "fusion", "gateway", "data", "ablation"}) {
        j[s] = section(s);
    }
    return j;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

}  // namespace splitrag
