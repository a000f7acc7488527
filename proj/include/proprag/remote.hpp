#pragma once
// HTTP-backed providers. The embedding wire format is
//
//   POST <url>  {"texts": [...], "role": "query" | "document"}
//   ->          {"vectors": [[...], ...]}
//
// and the LLM client speaks the usual chat-completion shape at temperature
// zero. Endpoints and bearer tokens come from PROPRAG_EMBED_URL /
// PROPRAG_EMBED_TOKEN and PROPRAG_LLM_URL / PROPRAG_LLM_TOKEN; tokens never
// appear in config files or manifests (the manifest stores a URL hash).
// Transport and malformed-response failures surface as ProviderError after
// the retry budget is spent.

#include "proprag/embedding.hpp"
#include "proprag/errors.hpp"
#include "proprag/extraction.hpp"
#include "proprag/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace proprag {

namespace detail {

struct SplitUrl {
    std::string base; // scheme://host[:port]
    std::string path; // leading slash
};

inline SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw DataError("bad endpoint url (missing scheme): " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline httplib::Headers auth_headers(const std::string& token) {
    httplib::Headers h;
    if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
    return h;
}

// POST with a fixed retry budget; returns the response body.
inline std::string post_json(const std::string& url, const std::string& token,
                             const std::string& body, int timeout_ms, int max_retries,
                             const char* what) {
    auto [base, path] = split_url(url);
    std::string last_error = "no attempts made";
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        httplib::Client client(base);
        client.set_connection_timeout(0, timeout_ms * 1000);
        client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
        auto res = client.Post(path, auth_headers(token), body, "application/json");
        if (!res) {
            last_error = std::string(what) + ": transport error: " +
                         httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = std::string(what) + ": HTTP " + std::to_string(res->status) + ": " +
                         snippet(res->body);
            continue;
        }
        return res->body;
    }
    throw ProviderError(last_error + " (after " + std::to_string(max_retries + 1) +
                        " attempts)");
}

} // namespace detail

// ---------------------------------------------------------------------------
// On-disk vector cache
// ---------------------------------------------------------------------------

// Append-only jsonl cache keyed by a hash of (role, text). Loaded fully at
// construction; new entries are appended as they are computed.
class VectorCache {
public:
    VectorCache(std::string path, int dimension)
        : path_(std::move(path)), dimension_(dimension) {
        std::ifstream in(path_);
        if (!in) return; // cache starts empty
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("k") || !j.contains("v")) {
                throw DataError("vector cache corrupt at " + path_ + ":" +
                                std::to_string(line_no));
            }
            Embedding v;
            for (const auto& f : j["v"]) v.push_back(f.get<float>());
            if (static_cast<int>(v.size()) != dimension_) {
                throw DataError("vector cache dimension mismatch at " + path_ + ":" +
                                std::to_string(line_no));
            }
            entries_[j["k"].get<std::string>()] = std::move(v);
        }
    }

    static std::string key(EmbedRole role, const std::string& text) {
        std::string k = role == EmbedRole::query ? "query" : "document";
        k.push_back('\0');
        k += text;
        return to_hex(fnv1a64(k));
    }

    std::optional<Embedding> get(const std::string& key) const {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void put(const std::string& key, const Embedding& v) {
        std::lock_guard lock(mutex_);
        if (!entries_.emplace(key, v).second) return;
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        if (!out) throw DataError("cannot append to vector cache: " + path_);
        json j{{"k", key}, {"v", v}};
        out << j.dump() << "\n";
    }

    size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

private:
    std::string path_;
    int dimension_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, Embedding> entries_;
};

// ---------------------------------------------------------------------------
// Remote embedding provider
// ---------------------------------------------------------------------------

class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(ProviderConfig config) : config_(std::move(config)) {
        config_.validate();
        if (config_.url.empty()) {
            throw DataError("remote embedding provider needs an endpoint; "
                            "set PROPRAG_EMBED_URL");
        }
        if (!config_.cache_path.empty()) {
            cache_ = std::make_unique<VectorCache>(config_.cache_path, config_.dimension);
        }
    }

    int dimension() const override { return config_.dimension; }

    std::string fingerprint() const override {
        return "remote/" + std::to_string(config_.dimension) + "/" + to_hex(fnv1a64(config_.url));
    }

    std::vector<Embedding> embed(const std::vector<std::string>& texts,
                                 EmbedRole role) override {
        std::vector<Embedding> out(texts.size());
        std::vector<size_t> missing;
        for (size_t i = 0; i < texts.size(); ++i) {
            if (texts[i].empty()) throw DataError("embed: empty text at position " +
                                                  std::to_string(i));
            if (cache_) {
                if (auto hit = cache_->get(VectorCache::key(role, texts[i]))) {
                    out[i] = std::move(*hit);
                    continue;
                }
            }
            missing.push_back(i);
        }
        for (size_t start = 0; start < missing.size();
             start += static_cast<size_t>(config_.batch_size)) {
            size_t end = std::min(missing.size(),
                                  start + static_cast<size_t>(config_.batch_size));
            std::vector<std::string> batch;
            for (size_t i = start; i < end; ++i) batch.push_back(texts[missing[i]]);
            auto vectors = fetch(batch, role);
            for (size_t i = start; i < end; ++i) {
                out[missing[i]] = std::move(vectors[i - start]);
                if (cache_) {
                    cache_->put(VectorCache::key(role, texts[missing[i]]), out[missing[i]]);
                }
            }
        }
        return out;
    }

private:
    std::vector<Embedding> fetch(const std::vector<std::string>& texts, EmbedRole role) {
        json body{{"texts", texts},
                  {"role", role == EmbedRole::query ? "query" : "document"}};
        std::string response =
            detail::post_json(config_.url, config_.token, body.dump(), config_.timeout_ms,
                              config_.max_retries, "embedding provider");
        json j = json::parse(response, nullptr, false);
        if (j.is_discarded() || !j.contains("vectors") || !j["vectors"].is_array()) {
            throw ProviderError("embedding provider: malformed response: " + snippet(response));
        }
        if (j["vectors"].size() != texts.size()) {
            throw ProviderError("embedding provider: expected " +
                                std::to_string(texts.size()) + " vectors, got " +
                                std::to_string(j["vectors"].size()));
        }
        std::vector<Embedding> out;
        for (const auto& row : j["vectors"]) {
            Embedding v;
            for (const auto& f : row) v.push_back(f.get<float>());
            if (static_cast<int>(v.size()) != config_.dimension) {
                throw ProviderError("embedding provider: vector dimension " +
                                    std::to_string(v.size()) + ", expected " +
                                    std::to_string(config_.dimension));
            }
            try {
                l2_normalize(v);
            } catch (const Error&) {
                throw ProviderError("embedding provider: returned a zero vector");
            }
            out.push_back(std::move(v));
        }
        return out;
    }

    ProviderConfig config_;
    std::unique_ptr<VectorCache> cache_;
};

// ---------------------------------------------------------------------------
// Remote LLM client
// ---------------------------------------------------------------------------

struct LlmConfig {
    std::string url;   // PROPRAG_LLM_URL overrides
    std::string token; // PROPRAG_LLM_TOKEN overrides
    std::string model = "gpt-4o-mini";
    int timeout_ms = 60000;
    int max_retries = 2;
};

class RemoteLlmClient final : public LlmClient {
public:
    explicit RemoteLlmClient(LlmConfig config) : config_(std::move(config)) {
        if (config_.url.empty()) {
            throw DataError("LLM client needs an endpoint; set PROPRAG_LLM_URL");
        }
    }

    std::string model_name() const override { return config_.model; }

    std::string complete(const std::string& prompt) override {
        json body{{"model", config_.model},
                  {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
                  {"temperature", 0}};
        std::string response =
            detail::post_json(config_.url, config_.token, body.dump(), config_.timeout_ms,
                              config_.max_retries, "llm client");
        json j = json::parse(response, nullptr, false);
        if (j.is_discarded()) {
            throw ProviderError("llm client: malformed response: " + snippet(response));
        }
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception&) {
            throw ProviderError("llm client: unexpected response shape: " + snippet(response));
        }
    }

private:
    LlmConfig config_;
};

// ---------------------------------------------------------------------------
// Factories (environment wins over config)
// ---------------------------------------------------------------------------

inline std::unique_ptr<EmbeddingProvider> make_embedding_provider(ProviderConfig config) {
    if (const char* url = std::getenv("PROPRAG_EMBED_URL")) config.url = url;
    if (const char* token = std::getenv("PROPRAG_EMBED_TOKEN")) config.token = token;
    config.validate();
    if (config.kind == "mock") {
        return std::make_unique<MockEmbeddingProvider>(config.dimension);
    }
    return std::make_unique<RemoteEmbeddingProvider>(std::move(config));
}

// Rebuild the provider an index was created with from its manifest
// fingerprint, so queries embed in the same space as the stored vectors.
inline std::unique_ptr<EmbeddingProvider> provider_from_fingerprint(
    const std::string& fingerprint, ProviderConfig base) {
    auto parse_dim = [&](size_t prefix_len) {
        size_t end = fingerprint.find('/', prefix_len);
        std::string digits = fingerprint.substr(
            prefix_len, end == std::string::npos ? std::string::npos : end - prefix_len);
        try {
            return std::stoi(digits);
        } catch (const std::exception&) {
            throw DataError("manifest has unrecognized provider fingerprint: " + fingerprint);
        }
    };
    if (fingerprint.rfind("mock/", 0) == 0) {
        base.kind = "mock";
        base.dimension = parse_dim(5);
    } else if (fingerprint.rfind("remote/", 0) == 0) {
        base.kind = "remote";
        base.dimension = parse_dim(7);
    } else {
        throw DataError("manifest has unrecognized provider fingerprint: " + fingerprint);
    }
    return make_embedding_provider(std::move(base));
}

inline std::unique_ptr<LlmClient> make_llm_client(LlmConfig config = {}) {
    if (const char* url = std::getenv("PROPRAG_LLM_URL")) config.url = url;
    if (const char* token = std::getenv("PROPRAG_LLM_TOKEN")) config.token = token;
    return std::make_unique<RemoteLlmClient>(std::move(config));
}

} // namespace proprag
