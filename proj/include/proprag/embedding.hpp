#pragma once
// Embedding layer: unit-norm vectors, cosine kernels, provider interface.
//
// The mock provider is a hashed bag-of-tokens projection: each whitespace
// token lands in one of d buckets (FNV-1a) with a sign from a second hash,
// accumulated then L2-normalized. Pure function of the text, stable across
// runs and platforms, and shared tokens raise cosine similarity, which is
// what the test fixtures lean on.

#include "proprag/errors.hpp"
#include "proprag/text.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace proprag {

using Embedding = std::vector<float>;

enum class EmbedRole { query, document };

inline double l2_norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

// Normalizes in double precision; throws on (near-)zero vectors.
inline void l2_normalize(Embedding& v) {
    double n = l2_norm(v);
    if (n < 1e-12) throw DataError("cannot normalize zero vector");
    for (float& x : v) x = static_cast<float>(static_cast<double>(x) / n);
}

inline double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw DataError("cosine: dimension mismatch (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
    }
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return s;
}

// Componentwise mean, re-normalized to unit length.
inline Embedding average_embedding(std::span<const Embedding> vectors) {
    if (vectors.empty()) throw DataError("average_embedding: empty input");
    size_t d = vectors.front().size();
    std::vector<double> acc(d, 0.0);
    for (const auto& v : vectors) {
        if (v.size() != d) throw DataError("average_embedding: dimension mismatch");
        for (size_t i = 0; i < d; ++i) acc[i] += static_cast<double>(v[i]);
    }
    double inv = 1.0 / static_cast<double>(vectors.size());
    double norm2 = 0.0;
    for (double& x : acc) {
        x *= inv;
        norm2 += x * x;
    }
    double n = std::sqrt(norm2);
    if (n < 1e-12) throw DataError("average_embedding: mean is a zero vector");
    Embedding out(d);
    for (size_t i = 0; i < d; ++i) out[i] = static_cast<float>(acc[i] / n);
    return out;
}

struct ProviderConfig {
    std::string kind = "mock"; // "mock" | "remote"
    std::string url;           // remote endpoint; PROPRAG_EMBED_URL overrides
    std::string token;         // bearer token; PROPRAG_EMBED_TOKEN overrides
    int dimension = 256;
    int batch_size = 16;
    int timeout_ms = 30000;
    int max_retries = 2;
    int parallelism = 4;
    std::string cache_path;    // on-disk vector cache; empty disables

    void validate() const {
        if (dimension < 8) throw DataError("provider dimension must be >= 8");
        if (batch_size < 1) throw DataError("provider batch size must be >= 1");
        if (kind != "mock" && kind != "remote") {
            throw DataError("unknown provider kind: " + kind);
        }
    }
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual int dimension() const = 0;
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts,
                                         EmbedRole role) = 0;
    virtual std::string fingerprint() const = 0;

    Embedding embed_one(const std::string& text, EmbedRole role) {
        return embed(std::vector<std::string>{text}, role).front();
    }
};

// Deterministic hashed bag-of-tokens provider. Ignores the role hint.
class MockEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit MockEmbeddingProvider(int dimension = 256) : dim_(dimension) {
        if (dim_ < 8) throw DataError("mock provider dimension must be >= 8");
    }

    int dimension() const override { return dim_; }

    std::vector<Embedding> embed(const std::vector<std::string>& texts,
                                 EmbedRole /*role*/) override {
        std::vector<Embedding> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed_text(t));
        return out;
    }

    std::string fingerprint() const override {
        return "mock/" + std::to_string(dim_);
    }

    // Sign hash uses a distinct FNV seed so bucket and sign are independent.
    static constexpr uint64_t kSignSeed = kFnvOffset ^ 0x9e3779b97f4a7c15ULL;

    Embedding embed_text(const std::string& text) const {
        if (text.empty()) throw DataError("embed: empty input text");
        std::vector<double> acc(static_cast<size_t>(dim_), 0.0);
        bool any = false;
        for (const auto& tok : tokenize(text)) {
            size_t bucket = static_cast<size_t>(fnv1a64(tok) % static_cast<uint64_t>(dim_));
            double sign = (fnv1a64(tok, kSignSeed) & 1ULL) ? 1.0 : -1.0;
            acc[bucket] += sign;
            any = true;
        }
        if (!any) {
            // Whitespace-only text: fall back to a basis vector keyed on the raw bytes.
            acc[static_cast<size_t>(fnv1a64(text) % static_cast<uint64_t>(dim_))] = 1.0;
        }
        double norm2 = 0.0;
        for (double x : acc) norm2 += x * x;
        if (norm2 < 1e-24) {
            // Tokens cancelled pairwise; same fallback keeps the output unit-norm.
            std::fill(acc.begin(), acc.end(), 0.0);
            acc[static_cast<size_t>(fnv1a64(text) % static_cast<uint64_t>(dim_))] = 1.0;
            norm2 = 1.0;
        }
        double n = std::sqrt(norm2);
        Embedding out(static_cast<size_t>(dim_));
        for (size_t i = 0; i < out.size(); ++i) {
            out[i] = static_cast<float>(acc[i] / n);
        }
        return out;
    }

private:
    int dim_;
};

} // namespace proprag
