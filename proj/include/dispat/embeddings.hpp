#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dispat/detail/binio.hpp"
#include "dispat/errors.hpp"
#include "dispat/rng.hpp"
#include "dispat/tensor.hpp"
#include "dispat/tokenize.hpp"

namespace dispat {

/// FNV-1a 64-bit over raw bytes. Fixed spec so hashed embeddings reproduce
/// across platforms.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Serves the per-claim content vector. Keys are (patent id, 1-based claim
/// index); providers may ignore them and work from text alone.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual int dim() const = 0;

    /// 1 x dim row. `degenerate`, when given, is set if the provider had to
    /// fall back to a zero vector (e.g. text with no tokens).
    virtual Tensor embed(const std::string& patent_id, int claim_index, const std::string& text,
                         bool* degenerate = nullptr) const = 0;
};

/// Deterministic stand-in for a sentence encoder: every token hashes to a
/// fixed pseudo-random unit vector and the claim embedding is the mean over
/// the first max_tokens tokens. Identical (seed, dim, text) gives identical
/// output on any platform: token vectors come from splitmix64 streams seeded
/// by FNV-1a, use only uniform draws, and are normalized with IEEE sqrt and
/// division, all correctly rounded operations.
class HashedNgramProvider : public EmbeddingProvider {
public:
    HashedNgramProvider(int dim, std::uint64_t seed, int max_tokens = 512)
        : dim_(dim), seed_(seed), max_tokens_(max_tokens) {
        if (dim <= 0) throw ConfigError("embedding dim must be positive");
        if (max_tokens <= 0) throw ConfigError("embedding token cap must be positive");
    }

    int dim() const override { return dim_; }

    Tensor embed(const std::string&, int, const std::string& text, bool* degenerate = nullptr) const override {
        std::vector<std::string> tokens = tokenize(text);
        if (static_cast<int>(tokens.size()) > max_tokens_) tokens.resize(max_tokens_);
        Tensor out(1, dim_);
        if (tokens.empty()) {
            if (degenerate) *degenerate = true;
            return out;
        }
        // count-weighted sum over distinct tokens in first-occurrence order;
        // integer weights keep the mean bit-stable under text duplication
        std::vector<std::pair<std::string, int>> counts;
        std::unordered_map<std::string, std::size_t> where;
        for (const std::string& t : tokens) {
            auto it = where.find(t);
            if (it == where.end()) {
                where[t] = counts.size();
                counts.emplace_back(t, 1);
            } else {
                ++counts[it->second].second;
            }
        }
        std::vector<double> tv(dim_);
        for (const auto& [token, count] : counts) {
            token_vector(token, tv);
            const double w = static_cast<double>(count);
            for (int j = 0; j < dim_; ++j) out.at(0, j) += w * tv[j];
        }
        const double n = static_cast<double>(tokens.size());
        for (int j = 0; j < dim_; ++j) out.at(0, j) /= n;
        return out;
    }

private:
    int dim_;
    std::uint64_t seed_;
    int max_tokens_;

    void token_vector(const std::string& token, std::vector<double>& out) const {
        SplitMix64 rng(fnv1a64(token) ^ seed_);
        double ss = 0.0;
        for (int j = 0; j < dim_; ++j) {
            out[j] = rng.next_range(-1.0, 1.0);
            ss += out[j] * out[j];
        }
        const double n = std::sqrt(ss);
        if (n == 0.0) return; // astronomically unlikely, leave the zero vector
        for (int j = 0; j < dim_; ++j) out[j] /= n;
    }
};

/// Claim-key for the precomputed store: "<patent id>#<claim index>".
inline std::string claim_key(const std::string& patent_id, int claim_index) {
    return patent_id + "#" + std::to_string(claim_index);
}

/// Vectors computed offline by a real encoder, stored as 32-bit floats.
/// File: magic "CEMB", version byte, dim u32, count u32, then per record a
/// length-prefixed key and dim floats. Keys are written sorted so a
/// write-read-write cycle is byte identical.
class PrecomputedProvider : public EmbeddingProvider {
public:
    PrecomputedProvider(std::istream& is, int expected_dim) {
        detail::expect_magic(is, "CEMB", "embedding file");
        const auto version = detail::read_le<std::uint8_t>(is);
        if (version != 1) throw FormatError("embedding file: unsupported version " + std::to_string(version));
        dim_ = static_cast<int>(detail::read_le<std::uint32_t>(is));
        if (expected_dim > 0 && dim_ != expected_dim)
            throw ConfigError("embedding file dim " + std::to_string(dim_) + " != configured " +
                              std::to_string(expected_dim));
        const auto count = detail::read_le<std::uint32_t>(is);
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::string key = detail::read_string(is);
            std::vector<float>& v = table_[key];
            v.resize(dim_);
            for (int j = 0; j < dim_; ++j) v[j] = detail::read_f32(is);
        }
    }

    static PrecomputedProvider from_file(const std::string& path, int expected_dim) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw FormatError("cannot open " + path);
        return PrecomputedProvider(is, expected_dim);
    }

    int dim() const override { return dim_; }

    Tensor embed(const std::string& patent_id, int claim_index, const std::string&,
                 bool* degenerate = nullptr) const override {
        const auto it = table_.find(claim_key(patent_id, claim_index));
        if (it == table_.end())
            throw MissingEmbeddingError("no embedding for " + claim_key(patent_id, claim_index));
        Tensor out(1, dim_);
        bool all_zero = true;
        for (int j = 0; j < dim_; ++j) {
            out.at(0, j) = static_cast<double>(it->second[j]);
            if (out.at(0, j) != 0.0) all_zero = false;
        }
        if (all_zero && degenerate) *degenerate = true;
        return out;
    }

    std::size_t size() const { return table_.size(); }

private:
    int dim_ = 0;
    std::map<std::string, std::vector<float>> table_; // sorted keys for canonical writes

    friend void write_embedding_file(std::ostream&, int, const std::map<std::string, std::vector<float>>&);
    friend void write_embedding_file(std::ostream& os, const PrecomputedProvider& p);
};

inline void write_embedding_file(std::ostream& os, int dim,
                                 const std::map<std::string, std::vector<float>>& table) {
    os.write("CEMB", 4);
    detail::write_le<std::uint8_t>(os, 1);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(dim));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(table.size()));
    for (const auto& [key, v] : table) {
        if (static_cast<int>(v.size()) != dim) throw ShapeError("embedding for " + key + " has wrong dim");
        detail::write_string(os, key);
        for (float f : v) detail::write_f32(os, f);
    }
}

inline void write_embedding_file(std::ostream& os, const PrecomputedProvider& p) {
    write_embedding_file(os, p.dim_, p.table_);
}

} // namespace dispat
