#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dispat/corpus.hpp"
#include "dispat/detail/binio.hpp"
#include "dispat/errors.hpp"
#include "dispat/tokenize.hpp"

namespace dispat {

/// Okapi BM25 over granted patents, one document per patent (all claims
/// concatenated). Documents sit in ascending-id order internally, so scores
/// and the serialized index never depend on insertion order. The plus-one
/// IDF ln((N-df+0.5)/(df+0.5)+1) keeps every contribution nonnegative.
class Bm25Index {
public:
    double k1 = 1.5;
    double b = 0.75;

    /// Index every granted record of the corpus.
    static Bm25Index build(const Corpus& corpus, double k1 = 1.5, double b = 0.75) {
        Bm25Index idx;
        idx.k1 = k1;
        idx.b = b;
        std::vector<const PatentRecord*> docs;
        for (const PatentRecord& r : corpus)
            if (r.status == Status::Granted) docs.push_back(&r);
        std::sort(docs.begin(), docs.end(),
                  [](const PatentRecord* a, const PatentRecord* b) { return a->id < b->id; });
        for (const PatentRecord* r : docs) {
            const int di = static_cast<int>(idx.doc_ids_.size());
            idx.doc_ids_.push_back(r->id);
            idx.id_to_idx_[r->id] = di;
            idx.doc_dates_.push_back(r->date_ord);
            std::string joined;
            for (const std::string& c : r->claims) {
                if (!joined.empty()) joined += ' ';
                joined += c;
            }
            const std::vector<std::string> tokens = tokenize(joined);
            idx.doc_len_.push_back(static_cast<int>(tokens.size()));
            std::map<std::string, int> tf;
            for (const std::string& t : tokens) ++tf[t];
            for (const auto& [term, count] : tf) idx.postings_[term].emplace_back(di, count);
        }
        idx.recompute_avg_len();
        return idx;
    }

    long long doc_count() const { return static_cast<long long>(doc_ids_.size()); }
    double avg_len() const { return avg_len_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }

    bool has_doc(const std::string& id) const { return id_to_idx_.count(id) != 0; }

    int doc_index(const std::string& id) const {
        auto it = id_to_idx_.find(id);
        if (it == id_to_idx_.end()) throw NotIndexedError("doc not indexed: " + id);
        return it->second;
    }

    /// Query terms deduplicated in first-occurrence order. Scoring walks the
    /// terms in exactly this order, which pins the floating-point summation
    /// order for both this index and any scan that mimics it.
    static std::vector<std::string> dedupe_terms(const std::vector<std::string>& tokens) {
        std::vector<std::string> out;
        std::unordered_map<std::string, bool> seen;
        for (const std::string& t : tokens) {
            if (!seen.count(t)) {
                seen[t] = true;
                out.push_back(t);
            }
        }
        return out;
    }

    double idf(const std::string& term) const {
        const auto it = postings_.find(term);
        const double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
        const double n = static_cast<double>(doc_count());
        return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
    }

    double term_contribution(const std::string& term, int tf, int len) const {
        if (tf == 0) return 0.0;
        const double t = static_cast<double>(tf);
        return idf(term) * (t * (k1 + 1.0)) / (t + k1 * (1.0 - b + b * static_cast<double>(len) / avg_len_));
    }

    /// Score one indexed doc against query tokens (deduped internally).
    double score(const std::vector<std::string>& query_tokens, const std::string& doc_id) const {
        const int di = doc_index(doc_id);
        double s = 0.0;
        for (const std::string& term : dedupe_terms(query_tokens))
            s += term_contribution(term, tf_in_doc(term, di), doc_len_[di]);
        return s;
    }

    struct Ref {
        std::string id;
        double score = 0.0;
    };

    struct Retrieval {
        std::vector<Ref> refs;
        bool low_reference = false; // fewer date-eligible docs than k
    };

    /// Top-k base references for a target: candidates are every indexed doc
    /// filed strictly before the target, ranked by score descending with
    /// ascending id breaking ties. Zero-score candidates still count.
    Retrieval top_k(const std::vector<std::string>& query_tokens, int target_date_ord, int k) const {
        std::vector<int> eligible;
        for (int di = 0; di < static_cast<int>(doc_ids_.size()); ++di)
            if (doc_dates_[di] < target_date_ord) eligible.push_back(di);

        std::vector<double> scores(doc_ids_.size(), 0.0);
        for (const std::string& term : dedupe_terms(query_tokens)) {
            const auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            for (const auto& [di, tf] : it->second) {
                if (doc_dates_[di] < target_date_ord)
                    scores[di] += term_contribution(term, tf, doc_len_[di]);
            }
        }

        std::sort(eligible.begin(), eligible.end(), [&](int a, int bnd) {
            if (scores[a] != scores[bnd]) return scores[a] > scores[bnd];
            return doc_ids_[a] < doc_ids_[bnd];
        });

        Retrieval out;
        out.low_reference = static_cast<int>(eligible.size()) < k;
        const int take = std::min<int>(k, static_cast<int>(eligible.size()));
        for (int i = 0; i < take; ++i) out.refs.push_back({doc_ids_[eligible[i]], scores[eligible[i]]});
        return out;
    }

    Retrieval top_k_base_reference(const PatentRecord& target, int k) const {
        std::string joined;
        for (const std::string& c : target.claims) {
            if (!joined.empty()) joined += ' ';
            joined += c;
        }
        return top_k(tokenize(joined), target.date_ord, k);
    }

    // ---- persistence: magic "BM25", version byte, little-endian fields ----

    void save(std::ostream& os) const {
        os.write("BM25", 4);
        detail::write_le<std::uint8_t>(os, 1);
        detail::write_f64(os, k1);
        detail::write_f64(os, b);
        detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(doc_ids_.size()));
        for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
            detail::write_string(os, doc_ids_[i]);
            detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(doc_len_[i]));
            detail::write_le<std::int32_t>(os, doc_dates_[i]);
        }
        detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(postings_.size()));
        for (const auto& [term, plist] : postings_) { // std::map: terms in order
            detail::write_string(os, term);
            detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(plist.size()));
            for (const auto& [di, tf] : plist) {
                detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(di));
                detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tf));
            }
        }
    }

    static Bm25Index load(std::istream& is) {
        detail::expect_magic(is, "BM25", "bm25 index");
        const auto version = detail::read_le<std::uint8_t>(is);
        if (version != 1) throw FormatError("bm25 index: unsupported version " + std::to_string(version));
        Bm25Index idx;
        idx.k1 = detail::read_f64(is);
        idx.b = detail::read_f64(is);
        const auto ndocs = detail::read_le<std::uint32_t>(is);
        for (std::uint32_t i = 0; i < ndocs; ++i) {
            idx.doc_ids_.push_back(detail::read_string(is));
            idx.doc_len_.push_back(static_cast<int>(detail::read_le<std::uint32_t>(is)));
            idx.doc_dates_.push_back(detail::read_le<std::int32_t>(is));
            idx.id_to_idx_[idx.doc_ids_.back()] = static_cast<int>(i);
        }
        const auto nterms = detail::read_le<std::uint32_t>(is);
        for (std::uint32_t t = 0; t < nterms; ++t) {
            const std::string term = detail::read_string(is);
            const auto np = detail::read_le<std::uint32_t>(is);
            auto& plist = idx.postings_[term];
            for (std::uint32_t p = 0; p < np; ++p) {
                const auto di = detail::read_le<std::uint32_t>(is);
                const auto tf = detail::read_le<std::uint32_t>(is);
                if (di >= ndocs) throw FormatError("bm25 index: posting doc out of range");
                plist.emplace_back(static_cast<int>(di), static_cast<int>(tf));
            }
        }
        idx.recompute_avg_len();
        return idx;
    }

    void save_file(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw FormatError("cannot open " + path + " for writing");
        save(os);
    }

    static Bm25Index load_file(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw FormatError("cannot open " + path);
        return load(is);
    }

private:
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, int> id_to_idx_;
    std::vector<int> doc_len_;
    std::vector<int> doc_dates_;
    std::map<std::string, std::vector<std::pair<int, int>>> postings_;
    double avg_len_ = 0.0;

    int tf_in_doc(const std::string& term, int di) const {
        const auto it = postings_.find(term);
        if (it == postings_.end()) return 0;
        const auto& plist = it->second;
        auto pit = std::lower_bound(plist.begin(), plist.end(), std::make_pair(di, 0),
                                    [](const auto& a, const auto& b) { return a.first < b.first; });
        if (pit != plist.end() && pit->first == di) return pit->second;
        return 0;
    }

    void recompute_avg_len() {
        if (doc_len_.empty()) {
            avg_len_ = 0.0;
            return;
        }
        long long total = 0;
        for (int l : doc_len_) total += l;
        avg_len_ = static_cast<double>(total) / static_cast<double>(doc_len_.size());
    }
};

} // namespace dispat
