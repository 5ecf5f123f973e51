#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "dispat/corpus.hpp"
#include "dispat/errors.hpp"
#include "dispat/model.hpp"
#include "dispat/train.hpp"

namespace dispat {

/// Claim-level evidence behind one prediction. Specificity compares the
/// distinctive branch row of each target claim against every reference
/// claim row (lower = more specific); backtracking ranks reference claims
/// by similarity to the shared branch row. Unlike the training loss, both
/// work on per-claim rows, not pooled vectors.
struct BacktrackHit {
    std::string ref_id;
    int ref_claim = 0; // 1-based
    double score = 0.0;
    std::string excerpt;
};

struct ClaimEvidence {
    int claim_index = 0; // 1-based
    double specificity = 0.0;
    std::vector<BacktrackHit> backtrack;
};

struct EvidenceReport {
    std::string target_id;
    double y_hat = 0.0;
    std::vector<std::string> ref_ids;
    std::vector<ClaimEvidence> claims;
    int starred_claim = 0; // highest specificity score, lowest index on ties
};

struct EvidenceOptions {
    int top_m = 3;
    bool mean_aggregation = false; // default is max over reference claims
    int excerpt_chars = 160;
};

namespace detail {

/// Rows of an encoded patent as plain vectors, real claims only.
struct EncodedRows {
    std::string id;
    std::vector<std::vector<double>> rows;
};

inline std::vector<double> tensor_row(const Tensor& t, int i) {
    std::vector<double> r(static_cast<std::size_t>(t.cols()));
    for (int j = 0; j < t.cols(); ++j) r[static_cast<std::size_t>(j)] = t.at(i, j);
    return r;
}

inline double row_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return d / (std::sqrt(na) * std::sqrt(nb));
}

inline std::string clip_excerpt(const std::string& text, int max_chars) {
    if (static_cast<int>(text.size()) <= max_chars) return text;
    // avoid cutting a UTF-8 sequence in half
    std::size_t cut = static_cast<std::size_t>(max_chars);
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return text.substr(0, cut) + "...";
}

} // namespace detail

/// score(claim i) = aggregate over all reference claims j of
/// cos(distinctive row i, reference row j); aggregate is max by default.
inline std::vector<double> specificity_scores(const detail::EncodedRows& spe,
                                              const std::vector<detail::EncodedRows>& refs,
                                              bool mean_aggregation = false) {
    if (refs.empty()) throw EmptyReferenceError("specificity needs at least one base reference");
    std::vector<double> out;
    out.reserve(spe.rows.size());
    for (const auto& row : spe.rows) {
        double best = -2.0, sum = 0.0;
        std::int64_t count = 0;
        for (const auto& ref : refs)
            for (const auto& rrow : ref.rows) {
                const double c = detail::row_cosine(row, rrow);
                best = std::max(best, c);
                sum += c;
                ++count;
            }
        out.push_back(mean_aggregation ? sum / static_cast<double>(count) : best);
    }
    return out;
}

/// Top-m reference claims by similarity to target claim `claim_index`
/// (1-based), sorted descending, ties broken by (ref id, claim index).
inline std::vector<BacktrackHit> backtrack_claim(const detail::EncodedRows& sim,
                                                 const std::vector<detail::EncodedRows>& refs,
                                                 const Corpus& corpus, int claim_index, int top_m,
                                                 int excerpt_chars = 160) {
    if (claim_index < 1 || claim_index > static_cast<int>(sim.rows.size()))
        throw InvalidClaimError("backtrack: claim index " + std::to_string(claim_index) +
                                " outside the real claim range");
    const auto& row = sim.rows[static_cast<std::size_t>(claim_index - 1)];
    std::vector<BacktrackHit> hits;
    for (const auto& ref : refs) {
        const PatentRecord& rec = corpus.by_id(ref.id);
        for (std::size_t j = 0; j < ref.rows.size(); ++j) {
            BacktrackHit h;
            h.ref_id = ref.id;
            h.ref_claim = static_cast<int>(j) + 1;
            h.score = detail::row_cosine(row, ref.rows[j]);
            if (j < rec.claims.size()) h.excerpt = detail::clip_excerpt(rec.claims[j], excerpt_chars);
            hits.push_back(std::move(h));
        }
    }
    std::sort(hits.begin(), hits.end(), [](const BacktrackHit& a, const BacktrackHit& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.ref_id != b.ref_id) return a.ref_id < b.ref_id;
        return a.ref_claim < b.ref_claim;
    });
    if (static_cast<int>(hits.size()) > top_m) hits.resize(static_cast<std::size_t>(top_m));
    return hits;
}

/// Runs the encoder over the target and its retrieved references and
/// assembles the full per-claim report.
inline EvidenceReport build_evidence_report(Model& model, Pipeline& pipe,
                                            const std::string& target_id,
                                            const EvidenceOptions& opt = {}) {
    auto [target, refs] = pipe.sample_for(target_id);
    if (refs.empty()) throw EmptyReferenceError("no base references for target " + target_id);

    Tape tape;
    Model::EncodedTarget enc = model.encode_target(tape, *target);
    Var p1 = drl::classify(tape, enc.pool_sim, enc.pool_spe, model.params());

    detail::EncodedRows sim{target_id, {}}, spe{target_id, {}};
    for (int i = 0; i < target->n; ++i) {
        sim.rows.push_back(detail::tensor_row(enc.h_sim.val(), i));
        spe.rows.push_back(detail::tensor_row(enc.h_spe.val(), i));
    }
    std::vector<detail::EncodedRows> ref_rows;
    for (const PatentInput* ref : refs) {
        Var h = model.encode_reference(tape, *ref);
        detail::EncodedRows r{ref->id, {}};
        for (int i = 0; i < ref->n; ++i) r.rows.push_back(detail::tensor_row(h.val(), i));
        ref_rows.push_back(std::move(r));
    }

    EvidenceReport report;
    report.target_id = target_id;
    report.y_hat = p1.val().at(0, 0);
    for (const auto& r : ref_rows) report.ref_ids.push_back(r.id);

    std::vector<double> scores = specificity_scores(spe, ref_rows, opt.mean_aggregation);
    for (int i = 0; i < target->n; ++i) {
        ClaimEvidence ce;
        ce.claim_index = i + 1;
        ce.specificity = scores[static_cast<std::size_t>(i)];
        ce.backtrack = backtrack_claim(sim, ref_rows, pipe.corpus(), i + 1, opt.top_m, opt.excerpt_chars);
        report.claims.push_back(std::move(ce));
    }

    report.starred_claim = 1;
    for (int i = 1; i < target->n; ++i)
        if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(report.starred_claim - 1)])
            report.starred_claim = i + 1;
    return report;
}

inline nlohmann::json report_to_json(const EvidenceReport& r) {
    nlohmann::json j;
    j["target_id"] = r.target_id;
    j["y_hat"] = r.y_hat;
    j["ref_ids"] = r.ref_ids;
    j["starred_claim"] = r.starred_claim;
    j["claims"] = nlohmann::json::array();
    for (const auto& c : r.claims) {
        nlohmann::json cj;
        cj["claim_index"] = c.claim_index;
        cj["specificity"] = c.specificity;
        cj["backtrack"] = nlohmann::json::array();
        for (const auto& h : c.backtrack) {
            nlohmann::json hj;
            hj["ref_id"] = h.ref_id;
            hj["ref_claim"] = h.ref_claim;
            hj["score"] = h.score;
            hj["excerpt"] = h.excerpt;
            cj["backtrack"].push_back(hj);
        }
        j["claims"].push_back(cj);
    }
    return j;
}

/// Terminal heatmap: one line per claim, glyph by score quantile within the
/// report (darker = higher similarity to the references), star on the
/// highest-scoring claim.
inline std::string render_report_text(const EvidenceReport& r) {
    static const char* kRamp[] = {"·", "░", "▒", "▓", "█"};
    constexpr int kLevels = 5;

    std::string out = "target " + r.target_id + "  p(approved)=" + std::to_string(r.y_hat) + "\n";
    out += "refs:";
    for (const auto& id : r.ref_ids) out += " " + id;
    out += "\nspecificity (lower = more distinctive):\n";

    const std::size_t n = r.claims.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double s = r.claims[i].specificity;
        std::size_t rank = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (r.claims[j].specificity < s) ++rank;
        const int level = n > 1 ? static_cast<int>(std::lround(
                                      static_cast<double>(rank) / static_cast<double>(n - 1) * (kLevels - 1)))
                                : 0;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f", s);
        out += "  claim " + std::to_string(r.claims[i].claim_index) + " [" + kRamp[level] + "] " + buf;
        if (r.claims[i].claim_index == r.starred_claim) out += " *";
        out += "\n";
    }
    out += "closest reference claims (shared branch):\n";
    for (const auto& c : r.claims) {
        out += "  claim " + std::to_string(c.claim_index) + ":\n";
        for (const auto& h : c.backtrack) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.4f", h.score);
            out += "    " + h.ref_id + "#" + std::to_string(h.ref_claim) + " " + buf;
            if (!h.excerpt.empty()) out += "  \"" + h.excerpt + "\"";
            out += "\n";
        }
    }
    return out;
}

} // namespace dispat
