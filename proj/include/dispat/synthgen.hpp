#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dispat/corpus.hpp"
#include "dispat/errors.hpp"
#include "dispat/rng.hpp"

namespace dispat {

/// Synthetic corpus with planted structure. Priors mix a small shared-art
/// core vocabulary (the common technical language of the field) with a few
/// anchor tokens dedicated to each prior, which is what makes the source
/// retrievable. Every target copies one prior, keeps its anchors, and swaps
/// a fraction rho of the shared-art positions for novel-pool tokens, so rho
/// measures how much new matter the application adds over the prior art.
/// Label rule: approved iff rho >= theta, with a guard band so rounding can
/// never flip a label. Generation is a pure function of the config.
struct SynthConfig {
    std::uint64_t seed = 1;
    int num_prior = 1500;
    int num_targets = 2000;
    int topics = 40;
    int vocab_core = 48;         // shared-art pool, reused across all priors
    int vocab_novel = 20000;     // replacement pool, rarely repeated
    int topic_core_tokens = 12;  // core subset per topic
    int specific_per_prior = 4;  // dedicated anchor budget per prior
    int claims_min = 3;
    int claims_max = 8;
    int body_min = 10;
    int body_max = 16;
    double specific_frac = 0.15; // share of each body reserved for anchors
    double theta = 0.35;
    double margin = 0.18;
    double rho_min = 0.03;
    double rho_max = 0.85;
    double approval_rate = 0.5747;
    double distractor_max_frac = 0.0; // extra novel tokens appended, as a fraction of body size
    std::string prior_date0 = "2010-01-01";
    std::string target_date0 = "2018-01-01";

    void validate() const {
        if (num_prior <= 0 || num_targets <= 0 || topics <= 0) throw ConfigError("synth: nonpositive counts");
        if (vocab_core <= 0 || vocab_novel <= 0 || topic_core_tokens <= 0 || specific_per_prior <= 0)
            throw ConfigError("synth: nonpositive vocabulary size");
        if (topic_core_tokens > vocab_core) throw ConfigError("synth: topic core larger than core vocabulary");
        if (claims_min < 1 || claims_max < claims_min) throw ConfigError("synth: bad claims range");
        if (body_min < 1 || body_max < body_min) throw ConfigError("synth: bad body range");
        if (specific_frac < 0.0 || specific_frac > 1.0) throw ConfigError("synth: specific_frac outside [0,1]");
        if (approval_rate < 0.0 || approval_rate > 1.0) throw ConfigError("synth: approval_rate outside [0,1]");
        if (theta <= 0.0 || theta >= 1.0) throw ConfigError("synth: theta outside (0,1)");
        if (margin <= 0.0) throw ConfigError("synth: margin must be positive");
        if (distractor_max_frac < 0.0) throw ConfigError("synth: negative distractor fraction");
        const long approved = std::lround(approval_rate * num_targets);
        if (approved > 0 && theta + margin > rho_max)
            throw ConfigError("synth: approved band empty; lower theta or raise rho_max");
        if (approved < num_targets && theta - margin < rho_min)
            throw ConfigError("synth: rejected band empty; raise theta or lower rho_min");
        if (core_per_body(body_min) < 1)
            throw ConfigError("synth: shortest body has no shared-art positions");
        // the guard band must dominate the worst-case rounding shift of rho,
        // largest for the patent with the fewest swappable positions
        if (margin <= 0.5 / (claims_min * core_per_body(body_min)))
            throw ConfigError("synth: margin too small for the shortest body");
    }

    /// Anchor slots in a body of a given length; the rest is shared art.
    int anchors_per_body(int body_len) const {
        return static_cast<int>(std::lround(specific_frac * body_len));
    }
    int core_per_body(int body_len) const { return body_len - anchors_per_body(body_len); }
};

struct SynthTargetInfo {
    std::string id;
    std::string source_prior;
    double rho = 0.0; // achieved share of shared-art positions swapped
    int label = 0;
};

struct SynthResult {
    Corpus corpus;
    std::vector<SynthTargetInfo> targets;
    nlohmann::json manifest;
};

namespace synth_detail {

inline std::string numbered(const char* prefix, int i, int width) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i);
    return buf;
}

inline std::string core_token(int i) { return numbered("c", i, 4); }
inline std::string novel_token(int i) { return numbered("n", i, 5); }
inline std::string specific_token(int i) { return numbered("s", i, 6); }

/// ISO date string for ordinal_base + offset days, where the ordinal counts
/// days since 1970-01-01 (matching date_ordinal). Civil-from-days algorithm.
inline std::string date_for(int ordinal_base, int offset) {
    const long z0 = static_cast<long>(ordinal_base) + offset + 719468;
    const long era = (z0 >= 0 ? z0 : z0 - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z0 - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04ld-%02u-%02u", y + (m <= 2 ? 1 : 0), m, d);
    return buf;
}

/// Structure of one generated prior kept around so targets can copy it.
struct Blueprint {
    int topic = 0;
    std::vector<int> parents;                    // parents[j] for claim j+1, 0 for claim 1
    std::vector<std::vector<std::string>> body;  // body tokens per claim
    std::vector<std::vector<int>> core_pos;      // shared-art positions per claim
};

inline std::string render_claim(const std::string& noun, int parent,
                                const std::vector<std::string>& body) {
    std::string text;
    if (parent == 0) {
        text = "A " + noun + " comprising";
    } else {
        text = "The " + noun + " according to claim " + std::to_string(parent) +
               ", further comprising";
    }
    for (const std::string& tok : body) text += " " + tok;
    text += ".";
    return text;
}

} // namespace synth_detail

inline SynthResult generate_corpus(const SynthConfig& cfg) {
    cfg.validate();
    SplitMix64 rng(cfg.seed);

    static const char* kNouns[] = {"device", "apparatus", "assembly", "system",
                                   "mechanism", "module", "unit", "tool"};
    constexpr int kNumNouns = 8;

    const int prior_base = date_ordinal(cfg.prior_date0);
    const int target_base = date_ordinal(cfg.target_date0);
    if (target_base <= prior_base + cfg.num_prior - 1)
        throw ConfigError("synth: target dates must start after every prior date");

    // per-topic core token subsets, sampled without replacement
    std::vector<std::vector<std::string>> topic_core(static_cast<std::size_t>(cfg.topics));
    for (int t = 0; t < cfg.topics; ++t) {
        std::vector<int> pool(static_cast<std::size_t>(cfg.vocab_core));
        for (int i = 0; i < cfg.vocab_core; ++i) pool[static_cast<std::size_t>(i)] = i;
        deterministic_shuffle(pool, rng);
        auto& subset = topic_core[static_cast<std::size_t>(t)];
        for (int i = 0; i < cfg.topic_core_tokens; ++i)
            subset.push_back(synth_detail::core_token(pool[static_cast<std::size_t>(i)]));
    }

    SynthResult out;
    std::vector<synth_detail::Blueprint> blueprints;
    blueprints.reserve(static_cast<std::size_t>(cfg.num_prior));

    for (int i = 0; i < cfg.num_prior; ++i) {
        synth_detail::Blueprint bp;
        bp.topic = i % cfg.topics;
        const auto& core = topic_core[static_cast<std::size_t>(bp.topic)];
        const std::string noun = kNouns[bp.topic % kNumNouns];

        // per-prior emphasis over the topic vocabulary: each patent leans on
        // its own preferred terms instead of sampling the shared art uniformly
        std::vector<double> emphasis(core.size());
        double esum = 0.0;
        for (double& e : emphasis) {
            const double u = rng.next_double();
            e = u * u;
            esum += e;
        }
        if (esum <= 0.0) {
            std::fill(emphasis.begin(), emphasis.end(), 1.0);
            esum = static_cast<double>(emphasis.size());
        }
        double acc = 0.0;
        for (double& e : emphasis) acc = e = acc + e / esum; // cumulative

        const int n_claims =
            cfg.claims_min + static_cast<int>(rng.next_below(
                                 static_cast<std::uint64_t>(cfg.claims_max - cfg.claims_min + 1)));
        PatentRecord rec;
        rec.id = synth_detail::numbered("P", i + 1, 6);
        rec.filing_date = synth_detail::date_for(prior_base, i);
        rec.ipc = "A4" + std::to_string(bp.topic % 8);
        rec.status = Status::Granted;

        for (int j = 0; j < n_claims; ++j) {
            const int parent =
                j == 0 ? 0 : 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(j)));
            const int body_len =
                cfg.body_min + static_cast<int>(rng.next_below(
                                   static_cast<std::uint64_t>(cfg.body_max - cfg.body_min + 1)));
            // fixed anchor budget per body, anchor slots scattered by shuffle
            const int n_anchor = cfg.anchors_per_body(body_len);
            std::vector<int> order(static_cast<std::size_t>(body_len));
            for (int b = 0; b < body_len; ++b) order[static_cast<std::size_t>(b)] = b;
            deterministic_shuffle(order, rng);
            std::vector<char> is_anchor(static_cast<std::size_t>(body_len), 0);
            for (int a = 0; a < n_anchor; ++a) is_anchor[static_cast<std::size_t>(order[static_cast<std::size_t>(a)])] = 1;

            std::vector<std::string> body(static_cast<std::size_t>(body_len));
            std::vector<int> core_pos;
            for (int b = 0; b < body_len; ++b) {
                if (is_anchor[static_cast<std::size_t>(b)]) {
                    const int slot = static_cast<int>(
                        rng.next_below(static_cast<std::uint64_t>(cfg.specific_per_prior)));
                    body[static_cast<std::size_t>(b)] =
                        synth_detail::specific_token(i * cfg.specific_per_prior + slot);
                } else {
                    const double u = rng.next_double();
                    const std::size_t pick = static_cast<std::size_t>(
                        std::upper_bound(emphasis.begin(), emphasis.end(), u) - emphasis.begin());
                    body[static_cast<std::size_t>(b)] = core[std::min(pick, core.size() - 1)];
                    core_pos.push_back(b);
                }
            }
            rec.claims.push_back(synth_detail::render_claim(noun, parent, body));
            bp.parents.push_back(parent);
            bp.body.push_back(std::move(body));
            bp.core_pos.push_back(std::move(core_pos));
        }
        validate_record(rec);
        out.corpus.add(std::move(rec));
        blueprints.push_back(std::move(bp));
    }

    // label plan hits the requested approval rate exactly
    const int num_approved = static_cast<int>(std::lround(cfg.approval_rate * cfg.num_targets));
    std::vector<int> plan(static_cast<std::size_t>(cfg.num_targets), 0);
    for (int i = 0; i < num_approved; ++i) plan[static_cast<std::size_t>(i)] = 1;
    deterministic_shuffle(plan, rng);

    for (int t = 0; t < cfg.num_targets; ++t) {
        const int src = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.num_prior)));
        const synth_detail::Blueprint& bp = blueprints[static_cast<std::size_t>(src)];
        const std::string noun = kNouns[bp.topic % kNumNouns];
        const int label = plan[static_cast<std::size_t>(t)];
        const double rho_star = label == 1 ? rng.next_range(cfg.theta + cfg.margin, cfg.rho_max)
                                           : rng.next_range(cfg.rho_min, cfg.theta - cfg.margin);

        std::vector<std::vector<std::string>> body = bp.body;
        // only shared-art positions are swappable; anchors always survive
        std::vector<std::pair<int, int>> slots;
        for (std::size_t j = 0; j < bp.core_pos.size(); ++j)
            for (int p : bp.core_pos[j]) slots.emplace_back(static_cast<int>(j), p);
        const int total = static_cast<int>(slots.size());

        const int to_replace = static_cast<int>(std::lround(rho_star * total));
        deterministic_shuffle(slots, rng);
        for (int p = 0; p < to_replace; ++p) {
            const auto [cj, pos] = slots[static_cast<std::size_t>(p)];
            body[static_cast<std::size_t>(cj)][static_cast<std::size_t>(pos)] =
                synth_detail::novel_token(
                    static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.vocab_novel))));
        }
        const double rho = static_cast<double>(to_replace) / static_cast<double>(total);
        if ((rho >= cfg.theta) != (label == 1))
            throw NumericError("synth: rho rounding crossed theta, widen the margin");

        if (cfg.distractor_max_frac > 0.0) {
            const int max_extra = static_cast<int>(std::lround(cfg.distractor_max_frac * total));
            const int extra =
                max_extra > 0
                    ? static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_extra + 1)))
                    : 0;
            for (int e = 0; e < extra; ++e) {
                auto& claim_body = body[static_cast<std::size_t>(e) % body.size()];
                claim_body.push_back(synth_detail::novel_token(
                    static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.vocab_novel)))));
            }
        }

        SynthTargetInfo info;
        info.id = synth_detail::numbered("T", t + 1, 6);
        info.source_prior = synth_detail::numbered("P", src + 1, 6);
        info.rho = rho;
        info.label = label;

        PatentRecord rec;
        rec.id = info.id;
        rec.filing_date = synth_detail::date_for(target_base, t);
        rec.ipc = "A4" + std::to_string(bp.topic % 8);
        rec.status = Status::Pending;
        rec.label = label;
        for (std::size_t j = 0; j < body.size(); ++j)
            rec.claims.push_back(synth_detail::render_claim(noun, bp.parents[j], body[j]));
        validate_record(rec);
        out.corpus.add(std::move(rec));
        out.targets.push_back(std::move(info));
    }

    out.corpus.finalize();

    nlohmann::json manifest;
    manifest["seed"] = cfg.seed;
    manifest["num_prior"] = cfg.num_prior;
    manifest["num_targets"] = cfg.num_targets;
    manifest["theta"] = cfg.theta;
    manifest["margin"] = cfg.margin;
    manifest["approval_rate_requested"] = cfg.approval_rate;
    manifest["approved"] = num_approved;
    manifest["rejected"] = cfg.num_targets - num_approved;
    manifest["targets"] = nlohmann::json::array();
    for (const auto& info : out.targets) {
        nlohmann::json tj;
        tj["id"] = info.id;
        tj["source_prior"] = info.source_prior;
        tj["rho"] = info.rho;
        tj["label"] = info.label;
        manifest["targets"].push_back(std::move(tj));
    }
    out.manifest = std::move(manifest);
    return out;
}

} // namespace dispat
