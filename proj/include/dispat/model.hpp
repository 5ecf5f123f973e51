#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dispat/autodiff.hpp"
#include "dispat/claims.hpp"
#include "dispat/config.hpp"
#include "dispat/corpus.hpp"
#include "dispat/drl.hpp"
#include "dispat/embeddings.hpp"
#include "dispat/encoder.hpp"
#include "dispat/rng.hpp"

namespace dispat {

/// Turns a corpus record into network inputs: parses the claim block into a
/// graph, embeds each claim, and pads to n_max rows. With `fc_graph` set the
/// bias edges become all ordered pairs while the parsed depth levels are
/// kept, so the two structural mechanisms stay independently switchable.
inline PatentInput featurize_record(const PatentRecord& rec, const ModelConfig& cfg,
                                    EmbeddingProvider& provider, bool strict_parse = true) {
    if (provider.dim() != cfg.d_h)
        throw ConfigError("featurize: embedding dim " + std::to_string(provider.dim()) +
                          " does not match d_h " + std::to_string(cfg.d_h));
    ParseOptions opt;
    opt.strict = strict_parse;
    opt.max_claims = cfg.n_max;
    ParseResult parsed = parse_claim_texts(rec.claims, opt);

    PatentInput in;
    in.id = rec.id;
    in.n = parsed.graph.n;
    in.levels = parsed.graph.hierarchy;
    if (cfg.fc_graph) {
        for (int i = 1; i <= in.n; ++i)
            for (int j = i + 1; j <= in.n; ++j) in.edges.emplace_back(i, j);
    } else {
        in.edges = parsed.graph.edges;
    }
    in.content = Tensor::zeros(cfg.n_max, cfg.d_h);
    for (int i = 0; i < in.n; ++i) {
        Tensor e = provider.embed(rec.id, i + 1, parsed.claims[static_cast<std::size_t>(i)].text);
        for (int j = 0; j < cfg.d_h; ++j) in.content.at(i, j) = e.at(0, j);
    }
    in.label = rec.label.value_or(-1);
    return in;
}

inline std::vector<bool> claim_mask(const PatentInput& in, int n_max) {
    std::vector<bool> m(static_cast<std::size_t>(n_max), false);
    for (int i = 0; i < in.n; ++i) m[static_cast<std::size_t>(i)] = true;
    return m;
}

/// The full predictor: structural encoder, branch gates, contrastive pull
/// toward base references, and the approval classifier. Parameters live in
/// an owned store keyed by stable names.
class Model {
public:
    explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        SplitMix64 rng(cfg_.seed);
        enc::create_encoder_params(params_, cfg_, rng);
        drl::create_head_params(params_, cfg_, rng);
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    struct EncodedTarget {
        Var h;        // n_max x d_h
        Var h_sim;    // gated, novelty-shared view
        Var h_spe;    // gated, distinctive view
        Var pool_sim; // 1 x d_h
        Var pool_spe;
    };

    EncodedTarget encode_target(Tape& tape, const PatentInput& in, bool training = false,
                                SplitMix64* rng = nullptr) {
        EncodedTarget out;
        out.h = encode_patent(tape, in, params_, cfg_, training, rng);
        Var g_sim = drl::claim_gates(tape, out.h, params_, cfg_, "sim", in.n);
        Var g_spe = drl::claim_gates(tape, out.h, params_, cfg_, "spe", in.n);
        out.h_sim = tape.hadamard(out.h, g_sim);
        out.h_spe = tape.hadamard(out.h, g_spe);
        auto mask = claim_mask(in, cfg_.n_max);
        out.pool_sim = tape.mean_pool_rows(out.h_sim, mask);
        out.pool_spe = tape.mean_pool_rows(out.h_spe, mask);
        return out;
    }

    /// Base references get the plain encoder, no gates. With `detach_refs`
    /// the result re-enters the tape as a constant.
    Var encode_reference(Tape& tape, const PatentInput& in, bool training = false,
                         SplitMix64* rng = nullptr) {
        Var h = encode_patent(tape, in, params_, cfg_, training, rng);
        if (cfg_.detach_refs) return tape.constant(h.val());
        return h;
    }

    struct SampleOut {
        Var loss;          // scalar, per-term weights applied
        double y_hat = 0;  // approved probability
        double l_con = 0;  // l_sim + l_spe
        double l_sim = 0;
        double l_spe = 0;
        double l_clf = 0;
    };

    /// One target with its retrieved base references on one tape. A target
    /// without a label contributes no classification term; without
    /// references (or under no_brr / no_drl) no contrastive term.
    SampleOut forward(Tape& tape, const PatentInput& target,
                      const std::vector<const PatentInput*>& refs, bool training = false,
                      SplitMix64* rng = nullptr) {
        EncodedTarget t = encode_target(tape, target, training, rng);

        Var l_sim = tape.constant(Tensor::scalar(0.0));
        Var l_spe = tape.constant(Tensor::scalar(0.0));
        if (!cfg_.no_brr && !cfg_.no_drl) {
            for (const PatentInput* ref : refs) {
                Var h_br = encode_reference(tape, *ref, training, rng);
                Var pool_br = tape.mean_pool_rows(h_br, claim_mask(*ref, cfg_.n_max));
                l_sim = tape.add(l_sim, tape.affine(tape.cosine(t.pool_sim, pool_br), -1.0, 1.0));
                l_spe = tape.add(l_spe, tape.cosine(t.pool_spe, pool_br));
            }
        }
        Var l_con = tape.add(l_sim, l_spe);

        Var p1 = drl::classify(tape, t.pool_sim, t.pool_spe, params_);
        SampleOut out;
        out.y_hat = p1.val().at(0, 0);
        Var l_clf = target.label >= 0 ? drl::bce_loss(tape, p1, target.label)
                                      : tape.constant(Tensor::scalar(0.0));

        Var con_w = tape.add(tape.scale(l_sim, cfg_.w_sim), tape.scale(l_spe, cfg_.w_spe));
        out.loss = tape.add(con_w, tape.scale(l_clf, cfg_.w_clf));
        out.l_con = l_con.val().at(0, 0);
        out.l_sim = l_sim.val().at(0, 0);
        out.l_spe = l_spe.val().at(0, 0);
        out.l_clf = l_clf.val().at(0, 0);
        return out;
    }

private:
    ModelConfig cfg_;
    ParamStore params_;
};

/// Provider factory shared by the trainer and the CLI.
inline std::unique_ptr<EmbeddingProvider> make_provider(const ModelConfig& cfg) {
    if (cfg.embedding_kind == "hashed_ngram")
        return std::make_unique<HashedNgramProvider>(cfg.d_h, cfg.seed, cfg.w);
    if (cfg.embedding_kind == "precomputed_file") {
        if (cfg.embedding_path.empty())
            throw ConfigError("precomputed_file embeddings need embedding_path");
        return std::make_unique<PrecomputedProvider>(
            PrecomputedProvider::from_file(cfg.embedding_path, cfg.d_h));
    }
    throw ConfigError("unknown embedding kind: " + cfg.embedding_kind);
}

} // namespace dispat
