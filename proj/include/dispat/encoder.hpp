#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dispat/autodiff.hpp"
#include "dispat/config.hpp"
#include "dispat/rng.hpp"
#include "dispat/tensor.hpp"

namespace dispat {

/// One patent, featurized for the network. Rows of `content` beyond `n` are
/// zero and stay zero through every encoder layer.
struct PatentInput {
    std::string id;
    int n = 0;                              // real claims, <= n_max
    std::vector<int> levels;                // size n, depth in the claim graph
    std::vector<std::pair<int, int>> edges; // 1-indexed (i,j): claim j refers to claim i
    Tensor content;                         // n_max x d_h claim embeddings
    int label = -1;                         // 0 rejected, 1 approved, -1 unknown
    std::vector<std::string> ref_ids;       // retrieved base references
};

namespace enc {

inline std::string layer_param(int layer, const char* suffix) {
    return "encoder.layer" + std::to_string(layer) + "." + suffix;
}

/// Registers all encoder parameters in a fixed order so two stores built
/// from the same seed hold identical values.
inline void create_encoder_params(ParamStore& store, const ModelConfig& cfg, SplitMix64& rng) {
    const int d = cfg.d_h;
    for (int l = 0; l < cfg.layers; ++l) {
        fill_xavier_uniform(store.create(layer_param(l, "wq"), d, d).value, d, d, rng);
        fill_xavier_uniform(store.create(layer_param(l, "wk"), d, d).value, d, d, rng);
        fill_xavier_uniform(store.create(layer_param(l, "wv"), d, d).value, d, d, rng);
        if (cfg.ffn_sublayer) {
            const int dff = 4 * d;
            fill_xavier_uniform(store.create(layer_param(l, "ffn_w1"), d, dff).value, d, dff, rng);
            store.create(layer_param(l, "ffn_b1"), 1, dff);
            fill_xavier_uniform(store.create(layer_param(l, "ffn_w2"), dff, d).value, dff, d, rng);
            store.create(layer_param(l, "ffn_b2"), 1, d);
        }
    }
    fill_normal(store.create("encoder.hier_table", cfg.max_level + 1, d).value, 0.02, rng);
    store.create("encoder.r0", 1, 1); // bias toward unrelated claim pairs
    store.create("encoder.r1", 1, 1); // bias along reference edges
}

/// 0/1 column vector marking real claim rows.
inline Tensor row_mask(int n, int n_max) {
    Tensor m = Tensor::zeros(n_max, 1);
    for (int i = 0; i < n; ++i) m.at(i, 0) = 1.0;
    return m;
}

/// One-hot depth rows; padded rows stay zero so they pick up nothing from
/// the level table.
inline Tensor level_onehot(const std::vector<int>& levels, int n, int n_max, int max_level) {
    Tensor t = Tensor::zeros(n_max, max_level + 1);
    for (int i = 0; i < n; ++i) {
        int lv = levels[static_cast<std::size_t>(i)];
        if (lv < 0) lv = 0;
        if (lv > max_level) lv = max_level;
        t.at(i, lv) = 1.0;
    }
    return t;
}

struct StructMasks {
    Tensor off_edge; // 1 where both claims are real and (i,j) is not an edge
    Tensor on_edge;  // 1 where claim j refers to claim i
    Tensor key_pad;  // -1e30 on padded key columns, 0 elsewhere
};

inline StructMasks structural_masks(const PatentInput& in, int n_max) {
    StructMasks m{Tensor::zeros(n_max, n_max), Tensor::zeros(n_max, n_max),
                  Tensor::zeros(n_max, n_max)};
    for (int i = 0; i < in.n; ++i)
        for (int j = 0; j < in.n; ++j) m.off_edge.at(i, j) = 1.0;
    for (const auto& [a, b] : in.edges) {
        if (a < 1 || b < 1 || a > in.n || b > in.n) continue;
        m.on_edge.at(a - 1, b - 1) = 1.0;
        m.off_edge.at(a - 1, b - 1) = 0.0;
    }
    for (int i = 0; i < n_max; ++i)
        for (int j = in.n; j < n_max; ++j) m.key_pad.at(i, j) = -1e30;
    return m;
}

} // namespace enc

/// Encodes one patent: content + level embeddings, then `layers` rounds of
/// multi-head attention whose logits carry a learned two-value bias keyed on
/// the claim graph (one value along reference edges, another elsewhere).
/// Returns the n_max x d_h representation; padded rows are exactly zero.
inline Var encode_patent(Tape& tape, const PatentInput& in, ParamStore& store,
                         const ModelConfig& cfg, bool training = false,
                         SplitMix64* dropout_rng = nullptr) {
    if (in.content.rows() != cfg.n_max || in.content.cols() != cfg.d_h)
        throw ShapeError("encode_patent: content must be n_max x d_h");
    if (in.n < 1 || in.n > cfg.n_max) throw ShapeError("encode_patent: claim count out of range");
    if (static_cast<int>(in.levels.size()) != in.n)
        throw ShapeError("encode_patent: levels size mismatch");
    if (training && cfg.dropout > 0.0 && dropout_rng == nullptr)
        throw ConfigError("encode_patent: training with dropout needs an rng");

    Var x = tape.constant(in.content);
    if (!cfg.no_hier_emb) {
        Var onehot = tape.constant(enc::level_onehot(in.levels, in.n, cfg.n_max, cfg.max_level));
        x = tape.add(x, tape.matmul(onehot, tape.leaf(store.get("encoder.hier_table"))));
    }

    const auto masks = enc::structural_masks(in, cfg.n_max);
    Var bias = tape.constant(masks.key_pad);
    if (!cfg.zero_ref_bias) {
        Var r0 = tape.leaf(store.get("encoder.r0"));
        Var r1 = tape.leaf(store.get("encoder.r1"));
        bias = tape.add(bias, tape.hadamard(tape.constant(masks.off_edge), r0));
        bias = tape.add(bias, tape.hadamard(tape.constant(masks.on_edge), r1));
    }

    Var rmask = tape.constant(enc::row_mask(in.n, cfg.n_max));
    const int dh = cfg.head_dim();
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_h));

    for (int l = 0; l < cfg.layers; ++l) {
        Var q = tape.matmul(x, tape.leaf(store.get(enc::layer_param(l, "wq"))));
        Var k = tape.matmul(x, tape.leaf(store.get(enc::layer_param(l, "wk"))));
        Var v = tape.matmul(x, tape.leaf(store.get(enc::layer_param(l, "wv"))));

        std::vector<Var> heads;
        heads.reserve(static_cast<std::size_t>(cfg.heads));
        for (int h = 0; h < cfg.heads; ++h) {
            Var qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
            Var kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
            Var vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
            Var logits = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_scale);
            logits = tape.add(logits, bias);
            Var attn = tape.softmax_row(logits);
            if (training && cfg.dropout > 0.0) attn = tape.dropout(attn, cfg.dropout, *dropout_rng);
            heads.push_back(tape.matmul(attn, vh));
        }
        Var ctx = heads.front();
        for (std::size_t h = 1; h < heads.size(); ++h) ctx = tape.concat_last(ctx, heads[h]);

        // zero padded rows before the residual so layer norm keeps them zero
        ctx = tape.hadamard(ctx, rmask);
        x = tape.layer_norm_row(tape.add(ctx, x));

        if (cfg.ffn_sublayer) {
            Var f = tape.relu(tape.add(tape.matmul(x, tape.leaf(store.get(enc::layer_param(l, "ffn_w1")))),
                                       tape.leaf(store.get(enc::layer_param(l, "ffn_b1")))));
            f = tape.add(tape.matmul(f, tape.leaf(store.get(enc::layer_param(l, "ffn_w2")))),
                         tape.leaf(store.get(enc::layer_param(l, "ffn_b2"))));
            f = tape.hadamard(f, rmask); // the b1/b2 broadcasts touch padded rows
            x = tape.layer_norm_row(tape.add(f, x));
        }
    }
    return x;
}

} // namespace dispat
