#pragma once

#include <string>
#include <vector>

#include "dispat/autodiff.hpp"
#include "dispat/config.hpp"
#include "dispat/encoder.hpp"
#include "dispat/rng.hpp"

namespace dispat {
namespace drl {

inline std::string gate_param(const char* branch, const char* suffix) {
    return std::string("gate.") + branch + "." + suffix;
}

/// Gate FFNs for both branches plus the approval classifier. Registered in a
/// fixed order, after the encoder's parameters.
inline void create_head_params(ParamStore& store, const ModelConfig& cfg, SplitMix64& rng) {
    const int d = cfg.d_h;
    const int dg = cfg.gate_dim();
    for (const char* branch : {"sim", "spe"}) {
        fill_xavier_uniform(store.create(gate_param(branch, "w1"), dg, d).value, d, dg, rng);
        store.create(gate_param(branch, "b1"), dg, 1);
        fill_xavier_uniform(store.create(gate_param(branch, "w2"), 1, dg).value, dg, 1, rng);
        store.create(gate_param(branch, "b2"), 1, 1);
    }
    fill_xavier_uniform(store.create("classifier.wp", 2, 2 * d).value, 2 * d, 2, rng);
    store.create("classifier.bp", 1, 2);
}

/// Per-claim gate values for one branch: a two-layer FFN over the encoded
/// rows, squashed to (0,1), with padded positions forced to exactly zero.
/// Returns an n_max x 1 column for row-wise scaling.
inline Var claim_gates(Tape& tape, Var h, ParamStore& store, const ModelConfig& cfg,
                       const char* branch, int n_real) {
    Var pre = tape.add(tape.matmul(tape.leaf(store.get(gate_param(branch, "w1"))), tape.transpose(h)),
                       tape.leaf(store.get(gate_param(branch, "b1"))));
    Var g = tape.sigmoid(tape.add(tape.matmul(tape.leaf(store.get(gate_param(branch, "w2"))), tape.relu(pre)),
                                  tape.leaf(store.get(gate_param(branch, "b2")))));
    Tensor mask = Tensor::zeros(1, cfg.n_max);
    for (int i = 0; i < n_real; ++i) mask.at(0, i) = 1.0;
    return tape.transpose(tape.hadamard(g, tape.constant(mask)));
}

/// Approved probability from the two pooled branch vectors. Returns the 1x1
/// slice at class index 1.
inline Var classify(Tape& tape, Var pool_sim, Var pool_spe, ParamStore& store) {
    Var cat = tape.concat_last(pool_sim, pool_spe);
    Var logits = tape.add(tape.matmul(cat, tape.transpose(tape.leaf(store.get("classifier.wp")))),
                          tape.leaf(store.get("classifier.bp")));
    return tape.slice_cols(tape.softmax_row(logits), 1, 2);
}

/// Binary cross entropy on the approved probability, clamped away from 0
/// and 1 so the log stays finite.
inline Var bce_loss(Tape& tape, Var p_approved, int label) {
    Var c = tape.clamp(p_approved, 1e-12, 1.0 - 1e-12);
    if (label == 1) return tape.scale(tape.log_elem(c), -1.0);
    return tape.scale(tape.log_elem(tape.affine(c, -1.0, 1.0)), -1.0);
}

} // namespace drl
} // namespace dispat
