#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "dispat/errors.hpp"

namespace dispat {

/// Architecture and featurization knobs. Two built-in profiles: `paper`
/// (full-size) and `desk` (small enough to train on a laptop CPU in
/// minutes). Flags at the bottom switch off individual mechanisms for
/// ablation runs.
struct ModelConfig {
    int d_h = 64;       // feature width
    int heads = 4;      // attention heads; must divide d_h
    int layers = 2;     // encoder depth
    int n_max = 8;      // claim cap per patent
    int max_level = 8;  // hierarchy levels clamp here; level table has max_level+1 rows
    int k = 3;          // base references retrieved per target
    int w = 64;         // token cap per claim for content embeddings
    int d_g = 0;        // gate hidden width; 0 means use d_h
    double dropout = 0.1;
    bool ffn_sublayer = false; // optional position-wise FFN after attention
    double w_sim = 1.0;        // similarity-branch contrastive weight
    double w_spe = 1.0;        // specificity-branch contrastive weight
    double w_clf = 1.0;        // classification loss weight
    bool detach_refs = false;  // stop gradients at base reference encodings
    std::uint64_t seed = 1;    // parameter init stream

    std::string embedding_kind = "hashed_ngram"; // or "precomputed_file"
    std::string embedding_path;                  // for precomputed_file

    // ablations
    bool no_brr = false;        // drop base references entirely
    bool no_drl = false;        // keep the gates but zero the contrastive loss
    bool zero_ref_bias = false; // structural bias fixed at zero, not learned
    bool no_hier_emb = false;   // drop the hierarchy embedding term
    bool fc_graph = false;      // replace the claim graph with all pairs i<j

    int gate_dim() const { return d_g > 0 ? d_g : d_h; }
    int head_dim() const { return d_h / heads; }

    void validate() const {
        if (d_h <= 0 || heads <= 0 || layers < 0 || n_max <= 0 || k < 0 || w <= 0)
            throw ConfigError("model config: nonpositive dimension");
        if (d_h % heads != 0) throw ConfigError("model config: heads must divide d_h");
        if (max_level < 0) throw ConfigError("model config: negative max_level");
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model config: dropout outside [0,1)");
        if (embedding_kind != "hashed_ngram" && embedding_kind != "precomputed_file")
            throw ConfigError("model config: unknown embedding kind " + embedding_kind);
    }
};

/// Optimization schedule. The full-size profile follows the published
/// defaults; the desk profile's rate and batch are tuned for the synthetic
/// corpus.
struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 8;
    int max_steps = 3000;
    int eval_every = 500; // validation cadence; best checkpoint by val accuracy
    std::uint64_t seed = 1;

    void validate() const {
        if (lr < 0.0) throw ConfigError("train config: lr must not be negative");
        if (batch_size <= 0 || max_steps < 0 || eval_every <= 0)
            throw ConfigError("train config: nonpositive schedule value");
    }
};

inline ModelConfig paper_model_profile() {
    ModelConfig c;
    c.d_h = 768;
    c.heads = 6;
    c.layers = 2;
    c.n_max = 20;
    c.k = 5;
    c.w = 512;
    c.dropout = 0.1;
    return c;
}

inline TrainConfig paper_train_profile() {
    TrainConfig t;
    t.lr = 1e-4;
    t.batch_size = 4;
    t.eval_every = 5000;
    return t;
}

inline ModelConfig desk_model_profile() {
    ModelConfig c;
    // softened contrastive weights: at this scale the unweighted terms reach
    // their degenerate optimum and starve the classifier
    c.w_sim = 0.1;
    c.w_spe = 0.3;
    return c;
}

inline TrainConfig desk_train_profile() { return TrainConfig{}; }

inline void apply_model_profile(ModelConfig& c, const std::string& name) {
    if (name == "paper") c = paper_model_profile();
    else if (name == "desk") c = desk_model_profile();
    else throw ConfigError("unknown profile: " + name);
}

inline void apply_train_profile(TrainConfig& t, const std::string& name) {
    if (name == "paper") t = paper_train_profile();
    else if (name == "desk") t = desk_train_profile();
    else throw ConfigError("unknown profile: " + name);
}

// JSON round trip. Absent fields keep their current values, so a config file
// may list only what it overrides.

inline void model_config_from_json(ModelConfig& c, const nlohmann::json& j) {
    c.d_h = j.value("d_h", c.d_h);
    c.heads = j.value("heads", c.heads);
    c.layers = j.value("layers", c.layers);
    c.n_max = j.value("n_max", c.n_max);
    c.max_level = j.value("max_level", c.max_level);
    c.k = j.value("k", c.k);
    c.w = j.value("w", c.w);
    c.d_g = j.value("d_g", c.d_g);
    c.dropout = j.value("dropout", c.dropout);
    c.ffn_sublayer = j.value("ffn_sublayer", c.ffn_sublayer);
    c.w_sim = j.value("w_sim", c.w_sim);
    c.w_spe = j.value("w_spe", c.w_spe);
    c.w_clf = j.value("w_clf", c.w_clf);
    c.detach_refs = j.value("detach_refs", c.detach_refs);
    c.seed = j.value("seed", c.seed);
    c.embedding_kind = j.value("embedding_kind", c.embedding_kind);
    c.embedding_path = j.value("embedding_path", c.embedding_path);
    c.no_brr = j.value("no_brr", c.no_brr);
    c.no_drl = j.value("no_drl", c.no_drl);
    c.zero_ref_bias = j.value("zero_ref_bias", c.zero_ref_bias);
    c.no_hier_emb = j.value("no_hier_emb", c.no_hier_emb);
    c.fc_graph = j.value("fc_graph", c.fc_graph);
    c.validate();
}

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["d_h"] = c.d_h;
    j["heads"] = c.heads;
    j["layers"] = c.layers;
    j["n_max"] = c.n_max;
    j["max_level"] = c.max_level;
    j["k"] = c.k;
    j["w"] = c.w;
    j["d_g"] = c.d_g;
    j["dropout"] = c.dropout;
    j["ffn_sublayer"] = c.ffn_sublayer;
    j["w_sim"] = c.w_sim;
    j["w_spe"] = c.w_spe;
    j["w_clf"] = c.w_clf;
    j["detach_refs"] = c.detach_refs;
    j["seed"] = c.seed;
    j["embedding_kind"] = c.embedding_kind;
    j["embedding_path"] = c.embedding_path;
    j["no_brr"] = c.no_brr;
    j["no_drl"] = c.no_drl;
    j["zero_ref_bias"] = c.zero_ref_bias;
    j["no_hier_emb"] = c.no_hier_emb;
    j["fc_graph"] = c.fc_graph;
    return j;
}

inline void train_config_from_json(TrainConfig& t, const nlohmann::json& j) {
    t.lr = j.value("lr", t.lr);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.max_steps = j.value("max_steps", t.max_steps);
    t.eval_every = j.value("eval_every", t.eval_every);
    t.seed = j.value("seed", t.seed);
    t.validate();
}

inline nlohmann::json train_config_to_json(const TrainConfig& t) {
    nlohmann::json j;
    j["lr"] = t.lr;
    j["batch_size"] = t.batch_size;
    j["max_steps"] = t.max_steps;
    j["eval_every"] = t.eval_every;
    j["seed"] = t.seed;
    return j;
}

} // namespace dispat
