#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dispat/bm25.hpp"
#include "dispat/checkpoint.hpp"
#include "dispat/config.hpp"
#include "dispat/corpus.hpp"
#include "dispat/embeddings.hpp"
#include "dispat/metrics.hpp"
#include "dispat/model.hpp"
#include "dispat/optim.hpp"
#include "dispat/rng.hpp"

namespace dispat {

/// Wires a corpus to the network: featurizes records on demand and resolves
/// each target's base references through time-filtered retrieval. Both maps
/// are caches of pure functions, so lookups are deterministic.
class Pipeline {
public:
    Pipeline(const Corpus& corpus, const ModelConfig& cfg, EmbeddingProvider& provider)
        : corpus_(&corpus), cfg_(cfg), provider_(&provider),
          index_(Bm25Index::build(corpus)) {}

    const ModelConfig& config() const { return cfg_; }
    const Bm25Index& index() const { return index_; }
    const Corpus& corpus() const { return *corpus_; }

    const PatentInput& input_for(const std::string& id) {
        auto it = cache_.find(id);
        if (it != cache_.end()) return it->second;
        PatentInput in = featurize_record(corpus_->by_id(id), cfg_, *provider_);
        return cache_.emplace(id, std::move(in)).first->second;
    }

    const std::vector<std::string>& ref_ids_for(const std::string& id) {
        auto it = refs_.find(id);
        if (it != refs_.end()) return it->second;
        std::vector<std::string> ids;
        if (!cfg_.no_brr && cfg_.k > 0) {
            Bm25Index::Retrieval r = index_.top_k_base_reference(corpus_->by_id(id), cfg_.k);
            for (const auto& ref : r.refs) ids.push_back(ref.id);
        }
        return refs_.emplace(id, std::move(ids)).first->second;
    }

    /// Target input plus its reference inputs, ready for Model::forward.
    std::pair<const PatentInput*, std::vector<const PatentInput*>> sample_for(const std::string& id) {
        const PatentInput* target = &input_for(id);
        std::vector<const PatentInput*> refs;
        for (const std::string& rid : ref_ids_for(id)) refs.push_back(&input_for(rid));
        return {target, refs};
    }

private:
    const Corpus* corpus_;
    ModelConfig cfg_;
    EmbeddingProvider* provider_;
    Bm25Index index_;
    std::unordered_map<std::string, PatentInput> cache_;
    std::unordered_map<std::string, std::vector<std::string>> refs_;
};

struct EvalResult {
    Metrics metrics;
    std::vector<std::string> ids;
    std::vector<double> scores;
    std::vector<int> labels;
};

/// Dropout-free pass over the given targets; every one must carry a label.
inline EvalResult evaluate_model(Model& model, Pipeline& pipe, const std::vector<std::string>& ids) {
    EvalResult out;
    for (const std::string& id : ids) {
        auto [target, refs] = pipe.sample_for(id);
        if (target->label < 0) throw ValidationError("evaluate: target without label: " + id);
        Tape tape;
        Model::SampleOut s = model.forward(tape, *target, refs);
        out.ids.push_back(id);
        out.scores.push_back(s.y_hat);
        out.labels.push_back(target->label);
    }
    out.metrics = compute_metrics(out.scores, out.labels);
    return out;
}

/// Mean cosine between each pooled branch vector and the pooled encoding of
/// every retrieved reference. The training objective pushes the first
/// toward 1 and the second toward 0.
struct BranchAlignment {
    double mean_sim = 0.0;
    double mean_spe = 0.0;
    std::int64_t pairs = 0;
};

inline BranchAlignment branch_alignment(Model& model, Pipeline& pipe,
                                        const std::vector<std::string>& ids) {
    BranchAlignment out;
    for (const std::string& id : ids) {
        auto [target, refs] = pipe.sample_for(id);
        if (refs.empty()) continue;
        Tape tape;
        Model::EncodedTarget t = model.encode_target(tape, *target);
        for (const PatentInput* ref : refs) {
            Var h_br = model.encode_reference(tape, *ref);
            Var pool_br = tape.mean_pool_rows(h_br, claim_mask(*ref, model.config().n_max));
            out.mean_sim += tape.cosine(t.pool_sim, pool_br).val().at(0, 0);
            out.mean_spe += tape.cosine(t.pool_spe, pool_br).val().at(0, 0);
            ++out.pairs;
        }
    }
    if (out.pairs > 0) {
        out.mean_sim /= static_cast<double>(out.pairs);
        out.mean_spe /= static_cast<double>(out.pairs);
    }
    return out;
}

struct TrainResult {
    Checkpoint best;            // highest validation accuracy, optimizer included
    double best_val_acc = 0.0;
    std::uint64_t best_step = 0;
    std::vector<double> loss_trace; // batch mean per step, in step order
};

/// Minibatch training with epoch-wise seeded shuffling. Validation runs
/// every eval_every steps and once more at the end; the checkpoint with the
/// best validation accuracy wins (earliest on ties). Emits one JSON line
/// per step to `log` when given: {step, loss, l_sim, l_spe, l_clf}.
inline TrainResult train_model(Model& model, Pipeline& pipe, const TrainConfig& tc,
                               std::vector<std::string> train_ids,
                               const std::vector<std::string>& val_ids,
                               std::ostream* log = nullptr) {
    tc.validate();
    if (train_ids.empty()) throw ValidationError("train: empty training split");

    std::sort(train_ids.begin(), train_ids.end());
    SplitMix64 shuffle_rng(tc.seed);
    SplitMix64 dropout_rng(tc.seed ^ 0xD0D0D0D0D0D0D0D0ULL);
    deterministic_shuffle(train_ids, shuffle_rng);
    std::size_t cursor = 0;

    Adam opt(tc.lr);
    TrainResult result;
    bool have_best = false;

    auto maybe_take_best = [&](std::uint64_t step) {
        Metrics m = evaluate_model(model, pipe, val_ids).metrics;
        if (!have_best || m.acc > result.best_val_acc) {
            have_best = true;
            result.best_val_acc = m.acc;
            result.best_step = step;
            result.best = make_checkpoint(model, &opt, step);
        }
    };

    for (int step = 1; step <= tc.max_steps; ++step) {
        Tape tape;
        Var total = tape.constant(Tensor::scalar(0.0));
        double sum_sim = 0.0, sum_spe = 0.0, sum_clf = 0.0;
        for (int b = 0; b < tc.batch_size; ++b) {
            if (cursor == train_ids.size()) {
                deterministic_shuffle(train_ids, shuffle_rng);
                cursor = 0;
            }
            auto [target, refs] = pipe.sample_for(train_ids[cursor++]);
            Model::SampleOut s = model.forward(tape, *target, refs, true, &dropout_rng);
            total = tape.add(total, s.loss);
            sum_sim += s.l_sim;
            sum_spe += s.l_spe;
            sum_clf += s.l_clf;
        }
        Var mean = tape.scale(total, 1.0 / tc.batch_size);
        const double loss = mean.val().at(0, 0);
        tape.backward(mean);
        opt.step(model.params());

        result.loss_trace.push_back(loss);
        if (log != nullptr) {
            nlohmann::json line;
            line["step"] = step;
            line["loss"] = loss;
            line["l_sim"] = sum_sim / tc.batch_size;
            line["l_spe"] = sum_spe / tc.batch_size;
            line["l_clf"] = sum_clf / tc.batch_size;
            (*log) << line.dump() << "\n";
        }

        if (!val_ids.empty() && step % tc.eval_every == 0) maybe_take_best(static_cast<std::uint64_t>(step));
    }
    if (!val_ids.empty() && tc.max_steps % tc.eval_every != 0)
        maybe_take_best(static_cast<std::uint64_t>(tc.max_steps));
    if (!have_best) result.best = make_checkpoint(model, &opt, static_cast<std::uint64_t>(tc.max_steps));

    // leave the model holding the winning weights, exactly as a reload would
    apply_checkpoint(result.best, model, &opt);
    return result;
}

} // namespace dispat
