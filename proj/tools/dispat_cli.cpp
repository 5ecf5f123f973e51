#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dispat/bm25.hpp"
#include "dispat/checkpoint.hpp"
#include "dispat/claims.hpp"
#include "dispat/config.hpp"
#include "dispat/corpus.hpp"
#include "dispat/evidential.hpp"
#include "dispat/gradcheck.hpp"
#include "dispat/metrics.hpp"
#include "dispat/model.hpp"
#include "dispat/synthgen.hpp"
#include "dispat/train.hpp"

using namespace dispat;
using nlohmann::json;

namespace {

bool quiet_logs() {
    const char* lvl = std::getenv("DISPAT_LOG");
    return lvl != nullptr && std::string(lvl) == "quiet";
}

void log_line(const std::string& msg) {
    if (!quiet_logs()) std::cerr << msg << "\n";
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out << text;
}

/// Shared model/training settings: profile first, then the config file, then
/// explicit flags. The winning values are echoed to the log.
struct Settings {
    std::string profile;
    std::string config_path;
    ModelConfig model;
    TrainConfig train;

    // flag overrides, applied only when set on the command line
    std::optional<int> d_h, heads, layers, n_max, k, w;
    std::optional<double> lr, dropout;
    std::optional<int> batch_size, max_steps, eval_every;
    std::optional<std::uint64_t> seed;
    bool no_brr = false, no_drl = false, zero_ref_bias = false;
    bool no_hier_emb = false, fc_graph = false, detach_refs = false;

    void attach(CLI::App* cmd, bool with_train) {
        cmd->add_option("--profile", profile, "named preset: desk or paper");
        cmd->add_option("--config", config_path, "JSON config file with model/train sections");
        cmd->add_option("--d-h", d_h, "claim embedding width");
        cmd->add_option("--heads", heads, "attention heads");
        cmd->add_option("--layers", layers, "encoder layers");
        cmd->add_option("--n-max", n_max, "claim rows per patent");
        cmd->add_option("--k", k, "base references per target");
        cmd->add_option("--w", w, "max tokens per claim embedding");
        cmd->add_option("--dropout", dropout, "attention dropout rate");
        cmd->add_option("--seed", seed, "parameter/shuffle seed");
        cmd->add_flag("--no-brr", no_brr, "drop base-reference retrieval");
        cmd->add_flag("--no-drl", no_drl, "drop the contrastive objective");
        cmd->add_flag("--zero-ref-bias", zero_ref_bias, "freeze r0/r1 at zero");
        cmd->add_flag("--no-hier-emb", no_hier_emb, "drop hierarchy level features");
        cmd->add_flag("--fc-graph", fc_graph, "bias every claim pair instead of parsed edges");
        cmd->add_flag("--detach-refs", detach_refs, "references join the loss as constants");
        if (with_train) {
            cmd->add_option("--lr", lr, "learning rate");
            cmd->add_option("--batch-size", batch_size, "samples per step");
            cmd->add_option("--max-steps", max_steps, "training steps");
            cmd->add_option("--eval-every", eval_every, "validation cadence");
        }
    }

    void resolve() {
        if (!profile.empty()) {
            apply_model_profile(model, profile);
            apply_train_profile(train, profile);
        }
        if (!config_path.empty()) {
            json j = load_json_file(config_path);
            if (j.contains("model")) model_config_from_json(model, j["model"]);
            if (j.contains("train")) train_config_from_json(train, j["train"]);
        }
        if (d_h) model.d_h = *d_h;
        if (heads) model.heads = *heads;
        if (layers) model.layers = *layers;
        if (n_max) model.n_max = *n_max;
        if (k) model.k = *k;
        if (w) model.w = *w;
        if (dropout) model.dropout = *dropout;
        if (seed) {
            model.seed = *seed;
            train.seed = *seed;
        }
        if (no_brr) model.no_brr = true;
        if (no_drl) model.no_drl = true;
        if (zero_ref_bias) model.zero_ref_bias = true;
        if (no_hier_emb) model.no_hier_emb = true;
        if (fc_graph) model.fc_graph = true;
        if (detach_refs) model.detach_refs = true;
        if (lr) train.lr = *lr;
        if (batch_size) train.batch_size = *batch_size;
        if (max_steps) train.max_steps = *max_steps;
        if (eval_every) train.eval_every = *eval_every;
        model.validate();
        train.validate();

        json effective;
        effective["model"] = model_config_to_json(model);
        effective["train"] = train_config_to_json(train);
        log_line("effective config: " + effective.dump());
    }
};

std::vector<std::string> split_ids(const Splits& s, const std::string& name) {
    if (name == "train") return s.train;
    if (name == "val") return s.val;
    if (name == "test") return s.test;
    throw ConfigError("unknown split: " + name);
}

void load_model_from(const std::string& path, Settings& st, std::unique_ptr<Model>& model) {
    Checkpoint cp = load_checkpoint_file(path);
    st.model = cp.config;
    model = std::make_unique<Model>(cp.config);
    apply_checkpoint(cp, *model);
    log_line("loaded checkpoint " + path + " at step " + std::to_string(cp.step));
}

int run_ingest(const std::string& in_path, const std::string& out_path) {
    Corpus corpus = ingest_jsonl_file(in_path);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw FormatError("cannot open " + out_path + " for writing");
        write_jsonl(corpus, out);
        log_line("wrote normalized corpus to " + out_path);
    }
    std::cout << corpus_stats(corpus).dump(2) << "\n";
    return 0;
}

int run_split(const std::string& in_path, const std::string& out_path, SplitSpec spec) {
    Corpus corpus = ingest_jsonl_file(in_path);
    Splits s = split_corpus(corpus, spec);
    json j = splits_to_json(s, spec);
    if (!out_path.empty()) {
        write_text_file(out_path, j.dump(2) + "\n");
        log_line("wrote splits to " + out_path);
    }
    std::cout << corpus_stats(corpus, &s).dump(2) << "\n";
    return 0;
}

int run_index(const std::string& in_path, const std::string& out_path) {
    Corpus corpus = ingest_jsonl_file(in_path);
    Bm25Index idx = Bm25Index::build(corpus);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + out_path + " for writing");
    idx.save(out);
    json j;
    j["indexed_documents"] = idx.doc_count();
    j["index_file"] = out_path;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_retrieve(const std::string& in_path, const std::string& index_path,
                 const std::string& target_id, int k) {
    Corpus corpus = ingest_jsonl_file(in_path);
    Bm25Index idx = [&] {
        if (index_path.empty()) return Bm25Index::build(corpus);
        std::ifstream in(index_path, std::ios::binary);
        if (!in) throw FormatError("cannot open " + index_path);
        return Bm25Index::load(in);
    }();
    Bm25Index::Retrieval r = idx.top_k_base_reference(corpus.by_id(target_id), k);
    json j;
    j["target"] = target_id;
    j["k"] = k;
    j["low_reference"] = r.low_reference;
    j["refs"] = json::array();
    for (const auto& ref : r.refs) j["refs"].push_back({{"id", ref.id}, {"score", ref.score}});
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_train(Settings& st, const std::string& in_path, const std::string& splits_path,
              const std::string& out_path, const std::string& log_path) {
    st.resolve();
    Corpus corpus = ingest_jsonl_file(in_path);
    Splits splits = splits_from_json(load_json_file(splits_path));
    auto provider = make_provider(st.model);
    Pipeline pipe(corpus, st.model, *provider);
    Model model(st.model);

    std::ofstream log_file;
    std::ostream* log = nullptr;
    if (!log_path.empty()) {
        log_file.open(log_path);
        if (!log_file) throw FormatError("cannot open " + log_path + " for writing");
        log = &log_file;
    }

    TrainResult r = train_model(model, pipe, st.train, splits.train, splits.val, log);
    if (!out_path.empty()) {
        save_checkpoint_file(out_path, r.best);
        log_line("wrote checkpoint to " + out_path);
    }

    json j;
    j["steps"] = r.loss_trace.size();
    j["final_loss"] = r.loss_trace.empty() ? 0.0 : r.loss_trace.back();
    j["best_step"] = r.best_step;
    j["best_val_acc"] = r.best_val_acc;
    if (!splits.test.empty())
        j["test"] = metrics_to_json(evaluate_model(model, pipe, splits.test).metrics);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_eval(Settings& st, const std::string& in_path, const std::string& splits_path,
             const std::string& model_path, const std::string& split_name) {
    Corpus corpus = ingest_jsonl_file(in_path);
    Splits splits = splits_from_json(load_json_file(splits_path));
    std::unique_ptr<Model> model;
    load_model_from(model_path, st, model);
    auto provider = make_provider(st.model);
    Pipeline pipe(corpus, st.model, *provider);

    EvalResult e = evaluate_model(*model, pipe, split_ids(splits, split_name));
    json j;
    j["split"] = split_name;
    j["count"] = e.ids.size();
    j["metrics"] = metrics_to_json(e.metrics);
    BranchAlignment a = branch_alignment(*model, pipe, split_ids(splits, split_name));
    j["branch_alignment"] = {{"mean_sim", a.mean_sim}, {"mean_spe", a.mean_spe}, {"pairs", a.pairs}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_explain(Settings& st, const std::string& in_path, const std::string& model_path,
                const std::string& target_id, int top_m, bool mean_agg, bool as_text) {
    Corpus corpus = ingest_jsonl_file(in_path);
    std::unique_ptr<Model> model;
    load_model_from(model_path, st, model);
    auto provider = make_provider(st.model);
    Pipeline pipe(corpus, st.model, *provider);

    EvidenceOptions opt;
    opt.top_m = top_m;
    opt.mean_aggregation = mean_agg;
    EvidenceReport rep = build_evidence_report(*model, pipe, target_id, opt);
    if (as_text) std::cout << render_report_text(rep);
    else std::cout << report_to_json(rep).dump(2) << "\n";
    return 0;
}

int run_synth(const SynthConfig& cfg, const std::string& out_path, const std::string& manifest_path) {
    SynthResult r = generate_corpus(cfg);
    std::ofstream out(out_path);
    if (!out) throw FormatError("cannot open " + out_path + " for writing");
    write_jsonl(r.corpus, out);
    if (!manifest_path.empty()) write_text_file(manifest_path, r.manifest.dump(2) + "\n");

    json j;
    j["records"] = r.corpus.size();
    j["priors"] = cfg.num_prior;
    j["targets"] = cfg.num_targets;
    j["approved"] = r.manifest["approved"];
    j["corpus_file"] = out_path;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_gradcheck(int d_h, int heads, int layers, int n, int k, double tol) {
    ModelConfig cfg;
    cfg.d_h = d_h;
    cfg.heads = heads;
    cfg.layers = layers;
    cfg.n_max = n;
    cfg.k = k;
    cfg.w = 32;
    cfg.dropout = 0.0;
    Model model(cfg);

    SplitMix64 rng(17);
    auto random_input = [&](const std::string& id, int label) {
        PatentInput in;
        in.id = id;
        in.n = n;
        in.levels.assign(static_cast<std::size_t>(n), 0);
        for (int j = 2; j <= n; ++j) {
            in.edges.emplace_back(1, j);
            in.levels[static_cast<std::size_t>(j - 1)] = 1;
        }
        in.label = label;
        in.content = Tensor::zeros(cfg.n_max, cfg.d_h);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < cfg.d_h; ++j) in.content.at(i, j) = rng.next_range(-1.0, 1.0);
        return in;
    };
    PatentInput target = random_input("target", 1);
    std::vector<PatentInput> refs;
    for (int i = 0; i < k; ++i) refs.push_back(random_input("ref" + std::to_string(i), -1));

    auto loss_fn = [&](bool with_grad) {
        Tape tape;
        std::vector<const PatentInput*> ref_ptrs;
        for (const auto& r : refs) ref_ptrs.push_back(&r);
        Model::SampleOut s = model.forward(tape, target, ref_ptrs);
        if (with_grad) tape.backward(s.loss);
        return s.loss.val().at(0, 0);
    };
    GradCheckReport report = grad_check(model.params(), loss_fn);

    json j;
    j["max_rel_err"] = report.max_rel_err;
    j["worst_param"] = report.worst_param;
    j["tolerance"] = tol;
    j["ok"] = report.ok(tol);
    std::cout << j.dump(2) << "\n";
    return report.ok(tol) ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"evidential patent approval prediction pipeline"};
    app.require_subcommand(1);

    Settings st;
    std::string in_path, out_path, splits_path, index_path, model_path, log_path;
    std::string target_id, split_name = "test", manifest_path;
    SplitSpec split_spec;
    SynthConfig synth_cfg;
    int retrieve_k = 5, top_m = 3;
    bool mean_agg = false, as_text = false;
    int gc_dh = 8, gc_heads = 2, gc_layers = 2, gc_n = 3, gc_k = 2;
    double gc_tol = 1e-4;

    CLI::App* ingest = app.add_subcommand("ingest", "validate a JSONL corpus and report stats");
    ingest->add_option("--in", in_path, "corpus JSONL")->required();
    ingest->add_option("--out", out_path, "write the normalized corpus here");

    CLI::App* split = app.add_subcommand("split", "shuffle labeled targets into train/val/test");
    split->add_option("--in", in_path, "corpus JSONL")->required();
    split->add_option("--out", out_path, "splits JSON file");
    split->add_option("--train", split_spec.train, "train ratio");
    split->add_option("--val", split_spec.val, "val ratio");
    split->add_option("--test", split_spec.test, "test ratio");
    split->add_option("--seed", split_spec.seed, "shuffle seed");

    CLI::App* index = app.add_subcommand("index", "build and save the retrieval index");
    index->add_option("--in", in_path, "corpus JSONL")->required();
    index->add_option("--out", out_path, "index file")->required();

    CLI::App* retrieve = app.add_subcommand("retrieve", "top-k earlier-dated granted patents");
    retrieve->add_option("--in", in_path, "corpus JSONL")->required();
    retrieve->add_option("--index", index_path, "saved index (rebuilt from the corpus when absent)");
    retrieve->add_option("--target", target_id, "target patent id")->required();
    retrieve->add_option("--k", retrieve_k, "result count");

    CLI::App* train = app.add_subcommand("train", "train the predictor");
    train->add_option("--in", in_path, "corpus JSONL")->required();
    train->add_option("--splits", splits_path, "splits JSON from the split command")->required();
    train->add_option("--out", out_path, "checkpoint file");
    train->add_option("--log", log_path, "JSONL step log");
    st.attach(train, true);

    CLI::App* eval = app.add_subcommand("eval", "metrics for a trained checkpoint");
    eval->add_option("--in", in_path, "corpus JSONL")->required();
    eval->add_option("--splits", splits_path, "splits JSON")->required();
    eval->add_option("--model", model_path, "checkpoint file")->required();
    eval->add_option("--split", split_name, "train, val, or test");

    CLI::App* explain = app.add_subcommand("explain", "claim-level evidence for one target");
    explain->add_option("--in", in_path, "corpus JSONL")->required();
    explain->add_option("--model", model_path, "checkpoint file")->required();
    explain->add_option("--target", target_id, "target patent id")->required();
    explain->add_option("--top-m", top_m, "backtracked claims per target claim");
    explain->add_flag("--mean", mean_agg, "mean instead of max over reference claims");
    explain->add_flag("--text", as_text, "render the terminal heatmap instead of JSON");

    CLI::App* synth = app.add_subcommand("synth", "generate the synthetic corpus");
    synth->add_option("--out", out_path, "corpus JSONL")->required();
    synth->add_option("--manifest", manifest_path, "generation manifest JSON");
    synth->add_option("--seed", synth_cfg.seed, "generation seed");
    synth->add_option("--priors", synth_cfg.num_prior, "granted prior count");
    synth->add_option("--targets", synth_cfg.num_targets, "labeled target count");
    synth->add_option("--topics", synth_cfg.topics, "topic count");
    synth->add_option("--theta", synth_cfg.theta, "novelty threshold on the replaced fraction");
    synth->add_option("--approval-rate", synth_cfg.approval_rate, "fraction of approved targets");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit of the full loss");
    gradcheck->add_option("--d-h", gc_dh, "embedding width");
    gradcheck->add_option("--heads", gc_heads, "attention heads");
    gradcheck->add_option("--layers", gc_layers, "encoder layers");
    gradcheck->add_option("--n", gc_n, "claims per patent");
    gradcheck->add_option("--k", gc_k, "reference count");
    gradcheck->add_option("--tol", gc_tol, "relative error tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 2;
    }

    try {
        if (*ingest) return run_ingest(in_path, out_path);
        if (*split) return run_split(in_path, out_path, split_spec);
        if (*index) return run_index(in_path, out_path);
        if (*retrieve) return run_retrieve(in_path, index_path, target_id, retrieve_k);
        if (*train) return run_train(st, in_path, splits_path, out_path, log_path);
        if (*eval) return run_eval(st, in_path, splits_path, model_path, split_name);
        if (*explain) return run_explain(st, in_path, model_path, target_id, top_m, mean_agg, as_text);
        if (*synth) return run_synth(synth_cfg, out_path, manifest_path);
        if (*gradcheck) return run_gradcheck(gc_dh, gc_heads, gc_layers, gc_n, gc_k, gc_tol);
    } catch (const ShapeError& e) {
        std::cerr << "ShapeError: " << e.what() << "\n";
    } catch (const NumericError& e) {
        std::cerr << "NumericError: " << e.what() << "\n";
    } catch (const TapeError& e) {
        std::cerr << "TapeError: " << e.what() << "\n";
    } catch (const EmptyPoolError& e) {
        std::cerr << "EmptyPoolError: " << e.what() << "\n";
    } catch (const ForwardReferenceError& e) {
        std::cerr << "ForwardReferenceError: " << e.what() << "\n";
    } catch (const ParseError& e) {
        std::cerr << "ParseError: " << e.what() << "\n";
    } catch (const EmptyPatentError& e) {
        std::cerr << "EmptyPatentError: " << e.what() << "\n";
    } catch (const DuplicateIdError& e) {
        std::cerr << "DuplicateIdError: " << e.what() << "\n";
    } catch (const ValidationError& e) {
        std::cerr << "ValidationError: " << e.what() << "\n";
    } catch (const NotIndexedError& e) {
        std::cerr << "NotIndexedError: " << e.what() << "\n";
    } catch (const MissingEmbeddingError& e) {
        std::cerr << "MissingEmbeddingError: " << e.what() << "\n";
    } catch (const ConfigError& e) {
        std::cerr << "ConfigError: " << e.what() << "\n";
    } catch (const FormatError& e) {
        std::cerr << "FormatError: " << e.what() << "\n";
    } catch (const InvalidClaimError& e) {
        std::cerr << "InvalidClaimError: " << e.what() << "\n";
    } catch (const EmptyReferenceError& e) {
        std::cerr << "EmptyReferenceError: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return 1;
}
