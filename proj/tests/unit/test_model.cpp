#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dispat/drl.hpp"
#include "dispat/gradcheck.hpp"
#include "dispat/model.hpp"
#include "reference_model.hpp"

using namespace dispat;

namespace {

PatentInput random_input(int n, const ModelConfig& cfg, std::uint64_t seed,
                         std::vector<std::pair<int, int>> edges = {},
                         std::vector<int> levels = {}) {
    PatentInput in;
    in.id = "T" + std::to_string(seed);
    in.n = n;
    in.levels = levels.empty() ? std::vector<int>(static_cast<std::size_t>(n), 0) : std::move(levels);
    in.edges = std::move(edges);
    in.content = Tensor::zeros(cfg.n_max, cfg.d_h);
    SplitMix64 rng(seed);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < cfg.d_h; ++j) in.content.at(i, j) = rng.next_range(-1.0, 1.0);
    return in;
}

ModelConfig tiny_config(int d_h, int heads, int layers, int n_max) {
    ModelConfig cfg;
    cfg.d_h = d_h;
    cfg.heads = heads;
    cfg.layers = layers;
    cfg.n_max = n_max;
    return cfg;
}

double abs_sum(const Tensor& t) {
    double s = 0.0;
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) s += std::abs(t.at(i, j));
    return s;
}

void zero_head_params(ParamStore& store) {
    for (const char* b : {"sim", "spe"}) {
        store.get(drl::gate_param(b, "w1")).value.fill(0.0);
        store.get(drl::gate_param(b, "w2")).value.fill(0.0);
    }
    store.get("classifier.wp").value.fill(0.0);
}

} // namespace

TEST_CASE("gate values at zero parameters") {
    ModelConfig cfg = tiny_config(6, 2, 1, 5);
    Model model(cfg);
    zero_head_params(model.params());

    Tape tape;
    SplitMix64 rng(4);
    Tensor h = Tensor::zeros(cfg.n_max, cfg.d_h);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < cfg.d_h; ++j) h.at(i, j) = rng.next_normal();
    Var g = drl::claim_gates(tape, tape.constant(h), model.params(), cfg, "sim", 3);
    REQUIRE(g.rows() == cfg.n_max);
    REQUIRE(g.cols() == 1);
    for (int i = 0; i < 3; ++i) CHECK(g.val().at(i, 0) == 0.5);
    for (int i = 3; i < cfg.n_max; ++i) CHECK(g.val().at(i, 0) == 0.0);
}

TEST_CASE("gate matches direct recomputation") {
    ModelConfig cfg = tiny_config(10, 2, 1, 6);
    cfg.d_g = 7;
    Model model(cfg);
    SplitMix64 r(15);
    fill_normal(model.params().get(drl::gate_param("spe", "b1")).value, 0.3, r);
    fill_normal(model.params().get(drl::gate_param("spe", "b2")).value, 0.3, r);

    Tensor h = Tensor::zeros(cfg.n_max, cfg.d_h);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < cfg.d_h; ++j) h.at(i, j) = r.next_range(-2.0, 2.0);

    Tape tape;
    Var g = drl::claim_gates(tape, tape.constant(h), model.params(), cfg, "spe", 4);
    refm::Weights w = refm::snapshot(model.params(), cfg);
    std::vector<double> want = refm::gates(refm::from_tensor(h), w.spe, 4, cfg.n_max);
    for (int i = 0; i < cfg.n_max; ++i) {
        CHECK(g.val().at(i, 0) == Catch::Approx(want[static_cast<std::size_t>(i)]).margin(1e-14));
        CHECK(g.val().at(i, 0) >= 0.0);
        CHECK(g.val().at(i, 0) < 1.0);
    }
}

TEST_CASE("branch gating scales whole rows") {
    ModelConfig cfg = tiny_config(8, 2, 1, 4);
    Model model(cfg);
    PatentInput in = random_input(3, cfg, 8, {{1, 2}, {1, 3}}, {0, 1, 1});

    Tape tape;
    Model::EncodedTarget t = model.encode_target(tape, in);
    Var g_sim = drl::claim_gates(tape, t.h, model.params(), cfg, "sim", in.n);
    for (int i = 0; i < cfg.n_max; ++i)
        for (int j = 0; j < cfg.d_h; ++j)
            CHECK(t.h_sim.val().at(i, j) == g_sim.val().at(i, 0) * t.h.val().at(i, j));
}

TEST_CASE("classifier at zero parameters is maximally unsure") {
    ModelConfig cfg = tiny_config(6, 2, 1, 4);
    Model model(cfg);
    zero_head_params(model.params());
    PatentInput in = random_input(2, cfg, 21, {{1, 2}}, {0, 1});

    Tape tape;
    Model::SampleOut out = model.forward(tape, in, {});
    CHECK(out.y_hat == 0.5);
    CHECK(out.l_clf == 0.0); // unlabeled target

    PatentInput labeled = in;
    labeled.label = 1;
    Tape t2;
    Model::SampleOut out2 = model.forward(t2, labeled, {});
    CHECK(out2.l_clf == Catch::Approx(std::log(2.0)).margin(1e-15));
    CHECK(out2.loss.val().at(0, 0) == Catch::Approx(std::log(2.0)).margin(1e-15));
}

TEST_CASE("cross entropy clamps extreme probabilities") {
    Tape tape;
    Var sure = tape.constant(Tensor::scalar(1.0));
    Var l0 = drl::bce_loss(tape, sure, 0);
    Var l1 = drl::bce_loss(tape, sure, 1);
    CHECK(l0.val().at(0, 0) == -std::log(1.0 - (1.0 - 1e-12)));
    CHECK(l1.val().at(0, 0) == Catch::Approx(1e-12).margin(1e-13));
    CHECK(std::isfinite(l0.val().at(0, 0)));

    Var zero = tape.constant(Tensor::scalar(0.0));
    Var l2 = drl::bce_loss(tape, zero, 1);
    CHECK(l2.val().at(0, 0) == Catch::Approx(-std::log(1e-12)).epsilon(1e-9));
}

TEST_CASE("no references means no contrastive term") {
    ModelConfig cfg = tiny_config(8, 2, 2, 4);
    Model model(cfg);
    PatentInput in = random_input(3, cfg, 33, {{1, 2}}, {0, 1, 0});
    in.label = 0;

    Tape tape;
    Model::SampleOut out = model.forward(tape, in, {});
    CHECK(out.l_sim == 0.0);
    CHECK(out.l_spe == 0.0);
    CHECK(out.l_con == 0.0);
    CHECK(out.loss.val().at(0, 0) == out.l_clf);
}

TEST_CASE("full forward matches the reference") {
    ModelConfig cfg = tiny_config(16, 4, 2, 6);
    cfg.d_g = 12;
    Model model(cfg);
    model.params().get("encoder.r0").value.at(0, 0) = 0.15;
    model.params().get("encoder.r1").value.at(0, 0) = -0.25;

    PatentInput target = random_input(4, cfg, 51, {{1, 2}, {1, 3}, {3, 4}}, {0, 1, 1, 2});
    target.label = 1;
    PatentInput ref1 = random_input(3, cfg, 52, {{1, 2}, {2, 3}}, {0, 1, 2});
    PatentInput ref2 = random_input(6, cfg, 53, {{1, 2}}, {0, 1, 0, 0, 0, 0});

    Tape tape;
    Model::SampleOut out = model.forward(tape, target, {&ref1, &ref2});
    refm::Fwd want = refm::forward(target, {&ref1, &ref2}, refm::snapshot(model.params(), cfg), cfg);

    CHECK(out.y_hat == Catch::Approx(want.y_hat).margin(1e-12));
    CHECK(out.l_sim == Catch::Approx(want.l_sim).margin(1e-12));
    CHECK(out.l_spe == Catch::Approx(want.l_spe).margin(1e-12));
    CHECK(out.l_clf == Catch::Approx(want.l_clf).margin(1e-12));
    CHECK(out.loss.val().at(0, 0) == Catch::Approx(want.loss).margin(1e-12));

    SECTION("loss weights scale each term") {
        ModelConfig weighted = cfg;
        weighted.w_sim = 0.5;
        weighted.w_spe = 0.25;
        weighted.w_clf = 2.0;
        Model m2(weighted);
        // same seed, same parameter values
        Tape t2;
        Model::SampleOut o2 = m2.forward(t2, target, {&ref1, &ref2});
        CHECK(o2.loss.val().at(0, 0) ==
              Catch::Approx(0.5 * o2.l_sim + 0.25 * o2.l_spe + 2.0 * o2.l_clf).margin(1e-12));
    }
}

TEST_CASE("ablations cut their mechanisms") {
    ModelConfig cfg = tiny_config(8, 2, 2, 4);
    PatentInput target = random_input(3, cfg, 61, {{1, 2}, {2, 3}}, {0, 1, 2});
    target.label = 1;
    PatentInput ref = random_input(2, cfg, 62, {{1, 2}}, {0, 1});

    SECTION("no_brr drops references even when provided") {
        ModelConfig c = cfg;
        c.no_brr = true;
        Model m(c);
        Tape tape;
        Model::SampleOut out = m.forward(tape, target, {&ref});
        CHECK(out.l_con == 0.0);
        CHECK(out.loss.val().at(0, 0) == out.l_clf);
    }
    SECTION("no_drl zeroes the contrastive loss") {
        ModelConfig c = cfg;
        c.no_drl = true;
        Model m(c);
        Tape tape;
        Model::SampleOut out = m.forward(tape, target, {&ref});
        CHECK(out.l_con == 0.0);
    }
    SECTION("zero_ref_bias stops gradients to the bias pair") {
        ModelConfig c = cfg;
        c.zero_ref_bias = true;
        Model m(c);
        Tape tape;
        Model::SampleOut out = m.forward(tape, target, {&ref});
        tape.backward(out.loss);
        CHECK(m.params().get("encoder.r0").grad.at(0, 0) == 0.0);
        CHECK(m.params().get("encoder.r1").grad.at(0, 0) == 0.0);
        CHECK(abs_sum(m.params().get(enc::layer_param(0, "wq")).grad) > 0.0);
    }
    SECTION("no_hier_emb stops gradients to the level table") {
        ModelConfig c = cfg;
        c.no_hier_emb = true;
        Model m(c);
        Tape tape;
        Model::SampleOut out = m.forward(tape, target, {&ref});
        tape.backward(out.loss);
        CHECK(abs_sum(m.params().get("encoder.hier_table").grad) == 0.0);
    }
    SECTION("detach_refs keeps values and cuts the reference gradient path") {
        Model plain(cfg);
        ModelConfig c = cfg;
        c.detach_refs = true;
        Model detached(c);

        Tape t1, t2;
        Model::SampleOut a = plain.forward(t1, target, {&ref});
        Model::SampleOut b = detached.forward(t2, target, {&ref});
        CHECK(a.loss.val().at(0, 0) == b.loss.val().at(0, 0));

        t1.backward(a.loss);
        t2.backward(b.loss);
        const Tensor& ga = plain.params().get(enc::layer_param(0, "wq")).grad;
        const Tensor& gb = detached.params().get(enc::layer_param(0, "wq")).grad;
        double diff = 0.0;
        for (int i = 0; i < ga.rows(); ++i)
            for (int j = 0; j < ga.cols(); ++j) diff += std::abs(ga.at(i, j) - gb.at(i, j));
        CHECK(diff > 1e-9);
    }
}

TEST_CASE("full-model gradients match finite differences") {
    ModelConfig cfg = tiny_config(8, 2, 2, 4);
    Model model(cfg);
    model.params().get("encoder.r0").value.at(0, 0) = 0.05;
    model.params().get("encoder.r1").value.at(0, 0) = -0.1;

    PatentInput target = random_input(3, cfg, 71, {{1, 2}, {1, 3}}, {0, 1, 1});
    target.label = 1;
    PatentInput ref1 = random_input(2, cfg, 72, {{1, 2}}, {0, 1});
    PatentInput ref2 = random_input(4, cfg, 73, {{1, 2}, {3, 4}}, {0, 1, 0, 1});
    std::vector<const PatentInput*> refs{&ref1, &ref2};

    auto loss_fn = [&](bool with_grad) {
        Tape tape;
        Model::SampleOut out = model.forward(tape, target, refs);
        if (with_grad) tape.backward(out.loss);
        return out.loss.val().at(0, 0);
    };
    GradCheckReport rep = grad_check(model.params(), loss_fn);
    INFO("worst " << rep.worst_param << " rel " << rep.max_rel_err);
    CHECK(rep.ok(1e-4));
}

TEST_CASE("featurized records carry graph and embeddings") {
    ModelConfig cfg = tiny_config(16, 4, 2, 8);
    HashedNgramProvider provider(cfg.d_h, cfg.seed, cfg.w);

    PatentRecord rec;
    rec.id = "CN100";
    rec.filing_date = "2015-03-02";
    rec.date_ord = date_ordinal(rec.filing_date);
    rec.status = Status::Granted;
    rec.label = 1;
    rec.claims = {
        "A heating device comprising a ceramic core.",
        "The device according to claim 1, further comprising a sensor.",
        "The device according to claim 1, wherein the core is tubular.",
        "The device according to claim 3, wherein the tube is sealed.",
    };

    PatentInput in = featurize_record(rec, cfg, provider);
    CHECK(in.id == "CN100");
    CHECK(in.n == 4);
    CHECK(in.levels == std::vector<int>{0, 1, 1, 2});
    CHECK(in.edges == std::vector<std::pair<int, int>>{{1, 2}, {1, 3}, {3, 4}});
    CHECK(in.label == 1);

    for (int i = 0; i < 4; ++i) {
        Tensor e = provider.embed(rec.id, i + 1, rec.claims[static_cast<std::size_t>(i)]);
        for (int j = 0; j < cfg.d_h; ++j) CHECK(in.content.at(i, j) == e.at(0, j));
    }
    for (int i = 4; i < cfg.n_max; ++i)
        for (int j = 0; j < cfg.d_h; ++j) CHECK(in.content.at(i, j) == 0.0);

    SECTION("fc_graph swaps in all pairs but keeps parsed levels") {
        ModelConfig fc = cfg;
        fc.fc_graph = true;
        PatentInput dense = featurize_record(rec, fc, provider);
        CHECK(dense.edges.size() == 6);
        CHECK(dense.levels == std::vector<int>{0, 1, 1, 2});
    }
    SECTION("claim cap truncates") {
        ModelConfig small = cfg;
        small.n_max = 2;
        PatentInput cut = featurize_record(rec, small, provider);
        CHECK(cut.n == 2);
        CHECK(cut.edges == std::vector<std::pair<int, int>>{{1, 2}});
    }
    SECTION("dimension mismatch is rejected") {
        HashedNgramProvider wrong(cfg.d_h + 1, cfg.seed, cfg.w);
        CHECK_THROWS_AS(featurize_record(rec, cfg, wrong), ConfigError);
    }
}

TEST_CASE("training forward consumes dropout randomness reproducibly") {
    ModelConfig cfg = tiny_config(8, 2, 2, 4);
    cfg.dropout = 0.2;
    Model model(cfg);
    PatentInput target = random_input(3, cfg, 81, {{1, 2}}, {0, 1, 0});
    target.label = 0;
    PatentInput ref = random_input(2, cfg, 82, {{1, 2}}, {0, 1});

    SplitMix64 r1(5), r2(5);
    Tape t1, t2;
    Model::SampleOut a = model.forward(t1, target, {&ref}, true, &r1);
    Model::SampleOut b = model.forward(t2, target, {&ref}, true, &r2);
    CHECK(a.loss.val().at(0, 0) == b.loss.val().at(0, 0));
    CHECK(a.y_hat == b.y_hat);
}
