#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "dispat/bm25.hpp"
#include "dispat/claims.hpp"
#include "dispat/synthgen.hpp"

using namespace dispat;

namespace {

SynthConfig tiny_synth(std::uint64_t seed = 3) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.num_prior = 60;
    cfg.num_targets = 80;
    cfg.topics = 6;
    cfg.vocab_core = 120;
    cfg.vocab_novel = 4000;
    cfg.topic_core_tokens = 16;
    cfg.claims_min = 3;
    cfg.claims_max = 6;
    cfg.body_min = 5;
    cfg.body_max = 9;
    return cfg;
}

std::string corpus_bytes(const Corpus& c) {
    std::ostringstream os;
    write_jsonl(c, os);
    return os.str();
}

} // namespace

TEST_CASE("generation is byte identical for a fixed config") {
    SynthResult a = generate_corpus(tiny_synth());
    SynthResult b = generate_corpus(tiny_synth());
    CHECK(corpus_bytes(a.corpus) == corpus_bytes(b.corpus));
    CHECK(a.manifest.dump() == b.manifest.dump());

    SynthResult c = generate_corpus(tiny_synth(99));
    CHECK(corpus_bytes(a.corpus) != corpus_bytes(c.corpus));
}

TEST_CASE("corpus composition follows the config") {
    SynthConfig cfg = tiny_synth();
    SynthResult r = generate_corpus(cfg);
    CHECK(r.corpus.size() == static_cast<std::size_t>(cfg.num_prior + cfg.num_targets));

    int priors = 0, targets = 0, approved = 0;
    int last_prior_date = 0, first_target_date = 1 << 30;
    for (const PatentRecord& rec : r.corpus) {
        if (rec.is_target()) {
            ++targets;
            approved += *rec.label;
            CHECK(rec.status == Status::Pending);
            first_target_date = std::min(first_target_date, rec.date_ord);
        } else {
            ++priors;
            CHECK(rec.status == Status::Granted);
            last_prior_date = std::max(last_prior_date, rec.date_ord);
        }
    }
    CHECK(priors == cfg.num_prior);
    CHECK(targets == cfg.num_targets);
    CHECK(approved == std::lround(cfg.approval_rate * cfg.num_targets));
    CHECK(last_prior_date < first_target_date);
}

TEST_CASE("every generated record parses strictly") {
    SynthConfig cfg = tiny_synth();
    SynthResult r = generate_corpus(cfg);
    ParseOptions opt;
    opt.max_claims = cfg.claims_max;
    for (const PatentRecord& rec : r.corpus) {
        ParseResult parsed = parse_claim_texts(rec.claims, opt);
        CHECK(parsed.graph.n == static_cast<int>(rec.claims.size()));
        CHECK(parsed.warnings.empty());
        // claim 1 independent, the rest each name exactly one earlier claim
        CHECK(parsed.claims[0].referenced.empty());
        for (std::size_t j = 1; j < parsed.claims.size(); ++j)
            CHECK(parsed.claims[j].referenced.size() == 1);
    }
}

TEST_CASE("labels follow the replaced-fraction rule") {
    SynthConfig cfg = tiny_synth();
    SynthResult r = generate_corpus(cfg);
    REQUIRE(r.targets.size() == static_cast<std::size_t>(cfg.num_targets));
    for (const SynthTargetInfo& t : r.targets) {
        CHECK((t.rho >= cfg.theta) == (t.label == 1));
        CHECK(t.rho >= 0.0);
        CHECK(t.rho <= 1.0);
        REQUIRE(r.corpus.contains(t.source_prior));
        CHECK(r.corpus.by_id(t.source_prior).status == Status::Granted);
        CHECK(*r.corpus.by_id(t.id).label == t.label);
    }
}

TEST_CASE("manifest lists every target") {
    SynthConfig cfg = tiny_synth();
    SynthResult r = generate_corpus(cfg);
    REQUIRE(r.manifest["targets"].size() == static_cast<std::size_t>(cfg.num_targets));
    CHECK(r.manifest["approved"].get<int>() + r.manifest["rejected"].get<int>() == cfg.num_targets);
    const auto& first = r.manifest["targets"][0];
    CHECK(first.contains("id"));
    CHECK(first.contains("source_prior"));
    CHECK(first.contains("rho"));
    CHECK(first.contains("label"));
    CHECK(first["id"] == r.targets[0].id);
    CHECK(first["rho"] == r.targets[0].rho);
}

TEST_CASE("infeasible configs are rejected") {
    SynthConfig high = tiny_synth();
    high.theta = 0.75; // theta + margin above rho_max, approved band empty
    CHECK_THROWS_AS(generate_corpus(high), ConfigError);

    SynthConfig low = tiny_synth();
    low.theta = 0.10; // theta - margin below rho_min, rejected band empty
    CHECK_THROWS_AS(generate_corpus(low), ConfigError);

    SynthConfig slim = tiny_synth();
    slim.margin = 0.02; // under the rounding shift of the shortest body
    CHECK_THROWS_AS(generate_corpus(slim), ConfigError);

    SynthConfig overlap = tiny_synth();
    overlap.target_date0 = "2010-02-01"; // inside the prior date range
    CHECK_THROWS_AS(generate_corpus(overlap), ConfigError);

    SynthConfig inverted = tiny_synth();
    inverted.claims_min = 5;
    inverted.claims_max = 4;
    CHECK_THROWS_AS(generate_corpus(inverted), ConfigError);

    SynthConfig subset = tiny_synth();
    subset.topic_core_tokens = subset.vocab_core + 1;
    CHECK_THROWS_AS(generate_corpus(subset), ConfigError);
}

TEST_CASE("an all-approved plan needs no rejected band") {
    SynthConfig cfg = tiny_synth();
    cfg.num_targets = 10;
    cfg.approval_rate = 1.0;
    cfg.rho_min = 0.0; // would break the rejected band if one were needed
    SynthResult r = generate_corpus(cfg);
    for (const SynthTargetInfo& t : r.targets) CHECK(t.label == 1);
}

TEST_CASE("retrieval finds the planted source prior") {
    SynthConfig cfg = tiny_synth(7);
    cfg.num_prior = 100;
    cfg.num_targets = 120;
    SynthResult r = generate_corpus(cfg);
    Bm25Index idx = Bm25Index::build(r.corpus);
    int hits = 0;
    for (const SynthTargetInfo& t : r.targets) {
        auto ret = idx.top_k_base_reference(r.corpus.by_id(t.id), 1);
        REQUIRE_FALSE(ret.refs.empty());
        if (ret.refs[0].id == t.source_prior) ++hits;
    }
    const double rate = static_cast<double>(hits) / static_cast<double>(r.targets.size());
    INFO("top-1 hit rate " << rate);
    CHECK(rate >= 0.95);
}

TEST_CASE("date rendering inverts the ordinal") {
    const int base = date_ordinal("2010-01-01");
    for (int off : {0, 30, 31, 58, 59, 364, 365, 730, 1000}) {
        const std::string iso = synth_detail::date_for(base, off);
        CHECK(date_ordinal(iso) == base + off);
    }
    CHECK(synth_detail::date_for(base, 0) == "2010-01-01");
    CHECK(synth_detail::date_for(base, 31) == "2010-02-01");
}
