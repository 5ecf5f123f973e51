// Claim hierarchy parsing: segmentation, reference extraction across
// English/Chinese single/list/range phrasings, graph and level construction,
// strict-mode rejections.

#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <sstream>

#include "dispat/claims.hpp"

using namespace dispat;

namespace {

std::set<std::pair<int, int>> edge_set(const ClaimGraph& g) {
    return {g.edges.begin(), g.edges.end()};
}

} // namespace

TEST_CASE("split: two numbered claims") {
    auto claims = split_claims("1. A cup.\n2. The cup of claim 1, wherein the handle is wood.");
    REQUIRE(claims.size() == 2);
    REQUIRE(claims[0].index == 1);
    REQUIRE(claims[0].text == "A cup.");
    REQUIRE(claims[1].text.rfind("The cup of claim 1", 0) == 0);
}

TEST_CASE("split: single claim, multi-line continuation, indentation") {
    auto one = split_claims("1. A lone apparatus.");
    REQUIRE(one.size() == 1);

    auto cont = split_claims("1. A device\n   comprising a base\n   and a lid.\n2. The device of claim 1.");
    REQUIRE(cont.size() == 2);
    REQUIRE(cont[0].text == "A device comprising a base and a lid.");

    auto indented = split_claims("  1. Alpha.\n  2. Beta of claim 1.");
    REQUIRE(indented.size() == 2);
}

TEST_CASE("split: chinese enumeration markers") {
    auto comma = split_claims("1、一种加热装置。\n2、根据权利要求1所述的装置。");
    REQUIRE(comma.size() == 2);
    REQUIRE(comma[0].text == "一种加热装置。");

    auto fullwidth = split_claims("1．一种装置。\n2．根据权利要求1所述的装置。");
    REQUIRE(fullwidth.size() == 2);
}

TEST_CASE("split: decimal numbers inside a claim body do not start items") {
    auto claims = split_claims("1. A rod of diameter\n2.5 cm or longer.");
    // "2.5" has no space after the dot, so the line continues claim 1
    REQUIRE(claims.size() == 1);
    REQUIRE(claims[0].text == "A rod of diameter 2.5 cm or longer.");
}

TEST_CASE("split: malformed blocks are rejected with positions") {
    REQUIRE_THROWS_AS(split_claims("1. A.\n3. B."), ParseError);            // gap
    REQUIRE_THROWS_AS(split_claims("1. A.\n1. B."), ParseError);            // repeat
    REQUIRE_THROWS_AS(split_claims("2. Starts at two."), ParseError);       // wrong start
    REQUIRE_THROWS_AS(split_claims("preamble text\n1. A."), ParseError);    // leading prose
    REQUIRE_THROWS_AS(split_claims(""), EmptyPatentError);                  // nothing
    REQUIRE_THROWS_AS(split_claims("  \n  \n"), EmptyPatentError);
    REQUIRE_THROWS_AS(split_claims("1.\n2. B."), ParseError);               // empty text

    try {
        split_claims("1. A.\n3. B.");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("references: english singles, lists, ranges") {
    const auto pats = default_ref_patterns();
    using V = std::vector<int>;

    REQUIRE(extract_references("The cup of claim 1, wherein.", 2, pats) == V{1});
    REQUIRE(extract_references("A standalone widget.", 1, pats).empty());
    REQUIRE(extract_references("The cup of claims 1 and 3.", 4, pats) == V{1, 3});
    REQUIRE(extract_references("The cup of claims 1, 2 and 3.", 4, pats) == V{1, 2, 3});
    REQUIRE(extract_references("The cup of claims 1, 2, and 3.", 5, pats) == V{1, 2, 3});
    REQUIRE(extract_references("The cup of claim 2 or claim 3.", 5, pats) == V{2, 3});
    REQUIRE(extract_references("Device of any one of claims 1 to 3.", 4, pats) == V{1, 2, 3});
    REQUIRE(extract_references("Device of any one of claims 1-3.", 4, pats) == V{1, 2, 3});
    REQUIRE(extract_references("Device of claims 2\xe2\x80\x93"
                               "4.",
                               5, pats) == V{2, 3, 4}); // en dash range
    REQUIRE(extract_references("Per claims 1 to 2 or claim 4.", 5, pats) == V{1, 2, 4});
    // mentions are deduplicated and sorted
    REQUIRE(extract_references("Claim 3 depends from claim 1; see claim 1.", 4, pats) == V{1, 3});
}

TEST_CASE("references: chinese singles, lists, ranges") {
    const auto pats = default_ref_patterns();
    using V = std::vector<int>;

    REQUIRE(extract_references("根据权利要求1所述的装置。", 2, pats) == V{1});
    REQUIRE(extract_references("根据权利要求1或3所述的装置。", 4, pats) == V{1, 3});
    REQUIRE(extract_references("根据权利要求1、2和3所述的装置。", 4, pats) == V{1, 2, 3});
    REQUIRE(extract_references("根据权利要求1至3中任一项所述的装置。", 4, pats) == V{1, 2, 3});
    REQUIRE(extract_references("根据权利要求2到4所述。", 5, pats) == V{2, 3, 4});
}

TEST_CASE("references: strict mode rejects forward, self, nonpositive, inverted") {
    const auto pats = default_ref_patterns();
    REQUIRE_THROWS_AS(extract_references("Refering to claim 2.", 1, pats), ForwardReferenceError);
    REQUIRE_THROWS_AS(extract_references("The cup of claim 2.", 2, pats), ForwardReferenceError);
    REQUIRE_THROWS_AS(extract_references("Per claim 0.", 3, pats), ParseError);
    REQUIRE_THROWS_AS(extract_references("Per claims 3 to 1.", 5, pats), ParseError);
}

TEST_CASE("references: lenient mode drops bad references with warnings") {
    const auto pats = default_ref_patterns();
    std::vector<std::string> warnings;
    auto refs = extract_references("Based on claim 5 and claim 1.", 2, pats, false, &warnings);
    REQUIRE(refs == std::vector<int>{1});
    REQUIRE(warnings.size() == 1);
    REQUIRE(warnings[0].find("claim 5") != std::string::npos);
}

TEST_CASE("graph: two-node, chain, fan, diamond structures") {
    {
        auto res = parse_claims_block("1. A cup.\n2. The cup of claim 1.");
        REQUIRE(edge_set(res.graph) == std::set<std::pair<int, int>>{{1, 2}});
        REQUIRE(res.graph.hierarchy == std::vector<int>{0, 1});
    }
    {
        auto res = parse_claims_block("1. A. \n2. Per claim 1.\n3. Per claim 2.");
        REQUIRE(res.graph.hierarchy == std::vector<int>{0, 1, 2});
    }
    {
        auto res = parse_claims_block("1. A.\n2. B.\n3. Per claims 1 and 2.");
        REQUIRE(res.graph.hierarchy == std::vector<int>{0, 0, 1});
    }
    {
        auto res = parse_claims_block("1. A.\n2. Per claim 1.\n3. Per claim 1.\n4. Per claims 2 and 3.");
        REQUIRE(res.graph.hierarchy == std::vector<int>{0, 1, 1, 2});
    }
}

TEST_CASE("graph: four-claim patent where claim 4 refines claims 1 and 3") {
    auto res = parse_claims_block(
        "1. A heating device comprising a body.\n"
        "2. The device of claim 1, wherein the body is steel.\n"
        "3. The device of claim 1, further comprising a sensor.\n"
        "4. The device of claims 1 and 3, wherein the sensor is infrared.");
    REQUIRE(res.graph.n == 4);
    REQUIRE(edge_set(res.graph) == std::set<std::pair<int, int>>{{1, 2}, {1, 3}, {1, 4}, {3, 4}});
    REQUIRE(res.graph.hierarchy == std::vector<int>{0, 1, 1, 2});
}

TEST_CASE("graph: empty claim list is rejected") {
    REQUIRE_THROWS_AS(build_graph({}), EmptyPatentError);
    REQUIRE_THROWS_AS(parse_claim_texts({}), EmptyPatentError);
}

TEST_CASE("parse: cap truncates with a warning, prefix keeps its parents") {
    std::vector<std::string> texts;
    texts.push_back("A base widget.");
    for (int i = 2; i <= 25; ++i)
        texts.push_back("The widget of claim " + std::to_string(i - 1) + ".");
    ParseOptions opt;
    opt.max_claims = 20;
    auto res = parse_claim_texts(texts, opt);
    REQUIRE(res.claims.size() == 20);
    REQUIRE(res.graph.n == 20);
    REQUIRE(res.graph.hierarchy[19] == 19); // chain survives intact to the cap
    REQUIRE_FALSE(res.warnings.empty());
    REQUIRE(res.warnings[0].find("truncated") != std::string::npos);
}

TEST_CASE("parse: level-0 count equals refless count across random graphs") {
    // random DAGs with backward references only
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::uint64_t state = seed * 0x9e3779b97f4a7c15ULL;
        auto rnd = [&]() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            return state;
        };
        std::vector<std::string> texts;
        const int n = 3 + static_cast<int>(rnd() % 8);
        std::vector<bool> has_ref(n + 1, false);
        for (int i = 1; i <= n; ++i) {
            if (i == 1 || rnd() % 3 == 0) {
                texts.push_back("Independent item " + std::to_string(i) + ".");
            } else {
                const int r = 1 + static_cast<int>(rnd() % (i - 1));
                texts.push_back("Item per claim " + std::to_string(r) + ".");
                has_ref[i] = true;
            }
        }
        auto res = parse_claim_texts(texts);
        int roots = 0, refless = 0;
        for (int i = 0; i < res.graph.n; ++i)
            if (res.graph.hierarchy[i] == 0) ++roots;
        for (const Claim& c : res.claims)
            if (c.referenced.empty()) ++refless;
        REQUIRE(roots == refless);
        for (const Claim& c : res.claims)
            for (int r : c.referenced)
                REQUIRE(res.graph.hierarchy[r - 1] < res.graph.hierarchy[c.index - 1]);
    }
}

TEST_CASE("parse: re-parsing stored claim texts reproduces the graph") {
    auto first = parse_claims_block(
        "1. A pump.\n2. The pump of claim 1.\n3. The pump of claims 1 and 2.");
    std::vector<std::string> stored;
    for (const Claim& c : first.claims) stored.push_back(c.text);
    auto second = parse_claim_texts(stored);
    REQUIRE(first.graph.edges == second.graph.edges);
    REQUIRE(first.graph.hierarchy == second.graph.hierarchy);
}

TEST_CASE("pattern table: load, validate, apply") {
    std::istringstream good(R"json([
        {"kind": "single", "regex": "item no\\. (\\d+)"},
        {"kind": "range", "regex": "items (\\d+) up to (\\d+)"}
    ])json");
    auto pats = load_ref_patterns(good);
    REQUIRE(pats.size() == 2);
    REQUIRE(extract_references("see item no. 2", 3, pats) == std::vector<int>{2});
    REQUIRE(extract_references("see items 1 up to 3", 4, pats) == std::vector<int>{1, 2, 3});

    std::istringstream bad_kind(R"([{"kind": "fancy", "regex": "x"}])");
    REQUIRE_THROWS_AS(load_ref_patterns(bad_kind), FormatError);
    std::istringstream bad_regex(R"([{"kind": "single", "regex": "(unclosed"}])");
    REQUIRE_THROWS_AS(load_ref_patterns(bad_regex), FormatError);
    std::istringstream not_array(R"({"kind": "single"})");
    REQUIRE_THROWS_AS(load_ref_patterns(not_array), FormatError);
    std::istringstream empty_arr("[]");
    REQUIRE_THROWS_AS(load_ref_patterns(empty_arr), FormatError);
}
