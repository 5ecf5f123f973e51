#pragma once

#include <algorithm>
#include <istream>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dispat/errors.hpp"

namespace dispat {

/// One numbered claim. `referenced` holds the indices named in the preamble;
/// independent claims have none. After validation all references point
/// strictly backward.
struct Claim {
    int index = 0; // 1-based serial
    std::string text;
    std::vector<int> referenced;
};

/// Reference structure over the claims of one patent. Edge (i, j) means
/// claim j refers to claim i; i < j always, so the graph is acyclic.
/// hierarchy[j-1] is the level of claim j: 0 for independent claims,
/// 1 + max parent level otherwise.
struct ClaimGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> hierarchy;
};

/// Reference-extraction rule. Ranges expand to every index in [lo, hi];
/// lists pull every integer out of the captured body; singles capture one
/// index. Applied in range, list, single order with matched spans blanked
/// between passes so a narrower rule cannot re-read part of a wider match.
struct RefPattern {
    enum class Kind { Single, List, Range };
    Kind kind = Kind::Single;
    std::string regex;
};

/// Built-in rules for English and Chinese preambles. Multi-byte literals are
/// written as alternations, never character classes, because std::regex works
/// on bytes.
inline std::vector<RefPattern> default_ref_patterns() {
    using K = RefPattern::Kind;
    return {
        {K::Range, R"(claims?\s+(\d+)\s*(?:to|through|-|–|—|~)\s*(\d+))"},
        {K::Range, "权利要求(\\d+)\\s*(?:至|到|-|—|~|～)\\s*(\\d+)"},
        {K::List, R"(claims?\s+(\d+(?:\s*(?:,\s*(?:or|and)|,|or|and)\s*(?:claims?\s+)?\d+)+))"},
        {K::List, "权利要求(\\d+(?:\\s*(?:或|、|和|及)\\s*(?:权利要求)?\\d+)+)"},
        {K::Single, R"(claims?\s+(\d+))"},
        {K::Single, "权利要求(\\d+)"},
    };
}

/// Pattern table file: JSON array of {"kind": "single"|"list"|"range",
/// "regex": "..."}.
inline std::vector<RefPattern> load_ref_patterns(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("pattern table: ") + e.what());
    }
    if (!j.is_array()) throw FormatError("pattern table: expected a JSON array");
    std::vector<RefPattern> out;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("kind") || !item.contains("regex"))
            throw FormatError("pattern table: each entry needs kind and regex");
        const std::string kind = item["kind"].get<std::string>();
        RefPattern p;
        if (kind == "single") p.kind = RefPattern::Kind::Single;
        else if (kind == "list") p.kind = RefPattern::Kind::List;
        else if (kind == "range") p.kind = RefPattern::Kind::Range;
        else throw FormatError("pattern table: unknown kind " + kind);
        p.regex = item["regex"].get<std::string>();
        try {
            std::regex probe(p.regex);
        } catch (const std::regex_error& e) {
            throw FormatError("pattern table: bad regex " + p.regex + ": " + e.what());
        }
        out.push_back(std::move(p));
    }
    if (out.empty()) throw FormatError("pattern table: empty");
    return out;
}

struct ParseOptions {
    bool strict = true;          // lenient drops bad references with a warning
    int max_claims = 20;         // claims past this serial are cut with a warning
    std::vector<RefPattern> patterns = default_ref_patterns();
};

namespace detail {

// Serial marker at the start of a line: optional indent, digits, then "."
// (ASCII, must be followed by whitespace or end of line so "2.5 cm" inside a
// claim body does not start a new item), "、" or "．" (full width, no
// trailing-space rule since Chinese text has no spaces).
inline bool match_serial_marker(const std::string& line, int& serial, std::size_t& after) {
    std::size_t p = 0;
    while (p < line.size() && (line[p] == ' ' || line[p] == '\t')) ++p;
    std::size_t d0 = p;
    while (p < line.size() && line[p] >= '0' && line[p] <= '9') ++p;
    if (p == d0 || p - d0 > 6) return false;
    long v = std::stol(line.substr(d0, p - d0));
    if (p < line.size() && line[p] == '.') {
        if (p + 1 < line.size() && line[p + 1] != ' ' && line[p + 1] != '\t') return false;
        serial = static_cast<int>(v);
        after = p + 1;
        return true;
    }
    static const std::string ideographic_comma = "\xe3\x80\x81"; // 、
    static const std::string fullwidth_stop = "\xef\xbc\x8e";    // ．
    for (const std::string& mark : {ideographic_comma, fullwidth_stop}) {
        if (line.compare(p, mark.size(), mark) == 0) {
            serial = static_cast<int>(v);
            after = p + mark.size();
            return true;
        }
    }
    return false;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<int> ints_in(const std::string& s) {
    std::vector<int> out;
    static const std::regex digits(R"(\d+)");
    for (auto it = std::sregex_iterator(s.begin(), s.end(), digits); it != std::sregex_iterator(); ++it)
        out.push_back(std::stoi(it->str()));
    return out;
}

} // namespace detail

/// Cut a raw claims block into (serial, text) items. Serial markers must run
/// 1, 2, ... without gaps or repeats; lines without a marker continue the
/// previous item. The marker itself is stripped from the text.
inline std::vector<Claim> split_claims(const std::string& raw) {
    std::vector<Claim> out;
    std::string line;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= raw.size()) {
        std::size_t nl = raw.find('\n', pos);
        if (nl == std::string::npos) {
            line = raw.substr(pos);
            pos = raw.size() + 1;
        } else {
            line = raw.substr(pos, nl - pos);
            pos = nl + 1;
        }
        ++line_no;
        int serial = 0;
        std::size_t after = 0;
        if (detail::match_serial_marker(line, serial, after)) {
            const int expect = static_cast<int>(out.size()) + 1;
            if (serial != expect)
                throw ParseError("claim serial " + std::to_string(serial) + " at line " +
                                 std::to_string(line_no) + ", expected " + std::to_string(expect));
            Claim c;
            c.index = serial;
            c.text = detail::trim(line.substr(after));
            out.push_back(std::move(c));
        } else {
            const std::string content = detail::trim(line);
            if (content.empty()) continue;
            if (out.empty())
                throw ParseError("content before first claim serial at line " + std::to_string(line_no));
            std::string& t = out.back().text;
            if (!t.empty()) t += ' ';
            t += content;
        }
    }
    if (out.empty()) throw EmptyPatentError("no claims found");
    for (const Claim& c : out) {
        if (c.text.empty())
            throw ParseError("claim " + std::to_string(c.index) + " has empty text");
    }
    return out;
}

/// Pull the referenced claim indices out of one claim's text. Wider rules
/// (ranges, then lists) run first and blank what they matched so the single
/// rule cannot pick digits out of an already-consumed phrase. The result is
/// deduplicated and sorted. In strict mode a reference at or past the claim's
/// own index raises ForwardReferenceError and a nonpositive or inverted range
/// raises ParseError; lenient mode drops the offender and records a warning.
inline std::vector<int> extract_references(const std::string& text, int index,
                                           const std::vector<RefPattern>& patterns,
                                           bool strict = true,
                                           std::vector<std::string>* warnings = nullptr) {
    std::string work = text;
    std::set<int> found;
    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back("claim " + std::to_string(index) + ": " + msg);
    };
    auto admit = [&](int ref) {
        if (ref >= index) {
            if (strict)
                throw ForwardReferenceError("claim " + std::to_string(index) +
                                            " references claim " + std::to_string(ref));
            warn("dropped forward reference to claim " + std::to_string(ref));
            return;
        }
        if (ref < 1) {
            if (strict) throw ParseError("claim " + std::to_string(index) + " references claim " + std::to_string(ref));
            warn("dropped reference to claim " + std::to_string(ref));
            return;
        }
        found.insert(ref);
    };

    for (RefPattern::Kind kind : {RefPattern::Kind::Range, RefPattern::Kind::List, RefPattern::Kind::Single}) {
        for (const RefPattern& p : patterns) {
            if (p.kind != kind) continue;
            const std::regex re(p.regex, std::regex::icase);
            // collect matches first, then blank them, so iteration never walks
            // a string it is mutating
            struct Hit { std::size_t pos, len; std::vector<std::string> groups; };
            std::vector<Hit> hits;
            for (auto it = std::sregex_iterator(work.begin(), work.end(), re); it != std::sregex_iterator(); ++it) {
                Hit h;
                h.pos = static_cast<std::size_t>(it->position(0));
                h.len = static_cast<std::size_t>(it->length(0));
                for (std::size_t g = 1; g < it->size(); ++g) h.groups.push_back(it->str(g));
                hits.push_back(std::move(h));
            }
            for (const Hit& h : hits) {
                if (kind == RefPattern::Kind::Range) {
                    if (h.groups.size() < 2) continue;
                    const int lo = std::stoi(h.groups[0]);
                    const int hi = std::stoi(h.groups[1]);
                    if (lo > hi) {
                        if (strict)
                            throw ParseError("claim " + std::to_string(index) + ": inverted range " +
                                             std::to_string(lo) + ".." + std::to_string(hi));
                        warn("dropped inverted range " + std::to_string(lo) + ".." + std::to_string(hi));
                    } else {
                        for (int r = lo; r <= hi; ++r) admit(r);
                    }
                } else if (kind == RefPattern::Kind::List) {
                    if (h.groups.empty()) continue;
                    for (int r : detail::ints_in(h.groups[0])) admit(r);
                } else {
                    if (h.groups.empty()) continue;
                    admit(std::stoi(h.groups[0]));
                }
                for (std::size_t k = 0; k < h.len; ++k) work[h.pos + k] = ' ';
            }
        }
    }
    return {found.begin(), found.end()};
}

/// Assemble the reference graph and levels. References must already be
/// validated (strictly backward), which also guarantees acyclicity.
inline ClaimGraph build_graph(const std::vector<Claim>& claims) {
    if (claims.empty()) throw EmptyPatentError("build_graph: no claims");
    ClaimGraph g;
    g.n = static_cast<int>(claims.size());
    g.hierarchy.assign(g.n, 0);
    for (const Claim& c : claims) {
        for (int r : c.referenced) {
            if (r < 1 || r >= c.index)
                throw ForwardReferenceError("claim " + std::to_string(c.index) +
                                            " references claim " + std::to_string(r));
            g.edges.emplace_back(r, c.index);
        }
    }
    std::sort(g.edges.begin(), g.edges.end());
    // indices are processed in serial order, so every parent level is final
    // before its children ask for it
    for (const Claim& c : claims) {
        int level = 0;
        for (int r : c.referenced) level = std::max(level, g.hierarchy[r - 1] + 1);
        g.hierarchy[c.index - 1] = level;
    }
    return g;
}

struct ParseResult {
    std::vector<Claim> claims;
    ClaimGraph graph;
    std::vector<std::string> warnings;
};

/// Full pipeline over pre-segmented claim texts (the corpus stores claims as
/// a list). Claims past max_claims are cut with a warning; backward-only
/// references mean the surviving prefix never loses a parent.
inline ParseResult parse_claim_texts(const std::vector<std::string>& texts, const ParseOptions& opt = {}) {
    if (texts.empty()) throw EmptyPatentError("no claims");
    ParseResult res;
    std::size_t use = texts.size();
    if (opt.max_claims > 0 && use > static_cast<std::size_t>(opt.max_claims)) {
        use = static_cast<std::size_t>(opt.max_claims);
        res.warnings.push_back("truncated to " + std::to_string(use) + " of " +
                               std::to_string(texts.size()) + " claims");
    }
    for (std::size_t i = 0; i < use; ++i) {
        Claim c;
        c.index = static_cast<int>(i) + 1;
        c.text = detail::trim(texts[i]);
        if (c.text.empty()) throw ParseError("claim " + std::to_string(c.index) + " has empty text");
        c.referenced = extract_references(c.text, c.index, opt.patterns, opt.strict, &res.warnings);
        res.claims.push_back(std::move(c));
    }
    res.graph = build_graph(res.claims);
    return res;
}

/// Same pipeline starting from one raw numbered block.
inline ParseResult parse_claims_block(const std::string& raw, const ParseOptions& opt = {}) {
    std::vector<Claim> items = split_claims(raw);
    std::vector<std::string> texts;
    texts.reserve(items.size());
    for (Claim& c : items) texts.push_back(std::move(c.text));
    return parse_claim_texts(texts, opt);
}

} // namespace dispat
