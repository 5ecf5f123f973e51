#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <chrono>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dispat/errors.hpp"
#include "dispat/rng.hpp"

namespace dispat {

enum class Status { Granted, Rejected, Pending };

inline std::string status_name(Status s) {
    switch (s) {
        case Status::Granted: return "granted";
        case Status::Rejected: return "rejected";
        default: return "pending";
    }
}

inline Status status_from_name(const std::string& s) {
    if (s == "granted") return Status::Granted;
    if (s == "rejected") return Status::Rejected;
    if (s == "pending") return Status::Pending;
    throw ValidationError("unknown status: " + s);
}

/// Days-since-epoch ordinal for an ISO yyyy-mm-dd date. Throws
/// ValidationError on anything unparseable or not a real calendar day.
inline int date_ordinal(const std::string& iso) {
    int y = 0, m = 0, d = 0;
    char dash1 = 0, dash2 = 0;
    std::istringstream ss(iso);
    ss >> y >> dash1 >> m >> dash2 >> d;
    if (!ss || dash1 != '-' || dash2 != '-' || !ss.eof() || iso.size() != 10)
        throw ValidationError("invalid date: " + iso);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw ValidationError("invalid date: " + iso);
    return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

/// One patent. Claims are stored pre-segmented, one string per claim with no
/// serial marker (the list position is the serial). `label` is present only
/// on target samples: 1 approved, 0 rejected.
struct PatentRecord {
    std::string id;
    std::string filing_date; // ISO yyyy-mm-dd
    int date_ord = 0;        // derived, days since epoch
    std::string ipc;
    std::vector<std::string> claims;
    std::optional<int> label;
    Status status = Status::Pending;

    bool is_target() const { return label.has_value(); }
};

inline void validate_record(PatentRecord& r) {
    if (r.id.empty()) throw ValidationError("record has empty id");
    r.date_ord = date_ordinal(r.filing_date);
    if (r.claims.empty()) throw ValidationError("record " + r.id + " has no claims");
    for (const std::string& c : r.claims)
        if (c.empty()) throw ValidationError("record " + r.id + " has an empty claim");
    if (r.label && *r.label != 0 && *r.label != 1)
        throw ValidationError("record " + r.id + " has label outside {0,1}");
}

inline PatentRecord record_from_json(const nlohmann::json& j) {
    PatentRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        r.filing_date = j.at("filing_date").get<std::string>();
        r.ipc = j.value("ipc", std::string{});
        r.claims = j.at("claims").get<std::vector<std::string>>();
        if (j.contains("label") && !j["label"].is_null()) r.label = j["label"].get<int>();
        r.status = status_from_name(j.value("status", std::string{"pending"}));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad record fields: ") + e.what());
    }
    validate_record(r);
    return r;
}

inline nlohmann::json record_to_json(const PatentRecord& r) {
    nlohmann::json j;
    j["id"] = r.id;
    j["filing_date"] = r.filing_date;
    j["ipc"] = r.ipc;
    j["claims"] = r.claims;
    if (r.label) j["label"] = *r.label;
    else j["label"] = nullptr;
    j["status"] = status_name(r.status);
    return j;
}

/// Immutable record collection, sorted by (filing_date, id) with an id
/// lookup. Build through ingest_* and treat as read-only afterwards.
class Corpus {
public:
    void add(PatentRecord r) {
        if (index_.count(r.id)) throw DuplicateIdError("duplicate id: " + r.id);
        index_[r.id] = records_.size();
        records_.push_back(std::move(r));
    }

    /// Sort by filing date (id breaks ties) and rebuild the lookup. Called
    /// once at the end of ingestion.
    void finalize() {
        std::sort(records_.begin(), records_.end(), [](const PatentRecord& a, const PatentRecord& b) {
            if (a.date_ord != b.date_ord) return a.date_ord < b.date_ord;
            return a.id < b.id;
        });
        index_.clear();
        for (std::size_t i = 0; i < records_.size(); ++i) index_[records_[i].id] = i;
    }

    const PatentRecord& by_id(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw ValidationError("no record with id " + id);
        return records_[it->second];
    }

    bool contains(const std::string& id) const { return index_.count(id) != 0; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const std::vector<PatentRecord>& records() const { return records_; }
    auto begin() const { return records_.begin(); }
    auto end() const { return records_.end(); }

private:
    std::vector<PatentRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Read JSONL (one record per line, blank lines skipped). Errors carry the
/// 1-based line number.
inline Corpus ingest_jsonl(std::istream& in) {
    Corpus corpus;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            corpus.add(record_from_json(j));
        } catch (const DuplicateIdError& e) {
            throw DuplicateIdError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    corpus.finalize();
    return corpus;
}

inline Corpus ingest_jsonl_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    return ingest_jsonl(in);
}

inline void write_jsonl(const Corpus& corpus, std::ostream& out) {
    for (const PatentRecord& r : corpus) out << record_to_json(r).dump() << "\n";
}

struct SplitSpec {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
    std::uint64_t seed = 0;
};

struct Splits {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

/// Shuffle the target ids under the seed and cut them into three groups
/// whose sizes come from largest-remainder apportionment of the ratios
/// (each size within 1 of its exact quota; earlier groups win remainder
/// ties). Only records carrying a label participate.
inline Splits split_corpus(const Corpus& corpus, const SplitSpec& spec) {
    if (spec.train <= 0 || spec.val <= 0 || spec.test <= 0)
        throw ConfigError("split ratios must be positive");
    if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1");

    std::vector<std::string> ids;
    for (const PatentRecord& r : corpus)
        if (r.is_target()) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end()); // shuffle from a canonical order
    SplitMix64 rng(spec.seed);
    deterministic_shuffle(ids, rng);

    const auto n = static_cast<long long>(ids.size());
    const double quotas[3] = {spec.train * n, spec.val * n, spec.test * n};
    long long sizes[3];
    double fracs[3];
    long long assigned = 0;
    for (int i = 0; i < 3; ++i) {
        sizes[i] = static_cast<long long>(std::floor(quotas[i]));
        fracs[i] = quotas[i] - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (fracs[i] > fracs[best]) best = i;
        ++sizes[best];
        fracs[best] = -1.0;
        ++assigned;
    }

    Splits s;
    auto it = ids.begin();
    s.train.assign(it, it + sizes[0]);
    it += sizes[0];
    s.val.assign(it, it + sizes[1]);
    it += sizes[1];
    s.test.assign(it, it + sizes[2]);
    return s;
}

inline nlohmann::json splits_to_json(const Splits& s, const SplitSpec& spec) {
    nlohmann::json j;
    j["ratios"] = {spec.train, spec.val, spec.test};
    j["seed"] = spec.seed;
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    return j;
}

inline Splits splits_from_json(const nlohmann::json& j) {
    Splits s;
    try {
        s.train = j.at("train").get<std::vector<std::string>>();
        s.val = j.at("val").get<std::vector<std::string>>();
        s.test = j.at("test").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("splits file: ") + e.what());
    }
    return s;
}

/// Counts, approval rate over labeled records, and claim histograms. When
/// splits are supplied the approval rate is also reported per split.
inline nlohmann::json corpus_stats(const Corpus& corpus, const Splits* splits = nullptr) {
    nlohmann::json j;
    long long granted = 0, rejected = 0, pending = 0, labeled = 0, approved = 0;
    std::map<int, long long> claim_count_hist;
    std::map<int, long long> claim_len_hist; // bucketed by 64 characters
    for (const PatentRecord& r : corpus) {
        switch (r.status) {
            case Status::Granted: ++granted; break;
            case Status::Rejected: ++rejected; break;
            case Status::Pending: ++pending; break;
        }
        if (r.label) {
            ++labeled;
            approved += *r.label;
        }
        claim_count_hist[static_cast<int>(r.claims.size())]++;
        for (const std::string& c : r.claims)
            claim_len_hist[static_cast<int>(c.size() / 64)]++;
    }
    j["records"] = corpus.size();
    j["granted"] = granted;
    j["rejected"] = rejected;
    j["pending"] = pending;
    j["labeled"] = labeled;
    j["approved"] = approved;
    j["approval_rate"] = labeled ? static_cast<double>(approved) / static_cast<double>(labeled) : 0.0;
    for (const auto& [k, v] : claim_count_hist) j["claim_count_hist"][std::to_string(k)] = v;
    for (const auto& [k, v] : claim_len_hist)
        j["claim_length_hist"][std::to_string(k * 64) + "-" + std::to_string(k * 64 + 63)] = v;

    if (splits) {
        auto rate = [&](const std::vector<std::string>& ids) {
            long long lab = 0, app = 0;
            for (const std::string& id : ids) {
                const PatentRecord& r = corpus.by_id(id);
                if (r.label) {
                    ++lab;
                    app += *r.label;
                }
            }
            nlohmann::json out;
            out["size"] = ids.size();
            out["approval_rate"] = lab ? static_cast<double>(app) / static_cast<double>(lab) : 0.0;
            return out;
        };
        j["splits"]["train"] = rate(splits->train);
        j["splits"]["val"] = rate(splits->val);
        j["splits"]["test"] = rate(splits->test);
    }
    return j;
}

/// Target ids with fewer than k granted records filed strictly earlier.
inline std::vector<std::string> low_reference_ids(const Corpus& corpus, int k) {
    // records are date-sorted, so one sweep counting granted docs suffices
    std::vector<std::string> out;
    for (const PatentRecord& r : corpus) {
        if (!r.is_target()) continue;
        long long earlier = 0;
        for (const PatentRecord& g : corpus) {
            if (g.status == Status::Granted && g.date_ord < r.date_ord) ++earlier;
            if (g.date_ord >= r.date_ord) break; // sorted: nothing later counts
        }
        if (earlier < k) out.push_back(r.id);
    }
    return out;
}

} // namespace dispat
