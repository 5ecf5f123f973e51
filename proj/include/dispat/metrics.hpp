#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "dispat/errors.hpp"

namespace dispat {

/// Binary classification metrics at the 0.5 threshold, class 1 = approved.
struct Metrics {
    double acc = 0.0;
    std::optional<double> auc; // absent when the labels are single-class
    double macro_f1 = 0.0;
    std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
};

/// Tie-aware rank AUC: a positive-negative pair scores 1 when the positive
/// is ranked higher, 0.5 on an exact tie. Counting is integral, so the
/// result equals exhaustive pair summation bit for bit.
inline std::optional<double> rank_auc(const std::vector<double>& scores,
                                      const std::vector<int>& labels) {
    std::vector<double> neg;
    std::vector<double> pos;
    for (std::size_t i = 0; i < scores.size(); ++i)
        (labels[i] == 1 ? pos : neg).push_back(scores[i]);
    if (pos.empty() || neg.empty()) return std::nullopt;

    std::sort(neg.begin(), neg.end());
    std::int64_t below = 0, tied = 0;
    for (double s : pos) {
        below += std::lower_bound(neg.begin(), neg.end(), s) - neg.begin();
        tied += std::upper_bound(neg.begin(), neg.end(), s) -
                std::lower_bound(neg.begin(), neg.end(), s);
    }
    const double pairs = static_cast<double>(pos.size()) * static_cast<double>(neg.size());
    return (static_cast<double>(below) + 0.5 * static_cast<double>(tied)) / pairs;
}

inline Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ValidationError("metrics: scores/labels size mismatch");
    if (scores.empty()) throw ValidationError("metrics: empty evaluation set");
    for (int y : labels)
        if (y != 0 && y != 1) throw ValidationError("metrics: labels must be 0 or 1");

    Metrics m;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= 0.5;
        if (labels[i] == 1) (pred ? m.tp : m.fn)++;
        else (pred ? m.fp : m.tn)++;
    }
    m.acc = static_cast<double>(m.tp + m.tn) / static_cast<double>(scores.size());

    // per-class F1 in the division-safe form; an undefined F1 counts as 0
    const double f1_pos = (2 * m.tp + m.fp + m.fn) > 0
                              ? 2.0 * static_cast<double>(m.tp) / static_cast<double>(2 * m.tp + m.fp + m.fn)
                              : 0.0;
    const double f1_neg = (2 * m.tn + m.fp + m.fn) > 0
                              ? 2.0 * static_cast<double>(m.tn) / static_cast<double>(2 * m.tn + m.fp + m.fn)
                              : 0.0;
    m.macro_f1 = 0.5 * (f1_pos + f1_neg);
    m.auc = rank_auc(scores, labels);
    return m;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
    nlohmann::json j;
    j["acc"] = m.acc;
    if (m.auc.has_value()) j["auc"] = *m.auc;
    else j["auc"] = nullptr;
    j["macro_f1"] = m.macro_f1;
    j["confusion"] = {{"tp", m.tp}, {"tn", m.tn}, {"fp", m.fp}, {"fn", m.fn}};
    return j;
}

} // namespace dispat
