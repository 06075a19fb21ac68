#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "decaf/errors.hpp"

namespace decaf {

/// Top-k thresholding: the ceil(contamination * n) highest scores are labeled
/// 1. Ties at the cutoff are broken by ascending node index, so the result is
/// a pure function of the score ranking.
inline std::vector<int> threshold_scores(const std::vector<double>& scores,
                                         double contamination) {
    if (!(contamination > 0.0) || contamination > 1.0)
        throw config_error("threshold_scores: contamination must be in (0, 1]");
    if (scores.empty()) throw shape_error("threshold_scores: empty scores");
    const std::size_t n = scores.size();
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(contamination * static_cast<double>(n)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    std::vector<int> yhat(n, 0);
    for (std::size_t i = 0; i < k && i < n; ++i) yhat[idx[i]] = 1;
    return yhat;
}

/// Area under the ROC curve as the Mann-Whitney statistic
/// P(score_pos > score_neg) + 0.5 * P(tie), computed from average ranks.
inline double auroc(const std::vector<double>& scores, const std::vector<int>& y) {
    if (scores.size() != y.size())
        throw shape_error("auroc: score/label length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int v : y) n_pos += (v != 0);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw undefined_metric_error("auroc: needs both classes, got single-class labels");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // rank sum of positives with average ranks over tie groups; all terms are
    // integers or half-integers, so the arithmetic below is exact
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k2 = i; k2 < j; ++k2)
            if (y[idx[k2]] != 0) rank_sum_pos += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

struct confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline confusion confusion_counts(const std::vector<int>& yhat, const std::vector<int>& y) {
    if (yhat.size() != y.size()) throw shape_error("confusion: length mismatch");
    confusion c;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (yhat[i] && y[i]) ++c.tp;
        else if (yhat[i] && !y[i]) ++c.fp;
        else if (!yhat[i] && y[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline double accuracy(const std::vector<int>& yhat, const std::vector<int>& y) {
    if (y.empty()) throw shape_error("accuracy: empty labels");
    const confusion c = confusion_counts(yhat, y);
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(y.size());
}

/// F1 = 2 TP / (2 TP + FP + FN); defined as 0 when the denominator is 0.
inline double f1_score(const std::vector<int>& yhat, const std::vector<int>& y) {
    const confusion c = confusion_counts(yhat, y);
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

/// Demographic parity gap |P(yhat=1 | s=0) - P(yhat=1 | s=1)|.
inline double delta_dp(const std::vector<int>& yhat, const std::vector<int>& s) {
    if (yhat.size() != s.size()) throw shape_error("delta_dp: length mismatch");
    std::size_t n0 = 0, n1 = 0, p0 = 0, p1 = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == 0) {
            ++n0;
            p0 += (yhat[i] != 0);
        } else {
            ++n1;
            p1 += (yhat[i] != 0);
        }
    }
    if (n0 == 0 || n1 == 0)
        throw undefined_metric_error("delta_dp: a sensitive group is empty");
    return std::fabs(static_cast<double>(p0) / static_cast<double>(n0) -
                     static_cast<double>(p1) / static_cast<double>(n1));
}

/// Equality-of-opportunity gap: |TPR(s=0) - TPR(s=1)|, conditioning on y=1.
inline double delta_eoo(const std::vector<int>& yhat, const std::vector<int>& y,
                        const std::vector<int>& s) {
    if (yhat.size() != y.size() || y.size() != s.size())
        throw shape_error("delta_eoo: length mismatch");
    std::size_t n0 = 0, n1 = 0, t0 = 0, t1 = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 0) continue;
        if (s[i] == 0) {
            ++n0;
            t0 += (yhat[i] != 0);
        } else {
            ++n1;
            t1 += (yhat[i] != 0);
        }
    }
    if (n0 == 0 || n1 == 0)
        throw undefined_metric_error("delta_eoo: a sensitive group has no positives");
    return std::fabs(static_cast<double>(t0) / static_cast<double>(n0) -
                     static_cast<double>(t1) / static_cast<double>(n1));
}

/// Counterfactual gap: |mean(yhat under do(S=0)) - mean(yhat under do(S=1))|,
/// whole-population interventions.
inline double delta_cf(const std::vector<int>& yhat_do0, const std::vector<int>& yhat_do1) {
    if (yhat_do0.size() != yhat_do1.size() || yhat_do0.empty())
        throw shape_error("delta_cf: prediction vectors must be same nonempty length");
    double m0 = 0.0, m1 = 0.0;
    for (int v : yhat_do0) m0 += (v != 0);
    for (int v : yhat_do1) m1 += (v != 0);
    const double n = static_cast<double>(yhat_do0.size());
    return std::fabs(m0 / n - m1 / n);
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw shape_error("pearson: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw undefined_metric_error("pearson: needs at least 2 points");
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw undefined_metric_error("pearson: zero variance input");
    return sab / std::sqrt(saa * sbb);
}

/// One evaluation of one trained model. Metrics that are undefined for the
/// given inputs are left unset and render as "n/a".
struct metrics_report {
    std::optional<double> accuracy;
    std::optional<double> f1;
    std::optional<double> auroc;
    std::optional<double> delta_dp;
    std::optional<double> delta_eoo;
    std::optional<double> delta_cf;
    double contamination = 0.0;
    std::size_t threshold_k = 0;
};

inline nlohmann::json metrics_to_json(const metrics_report& r) {
    nlohmann::json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v)
            j[key] = *v;
        else
            j[key] = nullptr;
    };
    put("accuracy", r.accuracy);
    put("f1", r.f1);
    put("auroc", r.auroc);
    put("delta_dp", r.delta_dp);
    put("delta_eoo", r.delta_eoo);
    put("delta_cf", r.delta_cf);
    j["contamination"] = r.contamination;
    j["threshold_k"] = r.threshold_k;
    return j;
}

} // namespace decaf
