// metrics.hpp - binary detection metrics from confusion counts, plus the
// comparison-table report (aligned text and JSON records)
#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "flowguard/errors.hpp"

namespace flowguard {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

inline ConfusionCounts confusion(const std::vector<int>& y_true,
                                 const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size())
        throw LengthMismatch("confusion: label vectors differ in length");
    if (y_true.empty()) throw EmptyTable("confusion: no rows");
    ConfusionCounts c;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i]) {
            (y_pred[i] ? c.tp : c.fn)++;
        } else {
            (y_pred[i] ? c.fp : c.tn)++;
        }
    }
    return c;
}

/// A 0/0 denominator leaves the metric unset rather than silently zero; the
/// report renders such entries as "undef".
struct MetricScores {
    std::optional<double> accuracy, precision, recall, f1, fpr;
};

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

inline MetricScores scores(const ConfusionCounts& c) {
    MetricScores s;
    s.accuracy = ratio(c.tp + c.tn, c.total());
    s.precision = ratio(c.tp, c.tp + c.fp);
    s.recall = ratio(c.tp, c.tp + c.fn);
    if (s.precision && s.recall && (*s.precision + *s.recall) > 0.0)
        s.f1 = 2.0 * (*s.precision) * (*s.recall) / (*s.precision + *s.recall);
    s.fpr = ratio(c.fp, c.fp + c.tn);
    return s;
}

/// One evaluated run. Pretraining and search time are kept separate because
/// a single total hides which stage dominates; the table shows their sum.
struct RunRecord {
    std::string method;
    MetricScores metrics;
    double pretrain_seconds = 0.0;
    double search_seconds = 0.0;

    double total_seconds() const { return pretrain_seconds + search_seconds; }
};

// percentages carry one decimal place in the rendered table
inline std::string fmt_pct(const std::optional<double>& v) {
    if (!v) return "undef";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", *v * 100.0);
    return buf;
}

inline std::string fmt_fixed(double v, int decimals = 1) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

inline std::string render_table(const std::vector<RunRecord>& runs) {
    if (runs.empty()) throw EmptyTable("render_table: no runs");
    const char* header[7] = {"Method",       "Accuracy (%)", "Precision (%)",
                             "Recall (%)",   "F1-score (%)", "FPR (%)",
                             "Training Time (s)"};
    std::vector<std::vector<std::string>> cells;
    cells.emplace_back(header, header + 7);
    for (const auto& r : runs) {
        cells.push_back({r.method, fmt_pct(r.metrics.accuracy), fmt_pct(r.metrics.precision),
                         fmt_pct(r.metrics.recall), fmt_pct(r.metrics.f1),
                         fmt_pct(r.metrics.fpr), fmt_fixed(r.total_seconds())});
    }
    std::size_t width[7] = {0, 0, 0, 0, 0, 0, 0};
    for (const auto& row : cells)
        for (int c = 0; c < 7; ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (const auto& row : cells) {
        for (int c = 0; c < 7; ++c) {
            out += row[c];
            if (c < 6) out.append(width[c] - row[c].size() + 2, ' ');
        }
        out += "\n";
    }
    return out;
}

} // namespace flowguard
