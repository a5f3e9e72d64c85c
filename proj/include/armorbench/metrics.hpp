#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"

namespace armorbench {

// ---------------------------------------------------------------------------
// Confusion matrix: rows = true class, columns = predicted class.
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    int k = 0;
    std::vector<std::int64_t> counts;  // k x k row-major

    std::int64_t& at(int t, int p) { return counts[static_cast<std::size_t>(t) * k + p]; }
    std::int64_t at(int t, int p) const { return counts[static_cast<std::size_t>(t) * k + p]; }

    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
    std::int64_t row_sum(int t) const {
        std::int64_t s = 0;
        for (int p = 0; p < k; ++p) s += at(t, p);
        return s;
    }
    std::int64_t col_sum(int p) const {
        std::int64_t s = 0;
        for (int t = 0; t < k; ++t) s += at(t, p);
        return s;
    }
};

inline ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                        int k) {
    if (y_true.size() != y_pred.size())
        throw InputError("confusion_matrix: label vectors have different lengths");
    if (k < 1) throw InputError("confusion_matrix: class count must be >= 1");
    ConfusionMatrix c;
    c.k = k;
    c.counts.assign(static_cast<std::size_t>(k) * k, 0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || y_true[i] >= k || y_pred[i] < 0 || y_pred[i] >= k)
            throw InputError("confusion_matrix: label out of range at index " + std::to_string(i));
        ++c.at(y_true[i], y_pred[i]);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Metrics bundle: accuracy plus per-class and macro precision/recall/F1.
// Macro averages run over classes with nonzero support; a class whose
// precision denominator is zero contributes 0 and is flagged.
// ---------------------------------------------------------------------------

struct MetricsBundle {
    double accuracy = 0.0;
    std::vector<double> precision, recall, f1;
    std::vector<std::int64_t> support;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    std::vector<int> zero_denominator_classes;
};

inline MetricsBundle metrics(const ConfusionMatrix& c) {
    const std::int64_t total = c.total();
    if (total == 0) throw InputError("metrics: empty confusion matrix");

    MetricsBundle b;
    std::int64_t trace = 0;
    for (int k = 0; k < c.k; ++k) trace += c.at(k, k);
    b.accuracy = static_cast<double>(trace) / static_cast<double>(total);

    b.precision.resize(static_cast<std::size_t>(c.k));
    b.recall.resize(static_cast<std::size_t>(c.k));
    b.f1.resize(static_cast<std::size_t>(c.k));
    b.support.resize(static_cast<std::size_t>(c.k));

    double psum = 0.0, rsum = 0.0, fsum = 0.0;
    int counted = 0;
    for (int k = 0; k < c.k; ++k) {
        const std::int64_t tp = c.at(k, k);
        const std::int64_t col = c.col_sum(k);
        const std::int64_t row = c.row_sum(k);
        b.support[static_cast<std::size_t>(k)] = row;

        bool flagged = false;
        double p = 0.0, r = 0.0, f = 0.0;
        if (col > 0)
            p = static_cast<double>(tp) / static_cast<double>(col);
        else
            flagged = true;
        if (row > 0)
            r = static_cast<double>(tp) / static_cast<double>(row);
        else
            flagged = true;
        if (p + r > 0.0) f = 2.0 * p * r / (p + r);
        if (flagged) b.zero_denominator_classes.push_back(k);

        b.precision[static_cast<std::size_t>(k)] = p;
        b.recall[static_cast<std::size_t>(k)] = r;
        b.f1[static_cast<std::size_t>(k)] = f;

        if (row > 0) {
            psum += p;
            rsum += r;
            fsum += f;
            ++counted;
        }
    }
    if (counted > 0) {
        b.macro_precision = psum / counted;
        b.macro_recall = rsum / counted;
        b.macro_f1 = fsum / counted;
    }
    return b;
}

inline json metrics_to_json(const MetricsBundle& b) {
    return json{{"accuracy", b.accuracy},
                {"macro_precision", b.macro_precision},
                {"macro_recall", b.macro_recall},
                {"macro_f1", b.macro_f1},
                {"precision", b.precision},
                {"recall", b.recall},
                {"f1", b.f1},
                {"support", b.support},
                {"zero_denominator_classes", b.zero_denominator_classes}};
}

// ---------------------------------------------------------------------------
// Deterministic SVG emission. Numbers are printed with fixed precision so the
// same input always produces byte-identical files.
// ---------------------------------------------------------------------------

inline std::string svg_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

inline std::string render_bar_chart_svg(const std::vector<std::pair<std::string, double>>& series,
                                        const std::string& title) {
    if (series.empty()) throw InputError("render_bar_chart: empty series");
    const double plot_w = 640.0, plot_h = 320.0, margin = 60.0, gap = 12.0;
    const double width = margin * 2 + plot_w, height = margin * 2 + plot_h;
    double maxv = 0.0;
    for (const auto& [name, v] : series) maxv = std::max(maxv, v);

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + svg_num(width) +
         "\" height=\"" + svg_num(height) + "\">\n";
    s += "<rect width=\"" + svg_num(width) + "\" height=\"" + svg_num(height) +
         "\" fill=\"white\"/>\n";
    s += "<text x=\"" + svg_num(width / 2) + "\" y=\"30\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">" + title + "</text>\n";
    s += "<line x1=\"" + svg_num(margin) + "\" y1=\"" + svg_num(margin + plot_h) + "\" x2=\"" +
         svg_num(margin + plot_w) + "\" y2=\"" + svg_num(margin + plot_h) +
         "\" stroke=\"black\"/>\n";

    const double bar_w = (plot_w - gap * (series.size() + 1)) / static_cast<double>(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double h = maxv > 0.0 ? series[i].second / maxv * plot_h : 0.0;
        const double x = margin + gap + static_cast<double>(i) * (bar_w + gap);
        const double y = margin + plot_h - h;
        s += "<rect x=\"" + svg_num(x) + "\" y=\"" + svg_num(y) + "\" width=\"" + svg_num(bar_w) +
             "\" height=\"" + svg_num(h) + "\" fill=\"#4878a8\"/>\n";
        s += "<text x=\"" + svg_num(x + bar_w / 2) + "\" y=\"" + svg_num(margin + plot_h + 18) +
             "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" +
             series[i].first + "</text>\n";
        s += "<text x=\"" + svg_num(x + bar_w / 2) + "\" y=\"" + svg_num(y - 5) +
             "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" +
             svg_num(series[i].second) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

inline void render_bar_chart(const std::vector<std::pair<std::string, double>>& series,
                             const std::string& title, const std::filesystem::path& path) {
    const std::string s = render_bar_chart_svg(series, title);
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline std::string render_confusion_heatmap_svg(const ConfusionMatrix& c,
                                                const std::string& title) {
    if (c.k < 1 || c.counts.empty()) throw InputError("render_confusion_heatmap: empty matrix");
    const double cell = std::min(40.0, 400.0 / c.k), margin = 60.0;
    const double width = margin * 2 + cell * c.k, height = margin * 2 + cell * c.k;
    std::int64_t maxv = 0;
    for (auto v : c.counts) maxv = std::max(maxv, v);

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + svg_num(width) +
         "\" height=\"" + svg_num(height) + "\">\n";
    s += "<rect width=\"" + svg_num(width) + "\" height=\"" + svg_num(height) +
         "\" fill=\"white\"/>\n";
    s += "<text x=\"" + svg_num(width / 2) + "\" y=\"30\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">" + title + "</text>\n";
    for (int t = 0; t < c.k; ++t)
        for (int p = 0; p < c.k; ++p) {
            // Cell opacity is count/max, with a 0.05 floor so the grid stays
            // visible (all-zero matrices render uniformly at the floor).
            const double op =
                maxv > 0 ? std::max(0.05, static_cast<double>(c.at(t, p)) /
                                              static_cast<double>(maxv))
                         : 0.05;
            const double x = margin + p * cell, y = margin + t * cell;
            s += "<rect x=\"" + svg_num(x) + "\" y=\"" + svg_num(y) + "\" width=\"" +
                 svg_num(cell) + "\" height=\"" + svg_num(cell) +
                 "\" fill=\"#a83838\" fill-opacity=\"" + svg_num(op) +
                 "\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n";
        }
    s += "</svg>\n";
    return s;
}

inline void render_confusion_heatmap(const ConfusionMatrix& c, const std::string& title,
                                     const std::filesystem::path& path) {
    const std::string s = render_confusion_heatmap_svg(c, title);
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// Confusion CSV: header pred_0..pred_{K-1}, one row per true class.
inline void write_confusion_csv(const ConfusionMatrix& c, const std::filesystem::path& path) {
    std::string s;
    for (int p = 0; p < c.k; ++p) {
        if (p > 0) s += ",";
        s += "pred_" + std::to_string(p);
    }
    s += "\n";
    for (int t = 0; t < c.k; ++t) {
        for (int p = 0; p < c.k; ++p) {
            if (p > 0) s += ",";
            s += std::to_string(c.at(t, p));
        }
        s += "\n";
    }
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// ---------------------------------------------------------------------------
// Aggregated report. Sections are included only when present; keys come out
// sorted (nlohmann's default object ordering) so reruns diff cleanly.
// ---------------------------------------------------------------------------

inline void write_report(const json& report, const std::filesystem::path& path) {
    if (!report.is_object() || report.empty())
        throw InputError("write_report: report must be a nonempty JSON object");
    const std::string s = report.dump(2) + "\n";
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

}  // namespace armorbench
