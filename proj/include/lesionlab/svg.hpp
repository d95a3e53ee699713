#ifndef LESIONLAB_SVG_HPP
#define LESIONLAB_SVG_HPP

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "lesionlab/metrics.hpp"

// Minimal deterministic SVG plots: fixed canvas, fixed-precision coordinates,
// no timestamps, so identical inputs produce identical bytes. Bars carry the
// underlying counts as data attributes for inspection and testing.

namespace lesionlab::svg {

namespace detail {

inline std::string fmt(double v, int decimals = 2) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

constexpr int kWidth = 640, kHeight = 480;
constexpr int kLeft = 64, kRight = 24, kTop = 40, kBottom = 48;
constexpr int kPlotW = kWidth - kLeft - kRight;
constexpr int kPlotH = kHeight - kTop - kBottom;

inline std::string header(const std::string& title) {
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) +
         "\" height=\"" + std::to_string(kHeight) + "\" viewBox=\"0 0 " +
         std::to_string(kWidth) + " " + std::to_string(kHeight) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + std::to_string(kWidth / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         title + "</text>\n";
    return s;
}

inline std::string frame_and_labels(const std::string& xlabel, const std::string& ylabel) {
    std::string s;
    s += "<rect x=\"" + std::to_string(kLeft) + "\" y=\"" + std::to_string(kTop) +
         "\" width=\"" + std::to_string(kPlotW) + "\" height=\"" + std::to_string(kPlotH) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    s += "<text x=\"" + std::to_string(kLeft + kPlotW / 2) + "\" y=\"" +
         std::to_string(kHeight - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + xlabel +
         "</text>\n";
    s += "<text x=\"18\" y=\"" + std::to_string(kTop + kPlotH / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 " +
         std::to_string(kTop + kPlotH / 2) + ")\">" + ylabel + "</text>\n";
    return s;
}

// x,y in unit coordinates (0..1), origin bottom-left of the plot frame.
inline double px(double x) { return kLeft + x * kPlotW; }
inline double py(double y) { return kTop + (1.0 - y) * kPlotH; }

inline std::string unit_ticks() {
    std::string s;
    for (int i = 0; i <= 5; ++i) {
        const double f = i / 5.0;
        s += "<text x=\"" + fmt(px(f)) + "\" y=\"" + std::to_string(kTop + kPlotH + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
             fmt(f, 1) + "</text>\n";
        s += "<text x=\"" + std::to_string(kLeft - 6) + "\" y=\"" + fmt(py(f) + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + fmt(f, 1) +
             "</text>\n";
    }
    return s;
}

}  // namespace detail

// Precision (y) against recall (x) as a step polyline with point markers.
inline std::string pr_curve_svg(const PRCurve& pr, const std::string& title) {
    using namespace detail;
    std::string s = header(title);
    s += frame_and_labels("recall", "precision");
    s += unit_ticks();
    if (!pr.points.empty()) {
        std::string pts;
        double prev_r = 0.0, prev_p = pr.points.front().precision;
        pts += fmt(px(prev_r)) + "," + fmt(py(prev_p));
        for (const auto& p : pr.points) {
            pts += " " + fmt(px(p.recall)) + "," + fmt(py(prev_p));  // horizontal step
            pts += " " + fmt(px(p.recall)) + "," + fmt(py(p.precision));
            prev_p = p.precision;
        }
        s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\"/>\n";
        for (const auto& p : pr.points)
            s += "<circle cx=\"" + fmt(px(p.recall)) + "\" cy=\"" + fmt(py(p.precision)) +
                 "\" r=\"3\" fill=\"#1f4e9c\" data-threshold=\"" + fmt(p.threshold, 6) + "\"/>\n";
    }
    s += "</svg>\n";
    return s;
}

// Two overlaid count histograms over predicted probability: positive-labeled
// voxels in blue, negative-labeled in red. Each series is scaled to its own
// maximum so both shapes stay visible despite the class imbalance; the raw
// counts ride along as data-count attributes.
inline std::string probability_histogram_svg(const std::vector<std::size_t>& positive,
                                             const std::vector<std::size_t>& negative,
                                             const std::string& title) {
    using namespace detail;
    std::string s = header(title);
    s += frame_and_labels("predicted lesion probability", "voxel count (per-series scale)");
    s += unit_ticks();
    const auto series = [&](const std::vector<std::size_t>& hist, const char* color,
                            const char* name) {
        std::size_t mx = 0;
        for (std::size_t c : hist) mx = std::max(mx, c);
        if (mx == 0) return std::string();
        std::string out;
        const double bw = static_cast<double>(kPlotW) / static_cast<double>(hist.size());
        for (std::size_t i = 0; i < hist.size(); ++i) {
            if (hist[i] == 0) continue;
            const double h = static_cast<double>(hist[i]) / static_cast<double>(mx);
            out += "<rect x=\"" + fmt(kLeft + i * bw) + "\" y=\"" + fmt(py(h)) + "\" width=\"" +
                   fmt(bw) + "\" height=\"" + fmt(h * kPlotH) + "\" fill=\"" + color +
                   "\" fill-opacity=\"0.5\" data-series=\"" + name + "\" data-count=\"" +
                   std::to_string(hist[i]) + "\"/>\n";
        }
        return out;
    };
    s += series(negative, "#c23b3b", "negative");
    s += series(positive, "#1f4e9c", "positive");
    s += "<rect x=\"" + std::to_string(kLeft + 8) + "\" y=\"" + std::to_string(kTop + 8) +
         "\" width=\"12\" height=\"12\" fill=\"#1f4e9c\" fill-opacity=\"0.5\"/>\n";
    s += "<text x=\"" + std::to_string(kLeft + 26) + "\" y=\"" + std::to_string(kTop + 18) +
         "\" font-family=\"sans-serif\" font-size=\"12\">positive voxels</text>\n";
    s += "<rect x=\"" + std::to_string(kLeft + 8) + "\" y=\"" + std::to_string(kTop + 26) +
         "\" width=\"12\" height=\"12\" fill=\"#c23b3b\" fill-opacity=\"0.5\"/>\n";
    s += "<text x=\"" + std::to_string(kLeft + 26) + "\" y=\"" + std::to_string(kTop + 36) +
         "\" font-family=\"sans-serif\" font-size=\"12\">negative voxels</text>\n";
    s += "</svg>\n";
    return s;
}

// Per-diameter-stratum detection counts: total lesions in gray, detected
// overlaid in green, detection rate printed above each group.
inline std::string strata_svg(const std::vector<StrataBin>& bins, const std::string& title) {
    using namespace detail;
    std::string s = header(title);
    s += frame_and_labels("equivalent sphere diameter (mm)", "lesions");
    int mx = 1;
    for (const auto& b : bins) mx = std::max(mx, b.n_gt);
    const double bw = bins.empty() ? 0.0 : static_cast<double>(kPlotW) / bins.size();
    for (std::size_t i = 0; i < bins.size(); ++i) {
        const auto& b = bins[i];
        const double x0 = kLeft + i * bw;
        const double hg = static_cast<double>(b.n_gt) / mx;
        const double hd = static_cast<double>(b.n_detected) / mx;
        s += "<rect x=\"" + fmt(x0 + bw * 0.15) + "\" y=\"" + fmt(py(hg)) + "\" width=\"" +
             fmt(bw * 0.7) + "\" height=\"" + fmt(hg * kPlotH) +
             "\" fill=\"#bbbbbb\" data-series=\"gt\" data-count=\"" + std::to_string(b.n_gt) +
             "\"/>\n";
        s += "<rect x=\"" + fmt(x0 + bw * 0.15) + "\" y=\"" + fmt(py(hd)) + "\" width=\"" +
             fmt(bw * 0.7) + "\" height=\"" + fmt(hd * kPlotH) +
             "\" fill=\"#2f8f4e\" data-series=\"detected\" data-count=\"" +
             std::to_string(b.n_detected) + "\"/>\n";
        const std::string label =
            std::isfinite(b.hi_mm) ? fmt(b.lo_mm, 0) + "-" + fmt(b.hi_mm, 0) : fmt(b.lo_mm, 0) + "+";
        s += "<text x=\"" + fmt(x0 + bw / 2) + "\" y=\"" + std::to_string(kTop + kPlotH + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + label +
             "</text>\n";
        if (b.n_gt > 0)
            s += "<text x=\"" + fmt(x0 + bw / 2) + "\" y=\"" + fmt(py(hg) - 6) +
                 "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" +
                 std::to_string(b.n_detected) + "/" + std::to_string(b.n_gt) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace lesionlab::svg

#endif  // LESIONLAB_SVG_HPP
