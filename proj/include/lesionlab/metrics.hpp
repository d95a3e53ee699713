#ifndef LESIONLAB_METRICS_HPP
#define LESIONLAB_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lesionlab/errors.hpp"

// Lesion-level precision-recall analysis over detections pooled across the
// test set.

namespace lesionlab {

struct PooledDetection {
    double confidence = 0.0;
    bool tp = false;
    std::string case_id;
    int lesion_id = -1;  // matched ground-truth lesion, -1 for FP
};

struct PRPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct PRCurve {
    std::vector<PRPoint> points;  // descending threshold order
    int n_gt = 0;
    long n_fp_total = 0;  // FP count at the full sweep (feeds the CI)
};

// Threshold sweep over each distinct confidence, descending; detections that
// tie on confidence enter together. Recall counts distinct ground-truth
// lesions. A TP on an already-detected lesion adds nothing by default; with
// duplicate_tp_as_fp it counts as a false positive instead.
inline PRCurve pr_curve(const std::vector<PooledDetection>& dets, int n_gt,
                        bool duplicate_tp_as_fp = false) {
    if (n_gt <= 0) throw ComputeError("pr_curve: no ground-truth lesions (recall undefined)");

    std::vector<const PooledDetection*> order;
    order.reserve(dets.size());
    for (const auto& d : dets) order.push_back(&d);
    std::stable_sort(order.begin(), order.end(),
                     [](const PooledDetection* a, const PooledDetection* b) {
                         return a->confidence > b->confidence;
                     });

    PRCurve pr;
    pr.n_gt = n_gt;
    std::set<std::pair<std::string, int>> lesions;
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double tau = order[i]->confidence;
        for (; i < order.size() && order[i]->confidence == tau; ++i) {
            const PooledDetection& d = *order[i];
            if (!d.tp) {
                ++fp;
            } else if (lesions.insert({d.case_id, d.lesion_id}).second) {
                ++tp;
            } else if (duplicate_tp_as_fp) {
                ++fp;
            }
        }
        PRPoint pt;
        pt.threshold = tau;
        pt.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        pt.recall = static_cast<double>(tp) / static_cast<double>(n_gt);
        pr.points.push_back(pt);
    }
    pr.n_fp_total = fp;
    return pr;
}

// Area under the PR curve by step integration sum (r_i - r_{i-1}) * p_i,
// starting from recall 0.
inline double mean_average_precision(const PRCurve& pr) {
    double area = 0.0, prev = 0.0;
    for (const PRPoint& pt : pr.points) {
        area += (pt.recall - prev) * pt.precision;
        prev = pt.recall;
    }
    return area;
}

// 95% confidence interval for an area-under-curve statistic, from the
// closed-form standard error with Q1 = A/(2-A) and Q2 = 2A^2/(1+A); the
// interval A +- 1.96 SE is clipped to [0,1].
inline std::pair<double, double> hanley_mcneil_ci(double A, long n_pos, long n_neg) {
    if (n_pos < 1 || n_neg < 1)
        throw ComputeError("hanley_mcneil_ci: needs at least one positive and one negative");
    const double q1 = A / (2.0 - A);
    const double q2 = 2.0 * A * A / (1.0 + A);
    const double var = (A * (1.0 - A) + (static_cast<double>(n_pos) - 1.0) * (q1 - A * A) +
                        (static_cast<double>(n_neg) - 1.0) * (q2 - A * A)) /
                       (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    const double se = std::sqrt(std::max(var, 0.0));
    return {std::clamp(A - 1.96 * se, 0.0, 1.0), std::clamp(A + 1.96 * se, 0.0, 1.0)};
}

// Fraction of ground-truth lesions hit by at least one TP detection when
// every component counts (threshold zero).
inline double max_sensitivity(const std::vector<PooledDetection>& dets, int n_gt) {
    if (n_gt <= 0) throw ComputeError("max_sensitivity: no ground-truth lesions");
    std::set<std::pair<std::string, int>> lesions;
    for (const auto& d : dets)
        if (d.tp) lesions.insert({d.case_id, d.lesion_id});
    return static_cast<double>(lesions.size()) / static_cast<double>(n_gt);
}

inline double equivalent_diameter_mm(double volume_mm3) {
    return 2.0 * std::cbrt(3.0 * volume_mm3 / (4.0 * 3.14159265358979323846));
}

struct GtLesionRecord {
    double volume_mm3 = 0.0;
    bool detected = false;
};

struct StrataBin {
    double lo_mm = 0.0;
    double hi_mm = 0.0;
    int n_gt = 0;
    int n_detected = 0;
};

// Bins are [edges[i], edges[i+1]) plus a final [edges.back(), inf) bin.
inline std::vector<StrataBin> size_strata(const std::vector<GtLesionRecord>& records,
                                          const std::vector<double>& edges) {
    if (edges.size() < 2) throw ConfigError("size_strata: need at least two bin edges");
    std::vector<StrataBin> bins;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        bins.push_back({edges[i], edges[i + 1], 0, 0});
    bins.push_back({edges.back(), std::numeric_limits<double>::infinity(), 0, 0});

    for (const auto& r : records) {
        const double d = equivalent_diameter_mm(r.volume_mm3);
        for (auto& bin : bins) {
            if (d >= bin.lo_mm && d < bin.hi_mm) {
                ++bin.n_gt;
                if (r.detected) ++bin.n_detected;
                break;
            }
        }
    }
    return bins;
}

}  // namespace lesionlab

#endif  // LESIONLAB_METRICS_HPP
