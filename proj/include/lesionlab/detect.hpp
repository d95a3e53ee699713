#ifndef LESIONLAB_DETECT_HPP
#define LESIONLAB_DETECT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "lesionlab/errors.hpp"
#include "lesionlab/phantom.hpp"
#include "lesionlab/volume.hpp"

// Probability map -> binary mask -> 3D connected components -> TP/FP
// matching against ground-truth lesions.

namespace lesionlab {

inline constexpr double kBinarizeThreshold = 0.10;
inline constexpr double kMatchTolMm = 1.0;

// Inclusive comparison: a voxel exactly at the threshold is foreground.
inline Vol3<std::uint8_t> binarize(const Vol3<float>& prob, double threshold = kBinarizeThreshold) {
    Vol3<std::uint8_t> mask(prob.dims, 0);
    for (std::size_t i = 0; i < prob.data.size(); ++i)
        mask.data[i] = prob.data[i] >= threshold ? 1 : 0;
    return mask;
}

namespace detail {

inline const std::vector<std::array<int, 3>>& neighbor_offsets(int connectivity) {
    static const std::vector<std::array<int, 3>> n6 = [] {
        std::vector<std::array<int, 3>> v;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (std::abs(dx) + std::abs(dy) + std::abs(dz) == 1)
                        v.push_back({dx, dy, dz});
        return v;
    }();
    static const std::vector<std::array<int, 3>> n18 = [] {
        std::vector<std::array<int, 3>> v;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int m = std::abs(dx) + std::abs(dy) + std::abs(dz);
                    if (m >= 1 && m <= 2) v.push_back({dx, dy, dz});
                }
        return v;
    }();
    static const std::vector<std::array<int, 3>> n26 = [] {
        std::vector<std::array<int, 3>> v;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (dx || dy || dz) v.push_back({dx, dy, dz});
        return v;
    }();
    switch (connectivity) {
        case 6: return n6;
        case 18: return n18;
        case 26: return n26;
        default:
            throw ConfigError("connected_components_3d: connectivity must be 6, 18 or 26, got " +
                              std::to_string(connectivity));
    }
}

}  // namespace detail

// Partition of the foreground into maximal connected sets, ordered by each
// component's minimum linear voxel index; voxels within a component are in
// linear-index order.
inline std::vector<std::vector<std::array<int, 3>>> connected_components_3d(
    const Vol3<std::uint8_t>& mask, int connectivity = 26) {
    const auto& offsets = detail::neighbor_offsets(connectivity);
    const Dims dims = mask.dims;
    std::vector<char> visited(mask.data.size(), 0);
    std::vector<std::vector<std::array<int, 3>>> comps;
    std::vector<std::size_t> queue;

    for (std::size_t start = 0; start < mask.data.size(); ++start) {
        if (!mask.data[start] || visited[start]) continue;
        queue.clear();
        queue.push_back(start);
        visited[start] = 1;
        std::vector<std::size_t> members;
        while (!queue.empty()) {
            const std::size_t cur = queue.back();
            queue.pop_back();
            members.push_back(cur);
            const auto v = dims.unindex(cur);
            for (const auto& o : offsets) {
                const int x = v[0] + o[0], y = v[1] + o[1], z = v[2] + o[2];
                if (!dims.contains(x, y, z)) continue;
                const std::size_t ni = dims.index(x, y, z);
                if (!mask.data[ni] || visited[ni]) continue;
                visited[ni] = 1;
                queue.push_back(ni);
            }
        }
        std::sort(members.begin(), members.end());
        std::vector<std::array<int, 3>> comp;
        comp.reserve(members.size());
        for (std::size_t m : members) comp.push_back(dims.unindex(m));
        comps.push_back(std::move(comp));
    }
    return comps;  // seeds scanned in ascending linear index => ordered
}

struct Component3D {
    std::vector<std::array<int, 3>> voxels;
    std::array<double, 3> centroid_mm{0, 0, 0};
    double confidence = 0.0;  // mean lesion probability over the voxels
    double volume_mm3 = 0.0;
};

inline std::vector<Component3D> make_components(
    const std::vector<std::vector<std::array<int, 3>>>& comps, const Vol3<float>& prob,
    Spacing sp) {
    std::vector<Component3D> out;
    out.reserve(comps.size());
    for (const auto& voxels : comps) {
        Component3D c;
        c.voxels = voxels;
        double cx = 0, cy = 0, cz = 0, conf = 0;
        for (const auto& v : voxels) {
            const auto p = sp.center_mm(v[0], v[1], v[2]);
            cx += p[0];
            cy += p[1];
            cz += p[2];
            conf += prob.at(v[0], v[1], v[2]);
        }
        const double n = static_cast<double>(voxels.size());
        c.centroid_mm = {cx / n, cy / n, cz / n};
        c.confidence = conf / n;
        c.volume_mm3 = n * sp.voxel_mm3();
        out.push_back(std::move(c));
    }
    return out;
}

struct MatchResult {
    struct Det {
        Component3D comp;
        bool tp = false;
        int matched_lesion = -1;  // lesion id, -1 for FP
    };
    std::vector<Det> detections;
    std::map<int, bool> gt_detected;  // lesion id -> hit by at least one TP
};

// A component is a TP iff its centroid lies within tol_mm of the nearest
// ground-truth lesion voxel center; ties go to the lowest lesion id.
inline MatchResult match(const std::vector<Component3D>& comps, const LesionSet& gt, Spacing sp,
                         double tol_mm = kMatchTolMm) {
    if (tol_mm <= 0) throw ConfigError("match: tolerance must be positive");
    MatchResult res;
    for (const Lesion& l : gt) res.gt_detected[l.id] = false;
    for (const Component3D& c : comps) {
        double best = std::numeric_limits<double>::infinity();
        int best_id = -1;
        for (const Lesion& l : gt) {
            for (const auto& v : l.voxels) {
                const auto p = sp.center_mm(v[0], v[1], v[2]);
                const double dx = p[0] - c.centroid_mm[0];
                const double dy = p[1] - c.centroid_mm[1];
                const double dz = p[2] - c.centroid_mm[2];
                const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
                if (d < best) {
                    best = d;
                    best_id = l.id;
                }
            }
        }
        MatchResult::Det det;
        det.comp = c;
        if (best_id >= 0 && best <= tol_mm) {
            det.tp = true;
            det.matched_lesion = best_id;
            res.gt_detected[best_id] = true;
        }
        res.detections.push_back(std::move(det));
    }
    return res;
}

// DICE = 2|A n B| / (|A| + |B|) over voxel sets (given in linear-index order).
inline double tp_dice(const std::vector<std::array<int, 3>>& a,
                      const std::vector<std::array<int, 3>>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::vector<std::array<int, 3>> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::size_t inter = 0, i = 0, j = 0;
    while (i < sa.size() && j < sb.size()) {
        if (sa[i] == sb[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (sa[i] < sb[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return 2.0 * static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size());
}

}  // namespace lesionlab

#endif  // LESIONLAB_DETECT_HPP
