#ifndef LESIONLAB_PHANTOM_HPP
#define LESIONLAB_PHANTOM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "lesionlab/errors.hpp"
#include "lesionlab/rng.hpp"
#include "lesionlab/volume.hpp"

// Synthetic multi-channel volumes with ellipsoidal lesions and exact
// ground-truth voxel sets. Lesion placement keeps a 2-voxel gap between
// lesions so ground-truth identity is unambiguous under 26-connectivity.

namespace lesionlab {

struct PhantomSpec {
    Dims dims{64, 64, 64};
    Spacing spacing{1.0, 1.0, 1.0};
    int channels = 4;
    int lesions_min = 1;
    int lesions_max = 15;
    double radius_mm_lo = 1.5;  // semi-axes drawn log-uniform from this range
    double radius_mm_hi = 12.0;
    // Optional second size population: a fraction of lesions draw their
    // semi-axes from this range instead, giving a bimodal size mixture
    // (e.g. a subpopulation of small lesions alongside large ones). When a
    // contrast range is given the population also gets its own appearance;
    // otherwise it shares the primary contrast mixture.
    double radius2_mm_lo = 0.0;
    double radius2_mm_hi = 0.0;
    double radius2_fraction = 0.0;
    double radius2_contrast_lo = 0.0;
    double radius2_contrast_hi = 0.0;
    double contrast_lo = 0.5;  // per-lesion, per-channel additive offset
    double contrast_hi = 2.0;
    // Optional second lesion population: a fraction of lesions draw their
    // contrast from this band instead, giving a bimodal appearance mixture
    // (e.g. a faint subpopulation alongside bright ones).
    double contrast2_lo = 0.0;
    double contrast2_hi = 0.0;
    double contrast2_fraction = 0.0;
    double background_amplitude = 0.3;  // smooth low-frequency field
    double noise_sigma = 0.1;           // white noise
    // Lesion-shaped background distractors ("mimics"): same blob geometry but
    // never annotated. Their contrast range usually overlaps the low end of
    // the lesion range, so appearance alone cannot separate the two classes.
    int mimics_min = 0;
    int mimics_max = 0;
    double mimic_radius_mm_lo = 0.0;
    double mimic_radius_mm_hi = 0.0;
    double mimic_contrast_lo = 0.0;
    double mimic_contrast_hi = 0.0;
    // Like the lesion side, the distractor population may be a mixture: a
    // fraction of mimics draw size and contrast from these ranges instead.
    double mimic2_fraction = 0.0;
    double mimic2_radius_mm_lo = 0.0;
    double mimic2_radius_mm_hi = 0.0;
    double mimic2_contrast_lo = 0.0;
    double mimic2_contrast_hi = 0.0;
    std::uint64_t seed = 0;
    // Lesion-count bands for test-split stratification, thirds in order.
    std::array<std::pair<int, int>, 3> test_bands{{{1, 3}, {4, 10}, {11, 15}}};

    void validate() const {
        if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
            throw ConfigError("phantom: dims must be positive");
        if (spacing.sx <= 0 || spacing.sy <= 0 || spacing.sz <= 0)
            throw ConfigError("phantom: spacing must be positive");
        if (channels <= 0) throw ConfigError("phantom: channels must be positive");
        if (lesions_min < 0 || lesions_max < lesions_min)
            throw ConfigError("phantom: invalid lesion count range");
        if (radius_mm_lo <= 0 || radius_mm_hi < radius_mm_lo)
            throw ConfigError("phantom: invalid radius range");
        if (radius2_fraction < 0.0 || radius2_fraction > 1.0)
            throw ConfigError("phantom: radius2_fraction must lie in [0, 1]");
        if (radius2_fraction > 0.0 && (radius2_mm_lo <= 0 || radius2_mm_hi < radius2_mm_lo))
            throw ConfigError("phantom: invalid second radius range");
        if ((radius2_contrast_lo != 0.0 || radius2_contrast_hi != 0.0) &&
            radius2_contrast_hi < radius2_contrast_lo)
            throw ConfigError("phantom: invalid second-population contrast range");
        if (contrast_hi < contrast_lo)
            throw ConfigError("phantom: invalid contrast range");
        if (contrast2_fraction < 0.0 || contrast2_fraction > 1.0)
            throw ConfigError("phantom: contrast2_fraction must lie in [0, 1]");
        if (contrast2_fraction > 0.0 && contrast2_hi < contrast2_lo)
            throw ConfigError("phantom: invalid second contrast range");
        if (noise_sigma < 0 || background_amplitude < 0)
            throw ConfigError("phantom: negative texture level");
        if (mimics_min < 0 || mimics_max < mimics_min)
            throw ConfigError("phantom: invalid mimic count range");
        if (mimics_max > 0) {
            if (mimic_radius_mm_lo <= 0 || mimic_radius_mm_hi < mimic_radius_mm_lo)
                throw ConfigError("phantom: invalid mimic radius range");
            if (mimic_contrast_hi < mimic_contrast_lo)
                throw ConfigError("phantom: invalid mimic contrast range");
        }
        if (mimic2_fraction < 0.0 || mimic2_fraction > 1.0)
            throw ConfigError("phantom: mimic2_fraction must lie in [0, 1]");
        if (mimic2_fraction > 0.0) {
            if (mimic2_radius_mm_lo <= 0 || mimic2_radius_mm_hi < mimic2_radius_mm_lo)
                throw ConfigError("phantom: invalid second mimic radius range");
            if (mimic2_contrast_hi < mimic2_contrast_lo)
                throw ConfigError("phantom: invalid second mimic contrast range");
        }
        const double ex = dims.nx * spacing.sx, ey = dims.ny * spacing.sy,
                     ez = dims.nz * spacing.sz;
        if (lesions_max > 0 &&
            (2 * radius_mm_lo > ex || 2 * radius_mm_lo > ey || 2 * radius_mm_lo > ez)) {
            throw ConfigError("phantom: dims too small to place any lesion (smallest radius " +
                              std::to_string(radius_mm_lo) + " mm does not fit)");
        }
    }
};

struct Lesion {
    int id = 0;
    std::vector<std::array<int, 3>> voxels;  // (x,y,z), sorted by linear index
    double volume_mm3 = 0.0;
    std::array<double, 3> centroid_mm{0, 0, 0};
};

using LesionSet = std::vector<Lesion>;

enum class Split { train, validation, test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "?";
}

inline Split split_from(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "validation") return Split::validation;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "'");
}

struct Case {
    std::string id;
    Split split = Split::train;
    std::uint64_t case_seed = 0;
    int count_lo = 0, count_hi = 0;  // lesion-count range this case was drawn from
    Volume4 volume;
    LesionSet lesions;
};

struct Dataset {
    PhantomSpec spec;
    std::vector<Case> cases;

    std::vector<const Case*> cases_in(Split s) const {
        std::vector<const Case*> out;
        for (const Case& c : cases)
            if (c.split == s) out.push_back(&c);
        return out;
    }
};

inline Vol3<std::uint8_t> rasterize_mask(const LesionSet& lesions, Dims dims) {
    Vol3<std::uint8_t> mask(dims, 0);
    for (const Lesion& l : lesions)
        for (const auto& v : l.voxels) mask.at(v[0], v[1], v[2]) = 1;
    return mask;
}

namespace detail {

// Trilinearly interpolated coarse random field; node grid step is 8 voxels.
class SmoothField {
public:
    SmoothField(Dims dims, rng::Stream& rs) : dims_(dims) {
        gx_ = dims.nx / kStep + 2;
        gy_ = dims.ny / kStep + 2;
        gz_ = dims.nz / kStep + 2;
        nodes_.resize(static_cast<std::size_t>(gx_) * gy_ * gz_);
        for (auto& v : nodes_) v = rs.normal();
    }

    double at(int x, int y, int z) const {
        const double fx = static_cast<double>(x) / kStep;
        const double fy = static_cast<double>(y) / kStep;
        const double fz = static_cast<double>(z) / kStep;
        const int ix = static_cast<int>(fx), iy = static_cast<int>(fy),
                  iz = static_cast<int>(fz);
        const double tx = fx - ix, ty = fy - iy, tz = fz - iz;
        double acc = 0.0;
        for (int dz = 0; dz <= 1; ++dz) {
            for (int dy = 0; dy <= 1; ++dy) {
                for (int dx = 0; dx <= 1; ++dx) {
                    const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) *
                                     (dz ? tz : 1 - tz);
                    acc += w * node(ix + dx, iy + dy, iz + dz);
                }
            }
        }
        return acc;
    }

private:
    static constexpr int kStep = 8;
    double node(int x, int y, int z) const {
        return nodes_[(static_cast<std::size_t>(z) * gy_ + y) * gx_ + x];
    }
    Dims dims_;
    int gx_, gy_, gz_;
    std::vector<double> nodes_;
};

inline std::vector<std::array<int, 3>> rasterize_ellipsoid(const std::array<double, 3>& center,
                                                           const std::array<double, 3>& axes,
                                                           Dims dims, Spacing sp) {
    std::vector<std::array<int, 3>> voxels;
    const int x0 = std::max(0, static_cast<int>((center[0] - axes[0]) / sp.sx - 1));
    const int x1 = std::min(dims.nx - 1, static_cast<int>((center[0] + axes[0]) / sp.sx + 1));
    const int y0 = std::max(0, static_cast<int>((center[1] - axes[1]) / sp.sy - 1));
    const int y1 = std::min(dims.ny - 1, static_cast<int>((center[1] + axes[1]) / sp.sy + 1));
    const int z0 = std::max(0, static_cast<int>((center[2] - axes[2]) / sp.sz - 1));
    const int z1 = std::min(dims.nz - 1, static_cast<int>((center[2] + axes[2]) / sp.sz + 1));
    for (int z = z0; z <= z1; ++z) {
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const auto p = sp.center_mm(x, y, z);
                const double u = (p[0] - center[0]) / axes[0];
                const double v = (p[1] - center[1]) / axes[1];
                const double w = (p[2] - center[2]) / axes[2];
                if (u * u + v * v + w * w <= 1.0) voxels.push_back({x, y, z});
            }
        }
    }
    return voxels;  // scan order == linear index order
}

inline void dilate_into(Vol3<std::uint8_t>& occupancy,
                        const std::vector<std::array<int, 3>>& voxels, int radius) {
    const Dims d = occupancy.dims;
    for (const auto& v : voxels) {
        for (int dz = -radius; dz <= radius; ++dz) {
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int x = v[0] + dx, y = v[1] + dy, z = v[2] + dz;
                    if (d.contains(x, y, z)) occupancy.at(x, y, z) = 1;
                }
            }
        }
    }
}

}  // namespace detail

// Deterministic in (spec.seed, case_seed). Lesions that cannot be placed
// without touching an existing one within a 2-voxel gap are dropped after
// 100 attempts, with a warning on stderr.
inline Case generate_case(const PhantomSpec& spec, std::uint64_t case_seed) {
    spec.validate();
    const Dims dims = spec.dims;
    const Spacing sp = spec.spacing;

    Case out;
    out.case_seed = case_seed;
    out.count_lo = spec.lesions_min;
    out.count_hi = spec.lesions_max;
    out.volume = Volume4(dims, sp, spec.channels);

    rng::Stream count_rs(
        rng::derive_stream(spec.seed, {case_seed, rng::fnv1a64("count")}));
    const int target = count_rs.uniform_int(spec.lesions_min, spec.lesions_max);

    const std::array<double, 3> extent = {dims.nx * sp.sx, dims.ny * sp.sy, dims.nz * sp.sz};
    Vol3<std::uint8_t> occupancy(dims, 0);

    for (int i = 0; i < target; ++i) {
        rng::Stream rs(
            rng::derive_stream(spec.seed, {case_seed, rng::fnv1a64("lesion"), (std::uint64_t)i}));
        double rlo = spec.radius_mm_lo, rhi = spec.radius_mm_hi;
        if (spec.radius2_fraction > 0.0 && rs.uniform(0.0, 1.0) < spec.radius2_fraction) {
            rlo = spec.radius2_mm_lo;
            rhi = spec.radius2_mm_hi;
        }
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            std::array<double, 3> axes, center;
            bool fits = true;
            for (int d = 0; d < 3; ++d) {
                axes[d] = rs.log_uniform(rlo, rhi);
                if (2 * axes[d] > extent[d]) fits = false;
            }
            if (!fits) continue;
            for (int d = 0; d < 3; ++d) center[d] = rs.uniform(axes[d], extent[d] - axes[d]);
            auto voxels = detail::rasterize_ellipsoid(center, axes, dims, sp);
            if (voxels.empty()) continue;
            bool clash = false;
            for (const auto& v : voxels) {
                if (occupancy.at(v[0], v[1], v[2])) {
                    clash = true;
                    break;
                }
            }
            if (clash) continue;

            detail::dilate_into(occupancy, voxels, 2);
            Lesion l;
            l.id = i;
            l.volume_mm3 = static_cast<double>(voxels.size()) * sp.voxel_mm3();
            double cx = 0, cy = 0, cz = 0;
            for (const auto& v : voxels) {
                const auto p = sp.center_mm(v[0], v[1], v[2]);
                cx += p[0];
                cy += p[1];
                cz += p[2];
            }
            const double n = static_cast<double>(voxels.size());
            l.centroid_mm = {cx / n, cy / n, cz / n};
            l.voxels = std::move(voxels);
            out.lesions.push_back(std::move(l));
            placed = true;
        }
        if (!placed) {
            std::fprintf(stderr,
                         "phantom: warning: dropped lesion %d of case seed %llu "
                         "after 100 placement attempts\n",
                         i, static_cast<unsigned long long>(case_seed));
        }
    }

    // Mimics share the occupancy map, so they never come within the 2-voxel
    // gap of a lesion (or of each other). Unplaceable mimics are dropped
    // silently; they are texture, not ground truth.
    std::vector<std::vector<std::array<int, 3>>> mimic_voxels;
    std::vector<int> mimic_src;  // placement index of each placed mimic
    if (spec.mimics_max > 0) {
        rng::Stream mcount_rs(
            rng::derive_stream(spec.seed, {case_seed, rng::fnv1a64("mimic_count")}));
        const int mimic_target = mcount_rs.uniform_int(spec.mimics_min, spec.mimics_max);
        for (int i = 0; i < mimic_target; ++i) {
            rng::Stream rs(rng::derive_stream(
                spec.seed, {case_seed, rng::fnv1a64("mimic"), (std::uint64_t)i}));
            double rlo = spec.mimic_radius_mm_lo, rhi = spec.mimic_radius_mm_hi;
            if (spec.mimic2_fraction > 0.0 && rs.uniform(0.0, 1.0) < spec.mimic2_fraction) {
                rlo = spec.mimic2_radius_mm_lo;
                rhi = spec.mimic2_radius_mm_hi;
            }
            for (int attempt = 0; attempt < 100; ++attempt) {
                std::array<double, 3> axes, center;
                bool fits = true;
                for (int d = 0; d < 3; ++d) {
                    axes[d] = rs.log_uniform(rlo, rhi);
                    if (2 * axes[d] > extent[d]) fits = false;
                }
                if (!fits) continue;
                for (int d = 0; d < 3; ++d)
                    center[d] = rs.uniform(axes[d], extent[d] - axes[d]);
                auto voxels = detail::rasterize_ellipsoid(center, axes, dims, sp);
                if (voxels.empty()) continue;
                bool clash = false;
                for (const auto& v : voxels) {
                    if (occupancy.at(v[0], v[1], v[2])) {
                        clash = true;
                        break;
                    }
                }
                if (clash) continue;
                detail::dilate_into(occupancy, voxels, 2);
                mimic_voxels.push_back(std::move(voxels));
                mimic_src.push_back(i);
                break;
            }
        }
    }

    // Background texture + noise, then lesion contrast offsets.
    for (int c = 0; c < spec.channels; ++c) {
        rng::Stream bg_rs(rng::derive_stream(
            spec.seed, {case_seed, rng::fnv1a64("background"), (std::uint64_t)c}));
        detail::SmoothField field(dims, bg_rs);
        rng::Stream noise_rs(rng::derive_stream(
            spec.seed, {case_seed, rng::fnv1a64("noise"), (std::uint64_t)c}));
        float* plane = out.volume.data.data() + out.volume.index(c, 0, 0, 0);
        std::size_t idx = 0;
        for (int z = 0; z < dims.nz; ++z) {
            for (int y = 0; y < dims.ny; ++y) {
                for (int x = 0; x < dims.nx; ++x, ++idx) {
                    plane[idx] = static_cast<float>(spec.background_amplitude * field.at(x, y, z) +
                                                    noise_rs.normal(0.0, spec.noise_sigma));
                }
            }
        }
    }
    for (const Lesion& l : out.lesions) {
        rng::Stream crs(rng::derive_stream(
            spec.seed, {case_seed, rng::fnv1a64("contrast"), (std::uint64_t)l.id}));
        double lo = spec.contrast_lo, hi = spec.contrast_hi;
        bool own_band = false;
        if (spec.radius2_fraction > 0.0 &&
            (spec.radius2_contrast_lo != 0.0 || spec.radius2_contrast_hi != 0.0)) {
            // Population membership was decided by the first draw of the
            // lesion's placement stream; replay it to apply the population's
            // own contrast range.
            rng::Stream ms(rng::derive_stream(
                spec.seed, {case_seed, rng::fnv1a64("lesion"), (std::uint64_t)l.id}));
            if (ms.uniform(0.0, 1.0) < spec.radius2_fraction) {
                lo = spec.radius2_contrast_lo;
                hi = spec.radius2_contrast_hi;
                own_band = true;
            }
        }
        if (!own_band && spec.contrast2_fraction > 0.0 &&
            crs.uniform(0.0, 1.0) < spec.contrast2_fraction) {
            lo = spec.contrast2_lo;
            hi = spec.contrast2_hi;
        }
        for (int c = 0; c < spec.channels; ++c) {
            const float offset = static_cast<float>(crs.uniform(lo, hi));
            for (const auto& v : l.voxels) out.volume.at(c, v[0], v[1], v[2]) += offset;
        }
    }
    for (std::size_t i = 0; i < mimic_voxels.size(); ++i) {
        rng::Stream crs(rng::derive_stream(
            spec.seed, {case_seed, rng::fnv1a64("mimic_contrast"), (std::uint64_t)i}));
        double lo = spec.mimic_contrast_lo, hi = spec.mimic_contrast_hi;
        if (spec.mimic2_fraction > 0.0) {
            // Replay the population draw from the mimic's placement stream.
            rng::Stream ms(rng::derive_stream(
                spec.seed, {case_seed, rng::fnv1a64("mimic"), (std::uint64_t)mimic_src[i]}));
            if (ms.uniform(0.0, 1.0) < spec.mimic2_fraction) {
                lo = spec.mimic2_contrast_lo;
                hi = spec.mimic2_contrast_hi;
            }
        }
        for (int c = 0; c < spec.channels; ++c) {
            const float offset = static_cast<float>(crs.uniform(lo, hi));
            for (const auto& v : mimic_voxels[i]) out.volume.at(c, v[0], v[1], v[2]) += offset;
        }
    }
    return out;
}

// Case seeds derive from the master seed as
// derive_stream(seed, {fnv1a64("case"), case_index, attempt}). Test cases
// are stratified into the spec's lesion-count bands in contiguous thirds;
// a test case whose achieved count falls outside its band (dropped lesions)
// is regenerated with the next attempt number.
inline Dataset generate_dataset(const PhantomSpec& spec, int n_train, int n_val, int n_test) {
    spec.validate();
    if (n_train < 0 || n_val < 0 || n_test < 0)
        throw ConfigError("dataset: split sizes must be non-negative");

    Dataset ds;
    ds.spec = spec;
    int index = 0;
    auto seed_for = [&spec](int case_index, int attempt) {
        return rng::derive_stream(spec.seed, {rng::fnv1a64("case"), (std::uint64_t)case_index,
                                              (std::uint64_t)attempt});
    };
    char name[32];

    for (int i = 0; i < n_train; ++i, ++index) {
        Case c = generate_case(spec, seed_for(index, 0));
        std::snprintf(name, sizeof name, "train_%03d", i);
        c.id = name;
        c.split = Split::train;
        ds.cases.push_back(std::move(c));
    }
    for (int i = 0; i < n_val; ++i, ++index) {
        Case c = generate_case(spec, seed_for(index, 0));
        std::snprintf(name, sizeof name, "val_%03d", i);
        c.id = name;
        c.split = Split::validation;
        ds.cases.push_back(std::move(c));
    }
    for (int i = 0; i < n_test; ++i, ++index) {
        const int band = n_test > 0 ? (i * 3) / n_test : 0;
        PhantomSpec banded = spec;
        banded.lesions_min = spec.test_bands[band].first;
        banded.lesions_max = spec.test_bands[band].second;
        Case c;
        bool ok = false;
        for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
            c = generate_case(banded, seed_for(index, attempt));
            const int n = static_cast<int>(c.lesions.size());
            ok = n >= banded.lesions_min && n <= banded.lesions_max;
        }
        if (!ok) {
            throw ComputeError("dataset: unable to satisfy test stratification band " +
                               std::to_string(band) + " for case " + std::to_string(i));
        }
        std::snprintf(name, sizeof name, "test_%03d", i);
        c.id = name;
        c.split = Split::test;
        ds.cases.push_back(std::move(c));
    }
    return ds;
}

}  // namespace lesionlab

#endif  // LESIONLAB_PHANTOM_HPP
