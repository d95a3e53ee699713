#ifndef LESIONLAB_CENSOR_HPP
#define LESIONLAB_CENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lesionlab/errors.hpp"
#include "lesionlab/phantom.hpp"
#include "lesionlab/rng.hpp"

// False-negative injection: remove whole lesions from training/validation
// annotations, either independently at random or smallest-first. The image
// volumes and the evaluation ground truth are never modified.

namespace lesionlab {

enum class CensorMode { none, stochastic, size_based };

inline const char* censor_mode_name(CensorMode m) {
    switch (m) {
        case CensorMode::none: return "none";
        case CensorMode::stochastic: return "stochastic";
        case CensorMode::size_based: return "size_based";
    }
    return "?";
}

inline CensorMode censor_mode_from(const std::string& s) {
    if (s == "none") return CensorMode::none;
    if (s == "stochastic") return CensorMode::stochastic;
    if (s == "size_based") return CensorMode::size_based;
    throw ConfigError("unknown censor mode '" + s + "'");
}

struct CensorPlan {
    CensorMode mode = CensorMode::none;
    double p = 0.0;
    std::uint64_t seed = 0;                             // stochastic only
    std::vector<std::pair<std::string, int>> removed;   // (case_id, lesion_id), sorted
    double achieved_rate = 0.0;

    bool contains(const std::string& case_id, int lesion_id) const {
        return std::binary_search(removed.begin(), removed.end(),
                                  std::make_pair(case_id, lesion_id));
    }
};

// Each lesion is removed by an independent Bernoulli(p) draw from a stream
// keyed by (seed, case_id, lesion_id), so plans do not depend on case order.
inline CensorPlan censor_stochastic(const std::vector<const Case*>& split, double p,
                                    std::uint64_t seed) {
    if (p < 0.0 || p > 1.0)
        throw ConfigError("censor_stochastic: p must lie in [0,1], got " + std::to_string(p));
    CensorPlan plan;
    plan.mode = CensorMode::stochastic;
    plan.p = p;
    plan.seed = seed;
    std::size_t total = 0;
    for (const Case* c : split) {
        for (const Lesion& l : c->lesions) {
            ++total;
            rng::Stream rs(rng::derive_stream(
                seed, {rng::fnv1a64(c->id.c_str()), static_cast<std::uint64_t>(l.id)}));
            if (rs.bernoulli(p)) plan.removed.emplace_back(c->id, l.id);
        }
    }
    std::sort(plan.removed.begin(), plan.removed.end());
    plan.achieved_rate =
        total ? static_cast<double>(plan.removed.size()) / static_cast<double>(total) : 0.0;
    return plan;
}

// Pool all lesions in the split, sort ascending by volume with a
// (case_id, lesion_id) lexicographic tie-break, and remove the first
// floor(p * n). Deterministic; no RNG involved.
inline CensorPlan censor_size_based(const std::vector<const Case*>& split, double p) {
    if (p < 0.0 || p > 1.0)
        throw ConfigError("censor_size_based: p must lie in [0,1], got " + std::to_string(p));
    struct Entry {
        double volume;
        std::string case_id;
        int lesion_id;
    };
    std::vector<Entry> pool;
    for (const Case* c : split)
        for (const Lesion& l : c->lesions) pool.push_back({l.volume_mm3, c->id, l.id});
    std::sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) {
        if (a.volume != b.volume) return a.volume < b.volume;
        if (a.case_id != b.case_id) return a.case_id < b.case_id;
        return a.lesion_id < b.lesion_id;
    });

    CensorPlan plan;
    plan.mode = CensorMode::size_based;
    plan.p = p;
    const std::size_t k = static_cast<std::size_t>(
        std::floor(p * static_cast<double>(pool.size())));
    for (std::size_t i = 0; i < k; ++i)
        plan.removed.emplace_back(pool[i].case_id, pool[i].lesion_id);
    std::sort(plan.removed.begin(), plan.removed.end());
    plan.achieved_rate = pool.empty() ? 0.0
                                      : static_cast<double>(k) / static_cast<double>(pool.size());
    return plan;
}

inline LesionSet retained_lesions(const Case& c, const CensorPlan& plan) {
    LesionSet out;
    for (const Lesion& l : c.lesions)
        if (!plan.contains(c.id, l.id)) out.push_back(l);
    return out;
}

// Censored annotation mask for one case; the uncensored LesionSet stays on
// the Case for evaluation.
inline Vol3<std::uint8_t> apply_plan(const Case& c, const CensorPlan& plan) {
    return rasterize_mask(retained_lesions(c, plan), c.volume.dims);
}

}  // namespace lesionlab

#endif  // LESIONLAB_CENSOR_HPP
