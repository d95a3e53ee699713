#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <set>
#include <vector>

#include "lesionlab/detect.hpp"
#include "lesionlab/rng.hpp"

using namespace lesionlab;

namespace {

// Independent reference labeling: raster-scan seeded depth-first flood fill
// over an explicit neighbor enumeration.
std::vector<std::vector<std::array<int, 3>>> flood_fill_oracle(const Vol3<std::uint8_t>& mask,
                                                               int connectivity) {
    std::vector<std::vector<std::array<int, 3>>> comps;
    std::vector<char> visited(mask.data.size(), 0);
    for (std::size_t start = 0; start < mask.data.size(); ++start) {
        if (!mask.data[start] || visited[start]) continue;
        std::vector<std::array<int, 3>> comp;
        std::vector<std::size_t> stack = {start};
        visited[start] = 1;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            const auto v = mask.dims.unindex(cur);
            comp.push_back(v);
            for (int dz = -1; dz <= 1; ++dz) {
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
                        if (manhattan == 0) continue;
                        if (connectivity == 6 && manhattan > 1) continue;
                        if (connectivity == 18 && manhattan > 2) continue;
                        const int x = v[0] + dx, y = v[1] + dy, z = v[2] + dz;
                        if (!mask.dims.contains(x, y, z)) continue;
                        const std::size_t ni = mask.dims.index(x, y, z);
                        if (!mask.data[ni] || visited[ni]) continue;
                        visited[ni] = 1;
                        stack.push_back(ni);
                    }
                }
            }
        }
        std::sort(comp.begin(), comp.end(),
                  [&](const auto& a, const auto& b) {
                      return mask.dims.index(a[0], a[1], a[2]) <
                             mask.dims.index(b[0], b[1], b[2]);
                  });
        comps.push_back(std::move(comp));
    }
    return comps;  // seeded in raster order => already ordered by min linear index
}

}  // namespace

TEST_CASE("binarize: threshold conventions") {
    Vol3<float> prob({2, 2, 2}, 0.5f);
    auto ones = binarize(prob, 0.10);
    CHECK(std::count(ones.data.begin(), ones.data.end(), 1) == 8);

    Vol3<float> zero({2, 2, 2}, 0.0f);
    auto none = binarize(zero, 0.10);
    CHECK(std::count(none.data.begin(), none.data.end(), 1) == 0);

    // Exact-threshold voxel is included (>= convention).
    Vol3<float> edge({1, 1, 1}, 0.10f);
    CHECK(binarize(edge, 0.10).data[0] == 1);
    Vol3<float> below({1, 1, 1}, 0.099f);
    CHECK(binarize(below, 0.10).data[0] == 0);
}

TEST_CASE("binarize: lowering the threshold never shrinks the foreground") {
    rng::Stream rs(5);
    Vol3<float> prob({8, 8, 8});
    for (auto& v : prob.data) v = static_cast<float>(rs.next_unit());
    long prev = -1;
    for (double thr : {0.9, 0.5, 0.2, 0.1, 0.0}) {
        auto m = binarize(prob, thr);
        const long cnt = std::count(m.data.begin(), m.data.end(), 1);
        CHECK(cnt >= prev);
        prev = cnt;
    }
}

TEST_CASE("connected_components_3d: basic connectivity semantics") {
    Vol3<std::uint8_t> mask({3, 3, 3}, 0);
    CHECK(connected_components_3d(mask, 26).empty());

    // Two voxels touching only across a full diagonal.
    mask.at(0, 0, 0) = 1;
    mask.at(1, 1, 1) = 1;
    CHECK(connected_components_3d(mask, 26).size() == 1);
    CHECK(connected_components_3d(mask, 18).size() == 2);
    CHECK(connected_components_3d(mask, 6).size() == 2);

    // Edge-diagonal neighbors (two axes differ) join at 18 but not 6.
    Vol3<std::uint8_t> edge({3, 3, 3}, 0);
    edge.at(0, 0, 0) = 1;
    edge.at(1, 1, 0) = 1;
    CHECK(connected_components_3d(edge, 18).size() == 1);
    CHECK(connected_components_3d(edge, 6).size() == 2);

    CHECK_THROWS_AS(connected_components_3d(mask, 4), ConfigError);
}

TEST_CASE("connected_components_3d: ordered by minimum linear index") {
    Vol3<std::uint8_t> mask({8, 8, 1}, 0);
    mask.at(6, 0, 0) = 1;  // linear index 6
    mask.at(0, 3, 0) = 1;  // linear index 24
    mask.at(2, 1, 0) = 1;  // linear index 10
    auto comps = connected_components_3d(mask, 26);
    REQUIRE(comps.size() == 3);
    CHECK(comps[0][0] == std::array<int, 3>{6, 0, 0});
    CHECK(comps[1][0] == std::array<int, 3>{2, 1, 0});
    CHECK(comps[2][0] == std::array<int, 3>{0, 3, 0});
}

TEST_CASE("connected_components_3d: agrees with flood-fill oracle on random grids") {
    rng::Stream rs(77);
    int checked = 0;
    for (int trial = 0; trial < 1050; ++trial) {
        Vol3<std::uint8_t> mask({16, 16, 16}, 0);
        const double density = rs.uniform(0.02, 0.85);
        for (auto& v : mask.data) v = rs.bernoulli(density) ? 1 : 0;
        const int connectivity = std::array<int, 3>{6, 18, 26}[trial % 3];
        auto got = connected_components_3d(mask, connectivity);
        auto want = flood_fill_oracle(mask, connectivity);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            REQUIRE(got[i] == want[i]);
        }
        ++checked;
    }
    CHECK(checked >= 1000);
}

TEST_CASE("make_components: confidence, centroid, and volume bookkeeping") {
    Spacing sp{1.0, 1.0, 2.0};
    Vol3<float> prob({4, 4, 4}, 0.0f);
    prob.at(1, 1, 1) = 0.4f;
    prob.at(2, 1, 1) = 0.8f;
    auto mask = binarize(prob, 0.10);
    auto comps = make_components(connected_components_3d(mask, 26), prob, sp);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].voxels.size() == 2);
    CHECK_THAT(comps[0].confidence,
               Catch::Matchers::WithinAbs((0.4 + 0.8) / 2.0, 1e-6));
    CHECK(comps[0].volume_mm3 == 2.0 * sp.voxel_mm3());
    CHECK_THAT(comps[0].centroid_mm[0], Catch::Matchers::WithinAbs(2.0, 1e-12));
    CHECK_THAT(comps[0].centroid_mm[1], Catch::Matchers::WithinAbs(1.5, 1e-12));
    CHECK_THAT(comps[0].centroid_mm[2], Catch::Matchers::WithinAbs(3.0, 1e-12));
}

TEST_CASE("match: boundary conventions and labels") {
    Spacing sp{1.0, 1.0, 1.0};
    Lesion gt;
    gt.id = 4;
    gt.voxels = {{5, 5, 5}};
    gt.volume_mm3 = 1.0;
    gt.centroid_mm = {5.5, 5.5, 5.5};
    LesionSet lesions = {gt};

    auto comp_at = [&](std::vector<std::array<int, 3>> voxels) {
        Vol3<float> prob({16, 16, 16}, 0.0f);
        for (auto& v : voxels) prob.at(v[0], v[1], v[2]) = 0.9f;
        auto comps =
            make_components(connected_components_3d(binarize(prob, 0.1), 26), prob, sp);
        REQUIRE(comps.size() == 1);
        return comps[0];
    };

    SECTION("centroid inside the lesion is a TP at distance zero") {
        auto m = match({comp_at({{5, 5, 5}})}, lesions, sp, 1.0);
        REQUIRE(m.detections.size() == 1);
        CHECK(m.detections[0].tp);
        CHECK(m.detections[0].matched_lesion == 4);
        CHECK(m.gt_detected.at(4));
    }
    SECTION("centroid exactly 1.0 mm away is still a TP") {
        auto m = match({comp_at({{6, 5, 5}})}, lesions, sp, 1.0);
        REQUIRE(m.detections.size() == 1);
        CHECK(m.detections[0].tp);
    }
    SECTION("a far component is an FP and the lesion stays undetected") {
        auto m = match({comp_at({{15, 15, 15}})}, lesions, sp, 1.0);
        REQUIRE(m.detections.size() == 1);
        CHECK(!m.detections[0].tp);
        CHECK(m.detections[0].matched_lesion == -1);
        CHECK(!m.gt_detected.at(4));
    }
    SECTION("two components on one lesion: both TP, lesion counted once") {
        auto a = comp_at({{5, 5, 5}});
        auto b = comp_at({{6, 5, 5}});
        auto m = match({a, b}, lesions, sp, 1.0);
        CHECK(m.detections[0].tp);
        CHECK(m.detections[1].tp);
        CHECK(m.gt_detected.size() == 1);
        CHECK(m.gt_detected.at(4));
    }
}

TEST_CASE("match: translation consistency away from borders") {
    Spacing sp{1.0, 1.0, 1.0};
    rng::Stream rs(31);
    for (int trial = 0; trial < 20; ++trial) {
        Vol3<float> prob({20, 20, 20}, 0.0f);
        LesionSet gt;
        Lesion l;
        l.id = 0;
        for (int i = 0; i < 3; ++i) {
            const int x = rs.uniform_int(4, 10), y = rs.uniform_int(4, 10),
                      z = rs.uniform_int(4, 10);
            l.voxels.push_back({x, y, z});
        }
        gt.push_back(l);
        const int px = rs.uniform_int(4, 10), py = rs.uniform_int(4, 10),
                  pz = rs.uniform_int(4, 10);
        prob.at(px, py, pz) = 0.6f;

        auto run = [&](int off) {
            Vol3<float> p2({20, 20, 20}, 0.0f);
            p2.at(px + off, py + off, pz + off) = 0.6f;
            LesionSet g2 = gt;
            for (auto& v : g2[0].voxels) {
                v = {v[0] + off, v[1] + off, v[2] + off};
            }
            auto comps =
                make_components(connected_components_3d(binarize(p2, 0.1), 26), p2, sp);
            return match(comps, g2, sp, 1.0).detections[0].tp;
        };
        CHECK(run(0) == run(5));
    }
}

TEST_CASE("tp_dice: overlap arithmetic") {
    std::vector<std::array<int, 3>> a, b;
    for (int i = 0; i < 100; ++i) a.push_back({i, 0, 0});
    CHECK(tp_dice(a, a) == 1.0);

    for (int i = 100; i < 200; ++i) b.push_back({i, 0, 0});
    CHECK(tp_dice(a, b) == 0.0);

    b.clear();
    for (int i = 40; i < 140; ++i) b.push_back({i, 0, 0});  // overlap 60
    CHECK_THAT(tp_dice(a, b), Catch::Matchers::WithinAbs(0.6, 1e-12));
}
