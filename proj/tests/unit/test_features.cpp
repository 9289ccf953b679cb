#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "egofov/error.hpp"
#include "egofov/features.hpp"
#include "helpers.hpp"

using namespace egofov;

namespace {

MserParams with_pixels() {
    MserParams p;
    p.keep_pixels = true;
    return p;
}

GrayImage patch_scene() {
    GrayImage img(64, 64, 0);
    for (int y = 20; y < 30; ++y)
        for (int x = 30; x < 40; ++x) img.at(x, y) = 200;
    return img;
}

GrayImage remap(const GrayImage& img, const std::array<std::uint8_t, 256>& lut) {
    GrayImage out = img;
    for (auto& v : out.pixels()) v = lut[v];
    return out;
}

// Strictly increasing map of [0, 255] into [0, 255] restricted to the values present.
std::array<std::uint8_t, 256> random_increasing(Rng& rng, const GrayImage& img) {
    std::set<int> present(img.pixels().begin(), img.pixels().end());
    std::vector<int> targets;
    std::set<int> chosen;
    while (chosen.size() < present.size()) chosen.insert(rng.integer(0, 255));
    targets.assign(chosen.begin(), chosen.end());
    std::array<std::uint8_t, 256> lut{};
    std::size_t k = 0;
    for (int v : present) lut[v] = static_cast<std::uint8_t>(targets[k++]);
    return lut;
}

std::vector<std::pair<Polarity, std::vector<int>>> pixel_sets(const std::vector<InterestRegion>& rs) {
    std::vector<std::pair<Polarity, std::vector<int>>> out;
    for (const auto& r : rs) out.emplace_back(r.polarity, r.pixels);
    return out;
}

}  // namespace

TEST_CASE("mser params validation") {
    MserParams p;
    CHECK_NOTHROW(p.validate());
    p.delta = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.max_area = 1.5;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.min_area = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.max_variation = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("constant image has no regions") {
    CHECK(detect_mser(GrayImage(32, 32, 90), MserParams{}).empty());
}

TEST_CASE("single bright patch is one region") {
    const auto regions = detect_mser(patch_scene(), with_pixels());
    REQUIRE(regions.size() == 1);
    const InterestRegion& r = regions[0];
    CHECK(r.polarity == Polarity::Bright);
    CHECK(r.pixel_count == 100);
    CHECK(r.centroid.x == doctest::Approx(34.5));
    CHECK(r.centroid.y == doctest::Approx(24.5));
    CHECK_FALSE(r.touches_border);
    // Brute-force oracle: thresholding at every level, the component holding
    // the patch center is exactly the patch for all levels in (0, 200].
    for (int t = 1; t <= 255; ++t) {
        int count = 0;
        const GrayImage img = patch_scene();
        for (auto v : img.pixels()) count += v >= t;
        if (t <= 200) CHECK(count == 100); else CHECK(count == 0);
    }
}

TEST_CASE("monotone remaps keep region pixel sets") {
    Rng rng(21);
    for (int t = 0; t < 8; ++t) {
        const GrayImage img = testing::blob_image(rng, 48, 40, 6);
        const auto base = pixel_sets(detect_mser(img, with_pixels()));
        for (int m = 0; m < 3; ++m) {
            const auto mapped = pixel_sets(detect_mser(remap(img, random_increasing(rng, img)), with_pixels()));
            CHECK(mapped == base);
        }
    }
}

TEST_CASE("regions are extremal, connected and respect params") {
    Rng rng(5);
    const MserParams params = with_pixels();
    for (int t = 0; t < 6; ++t) {
        const GrayImage img = testing::blob_image(rng, 50, 45, 8);
        const auto regions = detect_mser(img, params);
        const int w = img.width(), h = img.height();
        for (const auto& r : regions) {
            CHECK(r.pixel_count >= params.min_area);
            CHECK(r.pixel_count <= params.max_area * w * h);
            CHECK(static_cast<int>(r.pixels.size()) == r.pixel_count);
            CHECK(r.second_moments.xx >= -1e-9);
            CHECK(r.second_moments.yy >= -1e-9);
            CHECK(r.second_moments.det() >= -1e-9);
            std::set<int> inside(r.pixels.begin(), r.pixels.end());
            const int thr = r.representative_intensity;
            const bool bright = r.polarity == Polarity::Bright;
            bool extremal = true;
            for (int idx : r.pixels) {
                const int x = idx % w, y = idx / w;
                const int v = img.at(x, y);
                if (bright ? v < thr : v > thr) extremal = false;
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
                    if (inside.count(ny[k] * w + nx[k])) continue;
                    const int u = img.at(nx[k], ny[k]);
                    if (bright ? u >= thr : u <= thr) extremal = false;
                }
            }
            CHECK(extremal);
            // 4-connectivity by flood fill inside the set.
            std::set<int> seen{r.pixels.front()};
            std::vector<int> stack{r.pixels.front()};
            while (!stack.empty()) {
                const int idx = stack.back();
                stack.pop_back();
                const int x = idx % w, y = idx / w;
                const int cand[4] = {x > 0 ? idx - 1 : -1, x + 1 < w ? idx + 1 : -1, y > 0 ? idx - w : -1,
                                     y + 1 < h ? idx + w : -1};
                for (int c : cand)
                    if (c >= 0 && inside.count(c) && seen.insert(c).second) stack.push_back(c);
            }
            CHECK(seen.size() == inside.size());
        }
    }
}

TEST_CASE("mser is deterministic") {
    Rng rng(9);
    const GrayImage img = testing::blob_image(rng, 60, 60, 10);
    const auto a = detect_mser(img, with_pixels());
    const auto b = detect_mser(img, with_pixels());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].pixels == b[i].pixels);
        CHECK(a[i].centroid == b[i].centroid);
        CHECK(a[i].representative_intensity == b[i].representative_intensity);
    }
}

TEST_CASE("polarity switches") {
    GrayImage img(40, 40, 200);
    for (int y = 10; y < 20; ++y)
        for (int x = 10; x < 20; ++x) img.at(x, y) = 10;
    MserParams p;
    auto regions = detect_mser(img, p);
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].polarity == Polarity::Dark);
    p.dark = false;
    CHECK(detect_mser(img, p).empty());
}

TEST_CASE("region ellipse") {
    InterestRegion r;
    r.pixel_count = 100;
    r.centroid = {3, 4};
    SUBCASE("isotropic moments give a circle") {
        r.second_moments = {2.0, 0.0, 2.0};
        const Ellipse e = region_ellipse(r);
        CHECK(e.major == doctest::Approx(e.minor));
        CHECK(e.orientation == doctest::Approx(0.0));
        CHECK((std::numbers::pi * e.major * e.minor) == doctest::Approx(100.0));
        CHECK(e.center == Point2{3, 4});
    }
    SUBCASE("diag(4s, s) is a 2:1 ellipse along x") {
        r.second_moments = {4.0, 0.0, 1.0};
        const Ellipse e = region_ellipse(r);
        CHECK((e.major / e.minor) == doctest::Approx(2.0));
        CHECK(std::abs(e.orientation) < 1e-9);
        CHECK((std::numbers::pi * e.major * e.minor) == doctest::Approx(100.0));
    }
    SUBCASE("10x10 square is near circular at its center") {
        const auto regions = detect_mser(patch_scene(), MserParams{});
        REQUIRE(regions.size() == 1);
        const Ellipse e = region_ellipse(regions[0]);
        CHECK(e.center.x == doctest::Approx(34.5));
        CHECK(e.center.y == doctest::Approx(24.5));
        CHECK((e.major / e.minor) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("degenerate moments throw") {
        r.second_moments = {1.0, 1.0, 1.0};
        try {
            region_ellipse(r);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::DegenerateRegion);
        }
    }
}

TEST_CASE("normalize patch") {
    PatchParams params;  // 32 px, scale 2
    SUBCASE("constant image gives constant patch") {
        const GrayImage patch = normalize_patch(GrayImage(50, 50, 123), Ellipse{{25, 25}, 5, 5, 0}, params);
        CHECK(patch == GrayImage(32, 32, 123));
    }
    Rng rng(4);
    const GrayImage img = testing::random_image(rng, 90, 60);
    SUBCASE("identity case is a direct crop") {
        const Ellipse e{{20.5, 30.5}, 8.0, 8.0, 0.0};
        const GrayImage patch = normalize_patch(img, e, params);
        for (int v = 0; v < 32; ++v)
            for (int u = 0; u < 32; ++u) CHECK(patch.at(u, v) == img.at(u + 5, v + 15));
    }
    SUBCASE("2:1 ellipse samples x at twice the step") {
        GrayImage grating(90, 60);
        for (int y = 0; y < 60; ++y)
            for (int x = 0; x < 90; ++x)
                grating.at(x, y) = static_cast<std::uint8_t>(std::lround(127.5 + 120.0 * std::sin(0.7 * x + 0.2 * y)));
        const Ellipse e{{40.0, 20.5}, 16.0, 8.0, 0.0};
        const GrayImage patch = normalize_patch(grating, e, params);
        for (int v = 0; v < 32; ++v)
            for (int u = 0; u < 32; ++u) CHECK(patch.at(u, v) == grating.at(2 * u + 9, v + 5));
    }
}

TEST_CASE("sift descriptor") {
    SUBCASE("constant patch is degenerate and zero") {
        const Descriptor d = sift_descriptor(GrayImage(32, 32, 40));
        CHECK(d.degenerate);
        for (float v : d.values) CHECK(v == 0.0f);
    }
    SUBCASE("random patches have unit norm") {
        Rng rng(8);
        for (int t = 0; t < 20; ++t) {
            const Descriptor d = sift_descriptor(testing::random_image(rng, 32, 32));
            double sq = 0.0;
            for (float v : d.values) sq += double(v) * v;
            CHECK_FALSE(d.degenerate);
            CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    SUBCASE("horizontal step edge concentrates in vertical gradient bins") {
        GrayImage patch(32, 32, 20);
        for (int y = 16; y < 32; ++y)
            for (int x = 0; x < 32; ++x) patch.at(x, y) = 220;
        const Descriptor d = sift_descriptor(patch);
        double vertical = 0.0, total = 0.0;
        for (int i = 0; i < 128; ++i) {
            total += d.values[i];
            if (i % 8 == 2 || i % 8 == 6) vertical += d.values[i];
        }
        CHECK((vertical / total) > 0.99);
    }
    SUBCASE("non-square or small patch is rejected") {
        CHECK_THROWS_AS(sift_descriptor(GrayImage(32, 30)), Error);
        CHECK_THROWS_AS(sift_descriptor(GrayImage(8, 8)), Error);
    }
}

TEST_CASE("normalize clamp caps bins before renormalizing") {
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> bins(128);
        for (auto& b : bins) b = rng.uniform() < 0.1 ? rng.uniform(0, 50) : rng.uniform(0, 1);
        std::vector<double> clamped = bins;
        double sq = 0.0;
        for (double b : bins) sq += b * b;
        for (auto& b : clamped) b = std::min(b / std::sqrt(sq), 0.2);
        for (double b : clamped) CHECK(b <= 0.2 + 1e-6);
        REQUIRE(detail::normalize_clamp(bins, 0.2));
        double n2 = 0.0;
        for (double b : bins) n2 += b * b;
        CHECK(std::sqrt(n2) == doctest::Approx(1.0).epsilon(1e-9));
    }
    std::vector<double> zero(128, 0.0);
    CHECK_FALSE(detail::normalize_clamp(zero, 0.2));
}

TEST_CASE("extract features keeps lists aligned and drops border regions") {
    SceneSpec spec;
    spec.seed = 3;
    spec.ref_width = 256;
    spec.ref_height = 128;
    const GrayImage img = render_scene(spec);
    const FeatureSet fs = extract_features(img);
    CHECK(fs.regions.size() == fs.descriptors.size());
    CHECK(fs.ellipses.size() == fs.descriptors.size());
    CHECK(fs.size() > 10);
    for (std::size_t i = 0; i < fs.size(); ++i) {
        CHECK_FALSE(fs.descriptors[i].degenerate);
        CHECK_FALSE(fs.regions[i].touches_border);
    }
    FeatureParams keep;
    keep.drop_border_regions = false;
    CHECK(extract_features(img, keep).size() >= fs.size());
}

TEST_CASE("region dump format") {
    std::ostringstream out;
    write_regions(out, detect_mser(patch_scene(), MserParams{}));
    std::istringstream in(out.str());
    double cx, cy, area, m11, m12, m22;
    std::string pol;
    int t;
    REQUIRE(static_cast<bool>(in >> cx >> cy >> area >> m11 >> m12 >> m22 >> pol >> t));
    CHECK(cx == doctest::Approx(34.5));
    CHECK(area == 100);
}
