#include <cmath>

#include "doctest.h"
#include "egofov/error.hpp"
#include "egofov/pipeline.hpp"
#include "egofov/synth.hpp"
#include "helpers.hpp"

using namespace egofov;

namespace {

SceneSpec small_scene(std::uint64_t seed, Texture texture = Texture::Glyphs) {
    SceneSpec spec;
    spec.seed = seed;
    spec.texture = texture;
    return spec;
}

ReferenceView view_of(const SyntheticPair& pair) { return ReferenceView{&pair.ref, nullptr, pair.geometry}; }

}  // namespace

TEST_CASE("config validation") {
    LocalizerConfig c;
    CHECK_NOTHROW(c.validate());
    c.alpha_override = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.alpha_max = -0.1;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.ratio = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.min_inlier_threshold = -1.0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("pov center") {
    CHECK(pov_center(GrayImage(2528, 1856)) == Point2{1264, 928});
}

TEST_CASE("noiseless pair is recovered") {
    TruthParams tp;
    tp.identity_like = true;
    LocalizerConfig config;
    config.alpha_override = 0.0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SyntheticPair pair = generate_pair(small_scene(seed), tp);
        const LocalizationResult r = localize(pair.pov, view_of(pair), pair.sensor, config);
        REQUIRE(r.status == LocalizationStatus::Matched);
        CHECK(r.accepted);
        CHECK(r.alpha == 0.0);
        REQUIRE(r.f.has_value());
        CHECK(*r.f == *r.f_ref);
        CHECK(distance(*r.f, pair.truth.focus) <= 1.0);
        REQUIRE(r.affine.has_value());
        for (int k = 0; k < 6; ++k) CHECK(std::abs(r.affine->m[k] - pair.truth.affine.m[k]) <= 1e-3);
        CHECK(r.score <= config.accept_threshold);
    }
}

TEST_CASE("sensor blend uses reliability") {
    TruthParams tp;
    tp.identity_like = true;
    tp.reliability = 0.5;
    const SyntheticPair pair = generate_pair(small_scene(4), tp);
    const LocalizationResult r = localize(pair.pov, view_of(pair), pair.sensor, LocalizerConfig{});
    REQUIRE(r.status == LocalizationStatus::Matched);
    REQUIRE(r.f_s.has_value());
    CHECK(r.alpha == doctest::Approx(0.25));
    CHECK(*r.f == blend_focus(*r.f_s, *r.f_ref, 0.25, pair.ref.width()));
    LocalizerConfig one;
    one.alpha_override = 1.0;
    const LocalizationResult s = localize(pair.pov, view_of(pair), pair.sensor, one);
    CHECK(*s.f == *s.f_s);
}

TEST_CASE("heavy occlusion falls back to the sensor") {
    TruthParams tp;
    tp.occlusion = 0.9;
    tp.noise_sigma = 10.0;
    int fallbacks = 0;
    for (std::uint64_t seed = 10; seed < 16; ++seed) {
        const SyntheticPair pair = generate_pair(small_scene(seed, Texture::Noise), tp);
        const LocalizationResult r = localize(pair.pov, view_of(pair), pair.sensor, LocalizerConfig{});
        if (r.status != LocalizationStatus::SensorFallback) continue;
        ++fallbacks;
        CHECK(r.alpha == 1.0);
        REQUIRE(r.f_s.has_value());
        CHECK(*r.f == *r.f_s);
        CHECK_FALSE(r.accepted);
        CHECK((r.note == "no-consensus" || r.note == "insufficient-matches"));
    }
    CHECK(fallbacks > 0);
}

TEST_CASE("no match and no pose fails") {
    const GrayImage blank(256, 190, 80);
    TruthParams tp;
    tp.identity_like = true;
    const SyntheticPair pair = generate_pair(small_scene(5), tp);
    const LocalizationResult r = localize(blank, view_of(pair), std::nullopt, LocalizerConfig{});
    CHECK(r.status == LocalizationStatus::Failed);
    CHECK_FALSE(r.f.has_value());
    CHECK_FALSE(r.accepted);
    const LocalizationResult s = localize(blank, view_of(pair), pair.sensor, LocalizerConfig{});
    CHECK(s.status == LocalizationStatus::SensorFallback);
    CHECK(*s.f == *s.f_s);
}

TEST_CASE("flat references and unknown geometry") {
    TruthParams tp;
    tp.identity_like = true;
    const SyntheticPair pair = generate_pair(small_scene(6), tp);
    const ReferenceView none{&pair.ref, nullptr, std::monostate{}};
    const LocalizationResult r = localize(pair.pov, none, pair.sensor, LocalizerConfig{});
    CHECK(r.status == LocalizationStatus::Matched);
    CHECK_FALSE(r.f_s.has_value());
    CHECK(r.alpha == 0.0);
    CHECK(*r.f == *r.f_ref);
}

TEST_CASE("localize is deterministic") {
    TruthParams tp;
    tp.noise_sigma = 10;
    tp.brightness_shift = 20;
    const SyntheticPair pair = generate_pair(small_scene(7), tp);
    const LocalizationResult a = localize(pair.pov, view_of(pair), pair.sensor, LocalizerConfig{});
    const LocalizationResult b = localize(pair.pov, view_of(pair), pair.sensor, LocalizerConfig{});
    CHECK(a.f == b.f);
    CHECK(a.score == b.score);
    CHECK(a.inliers == b.inliers);
}
