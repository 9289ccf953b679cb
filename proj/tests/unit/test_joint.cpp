#include <cmath>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "egofov/error.hpp"
#include "egofov/joint.hpp"
#include "egofov/synth.hpp"
#include "helpers.hpp"

using namespace egofov;

namespace {

Stream stream_at(const std::string& id, const std::vector<std::int64_t>& times) {
    Stream s;
    s.person_id = id;
    for (auto t : times) s.frames.push_back({t, {}, {}});
    return s;
}

PairTimeline timeline(const std::string& a, const std::string& b, const std::vector<int>& flags,
                      std::int64_t step = 1000) {
    PairTimeline tl{a, b, step, {}};
    for (std::size_t i = 0; i < flags.size(); ++i) {
        tl.samples.push_back({static_cast<std::int64_t>(i) * step, flags[i] ? 0.1 : 0.9, flags[i] != 0});
    }
    return tl;
}

std::vector<PairTimeline> four_people(const std::map<std::pair<std::string, std::string>, std::vector<int>>& joint) {
    const std::vector<std::string> ids{"P1", "P2", "P3", "P4"};
    std::vector<PairTimeline> out;
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            const auto it = joint.find({ids[i], ids[j]});
            out.push_back(timeline(ids[i], ids[j], it == joint.end() ? std::vector<int>(4, 0) : it->second));
        }
    return out;
}

GrayImage view(const GrayImage& scene, double cx) { return crop(scene, Window{{cx, 256}, 256, 188}, true); }

}  // namespace

TEST_CASE("params and stream validation") {
    JointParams p;
    CHECK_NOTHROW(p.validate());
    p.stride = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.tick_ms = 0;
    CHECK_THROWS_AS(p.validate(), Error);

    auto expect_session_error = [](const std::vector<Stream>& s) {
        try {
            validate_streams(s);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Session);
        }
    };
    expect_session_error({stream_at("a", {0, 1000})});
    expect_session_error({stream_at("a", {0}), stream_at("a", {0})});
    expect_session_error({stream_at("a", {0, 1000, 1000}), stream_at("b", {0})});
    CHECK_NOTHROW(validate_streams({stream_at("a", {0, 1000}), stream_at("b", {0})}));
}

TEST_CASE("synchronize") {
    SUBCASE("identical sequences pair frame i with frame i") {
        const auto tuples = synchronize({stream_at("a", {0, 1000, 2000}), stream_at("b", {0, 1000, 2000})}, 1000, 500);
        REQUIRE(tuples.size() == 3);
        for (int i = 0; i < 3; ++i) {
            CHECK(tuples[i].timestamp_ms == i * 1000);
            CHECK(tuples[i].frames == std::vector<int>{i, i});
        }
    }
    SUBCASE("offset within tolerance still pairs") {
        const auto tuples = synchronize({stream_at("a", {0, 1000, 2000}), stream_at("b", {200, 1200, 2200})}, 1000, 500);
        REQUIRE(tuples.size() == 3);
        for (int i = 0; i < 3; ++i) CHECK(tuples[i].frames == std::vector<int>{i, i});
    }
    SUBCASE("gap outside tolerance gives absent markers") {
        std::vector<std::int64_t> a, b;
        for (int t = 0; t <= 20; ++t) a.push_back(t * 1000);
        for (int t = 0; t <= 20; ++t)
            if (t < 5 || t > 15) b.push_back(t * 1000);
        const auto tuples = synchronize({stream_at("a", a), stream_at("b", b)}, 1000, 500);
        REQUIRE(tuples.size() == 21);
        for (int t = 0; t <= 20; ++t) {
            CHECK(tuples[t].frames[0] == t);
            if (t >= 5 && t <= 15) CHECK(tuples[t].frames[1] == -1); else CHECK(tuples[t].frames[1] >= 0);
        }
    }
    SUBCASE("ticks are rounded to the nearest multiple") {
        const auto tuples = synchronize({stream_at("a", {1400, 2600}), stream_at("b", {1499})}, 1000, 500);
        REQUIRE(tuples.size() == 2);
        CHECK(tuples[0].timestamp_ms == 1000);
        CHECK(tuples[1].timestamp_ms == 3000);
        CHECK(tuples[0].frames == std::vector<int>{0, 0});
    }
}

TEST_CASE("joint intervals") {
    CHECK(joint_intervals(timeline("a", "b", {0, 0, 0, 0}), 3000).empty());
    const auto ten = joint_intervals(timeline("a", "b", std::vector<int>(10, 1)), 3000);
    REQUIRE(ten.size() == 1);
    CHECK(ten[0].duration() == 9000);
    const auto gap = joint_intervals(timeline("a", "b", {1, 1, 0, 1, 1}), 0);
    REQUIRE(gap.size() == 1);
    CHECK(gap[0] == Interval{0, 4000});
    const auto two = joint_intervals(timeline("a", "b", {1, 1, 1, 1, 0, 0, 1, 1, 1, 1, 1, 0, 1}), 3000);
    REQUIRE(two.size() == 2);
    CHECK(two[0] == Interval{0, 3000});
    CHECK(two[1] == Interval{6000, 12000});

    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        std::vector<int> flags(40);
        for (auto& f : flags) f = rng.uniform() < 0.6;
        const std::int64_t min_duration = 1000 * rng.integer(0, 5);
        const auto iv = joint_intervals(timeline("a", "b", flags), min_duration);
        for (std::size_t i = 0; i < iv.size(); ++i) {
            CHECK(iv[i].duration() >= min_duration);
            if (i > 0) CHECK(iv[i].start_ms > iv[i - 1].end_ms + 1000);
        }
    }
}

TEST_CASE("group and partition events") {
    const std::vector<int> all{1, 1, 1, 1};
    SUBCASE("full group") {
        const auto tls = four_people({{{"P1", "P2"}, all}, {{"P1", "P3"}, all}, {{"P1", "P4"}, {1, 1, 0, 1}},
                                      {{"P2", "P3"}, all}, {{"P2", "P4"}, all}, {{"P3", "P4"}, all}});
        CHECK(group_events(tls, {"P1", "P2", "P3", "P4"}) == std::vector<std::int64_t>{0, 1000, 3000});
        CHECK(group_events(tls, {"P1", "P2"}) == std::vector<std::int64_t>{0, 1000, 2000, 3000});
        CHECK(partition_events(tls, {{"P1", "P4"}, {"P2", "P3"}}).empty());
    }
    SUBCASE("two plus two split") {
        const auto tls = four_people({{{"P1", "P4"}, all}, {{"P2", "P3"}, {0, 1, 1, 1}}, {{"P1", "P2"}, {0, 0, 0, 1}}});
        CHECK(partition_events(tls, {{"P1", "P4"}, {"P2", "P3"}}) == std::vector<std::int64_t>{1000, 2000});
        CHECK(group_events(tls, {"P1", "P2", "P3", "P4"}).empty());
    }
    SUBCASE("nothing joint") {
        const auto tls = four_people({});
        CHECK(group_events(tls, {"P1", "P2", "P3", "P4"}).empty());
        CHECK(partition_events(tls, {{"P1", "P4"}, {"P2", "P3"}}).empty());
    }
    SUBCASE("unknown member") {
        CHECK_THROWS_AS(group_events(four_people({}), {"P1", "P9"}), Error);
    }
}

TEST_CASE("co-attention timelines from rendered views") {
    SceneSpec spec;
    spec.seed = 12;
    const GrayImage room = render_scene(spec);
    spec.seed = 13;
    spec.texture = Texture::Noise;
    const GrayImage other = render_scene(spec);
    std::vector<Stream> streams(3);
    const char* ids[] = {"A", "B", "C"};
    for (int s = 0; s < 3; ++s) {
        streams[s].person_id = ids[s];
        for (int t = 0; t < 3; ++t) {
            const GrayImage img = s == 2 ? view(other, 300 + 10 * t) : view(room, 500 + 12 * s + 5 * t);
            streams[s].frames.push_back({t * 1000 + 40 * s, {}, img});
        }
    }
    JointParams params;
    params.min_duration_ms = 0;
    const auto tls = joint_timelines(streams, params, LocalizerConfig{}, 1);
    REQUIRE(tls.size() == 3);
    CHECK(tls[0].first == "A");
    CHECK(tls[0].second == "B");
    CHECK(tls[1].second == "C");
    CHECK(tls[2].first == "B");
    for (const auto& s : tls[0].samples) {
        CHECK(s.joint);
        CHECK(s.score <= params.joint_threshold);
    }
    for (const auto* tl : {&tls[1], &tls[2]})
        for (const auto& s : tl->samples) CHECK_FALSE(s.joint);

    // Role swap: the OR over directions makes the flag independent of order.
    std::vector<Stream> swapped{streams[1], streams[0], streams[2]};
    const auto sw = joint_timelines(swapped, params, LocalizerConfig{}, 2);
    REQUIRE(sw[0].samples.size() == tls[0].samples.size());
    for (std::size_t i = 0; i < sw[0].samples.size(); ++i) {
        CHECK(sw[0].samples[i].joint == tls[0].samples[i].joint);
        CHECK(sw[0].samples[i].score == tls[0].samples[i].score);
    }
    // Stride keeps every second tick and widens the step.
    params.stride = 2;
    const auto strided = joint_timelines(streams, params, LocalizerConfig{}, 1);
    CHECK(strided[0].samples.size() == 2);
    CHECK(strided[0].step_ms == 2000);
}

TEST_CASE("pair count is n(n-1)/2") {
    for (int n = 2; n <= 5; ++n) {
        std::vector<Stream> streams;
        for (int i = 0; i < n; ++i) {
            Stream s = stream_at("p" + std::to_string(i), {0});
            s.frames[0].image = GrayImage(64, 48, static_cast<std::uint8_t>(10 * i));
            streams.push_back(s);
        }
        CHECK(joint_timelines(streams, JointParams{}, LocalizerConfig{}, 2).size() ==
              static_cast<std::size_t>(n * (n - 1) / 2));
    }
}

TEST_CASE("heatmap") {
    Floorplan plan{200, 120, {{"a", {50, 60}}, {"b", {150, 60}}}};
    SUBCASE("zero counts") {
        const auto g = build_heatmap({}, plan, 10);
        for (double v : g.values) CHECK(v == 0.0);
        const RgbImage img = render_heatmap(g);
        for (auto v : img.data) CHECK(v == 0);
    }
    SUBCASE("single exhibit peak") {
        const auto g = build_heatmap({{"a", 4}}, plan, 10);
        const auto it = std::max_element(g.values.begin(), g.values.end());
        CHECK(*it == doctest::Approx(4.0));
        CHECK(it - g.values.begin() == 60 * 200 + 50);
    }
    SUBCASE("second exhibit dominates its own cell") {
        const double sigma = 40;
        const auto g = build_heatmap({{"a", 1}, {"b", 3}}, plan, sigma);
        const double kernel_a = std::exp(-100.0 * 100.0 / (2 * sigma * sigma));
        CHECK(g.at(150, 60) >= 3.0 * kernel_a);
        CHECK(g.at(150, 60) == doctest::Approx(3.0 + kernel_a));
    }
    SUBCASE("mass matches the kernel integral") {
        Floorplan big{400, 400, {{"a", {120, 200}}, {"b", {280, 200}}}};
        const double sigma = 20;
        const auto g = build_heatmap({{"a", 2}, {"b", 5}}, big, sigma);
        double sum = 0.0;
        for (double v : g.values) {
            CHECK(v >= 0.0);
            sum += v;
        }
        const double kernel_mass = 2 * std::numbers::pi * sigma * sigma;
        CHECK(std::abs(sum - 7 * kernel_mass) <= 0.01 * 7 * kernel_mass);
    }
    SUBCASE("ramp is monotone and sidecar lists counts") {
        const auto g = build_heatmap({{"a", 2}}, plan, 15);
        const RgbImage img = render_heatmap(g);
        const std::size_t peak = 60 * 200 + 50;
        CHECK(img.data[3 * peak] == 255);
        CHECK(img.data[3 * peak + 1] == 255);
        CHECK(img.data[3 * peak + 2] == 255);
        testing::TempDir dir;
        write_heatmap_sidecar(g, {{"a", 2}}, dir / "h.txt");
        std::ifstream in(dir / "h.txt");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        CHECK(text == "a 50 60 2\nb 150 60 0\n");
    }
    CHECK_THROWS_AS(build_heatmap({}, plan, 0.0), Error);
}

TEST_CASE("viewer counts are distinct per label") {
    std::vector<Attribution> as(4);
    as[0].label = "x";
    as[0].participants = {"P1", "P2"};
    as[1].label = "x";
    as[1].participants = {"P2", "P3"};
    as[2].label = "y";
    as[2].participants = {"P1", "P4"};
    as[3].participants = {"P1", "P3"};  // unknown
    const auto counts = viewer_counts(as);
    CHECK(counts == std::map<std::string, int>{{"x", 3}, {"y", 2}});
}

TEST_CASE("floorplan and session files") {
    testing::TempDir dir;
    const Floorplan plan{320, 200, {{"e0", {10, 20}}, {"e1", {30.5, 40}}}};
    write_floorplan(plan, dir / "plan.json");
    const Floorplan back = load_floorplan(dir / "plan.json");
    CHECK(back.width == 320);
    REQUIRE(back.exhibits.size() == 2);
    CHECK(back.exhibits[1].label == "e1");
    CHECK(back.exhibits[1].position == Point2{30.5, 40});
    CHECK_THROWS_AS(parse_floorplan(R"({"width": 10, "height": 10, "exhibits": [], "extra": 1})"), Error);

    CHECK(timestamp_from_filename("frame_000123.pgm") == 123);
    CHECK(timestamp_from_filename("cam2_t004500.pgm") == 4500);
    CHECK_FALSE(timestamp_from_filename("frame.pgm").has_value());

    Rng rng(3);
    std::vector<Stream> streams(2);
    for (int s = 0; s < 2; ++s) {
        streams[s].person_id = "P" + std::to_string(s + 1);
        for (int t = 0; t < 3; ++t) {
            streams[s].frames.push_back({t * 1000 + s, {}, testing::random_image(rng, 16, 12)});
            HeadPose p;
            p.timestamp_ms = t * 1000;
            p.reliability = 0.5;
            streams[s].poses.push_back(p);
        }
    }
    write_session(dir / "session", streams, plan);
    const SessionFile loaded = load_session(dir / "session" / "session.json");
    REQUIRE(loaded.streams.size() == 2);
    REQUIRE(loaded.floorplan.has_value());
    CHECK(loaded.floorplan->exhibits.size() == 2);
    for (int s = 0; s < 2; ++s) {
        CHECK(loaded.streams[s].person_id == streams[s].person_id);
        REQUIRE(loaded.streams[s].frames.size() == 3);
        for (int t = 0; t < 3; ++t) {
            CHECK(loaded.streams[s].frames[t].timestamp_ms == streams[s].frames[t].timestamp_ms);
            CHECK(loaded.streams[s].frames[t].image == streams[s].frames[t].image);
        }
        CHECK(loaded.streams[s].poses.size() == 3);
    }
    const auto frames = list_frames(dir / "session" / "P1" / "frames", false);
    CHECK(frames.size() == 3);
    CHECK(frames[2].image.empty());
}

TEST_CASE("exhibit attribution") {
    const std::vector<std::vector<int>> script{{0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}};
    const ScriptedSession session = generate_session(21, script, 2, demo_session_params());
    ReferenceEntry entry;
    entry.id = "room";
    entry.kind = ReferenceKind::Panorama;
    entry.width = session.panorama.width();
    entry.height = session.panorama.height();
    entry.yaw_at_left_edge_deg = session.geometry.yaw_at_left_edge * 180.0 / std::numbers::pi;
    entry.annotations = session.exhibits;
    const Corpus corpus({entry});
    std::vector<LoadedReference> refs(1);
    refs[0].entry = &corpus.entries()[0];
    refs[0].image = session.panorama;
    refs[0].features = extract_features(session.panorama);

    std::vector<Stream> streams = session_streams(session);
    const Interval iv{0, 4000};
    const Attribution a = attribute_exhibit(iv, {streams[0].person_id, streams[1].person_id}, streams, refs,
                                            JointParams{}, LocalizerConfig{});
    CHECK(a.label == session.exhibits[0].label);
    CHECK_FALSE(a.low_confidence);
    CHECK(a.score <= LocalizerConfig{}.accept_threshold);

    // Blank out the second person's middle frame: the first still decides.
    for (auto& f : streams[1].frames) f.image = GrayImage(f.image.width(), f.image.height(), 128);
    const Attribution b = attribute_exhibit(iv, {streams[0].person_id, streams[1].person_id}, streams, refs,
                                            JointParams{}, LocalizerConfig{});
    CHECK(b.label == session.exhibits[0].label);
    CHECK(b.low_confidence);

    for (auto& f : streams[0].frames) f.image = GrayImage(f.image.width(), f.image.height(), 128);
    const Attribution c = attribute_exhibit(iv, {streams[0].person_id, streams[1].person_id}, streams, refs,
                                            JointParams{}, LocalizerConfig{});
    CHECK(c.label == "unknown");
    CHECK(c.low_confidence);
    CHECK(viewer_counts({a, c}) == std::map<std::string, int>{{session.exhibits[0].label, 2}});
}
