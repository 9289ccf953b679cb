#include <algorithm>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "egofov/corpus.hpp"
#include "egofov/error.hpp"
#include "helpers.hpp"

using namespace egofov;

namespace {

std::vector<Point2> rect(double x0, double y0, double x1, double y1) {
    return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

ReferenceEntry entry(const std::string& id, std::optional<GeoPoint> geo) {
    ReferenceEntry e;
    e.id = id;
    e.width = 400;
    e.height = 200;
    e.geo = geo;
    return e;
}

void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}

// Ray casting oracle, boundary excluded; the polygons used with it keep
// random points off their edges.
bool ray_cast(const std::vector<Point2>& poly, Point2 p) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Point2 a = poly[i], b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return inside;
}

}  // namespace

TEST_CASE("manifest loading") {
    testing::TempDir dir;
    save_pgm(GrayImage(40, 20, 9), dir / "a.pgm");
    save_pgm(GrayImage(30, 30, 9), dir / "b.pgm");
    SUBCASE("empty entry list") {
        write_file(dir / "m.json", R"({"entries": []})");
        CHECK(load_corpus(dir / "m.json").empty());
    }
    SUBCASE("bad path names the entry") {
        write_file(dir / "m.json", R"({"entries": [
            {"id": "good", "image_path": "a.pgm", "geometry": {"yaw_at_left_edge_deg": 0}},
            {"id": "broken", "image_path": "nope.pgm", "geometry": {"yaw_at_left_edge_deg": 0}}]})");
        try {
            load_corpus(dir / "m.json");
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Load);
            CHECK(std::string(e.what()).find("broken") != std::string::npos);
        }
    }
    SUBCASE("duplicate ids") {
        write_file(dir / "m.json", R"({"entries": [
            {"id": "x", "image_path": "a.pgm", "geometry": {"yaw_at_left_edge_deg": 0}},
            {"id": "x", "image_path": "b.pgm", "geometry": {"yaw_at_left_edge_deg": 0}}]})");
        try {
            load_corpus(dir / "m.json");
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Manifest);
        }
    }
    SUBCASE("unknown keys and self-intersecting polygons are rejected") {
        write_file(dir / "m.json", R"({"entries": [{"id": "x", "image_path": "a.pgm", "colour": 1,
            "geometry": {"yaw_at_left_edge_deg": 0}}]})");
        CHECK_THROWS_AS(load_corpus(dir / "m.json"), Error);
        write_file(dir / "m.json", R"({"entries": [{"id": "x", "image_path": "a.pgm",
            "geometry": {"yaw_at_left_edge_deg": 0},
            "annotations": [{"label": "bow", "polygon": [[0,0],[10,10],[10,0],[0,10]]}]}]})");
        CHECK_THROWS_AS(load_corpus(dir / "m.json"), Error);
    }
    SUBCASE("fields, units and image size") {
        write_file(dir / "m.json", R"({"entries": [
            {"id": "flat", "image_path": "b.pgm", "kind": "flat", "geometry": {"heading_deg": 90, "hfov_deg": 60},
             "geo": {"lat": 1.5, "lon": 2.5}},
            {"id": "pano", "image_path": "a.pgm", "geometry": {"yaw_at_left_edge_deg": 180},
             "annotations": [{"label": "L", "polygon": [[1,1],[5,1],[5,5],[1,5]], "info": "hello"}]}]})");
        const Corpus c = load_corpus(dir / "m.json");
        REQUIRE(c.entries().size() == 2);
        const ReferenceEntry* flat = c.find("flat");
        REQUIRE(flat);
        CHECK(flat->kind == ReferenceKind::Flat);
        CHECK(flat->width == 30);
        CHECK(flat->image_path.is_absolute());
        const ReferenceGeometry geometry = flat->geometry();
        const auto* g = std::get_if<FlatGeometry>(&geometry);
        REQUIRE(g);
        CHECK(g->heading == doctest::Approx(std::numbers::pi / 2));
        CHECK(g->hfov == doctest::Approx(std::numbers::pi / 3));
        const ReferenceEntry* pano = c.find("pano");
        REQUIRE(pano);
        CHECK(pano->annotations.at(0).info == "hello");
        CHECK(c.geo_index().size() == 1);
        CHECK(c.find("missing") == nullptr);
    }
}

TEST_CASE("manifest round trip and order independence") {
    testing::TempDir dir;
    std::vector<ReferenceEntry> entries;
    Rng rng(1);
    for (int i = 0; i < 6; ++i) {
        const std::string name = "r" + std::to_string(i);
        save_pgm(GrayImage(20 + i, 10, 1), dir / (name + ".pgm"));
        ReferenceEntry e = entry(name, i % 2 ? std::optional<GeoPoint>{} : GeoPoint{rng.uniform(-60, 60), rng.uniform(-170, 170)});
        e.image_path = std::filesystem::absolute(dir / (name + ".pgm"));
        e.width = 20 + i;
        e.height = 10;
        e.kind = i % 3 == 0 ? ReferenceKind::Flat : ReferenceKind::Panorama;
        if (e.kind == ReferenceKind::Flat) {
            e.heading_deg = 12.5 * i;
            e.pitch_deg = 2.0;
            e.hfov_deg = 70;
        } else {
            e.yaw_at_left_edge_deg = -3.25 * i;
        }
        e.annotations.push_back({"a" + std::to_string(i), rect(1, 1, 5, 5), "info " + std::to_string(i)});
        entries.push_back(e);
    }
    const Corpus original(entries);
    write_corpus(original, dir / "m.json");
    const Corpus loaded = load_corpus(dir / "m.json");
    CHECK(loaded == original);

    std::mt19937 shuffle_rng(3);
    for (int t = 0; t < 3; ++t) {
        std::shuffle(entries.begin(), entries.end(), shuffle_rng);
        CHECK(Corpus(entries) == original);
    }
}

TEST_CASE("nearest reference") {
    SUBCASE("single entry") {
        const Corpus c({entry("only", GeoPoint{10, 10}), entry("nogeo", std::nullopt)});
        CHECK(nearest_reference(c, -50, 100).id == "only");
    }
    SUBCASE("closer arc") {
        const Corpus c({entry("a", GeoPoint{0, 0}), entry("b", GeoPoint{0, 1})});
        CHECK(nearest_reference(c, 0, 0.4).id == "a");
        CHECK(nearest_reference(c, 0, 0.6).id == "b");
    }
    SUBCASE("equidistant goes to the smaller id") {
        const Corpus c({entry("zeta", GeoPoint{0, 1}), entry("alpha", GeoPoint{0, -1})});
        CHECK(nearest_reference(c, 0, 0).id == "alpha");
    }
    SUBCASE("no geo-tagged entries") {
        const Corpus c({entry("x", std::nullopt)});
        try {
            nearest_reference(c, 0, 0);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Lookup);
        }
    }
    SUBCASE("agrees with an exhaustive scan") {
        Rng rng(2);
        std::vector<ReferenceEntry> es;
        for (int i = 0; i < 50; ++i) {
            es.push_back(entry("e" + std::to_string(i), GeoPoint{rng.uniform(40, 41), rng.uniform(-74, -73)}));
        }
        const Corpus c(es);
        for (int q = 0; q < 1000; ++q) {
            const double lat = rng.uniform(39.5, 41.5), lon = rng.uniform(-74.5, -72.5);
            const ReferenceEntry* best = nullptr;
            double bd = 1e300;
            for (const auto& e : c.entries()) {
                const double d = haversine_km(*e.geo, {lat, lon});
                if (d < bd || (d == bd && e.id < best->id)) {
                    bd = d;
                    best = &e;
                }
            }
            CHECK(nearest_reference(c, lat, lon).id == best->id);
        }
        const auto three = nearest_references(c, 40.5, -73.5, 3);
        REQUIRE(three.size() == 3);
        CHECK(three[0]->id == nearest_reference(c, 40.5, -73.5).id);
        CHECK(haversine_km(*three[1]->geo, {40.5, -73.5}) <= haversine_km(*three[2]->geo, {40.5, -73.5}));
    }
}

TEST_CASE("haversine") {
    CHECK(haversine_km({0, 0}, {0, 0}) == 0.0);
    // One degree of longitude on the equator with R = 6371 km.
    CHECK(haversine_km({0, 0}, {0, 1}) == doctest::Approx(6371.0 * std::numbers::pi / 180.0));
}

TEST_CASE("polygons") {
    const auto sq = rect(0, 0, 10, 10);
    CHECK(polygon_area(sq) == doctest::Approx(100.0));
    CHECK(polygon_contains(sq, {5, 5}));
    CHECK(polygon_contains(sq, {0, 5}));
    CHECK(polygon_contains(sq, {10, 10}));
    CHECK_FALSE(polygon_contains(sq, {10.01, 5}));
    CHECK(polygon_is_simple(sq));
    const std::vector<Point2> bow{{0, 0}, {10, 10}, {10, 0}, {0, 10}};
    CHECK_FALSE(polygon_is_simple(bow));
}

TEST_CASE("annotation lookup") {
    ReferenceEntry e = entry("p", std::nullopt);
    e.annotations = {{"outer", rect(10, 10, 110, 110), "o"}, {"inner", rect(40, 40, 60, 60), "i"},
                     {"seam", rect(380, 50, 420, 90), "s"}};
    CHECK(annotation_at(e, {60, 60})->label == "inner");
    CHECK(annotation_at(e, {50, 50})->label == "inner");
    CHECK(annotation_at(e, {20, 20})->label == "outer");
    CHECK_FALSE(annotation_at(e, {200, 150}).has_value());
    // Wrapped panorama polygon.
    CHECK(annotation_at(e, {10, 30})->label == "outer");
    CHECK(annotation_at(e, {5, 60})->label == "seam");
    e.kind = ReferenceKind::Flat;
    CHECK_FALSE(annotation_at(e, {5, 60}).has_value());
}

TEST_CASE("containment agrees with ray casting") {
    Rng rng(4);
    for (int s = 0; s < 5; ++s) {
        // Star-shaped polygon around a center, simple by construction.
        std::vector<Point2> poly;
        const int n = rng.integer(3, 12);
        for (int i = 0; i < n; ++i) {
            const double a = 2 * std::numbers::pi * (i + rng.uniform(0.1, 0.9)) / n;
            const double r = rng.uniform(20, 80);
            poly.push_back({100 + r * std::cos(a), 100 + r * std::sin(a)});
        }
        for (int q = 0; q < 1000; ++q) {
            const Point2 p{rng.uniform(0, 200) + 1e-7, rng.uniform(0, 200) + 1e-7};
            CHECK(polygon_contains(poly, p) == ray_cast(poly, p));
        }
    }
}
