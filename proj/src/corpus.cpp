#include "egofov/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "egofov/error.hpp"
#include "json.hpp"

namespace egofov {

using nlohmann::json;

namespace {

double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw Error(ErrorCode::Manifest, where + ": unknown field '" + key + "'");
        }
    }
}

ReferenceEntry parse_entry(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw Error(ErrorCode::Manifest, "manifest entry is not an object");
    const std::string id = j.value("id", std::string());
    if (id.empty()) throw Error(ErrorCode::Manifest, "manifest entry without id");
    const std::string where = "entry '" + id + "'";
    reject_unknown(j, {"id", "image_path", "kind", "geometry", "geo", "annotations"}, where);

    ReferenceEntry e;
    e.id = id;
    try {
        const std::filesystem::path rel = j.at("image_path").get<std::string>();
        e.image_path = (rel.is_absolute() ? rel : std::filesystem::absolute(base_dir / rel)).lexically_normal();
        const std::string kind = j.value("kind", std::string("panorama"));
        if (kind == "panorama") {
            e.kind = ReferenceKind::Panorama;
        } else if (kind == "flat") {
            e.kind = ReferenceKind::Flat;
        } else {
            throw Error(ErrorCode::Manifest, where + ": unknown kind '" + kind + "'");
        }
        const json geometry = j.value("geometry", json::object());
        if (e.kind == ReferenceKind::Panorama) {
            reject_unknown(geometry, {"yaw_at_left_edge_deg"}, where + " geometry");
            if (!geometry.contains("yaw_at_left_edge_deg")) {
                throw Error(ErrorCode::Manifest, where + ": panorama needs geometry.yaw_at_left_edge_deg");
            }
            e.yaw_at_left_edge_deg = geometry.at("yaw_at_left_edge_deg").get<double>();
        } else {
            reject_unknown(geometry, {"heading_deg", "pitch_deg", "hfov_deg"}, where + " geometry");
            if (!geometry.contains("heading_deg")) {
                throw Error(ErrorCode::Manifest, where + ": flat reference needs geometry.heading_deg");
            }
            e.heading_deg = geometry.at("heading_deg").get<double>();
            e.pitch_deg = geometry.value("pitch_deg", 0.0);
            e.hfov_deg = geometry.value("hfov_deg", 90.0);
            if (!(e.hfov_deg > 0.0 && e.hfov_deg < 180.0)) {
                throw Error(ErrorCode::Manifest, where + ": hfov_deg must lie in (0, 180)");
            }
        }
        if (j.contains("geo") && !j.at("geo").is_null()) {
            const json& g = j.at("geo");
            reject_unknown(g, {"lat", "lon"}, where + " geo");
            e.geo = GeoPoint{g.at("lat").get<double>(), g.at("lon").get<double>()};
        }
        for (const json& a : j.value("annotations", json::array())) {
            reject_unknown(a, {"label", "polygon", "info"}, where + " annotation");
            AnnotatedRegion region;
            region.label = a.at("label").get<std::string>();
            region.info = a.value("info", std::string());
            for (const json& v : a.at("polygon")) {
                if (!v.is_array() || v.size() != 2) {
                    throw Error(ErrorCode::Manifest, where + ": polygon vertices must be [x, y]");
                }
                region.polygon.push_back({v[0].get<double>(), v[1].get<double>()});
            }
            e.annotations.push_back(std::move(region));
        }
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::Manifest, where + ": " + ex.what());
    }

    PnmHeader header;
    try {
        header = read_pnm_header(e.image_path);
    } catch (const Error& ex) {
        throw Error(ErrorCode::Load, where + ": cannot load image " + e.image_path.string() + " (" + ex.what() + ")");
    }
    e.width = header.width;
    e.height = header.height;

    for (const auto& a : e.annotations) {
        if (a.polygon.size() < 3) throw Error(ErrorCode::Manifest, where + ": annotation '" + a.label + "' needs >= 3 vertices");
        if (!polygon_is_simple(a.polygon)) {
            throw Error(ErrorCode::Manifest, where + ": annotation '" + a.label + "' is not a simple polygon");
        }
        const double xmin = e.kind == ReferenceKind::Panorama ? -e.width : 0.0;
        const double xmax = e.kind == ReferenceKind::Panorama ? 2.0 * e.width : e.width;
        for (const auto& v : a.polygon) {
            if (v.x < xmin || v.x > xmax || v.y < 0.0 || v.y > e.height) {
                throw Error(ErrorCode::Manifest, where + ": annotation '" + a.label + "' leaves the image");
            }
        }
    }
    return e;
}

}  // namespace

ReferenceGeometry ReferenceEntry::geometry() const {
    if (kind == ReferenceKind::Panorama) {
        return PanoramaGeometry{width, height, radians(yaw_at_left_edge_deg)};
    }
    return FlatGeometry{width, height, radians(heading_deg), radians(pitch_deg), radians(hfov_deg)};
}

double ReferenceEntry::heading() const {
    if (kind == ReferenceKind::Panorama) return wrap_angle(radians(yaw_at_left_edge_deg) + std::numbers::pi);
    return wrap_angle(radians(heading_deg));
}

Corpus::Corpus(std::vector<ReferenceEntry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(),
              [](const ReferenceEntry& a, const ReferenceEntry& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (i > 0 && entries_[i].id == entries_[i - 1].id) {
            throw Error(ErrorCode::Manifest, "duplicate entry id '" + entries_[i].id + "'");
        }
        if (entries_[i].geo) geo_index_.push_back(i);
    }
}

const ReferenceEntry* Corpus::find(std::string_view id) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                               [](const ReferenceEntry& e, std::string_view key) { return e.id < key; });
    return it != entries_.end() && it->id == id ? &*it : nullptr;
}

Corpus parse_corpus(const std::string& json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::Manifest, std::string("manifest is not valid JSON: ") + ex.what());
    }
    if (!doc.is_object() || !doc.contains("entries") || !doc.at("entries").is_array()) {
        throw Error(ErrorCode::Manifest, "manifest needs a top-level 'entries' array");
    }
    std::vector<ReferenceEntry> entries;
    for (const json& j : doc.at("entries")) entries.push_back(parse_entry(j, base_dir));
    return Corpus(std::move(entries));
}

Corpus load_corpus(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open manifest: " + manifest_path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_corpus(buffer.str(), manifest_path.parent_path());
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& manifest_path) {
    const auto base = std::filesystem::absolute(manifest_path).parent_path();
    json entries = json::array();
    for (const auto& e : corpus.entries()) {
        json j;
        j["id"] = e.id;
        j["image_path"] = e.image_path.lexically_relative(base).generic_string();
        if (e.kind == ReferenceKind::Panorama) {
            j["kind"] = "panorama";
            j["geometry"] = {{"yaw_at_left_edge_deg", e.yaw_at_left_edge_deg}};
        } else {
            j["kind"] = "flat";
            j["geometry"] = {{"heading_deg", e.heading_deg}, {"pitch_deg", e.pitch_deg}, {"hfov_deg", e.hfov_deg}};
        }
        if (e.geo) j["geo"] = {{"lat", e.geo->lat}, {"lon", e.geo->lon}};
        json annotations = json::array();
        for (const auto& a : e.annotations) {
            json poly = json::array();
            for (const auto& v : a.polygon) poly.push_back({v.x, v.y});
            annotations.push_back({{"label", a.label}, {"polygon", poly}, {"info", a.info}});
        }
        j["annotations"] = annotations;
        entries.push_back(j);
    }
    std::ofstream out(manifest_path);
    if (!out) throw Error(ErrorCode::Io, "cannot write manifest: " + manifest_path.string());
    out << json{{"entries", entries}}.dump(2) << '\n';
}

double haversine_km(GeoPoint a, GeoPoint b) {
    constexpr double kEarthRadiusKm = 6371.0;
    const double p1 = radians(a.lat), p2 = radians(b.lat);
    const double dp = p2 - p1;
    const double dl = radians(b.lon - a.lon);
    const double h = std::sin(dp / 2) * std::sin(dp / 2) +
                     std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

std::vector<const ReferenceEntry*> nearest_references(const Corpus& corpus, double lat, double lon,
                                                      std::size_t count) {
    if (corpus.geo_index().empty()) throw Error(ErrorCode::Lookup, "corpus has no geo-tagged entries");
    std::vector<std::pair<double, const ReferenceEntry*>> ranked;
    for (std::size_t i : corpus.geo_index()) {
        const auto& e = corpus.entries()[i];
        ranked.emplace_back(haversine_km({lat, lon}, *e.geo), &e);
    }
    // Entries are already id-sorted, so a stable sort keeps the id tie-break.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<const ReferenceEntry*> out;
    for (std::size_t i = 0; i < ranked.size() && i < count; ++i) out.push_back(ranked[i].second);
    return out;
}

const ReferenceEntry& nearest_reference(const Corpus& corpus, double lat, double lon) {
    return *nearest_references(corpus, lat, lon, 1).front();
}

namespace {

bool on_segment(Point2 a, Point2 b, Point2 p) {
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    const double scale = std::max({1.0, std::abs(b.x - a.x), std::abs(b.y - a.y)});
    if (std::abs(cross) > 1e-9 * scale) return false;
    return p.x >= std::min(a.x, b.x) - 1e-12 && p.x <= std::max(a.x, b.x) + 1e-12 &&
           p.y >= std::min(a.y, b.y) - 1e-12 && p.y <= std::max(a.y, b.y) + 1e-12;
}

int orientation(Point2 a, Point2 b, Point2 c) {
    const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    return (v > 0) - (v < 0);
}

bool segments_intersect(Point2 p1, Point2 p2, Point2 q1, Point2 q2) {
    const int o1 = orientation(p1, p2, q1), o2 = orientation(p1, p2, q2);
    const int o3 = orientation(q1, q2, p1), o4 = orientation(q1, q2, p2);
    if (o1 != o2 && o3 != o4) return true;
    return (o1 == 0 && on_segment(p1, p2, q1)) || (o2 == 0 && on_segment(p1, p2, q2)) ||
           (o3 == 0 && on_segment(q1, q2, p1)) || (o4 == 0 && on_segment(q1, q2, p2));
}

}  // namespace

bool polygon_contains(std::span<const Point2> poly, Point2 p) {
    const std::size_t n = poly.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if (on_segment(poly[j], poly[i], p)) return true;
        if ((poly[i].y > p.y) != (poly[j].y > p.y)) {
            const double x = poly[j].x + (p.y - poly[j].y) * (poly[i].x - poly[j].x) / (poly[i].y - poly[j].y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

double polygon_area(std::span<const Point2> poly) {
    double twice = 0.0;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        twice += poly[j].x * poly[i].y - poly[i].x * poly[j].y;
    }
    return std::abs(twice) / 2.0;
}

bool polygon_is_simple(std::span<const Point2> poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        if (poly[i] == poly[(i + 1) % n]) return false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) continue;
            if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
        }
    }
    return polygon_area(poly) > 0.0;
}

std::optional<AnnotatedRegion> annotation_at(const ReferenceEntry& entry, Point2 f) {
    const AnnotatedRegion* best = nullptr;
    double best_area = std::numeric_limits<double>::infinity();
    std::vector<Point2> probes{f};
    if (entry.kind == ReferenceKind::Panorama && entry.width > 0) {
        probes.push_back({f.x + entry.width, f.y});
        probes.push_back({f.x - entry.width, f.y});
    }
    for (const auto& a : entry.annotations) {
        const bool hit = std::any_of(probes.begin(), probes.end(),
                                     [&](Point2 p) { return polygon_contains(a.polygon, p); });
        if (!hit) continue;
        const double area = polygon_area(a.polygon);
        if (area < best_area) {
            best_area = area;
            best = &a;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

}  // namespace egofov
