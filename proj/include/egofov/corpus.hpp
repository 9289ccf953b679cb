#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egofov/imaging.hpp"
#include "egofov/pipeline.hpp"
#include "egofov/sensor.hpp"

namespace egofov {

struct AnnotatedRegion {
    std::string label;
    std::vector<Point2> polygon;
    std::string info;

    friend bool operator==(const AnnotatedRegion&, const AnnotatedRegion&) = default;
};

struct GeoPoint {
    double lat = 0.0;  // degrees
    double lon = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

enum class ReferenceKind { Panorama, Flat };

struct ReferenceEntry {
    std::string id;
    std::filesystem::path image_path;  // absolute after loading
    ReferenceKind kind = ReferenceKind::Panorama;
    int width = 0;   // from the image header
    int height = 0;
    // Angles are kept in degrees as written in the manifest.
    double yaw_at_left_edge_deg = 0.0;  // panorama
    double heading_deg = 0.0;           // flat
    double pitch_deg = 0.0;             // flat
    double hfov_deg = 90.0;             // flat
    std::optional<GeoPoint> geo;
    std::vector<AnnotatedRegion> annotations;

    // Radians, ready for the sensor projection.
    ReferenceGeometry geometry() const;
    // Heading of the image center, radians.
    double heading() const;

    friend bool operator==(const ReferenceEntry&, const ReferenceEntry&) = default;
};

class Corpus {
public:
    Corpus() = default;
    // Entries are sorted by id; throws Error(Manifest) on duplicate ids.
    explicit Corpus(std::vector<ReferenceEntry> entries);

    const std::vector<ReferenceEntry>& entries() const { return entries_; }
    const std::vector<std::size_t>& geo_index() const { return geo_index_; }
    const ReferenceEntry* find(std::string_view id) const;
    bool empty() const { return entries_.empty(); }

    friend bool operator==(const Corpus& a, const Corpus& b) { return a.entries_ == b.entries_; }

private:
    std::vector<ReferenceEntry> entries_;
    std::vector<std::size_t> geo_index_;  // entries carrying geo coordinates
};

// JSON manifest with a top-level `entries` array. Angles are degrees in the
// file and radians in memory; image paths resolve against the manifest
// directory. Throws Error(Manifest) or Error(Load) naming the entry.
Corpus load_corpus(const std::filesystem::path& manifest_path);
Corpus parse_corpus(const std::string& json_text, const std::filesystem::path& base_dir);
void write_corpus(const Corpus& corpus, const std::filesystem::path& manifest_path);

double haversine_km(GeoPoint a, GeoPoint b);

// Throws Error(Lookup) if no entry is geo-tagged. Ties go to the smaller id.
const ReferenceEntry& nearest_reference(const Corpus& corpus, double lat, double lon);
std::vector<const ReferenceEntry*> nearest_references(const Corpus& corpus, double lat, double lon,
                                                      std::size_t count);

// Even-odd containment, boundary inclusive.
bool polygon_contains(std::span<const Point2> polygon, Point2 p);
double polygon_area(std::span<const Point2> polygon);
bool polygon_is_simple(std::span<const Point2> polygon);

// Smallest-area annotation containing f (x also tested one panorama width
// either side for panoramas); nullopt when none does.
std::optional<AnnotatedRegion> annotation_at(const ReferenceEntry& entry, Point2 f);

}  // namespace egofov
