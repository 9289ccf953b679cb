#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "egofov/corpus.hpp"
#include "egofov/imaging.hpp"
#include "egofov/pipeline.hpp"
#include "egofov/sensor.hpp"

namespace egofov {

struct StreamFrame {
    std::int64_t timestamp_ms = 0;
    std::filesystem::path path;
    GrayImage image;
};

struct Stream {
    std::string person_id;
    std::vector<StreamFrame> frames;
    std::vector<HeadPose> poses;
};

// Throws Error(Session) for fewer than two streams, duplicate ids or
// timestamps that are not strictly increasing.
void validate_streams(const std::vector<Stream>& streams);

struct JointParams {
    std::int64_t tick_ms = 1000;
    std::int64_t tolerance_ms = 500;
    int stride = 1;                   // use every stride-th synchronized tick
    double joint_threshold = 0.55;    // GIST score bound for a joint sample
    std::int64_t min_duration_ms = 3000;
    std::int64_t pose_tolerance_ms = 500;
    double heatmap_sigma = 25.0;      // floorplan pixels

    void validate() const;
};

// One synchronized instant: per stream the nearest frame within tolerance, or -1.
struct AlignedTuple {
    std::int64_t timestamp_ms = 0;
    std::vector<int> frames;
};

// Ticks are the union of all frame timestamps rounded to the nearest multiple
// of `tick_ms`, ascending.
std::vector<AlignedTuple> synchronize(const std::vector<Stream>& streams, std::int64_t tick_ms,
                                      std::int64_t tolerance_ms);

struct PairSample {
    std::int64_t timestamp_ms = 0;
    double score = 0.0;  // +inf unless at least one direction matched
    bool joint = false;
};

struct PairTimeline {
    std::string first;
    std::string second;
    std::int64_t step_ms = 1000;
    std::vector<PairSample> samples;
};

// Features of one stream frame, computed once and shared by all pairs.
struct FrameFeatures {
    const GrayImage* image = nullptr;
    FeatureSet features;
};

// Pairwise co-attention of streams i and j over `tuples` (already strided).
// Each sample matches i against j and j against i with alpha 0; the sample is
// joint when either direction matched with a score within the threshold.
PairTimeline pairwise_match(const std::vector<Stream>& streams, std::size_t i, std::size_t j,
                            const std::vector<AlignedTuple>& tuples,
                            const std::vector<std::vector<FrameFeatures>>& features,
                            const JointParams& params, const LocalizerConfig& config);

// All n(n-1)/2 pair timelines in (i, j) lexicographic order. Work is spread
// over `jobs` threads; the result does not depend on `jobs`.
std::vector<PairTimeline> joint_timelines(const std::vector<Stream>& streams, const JointParams& params,
                                          const LocalizerConfig& config, int jobs = 1);

struct Interval {
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;

    std::int64_t duration() const { return end_ms - start_ms; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

// Maximal joint runs; a gap of a single missing sample is closed. Runs
// spanning less than `min_duration_ms` are dropped.
std::vector<Interval> joint_intervals(const PairTimeline& timeline, std::int64_t min_duration_ms);

// Timestamps at which every pair inside `group` is joint.
std::vector<std::int64_t> group_events(const std::vector<PairTimeline>& timelines,
                                       const std::set<std::string>& group);

// Timestamps at which each block of the partition is jointly attending while
// no pair across blocks is.
std::vector<std::int64_t> partition_events(const std::vector<PairTimeline>& timelines,
                                           const std::vector<std::set<std::string>>& blocks);

// Reference available for attribution, with its image and features.
struct LoadedReference {
    const ReferenceEntry* entry = nullptr;
    GrayImage image;
    FeatureSet features;
};

std::vector<LoadedReference> load_references(const Corpus& corpus, const FeatureParams& params);

struct Attribution {
    Interval interval;
    std::vector<std::string> participants;
    std::string label = "unknown";
    double score = 0.0;  // best accepted score supporting the label; +inf if unknown
    bool low_confidence = false;
};

// Localizes each participant's frame at the interval's middle sample against
// every reference and votes with the annotation at the accepted focus.
// Majority wins; ties go to the label with the lowest score. Any participant
// without an accepted, labeled localization marks the result low-confidence.
Attribution attribute_exhibit(const Interval& interval, const std::vector<std::string>& participants,
                              const std::vector<Stream>& streams,
                              const std::vector<LoadedReference>& references, const JointParams& params,
                              const LocalizerConfig& config);

// Distinct viewers per label over all attributions; "unknown" is not counted.
std::map<std::string, int> viewer_counts(const std::vector<Attribution>& attributions);

struct FloorplanExhibit {
    std::string label;
    Point2 position;
};

struct Floorplan {
    int width = 0;
    int height = 0;
    std::vector<FloorplanExhibit> exhibits;
};

struct HeatmapGrid {
    int width = 0;
    int height = 0;
    std::vector<double> values;  // row-major
    std::vector<FloorplanExhibit> exhibits;

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Sum of unit-peak Gaussians at the exhibit positions, each scaled by its
// count. Labels missing from `counts` contribute nothing.
HeatmapGrid build_heatmap(const std::map<std::string, int>& counts, const Floorplan& floorplan, double sigma);

// Black-red-yellow-white ramp normalized to the grid maximum.
RgbImage render_heatmap(const HeatmapGrid& grid);
// `label x y count` per exhibit.
void write_heatmap_sidecar(const HeatmapGrid& grid, const std::map<std::string, int>& counts,
                           const std::filesystem::path& path);

// Session file (JSON): {"people": [{"id", "frames": dir, "sensors": path?}],
// "floorplan": {"width", "height", "exhibits": [{"label", "x", "y"}]}}.
// Frame timestamps are the last digit run of each file stem, in ms.
struct SessionFile {
    std::vector<Stream> streams;
    std::optional<Floorplan> floorplan;
};

SessionFile load_session(const std::filesystem::path& path);
void write_session(const std::filesystem::path& dir, const std::vector<Stream>& streams,
                   const std::optional<Floorplan>& floorplan);

Floorplan parse_floorplan(const std::string& json_text);
Floorplan load_floorplan(const std::filesystem::path& path);
void write_floorplan(const Floorplan& floorplan, const std::filesystem::path& path);

// Timestamp encoded in a frame file name (last digit run of the stem).
std::optional<std::int64_t> timestamp_from_filename(const std::filesystem::path& path);
// Frame files (.pgm/.ppm) of a directory with their timestamps, ascending.
std::vector<StreamFrame> list_frames(const std::filesystem::path& dir, bool load_images);

}  // namespace egofov
