#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "egofov/corpus.hpp"
#include "egofov/imaging.hpp"
#include "egofov/joint.hpp"
#include "egofov/matching.hpp"
#include "egofov/pipeline.hpp"
#include "egofov/sensor.hpp"

namespace egofov {

// Small deterministic generator; results do not depend on the standard
// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    double uniform();                     // [0, 1)
    double uniform(double lo, double hi);
    int integer(int lo, int hi);          // inclusive
    double normal();

private:
    std::uint64_t state_;
};

enum class Texture { Glyphs, Noise, Checker };

std::string_view to_string(Texture texture);
Texture texture_from_string(std::string_view name);

struct SceneSpec {
    std::uint64_t seed = 1;
    Texture texture = Texture::Glyphs;
    int ref_width = 1024;
    int ref_height = 512;
    double clutter = 0.5;  // [0, 1]
};

// Distortion between the reference and the POV view plus sensor error.
struct TruthParams {
    double noise_sigma = 0.0;       // additive Gaussian noise, intensity units
    double brightness_shift = 0.0;  // max |shift|, intensity units
    double occlusion = 0.0;         // max occluded fraction of the POV frame
    double drift_rate = 0.0;        // max sensor drift, radians / second
    double max_time = 10.0;         // seconds since the sensor was last aligned
    double min_scale = 0.8;         // reference pixels per POV pixel
    double max_scale = 1.25;
    double max_rotation = 0.26;     // radians
    double max_shear = 0.08;
    double max_anisotropy = 0.1;
    double max_roll = 0.17;         // radians
    double reliability = 1.0;
    int pov_width = 0;              // 0: a quarter of the reference width
    int pov_height = 0;             // 0: POV width * 1856 / 2528
    bool identity_like = false;     // integer translation only, no photometric change
    double yaw_at_left_edge = 0.0;  // radians
    double radius_fraction = 330.0 / 3584.0;  // of the reference width
};

struct GroundTruth {
    std::string id;
    AffineMap affine;
    Point2 focus;
    double radius = 0.0;
    Texture texture = Texture::Glyphs;
    HeadPose true_pose;
    double brightness = 0.0;
    double noise_sigma = 0.0;
    double occlusion = 0.0;
    double drift_rate = 0.0;
};

struct SyntheticPair {
    GrayImage pov;
    GrayImage ref;
    PanoramaGeometry geometry;
    HeadPose sensor;
    GroundTruth truth;
};

GrayImage render_scene(const SceneSpec& spec);

SyntheticPair generate_pair(const SceneSpec& spec, const TruthParams& params);
// Same, reusing an already rendered reference for the scene.
SyntheticPair generate_pair(const SceneSpec& spec, const TruthParams& params, const GrayImage& reference);

// Warps `source` by `pov_to_ref` into a width x height POV frame.
GrayImage warp_view(const GrayImage& source, const AffineMap& pov_to_ref, int width, int height,
                    bool wrap_x);

struct EvaluationReport {
    std::size_t count = 0;
    std::size_t correct = 0;                  // f within R (alpha as configured)
    std::size_t correct_without_sensors = 0;  // f_ref within R
    std::size_t accepted = 0;
    std::size_t accepted_correct = 0;
    double accuracy = 0.0;
    double accuracy_without_sensors = 0.0;
    double mean_error = 0.0;    // over results with an estimate
    double median_error = 0.0;
    std::size_t failures = 0;   // results without any estimate
};

// Throws Error(Evaluation) when the id sets differ. A non-positive
// `radius_override` uses each truth's own radius. Boundary counts as correct.
EvaluationReport evaluate(const std::vector<LocalizationResult>& results,
                          const std::map<std::string, GroundTruth>& truths,
                          double radius_override = 0.0);

// Dataset layout: ref/NNN.pgm, pov/NNN.pgm, sensors/NNN.txt, truth/NNN.txt and
// a manifest.json describing the references.
void write_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth read_truth(const std::filesystem::path& path);
std::map<std::string, GroundTruth> load_truths(const std::filesystem::path& dir);

struct DatasetSpec {
    SceneSpec scene;
    TruthParams truth;
    std::vector<Texture> textures;  // cycled per pair; empty uses scene.texture
};

void write_dataset(const DatasetSpec& spec, int count, const std::filesystem::path& out_dir);
std::string pair_id(int index);

// Scripted multi-camera presentation: two fixed cameras, one POV stream that
// looks at one of them per second.
struct ScriptedVideo {
    std::vector<GrayImage> cameras;
    std::vector<FlatGeometry> camera_geometry;
    struct Frame {
        std::int64_t timestamp_ms = 0;
        GrayImage image;
        int camera = 0;
        Point2 focus;
    };
    std::vector<Frame> frames;
    std::vector<HeadPose> poses;
};

ScriptedVideo generate_scripted_video(std::uint64_t seed, int seconds, const TruthParams& params);

// Scripted museum visit: one annotated panorama with exhibits and several
// people whose gaze follows a per-second script (-1 = looking elsewhere).
struct ScriptedSession {
    GrayImage panorama;
    PanoramaGeometry geometry;
    std::vector<AnnotatedRegion> exhibits;
    std::vector<Point2> floorplan_positions;
    int floorplan_width = 0;
    int floorplan_height = 0;
    struct Person {
        std::string id;
        std::vector<std::int64_t> timestamps;
        std::vector<GrayImage> frames;
        std::vector<Point2> focus;  // true focus on the panorama
        std::vector<HeadPose> poses;
    };
    std::vector<Person> people;
    std::vector<std::vector<int>> script;  // script[person][second]
    std::int64_t tick_ms = 1000;
};

// `script[p][s]` selects the exhibit person p looks at during second s.
ScriptedSession generate_session(std::uint64_t seed, const std::vector<std::vector<int>>& script,
                                 int exhibits, const TruthParams& params);

// Four visitors, 32 s: all at exhibit 0 for 8 s, then P1+P4 at exhibit 1
// with P2+P3 at exhibit 2 for 10 s, then P1+P2 at exhibit 3 while P4 is
// alone at exhibit 0 for 8 s, separated by 2 s looking elsewhere.
std::vector<std::vector<int>> demo_session_script();
// Moderate view warps for sessions (one person's frame becomes another's reference).
TruthParams demo_session_params();

std::vector<Stream> session_streams(const ScriptedSession& session);
Floorplan session_floorplan(const ScriptedSession& session);

// Annotated museum scenes: views of exhibits with the true focus inside one.
struct MuseumCase {
    GrayImage pov;
    HeadPose sensor;
    Point2 focus;
    std::string exhibit;  // label containing the true focus
};
struct MuseumScene {
    ReferenceEntry entry;  // image_path empty; image held below
    GrayImage panorama;
    std::vector<MuseumCase> cases;
};

MuseumScene generate_museum_scene(std::uint64_t seed, int exhibits, int views, const TruthParams& params);

}  // namespace egofov
