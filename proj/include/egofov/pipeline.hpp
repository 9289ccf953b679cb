#pragma once

#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "egofov/features.hpp"
#include "egofov/gist.hpp"
#include "egofov/matching.hpp"
#include "egofov/sensor.hpp"

namespace egofov {

struct LocalizerConfig {
    FeatureParams features;
    double ratio = 0.8;
    RansacParams ransac;
    bool scale_threshold_by_diagonal = true;  // threshold * diag(ref) / 4096
    double min_inlier_threshold = 0.5;        // pixels, lower bound after scaling
    double alpha_max = 0.5;
    std::optional<double> alpha_override;
    GistParams gist;
    WindowPolicy window;
    double accept_threshold = 0.55;

    void validate() const;
};

// How sensor orientation maps onto the reference. `std::monostate` means the
// reference has no known pose (e.g. another person's POV frame).
using ReferenceGeometry = std::variant<std::monostate, PanoramaGeometry, FlatGeometry>;

struct ReferenceView {
    const GrayImage* image = nullptr;
    const FeatureSet* features = nullptr;  // precomputed; extracted on demand when null
    ReferenceGeometry geometry;

    bool panoramic() const { return std::holds_alternative<PanoramaGeometry>(geometry); }
};

enum class LocalizationStatus {
    Matched,         // vision match, possibly sensor-blended
    SensorFallback,  // matching failed; focus is the sensor projection
    Failed,          // matching failed and no sensor estimate
};

struct LocalizationResult {
    std::string frame;
    Point2 f_pov;
    std::optional<Point2> f_ref;
    std::optional<Point2> f_s;
    std::optional<Point2> f;
    double alpha = 0.0;
    double score = std::numeric_limits<double>::infinity();
    int inliers = 0;
    int correspondences = 0;
    bool accepted = false;
    LocalizationStatus status = LocalizationStatus::Failed;
    std::string note;  // failing stage, e.g. "no-consensus", "no-pose"
    std::optional<AffineMap> affine;
};

std::string_view to_string(LocalizationStatus status);

// The POV focus is the image center (w/2, h/2).
Point2 pov_center(const GrayImage& pov);

// Full single-frame pipeline: features, ratio-tested KD matching, RANSAC
// affine, focus transfer, sensor blend, GIST score and acceptance.
LocalizationResult localize(const GrayImage& pov, const FeatureSet& pov_features,
                            const ReferenceView& ref, const std::optional<HeadPose>& pose,
                            const LocalizerConfig& config);

LocalizationResult localize(const GrayImage& pov, const ReferenceView& ref,
                            const std::optional<HeadPose>& pose, const LocalizerConfig& config);

// Vision stage only. Throws the matching errors (InsufficientMatches, NoConsensus, EmptyIndex).
MatchResult match_images(const FeatureSet& pov_features, const FeatureSet& ref_features,
                         const GrayImage& ref, Point2 f_pov, const LocalizerConfig& config);

}  // namespace egofov
