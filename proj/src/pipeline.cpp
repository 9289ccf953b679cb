#include "egofov/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "egofov/error.hpp"

namespace egofov {

void LocalizerConfig::validate() const {
    features.mser.validate();
    if (features.patch.patch_size < 16) throw Error(ErrorCode::Parameter, "patch size must be >= 16");
    if (!(features.patch.measurement_scale > 0.0)) {
        throw Error(ErrorCode::Parameter, "measurement scale must be positive");
    }
    if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorCode::Parameter, "ratio must lie in (0, 1]");
    ransac.validate();
    if (!(alpha_max >= 0.0 && alpha_max <= 1.0)) throw Error(ErrorCode::Parameter, "alpha_max must lie in [0, 1]");
    if (alpha_override && !(*alpha_override >= 0.0 && *alpha_override <= 1.0)) {
        throw Error(ErrorCode::Parameter, "alpha must lie in [0, 1]");
    }
    gist.validate();
    if (!(window.panorama_fraction > 0.0 && window.panorama_fraction <= 1.0)) {
        throw Error(ErrorCode::Parameter, "panorama window fraction must lie in (0, 1]");
    }
    if (!(min_inlier_threshold >= 0.0)) throw Error(ErrorCode::Parameter, "min inlier threshold must be >= 0");
    if (!(accept_threshold > 0.0)) throw Error(ErrorCode::Parameter, "acceptance threshold must be positive");
}

std::string_view to_string(LocalizationStatus status) {
    switch (status) {
        case LocalizationStatus::Matched: return "matched";
        case LocalizationStatus::SensorFallback: return "sensor-fallback";
        case LocalizationStatus::Failed: return "failed";
    }
    return "failed";
}

Point2 pov_center(const GrayImage& pov) { return {pov.width() / 2.0, pov.height() / 2.0}; }

MatchResult match_images(const FeatureSet& pov_features, const FeatureSet& ref_features,
                         const GrayImage& ref, Point2 f_pov, const LocalizerConfig& config) {
    if (pov_features.size() == 0 || ref_features.size() == 0) {
        throw Error(ErrorCode::InsufficientMatches, "no usable features");
    }
    const DescriptorIndex index(ref_features.descriptors);
    const auto correspondences = match_descriptors(index, pov_features.descriptors, config.ratio);

    std::vector<Point2> pov_points, ref_points;
    pov_points.reserve(pov_features.size());
    ref_points.reserve(ref_features.size());
    for (std::size_t i = 0; i < pov_features.size(); ++i) pov_points.push_back(pov_features.position(i));
    for (std::size_t i = 0; i < ref_features.size(); ++i) ref_points.push_back(ref_features.position(i));

    RansacParams ransac = config.ransac;
    if (config.scale_threshold_by_diagonal) {
        ransac.inlier_threshold *= std::hypot(ref.width(), ref.height()) / 4096.0;
        ransac.inlier_threshold = std::max(ransac.inlier_threshold, config.min_inlier_threshold);
    }
    MatchResult result = ransac_affine(correspondences, pov_points, ref_points, ransac);
    result.f_ref = transfer_focus(result.affine, f_pov);
    return result;
}

LocalizationResult localize(const GrayImage& pov, const FeatureSet& pov_features,
                            const ReferenceView& ref, const std::optional<HeadPose>& pose,
                            const LocalizerConfig& config) {
    config.validate();
    if (!ref.image) throw Error(ErrorCode::Parameter, "reference view has no image");
    const GrayImage& ref_image = *ref.image;
    const bool panoramic = ref.panoramic();
    const std::optional<double> wrap =
        panoramic ? std::optional<double>(ref_image.width()) : std::nullopt;

    FeatureSet extracted;
    const FeatureSet* ref_features = ref.features;
    if (!ref_features) {
        extracted = extract_features(ref_image, config.features);
        ref_features = &extracted;
    }

    LocalizationResult r;
    r.f_pov = pov_center(pov);

    std::optional<MatchResult> match;
    try {
        match = match_images(pov_features, *ref_features, ref_image, r.f_pov, config);
    } catch (const Error& e) {
        switch (e.code()) {
            case ErrorCode::InsufficientMatches:
            case ErrorCode::NoConsensus:
            case ErrorCode::EmptyIndex:
                r.note = std::string(to_string(e.code()));
                break;
            default:
                throw;
        }
    }
    if (match) {
        Point2 f_ref = match->f_ref;
        if (wrap) f_ref.x = wrap_coordinate(f_ref.x, *wrap);
        r.f_ref = f_ref;
        r.affine = match->affine;
        r.inliers = static_cast<int>(match->inlier_indices.size());
    }

    if (pose) {
        const EulerAngles angles = euler_from_rotation(pose->rotation);
        if (const auto* g = std::get_if<PanoramaGeometry>(&ref.geometry)) {
            r.f_s = project_pose(angles, *g);
        } else if (const auto* g = std::get_if<FlatGeometry>(&ref.geometry)) {
            r.f_s = project_pose(angles, *g);
        }
        if (!r.f_s && r.note.empty()) r.note = "pose-not-projectable";
    } else if (r.note.empty()) {
        r.note = "no-pose";
    }

    if (r.f_ref) {
        r.status = LocalizationStatus::Matched;
        if (r.f_s) {
            r.alpha = config.alpha_override ? *config.alpha_override
                                            : alpha_from_reliability(pose->reliability, config.alpha_max);
            r.f = blend_focus(*r.f_s, *r.f_ref, r.alpha, wrap);
        } else {
            r.alpha = 0.0;
            r.f = r.f_ref;
        }
    } else if (r.f_s) {
        r.status = LocalizationStatus::SensorFallback;
        r.alpha = 1.0;
        r.f = r.f_s;
    } else {
        r.status = LocalizationStatus::Failed;
        return r;
    }

    r.score = localization_score(pov, ref_image, *r.f, panoramic, config.gist, config.window);
    r.accepted = r.status == LocalizationStatus::Matched && accept(r.score, config.accept_threshold);
    return r;
}

LocalizationResult localize(const GrayImage& pov, const ReferenceView& ref,
                            const std::optional<HeadPose>& pose, const LocalizerConfig& config) {
    const FeatureSet pov_features = extract_features(pov, config.features);
    return localize(pov, pov_features, ref, pose, config);
}

}  // namespace egofov
