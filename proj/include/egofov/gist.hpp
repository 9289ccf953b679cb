#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "egofov/imaging.hpp"
#include "egofov/matching.hpp"

namespace egofov {

struct GistParams {
    int canonical_size = 128;
    int scales = 4;
    int orientations = 8;
    int grid = 4;
    int padding = 16;            // reflected border added before filtering
    double max_frequency = 0.3;  // cycles/pixel of the finest scale; each scale halves it
    double local_sigma = 4.0;    // pixels, window of the local intensity normalization
    double epsilon = 1e-3;

    std::size_t length() const {
        return static_cast<std::size_t>(scales) * orientations * grid * grid;
    }
    void validate() const;
    friend bool operator==(const GistParams&, const GistParams&) = default;
};

// Grid-averaged Gabor magnitudes, ordered scale-major, then orientation, then
// row-major cells. Entries are non-negative and not normalized.
struct GistDescriptor {
    std::vector<double> values;
};

GistDescriptor gist_descriptor(const GrayImage& image, const GistParams& params = {});

// L2 distance between the unit-normalized descriptors (a zero descriptor stays zero).
double gist_distance(const GistDescriptor& a, const GistDescriptor& b);

// Match-window extent in the reference: `width` pixels wide with the POV aspect ratio.
struct WindowPolicy {
    double panorama_fraction = 0.25;  // window width = reference width * fraction
};

Window match_window(const GrayImage& pov, const GrayImage& ref, Point2 center, bool panoramic,
                    const WindowPolicy& policy = {});

double localization_score(const GrayImage& pov, const GrayImage& ref, const Window& window,
                          bool panoramic, const GistParams& params = {});
double localization_score(const GrayImage& pov, const GrayImage& ref, Point2 f, bool panoramic,
                          const GistParams& params = {}, const WindowPolicy& policy = {});

// Inclusive: score == threshold is accepted.
bool accept(double score, double threshold);

struct ReferenceCandidate {
    const GrayImage* image = nullptr;
    std::optional<MatchResult> match;  // nullopt when matching failed
    double heading = 0.0;              // radians, used only for the sensor-only fallback
    bool panoramic = false;
};

struct Selection {
    std::size_t index = 0;
    bool sensor_only = false;
    double score = 0.0;  // +inf when sensor_only
};

// Lowest-scoring matched candidate (ties to the lower index); when nothing
// matched, the candidate whose heading is angularly closest to `pose_yaw`
// (index 0 without a pose).
Selection select_reference(const GrayImage& pov, std::span<const ReferenceCandidate> candidates,
                           std::optional<double> pose_yaw, const GistParams& params = {},
                           const WindowPolicy& policy = {});

}  // namespace egofov
