#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "egofov/imaging.hpp"

namespace egofov {

enum class Polarity { Bright, Dark };

struct MserParams {
    int delta = 5;                   // half-window, in steps of the level-normalized scale
    int min_area = 30;               // pixels
    double max_area = 0.25;          // fraction of image area
    double max_variation = 0.5;
    double duplicate_overlap = 0.1;  // nested stable regions closer than this in area collapse
    bool bright = true;
    bool dark = true;
    bool keep_pixels = false;        // fill InterestRegion::pixels (tests, debugging)

    void validate() const;
};

struct SymMatrix2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    double det() const { return xx * yy - xy * xy; }
};

struct InterestRegion {
    int pixel_count = 0;
    Point2 centroid;
    SymMatrix2 second_moments;  // covariance of the pixel coordinates
    Polarity polarity = Polarity::Bright;
    int representative_intensity = 0;
    double variation = 0.0;
    bool touches_border = false;  // contains a pixel on the image frame
    std::vector<int> pixels;  // linear indices, ascending; only with keep_pixels
};

// Maximally stable extremal regions, bright polarity first, each polarity in
// component-tree creation order.
//
// Stability is measured on a level-normalized scale: the K distinct intensities
// of the image are placed at 255 * rank / (K - 1). For an image using all 256
// levels this is the raw intensity scale; in general it makes the detector
// depend only on the intensity order, so any strictly increasing remap of the
// input yields the same regions.
std::vector<InterestRegion> detect_mser(const GrayImage& image, const MserParams& params);

struct Ellipse {
    Point2 center;
    double major = 0.0;  // semi-axis lengths, pixels
    double minor = 0.0;
    double orientation = 0.0;  // radians, major axis angle in (-pi/2, pi/2]
};

// Throws Error(DegenerateRegion) when the moments have non-positive determinant.
Ellipse region_ellipse(const InterestRegion& region);

struct PatchParams {
    int patch_size = 32;
    double measurement_scale = 2.0;
};

// Multi-resolution source for patch sampling; level 0 is the image itself.
class ImagePyramid {
public:
    explicit ImagePyramid(const GrayImage& image, int min_side = 16);

    const GrayImage& level(int i) const { return levels_[static_cast<std::size_t>(i)]; }
    int size() const { return static_cast<int>(levels_.size()); }

private:
    std::vector<GrayImage> levels_;
};

GrayImage normalize_patch(const GrayImage& image, const Ellipse& ellipse,
                          const PatchParams& params = {});
GrayImage normalize_patch(const ImagePyramid& pyramid, const Ellipse& ellipse,
                          const PatchParams& params = {});

struct Descriptor {
    std::array<float, 128> values{};
    bool degenerate = false;
};

Descriptor sift_descriptor(const GrayImage& patch);

namespace detail {
// Normalize, clamp each bin at `clamp`, renormalize. Returns false for a zero vector.
bool normalize_clamp(std::span<double> bins, double clamp);
}  // namespace detail

struct FeatureParams {
    MserParams mser;
    PatchParams patch;
    bool drop_border_regions = true;  // frame-clipped regions have unreliable centroids
};

// MSER regions plus their descriptors; regions whose ellipse is degenerate,
// whose descriptor is gradient-free or (optionally) that touch the frame are dropped, so all three lists align.
struct FeatureSet {
    std::vector<InterestRegion> regions;
    std::vector<Ellipse> ellipses;
    std::vector<Descriptor> descriptors;

    std::size_t size() const { return descriptors.size(); }
    Point2 position(std::size_t i) const { return regions[i].centroid; }
};

FeatureSet extract_features(const GrayImage& image, const FeatureParams& params = {});

// Debug dump: `cx cy area m11 m12 m22 polarity t` per line.
void write_regions(std::ostream& out, const std::vector<InterestRegion>& regions);

}  // namespace egofov
