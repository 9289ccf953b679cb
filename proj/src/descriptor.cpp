#include <algorithm>
#include <cmath>
#include <numbers>

#include "egofov/error.hpp"
#include "egofov/features.hpp"

namespace egofov {

Ellipse region_ellipse(const InterestRegion& region) {
    const SymMatrix2& m = region.second_moments;
    const double det = m.det();
    if (!(det > 1e-12)) {
        throw Error(ErrorCode::DegenerateRegion, "region moments have non-positive determinant");
    }
    const double half_trace = 0.5 * (m.xx + m.yy);
    const double disc = std::sqrt(std::max(0.0, 0.25 * (m.xx - m.yy) * (m.xx - m.yy) + m.xy * m.xy));
    const double l1 = half_trace + disc;
    const double l2 = std::max(half_trace - disc, 1e-300);
    // Scale so the ellipse area pi*a*b equals the pixel count.
    const double k = std::sqrt(region.pixel_count / (std::numbers::pi * std::sqrt(l1 * l2)));
    Ellipse e;
    e.center = region.centroid;
    e.major = k * std::sqrt(l1);
    e.minor = k * std::sqrt(l2);
    e.orientation = 0.5 * std::atan2(2.0 * m.xy, m.xx - m.yy);
    if (e.orientation <= -std::numbers::pi / 2) e.orientation += std::numbers::pi;
    return e;
}

ImagePyramid::ImagePyramid(const GrayImage& image, int min_side) {
    levels_.push_back(image);
    while (true) {
        const GrayImage& prev = levels_.back();
        const int w = prev.width() / 2;
        const int h = prev.height() / 2;
        if (w < min_side || h < min_side) break;
        GrayImage next(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int sum = prev.at(2 * x, 2 * y) + prev.at(2 * x + 1, 2 * y) +
                                prev.at(2 * x, 2 * y + 1) + prev.at(2 * x + 1, 2 * y + 1);
                next.at(x, y) = static_cast<std::uint8_t>((sum + 2) / 4);
            }
        }
        levels_.push_back(std::move(next));
    }
}

namespace {

GrayImage sample_patch(const ImagePyramid* pyramid, const GrayImage& base, const Ellipse& ellipse,
                       const PatchParams& params) {
    const int size = params.patch_size;
    if (size < 8) throw Error(ErrorCode::Parameter, "patch_size must be >= 8");
    const double half = size / 2.0;
    const double c = std::cos(ellipse.orientation);
    const double s = std::sin(ellipse.orientation);
    const double ax = params.measurement_scale * ellipse.major;
    const double ay = params.measurement_scale * ellipse.minor;

    // Pick the pyramid level whose pixel spacing best matches one patch step
    // along the major axis; the finer axis is left slightly under-filtered.
    int level = 0;
    if (pyramid) {
        const double step = ax / half;
        if (step > 1.0) level = static_cast<int>(std::floor(std::log2(step)));
        level = std::clamp(level, 0, pyramid->size() - 1);
    }
    const GrayImage& src = pyramid ? pyramid->level(level) : base;
    const double scale = std::ldexp(1.0, -level);

    GrayImage patch(size, size);
    for (int v = 0; v < size; ++v) {
        const double lv = (v + 0.5 - half) / half;
        for (int u = 0; u < size; ++u) {
            const double lu = (u + 0.5 - half) / half;
            const double dx = ax * lu * c - ay * lv * s;
            const double dy = ax * lu * s + ay * lv * c;
            const double x = ellipse.center.x + dx;
            const double y = ellipse.center.y + dy;
            const double sx = (x + 0.5) * scale - 0.5;
            const double sy = (y + 0.5) * scale - 0.5;
            const double value = sample_bilinear(src, sx, sy);
            patch.at(u, v) = static_cast<std::uint8_t>(std::clamp(std::floor(value + 0.5), 0.0, 255.0));
        }
    }
    return patch;
}

}  // namespace

GrayImage normalize_patch(const GrayImage& image, const Ellipse& ellipse, const PatchParams& params) {
    return sample_patch(nullptr, image, ellipse, params);
}

GrayImage normalize_patch(const ImagePyramid& pyramid, const Ellipse& ellipse, const PatchParams& params) {
    return sample_patch(&pyramid, pyramid.level(0), ellipse, params);
}

namespace detail {

bool normalize_clamp(std::span<double> bins, double clamp) {
    auto normalize = [&]() {
        double sq = 0.0;
        for (double b : bins) sq += b * b;
        const double norm = std::sqrt(sq);
        if (!(norm > 1e-12)) return false;
        for (double& b : bins) b /= norm;
        return true;
    };
    if (!normalize()) {
        std::fill(bins.begin(), bins.end(), 0.0);
        return false;
    }
    for (double& b : bins) b = std::min(b, clamp);
    return normalize();
}

}  // namespace detail

Descriptor sift_descriptor(const GrayImage& patch) {
    const int size = patch.width();
    if (patch.height() != size || size < 16) {
        throw Error(ErrorCode::Parameter, "sift patch must be square with side >= 16");
    }
    constexpr int kCells = 4;
    constexpr int kOrientations = 8;
    const double cell = static_cast<double>(size) / kCells;
    const double sigma = size / 2.0;
    const double center = size / 2.0;
    const double bin_width = 2.0 * std::numbers::pi / kOrientations;

    std::array<double, kCells * kCells * kOrientations> bins{};
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double gx = static_cast<double>(patch.at_clamped(x + 1, y)) - patch.at_clamped(x - 1, y);
            const double gy = static_cast<double>(patch.at_clamped(x, y + 1)) - patch.at_clamped(x, y - 1);
            const double magnitude = std::hypot(gx, gy);
            if (magnitude == 0.0) continue;
            double angle = std::atan2(gy, gx);
            if (angle < 0) angle += 2.0 * std::numbers::pi;

            const double rx = x + 0.5 - center;
            const double ry = y + 0.5 - center;
            const double weight = magnitude * std::exp(-(rx * rx + ry * ry) / (2.0 * sigma * sigma));

            const double bx = (x + 0.5) / cell - 0.5;
            const double by = (y + 0.5) / cell - 0.5;
            const double bo = angle / bin_width;
            const int x0 = static_cast<int>(std::floor(bx));
            const int y0 = static_cast<int>(std::floor(by));
            const int o0 = static_cast<int>(std::floor(bo));
            const double fx = bx - x0;
            const double fy = by - y0;
            const double fo = bo - o0;

            for (int dy = 0; dy < 2; ++dy) {
                const int cy = y0 + dy;
                if (cy < 0 || cy >= kCells) continue;
                const double wy = dy ? fy : 1.0 - fy;
                for (int dx = 0; dx < 2; ++dx) {
                    const int cx = x0 + dx;
                    if (cx < 0 || cx >= kCells) continue;
                    const double wx = dx ? fx : 1.0 - fx;
                    for (int d_o = 0; d_o < 2; ++d_o) {
                        const int o = (o0 + d_o) % kOrientations;
                        const double wo = d_o ? fo : 1.0 - fo;
                        bins[(cy * kCells + cx) * kOrientations + o] += weight * wx * wy * wo;
                    }
                }
            }
        }
    }

    Descriptor d;
    d.degenerate = !detail::normalize_clamp(bins, 0.2);
    for (std::size_t i = 0; i < bins.size(); ++i) d.values[i] = static_cast<float>(bins[i]);
    return d;
}

FeatureSet extract_features(const GrayImage& image, const FeatureParams& params) {
    FeatureSet set;
    const ImagePyramid pyramid(image);
    MserParams mser = params.mser;
    mser.keep_pixels = false;
    for (auto& region : detect_mser(image, mser)) {
        if (params.drop_border_regions && region.touches_border) continue;
        Ellipse ellipse;
        try {
            ellipse = region_ellipse(region);
        } catch (const Error&) {
            continue;
        }
        Descriptor d = sift_descriptor(normalize_patch(pyramid, ellipse, params.patch));
        if (d.degenerate) continue;
        set.regions.push_back(std::move(region));
        set.ellipses.push_back(ellipse);
        set.descriptors.push_back(d);
    }
    return set;
}

}  // namespace egofov
