#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace egofov {

// Geometry convention used throughout: x = column, y = row, origin top-left.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }

double distance(Point2 a, Point2 b);

struct Window {
    Point2 center;
    int width = 1;
    int height = 1;
};

// Row-major 8-bit luminance raster. Immutable once built.
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, std::uint8_t fill = 0);
    GrayImage(int width, int height, std::vector<std::uint8_t> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t size() const noexcept { return data_.size(); }

    std::uint8_t at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    std::uint8_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    // Clamp-to-edge read; wraps x instead when `wrap_x` is set.
    std::uint8_t at_clamped(int x, int y, bool wrap_x = false) const;

    std::span<const std::uint8_t> pixels() const noexcept { return data_; }
    std::span<std::uint8_t> pixels() noexcept { return data_; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // interleaved RGB, row-major
};

struct PnmHeader {
    char kind = '5';  // '2', '3', '5' or '6'
    int width = 0;
    int height = 0;
    int maxval = 255;
};

// Luminance with BT.601 weights, rounded half-up.
std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b);

GrayImage load_image(const std::filesystem::path& path);
PnmHeader read_pnm_header(const std::filesystem::path& path);
GrayImage decode_pnm(std::span<const std::uint8_t> bytes);

void save_pgm(const GrayImage& image, const std::filesystem::path& path, bool ascii = false);
void save_ppm(const RgbImage& image, const std::filesystem::path& path);

GrayImage crop(const GrayImage& image, const Window& window, bool panoramic = false);
GrayImage resize_bilinear(const GrayImage& image, int new_width, int new_height);

// Bilinear sample with clamp-to-edge. Returns intensity in [0, 255].
double sample_bilinear(const GrayImage& image, double x, double y, bool wrap_x = false);

// Euclidean remainder into [0, period).
double wrap_coordinate(double value, double period);

}  // namespace egofov
