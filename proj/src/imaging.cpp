#include "egofov/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "egofov/error.hpp"

namespace egofov {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Io: return "io";
        case ErrorCode::Format: return "format";
        case ErrorCode::Parameter: return "parameter";
        case ErrorCode::DegenerateRegion: return "degenerate-region";
        case ErrorCode::EmptyIndex: return "empty-index";
        case ErrorCode::DegenerateSample: return "degenerate-sample";
        case ErrorCode::InsufficientMatches: return "insufficient-matches";
        case ErrorCode::NoConsensus: return "no-consensus";
        case ErrorCode::InvalidRotation: return "invalid-rotation";
        case ErrorCode::Lookup: return "lookup";
        case ErrorCode::Manifest: return "manifest";
        case ErrorCode::Load: return "load";
        case ErrorCode::Evaluation: return "evaluation";
        case ErrorCode::Session: return "session";
        case ErrorCode::Config: return "config";
    }
    return "unknown";
}

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::Parameter, "image dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::Parameter, "image dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(width) * height) {
        throw Error(ErrorCode::Parameter, "image data length does not match dimensions");
    }
}

std::uint8_t GrayImage::at_clamped(int x, int y, bool wrap_x) const {
    if (wrap_x) {
        x %= width_;
        if (x < 0) x += width_;
    } else {
        x = std::clamp(x, 0, width_ - 1);
    }
    y = std::clamp(y, 0, height_ - 1);
    return at(x, y);
}

std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int weighted = 299 * r + 587 * g + 114 * b;
    return static_cast<std::uint8_t>((weighted + 500) / 1000);
}

namespace {

class PnmReader {
public:
    explicit PnmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    PnmHeader header() {
        if (bytes_.size() < 2 || bytes_[0] != 'P') {
            throw Error(ErrorCode::Format, "not a portable anymap (missing magic)");
        }
        PnmHeader h;
        h.kind = static_cast<char>(bytes_[1]);
        if (h.kind != '2' && h.kind != '3' && h.kind != '5' && h.kind != '6') {
            throw Error(ErrorCode::Format, std::string("unsupported anymap kind P") + h.kind);
        }
        pos_ = 2;
        h.width = next_int();
        h.height = next_int();
        h.maxval = next_int();
        if (h.width < 1 || h.height < 1 || h.maxval < 1 || h.maxval > 65535) {
            throw Error(ErrorCode::Format, "invalid anymap header values");
        }
        return h;
    }

    // Exactly one whitespace byte separates the header from binary data.
    void skip_single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw Error(ErrorCode::Format, "malformed anymap header terminator");
        }
        ++pos_;
    }

    int next_int() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
            throw Error(ErrorCode::Format, "expected integer in anymap");
        }
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000'000) throw Error(ErrorCode::Format, "anymap integer overflow");
            ++pos_;
        }
        return static_cast<int>(value);
    }

    int next_binary(int maxval) {
        if (maxval < 256) {
            if (pos_ >= bytes_.size()) throw Error(ErrorCode::Format, "truncated anymap data");
            return bytes_[pos_++];
        }
        if (pos_ + 1 >= bytes_.size()) throw Error(ErrorCode::Format, "truncated anymap data");
        const int v = (bytes_[pos_] << 8) | bytes_[pos_ + 1];
        pos_ += 2;
        return v;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open image file: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorCode::Io, "read failed: " + path.string());
    return bytes;
}

std::uint8_t rescale(int value, int maxval) {
    if (value > maxval) throw Error(ErrorCode::Format, "anymap sample exceeds maxval");
    if (maxval == 255) return static_cast<std::uint8_t>(value);
    return static_cast<std::uint8_t>((value * 255 * 2 + maxval) / (2 * maxval));
}

}  // namespace

GrayImage decode_pnm(std::span<const std::uint8_t> bytes) {
    PnmReader reader(bytes);
    const PnmHeader h = reader.header();
    const bool binary = h.kind == '5' || h.kind == '6';
    const bool color = h.kind == '3' || h.kind == '6';
    if (binary) reader.skip_single_whitespace();

    const std::size_t count = static_cast<std::size_t>(h.width) * h.height;
    std::vector<std::uint8_t> data(count);
    auto next = [&]() {
        return rescale(binary ? reader.next_binary(h.maxval) : reader.next_int(), h.maxval);
    };
    for (std::size_t i = 0; i < count; ++i) {
        if (color) {
            const std::uint8_t r = next();
            const std::uint8_t g = next();
            const std::uint8_t b = next();
            data[i] = luminance(r, g, b);
        } else {
            data[i] = next();
        }
    }
    return GrayImage(h.width, h.height, std::move(data));
}

GrayImage load_image(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    try {
        return decode_pnm(bytes);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Format) {
            throw Error(ErrorCode::Format, path.string() + ": " + e.what());
        }
        throw;
    }
}

PnmHeader read_pnm_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open image file: " + path.string());
    std::vector<std::uint8_t> head(512);
    in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
    return PnmReader(head).header();
}

void save_pgm(const GrayImage& image, const std::filesystem::path& path, bool ascii) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write image file: " + path.string());
    out << (ascii ? "P2\n" : "P5\n") << image.width() << ' ' << image.height() << "\n255\n";
    if (ascii) {
        for (int y = 0; y < image.height(); ++y) {
            for (int x = 0; x < image.width(); ++x) {
                out << static_cast<int>(image.at(x, y)) << (x + 1 < image.width() ? ' ' : '\n');
            }
        }
    } else {
        const auto px = image.pixels();
        out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    }
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

void save_ppm(const RgbImage& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write image file: " + path.string());
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.data.data()),
              static_cast<std::streamsize>(image.data.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

GrayImage crop(const GrayImage& image, const Window& window, bool panoramic) {
    if (window.width < 1 || window.height < 1) {
        throw Error(ErrorCode::Parameter, "window dimensions must be positive");
    }
    const int x0 = static_cast<int>(std::floor(window.center.x - window.width / 2.0 + 0.5));
    const int y0 = static_cast<int>(std::floor(window.center.y - window.height / 2.0 + 0.5));
    GrayImage out(window.width, window.height);
    for (int y = 0; y < window.height; ++y) {
        for (int x = 0; x < window.width; ++x) {
            out.at(x, y) = image.at_clamped(x0 + x, y0 + y, panoramic);
        }
    }
    return out;
}

double wrap_coordinate(double value, double period) {
    double r = std::fmod(value, period);
    if (r < 0) r += period;
    // fmod of a tiny negative value can round up to exactly `period`.
    if (r >= period) r = 0.0;
    return r;
}

double sample_bilinear(const GrayImage& image, double x, double y, bool wrap_x) {
    const int w = image.width();
    const int h = image.height();
    if (!wrap_x) x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int ix = static_cast<int>(fx);
    const int iy = static_cast<int>(fy);
    const double ax = x - fx;
    const double ay = y - fy;
    const double p00 = image.at_clamped(ix, iy, wrap_x);
    const double p10 = image.at_clamped(ix + 1, iy, wrap_x);
    const double p01 = image.at_clamped(ix, iy + 1, wrap_x);
    const double p11 = image.at_clamped(ix + 1, iy + 1, wrap_x);
    const double top = p00 + ax * (p10 - p00);
    const double bottom = p01 + ax * (p11 - p01);
    return top + ay * (bottom - top);
}

GrayImage resize_bilinear(const GrayImage& image, int new_width, int new_height) {
    if (new_width < 1 || new_height < 1) {
        throw Error(ErrorCode::Parameter, "resize dimensions must be positive");
    }
    const double sx = static_cast<double>(image.width()) / new_width;
    const double sy = static_cast<double>(image.height()) / new_height;
    GrayImage out(new_width, new_height);
    for (int y = 0; y < new_height; ++y) {
        const double src_y = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < new_width; ++x) {
            const double src_x = (x + 0.5) * sx - 0.5;
            const double v = sample_bilinear(image, src_x, src_y);
            out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
        }
    }
    return out;
}

}  // namespace egofov
