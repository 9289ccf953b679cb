#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "egofov/features.hpp"
#include "egofov/imaging.hpp"
#include "egofov/synth.hpp"

namespace testing {

// Removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("egofov-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline egofov::GrayImage random_image(egofov::Rng& rng, int w, int h) {
    egofov::GrayImage img(w, h);
    for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(rng.integer(0, 255));
    return img;
}

// Blocky random image: a few rectangles of random intensity on a random background.
inline egofov::GrayImage blob_image(egofov::Rng& rng, int w, int h, int blobs) {
    egofov::GrayImage img(w, h, static_cast<std::uint8_t>(rng.integer(0, 255)));
    for (int b = 0; b < blobs; ++b) {
        const int bw = rng.integer(4, w / 3), bh = rng.integer(4, h / 3);
        const int x0 = rng.integer(0, w - bw), y0 = rng.integer(0, h - bh);
        const auto v = static_cast<std::uint8_t>(rng.integer(0, 255));
        for (int y = y0; y < y0 + bh; ++y)
            for (int x = x0; x < x0 + bw; ++x) img.at(x, y) = v;
    }
    return img;
}

inline egofov::Descriptor random_descriptor(egofov::Rng& rng) {
    egofov::Descriptor d;
    for (auto& v : d.values) v = static_cast<float>(rng.uniform());
    return d;
}

}  // namespace testing
