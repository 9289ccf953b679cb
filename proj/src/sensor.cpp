#include "egofov/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>

#include "egofov/error.hpp"

namespace egofov {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kGimbalTolerance = 1e-6;
}  // namespace

double wrap_angle(double radians) {
    double r = std::fmod(radians + kPi, 2.0 * kPi);
    if (r <= 0.0) r += 2.0 * kPi;
    return r - kPi;
}

void validate_rotation(const Rotation& r) {
    for (double v : r) {
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidRotation, "rotation has non-finite entries");
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += r[k * 3 + i] * r[k * 3 + j];
            if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-6) {
                throw Error(ErrorCode::InvalidRotation, "rotation is not orthonormal");
            }
        }
    }
    const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
                       r[2] * (r[3] * r[7] - r[4] * r[6]);
    if (std::abs(det - 1.0) > 1e-6) throw Error(ErrorCode::InvalidRotation, "rotation determinant is not 1");
}

EulerAngles euler_from_rotation(const Rotation& r) {
    validate_rotation(r);
    // r31 = -sin(pitch)
    const double cos_pitch = std::hypot(r[7], r[8]);
    EulerAngles e;
    e.pitch = std::atan2(-r[6], cos_pitch);
    if (std::abs(std::abs(e.pitch) - kPi / 2) <= kGimbalTolerance) {
        e.pitch = std::copysign(kPi / 2, e.pitch);
        e.roll = 0.0;
        // With roll pinned, r12 = -sin(yaw) and r22 = cos(yaw) at either pole.
        e.yaw = std::atan2(-r[1], r[4]);
    } else {
        e.yaw = std::atan2(r[3], r[0]);
        e.roll = std::atan2(r[7], r[8]);
    }
    e.yaw = wrap_angle(e.yaw);
    e.roll = wrap_angle(e.roll);
    return e;
}

Rotation rotation_from_euler(const EulerAngles& e) {
    const double cy = std::cos(e.yaw), sy = std::sin(e.yaw);
    const double cp = std::cos(e.pitch), sp = std::sin(e.pitch);
    const double cr = std::cos(e.roll), sr = std::sin(e.roll);
    return {cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
            sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
            -sp,     cp * sr,                cp * cr};
}

Point2 project_pose(const EulerAngles& angles, const PanoramaGeometry& g) {
    const double turn = wrap_coordinate(angles.yaw - g.yaw_at_left_edge, 2.0 * kPi);
    Point2 p;
    p.x = wrap_coordinate(g.width * turn / (2.0 * kPi), g.width);
    p.y = std::clamp(g.height * (0.5 - angles.pitch / kPi), 0.0, static_cast<double>(g.height - 1));
    return p;
}

Point2 project_pose(const HeadPose& pose, const PanoramaGeometry& geometry) {
    return project_pose(euler_from_rotation(pose.rotation), geometry);
}

std::optional<Point2> project_pose(const EulerAngles& angles, const FlatGeometry& g) {
    const double rel = angles.yaw - g.heading;
    const double dx = std::cos(angles.pitch) * std::cos(rel);
    const double dy = std::cos(angles.pitch) * std::sin(rel);
    const double dz = std::sin(angles.pitch);
    const double forward = dx * std::cos(g.pitch) + dz * std::sin(g.pitch);
    const double up = -dx * std::sin(g.pitch) + dz * std::cos(g.pitch);
    if (forward <= 1e-9) return std::nullopt;
    const double focal = (g.width / 2.0) / std::tan(g.hfov / 2.0);
    return Point2{g.width / 2.0 + focal * dy / forward, g.height / 2.0 - focal * up / forward};
}

Point2 blend_focus(Point2 f_s, Point2 f_ref, double alpha, std::optional<double> wrap_width) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::Parameter, "alpha must lie in [0, 1]");
    if (alpha == 0.0 && !wrap_width) return f_ref;
    if (alpha == 1.0 && !wrap_width) return f_s;
    double dx = f_s.x - f_ref.x;
    if (wrap_width) {
        const double w = *wrap_width;
        dx = wrap_coordinate(dx + w / 2.0, w) - w / 2.0;
    }
    Point2 f{f_ref.x + alpha * dx, f_ref.y + alpha * (f_s.y - f_ref.y)};
    if (wrap_width) f.x = wrap_coordinate(f.x, *wrap_width);
    return f;
}

double alpha_from_reliability(double reliability, double alpha_max) {
    if (!(reliability >= 0.0 && reliability <= 1.0)) {
        throw Error(ErrorCode::Parameter, "reliability must lie in [0, 1]");
    }
    if (!(alpha_max >= 0.0 && alpha_max <= 1.0)) throw Error(ErrorCode::Parameter, "alpha_max must lie in [0, 1]");
    return alpha_max * reliability;
}

std::vector<HeadPose> read_sensor_trace(std::istream& in) {
    std::vector<HeadPose> poses;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        HeadPose pose;
        fields >> pose.timestamp_ms;
        for (double& v : pose.rotation) fields >> v;
        fields >> pose.reliability;
        std::string extra;
        if (fields.fail() || (fields >> extra)) {
            throw Error(ErrorCode::Format, "sensor trace line " + std::to_string(line_no) + ": expected 11 fields");
        }
        if (!(pose.reliability >= 0.0 && pose.reliability <= 1.0)) {
            throw Error(ErrorCode::Format, "sensor trace line " + std::to_string(line_no) + ": reliability outside [0, 1]");
        }
        try {
            validate_rotation(pose.rotation);
        } catch (const Error& e) {
            throw Error(ErrorCode::InvalidRotation, "sensor trace line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!poses.empty() && pose.timestamp_ms < poses.back().timestamp_ms) {
            throw Error(ErrorCode::Format, "sensor trace line " + std::to_string(line_no) + ": timestamps decrease");
        }
        poses.push_back(pose);
    }
    return poses;
}

std::vector<HeadPose> load_sensor_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open sensor trace: " + path.string());
    return read_sensor_trace(in);
}

void write_sensor_trace(std::ostream& out, const std::vector<HeadPose>& poses) {
    const auto old_precision = out.precision(17);
    for (const auto& p : poses) {
        out << p.timestamp_ms;
        for (double v : p.rotation) out << ' ' << v;
        out << ' ' << p.reliability << '\n';
    }
    out.precision(old_precision);
}

std::optional<HeadPose> pose_at(const std::vector<HeadPose>& trace, std::int64_t timestamp_ms,
                                std::int64_t tolerance_ms) {
    const HeadPose* best = nullptr;
    std::int64_t best_gap = 0;
    for (const auto& p : trace) {
        const std::int64_t gap = p.timestamp_ms > timestamp_ms ? p.timestamp_ms - timestamp_ms
                                                               : timestamp_ms - p.timestamp_ms;
        if (gap <= tolerance_ms && (!best || gap < best_gap)) {
            best = &p;
            best_gap = gap;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

}  // namespace egofov
