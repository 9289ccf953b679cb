#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "egofov/imaging.hpp"

namespace egofov {

// Row-major 3x3 rotation, device-to-world.
using Rotation = std::array<double, 9>;

struct HeadPose {
    std::int64_t timestamp_ms = 0;
    Rotation rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
    double reliability = 1.0;
};

// Intrinsic Z-Y-X: R = Rz(yaw) * Ry(pitch) * Rx(roll). Pitch is positive when
// looking up; yaw grows to the right across a panorama.
struct EulerAngles {
    double yaw = 0.0;    // (-pi, pi]
    double pitch = 0.0;  // [-pi/2, pi/2]
    double roll = 0.0;   // (-pi, pi]
};

// Throws Error(InvalidRotation) unless R^T R = I and det R = 1 within 1e-6.
void validate_rotation(const Rotation& r);

// At gimbal lock (|pitch| within 1e-6 of pi/2) roll is 0 and yaw absorbs the
// free angle.
EulerAngles euler_from_rotation(const Rotation& r);
Rotation rotation_from_euler(const EulerAngles& e);

struct PanoramaGeometry {
    int width = 1;
    int height = 1;
    double yaw_at_left_edge = 0.0;  // radians; world heading of column 0
};

// Flat (pinhole) reference: optical axis at `heading`, horizontal field of
// view `hfov`, square pixels, principal point at the image center.
struct FlatGeometry {
    int width = 1;
    int height = 1;
    double heading = 0.0;  // radians
    double pitch = 0.0;    // radians
    double hfov = 1.5707963267948966;
};

Point2 project_pose(const EulerAngles& angles, const PanoramaGeometry& geometry);
Point2 project_pose(const HeadPose& pose, const PanoramaGeometry& geometry);
// Nullopt when the pose points away from the image plane.
std::optional<Point2> project_pose(const EulerAngles& angles, const FlatGeometry& geometry);

// f = alpha * f_s + (1 - alpha) * f_ref. With `wrap_width` set, x follows the
// shorter arc around a panorama of that width and the result is wrapped.
Point2 blend_focus(Point2 f_s, Point2 f_ref, double alpha, std::optional<double> wrap_width = std::nullopt);

double alpha_from_reliability(double reliability, double alpha_max = 0.5);

// Angle wrapped into (-pi, pi].
double wrap_angle(double radians);

// Text trace: `timestamp_ms r11 r12 r13 r21 r22 r23 r31 r32 r33 reliability`.
std::vector<HeadPose> read_sensor_trace(std::istream& in);
std::vector<HeadPose> load_sensor_trace(const std::filesystem::path& path);
void write_sensor_trace(std::ostream& out, const std::vector<HeadPose>& poses);

// Nearest pose by timestamp within tolerance; ties go to the earlier record.
std::optional<HeadPose> pose_at(const std::vector<HeadPose>& trace, std::int64_t timestamp_ms,
                                std::int64_t tolerance_ms);

}  // namespace egofov
