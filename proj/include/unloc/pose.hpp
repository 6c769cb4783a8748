#pragma once

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>

namespace unloc {

template <typename S>
using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Mat3 = Eigen::Matrix<S, 3, 3>;

/// Maps an angle into (-pi, pi].
template <typename S>
S wrap_angle(S a) {
    const S two_pi = S(2) * std::numbers::pi_v<S>;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi_v<S>) a += two_pi;
    if (a > std::numbers::pi_v<S>) a -= two_pi;
    return a;
}

/// Interpolates from a to b along the shorter arc, result in (-pi, pi].
template <typename S>
S lerp_angle(S a, S b, S s) {
    return wrap_angle(a + s * wrap_angle(b - a));
}

/// atan2 of the averaged sines and cosines.
template <typename S>
S circular_mean(std::span<const S> angles) {
    S sn = 0, cs = 0;
    for (S a : angles) sn += std::sin(a), cs += std::cos(a);
    return wrap_angle(std::atan2(sn, cs));
}

/// Rotation from (yaw, roll, pitch), intrinsic Z-X-Y: R = Rz(yaw) Rx(roll) Ry(pitch).
template <typename S>
Mat3<S> euler_to_matrix(const Vec3<S>& ypr) {
    using AA = Eigen::AngleAxis<S>;
    return (AA(ypr[0], Vec3<S>::UnitZ()) * AA(ypr[1], Vec3<S>::UnitX()) * AA(ypr[2], Vec3<S>::UnitY())).toRotationMatrix();
}

/// Inverse of euler_to_matrix with roll in [-pi/2, pi/2].
template <typename S>
Vec3<S> matrix_to_euler(const Mat3<S>& r) {
    const S roll = std::asin(std::clamp(r(2, 1), S(-1), S(1)));
    const S pitch = std::atan2(-r(2, 0), r(2, 2));
    const S yaw = std::atan2(-r(0, 1), r(1, 1));
    return {wrap_angle(yaw), wrap_angle(roll), wrap_angle(pitch)};
}

/// Translation in metres and rotation as (yaw, roll, pitch) in radians.
struct Pose6DoF {
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    Eigen::Vector3d rotation = Eigen::Vector3d::Zero();

    Eigen::Isometry3d isometry() const;
    static Pose6DoF from_isometry(const Eigen::Isometry3d& t);
    bool operator==(const Pose6DoF&) const = default;
};

/// Body-frame increment from a to b: a^-1 b.
Pose6DoF relative_pose(const Pose6DoF& a, const Pose6DoF& b);
/// a followed by the body-frame increment d.
Pose6DoF compose(const Pose6DoF& a, const Pose6DoF& d);
/// Rotation angle of Ra^T Rb in radians.
double geodesic_angle(const Pose6DoF& a, const Pose6DoF& b);

/// Mean translation and per-component circular mean of the Euler angles.
Pose6DoF fuse_poses(std::span<const Pose6DoF> poses);

std::string to_string(const Pose6DoF& p);

}  // namespace unloc
