#include "unloc/pose.hpp"

#include <sstream>
#include <vector>

namespace unloc {

Eigen::Isometry3d Pose6DoF::isometry() const {
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.linear() = euler_to_matrix<double>(rotation);
    t.translation() = translation;
    return t;
}

Pose6DoF Pose6DoF::from_isometry(const Eigen::Isometry3d& t) {
    return {t.translation(), matrix_to_euler<double>(t.linear())};
}

Pose6DoF relative_pose(const Pose6DoF& a, const Pose6DoF& b) {
    return Pose6DoF::from_isometry(a.isometry().inverse() * b.isometry());
}

Pose6DoF compose(const Pose6DoF& a, const Pose6DoF& d) { return Pose6DoF::from_isometry(a.isometry() * d.isometry()); }

double geodesic_angle(const Pose6DoF& a, const Pose6DoF& b) {
    const Eigen::Matrix3d r = euler_to_matrix<double>(a.rotation).transpose() * euler_to_matrix<double>(b.rotation);
    return Eigen::AngleAxisd(r).angle();
}

Pose6DoF fuse_poses(std::span<const Pose6DoF> poses) {
    Pose6DoF out;
    if (poses.empty()) return out;
    if (poses.size() == 1) return poses.front();
    std::vector<double> angles(poses.size());
    for (const Pose6DoF& p : poses) out.translation += p.translation;
    out.translation /= static_cast<double>(poses.size());
    for (int axis = 0; axis < 3; ++axis) {
        for (std::size_t i = 0; i < poses.size(); ++i) angles[i] = poses[i].rotation[axis];
        out.rotation[axis] = circular_mean<double>(angles);
    }
    return out;
}

std::string to_string(const Pose6DoF& p) {
    std::ostringstream os;
    os << "t=(" << p.translation.transpose() << ") ypr=(" << p.rotation.transpose() << ")";
    return os.str();
}

}  // namespace unloc
