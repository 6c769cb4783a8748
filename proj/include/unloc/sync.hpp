#pragma once

#include "unloc/errors.hpp"
#include "unloc/pose.hpp"
#include "unloc/sensors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

namespace unloc {

using Timestamp = std::int64_t;  // nanoseconds

struct GroundTruthStream {
    std::vector<Timestamp> timestamps;
    std::vector<Pose6DoF> poses;
    std::vector<bool> filled;  // true where the pose came from odometry

    std::size_t size() const { return timestamps.size(); }
    /// Strictly increasing timestamps, finite poses, matching lengths.
    void validate() const;
    void push_back(Timestamp t, const Pose6DoF& p, bool from_odometry = false);
};

/// Linear in translation, shorter-arc per Euler component. Exact at knots.
/// Throws OutOfRangeError outside [first, last].
Pose6DoF interpolate_pose(const GroundTruthStream& gt, Timestamp t);

/// Static k-d tree with median splits. nearest() is exact under Euclidean
/// distance; ties go to the lowest input index.
template <typename S, int Dim>
class KdTree {
public:
    using Point = Eigen::Matrix<S, Dim, 1>;

    explicit KdTree(std::vector<Point> points) : points_(std::move(points)) {
        if (points_.empty()) throw ConfigError("k-d tree: empty point set");
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        nodes_.reserve(points_.size());
        root_ = build(0, order_.size(), 0);
    }

    std::size_t size() const { return points_.size(); }
    const Point& point(std::size_t i) const { return points_[i]; }

    std::size_t nearest(const Point& q) const {
        Best best{std::numeric_limits<S>::infinity(), std::numeric_limits<std::size_t>::max()};
        search(root_, q, best);
        return best.index;
    }

    static S squared_distance(const Point& a, const Point& b) {
        S d = 0;
        for (int k = 0; k < Dim; ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
        return d;
    }

private:
    struct Node {
        std::size_t point;
        int axis;
        int left, right;
    };
    struct Best {
        S dist;
        std::size_t index;
    };

    int build(std::size_t lo, std::size_t hi, int depth) {
        if (lo >= hi) return -1;
        const int axis = depth % Dim;
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                         order_.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::size_t a, std::size_t b) {
                             return points_[a][axis] < points_[b][axis] || (points_[a][axis] == points_[b][axis] && a < b);
                         });
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({order_[mid], axis, -1, -1});
        const int l = build(lo, mid, depth + 1);
        const int r = build(mid + 1, hi, depth + 1);
        nodes_[static_cast<std::size_t>(id)].left = l;
        nodes_[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    void search(int id, const Point& q, Best& best) const {
        if (id < 0) return;
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        const Point& p = points_[n.point];
        const S d = squared_distance(p, q);
        if (d < best.dist || (d == best.dist && n.point < best.index)) best = {d, n.point};
        const S diff = q[n.axis] - p[n.axis];
        const int near = diff < 0 ? n.left : n.right, far = diff < 0 ? n.right : n.left;
        search(near, q, best);
        if (diff * diff <= best.dist) search(far, q, best);
    }

    std::vector<Point> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

/// Timestamps of one sensor and the frame files they refer to.
struct SensorStream {
    SensorId sensor = SensorId::R;
    std::vector<Timestamp> timestamps;
    std::vector<std::string> paths;
};

struct AlignedSample {
    Timestamp radar_timestamp = 0;
    Pose6DoF pose;
    std::map<SensorId, std::size_t> frame;  // index into each sensor's stream
};

struct AlignResult {
    std::vector<AlignedSample> samples;
    std::size_t dropped_radar = 0;  // radar frames outside ground-truth coverage
};

struct AlignOptions {
    /// Ground-truth spacing above this is a hole; radar frames inside a hole
    /// are uncovered. Zero disables the check.
    Timestamp max_gap_ns = 1'000'000'000;
};

/// Pose for every radar frame and the nearest-position frame of every other
/// sensor. Throws MissingSensorError for an absent or empty stream and
/// CoverageError listing radar timestamps that fall inside a hole.
AlignResult align(const std::map<SensorId, SensorStream>& streams, const GroundTruthStream& gt,
                  const AlignOptions& opt = {});

/// Body-frame increment from t0 to t1.
struct OdometryIncrement {
    Timestamp t0 = 0, t1 = 0;
    Pose6DoF delta;
};

struct GapFillResult {
    GroundTruthStream stream;
    std::size_t filled = 0;
    bool dead_reckoned = false;  // some entries rely on a single anchor
};

/// Fills ground-truth spacings wider than `max_gap_ns` with odometry
/// compositions from the left anchor, spreading the closure error against the
/// right anchor linearly in time. Odometry beyond either end of the stream is
/// dead-reckoned from the single anchor and flagged.
GapFillResult gap_fill(const GroundTruthStream& gt, const std::vector<OdometryIncrement>& odometry, Timestamp max_gap_ns);

}  // namespace unloc
