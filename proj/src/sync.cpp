#include "unloc/sync.hpp"

#include <sstream>

namespace unloc {

void GroundTruthStream::validate() const {
    if (timestamps.size() != poses.size() || filled.size() != poses.size())
        throw ConfigError("ground truth: timestamp, pose and source counts differ");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
        if (timestamps[i] <= timestamps[i - 1])
            throw ConfigError("ground truth: timestamps not strictly increasing at row " + std::to_string(i));
    for (const Pose6DoF& p : poses)
        if (!p.translation.allFinite() || !p.rotation.allFinite()) throw NumericError("ground truth: non-finite pose");
}

void GroundTruthStream::push_back(Timestamp t, const Pose6DoF& p, bool from_odometry) {
    timestamps.push_back(t);
    poses.push_back(p);
    filled.push_back(from_odometry);
}

Pose6DoF interpolate_pose(const GroundTruthStream& gt, Timestamp t) {
    if (gt.timestamps.empty() || t < gt.timestamps.front() || t > gt.timestamps.back())
        throw OutOfRangeError("interpolate_pose: timestamp " + std::to_string(t) + " outside ground-truth coverage");
    const auto it = std::lower_bound(gt.timestamps.begin(), gt.timestamps.end(), t);
    const auto i = static_cast<std::size_t>(it - gt.timestamps.begin());
    if (*it == t) return gt.poses[i];
    const Pose6DoF &a = gt.poses[i - 1], &b = gt.poses[i];
    const double s = static_cast<double>(t - gt.timestamps[i - 1]) / static_cast<double>(gt.timestamps[i] - gt.timestamps[i - 1]);
    Pose6DoF out;
    out.translation = a.translation + s * (b.translation - a.translation);
    for (int k = 0; k < 3; ++k) out.rotation[k] = lerp_angle(a.rotation[k], b.rotation[k], s);
    return out;
}

namespace {

bool inside_hole(const GroundTruthStream& gt, Timestamp t, Timestamp max_gap) {
    if (max_gap <= 0) return false;
    const auto it = std::lower_bound(gt.timestamps.begin(), gt.timestamps.end(), t);
    if (it == gt.timestamps.end() || *it == t || it == gt.timestamps.begin()) return false;
    return *it - *(it - 1) > max_gap;
}

bool covered(const GroundTruthStream& gt, Timestamp t) {
    return !gt.timestamps.empty() && t >= gt.timestamps.front() && t <= gt.timestamps.back();
}

}  // namespace

AlignResult align(const std::map<SensorId, SensorStream>& streams, const GroundTruthStream& gt, const AlignOptions& opt) {
    gt.validate();
    for (SensorId s : kAllSensors) {
        const auto it = streams.find(s);
        if (it == streams.end() || it->second.timestamps.empty())
            throw MissingSensorError("align: no frames for sensor " + std::string(sensor_name(s)));
    }

    using Tree = KdTree<double, 3>;
    std::map<SensorId, std::pair<Tree, std::vector<std::size_t>>> trees;
    for (SensorId s : kAllSensors) {
        if (s == SensorId::R) continue;
        const SensorStream& st = streams.at(s);
        std::vector<Tree::Point> pos;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < st.timestamps.size(); ++i) {
            if (!covered(gt, st.timestamps[i]) || inside_hole(gt, st.timestamps[i], opt.max_gap_ns)) continue;
            pos.push_back(interpolate_pose(gt, st.timestamps[i]).translation);
            idx.push_back(i);
        }
        if (pos.empty())
            throw CoverageError("align: no frame of sensor " + std::string(sensor_name(s)) + " lies inside ground-truth coverage");
        trees.emplace(s, std::make_pair(Tree(std::move(pos)), std::move(idx)));
    }

    AlignResult out;
    std::vector<Timestamp> uncovered;
    const SensorStream& radar = streams.at(SensorId::R);
    for (std::size_t i = 0; i < radar.timestamps.size(); ++i) {
        const Timestamp t = radar.timestamps[i];
        if (!covered(gt, t)) {
            ++out.dropped_radar;
            continue;
        }
        if (inside_hole(gt, t, opt.max_gap_ns)) {
            uncovered.push_back(t);
            continue;
        }
        AlignedSample s;
        s.radar_timestamp = t;
        s.pose = interpolate_pose(gt, t);
        s.frame[SensorId::R] = i;
        for (const auto& [id, tree] : trees) s.frame[id] = tree.second[tree.first.nearest(s.pose.translation)];
        out.samples.push_back(std::move(s));
    }
    if (!uncovered.empty()) {
        std::ostringstream os;
        os << "align: " << uncovered.size() << " radar timestamps fall inside ground-truth gaps:";
        for (Timestamp t : uncovered) os << ' ' << t;
        throw CoverageError(os.str());
    }
    return out;
}

namespace {

Pose6DoF inverse(const Pose6DoF& p) { return Pose6DoF::from_isometry(p.isometry().inverse()); }

}  // namespace

GapFillResult gap_fill(const GroundTruthStream& gt, const std::vector<OdometryIncrement>& odometry, Timestamp max_gap_ns) {
    gt.validate();
    if (gt.timestamps.empty()) throw CoverageError("gap_fill: ground truth has no anchor");
    std::map<Timestamp, const OdometryIncrement*> by_start, by_end;
    for (const OdometryIncrement& o : odometry) {
        if (o.t1 <= o.t0) throw ConfigError("gap_fill: odometry increment with t1 <= t0 at " + std::to_string(o.t0));
        by_start.emplace(o.t0, &o);
        by_end.emplace(o.t1, &o);
    }

    GapFillResult res;
    GroundTruthStream& out = res.stream;

    // Before the first anchor: walk backwards through inverse increments.
    std::vector<std::pair<Timestamp, Pose6DoF>> head;
    {
        Timestamp t = gt.timestamps.front();
        Pose6DoF p = gt.poses.front();
        for (auto it = by_end.find(t); it != by_end.end(); it = by_end.find(t)) {
            p = compose(p, inverse(it->second->delta));
            t = it->second->t0;
            head.emplace_back(t, p);
        }
    }
    for (auto it = head.rbegin(); it != head.rend(); ++it) out.push_back(it->first, it->second, true);
    res.dead_reckoned = !head.empty();

    for (std::size_t i = 0; i < gt.size(); ++i) {
        out.push_back(gt.timestamps[i], gt.poses[i], gt.filled[i]);
        if (i + 1 == gt.size()) break;
        const Timestamp ta = gt.timestamps[i], tb = gt.timestamps[i + 1];
        if (tb - ta <= max_gap_ns) continue;

        std::vector<std::pair<Timestamp, Pose6DoF>> chain;
        Timestamp t = ta;
        Pose6DoF p = gt.poses[i];
        while (t < tb) {
            const auto it = by_start.find(t);
            if (it == by_start.end())
                throw CoverageError("gap_fill: odometry does not cover the gap " + std::to_string(ta) + " .. " +
                                    std::to_string(tb) + " (no increment starts at " + std::to_string(t) + ")");
            p = compose(p, it->second->delta);
            t = it->second->t1;
            if (t < tb) chain.emplace_back(t, p);
        }
        if (t != tb)
            throw CoverageError("gap_fill: odometry overshoots the anchor at " + std::to_string(tb));

        const Pose6DoF& b = gt.poses[i + 1];
        const Eigen::Vector3d dt = b.translation - p.translation;
        Eigen::Vector3d dr;
        for (int k = 0; k < 3; ++k) dr[k] = wrap_angle(b.rotation[k] - p.rotation[k]);
        for (auto& [tk, pk] : chain) {
            const double s = static_cast<double>(tk - ta) / static_cast<double>(tb - ta);
            pk.translation += s * dt;
            for (int k = 0; k < 3; ++k) pk.rotation[k] = wrap_angle(pk.rotation[k] + s * dr[k]);
            out.push_back(tk, pk, true);
        }
    }

    // After the last anchor: dead-reckon forwards.
    Timestamp t = gt.timestamps.back();
    Pose6DoF p = gt.poses.back();
    for (auto it = by_start.find(t); it != by_start.end(); it = by_start.find(t)) {
        p = compose(p, it->second->delta);
        t = it->second->t1;
        out.push_back(t, p, true);
        res.dead_reckoned = true;
    }
    res.filled = out.size() - gt.size();
    out.validate();
    return res;
}

}  // namespace unloc
