#include "gplocalize/trajectory.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gplocalize {

namespace {

constexpr double kBoundsSlack = 1e-9;

Pose noise_free_step(const Pose& prev, const OdometryAction& u) {
    static const MotionNoise none{};
    Rng unused(0);
    return sample_motion(prev, u, none, unused);
}

class Planner {
public:
    Planner(const Pose& start, std::size_t limit) : pose_(start), limit_(limit) { out_.start = start; }

    bool full() const { return out_.actions.size() >= limit_; }
    const Pose& pose() const { return pose_; }

    void act(const OdometryAction& u) {
        pose_ = noise_free_step(pose_, u);
        out_.actions.push_back(u);
        out_.poses.push_back(pose_);
    }

    // Straight run to `target` in equal steps no longer than `step`.
    void go_to(const Eigen::Vector2d& target, double step) {
        const Eigen::Vector2d d = target - pose_.location;
        const double len = d.norm();
        if (len < 1e-12) return;
        const int n = static_cast<int>(std::ceil(len / step - 1e-9));
        const double heading = std::atan2(d.y(), d.x());
        for (int i = 0; i < n && !full(); ++i) {
            OdometryAction u;
            u.rot1 = i == 0 ? normalize_angle(heading - pose_.heading) : 0.0;
            u.trans = len / n;
            act(u);
        }
    }

    Trajectory take() { return std::move(out_); }

private:
    Pose pose_;
    std::size_t limit_;
    Trajectory out_;
};

void check_inside(const Trajectory& t, const Eigen::Vector2d& lower, const Eigen::Vector2d& upper) {
    auto inside = [&](const Pose& p) {
        return (p.location.array() >= lower.array() - kBoundsSlack).all() &&
               (p.location.array() <= upper.array() + kBoundsSlack).all();
    };
    if (!inside(t.start)) throw std::invalid_argument("trajectory starts outside the field");
    for (const Pose& p : t.poses)
        if (!inside(p)) throw std::invalid_argument("trajectory leaves the field");
}

std::vector<Eigen::Vector2d> lawnmower_vertices(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi,
                                                double spacing) {
    std::vector<Eigen::Vector2d> v;
    bool rightward = true;
    for (double y = lo.y(); y <= hi.y() + 1e-9; y += spacing) {
        v.emplace_back(rightward ? lo.x() : hi.x(), y);
        v.emplace_back(rightward ? hi.x() : lo.x(), y);
        rightward = !rightward;
    }
    return v;
}

} // namespace

void TrajectorySpec::validate() const {
    if (!(step_length > 0.0) || !std::isfinite(step_length))
        throw std::invalid_argument("trajectory step_length must be positive");
    if (kind != Kind::waypoints && steps < 0) throw std::invalid_argument("trajectory steps must be >= 0");
    if (!(margin >= 0.0)) throw std::invalid_argument("trajectory margin must be >= 0");
    if (kind == Kind::lawnmower && !(lane_spacing > 0.0))
        throw std::invalid_argument("lawnmower lane_spacing must be positive");
    if (kind == Kind::random_walk && !(turn_sd >= 0.0))
        throw std::invalid_argument("random walk turn_sd must be >= 0");
    if (kind == Kind::waypoints && waypoints.empty())
        throw std::invalid_argument("waypoint trajectory needs at least one waypoint");
    if (!std::isfinite(start_heading)) throw std::invalid_argument("start_heading must be finite");
}

Trajectory generate_trajectory(const TrajectorySpec& spec, const Eigen::Vector2d& lower,
                               const Eigen::Vector2d& upper, std::uint64_t seed) {
    spec.validate();
    if (!((upper - lower).array() > 0.0).all()) throw std::invalid_argument("trajectory bounds are empty");

    Trajectory out;
    if (spec.kind == TrajectorySpec::Kind::waypoints) {
        for (const auto& w : spec.waypoints) {
            if (!w.allFinite() || (w.array() < lower.array()).any() || (w.array() > upper.array()).any())
                throw std::invalid_argument("waypoint outside the field bounds");
        }
        Planner plan(Pose(spec.waypoints.front(), spec.start_heading), static_cast<std::size_t>(-1));
        for (std::size_t i = 1; i < spec.waypoints.size(); ++i) plan.go_to(spec.waypoints[i], spec.step_length);
        out = plan.take();
    } else {
        const Eigen::Vector2d lo = lower.array() + spec.margin;
        const Eigen::Vector2d hi = upper.array() - spec.margin;
        if (!((hi - lo).array() >= spec.step_length).all())
            throw std::invalid_argument("trajectory margin leaves no room to move");
        const auto limit = static_cast<std::size_t>(spec.steps);

        if (spec.kind == TrajectorySpec::Kind::lawnmower) {
            const auto vertices = lawnmower_vertices(lo, hi, spec.lane_spacing);
            Planner plan(Pose(vertices.front(), spec.start_heading), limit);
            // forward, then backward, and so on; the turning vertex is not repeated
            std::size_t i = 0;
            int dir = 1;
            while (!plan.full()) {
                if (vertices.size() < 2) break;
                if ((dir > 0 && i + 1 == vertices.size()) || (dir < 0 && i == 0)) dir = -dir;
                i = static_cast<std::size_t>(static_cast<long>(i) + dir);
                plan.go_to(vertices[i], spec.step_length);
            }
            out = plan.take();
        } else {
            Rng rng(seed);
            std::normal_distribution<double> turn(0.0, spec.turn_sd);
            Planner plan(Pose(0.5 * (lower + upper), spec.start_heading), limit);
            while (!plan.full()) {
                const Pose& p = plan.pose();
                double heading = p.heading + turn(rng);
                Eigen::Vector2d next = p.location + spec.step_length * Eigen::Vector2d(std::cos(heading), std::sin(heading));
                if (next.x() < lo.x() || next.x() > hi.x()) heading = std::numbers::pi - heading;
                if (next.y() < lo.y() || next.y() > hi.y()) heading = -heading;
                OdometryAction u;
                u.rot1 = normalize_angle(heading - p.heading);
                u.trans = spec.step_length;
                plan.act(u);
            }
            out = plan.take();
        }
    }
    check_inside(out, lower, upper);
    return out;
}

std::vector<Pose> replay_actions(const Pose& start, const std::vector<OdometryAction>& actions) {
    std::vector<Pose> poses;
    poses.reserve(actions.size());
    Pose p = start;
    for (const auto& u : actions) {
        p = noise_free_step(p, u);
        poses.push_back(p);
    }
    return poses;
}

OdometryAction perturb_action(const OdometryAction& u, const MotionNoise& noise, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const double r1 = u.rot1, t = u.trans, r2 = u.rot2;
    OdometryAction out;
    out.rot1 = r1 + std::sqrt(noise.alpha1 * r1 * r1 + noise.alpha2 * t * t) * n01(rng);
    out.trans = t + std::sqrt(noise.alpha3 * t * t + noise.alpha4 * (r1 * r1 + r2 * r2)) * n01(rng);
    out.rot2 = r2 + std::sqrt(noise.alpha1 * r2 * r2 + noise.alpha2 * t * t) * n01(rng);
    return out;
}

} // namespace gplocalize
