#ifndef GPLOCALIZE_TRAJECTORY_HPP
#define GPLOCALIZE_TRAJECTORY_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gplocalize/localize.hpp"

namespace gplocalize {

struct TrajectorySpec {
    enum class Kind { lawnmower, random_walk, waypoints };
    Kind kind = Kind::lawnmower;
    /// Action count for lawnmower and random walk. Waypoint lists run to the
    /// last waypoint instead.
    int steps = 200;
    double step_length = 1.0;
    /// Distance between lawnmower sweeps.
    double lane_spacing = 4.0;
    /// Keep-out band along the field boundary for lawnmower and random walk.
    double margin = 2.0;
    /// Heading change sd per random-walk step, radians.
    double turn_sd = 0.3;
    /// First entry is the start location.
    std::vector<Eigen::Vector2d> waypoints;
    double start_heading = 0.0;

    void validate() const;
};

/// Start pose, the exact actions, and poses[i] reached after actions[i].
struct Trajectory {
    Pose start;
    std::vector<OdometryAction> actions;
    std::vector<Pose> poses;
};

/// Plans a trajectory inside [lower, upper]. Every action has rot2 = 0 and
/// poses come from noise-free sample_motion(), so replaying the actions
/// reproduces them. Straight runs are cut into equal steps no longer than
/// step_length. Lawnmower sweeps back and forth along x, retracing the
/// pattern in reverse when it runs out; the random walk mirrors its heading
/// off the margin box. Throws std::invalid_argument for waypoints outside
/// the bounds or a margin box too small to move in.
Trajectory generate_trajectory(const TrajectorySpec& spec, const Eigen::Vector2d& lower,
                               const Eigen::Vector2d& upper, std::uint64_t seed);

/// Replays `actions` from `start` with noise-free motion.
std::vector<Pose> replay_actions(const Pose& start, const std::vector<OdometryAction>& actions);

/// The action as the wheel encoders would report it: each component is
/// perturbed with the odometry-model variances of `noise`.
OdometryAction perturb_action(const OdometryAction& u, const MotionNoise& noise, Rng& rng);

} // namespace gplocalize

#endif // GPLOCALIZE_TRAJECTORY_HPP
