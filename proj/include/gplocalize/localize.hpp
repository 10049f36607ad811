#ifndef GPLOCALIZE_LOCALIZE_HPP
#define GPLOCALIZE_LOCALIZE_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gplocalize/online_sparse_gp.hpp"

namespace gplocalize {

using Rng = std::mt19937_64;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

struct Pose {
    Eigen::Vector2d location = Eigen::Vector2d::Zero();
    double heading = 0.0; // radians, (-pi, pi]

    Pose() = default;
    Pose(double x, double y, double theta) : location(x, y), heading(normalize_angle(theta)) {}
    Pose(const Eigen::Vector2d& xy, double theta) : location(xy), heading(normalize_angle(theta)) {}
};

/// Rotate, translate, rotate.
struct OdometryAction {
    double rot1 = 0.0;
    double trans = 0.0;
    double rot2 = 0.0;

    void validate() const;
};

/// Standard odometry noise coefficients: alpha1 and alpha2 scale rotation
/// noise by rotation and translation; alpha3 and alpha4 scale translation
/// noise by translation and rotation.
struct MotionNoise {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double alpha3 = 0.0;
    double alpha4 = 0.0;

    void validate() const;
};

struct Particle {
    Pose pose;
    double weight = 0.0;
};

struct Belief {
    std::vector<Particle> particles;

    std::size_t size() const { return particles.size(); }
    /// Non-empty, non-negative weights summing to 1 within `tol`.
    void validate(double tol = 1e-9) const;
    /// 1 / sum of squared weights.
    double effective_sample_size() const;
    /// 2 x n matrix of particle locations.
    Eigen::MatrixXd locations() const;
};

/// One simulated past trajectory, kept only as its current pose and one
/// online GP per field.
struct SamplePath {
    Pose current_pose;
    std::vector<OnlineGPState> gp_states;
};

/// Draws the next pose given odometry. Three standard normals are consumed
/// per call whatever the noise, so the stream stays aligned across runs.
Pose sample_motion(const Pose& prev, const OdometryAction& u, const MotionNoise& noise, Rng& rng);

/// log p(z | path c) for each path at a single location: the product over
/// fields of the online GP predictive densities.
Eigen::VectorXd path_log_likelihoods(const Eigen::VectorXd& z, const Eigen::Vector2d& location,
                                     const std::vector<SamplePath>& paths);

/// log of the Monte Carlo average over paths.
double log_observation_likelihood(const Eigen::VectorXd& z, const Pose& pose,
                                  const std::vector<SamplePath>& paths);

double observation_likelihood(const Eigen::VectorXd& z, const Pose& pose,
                              const std::vector<SamplePath>& paths);

/// log_observation_likelihood() at every column of `locations` (2 x n).
/// The cross-covariance with each field's support set is computed once and
/// shared by all paths.
Eigen::VectorXd log_observation_likelihoods(const Eigen::VectorXd& z,
                                            const Eigen::MatrixXd& locations,
                                            const std::vector<SamplePath>& paths);

/// True at t = N*tau + 2 for N >= 1.
bool is_reanchor_step(std::uint64_t t, int tau);

/// Moves every path one step with `u`. At re-anchoring steps the path's
/// current pose is first replaced by a draw from `anchor_belief`.
void advance_sample_paths(std::vector<SamplePath>& paths, const OdometryAction& u,
                          const Belief& anchor_belief, std::uint64_t t, const MotionNoise& noise,
                          Rng& rng);

/// Weighted mean location and circular-mean heading.
Pose estimate_location(const Belief& belief);

/// Systematic resampling with offset u0 in [0, 1): the k-th pointer sits at
/// (u0 + k) / n on the cumulative weights.
Belief resample_systematic(const Belief& belief, double u0);
Belief resample(const Belief& belief, Rng& rng);

/// Moves every particle through the motion model.
void propagate_particles(Belief& belief, const OdometryAction& u, const MotionNoise& noise, Rng& rng);

/// Multiplies weights by exp(log_likelihood), normalizes, and resamples when
/// the effective sample size drops below `resample_fraction` of the count.
/// If every weight underflows the belief falls back to uniform weights.
void reweight(Belief& belief, const Eigen::VectorXd& log_likelihood, double resample_fraction, Rng& rng);

struct InitialBelief {
    enum class Kind { gaussian, uniform };
    Kind kind = Kind::gaussian;
    Pose start;
    double location_sd = 2.0;
    double heading_sd = 0.0;
    // uniform kind: bounding box of the field
    Eigen::Vector2d lower = Eigen::Vector2d::Zero();
    Eigen::Vector2d upper = Eigen::Vector2d::Ones();

    Belief sample(int count, Rng& rng) const;
    Pose sample_pose(Rng& rng) const;
};

struct FilterConfig {
    /// One support model per field; its hyperparameters define the field.
    std::vector<std::shared_ptr<const SupportModel>> fields;
    int tau = 10;
    int particle_count = 400;
    int sample_path_count = 400;
    MotionNoise noise;
    InitialBelief initial;
    double resample_fraction = 0.5;

    void validate() const;
};

struct FilterState {
    Belief belief;
    std::vector<SamplePath> paths;
    /// b(x_{N tau}), the belief kept for the next re-anchoring.
    Belief anchor_belief;
    std::optional<OdometryAction> last_action;
    Eigen::VectorXd last_measurement;
    std::uint64_t t = 0; // steps taken

    /// Particles and paths drawn from the initial belief.
    static FilterState init(const FilterConfig& config, Rng& rng);
};

/// One Bayes filter step with action u_t and measurement z_t (one value per
/// field):
///  1. particles move with u_t;
///  2. paths move with u_{t-1}, giving x^c_{t-1};
///  3. (x^c_{t-1}, z_{t-1}) is pushed to each path's GPs, flushing full slices;
///  4. particles are weighted by the likelihood of z_t;
///  5. weights are normalized, and resampled on low effective sample size.
/// Step 1 of the run pushes nothing since there is no earlier measurement.
void filter_step(FilterState& state, const OdometryAction& u, const Eigen::VectorXd& z,
                 const FilterConfig& config, Rng& rng);

/// Binary snapshots; sizes depend only on particle count, path count, |S|,
/// tau and the number of fields.
void serialize(const Belief& belief, std::vector<std::uint8_t>& out);
void serialize(const std::vector<SamplePath>& paths, std::vector<std::uint8_t>& out);
/// Belief plus paths.
std::size_t state_bytes(const FilterState& state);

} // namespace gplocalize

#endif // GPLOCALIZE_LOCALIZE_HPP
