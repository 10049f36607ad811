#include "gplocalize/localize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "gplocalize/binary_io.hpp"
#include "gplocalize/errors.hpp"

namespace gplocalize {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Location as_location(const Eigen::Vector2d& p) { return Location(p); }

double field_logpdf(double z, double mean, double var) {
    if (!(var > 0.0)) {
        throw IllConditionedError("observation likelihood: predictive variance collapsed (" +
                                  std::to_string(var) + ")");
    }
    const double r = z - mean;
    return -0.5 * (kLog2Pi + std::log(var) + r * r / var);
}

double log_mean_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum() / static_cast<double>(v.size()));
}

void check_paths(const Eigen::VectorXd& z, const std::vector<SamplePath>& paths) {
    if (paths.empty()) throw std::invalid_argument("observation likelihood: no sample paths");
    for (const auto& p : paths) {
        if (static_cast<Eigen::Index>(p.gp_states.size()) != z.size()) {
            throw std::invalid_argument("observation likelihood: " + std::to_string(z.size()) +
                                        " measurements for " + std::to_string(p.gp_states.size()) +
                                        " fields");
        }
    }
}

void put_pose(std::vector<std::uint8_t>& out, const Pose& p) {
    binary::put(out, p.location.x());
    binary::put(out, p.location.y());
    binary::put(out, p.heading);
}

} // namespace

double normalize_angle(double a) {
    if (!std::isfinite(a)) throw std::invalid_argument("heading must be finite");
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::remainder(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    return a;
}

void OdometryAction::validate() const {
    if (!std::isfinite(rot1) || !std::isfinite(trans) || !std::isfinite(rot2))
        throw std::invalid_argument("odometry action must be finite");
}

void MotionNoise::validate() const {
    for (double a : {alpha1, alpha2, alpha3, alpha4}) {
        if (!(a >= 0.0) || !std::isfinite(a))
            throw std::invalid_argument("motion noise coefficients must be finite and non-negative");
    }
}

void Belief::validate(double tol) const {
    if (particles.empty()) throw std::invalid_argument("belief has no particles");
    double sum = 0.0;
    for (const auto& p : particles) {
        if (!(p.weight >= 0.0) || !std::isfinite(p.weight))
            throw std::invalid_argument("belief weights must be finite and non-negative");
        sum += p.weight;
    }
    if (std::abs(sum - 1.0) > tol)
        throw std::invalid_argument("belief weights sum to " + std::to_string(sum));
}

double Belief::effective_sample_size() const {
    double s = 0.0;
    for (const auto& p : particles) s += p.weight * p.weight;
    return 1.0 / s;
}

Eigen::MatrixXd Belief::locations() const {
    Eigen::MatrixXd m(2, static_cast<Eigen::Index>(particles.size()));
    for (std::size_t i = 0; i < particles.size(); ++i)
        m.col(static_cast<Eigen::Index>(i)) = particles[i].pose.location;
    return m;
}

Pose sample_motion(const Pose& prev, const OdometryAction& u, const MotionNoise& noise, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const double e1 = n01(rng);
    const double e2 = n01(rng);
    const double e3 = n01(rng);

    const double r1 = u.rot1, t = u.trans, r2 = u.rot2;
    const double rot1 = r1 - std::sqrt(noise.alpha1 * r1 * r1 + noise.alpha2 * t * t) * e1;
    const double trans = t - std::sqrt(noise.alpha3 * t * t + noise.alpha4 * (r1 * r1 + r2 * r2)) * e2;
    const double rot2 = r2 - std::sqrt(noise.alpha1 * r2 * r2 + noise.alpha2 * t * t) * e3;

    const double dir = prev.heading + rot1;
    return Pose(prev.location + trans * Eigen::Vector2d(std::cos(dir), std::sin(dir)),
                prev.heading + rot1 + rot2);
}

Eigen::VectorXd path_log_likelihoods(const Eigen::VectorXd& z, const Eigen::Vector2d& location,
                                     const std::vector<SamplePath>& paths) {
    check_paths(z, paths);
    const Location x = as_location(location);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(paths.size()));
    for (std::size_t c = 0; c < paths.size(); ++c) {
        for (Eigen::Index m = 0; m < z.size(); ++m) {
            const auto g = paths[c].gp_states[static_cast<std::size_t>(m)].predict_with_recent(x);
            out(static_cast<Eigen::Index>(c)) += field_logpdf(z(m), g.mean, g.variance);
        }
    }
    return out;
}

double log_observation_likelihood(const Eigen::VectorXd& z, const Pose& pose,
                                  const std::vector<SamplePath>& paths) {
    return log_mean_exp(path_log_likelihoods(z, pose.location, paths));
}

double observation_likelihood(const Eigen::VectorXd& z, const Pose& pose,
                              const std::vector<SamplePath>& paths) {
    return std::exp(log_observation_likelihood(z, pose, paths));
}

Eigen::VectorXd log_observation_likelihoods(const Eigen::VectorXd& z,
                                            const Eigen::MatrixXd& locations,
                                            const std::vector<SamplePath>& paths) {
    check_paths(z, paths);
    if (locations.rows() != 2) throw std::invalid_argument("locations must be 2 x n");
    const Eigen::Index n = locations.cols();
    const auto paths_n = static_cast<Eigen::Index>(paths.size());

    // per-particle, per-path log-likelihood
    Eigen::MatrixXd ll = Eigen::MatrixXd::Zero(n, paths_n);
    Eigen::MatrixXd mean, var;
    std::vector<const OnlineGPState*> group;
    for (Eigen::Index m = 0; m < z.size(); ++m) {
        const auto field = static_cast<std::size_t>(m);
        // paths normally share one support model per field; runs of paths
        // with the same model are evaluated together
        Eigen::Index start = 0;
        while (start < paths_n) {
            const SupportModel& model = paths[static_cast<std::size_t>(start)].gp_states[field].model();
            group.clear();
            Eigen::Index end = start;
            while (end < paths_n && &paths[static_cast<std::size_t>(end)].gp_states[field].model() == &model) {
                group.push_back(&paths[static_cast<std::size_t>(end)].gp_states[field]);
                ++end;
            }
            const Eigen::MatrixXd k_xs =
                cross_covariance(locations, model.support().locations, model.hyperparams());
            OnlineGPState::predict_with_recent_many(group, locations, k_xs, mean, var);
            if (!(var.minCoeff() > 0.0))
                throw IllConditionedError("observation likelihood: predictive variance collapsed");
            ll.middleCols(start, end - start).array() +=
                -0.5 * (kLog2Pi + var.array().log() + (z(m) - mean.array()).square() / var.array());
            start = end;
        }
    }

    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = log_mean_exp(ll.row(i).transpose());
    return out;
}

bool is_reanchor_step(std::uint64_t t, int tau) {
    const auto tu = static_cast<std::uint64_t>(tau);
    return t >= tu + 2 && (t - 2) % tu == 0;
}

namespace {

Pose draw_from(const Belief& belief, Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double r = u01(rng);
    double acc = 0.0;
    for (const auto& p : belief.particles) {
        acc += p.weight;
        if (r < acc) return p.pose;
    }
    // r landed in the rounding gap above the last partial sum
    for (auto it = belief.particles.rbegin(); it != belief.particles.rend(); ++it)
        if (it->weight > 0.0) return it->pose;
    return belief.particles.back().pose;
}

} // namespace

void advance_sample_paths(std::vector<SamplePath>& paths, const OdometryAction& u,
                          const Belief& anchor_belief, std::uint64_t t, const MotionNoise& noise,
                          Rng& rng) {
    if (paths.empty()) return;
    if (paths.front().gp_states.empty()) throw std::invalid_argument("sample paths carry no fields");
    const int tau = paths.front().gp_states.front().tau();
    const bool reanchor = is_reanchor_step(t, tau);
    if (reanchor && anchor_belief.particles.empty())
        throw std::invalid_argument("advance_sample_paths: empty belief for re-anchoring");
    for (auto& path : paths) {
        if (reanchor) path.current_pose = draw_from(anchor_belief, rng);
        path.current_pose = sample_motion(path.current_pose, u, noise, rng);
    }
}

Pose estimate_location(const Belief& belief) {
    if (belief.particles.empty()) throw std::invalid_argument("estimate_location: empty belief");
    Eigen::Vector2d loc = Eigen::Vector2d::Zero();
    double s = 0.0, c = 0.0;
    for (const auto& p : belief.particles) {
        loc += p.weight * p.pose.location;
        s += p.weight * std::sin(p.pose.heading);
        c += p.weight * std::cos(p.pose.heading);
    }
    return Pose(loc, (s == 0.0 && c == 0.0) ? 0.0 : std::atan2(s, c));
}

Belief resample_systematic(const Belief& belief, double u0) {
    if (belief.particles.empty()) throw std::invalid_argument("resample: empty belief");
    if (!(u0 >= 0.0 && u0 < 1.0)) throw std::invalid_argument("resample: offset must lie in [0, 1)");
    const std::size_t n = belief.size();
    const double w = 1.0 / static_cast<double>(n);
    Belief out;
    out.particles.reserve(n);
    std::size_t i = 0;
    double cumulative = belief.particles[0].weight;
    for (std::size_t k = 0; k < n; ++k) {
        const double pointer = (u0 + static_cast<double>(k)) * w;
        while (pointer >= cumulative && i + 1 < n) cumulative += belief.particles[++i].weight;
        out.particles.push_back({belief.particles[i].pose, w});
    }
    return out;
}

Belief resample(const Belief& belief, Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    return resample_systematic(belief, u01(rng));
}

void propagate_particles(Belief& belief, const OdometryAction& u, const MotionNoise& noise, Rng& rng) {
    for (auto& p : belief.particles) p.pose = sample_motion(p.pose, u, noise, rng);
}

void reweight(Belief& belief, const Eigen::VectorXd& log_likelihood, double resample_fraction, Rng& rng) {
    const std::size_t n = belief.size();
    if (static_cast<std::size_t>(log_likelihood.size()) != n)
        throw std::invalid_argument("reweight: one log-likelihood per particle required");
    if (log_likelihood.hasNaN()) throw IllConditionedError("reweight: likelihood is NaN");

    Eigen::VectorXd logw(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double w = belief.particles[i].weight;
        logw(static_cast<Eigen::Index>(i)) =
            w > 0.0 ? std::log(w) + log_likelihood(static_cast<Eigen::Index>(i))
                    : -std::numeric_limits<double>::infinity();
    }
    const double top = logw.maxCoeff();
    if (!std::isfinite(top)) {
        log_warning("all particle weights vanished; resetting to uniform weights");
        for (auto& p : belief.particles) p.weight = 1.0 / static_cast<double>(n);
        return;
    }
    const Eigen::VectorXd w = (logw.array() - top).exp();
    const double sum = w.sum();
    for (std::size_t i = 0; i < n; ++i) belief.particles[i].weight = w(static_cast<Eigen::Index>(i)) / sum;

    if (belief.effective_sample_size() < resample_fraction * static_cast<double>(n))
        belief = resample(belief, rng);
}

Pose InitialBelief::sample_pose(Rng& rng) const {
    if (kind == Kind::uniform) {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const double x = lower.x() + (upper.x() - lower.x()) * u01(rng);
        const double y = lower.y() + (upper.y() - lower.y()) * u01(rng);
        const double theta = std::numbers::pi * (2.0 * u01(rng) - 1.0);
        return Pose(x, y, theta);
    }
    std::normal_distribution<double> n01(0.0, 1.0);
    const double dx = n01(rng), dy = n01(rng), dh = n01(rng);
    return Pose(start.location + location_sd * Eigen::Vector2d(dx, dy), start.heading + heading_sd * dh);
}

Belief InitialBelief::sample(int count, Rng& rng) const {
    if (count < 1) throw std::invalid_argument("belief needs at least one particle");
    Belief b;
    b.particles.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) b.particles.push_back({sample_pose(rng), 1.0 / count});
    return b;
}

void FilterConfig::validate() const {
    if (fields.empty()) throw std::invalid_argument("filter needs at least one field");
    for (const auto& f : fields) {
        if (!f) throw std::invalid_argument("filter field has no support model");
        if (f->hyperparams().dim() != 2) throw std::invalid_argument("fields must be 2-D");
    }
    if (tau < 1) throw std::invalid_argument("tau must be >= 1");
    if (particle_count < 1) throw std::invalid_argument("particle_count must be >= 1");
    if (sample_path_count < 1) throw std::invalid_argument("sample_path_count must be >= 1");
    if (!(resample_fraction >= 0.0 && resample_fraction <= 1.0))
        throw std::invalid_argument("resample_fraction must lie in [0, 1]");
    if (!(initial.location_sd >= 0.0) || !(initial.heading_sd >= 0.0))
        throw std::invalid_argument("initial belief spreads must be non-negative");
    noise.validate();
}

FilterState FilterState::init(const FilterConfig& config, Rng& rng) {
    config.validate();
    FilterState s;
    s.belief = config.initial.sample(config.particle_count, rng);
    s.anchor_belief = s.belief;
    s.paths.resize(static_cast<std::size_t>(config.sample_path_count));
    for (auto& path : s.paths) {
        path.current_pose = config.initial.sample_pose(rng);
        path.gp_states.reserve(config.fields.size());
        for (const auto& f : config.fields) path.gp_states.emplace_back(f, config.tau);
    }
    s.last_measurement = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(config.fields.size()));
    return s;
}

void filter_step(FilterState& state, const OdometryAction& u, const Eigen::VectorXd& z,
                 const FilterConfig& config, Rng& rng) {
    u.validate();
    if (z.size() != static_cast<Eigen::Index>(config.fields.size()))
        throw std::invalid_argument("filter_step: one measurement per field required");
    if (!z.allFinite()) throw std::invalid_argument("filter_step: measurement must be finite");

    propagate_particles(state.belief, u, config.noise, rng);
    ++state.t;

    if (state.last_action) {
        advance_sample_paths(state.paths, *state.last_action, state.anchor_belief, state.t,
                             config.noise, rng);
        for (auto& path : state.paths) {
            const Location x = as_location(path.current_pose.location);
            for (std::size_t m = 0; m < path.gp_states.size(); ++m)
                path.gp_states[m].observe(x, state.last_measurement(static_cast<Eigen::Index>(m)));
        }
    }

    const Eigen::VectorXd ll = log_observation_likelihoods(z, state.belief.locations(), state.paths);
    reweight(state.belief, ll, config.resample_fraction, rng);

    if (state.t % static_cast<std::uint64_t>(config.tau) == 0) state.anchor_belief = state.belief;
    state.last_action = u;
    state.last_measurement = z;
}

void serialize(const Belief& belief, std::vector<std::uint8_t>& out) {
    binary::put_magic(out, "GPLBELF1");
    binary::put<std::uint32_t>(out, 1);
    binary::put<std::uint64_t>(out, belief.size());
    for (const auto& p : belief.particles) {
        put_pose(out, p.pose);
        binary::put(out, p.weight);
    }
}

void serialize(const std::vector<SamplePath>& paths, std::vector<std::uint8_t>& out) {
    binary::put_magic(out, "GPLPATH1");
    binary::put<std::uint32_t>(out, 1);
    binary::put<std::uint64_t>(out, paths.size());
    binary::put<std::uint32_t>(out, paths.empty() ? 0u : static_cast<std::uint32_t>(paths[0].gp_states.size()));
    for (const auto& path : paths) {
        put_pose(out, path.current_pose);
        for (const auto& gp : path.gp_states) gp.serialize(out);
    }
}

std::size_t state_bytes(const FilterState& state) {
    std::vector<std::uint8_t> buf;
    serialize(state.belief, buf);
    serialize(state.paths, buf);
    return buf.size();
}

} // namespace gplocalize
