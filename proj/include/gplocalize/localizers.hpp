#ifndef GPLOCALIZE_LOCALIZERS_HPP
#define GPLOCALIZE_LOCALIZERS_HPP

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gplocalize/localize.hpp"
#include "gplocalize/sparse_gp.hpp"

namespace gplocalize {

enum class Method { gp_localize, sod_truncate, sod_even, full_gp, offline_pitc, dead_reckoning };

/// The five methods run by `compare` and `bench`.
const std::vector<Method>& comparison_methods();
std::string method_name(Method m);
/// Accepts the names produced by method_name(). Throws std::invalid_argument.
Method parse_method(std::string_view name);

struct BaselineSizes {
    /// SoD-Truncate keeps this many most recent observations.
    int truncate = 10;
    /// SoD-Even keeps this many observations spread over the whole run.
    int even = 40;
};

/// A localization filter driven one step at a time.
class Localizer {
public:
    virtual ~Localizer() = default;

    /// Moves with the reported action u_t, then weighs the particles by the
    /// measurement z_t taken at the new pose (one value per field).
    virtual void step(const OdometryAction& u, const Eigen::VectorXd& z, Rng& rng) = 0;
    virtual const Belief& belief() const = 0;
    /// Serialized size of everything the filter carries between steps.
    virtual std::size_t state_bytes() const = 0;

    Pose estimate() const { return estimate_location(belief()); }
};

class GpLocalizer final : public Localizer {
public:
    GpLocalizer(FilterConfig config, Rng& rng);

    void step(const OdometryAction& u, const Eigen::VectorXd& z, Rng& rng) override;
    const Belief& belief() const override { return state_.belief; }
    std::size_t state_bytes() const override { return gplocalize::state_bytes(state_); }

    const FilterState& state() const { return state_; }

private:
    FilterConfig config_;
    FilterState state_;
};

/// Particle filter whose field model is a GP on its own history of
/// (estimated location, measurement) pairs. After each step the current
/// measurement is attached to the new location estimate. The method picks
/// which part of the history a prediction conditions on:
///   sod-truncate   the `truncate` most recent pairs
///   sod-even       pairs floor(i * n / even), i = 0..even-1, of the n so far
///   full-gp        all pairs
///   offline-pitc   all pairs, in consecutive blocks of tau, through the
///                  fields' support sets
///   dead-reckoning none; the likelihood is constant
class HistoryLocalizer final : public Localizer {
public:
    HistoryLocalizer(Method method, FilterConfig config, BaselineSizes sizes, Rng& rng);

    void step(const OdometryAction& u, const Eigen::VectorXd& z, Rng& rng) override;
    const Belief& belief() const override { return belief_; }
    std::size_t state_bytes() const override;

    Method method() const { return method_; }
    /// Pairs the next prediction for `field` conditions on, oldest first.
    Dataset training_set(std::size_t field) const;
    /// Predictive mean and variance of a measurement of `field` at each
    /// column of `locations` (2 x n).
    void predict_many(std::size_t field, const Eigen::MatrixXd& locations, Eigen::VectorXd& mean,
                      Eigen::VectorXd& variance) const;

private:
    Method method_;
    FilterConfig config_;
    BaselineSizes sizes_;
    Belief belief_;
    std::vector<Dataset> history_; // per field
};

std::unique_ptr<Localizer> make_localizer(Method method, const FilterConfig& config,
                                          const BaselineSizes& sizes, Rng& rng);

} // namespace gplocalize

#endif // GPLOCALIZE_LOCALIZERS_HPP
