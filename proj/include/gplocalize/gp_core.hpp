#ifndef GPLOCALIZE_GP_CORE_HPP
#define GPLOCALIZE_GP_CORE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gplocalize/linalg.hpp"

namespace gplocalize {

/// A point of the field's domain. All locations handled together must share
/// the dimension of the hyperparameters' length-scale vector.
using Location = Eigen::VectorXd;

/// Squared-exponential kernel with additive white noise and a constant mean.
struct Hyperparams {
    double signal_var = 1.0;
    double noise_var = 0.0;
    Eigen::VectorXd length_scales = Eigen::VectorXd::Ones(2);
    double prior_mean = 0.0;

    Eigen::Index dim() const { return length_scales.size(); }
    /// sigma_xx, the prior variance of a noisy measurement.
    double prior_variance() const { return signal_var + noise_var; }
    /// Throws std::invalid_argument unless signal_var > 0, noise_var >= 0 and
    /// every length-scale is positive.
    void validate() const;
};

struct GaussianPredictive {
    double mean = 0.0;
    double variance = 0.0;
};

/// Observed locations with their measurements, in observation order.
struct Dataset {
    std::vector<Location> locations;
    std::vector<double> values;

    std::size_t size() const { return locations.size(); }
    bool empty() const { return locations.empty(); }
    void push_back(Location x, double z) {
        locations.push_back(std::move(x));
        values.push_back(z);
    }
    Eigen::Map<const Eigen::VectorXd> value_vector() const {
        return {values.data(), static_cast<Eigen::Index>(values.size())};
    }
    /// Throws std::invalid_argument on a size mismatch.
    void validate() const;
};

/// sigma_s^2 exp(-0.5 sum ((x_i - xp_i) / l_i)^2) + sigma_n^2 [x == xp].
/// The delta compares coordinates exactly.
double covariance(const Location& x, const Location& xp, const Hyperparams& h);

/// Same kernel without the noise term.
double signal_covariance(const Location& x, const Location& xp, const Hyperparams& h);

/// |a| x |b| matrix of pairwise covariance() values.
Eigen::MatrixXd cov_matrix(std::span<const Location> a, std::span<const Location> b,
                           const Hyperparams& h);
/// Symmetric Gram matrix of the observations at `a`. Each entry of `a` is its
/// own observation, so the noise term sits on the diagonal only and a
/// repeated location yields two readings with independent noise.
Eigen::MatrixXd cov_matrix(std::span<const Location> a, const Hyperparams& h);

/// |a| x |b| matrix of signal_covariance() values, for two disjoint sets of
/// observations drawn from the same stream.
Eigen::MatrixXd signal_cov_matrix(std::span<const Location> a, std::span<const Location> b,
                                  const Hyperparams& h);

/// Columns of `points` (d x n) against `locations`; n x |locations|.
Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd& points,
                                 std::span<const Location> locations, const Hyperparams& h);

/// Full-GP posterior at x given `data`.
GaussianPredictive gp_posterior(const Location& x, const Dataset& data, const Hyperparams& h);

/// Exact GP posterior that can absorb further disjoint data without
/// refactoring what it already holds.
///
/// Holds a block Cholesky factor L of Sigma_DD and the whitened residual
/// w = L^{-1}(z_D - mu_D). Appending D' adds the rows [B, L'] with
/// B = Sigma_{D'D} L^{-T} and L' the factor of Sigma_{D'D'|D}, plus the
/// whitened conditional residual of z_{D'} - mu_{D'|D}; that is the
/// incremental Gaussian update expressed on the factor.
class PosteriorCache {
public:
    explicit PosteriorCache(Hyperparams h);
    PosteriorCache(Hyperparams h, const Dataset& data);

    const Hyperparams& hyperparams() const { return h_; }
    std::size_t size() const { return locations_.size(); }
    std::span<const Location> locations() const { return locations_; }

    /// Appends `newdata`. Strong guarantee: on IllConditionedError the cache
    /// is unchanged.
    void extend(const Dataset& newdata);

    GaussianPredictive query(const Location& x) const;

private:
    Hyperparams h_;
    std::vector<Location> locations_;
    Eigen::MatrixXd chol_;
    Eigen::VectorXd whitened_;
};

/// Returns `cache` extended by `newdata`.
PosteriorCache gp_posterior_incremental(const PosteriorCache& cache, const Dataset& newdata);

/// True when two entries of `locations` have exactly equal coordinates.
bool has_duplicate_locations(std::span<const Location> locations);

/// Log density of N(g.mean, g.variance) at z. Throws std::invalid_argument
/// when the variance is not positive.
double gaussian_logpdf(double z, const GaussianPredictive& g);

/// One joint draw of the field values at `locations` from the GP prior.
std::vector<double> sample_gp_prior(std::span<const Location> locations, const Hyperparams& h,
                                    std::uint64_t seed);

} // namespace gplocalize

#endif // GPLOCALIZE_GP_CORE_HPP
