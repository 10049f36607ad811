#ifndef GPLOCALIZE_SPARSE_GP_HPP
#define GPLOCALIZE_SPARSE_GP_HPP

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "gplocalize/gp_core.hpp"
#include "gplocalize/linalg.hpp"

namespace gplocalize {

/// Inducing locations; they need not be observed.
struct SupportSet {
    std::vector<Location> locations;

    std::size_t size() const { return locations.size(); }
    /// Rejects an empty set, a dimension mismatch or repeated locations.
    void validate(const Hyperparams& h) const;
};

/// Data partitioned into blocks D_1..D_N that are conditionally independent
/// given the support set.
struct BlockedDataset {
    std::vector<Dataset> blocks;

    std::size_t total_size() const;
    /// Rejects empty blocks. Repeated locations across the whole dataset are
    /// rejected when noise_var == 0, since they make a block's conditional
    /// covariance singular.
    void validate(const Hyperparams& h) const;
};

/// Prior quantities of a support set that never change: Sigma_SS, its
/// factor and its inverse. Shared read-only between all online states that
/// use the same support set.
class SupportModel {
public:
    SupportModel(SupportSet support, Hyperparams h);

    const SupportSet& support() const { return support_; }
    const Hyperparams& hyperparams() const { return h_; }
    Eigen::Index size() const { return static_cast<Eigen::Index>(support_.size()); }

    const Eigen::MatrixXd& sigma_ss() const { return sigma_ss_; }
    const Eigen::MatrixXd& sigma_ss_inv() const { return sigma_ss_inv_; }
    const SpdFactor& factor() const { return factor_; }

    /// Sigma_{S,x}
    Eigen::VectorXd cross(const Location& x) const;
    /// Sigma_{S,D}, |S| x |D|
    Eigen::MatrixXd cross(std::span<const Location> xs) const;

private:
    SupportSet support_;
    Hyperparams h_;
    Eigen::MatrixXd sigma_ss_;
    SpdFactor factor_;
    Eigen::MatrixXd sigma_ss_inv_;
};

/// Summary of one block of data through the support set:
///   mu_s    = Sigma_SD Sigma_{DD|S}^{-1} (z_D - mu_D)
///   sigma_s = Sigma_SD Sigma_{DD|S}^{-1} Sigma_DS
/// `factor` (r x |S|, sigma_s = factor^T factor) is carried along when the
/// summary was computed from data, so that it can be assimilated with a
/// rank-r inverse update. It is empty for summaries built by hand.
struct SliceSummary {
    Eigen::VectorXd mu_s;
    Eigen::MatrixXd sigma_s;
    Eigen::MatrixXd factor;
};

/// Computes the summary of `block` in O(|D| |S|^2 + |D|^3).
SliceSummary summarize_block(const Dataset& block, const SupportModel& model);

/// SoD: the full-GP posterior restricted to `subset`.
GaussianPredictive sod_posterior(const Location& x, const Dataset& subset, const Hyperparams& h);

/// PITC predictor. Built in the support space: Sigma_a = Sigma_SS + sum of
/// block summaries, mu_a = sum of block residual summaries, so only
/// |S|-sized and block-sized systems are ever factored.
class PitcModel {
public:
    PitcModel(const BlockedDataset& data, const SupportSet& support, const Hyperparams& h);
    PitcModel(const BlockedDataset& data, std::shared_ptr<const SupportModel> model);

    GaussianPredictive predict(const Location& x) const;

    const Eigen::VectorXd& mu_a() const { return mu_a_; }
    const Eigen::MatrixXd& sigma_a() const { return sigma_a_; }

private:
    void build(const BlockedDataset& data);

    std::shared_ptr<const SupportModel> model_;
    Eigen::VectorXd mu_a_;
    Eigen::MatrixXd sigma_a_;
    SpdFactor sigma_a_factor_;
    Eigen::VectorXd weights_;
};

GaussianPredictive pitc_posterior(const Location& x, const BlockedDataset& data,
                                  const SupportSet& support, const Hyperparams& h);

/// PITC with one singleton block per observation.
GaussianPredictive fitc_posterior(const Location& x, const Dataset& data,
                                  const SupportSet& support, const Hyperparams& h);

/// Splits `data` into singleton blocks.
BlockedDataset singleton_blocks(const Dataset& data);

} // namespace gplocalize

#endif // GPLOCALIZE_SPARSE_GP_HPP
