#ifndef GPLOCALIZE_ONLINE_SPARSE_GP_HPP
#define GPLOCALIZE_ONLINE_SPARSE_GP_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gplocalize/gp_core.hpp"
#include "gplocalize/sparse_gp.hpp"

namespace gplocalize {

/// Streaming sparse GP with constant time and memory per observation.
///
/// Observations are summarized through a fixed support set S in slices of
/// exactly `tau` points. The assimilated summary (mu_a, Sigma_a) is the sum of
/// all slice summaries on top of (0, Sigma_SS); predictions from it equal the
/// offline PITC posterior over the same blocks. Points that have not yet
/// filled a slice sit in the recent buffer D' and are folded into
/// predictions by exact Gaussian conditioning under the summary's predictive
/// distribution.
///
/// Inverses are maintained, not recomputed: Sigma_a^{-1} by a rank-tau
/// Woodbury update per slice, and the inverse of the buffer's predictive
/// covariance by a bordering update per pushed point. Each buffered point
/// also keeps (Sigma_SS^{-1} - Sigma_a^{-1}) Sigma_{S,x}, so the cross term
/// for a new point costs O(|S|) per buffered point.
///
/// Single writer: assimilate/push_recent/flush_recent must not overlap with
/// any other call on the same state. The const members may run concurrently.
class OnlineGPState {
public:
    OnlineGPState(std::shared_ptr<const SupportModel> model, int tau);

    /// N = 0, empty buffer, mu_a = 0, Sigma_a = Sigma_SS.
    static OnlineGPState init(const SupportSet& support, const Hyperparams& h, int tau);

    const SupportModel& model() const { return *model_; }
    const std::shared_ptr<const SupportModel>& shared_model() const { return model_; }
    const Hyperparams& hyperparams() const { return model_->hyperparams(); }
    int tau() const { return tau_; }
    std::uint64_t slices_assimilated() const { return slices_; }
    int recent_size() const { return recent_count_; }

    const Eigen::VectorXd& mu_a() const { return mu_a_; }
    const Eigen::MatrixXd& sigma_a() const { return sigma_a_; }
    const Eigen::MatrixXd& sigma_a_inv() const { return sigma_a_inv_; }
    const Eigen::MatrixXd& sigma_ss_inv() const { return model_->sigma_ss_inv(); }

    /// Copy of the buffered observations D', oldest first.
    Dataset recent() const;
    /// Maintained inverse of the buffer's predictive covariance.
    Eigen::MatrixXd recent_inverse() const;

    /// Summary of a full slice. Requires |slice| == tau.
    SliceSummary summarize_slice(const Dataset& slice) const;

    /// Adds `slice` to the assimilated summary and updates Sigma_a^{-1}.
    /// A non-empty buffer is re-conditioned on the new summary.
    void assimilate(const SliceSummary& slice);

    /// Predictive distribution from the assimilated summary only.
    GaussianPredictive predict(const Location& x) const;

    /// Appends (x, z) to the buffer. The buffer may reach tau; another push
    /// then throws ProtocolError until flush_recent() is called.
    void push_recent(const Location& x, double z);

    /// predict() conditioned on the buffer.
    GaussianPredictive predict_with_recent(const Location& x) const;

    /// Summarizes and assimilates a full buffer, then clears it.
    void flush_recent();

    /// push_recent() followed by flush_recent() once the buffer is full.
    void observe(const Location& x, double z);

    /// Batched predict_with_recent(). `points` is d x n and `k_xs` the n x |S|
    /// cross-covariance with the support set, which callers share across all
    /// states built on the same SupportModel.
    void predict_with_recent_batch(const Eigen::MatrixXd& points, const Eigen::MatrixXd& k_xs,
                                   Eigen::VectorXd& mean, Eigen::VectorXd& variance) const;

    /// predict_with_recent_batch() for many states built on one SupportModel.
    /// Column c of `mean` and `variance` (n x |states|) belongs to states[c].
    /// The assimilated-summary variance terms of all states are evaluated
    /// as a single matrix product.
    static void predict_with_recent_many(std::span<const OnlineGPState* const> states,
                                         const Eigen::MatrixXd& points, const Eigen::MatrixXd& k_xs,
                                         Eigen::MatrixXd& mean, Eigen::MatrixXd& variance);

    /// Versioned binary snapshot; see README for the layout.
    void serialize(std::vector<std::uint8_t>& out) const;
    std::vector<std::uint8_t> serialize() const;
    /// Reads one snapshot starting at `offset` and advances it.
    static OnlineGPState deserialize(std::span<const std::uint8_t> bytes, std::size_t& offset);

    /// Bytes held by the state's own buffers; depends on |S|, tau and d only.
    std::size_t footprint_bytes() const;

    /// Number of times the maintained Sigma_a^{-1} was replaced by a fresh
    /// factorization because the update drifted.
    std::uint64_t refactorizations() const { return refactorizations_; }

private:
    void refresh_derived();
    void refactor_sigma_a();
    void rebuild_recent_cache();
    void append_recent(const Location& x, double z);
    Eigen::VectorXd recent_cross(const Location& x, const Eigen::VectorXd& k_sx, bool buffered) const;
    /// Adds the buffer's correction for all columns of `points` to one
    /// column of mean and variance.
    void add_recent_correction(const Eigen::MatrixXd& points, const Eigen::MatrixXd& k_xs,
                               Eigen::Ref<Eigen::VectorXd> mean,
                               Eigen::Ref<Eigen::VectorXd> variance) const;

    std::shared_ptr<const SupportModel> model_;
    int tau_ = 1;
    std::uint64_t slices_ = 0;
    std::uint64_t refactorizations_ = 0;

    Eigen::VectorXd mu_a_;
    Eigen::MatrixXd sigma_a_;
    Eigen::MatrixXd sigma_a_inv_;
    // Derived from the two above: Sigma_a^{-1} mu_a and Sigma_SS^{-1} - Sigma_a^{-1}.
    Eigen::VectorXd weights_;
    Eigen::MatrixXd reduction_;

    // Buffer D' with capacity tau; only the first recent_count_ entries are live.
    int recent_count_ = 0;
    std::vector<Location> recent_locations_;
    Eigen::VectorXd recent_values_;
    Eigen::VectorXd recent_means_;  // mu~ at each buffered point
    Eigen::MatrixXd recent_columns_; // |S| x tau, reduction_ * Sigma_{S,x_j}
    Eigen::MatrixXd recent_inv_;     // tau x tau
    Eigen::VectorXd recent_alpha_;   // recent_inv_ * (z - mu~)
};

} // namespace gplocalize

#endif // GPLOCALIZE_ONLINE_SPARSE_GP_HPP
