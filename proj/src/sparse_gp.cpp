#include "gplocalize/sparse_gp.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace gplocalize {

void SupportSet::validate(const Hyperparams& h) const {
    if (locations.empty()) throw std::invalid_argument("support set is empty");
    for (const auto& s : locations) {
        if (s.size() != h.dim()) throw std::invalid_argument("support location dimension mismatch");
    }
    if (has_duplicate_locations(locations))
        throw std::invalid_argument("support set contains repeated locations");
}

std::size_t BlockedDataset::total_size() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size();
    return n;
}

void BlockedDataset::validate(const Hyperparams& h) const {
    std::vector<Location> all;
    all.reserve(total_size());
    for (std::size_t n = 0; n < blocks.size(); ++n) {
        blocks[n].validate();
        if (blocks[n].empty())
            throw std::invalid_argument("block " + std::to_string(n) + " is empty");
        for (const auto& x : blocks[n].locations) {
            if (x.size() != h.dim()) throw std::invalid_argument("data location dimension mismatch");
            all.push_back(x);
        }
    }
    if (h.noise_var == 0.0 && has_duplicate_locations(all))
        throw std::invalid_argument("repeated data location with zero noise variance");
}

SupportModel::SupportModel(SupportSet support, Hyperparams h)
    : support_(std::move(support)), h_(std::move(h)) {
    h_.validate();
    support_.validate(h_);
    sigma_ss_ = cov_matrix(support_.locations, h_);
    factor_ = SpdFactor(sigma_ss_, h_.prior_variance());
    sigma_ss_inv_ = factor_.inverse();
}

Eigen::VectorXd SupportModel::cross(const Location& x) const {
    return cov_matrix(support_.locations, std::span(&x, 1), h_).col(0);
}

Eigen::MatrixXd SupportModel::cross(std::span<const Location> xs) const {
    return cov_matrix(support_.locations, xs, h_);
}

SliceSummary summarize_block(const Dataset& block, const SupportModel& model) {
    block.validate();
    const Hyperparams& h = model.hyperparams();
    if (h.noise_var == 0.0 && has_duplicate_locations(block.locations))
        throw std::invalid_argument("slice contains a repeated location with zero noise variance");

    const Eigen::MatrixXd k_sd = model.cross(block.locations);
    const Eigen::MatrixXd v = model.factor().whiten(k_sd);
    Eigen::MatrixXd conditional = cov_matrix(block.locations, h);
    conditional.noalias() -= v.transpose() * v;
    symmetrize(conditional);
    const SpdFactor cond_factor(conditional, h.prior_variance());

    const Eigen::VectorXd residual = block.value_vector().array() - h.prior_mean;
    SliceSummary s;
    s.factor = cond_factor.whiten(Eigen::MatrixXd(k_sd.transpose()));
    s.mu_s = s.factor.transpose() * cond_factor.whiten(residual);
    s.sigma_s = s.factor.transpose() * s.factor;
    return s;
}

GaussianPredictive sod_posterior(const Location& x, const Dataset& subset, const Hyperparams& h) {
    if (h.noise_var == 0.0 && has_duplicate_locations(subset.locations))
        throw std::invalid_argument("SoD subset has repeated locations with zero noise variance");
    return gp_posterior(x, subset, h);
}

PitcModel::PitcModel(const BlockedDataset& data, const SupportSet& support, const Hyperparams& h)
    : PitcModel(data, std::make_shared<const SupportModel>(support, h)) {}

PitcModel::PitcModel(const BlockedDataset& data, std::shared_ptr<const SupportModel> model)
    : model_(std::move(model)) {
    build(data);
}

void PitcModel::build(const BlockedDataset& data) {
    const Hyperparams& h = model_->hyperparams();
    data.validate(h);
    mu_a_ = Eigen::VectorXd::Zero(model_->size());
    sigma_a_ = model_->sigma_ss();
    for (const auto& block : data.blocks) {
        const SliceSummary s = summarize_block(block, *model_);
        mu_a_ += s.mu_s;
        sigma_a_ += s.sigma_s;
    }
    symmetrize(sigma_a_);
    sigma_a_factor_ = SpdFactor(sigma_a_, h.prior_variance());
    weights_ = sigma_a_factor_.solve(mu_a_);
}

GaussianPredictive PitcModel::predict(const Location& x) const {
    const Hyperparams& h = model_->hyperparams();
    const Eigen::VectorXd k = model_->cross(x);
    const double prior_var = covariance(x, x, h);
    const double var = prior_var - model_->factor().whiten(k).squaredNorm() +
                       sigma_a_factor_.whiten(k).squaredNorm();
    return {h.prior_mean + k.dot(weights_), std::max(0.0, var)};
}

GaussianPredictive pitc_posterior(const Location& x, const BlockedDataset& data,
                                  const SupportSet& support, const Hyperparams& h) {
    return PitcModel(data, support, h).predict(x);
}

BlockedDataset singleton_blocks(const Dataset& data) {
    data.validate();
    BlockedDataset blocked;
    blocked.blocks.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        Dataset b;
        b.push_back(data.locations[i], data.values[i]);
        blocked.blocks.push_back(std::move(b));
    }
    return blocked;
}

GaussianPredictive fitc_posterior(const Location& x, const Dataset& data,
                                  const SupportSet& support, const Hyperparams& h) {
    return pitc_posterior(x, singleton_blocks(data), support, h);
}

} // namespace gplocalize
