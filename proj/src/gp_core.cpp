#include "gplocalize/gp_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "gplocalize/errors.hpp"

namespace gplocalize {

namespace {

void check_dim(const Location& x, const Hyperparams& h) {
    if (x.size() != h.dim()) {
        throw std::invalid_argument("location has dimension " + std::to_string(x.size()) +
                                    ", hyperparameters expect " + std::to_string(h.dim()));
    }
}

double scaled_sq_dist(const Location& x, const Location& xp, const Eigen::VectorXd& ls) {
    return ((x - xp).array() / ls.array()).square().sum();
}

} // namespace

void Hyperparams::validate() const {
    if (!(signal_var > 0.0) || !std::isfinite(signal_var))
        throw std::invalid_argument("signal_var must be positive");
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var))
        throw std::invalid_argument("noise_var must be non-negative");
    if (length_scales.size() < 1) throw std::invalid_argument("length_scales is empty");
    for (Eigen::Index i = 0; i < length_scales.size(); ++i) {
        if (!(length_scales(i) > 0.0) || !std::isfinite(length_scales(i)))
            throw std::invalid_argument("length_scales must be positive");
    }
    if (!std::isfinite(prior_mean)) throw std::invalid_argument("prior_mean must be finite");
}

void Dataset::validate() const {
    if (locations.size() != values.size()) {
        throw std::invalid_argument("dataset has " + std::to_string(locations.size()) +
                                    " locations but " + std::to_string(values.size()) +
                                    " values");
    }
}

double signal_covariance(const Location& x, const Location& xp, const Hyperparams& h) {
    check_dim(x, h);
    check_dim(xp, h);
    return h.signal_var * std::exp(-0.5 * scaled_sq_dist(x, xp, h.length_scales));
}

double covariance(const Location& x, const Location& xp, const Hyperparams& h) {
    double k = signal_covariance(x, xp, h);
    if (h.noise_var != 0.0 && (x.array() == xp.array()).all()) k += h.noise_var;
    return k;
}

Eigen::MatrixXd cov_matrix(std::span<const Location> a, std::span<const Location> b,
                           const Hyperparams& h) {
    Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                covariance(a[i], b[j], h);
        }
    }
    return k;
}

Eigen::MatrixXd cov_matrix(std::span<const Location> a, const Hyperparams& h) {
    const auto n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = covariance(a[i], a[i], h);
        for (Eigen::Index j = 0; j < i; ++j) {
            k(i, j) = signal_covariance(a[i], a[j], h);
            k(j, i) = k(i, j);
        }
    }
    return k;
}

Eigen::MatrixXd signal_cov_matrix(std::span<const Location> a, std::span<const Location> b,
                                  const Hyperparams& h) {
    Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                signal_covariance(a[i], b[j], h);
        }
    }
    return k;
}

Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd& points,
                                 std::span<const Location> locations, const Hyperparams& h) {
    if (points.rows() != h.dim())
        throw std::invalid_argument("cross_covariance: point dimension mismatch");
    const Eigen::Index n = points.cols();
    const auto m = static_cast<Eigen::Index>(locations.size());
    const Eigen::VectorXd inv_ls = h.length_scales.cwiseInverse();
    Eigen::MatrixXd k(n, m);
    Eigen::ArrayXd d2(n);
    for (Eigen::Index j = 0; j < m; ++j) {
        const Location& s = locations[static_cast<std::size_t>(j)];
        check_dim(s, h);
        d2.setZero();
        for (Eigen::Index r = 0; r < points.rows(); ++r)
            d2 += ((points.row(r).array() - s(r)) * inv_ls(r)).square().transpose();
        k.col(j) = h.signal_var * (-0.5 * d2).exp();
        if (h.noise_var != 0.0) {
            for (Eigen::Index i = 0; i < n; ++i)
                if (d2(i) == 0.0 && (points.col(i).array() == s.array()).all()) k(i, j) += h.noise_var;
        }
    }
    return k;
}

GaussianPredictive gp_posterior(const Location& x, const Dataset& data, const Hyperparams& h) {
    h.validate();
    data.validate();
    check_dim(x, h);
    const double prior_var = covariance(x, x, h);
    if (data.empty()) return {h.prior_mean, prior_var};

    const SpdFactor factor(cov_matrix(data.locations, h), h.prior_variance());
    const Eigen::VectorXd k = cov_matrix(data.locations, std::span(&x, 1), h).col(0);
    const Eigen::VectorXd residual = data.value_vector().array() - h.prior_mean;
    const Eigen::VectorXd v = factor.whiten(k);
    const Eigen::VectorXd w = factor.whiten(residual);
    return {h.prior_mean + v.dot(w), std::max(0.0, prior_var - v.squaredNorm())};
}

PosteriorCache::PosteriorCache(Hyperparams h) : h_(std::move(h)) { h_.validate(); }

PosteriorCache::PosteriorCache(Hyperparams h, const Dataset& data) : PosteriorCache(std::move(h)) {
    extend(data);
}

void PosteriorCache::extend(const Dataset& newdata) {
    newdata.validate();
    if (newdata.empty()) return;
    for (const auto& x : newdata.locations) check_dim(x, h_);

    const auto n = static_cast<Eigen::Index>(locations_.size());
    const auto m = static_cast<Eigen::Index>(newdata.size());
    const Eigen::VectorXd residual = newdata.value_vector().array() - h_.prior_mean;

    Eigen::MatrixXd b(m, n);
    if (n > 0) {
        const Eigen::MatrixXd k_old_new = signal_cov_matrix(locations_, newdata.locations, h_);
        b = chol_.triangularView<Eigen::Lower>().solve(k_old_new).transpose();
    }
    Eigen::MatrixXd conditional = cov_matrix(newdata.locations, h_);
    if (n > 0) conditional.noalias() -= b * b.transpose();
    symmetrize(conditional);
    const SpdFactor block(conditional, h_.prior_variance());

    Eigen::VectorXd cond_residual = residual;
    if (n > 0) cond_residual.noalias() -= b * whitened_;

    Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(n + m, n + m);
    chol.topLeftCorner(n, n) = chol_;
    chol.bottomLeftCorner(m, n) = b;
    chol.bottomRightCorner(m, m) = block.lower();
    Eigen::VectorXd whitened(n + m);
    whitened << whitened_, block.whiten(cond_residual);

    chol_ = std::move(chol);
    whitened_ = std::move(whitened);
    locations_.insert(locations_.end(), newdata.locations.begin(), newdata.locations.end());
}

GaussianPredictive PosteriorCache::query(const Location& x) const {
    check_dim(x, h_);
    const double prior_var = covariance(x, x, h_);
    if (locations_.empty()) return {h_.prior_mean, prior_var};
    const Eigen::VectorXd k = cov_matrix(locations_, std::span(&x, 1), h_).col(0);
    const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
    return {h_.prior_mean + v.dot(whitened_), std::max(0.0, prior_var - v.squaredNorm())};
}

PosteriorCache gp_posterior_incremental(const PosteriorCache& cache, const Dataset& newdata) {
    PosteriorCache next = cache;
    next.extend(newdata);
    return next;
}

bool has_duplicate_locations(std::span<const Location> locations) {
    std::vector<const Location*> sorted;
    sorted.reserve(locations.size());
    for (const auto& x : locations) sorted.push_back(&x);
    const auto less = [](const Location* a, const Location* b) {
        return std::lexicographical_compare(a->begin(), a->end(), b->begin(), b->end());
    };
    std::sort(sorted.begin(), sorted.end(), less);
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (!less(sorted[i - 1], sorted[i]) && !less(sorted[i], sorted[i - 1])) return true;
    }
    return false;
}

double gaussian_logpdf(double z, const GaussianPredictive& g) {
    if (!(g.variance > 0.0)) throw std::invalid_argument("gaussian_logpdf: variance must be positive");
    const double d = z - g.mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * g.variance) + d * d / g.variance);
}

std::vector<double> sample_gp_prior(std::span<const Location> locations, const Hyperparams& h,
                                    std::uint64_t seed) {
    h.validate();
    if (locations.empty()) return {};
    const SpdFactor factor(cov_matrix(locations, h), h.prior_variance());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd eps(factor.size());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = normal(rng);
    const Eigen::VectorXd draw =
        (factor.lower().triangularView<Eigen::Lower>() * eps).array() + h.prior_mean;
    return {draw.data(), draw.data() + draw.size()};
}

} // namespace gplocalize
