#include "gplocalize/localizers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gplocalize/errors.hpp"
#include "gplocalize/linalg.hpp"

namespace gplocalize {

namespace {

const std::vector<std::pair<Method, const char*>>& method_names() {
    static const std::vector<std::pair<Method, const char*>> names{
        {Method::gp_localize, "gp-localize"},   {Method::sod_truncate, "sod-truncate"},
        {Method::sod_even, "sod-even"},         {Method::full_gp, "full-gp"},
        {Method::offline_pitc, "offline-pitc"}, {Method::dead_reckoning, "dead-reckoning"},
    };
    return names;
}

double log_density(double z, double mean, double var) {
    if (!(var > 0.0)) throw IllConditionedError("baseline likelihood: predictive variance collapsed");
    const double r = z - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi) + std::log(var) + r * r / var);
}

Dataset slice(const Dataset& d, std::size_t begin, std::size_t end) {
    Dataset out;
    for (std::size_t i = begin; i < end; ++i) out.push_back(d.locations[i], d.values[i]);
    return out;
}

} // namespace

const std::vector<Method>& comparison_methods() {
    static const std::vector<Method> methods{Method::gp_localize, Method::sod_truncate, Method::sod_even,
                                             Method::full_gp, Method::offline_pitc};
    return methods;
}

std::string method_name(Method m) {
    for (const auto& [method, name] : method_names())
        if (method == m) return name;
    throw std::invalid_argument("unknown method");
}

Method parse_method(std::string_view name) {
    for (const auto& [method, n] : method_names())
        if (name == n) return method;
    throw std::invalid_argument("unknown method '" + std::string(name) +
                                "' (expected gp-localize, sod-truncate, sod-even, full-gp, "
                                "offline-pitc or dead-reckoning)");
}

GpLocalizer::GpLocalizer(FilterConfig config, Rng& rng)
    : config_(std::move(config)), state_(FilterState::init(config_, rng)) {}

void GpLocalizer::step(const OdometryAction& u, const Eigen::VectorXd& z, Rng& rng) {
    filter_step(state_, u, z, config_, rng);
}

HistoryLocalizer::HistoryLocalizer(Method method, FilterConfig config, BaselineSizes sizes, Rng& rng)
    : method_(method), config_(std::move(config)), sizes_(sizes) {
    if (method == Method::gp_localize) throw std::invalid_argument("HistoryLocalizer: gp-localize is not a baseline");
    config_.validate();
    if (sizes_.truncate < 1 || sizes_.even < 1) throw std::invalid_argument("baseline subset sizes must be positive");
    belief_ = config_.initial.sample(config_.particle_count, rng);
    history_.resize(config_.fields.size());
}

Dataset HistoryLocalizer::training_set(std::size_t field) const {
    const Dataset& h = history_.at(field);
    const std::size_t n = h.size();
    switch (method_) {
    case Method::sod_truncate: {
        const auto k = static_cast<std::size_t>(sizes_.truncate);
        return slice(h, n > k ? n - k : 0, n);
    }
    case Method::sod_even: {
        const auto k = static_cast<std::size_t>(sizes_.even);
        Dataset out;
        std::size_t last = n;
        for (std::size_t i = 0; i < k && n > 0; ++i) {
            const std::size_t j = i * n / k;
            if (j == last) continue;
            out.push_back(h.locations[j], h.values[j]);
            last = j;
        }
        return out;
    }
    case Method::full_gp:
    case Method::offline_pitc:
        return h;
    default:
        return {};
    }
}

void HistoryLocalizer::predict_many(std::size_t field, const Eigen::MatrixXd& locations,
                                    Eigen::VectorXd& mean, Eigen::VectorXd& variance) const {
    const SupportModel& model = *config_.fields.at(field);
    const Hyperparams& h = model.hyperparams();
    const Eigen::Index n = locations.cols();
    const Dataset train = training_set(field);
    if (train.empty()) {
        mean = Eigen::VectorXd::Constant(n, h.prior_mean);
        variance = Eigen::VectorXd::Constant(n, h.prior_variance());
        return;
    }

    if (method_ == Method::offline_pitc) {
        BlockedDataset blocks;
        const auto tau = static_cast<std::size_t>(config_.tau);
        for (std::size_t b = 0; b < train.size(); b += tau)
            blocks.blocks.push_back(slice(train, b, std::min(train.size(), b + tau)));
        const PitcModel pitc(blocks, config_.fields[field]);
        mean.resize(n);
        variance.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto g = pitc.predict(Location(locations.col(i)));
            mean(i) = g.mean;
            variance(i) = g.variance;
        }
        return;
    }

    const SpdFactor factor(cov_matrix(train.locations, h), h.prior_variance());
    const Eigen::MatrixXd k = cross_covariance(locations, train.locations, h); // n x |D|
    const Eigen::MatrixXd v = factor.whiten(Eigen::MatrixXd(k.transpose()));
    const Eigen::VectorXd w = factor.whiten(Eigen::VectorXd(train.value_vector().array() - h.prior_mean));
    mean = (v.transpose() * w).array() + h.prior_mean;
    variance = (h.prior_variance() - v.colwise().squaredNorm().transpose().array()).max(0.0).matrix();
}

void HistoryLocalizer::step(const OdometryAction& u, const Eigen::VectorXd& z, Rng& rng) {
    u.validate();
    if (z.size() != static_cast<Eigen::Index>(history_.size()))
        throw std::invalid_argument("baseline step: one measurement per field required");
    if (!z.allFinite()) throw std::invalid_argument("baseline step: measurement must be finite");

    propagate_particles(belief_, u, config_.noise, rng);
    if (method_ == Method::dead_reckoning) return;

    const Eigen::MatrixXd locations = belief_.locations();
    Eigen::VectorXd ll = Eigen::VectorXd::Zero(locations.cols());
    Eigen::VectorXd mean, variance;
    for (std::size_t m = 0; m < history_.size(); ++m) {
        predict_many(m, locations, mean, variance);
        for (Eigen::Index i = 0; i < ll.size(); ++i)
            ll(i) += log_density(z(static_cast<Eigen::Index>(m)), mean(i), variance(i));
    }
    reweight(belief_, ll, config_.resample_fraction, rng);

    const Location at = estimate().location;
    for (std::size_t m = 0; m < history_.size(); ++m) {
        Dataset& h = history_[m];
        h.push_back(at, z(static_cast<Eigen::Index>(m)));
        if (method_ == Method::sod_truncate && h.size() > static_cast<std::size_t>(sizes_.truncate)) {
            h.locations.erase(h.locations.begin());
            h.values.erase(h.values.begin());
        }
    }
}

std::size_t HistoryLocalizer::state_bytes() const {
    std::vector<std::uint8_t> buf;
    serialize(belief_, buf);
    std::size_t bytes = buf.size();
    // each stored pair: two coordinates and a value
    for (const auto& h : history_) bytes += h.size() * 3 * sizeof(double);
    return bytes;
}

std::unique_ptr<Localizer> make_localizer(Method method, const FilterConfig& config,
                                          const BaselineSizes& sizes, Rng& rng) {
    if (method == Method::gp_localize) return std::make_unique<GpLocalizer>(config, rng);
    return std::make_unique<HistoryLocalizer>(method, config, sizes, rng);
}

} // namespace gplocalize
