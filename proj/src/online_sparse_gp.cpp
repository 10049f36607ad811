#include "gplocalize/online_sparse_gp.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "gplocalize/binary_io.hpp"
#include "gplocalize/errors.hpp"

namespace gplocalize {

namespace {

constexpr char kSnapshotMagic[9] = "GPLOSGP1";
constexpr std::uint32_t kSnapshotVersion = 1;
// Probe residual above which a maintained Sigma_a^{-1} is recomputed.
constexpr double kInverseDriftTolerance = 1e-6;

// Rank-revealing factor W (r x n) with sigma = W^T W, for summaries that
// arrive without one.
Eigen::MatrixXd low_rank_factor(const Eigen::MatrixXd& sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double cutoff = 1e-14 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda(i) > cutoff) keep.push_back(i);
    }
    Eigen::MatrixXd w(static_cast<Eigen::Index>(keep.size()), sigma.rows());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const auto i = keep[r];
        w.row(static_cast<Eigen::Index>(r)) = std::sqrt(lambda(i)) * eig.eigenvectors().col(i).transpose();
    }
    return w;
}

} // namespace

OnlineGPState::OnlineGPState(std::shared_ptr<const SupportModel> model, int tau)
    : model_(std::move(model)), tau_(tau) {
    if (!model_) throw std::invalid_argument("OnlineGPState: null support model");
    if (tau_ < 1) throw std::invalid_argument("OnlineGPState: tau must be >= 1");
    const Eigen::Index s = model_->size();
    mu_a_ = Eigen::VectorXd::Zero(s);
    sigma_a_ = model_->sigma_ss();
    sigma_a_inv_ = model_->sigma_ss_inv();
    refresh_derived();

    recent_locations_.reserve(static_cast<std::size_t>(tau_));
    recent_values_ = Eigen::VectorXd::Zero(tau_);
    recent_means_ = Eigen::VectorXd::Zero(tau_);
    recent_columns_ = Eigen::MatrixXd::Zero(s, tau_);
    recent_inv_ = Eigen::MatrixXd::Zero(tau_, tau_);
    recent_alpha_ = Eigen::VectorXd::Zero(tau_);
}

OnlineGPState OnlineGPState::init(const SupportSet& support, const Hyperparams& h, int tau) {
    return OnlineGPState(std::make_shared<const SupportModel>(support, h), tau);
}

Dataset OnlineGPState::recent() const {
    Dataset d;
    for (int i = 0; i < recent_count_; ++i) d.push_back(recent_locations_[static_cast<std::size_t>(i)], recent_values_(i));
    return d;
}

Eigen::MatrixXd OnlineGPState::recent_inverse() const {
    return recent_inv_.topLeftCorner(recent_count_, recent_count_);
}

SliceSummary OnlineGPState::summarize_slice(const Dataset& slice) const {
    slice.validate();
    if (slice.size() != static_cast<std::size_t>(tau_)) {
        throw std::invalid_argument("summarize_slice: slice has " + std::to_string(slice.size()) +
                                    " points, tau is " + std::to_string(tau_));
    }
    return summarize_block(slice, *model_);
}

void OnlineGPState::refresh_derived() {
    weights_ = sigma_a_inv_ * mu_a_;
    reduction_ = model_->sigma_ss_inv() - sigma_a_inv_;
}

void OnlineGPState::refactor_sigma_a() {
    sigma_a_inv_ = spd_inverse(sigma_a_, hyperparams().prior_variance());
    ++refactorizations_;
}

void OnlineGPState::assimilate(const SliceSummary& slice) {
    const Eigen::Index s = model_->size();
    if (slice.mu_s.size() != s || slice.sigma_s.rows() != s || slice.sigma_s.cols() != s)
        throw std::invalid_argument("assimilate: summary dimension does not match |S|");
    Eigen::MatrixXd w = slice.factor;
    if (w.size() == 0) {
        w = low_rank_factor(slice.sigma_s);
    } else if (w.cols() != s) {
        throw std::invalid_argument("assimilate: summary factor has wrong width");
    }

    mu_a_ += slice.mu_s;
    sigma_a_ += slice.sigma_s;
    symmetrize(sigma_a_);

    if (w.rows() > 0) {
        // (A + W^T W)^{-1} = A^{-1} - A^{-1} W^T (I + W A^{-1} W^T)^{-1} W A^{-1}
        const Eigen::MatrixXd aw = sigma_a_inv_ * w.transpose();
        Eigen::MatrixXd inner = w * aw;
        inner.diagonal().array() += 1.0;
        symmetrize(inner);
        try {
            const SpdFactor inner_factor(inner, 1.0);
            sigma_a_inv_.noalias() -= aw * inner_factor.solve(Eigen::MatrixXd(aw.transpose()));
            symmetrize(sigma_a_inv_);

            Eigen::VectorXd probe(s);
            for (Eigen::Index i = 0; i < s; ++i) probe(i) = (i % 2 ? -1.0 : 1.0) * (1.0 + static_cast<double>(i) / static_cast<double>(s));
            const Eigen::VectorXd back = sigma_a_ * (sigma_a_inv_ * probe);
            const double drift = (back - probe).cwiseAbs().maxCoeff() / probe.cwiseAbs().maxCoeff();
            if (!(drift <= kInverseDriftTolerance)) {
                log_warning("Sigma_a inverse drifted by " + std::to_string(drift) + ", refactorizing");
                refactor_sigma_a();
            }
        } catch (const IllConditionedError& e) {
            log_warning(std::string("rank update failed (") + e.what() + "), refactorizing Sigma_a");
            refactor_sigma_a();
        }
    }

    ++slices_;
    refresh_derived();
    if (recent_count_ > 0) rebuild_recent_cache();
}

GaussianPredictive OnlineGPState::predict(const Location& x) const {
    const Hyperparams& h = hyperparams();
    const Eigen::VectorXd k = model_->cross(x);
    const double var = covariance(x, x, h) - k.dot(reduction_ * k);
    return {h.prior_mean + k.dot(weights_), std::max(0.0, var)};
}

Eigen::VectorXd OnlineGPState::recent_cross(const Location& x, const Eigen::VectorXd& k_sx,
                                            bool buffered) const {
    const Hyperparams& h = hyperparams();
    Eigen::VectorXd b(recent_count_);
    for (int i = 0; i < recent_count_; ++i) {
        const Location& xi = recent_locations_[static_cast<std::size_t>(i)];
        // another buffered reading carries its own noise
        const double prior = buffered ? signal_covariance(x, xi, h) : covariance(x, xi, h);
        b(i) = prior - recent_columns_.col(i).dot(k_sx);
    }
    return b;
}

void OnlineGPState::append_recent(const Location& x, double z) {
    const Hyperparams& h = hyperparams();
    const Eigen::VectorXd k = model_->cross(x);
    const Eigen::VectorXd g = reduction_ * k;
    const double mean = h.prior_mean + k.dot(weights_);
    const double var = covariance(x, x, h) - k.dot(g);

    const int j = recent_count_;
    const Eigen::VectorXd b = recent_cross(x, k, true);
    const Eigen::VectorXd v = recent_inv_.topLeftCorner(j, j) * b;
    const double schur = var - b.dot(v);
    if (!(schur > kJitterBase * h.prior_variance())) {
        throw IllConditionedError("push_recent: predictive variance at the new point collapsed (" +
                                  std::to_string(schur) + ")");
    }

    // Bordered inverse: [[K, b], [b^T, c]]^{-1}
    recent_inv_.topLeftCorner(j, j).noalias() += (v / schur) * v.transpose();
    recent_inv_.block(0, j, j, 1) = -v / schur;
    recent_inv_.block(j, 0, 1, j) = -v.transpose() / schur;
    recent_inv_(j, j) = 1.0 / schur;

    const double e = (z - mean - b.dot(recent_alpha_.head(j))) / schur;
    recent_alpha_.head(j) -= v * e;
    recent_alpha_(j) = e;

    if (recent_locations_.size() > static_cast<std::size_t>(j)) {
        recent_locations_[static_cast<std::size_t>(j)] = x;
    } else {
        recent_locations_.push_back(x);
    }
    recent_values_(j) = z;
    recent_means_(j) = mean;
    recent_columns_.col(j) = g;
    ++recent_count_;
}

void OnlineGPState::push_recent(const Location& x, double z) {
    if (recent_count_ >= tau_)
        throw ProtocolError("push_recent: buffer holds tau points; call flush_recent first");
    if (x.size() != hyperparams().dim())
        throw std::invalid_argument("push_recent: location dimension mismatch");
    if (hyperparams().noise_var == 0.0) {
        for (int i = 0; i < recent_count_; ++i) {
            if ((recent_locations_[static_cast<std::size_t>(i)].array() == x.array()).all())
                throw std::invalid_argument("push_recent: repeated location with zero noise variance");
        }
    }
    append_recent(x, z);
}

GaussianPredictive OnlineGPState::predict_with_recent(const Location& x) const {
    const Hyperparams& h = hyperparams();
    const Eigen::VectorXd k = model_->cross(x);
    double mean = h.prior_mean + k.dot(weights_);
    double var = covariance(x, x, h) - k.dot(reduction_ * k);
    if (recent_count_ > 0) {
        const Eigen::VectorXd b = recent_cross(x, k, false);
        mean += b.dot(recent_alpha_.head(recent_count_));
        var -= b.dot(recent_inv_.topLeftCorner(recent_count_, recent_count_) * b);
    }
    return {mean, std::max(0.0, var)};
}

void OnlineGPState::rebuild_recent_cache() {
    const Dataset buffered = recent();
    recent_count_ = 0;
    for (std::size_t i = 0; i < buffered.size(); ++i) append_recent(buffered.locations[i], buffered.values[i]);
}

void OnlineGPState::flush_recent() {
    if (recent_count_ != tau_) {
        throw ProtocolError("flush_recent: buffer holds " + std::to_string(recent_count_) +
                            " of tau = " + std::to_string(tau_) + " points");
    }
    const SliceSummary summary = summarize_slice(recent());
    recent_count_ = 0;
    assimilate(summary);
}

void OnlineGPState::observe(const Location& x, double z) {
    push_recent(x, z);
    if (recent_count_ == tau_) flush_recent();
}

void OnlineGPState::add_recent_correction(const Eigen::MatrixXd& points, const Eigen::MatrixXd& k_xs,
                                         Eigen::Ref<Eigen::VectorXd> mean,
                                         Eigen::Ref<Eigen::VectorXd> variance) const {
    if (recent_count_ == 0) return;
    const int j = recent_count_;
    Eigen::MatrixXd b = cross_covariance(
        points, std::span<const Location>(recent_locations_.data(), static_cast<std::size_t>(j)),
        hyperparams());
    b.noalias() -= k_xs * recent_columns_.leftCols(j);
    mean.noalias() += b * recent_alpha_.head(j);
    const Eigen::MatrixXd bk = b * recent_inv_.topLeftCorner(j, j);
    variance -= bk.cwiseProduct(b).rowwise().sum();
}

void OnlineGPState::predict_with_recent_batch(const Eigen::MatrixXd& points,
                                              const Eigen::MatrixXd& k_xs, Eigen::VectorXd& mean,
                                              Eigen::VectorXd& variance) const {
    const Hyperparams& h = hyperparams();
    const Eigen::Index n = points.cols();
    if (k_xs.rows() != n || k_xs.cols() != model_->size())
        throw std::invalid_argument("predict_with_recent_batch: k_xs has the wrong shape");

    mean = (k_xs * weights_).array() + h.prior_mean;
    const Eigen::MatrixXd kr = k_xs * reduction_;
    variance = (kr.cwiseProduct(k_xs)).rowwise().sum();
    variance = (h.prior_variance() - variance.array()).matrix();
    add_recent_correction(points, k_xs, mean, variance);
    variance = variance.cwiseMax(0.0);
}

void OnlineGPState::predict_with_recent_many(std::span<const OnlineGPState* const> states,
                                             const Eigen::MatrixXd& points,
                                             const Eigen::MatrixXd& k_xs, Eigen::MatrixXd& mean,
                                             Eigen::MatrixXd& variance) {
    if (states.empty()) throw std::invalid_argument("predict_with_recent_many: no states");
    const SupportModel& model = states.front()->model();
    for (const auto* s : states) {
        if (&s->model() != &model)
            throw std::invalid_argument("predict_with_recent_many: states use different support models");
    }
    const Hyperparams& h = model.hyperparams();
    const Eigen::Index n = points.cols();
    const Eigen::Index m = model.size();
    const auto count = static_cast<Eigen::Index>(states.size());
    if (k_xs.rows() != n || k_xs.cols() != m)
        throw std::invalid_argument("predict_with_recent_many: k_xs has the wrong shape");

    // k^T R k over the packed upper triangle of R, doubled off the diagonal
    const Eigen::Index packed = m * (m + 1) / 2;
    Eigen::MatrixXd products(n, packed);
    Eigen::MatrixXd reductions(packed, count);
    Eigen::MatrixXd weights(m, count);
    Eigen::Index idx = 0;
    for (Eigen::Index a = 0; a < m; ++a) {
        products.col(idx++) = k_xs.col(a).cwiseAbs2();
        for (Eigen::Index b = a + 1; b < m; ++b) products.col(idx++) = 2.0 * k_xs.col(a).cwiseProduct(k_xs.col(b));
    }
    for (Eigen::Index c = 0; c < count; ++c) {
        const OnlineGPState& s = *states[static_cast<std::size_t>(c)];
        weights.col(c) = s.weights_;
        idx = 0;
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = a; b < m; ++b) reductions(idx++, c) = s.reduction_(a, b);
    }

    mean.noalias() = k_xs * weights;
    mean.array() += h.prior_mean;
    variance.noalias() = -products * reductions;
    variance.array() += h.prior_variance();
    for (Eigen::Index c = 0; c < count; ++c)
        states[static_cast<std::size_t>(c)]->add_recent_correction(points, k_xs, mean.col(c), variance.col(c));
    variance = variance.cwiseMax(0.0);
}

std::size_t OnlineGPState::footprint_bytes() const {
    const auto s = static_cast<std::size_t>(model_->size());
    const auto t = static_cast<std::size_t>(tau_);
    const auto d = static_cast<std::size_t>(hyperparams().dim());
    const std::size_t doubles = 2 * s           // mu_a, weights
                                + 3 * s * s     // sigma_a, its inverse, reduction
                                + t * d         // buffered locations
                                + 3 * t         // values, means, alpha
                                + s * t + t * t; // columns, inverse
    return doubles * sizeof(double);
}

void OnlineGPState::serialize(std::vector<std::uint8_t>& out) const {
    using namespace binary;
    const Hyperparams& h = hyperparams();
    const auto s = static_cast<std::uint32_t>(model_->size());
    const auto d = static_cast<std::uint32_t>(h.dim());
    const int j = recent_count_;

    put_magic(out, kSnapshotMagic);
    put<std::uint32_t>(out, kSnapshotVersion);
    put<std::uint32_t>(out, d);
    put<std::uint32_t>(out, s);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tau_));
    put<std::uint64_t>(out, slices_);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(j));
    put<double>(out, h.signal_var);
    put<double>(out, h.noise_var);
    put<double>(out, h.prior_mean);
    put_dense(out, h.length_scales);
    for (const auto& x : model_->support().locations) put_dense(out, x);
    put_dense(out, mu_a_);
    put_dense(out, sigma_a_);
    put_dense(out, sigma_a_inv_);
    for (int i = 0; i < j; ++i) put_dense(out, recent_locations_[static_cast<std::size_t>(i)]);
    put_dense(out, recent_values_.head(j));
    put_dense(out, recent_means_.head(j));
    put_dense(out, recent_columns_.leftCols(j));
    put_dense(out, recent_inv_.topLeftCorner(j, j));
    put_dense(out, recent_alpha_.head(j));
}

std::vector<std::uint8_t> OnlineGPState::serialize() const {
    std::vector<std::uint8_t> out;
    serialize(out);
    return out;
}

OnlineGPState OnlineGPState::deserialize(std::span<const std::uint8_t> bytes, std::size_t& offset) {
    binary::Reader in(bytes, offset);
    in.expect_magic(kSnapshotMagic);
    const auto version = in.get<std::uint32_t>();
    if (version != kSnapshotVersion)
        throw ParseError("unsupported snapshot version " + std::to_string(version), 0);
    const auto d = static_cast<Eigen::Index>(in.get<std::uint32_t>());
    const auto s = static_cast<Eigen::Index>(in.get<std::uint32_t>());
    const auto tau = static_cast<int>(in.get<std::uint32_t>());
    const auto slices = in.get<std::uint64_t>();
    const auto j = static_cast<int>(in.get<std::uint32_t>());
    if (j > tau) throw ParseError("snapshot buffer exceeds tau", 0);

    Hyperparams h;
    h.signal_var = in.get<double>();
    h.noise_var = in.get<double>();
    h.prior_mean = in.get<double>();
    h.length_scales = in.get_vector(d);
    SupportSet support;
    for (Eigen::Index i = 0; i < s; ++i) support.locations.push_back(in.get_vector(d));

    OnlineGPState state(std::make_shared<const SupportModel>(std::move(support), h), tau);
    state.slices_ = slices;
    state.mu_a_ = in.get_vector(s);
    state.sigma_a_ = in.get_matrix(s, s);
    state.sigma_a_inv_ = in.get_matrix(s, s);
    state.refresh_derived();
    for (int i = 0; i < j; ++i) state.recent_locations_.push_back(in.get_vector(d));
    state.recent_values_.head(j) = in.get_vector(j);
    state.recent_means_.head(j) = in.get_vector(j);
    state.recent_columns_.leftCols(j) = in.get_matrix(s, j);
    state.recent_inv_.topLeftCorner(j, j) = in.get_matrix(j, j);
    state.recent_alpha_.head(j) = in.get_vector(j);
    state.recent_count_ = j;
    return state;
}

} // namespace gplocalize
