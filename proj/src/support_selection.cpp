#include "gplocalize/support_selection.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gplocalize {

std::vector<std::size_t> greedy_support_indices(std::span<const Location> candidates, int k,
                                                const Hyperparams& h) {
    h.validate();
    if (k <= 0) throw std::invalid_argument("select_support_set: k must be positive");
    if (static_cast<std::size_t>(k) > candidates.size()) {
        throw std::invalid_argument("select_support_set: k = " + std::to_string(k) + " exceeds " +
                                    std::to_string(candidates.size()) + " candidates");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(candidates.size());
    Eigen::MatrixXd points(h.dim(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (candidates[static_cast<std::size_t>(i)].size() != h.dim())
            throw std::invalid_argument("select_support_set: candidate dimension mismatch");
        points.col(i) = candidates[static_cast<std::size_t>(i)];
    }

    // Pivoted Cholesky on the noise-free Gram matrix: column j of `basis`
    // holds the j-th factor column over every candidate, and `variance` the
    // remaining conditional variance.
    Hyperparams signal = h;
    signal.noise_var = 0.0;
    Eigen::MatrixXd basis(n, k);
    Eigen::VectorXd variance = Eigen::VectorXd::Constant(n, h.signal_var);
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    const double tie = 1e-12 * h.signal_var;

    std::vector<std::size_t> order;
    order.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        double best = -1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!taken[static_cast<std::size_t>(i)]) best = std::max(best, variance(i));
        Eigen::Index pick = -1;
        for (Eigen::Index i = 0; i < n && pick < 0; ++i)
            if (!taken[static_cast<std::size_t>(i)] && variance(i) >= best - tie) pick = i;

        taken[static_cast<std::size_t>(pick)] = true;
        order.push_back(static_cast<std::size_t>(pick));

        const Location& x = candidates[static_cast<std::size_t>(pick)];
        Eigen::VectorXd col = cross_covariance(points, std::span(&x, 1), signal).col(0);
        if (j > 0) col -= basis.leftCols(j) * basis.row(pick).head(j).transpose();
        const double pivot = variance(pick);
        if (pivot > 0.0) {
            col /= std::sqrt(pivot);
        } else {
            col.setZero();
        }
        basis.col(j) = col;
        variance = (variance.array() - col.array().square()).max(0.0).matrix();
        variance(pick) = 0.0;
    }
    return order;
}

SupportSet select_support_set(std::span<const Location> candidates, int k, const Hyperparams& h) {
    SupportSet s;
    for (std::size_t i : greedy_support_indices(candidates, k, h)) s.locations.push_back(candidates[i]);
    return s;
}

} // namespace gplocalize
