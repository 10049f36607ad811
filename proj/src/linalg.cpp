#include "gplocalize/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "gplocalize/errors.hpp"

namespace gplocalize {

void log_warning(const std::string& message) {
    std::cerr << "[gplocalize] warning: " << message << '\n';
}

namespace {

bool try_factor(const Eigen::MatrixXd& a, double floor, Eigen::MatrixXd& out) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return false;
    out = llt.matrixL();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double pivot = out(i, i);
        if (!std::isfinite(pivot) || pivot * pivot < floor) return false;
    }
    return true;
}

} // namespace

SpdFactor::SpdFactor(const Eigen::MatrixXd& a, double scale_hint) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("SpdFactor: matrix is not square");
    if (n == 0) return;
    if (!a.allFinite()) throw IllConditionedError("SpdFactor: non-finite matrix entries");

    const double scale = std::max(a.trace() / static_cast<double>(n), scale_hint);
    if (!(scale > 0.0)) throw IllConditionedError("SpdFactor: matrix has no positive scale");
    const double floor = kPivotFloor * scale;

    if (try_factor(a, floor, l_)) return;

    double jitter = kJitterBase * scale;
    for (int attempt = 0; attempt <= kJitterRetries; ++attempt, jitter *= 10.0) {
        Eigen::MatrixXd loaded = a;
        loaded.diagonal().array() += jitter;
        if (try_factor(loaded, floor, l_)) {
            jitter_ = jitter;
            return;
        }
    }
    throw IllConditionedError("SpdFactor: " + std::to_string(n) + "x" + std::to_string(n) +
                              " matrix singular after jitter " + std::to_string(jitter / 10.0));
}

Eigen::VectorXd SpdFactor::solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd y = l_.triangularView<Eigen::Lower>().solve(b);
    return l_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd SpdFactor::solve(const Eigen::MatrixXd& b) const {
    Eigen::MatrixXd y = l_.triangularView<Eigen::Lower>().solve(b);
    return l_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::VectorXd SpdFactor::whiten(const Eigen::VectorXd& b) const {
    return l_.triangularView<Eigen::Lower>().solve(b);
}

Eigen::MatrixXd SpdFactor::whiten(const Eigen::MatrixXd& b) const {
    return l_.triangularView<Eigen::Lower>().solve(b);
}

Eigen::MatrixXd SpdFactor::inverse() const {
    Eigen::MatrixXd inv = solve(Eigen::MatrixXd::Identity(size(), size()).eval());
    symmetrize(inv);
    return inv;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, double scale_hint) {
    return SpdFactor(a, scale_hint).inverse();
}

double identity_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& a_inv) {
    if (a.rows() == 0) return 0.0;
    Eigen::MatrixXd r = a * a_inv;
    r.diagonal().array() -= 1.0;
    return r.cwiseAbs().rowwise().sum().maxCoeff();
}

} // namespace gplocalize
