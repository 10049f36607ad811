#ifndef GPLOCALIZE_LINALG_HPP
#define GPLOCALIZE_LINALG_HPP

#include <Eigen/Dense>

namespace gplocalize {

/// Relative jitter added to the diagonal on the first repair attempt.
inline constexpr double kJitterBase = 1e-9;
/// Number of x10 escalations after the first jittered attempt.
inline constexpr int kJitterRetries = 3;
/// A plain factorization is rejected if any squared pivot falls below this
/// fraction of the reference scale.
inline constexpr double kPivotFloor = 1e-13;

/// Cholesky factor of a symmetric positive-definite matrix with a bounded
/// jitter schedule.
///
/// The plain factorization is tried first. If it fails, or a pivot collapses
/// below kPivotFloor * scale, the diagonal is loaded with
/// kJitterBase * scale, escalating x10 up to kJitterRetries times, where
/// scale = max(trace / n, scale_hint). Conditional covariances whose
/// trace can be ~0 (data inside the support set) pass their prior variance
/// as `scale_hint`. Throws IllConditionedError when every attempt fails.
class SpdFactor {
public:
    SpdFactor() = default;
    explicit SpdFactor(const Eigen::MatrixXd& a, double scale_hint = 0.0);

    Eigen::Index size() const { return l_.rows(); }
    const Eigen::MatrixXd& lower() const { return l_; }
    /// Jitter that was finally applied; 0 when the plain factorization held.
    double jitter() const { return jitter_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
    /// L^{-1} b
    Eigen::VectorXd whiten(const Eigen::VectorXd& b) const;
    Eigen::MatrixXd whiten(const Eigen::MatrixXd& b) const;
    Eigen::MatrixXd inverse() const;

private:
    Eigen::MatrixXd l_;
    double jitter_ = 0.0;
};

/// Symmetric inverse via SpdFactor.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, double scale_hint = 0.0);

/// Max absolute row sum of (a * a_inv - I).
double identity_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& a_inv);

inline void symmetrize(Eigen::MatrixXd& a) {
    a = 0.5 * (a + a.transpose()).eval();
}

} // namespace gplocalize

#endif // GPLOCALIZE_LINALG_HPP
