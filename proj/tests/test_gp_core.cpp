#include <cmath>
#include <random>

#include "doctest.h"

#include "gplocalize/errors.hpp"
#include "gplocalize/gp_core.hpp"
#include "oracles/dense.hpp"

using namespace gplocalize;

namespace {

Hyperparams make_h(double sv, double nv, std::initializer_list<double> ls, double mu = 0.0) {
    Hyperparams h;
    h.signal_var = sv;
    h.noise_var = nv;
    h.length_scales = Eigen::VectorXd(static_cast<Eigen::Index>(ls.size()));
    Eigen::Index i = 0;
    for (double l : ls) h.length_scales(i++) = l;
    h.prior_mean = mu;
    return h;
}

Location loc(std::initializer_list<double> c) {
    Location x(static_cast<Eigen::Index>(c.size()));
    Eigen::Index i = 0;
    for (double v : c) x(i++) = v;
    return x;
}

} // namespace

TEST_CASE("covariance: noise enters only on exact coordinate equality") {
    const auto h = make_h(1.0, 0.1, {1.0, 1.0});
    CHECK(covariance(loc({0.3, 0.4}), loc({0.3, 0.4}), h) == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(covariance(loc({0.3, 0.4}), loc({0.3, 0.4 + 1e-12}), h) <= 1.0);
}

TEST_CASE("covariance: one length-scale displacement") {
    const auto h = make_h(2.0, 0.0, {0.7, 3.0});
    CHECK(covariance(loc({0.0, 1.0}), loc({0.7, 1.0}), h) ==
          doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-14));
    CHECK(2.0 * std::exp(-0.5) == doctest::Approx(1.21306).epsilon(1e-5));
}

TEST_CASE("covariance: anisotropic value from the high-precision oracle") {
    // tests/oracles/derive_values.py
    const auto h = make_h(1.5, 0.2, {2.0, 1.0});
    CHECK(covariance(loc({1, 2}), loc({3, 1}), h) ==
          doctest::Approx(0.55181916175716348239).epsilon(1e-14));
}

TEST_CASE("covariance: dimension mismatch is an invalid argument") {
    const auto h = make_h(1.0, 0.0, {1.0, 1.0});
    CHECK_THROWS_AS(covariance(loc({1, 2, 3}), loc({1, 2}), h), std::invalid_argument);
    const std::vector<Location> a{loc({1.0})};
    CHECK_THROWS_AS(cov_matrix(a, h), std::invalid_argument);
}

TEST_CASE("Hyperparams validation") {
    CHECK_THROWS_AS(make_h(0.0, 0.1, {1.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(make_h(1.0, -0.1, {1.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(make_h(1.0, 0.1, {1.0, 0.0}).validate(), std::invalid_argument);
    CHECK_NOTHROW(make_h(1.0, 0.0, {1.0}).validate());
}

TEST_CASE("cov_matrix: single point, symmetry and entrywise agreement") {
    const auto h = make_h(1.3, 0.2, {1.0, 2.0});
    const std::vector<Location> one{loc({0.5, 0.5})};
    const Eigen::MatrixXd k1 = cov_matrix(one, h);
    REQUIRE(k1.rows() == 1);
    CHECK(k1(0, 0) == doctest::Approx(1.5).epsilon(1e-15));

    std::mt19937_64 rng(11);
    const auto a = oracle::random_locations(rng, 5, 2);
    const auto b = oracle::random_locations(rng, 3, 2);
    const Eigen::MatrixXd kab = cov_matrix(a, b, h);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) CHECK(kab(i, j) == covariance(a[i], b[j], h));

    const Eigen::MatrixXd kaa = cov_matrix(a, a, h);
    CHECK((kaa - kaa.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("property: kernel symmetry and Gram PSD") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto h = oracle::random_hyperparams(rng, 2);
        h.noise_var = 1e-6;
        const auto x = oracle::random_location(rng, 2, -3, 3);
        const auto xp = oracle::random_location(rng, 2, -3, 3);
        CHECK(covariance(x, xp, h) == covariance(xp, x, h));

        const auto pts = oracle::random_locations(rng, 1 + trial % 20, 2);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_matrix(pts, h));
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().maxCoeff();
        CHECK(lo >= -1e-8 * hi);
    }
}

TEST_CASE("gp_posterior: empty data gives the prior") {
    const auto h = make_h(1.3, 0.05, {0.8}, 0.2);
    const auto g = gp_posterior(loc({1.0}), Dataset{}, h);
    CHECK(g.mean == 0.2);
    CHECK(g.variance == doctest::Approx(1.35).epsilon(1e-15));
}

TEST_CASE("gp_posterior: noise-free interpolation at an observed point") {
    const auto h = make_h(1.0, 0.0, {1.0, 1.0});
    Dataset d;
    d.push_back(loc({0.2, 0.3}), 1.7);
    const auto g = gp_posterior(loc({0.2, 0.3}), d, h);
    CHECK(std::abs(g.mean - 1.7) <= 1e-10);
    CHECK(std::abs(g.variance) <= 1e-10);
}

TEST_CASE("gp_posterior: 4-point 1-D instance matches the high-precision oracle") {
    // tests/oracles/derive_values.py
    const auto h = make_h(1.3, 0.05, {0.8}, 0.2);
    Dataset d;
    d.push_back(loc({0.0}), 0.5);
    d.push_back(loc({0.7}), -0.2);
    d.push_back(loc({1.5}), 0.9);
    d.push_back(loc({2.2}), 0.1);
    const auto g1 = gp_posterior(loc({1.0}), d, h);
    CHECK(oracle::rel_err(g1.mean, 0.22407979116579746177, 0.0) <= 1e-10);
    CHECK(oracle::rel_err(g1.variance, 0.097855754603190013653, 0.0) <= 1e-10);
    const auto g3 = gp_posterior(loc({3.0}), d, h);
    CHECK(oracle::rel_err(g3.mean, -0.42765643946748247036, 0.0) <= 1e-10);
    CHECK(oracle::rel_err(g3.variance, 0.74779872691692695486, 0.0) <= 1e-10);
}

TEST_CASE("gp_posterior: singular data raises ill-conditioned") {
    const auto h = make_h(1.0, 0.0, {1.0});
    Dataset d;
    d.push_back(loc({0.0}), 1.0);
    d.push_back(loc({0.0}), 2.0);
    d.push_back(loc({0.0}), -1.0);
    // Three copies of one noise-free point: a rank-1 Gram that jitter repairs.
    CHECK_NOTHROW(gp_posterior(loc({0.5}), d, h));

    Eigen::MatrixXd neg = -Eigen::MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(SpdFactor(neg, 1.0), IllConditionedError);
}

TEST_CASE("property: posterior variance bounds and noise-free interpolation") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        auto h = oracle::random_hyperparams(rng, 2);
        const auto d = oracle::random_dataset(rng, 2 + trial % 9, 2);
        const auto x = oracle::random_location(rng, 2, -1, 6);
        const auto g = gp_posterior(x, d, h);
        CHECK(g.variance >= 0.0);
        CHECK(g.variance <= h.prior_variance() + 1e-10);

        h.noise_var = 0.0;
        const auto at = gp_posterior(d.locations[0], d, h);
        CHECK(std::abs(at.mean - d.values[0]) <= 1e-8);
        CHECK(at.variance <= 1e-8);
    }
}

TEST_CASE("gp_posterior agrees with the dense oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto h = oracle::random_hyperparams(rng, 2);
        const auto d = oracle::random_dataset(rng, 12, 2);
        const auto x = oracle::random_location(rng, 2, 0, 5);
        const auto g = gp_posterior(x, d, h);
        const auto ref = oracle::gp(x, d, h);
        CHECK(oracle::rel_err(g.mean, ref.mean) <= 1e-10);
        CHECK(oracle::rel_err(g.variance, ref.variance) <= 1e-10);
    }
}

TEST_CASE("gp_posterior_incremental: empty update and base case") {
    std::mt19937_64 rng(5);
    const auto h = oracle::random_hyperparams(rng, 2);
    const auto d = oracle::random_dataset(rng, 6, 2);
    const PosteriorCache cache(h, d);
    const PosteriorCache same = gp_posterior_incremental(cache, Dataset{});
    const auto x = oracle::random_location(rng, 2, 0, 5);
    CHECK(same.query(x).mean == cache.query(x).mean);
    CHECK(same.query(x).variance == cache.query(x).variance);

    Dataset one;
    one.push_back(d.locations[0], d.values[0]);
    const auto inc = gp_posterior_incremental(PosteriorCache(h), one).query(x);
    const auto batch = gp_posterior(x, one, h);
    CHECK(inc.mean == doctest::Approx(batch.mean).epsilon(1e-14));
    CHECK(inc.variance == doctest::Approx(batch.variance).epsilon(1e-14));
}

TEST_CASE("property: incremental posterior equals batch posterior") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> split(0, 10);
    for (int trial = 0; trial < 50; ++trial) {
        const auto h = oracle::random_hyperparams(rng, 2);
        const auto all = oracle::random_dataset(rng, 10, 2);
        const int cut = split(rng);
        Dataset first, second;
        for (int i = 0; i < 10; ++i) (i < cut ? first : second).push_back(all.locations[i], all.values[i]);
        const auto cache = gp_posterior_incremental(PosteriorCache(h, first), second);
        const auto x = oracle::random_location(rng, 2, 0, 5);
        const auto inc = cache.query(x);
        const auto ref = oracle::gp(x, all, h);
        CHECK(oracle::rel_err(inc.mean, ref.mean) <= 1e-8);
        CHECK(oracle::rel_err(inc.variance, ref.variance) <= 1e-8);
    }
}

TEST_CASE("gaussian_logpdf") {
    CHECK(gaussian_logpdf(1.0, {1.0, 1.0}) == doctest::Approx(-0.918938533204672742).epsilon(1e-15));
    CHECK(gaussian_logpdf(2.0, {1.0, 1.0}) == doctest::Approx(-1.418938533204672742).epsilon(1e-15));
    // tests/oracles/derive_values.py
    CHECK(gaussian_logpdf(0.3, {-0.2, 0.49}) == doctest::Approx(-0.81736563008226689348).epsilon(1e-14));
    CHECK_THROWS_AS(gaussian_logpdf(0.0, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("sample_gp_prior: vanishing variance and determinism") {
    const auto h = make_h(1e-12, 0.0, {1.0, 1.0}, 3.0);
    const std::vector<Location> one{loc({0.0, 0.0})};
    const auto draw = sample_gp_prior(one, h, 17);
    CHECK(std::abs(draw[0] - 3.0) <= 1e-5);

    std::mt19937_64 rng(1);
    const auto h2 = oracle::random_hyperparams(rng, 2);
    const auto pts = oracle::random_locations(rng, 8, 2);
    CHECK(sample_gp_prior(pts, h2, 42) == sample_gp_prior(pts, h2, 42));
    CHECK(sample_gp_prior(pts, h2, 42) != sample_gp_prior(pts, h2, 43));
}

TEST_CASE("sample_gp_prior: empirical covariance matches the kernel") {
    const auto h = make_h(1.2, 0.1, {1.0, 1.5}, 0.4);
    const std::vector<Location> pts{loc({0.0, 0.0}), loc({0.8, 0.5})};
    const int n = 10000;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
        const auto d = sample_gp_prior(pts, h, 1000 + static_cast<std::uint64_t>(i));
        a[i] = d[0];
        b[i] = d[1];
    }
    auto mean = [&](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / n;
    };
    const double ma = mean(a), mb = mean(b);
    double cab = 0, caa = 0, cbb = 0;
    for (int i = 0; i < n; ++i) {
        cab += (a[i] - ma) * (b[i] - mb);
        caa += (a[i] - ma) * (a[i] - ma);
        cbb += (b[i] - mb) * (b[i] - mb);
    }
    cab /= n - 1;
    caa /= n - 1;
    cbb /= n - 1;
    const double k01 = covariance(pts[0], pts[1], h);
    const double k00 = covariance(pts[0], pts[0], h);
    const double k11 = covariance(pts[1], pts[1], h);
    // Standard errors of sample (co)variances of a bivariate normal.
    const double se_ab = std::sqrt((k00 * k11 + k01 * k01) / n);
    const double se_aa = std::sqrt(2.0 * k00 * k00 / n);
    CHECK(std::abs(cab - k01) <= 3 * se_ab);
    CHECK(std::abs(caa - k00) <= 3 * se_aa);
    CHECK(std::abs(cbb - k11) <= 3 * std::sqrt(2.0 * k11 * k11 / n));
    CHECK(std::abs(ma - 0.4) <= 3 * std::sqrt(k00 / n));
}

TEST_CASE("repeated location with noise acts as independent readings") {
    Hyperparams h;
    h.signal_var = 1.3;
    h.noise_var = 0.2;
    h.length_scales = Eigen::VectorXd::Constant(2, 0.9);
    h.prior_mean = 0.1;
    const Location x = (Eigen::VectorXd(2) << 1.0, 2.0).finished();
    const Location y = (Eigen::VectorXd(2) << 1.5, 1.7).finished();
    Dataset twice;
    twice.push_back(x, 0.4);
    twice.push_back(x, 1.0);
    const auto g = gp_posterior(y, twice, h);

    // equivalent single reading of the average with half the noise
    Hyperparams half = h;
    half.noise_var = h.noise_var / 2;
    Dataset once;
    once.push_back(x, 0.7);
    const double ky = signal_covariance(x, y, h);
    const double c = h.signal_var + half.noise_var;
    CHECK(g.mean == doctest::Approx(h.prior_mean + ky / c * (0.7 - h.prior_mean)).epsilon(1e-12));
    CHECK(g.variance == doctest::Approx(h.prior_variance() - ky * ky / c).epsilon(1e-12));

    const auto m = cov_matrix(twice.locations, h);
    CHECK(m(0, 1) == doctest::Approx(h.signal_var));
    CHECK(m(0, 0) == doctest::Approx(h.signal_var + h.noise_var));

    PosteriorCache cache(h);
    Dataset first, second;
    first.push_back(x, 0.4);
    second.push_back(x, 1.0);
    cache.extend(first);
    cache.extend(second);
    CHECK(cache.query(y).mean == doctest::Approx(g.mean).epsilon(1e-12));
    CHECK(cache.query(y).variance == doctest::Approx(g.variance).epsilon(1e-12));
}
