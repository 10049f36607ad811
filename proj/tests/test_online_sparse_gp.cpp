#include <algorithm>
#include <chrono>
#include <random>

#include "doctest.h"

#include "gplocalize/errors.hpp"
#include "gplocalize/linalg.hpp"
#include "gplocalize/online_sparse_gp.hpp"
#include "oracles/dense.hpp"

using namespace gplocalize;

namespace {

struct Instance {
    Hyperparams h;
    SupportSet s;
    std::vector<Dataset> slices;
};

Instance random_instance(std::mt19937_64& rng, std::size_t support, std::size_t n_slices, std::size_t tau) {
    Instance in;
    in.h = oracle::random_hyperparams(rng, 2);
    in.s.locations = oracle::random_locations(rng, support, 2);
    for (std::size_t n = 0; n < n_slices; ++n) in.slices.push_back(oracle::random_dataset(rng, tau, 2));
    return in;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

OnlineGPState stream(const Instance& in, int tau) {
    auto st = OnlineGPState::init(in.s, in.h, tau);
    for (const auto& sl : in.slices)
        for (std::size_t i = 0; i < sl.size(); ++i) st.observe(sl.locations[i], sl.values[i]);
    return st;
}

} // namespace

TEST_CASE("init: empty summary equal to the prior on S") {
    std::mt19937_64 rng(1);
    const auto h = oracle::random_hyperparams(rng, 2);
    const SupportSet s{oracle::random_locations(rng, 3, 2)};
    const auto st = OnlineGPState::init(s, h, 4);
    CHECK(st.mu_a() == Eigen::VectorXd::Zero(3));
    CHECK(max_abs(st.sigma_a() - cov_matrix(s.locations, h)) <= 1e-12);
    CHECK(st.slices_assimilated() == 0);
    CHECK(st.recent_size() == 0);
    CHECK(identity_residual(st.sigma_a(), st.sigma_a_inv()) <= 1e-7);

    const SupportSet big{oracle::random_locations(rng, 40, 2, 0, 20)};
    const auto sized = OnlineGPState::init(big, h, 10);
    CHECK(sized.model().size() == 40);
    CHECK(sized.tau() == 10);

    CHECK_THROWS_AS(OnlineGPState::init(s, h, 0), std::invalid_argument);
}

TEST_CASE("summarize_slice: zero residual, rank one, and the dense definition") {
    std::mt19937_64 rng(2);
    const auto h = oracle::random_hyperparams(rng, 2);
    const SupportSet s{oracle::random_locations(rng, 4, 2)};

    auto st5 = OnlineGPState::init(s, h, 5);
    auto flat = oracle::random_dataset(rng, 5, 2);
    std::fill(flat.values.begin(), flat.values.end(), h.prior_mean);
    const auto zero = st5.summarize_slice(flat);
    CHECK(zero.mu_s.cwiseAbs().maxCoeff() == 0.0);
    CHECK(max_abs(zero.sigma_s) > 0.0);

    const auto st1 = OnlineGPState::init(s, h, 1);
    const auto one = st1.summarize_slice(oracle::random_dataset(rng, 1, 2));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(one.sigma_s);
    const auto& ev = eig.eigenvalues();
    CHECK(ev(ev.size() - 1) > 0.0);
    for (Eigen::Index i = 0; i + 1 < ev.size(); ++i) CHECK(std::abs(ev(i)) <= 1e-10 * ev(ev.size() - 1));

    for (int trial = 0; trial < 10; ++trial) {
        const auto slice = oracle::random_dataset(rng, 5, 2);
        const auto got = st5.summarize_slice(slice);
        const auto ref = oracle::slice_summary(slice, s.locations, h);
        for (Eigen::Index i = 0; i < 4; ++i) CHECK(oracle::rel_err(got.mu_s(i), ref.mu(i)) <= 1e-8);
        CHECK(max_abs(got.sigma_s - ref.sigma) <= 1e-8 * std::max(1.0, max_abs(ref.sigma)));
        CHECK(max_abs(got.sigma_s - got.sigma_s.transpose()) <= 1e-10);
    }

    CHECK_THROWS_AS(st5.summarize_slice(oracle::random_dataset(rng, 4, 2)), std::invalid_argument);
}

TEST_CASE("assimilate: null summary, inverse consistency, additive definition") {
    std::mt19937_64 rng(3);
    const auto in = random_instance(rng, 6, 3, 5);
    auto st = OnlineGPState::init(in.s, in.h, 5);

    const Eigen::MatrixXd before = st.sigma_a();
    st.assimilate(SliceSummary{Eigen::VectorXd::Zero(6), Eigen::MatrixXd::Zero(6, 6), {}});
    CHECK(st.slices_assimilated() == 1);
    CHECK(st.mu_a() == Eigen::VectorXd::Zero(6));
    CHECK(max_abs(st.sigma_a() - before) == 0.0);

    auto fresh = OnlineGPState::init(in.s, in.h, 5);
    Eigen::MatrixXd expect = oracle::gram(in.s.locations, in.s.locations, in.h);
    Eigen::VectorXd expect_mu = Eigen::VectorXd::Zero(6);
    for (const auto& sl : in.slices) {
        fresh.assimilate(fresh.summarize_slice(sl));
        CHECK(identity_residual(fresh.sigma_a(), fresh.sigma_a_inv()) <= 1e-7);
        const auto ref = oracle::slice_summary(sl, in.s.locations, in.h);
        expect += ref.sigma;
        expect_mu += ref.mu;
    }
    CHECK(max_abs(fresh.sigma_a() - expect) <= 1e-8 * max_abs(expect));
    CHECK((fresh.mu_a() - expect_mu).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, expect_mu.cwiseAbs().maxCoeff()));

    // a hand-built summary without a factor goes through the same path
    const auto ref = oracle::slice_summary(in.slices[0], in.s.locations, in.h);
    auto manual = OnlineGPState::init(in.s, in.h, 5);
    manual.assimilate(SliceSummary{ref.mu, ref.sigma, {}});
    CHECK(identity_residual(manual.sigma_a(), manual.sigma_a_inv()) <= 1e-7);

    CHECK_THROWS_AS(st.assimilate(SliceSummary{Eigen::VectorXd::Zero(5), Eigen::MatrixXd::Zero(5, 5), {}}),
                    std::invalid_argument);
}

TEST_CASE("predict: prior at N = 0, PITC after N slices, FITC when tau = 1") {
    std::mt19937_64 rng(4);
    const auto in = random_instance(rng, 5, 4, 3);
    const auto st0 = OnlineGPState::init(in.s, in.h, 3);
    const auto x0 = oracle::random_location(rng, 2, 0, 5);
    CHECK(st0.predict(x0).mean == doctest::Approx(in.h.prior_mean).epsilon(1e-14));
    CHECK(st0.predict(x0).variance == doctest::Approx(in.h.prior_variance()).epsilon(1e-12));

    const auto st = stream(in, 3);
    CHECK(st.slices_assimilated() == 4);
    BlockedDataset blocked{in.slices};
    for (int q = 0; q < 10; ++q) {
        const auto x = oracle::random_location(rng, 2, 0, 5);
        const auto got = st.predict(x);
        const auto ref = pitc_posterior(x, blocked, in.s, in.h);
        CHECK(oracle::rel_err(got.mean, ref.mean) <= 1e-7);
        CHECK(oracle::rel_err(got.variance, ref.variance) <= 1e-7);
    }

    const auto single = random_instance(rng, 5, 8, 1);
    const auto st1 = stream(single, 1);
    const Dataset all = oracle::concat(single.slices);
    for (int q = 0; q < 10; ++q) {
        const auto x = oracle::random_location(rng, 2, 0, 5);
        const auto got = st1.predict(x);
        const auto ref = fitc_posterior(x, all, single.s, single.h);
        CHECK(oracle::rel_err(got.mean, ref.mean) <= 1e-7);
        CHECK(oracle::rel_err(got.variance, ref.variance) <= 1e-7);
    }
}

TEST_CASE("push_recent: 1x1 cache, interpolation, dense inverse after 6 pushes") {
    std::mt19937_64 rng(5);
    auto in = random_instance(rng, 5, 2, 8);
    auto st = stream(in, 8);
    const auto x = oracle::random_location(rng, 2, 0, 5);
    st.push_recent(x, 0.4);
    CHECK(st.recent_inverse().rows() == 1);
    CHECK(st.recent_inverse()(0, 0) == doctest::Approx(1.0 / st.predict(x).variance).epsilon(1e-12));

    Hyperparams exact = in.h;
    exact.noise_var = 0.0;
    auto interp = OnlineGPState::init(in.s, exact, 4);
    for (std::size_t i = 0; i < 4; ++i) interp.observe(in.slices[0].locations[i], in.slices[0].values[i]);
    interp.push_recent(x, 0.4);
    const auto at = interp.predict_with_recent(x);
    CHECK(std::abs(at.mean - 0.4) <= 1e-8);
    CHECK(at.variance <= 1e-8);

    auto six = stream(in, 8);
    const auto buf = oracle::random_dataset(rng, 6, 2);
    for (std::size_t i = 0; i < buf.size(); ++i) {
        six.push_recent(buf.locations[i], buf.values[i]);
        Dataset sofar;
        for (std::size_t j = 0; j <= i; ++j) sofar.push_back(buf.locations[j], buf.values[j]);
        const Eigen::MatrixXd dense = oracle::inv(oracle::buffer_covariance(in.slices, sofar, in.s.locations, in.h));
        CHECK(max_abs(six.recent_inverse() - dense) <= 1e-8 * std::max(1.0, max_abs(dense)));
    }
}

TEST_CASE("push_recent: protocol and argument errors") {
    std::mt19937_64 rng(6);
    auto in = random_instance(rng, 4, 0, 0);
    auto st = OnlineGPState::init(in.s, in.h, 2);
    const auto a = oracle::random_location(rng, 2, 0, 5);
    const auto b = oracle::random_location(rng, 2, 0, 5);
    st.push_recent(a, 0.1);
    st.push_recent(b, 0.2);
    CHECK_THROWS_AS(st.push_recent(oracle::random_location(rng, 2, 0, 5), 0.3), ProtocolError);
    st.flush_recent();
    CHECK(st.recent_size() == 0);
    CHECK_THROWS_AS(st.flush_recent(), ProtocolError);

    Hyperparams exact = in.h;
    exact.noise_var = 0.0;
    auto ex = OnlineGPState::init(in.s, exact, 3);
    ex.push_recent(a, 0.1);
    CHECK_THROWS_AS(ex.push_recent(a, 0.2), std::invalid_argument);

    auto noisy = OnlineGPState::init(in.s, in.h, 3);
    noisy.push_recent(a, 0.1);
    CHECK_NOTHROW(noisy.push_recent(a, 0.2));
}

TEST_CASE("predict_with_recent: empty buffer, single point, two-stage dense computation") {
    std::mt19937_64 rng(7);
    const auto in = random_instance(rng, 5, 3, 6);
    auto st = stream(in, 6);
    const auto x = oracle::random_location(rng, 2, 0, 5);
    CHECK(st.predict_with_recent(x).mean == st.predict(x).mean);
    CHECK(st.predict_with_recent(x).variance == st.predict(x).variance);

    Hyperparams exact = in.h;
    exact.noise_var = 0.0;
    auto one = OnlineGPState::init(in.s, exact, 6);
    one.push_recent(x, -0.7);
    CHECK(one.predict_with_recent(x).mean == doctest::Approx(-0.7).epsilon(1e-8));
    CHECK(one.predict_with_recent(x).variance <= 1e-8);

    for (int trial = 0; trial < 10; ++trial) {
        const auto inst = random_instance(rng, 5, 3, 6);
        auto s2 = stream(inst, 6);
        const auto buf = oracle::random_dataset(rng, 4, 2);
        for (std::size_t i = 0; i < 4; ++i) s2.push_recent(buf.locations[i], buf.values[i]);
        const auto q = oracle::random_location(rng, 2, 0, 5);
        const auto got = s2.predict_with_recent(q);
        const auto ref = oracle::two_stage(q, inst.slices, buf, inst.s.locations, inst.h);
        CHECK(oracle::rel_err(got.mean, ref.mean) <= 1e-8);
        CHECK(oracle::rel_err(got.variance, ref.variance) <= 1e-8);
    }
}

TEST_CASE("predict_with_recent_batch matches the single-point query") {
    std::mt19937_64 rng(8);
    const auto in = random_instance(rng, 6, 2, 4);
    auto st = stream(in, 4);
    const auto buf = oracle::random_dataset(rng, 3, 2);
    for (std::size_t i = 0; i < 3; ++i) st.push_recent(buf.locations[i], buf.values[i]);
    const auto pts = oracle::random_locations(rng, 7, 2);
    Eigen::MatrixXd p(2, 7);
    for (int j = 0; j < 7; ++j) p.col(j) = pts[j];
    const Eigen::MatrixXd kxs = st.model().cross(pts).transpose();
    Eigen::VectorXd mean, var;
    st.predict_with_recent_batch(p, kxs, mean, var);
    for (int j = 0; j < 7; ++j) {
        const auto one = st.predict_with_recent(pts[j]);
        CHECK(mean(j) == doctest::Approx(one.mean).epsilon(1e-12));
        CHECK(var(j) == doctest::Approx(one.variance).epsilon(1e-10));
    }
}

TEST_CASE("flush_recent: PITC boundary, empty buffer, path independence") {
    std::mt19937_64 rng(9);
    const auto in = random_instance(rng, 4, 3, 5);
    auto st = OnlineGPState::init(in.s, in.h, 5);
    for (const auto& sl : in.slices) {
        for (std::size_t i = 0; i < sl.size(); ++i) st.push_recent(sl.locations[i], sl.values[i]);
        st.flush_recent();
    }
    const auto x = oracle::random_location(rng, 2, 0, 5);
    const auto ref = pitc_posterior(x, BlockedDataset{in.slices}, in.s, in.h);
    CHECK(oracle::rel_err(st.predict(x).mean, ref.mean) <= 1e-7);
    CHECK(oracle::rel_err(st.predict(x).variance, ref.variance) <= 1e-7);
    CHECK(st.predict_with_recent(x).mean == st.predict(x).mean);
    CHECK(st.predict_with_recent(x).variance == st.predict(x).variance);

    // summarize + assimilate by hand, then push a partial buffer, versus
    // pushing first and assimilating while the buffer is live
    const auto extra = oracle::random_dataset(rng, 3, 2);
    auto manual = OnlineGPState::init(in.s, in.h, 5);
    for (const auto& sl : in.slices) manual.assimilate(manual.summarize_slice(sl));
    for (std::size_t i = 0; i < 3; ++i) manual.push_recent(extra.locations[i], extra.values[i]);

    auto interleaved = OnlineGPState::init(in.s, in.h, 5);
    interleaved.assimilate(interleaved.summarize_slice(in.slices[0]));
    for (std::size_t i = 0; i < 3; ++i) interleaved.push_recent(extra.locations[i], extra.values[i]);
    interleaved.assimilate(interleaved.summarize_slice(in.slices[1]));
    interleaved.assimilate(interleaved.summarize_slice(in.slices[2]));

    const auto dense = oracle::two_stage(x, in.slices, extra, in.s.locations, in.h);
    for (const auto* s : {&manual, &interleaved}) {
        const auto p = s->predict_with_recent(x);
        CHECK(std::abs(p.mean - dense.mean) <= 1e-9);
        CHECK(std::abs(p.variance - dense.variance) <= 1e-9);
    }
}

TEST_CASE("property: online predict equals PITC at the slice boundary") {
    std::mt19937_64 rng(10);
    const auto in = random_instance(rng, 4, 3, 5);
    const auto st = stream(in, 5);
    for (int q = 0; q < 20; ++q) {
        const auto x = oracle::random_location(rng, 2, 0, 5);
        const auto got = st.predict(x);
        const auto ref = pitc_posterior(x, BlockedDataset{in.slices}, in.s, in.h);
        CHECK(oracle::rel_err(got.mean, ref.mean) <= 1e-7);
        CHECK(oracle::rel_err(got.variance, ref.variance) <= 1e-7);
    }
}

TEST_CASE("property: tau = 1 streaming equals FITC") {
    std::mt19937_64 rng(11);
    const auto in = random_instance(rng, 5, 12, 1);
    const auto st = stream(in, 1);
    const Dataset all = oracle::concat(in.slices);
    for (int q = 0; q < 20; ++q) {
        const auto x = oracle::random_location(rng, 2, 0, 5);
        const auto got = st.predict(x);
        const auto ref = fitc_posterior(x, all, in.s, in.h);
        CHECK(oracle::rel_err(got.mean, ref.mean) <= 1e-7);
        CHECK(oracle::rel_err(got.variance, ref.variance) <= 1e-7);
    }
}

TEST_CASE("property: variance is non-increasing under assimilation and bounded") {
    std::mt19937_64 rng(12);
    const auto in = random_instance(rng, 6, 15, 3);
    auto st = OnlineGPState::init(in.s, in.h, 3);
    const auto xs = oracle::random_locations(rng, 8, 2, -1, 6);
    std::vector<double> last;
    for (const auto& x : xs) last.push_back(st.predict(x).variance);
    for (const auto& sl : in.slices) {
        for (std::size_t i = 0; i < sl.size(); ++i) {
            st.observe(sl.locations[i], sl.values[i]);
            for (const auto& x : xs) {
                const double v = st.predict_with_recent(x).variance;
                CHECK(v >= -1e-10);
                CHECK(v <= in.h.prior_variance() + 1e-10);
            }
        }
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const double v = st.predict(xs[k]).variance;
            CHECK(v <= last[k] + 1e-9);
            CHECK(v >= -1e-10);
            last[k] = v;
        }
        CHECK(identity_residual(st.sigma_a(), st.sigma_a_inv()) <= 1e-7);
        const Eigen::MatrixXd gain = st.sigma_a() - st.model().sigma_ss();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gain);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("property: every push keeps the buffer inverse equal to a dense inversion") {
    std::mt19937_64 rng(13);
    const auto in = random_instance(rng, 5, 6, 4);
    auto st = OnlineGPState::init(in.s, in.h, 4);
    std::vector<Dataset> done;
    for (const auto& sl : in.slices) {
        Dataset sofar;
        for (std::size_t i = 0; i < sl.size(); ++i) {
            st.push_recent(sl.locations[i], sl.values[i]);
            sofar.push_back(sl.locations[i], sl.values[i]);
            const Eigen::MatrixXd dense = oracle::inv(oracle::buffer_covariance(done, sofar, in.s.locations, in.h));
            CHECK(max_abs(st.recent_inverse() - dense) <= 1e-8 * std::max(1.0, max_abs(dense)));
        }
        st.flush_recent();
        done.push_back(sl);
    }
}

TEST_CASE("property: state size does not grow with the number of slices") {
    std::mt19937_64 rng(14);
    const auto in = random_instance(rng, 8, 50, 4);
    auto st = OnlineGPState::init(in.s, in.h, 4);
    std::size_t at5 = 0, foot5 = 0;
    for (std::size_t n = 0; n < in.slices.size(); ++n) {
        for (std::size_t i = 0; i < 4; ++i) st.observe(in.slices[n].locations[i], in.slices[n].values[i]);
        if (n + 1 == 5) {
            at5 = st.serialize().size();
            foot5 = st.footprint_bytes();
        }
    }
    CHECK(st.slices_assimilated() == 50);
    CHECK(st.serialize().size() == at5);
    CHECK(st.footprint_bytes() == foot5);
}

TEST_CASE("property: predict latency does not grow with the number of slices") {
    std::mt19937_64 rng(15);
    const auto in = random_instance(rng, 40, 50, 10);
    auto st = OnlineGPState::init(in.s, in.h, 10);
    const auto queries = oracle::random_locations(rng, 200, 2);
    auto median_latency = [&] {
        std::vector<double> t;
        for (int rep = 0; rep < 15; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            double sink = 0.0;
            for (const auto& q : queries) sink += st.predict(q).mean;
            const auto t1 = std::chrono::steady_clock::now();
            t.push_back(std::chrono::duration<double>(t1 - t0).count() + 0.0 * sink);
        }
        std::nth_element(t.begin(), t.begin() + 7, t.end());
        return t[7];
    };
    std::vector<double> early, late;
    for (std::size_t n = 0; n < in.slices.size(); ++n) {
        for (std::size_t i = 0; i < 10; ++i) st.observe(in.slices[n].locations[i], in.slices[n].values[i]);
        const auto done = n + 1;
        if (done >= 5 && done <= 15) early.push_back(median_latency());
        if (done >= 40 && done <= 50) late.push_back(median_latency());
    }
    auto med = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    CHECK(med(late) <= 1.25 * med(early));
}

TEST_CASE("snapshot round trip resumes the stream bit-exactly") {
    std::mt19937_64 rng(16);
    const auto in = random_instance(rng, 5, 6, 4);
    auto a = OnlineGPState::init(in.s, in.h, 4);
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t i = 0; i < 4; ++i) a.observe(in.slices[n].locations[i], in.slices[n].values[i]);
    a.push_recent(in.slices[3].locations[0], in.slices[3].values[0]);

    const auto bytes = a.serialize();
    std::size_t off = 0;
    auto b = OnlineGPState::deserialize(bytes, off);
    CHECK(off == bytes.size());
    CHECK(b.serialize() == bytes);

    for (std::size_t n = 3; n < 6; ++n)
        for (std::size_t i = (n == 3 ? 1 : 0); i < 4; ++i) {
            a.observe(in.slices[n].locations[i], in.slices[n].values[i]);
            b.observe(in.slices[n].locations[i], in.slices[n].values[i]);
        }
    const auto x = oracle::random_location(rng, 2, 0, 5);
    CHECK(a.predict_with_recent(x).mean == b.predict_with_recent(x).mean);
    CHECK(a.predict_with_recent(x).variance == b.predict_with_recent(x).variance);
    CHECK(a.serialize() == b.serialize());

    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    std::size_t o2 = 0;
    CHECK_THROWS_AS(OnlineGPState::deserialize(truncated, o2), ParseError);
    auto corrupt = bytes;
    corrupt[0] = 'X';
    std::size_t o3 = 0;
    CHECK_THROWS_AS(OnlineGPState::deserialize(corrupt, o3), ParseError);
}

TEST_CASE("predict_with_recent_many matches each state's own query") {
    std::mt19937_64 rng(17);
    const auto in = random_instance(rng, 5, 0, 0);
    auto model = std::make_shared<const SupportModel>(in.s, in.h);
    std::vector<OnlineGPState> states;
    for (int c = 0; c < 4; ++c) {
        OnlineGPState st(model, 3);
        const auto data = oracle::random_dataset(rng, 3 * c + c % 3, 2);
        for (std::size_t i = 0; i < data.size(); ++i) st.observe(data.locations[i], data.values[i]);
        states.push_back(st);
    }
    std::vector<const OnlineGPState*> ptrs;
    for (const auto& s : states) ptrs.push_back(&s);
    const auto pts = oracle::random_locations(rng, 6, 2);
    Eigen::MatrixXd p(2, 6);
    for (int j = 0; j < 6; ++j) p.col(j) = pts[j];
    const Eigen::MatrixXd kxs = model->cross(pts).transpose();
    Eigen::MatrixXd mean, var;
    OnlineGPState::predict_with_recent_many(ptrs, p, kxs, mean, var);
    for (int c = 0; c < 4; ++c) {
        for (int j = 0; j < 6; ++j) {
            const auto one = states[c].predict_with_recent(pts[j]);
            CHECK(mean(j, c) == doctest::Approx(one.mean).epsilon(1e-12));
            CHECK(var(j, c) == doctest::Approx(one.variance).epsilon(1e-10));
        }
    }

    OnlineGPState other(std::make_shared<const SupportModel>(in.s, in.h), 3);
    ptrs.push_back(&other);
    CHECK_THROWS_AS(OnlineGPState::predict_with_recent_many(ptrs, p, kxs, mean, var), std::invalid_argument);
}
