#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "sr/analysis.hpp"
#include "sr/diffusion.hpp"
#include "sr/image.hpp"
#include "sr/operators.hpp"
#include "sr/rng.hpp"
#include "sr/samplers.hpp"
#include "sr/scoremodel.hpp"

using namespace sr;

namespace {

struct NanModel final : ScoreModel {
    std::size_t r, c;
    NanModel(std::size_t rr, std::size_t cc) : r(rr), c(cc) {}
    Image evaluate(const Image& x, double) const override {
        return Image(x.rows, x.cols, std::nan(""));
    }
    std::size_t rows() const override { return r; }
    std::size_t cols() const override { return c; }
};

// Real measurement matrix of an MRI operator: stacked real and imaginary
// parts of the kept k-space rows, built by probing with basis images.
Eigen::MatrixXd real_measurement_matrix(const MeasurementOp& op, std::size_t rows,
                                        std::size_t cols, std::vector<std::size_t>& kept) {
    kept.clear();
    for (std::size_t i = 0; i < op.mask.keep.size(); ++i)
        if (op.mask.keep[i]) kept.push_back(i);
    const std::size_t n = rows * cols;
    Eigen::MatrixXd R(2 * kept.size(), n);
    for (std::size_t j = 0; j < n; ++j) {
        Image e(rows, cols);
        e.data[j] = 1.0;
        const ComplexField f = op.forward(e);
        for (std::size_t k = 0; k < kept.size(); ++k) {
            R(2 * k, j) = f.data[kept[k]].real();
            R(2 * k + 1, j) = f.data[kept[k]].imag();
        }
    }
    return R;
}

// Random mask symmetric under k -> -k, so that the DFT of a real image
// restricted to the kept set stays Hermitian and data consistency at
// lambda = 1 is an exact projection.
KMask symmetric_mask(std::size_t n, RngState& rng) {
    KMask m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t ic = (n - i) % n, jc = (n - j) % n;
            if (i * n + j > ic * n + jc) continue; // decided with the partner
            const char keep = rng.uniform() < 0.5 ? 1 : 0;
            m.keep[i * n + j] = keep;
            m.keep[ic * n + jc] = keep;
        }
    m.keep[0] = 1;
    return m;
}

} // namespace

TEST_CASE("data consistency mapping") {
    RngState rng(1);
    const Image xbar = gaussian_field(8, 8, rng);
    RngState mrng(2);
    const KMask m = symmetric_mask(8, mrng);
    const MeasurementOp op = MeasurementOp::mri(m);
    const ComplexField y = op.forward(xbar);

    const Image x = gaussian_field(8, 8, rng);
    // lambda = 0 is the identity.
    const Image same = data_consistency(x, y, op, 0.0);
    CHECK(same.data == x.data);

    // lambda = 1: kept k-space entries of the output equal y exactly.
    const Image proj = data_consistency(x, y, op, 1.0);
    const ComplexField yp = op.forward(proj);
    const double ynorm = [&] {
        double s = 0.0;
        for (const auto& v : y.data) s += std::norm(v);
        return std::sqrt(s);
    }();
    for (std::size_t i = 0; i < y.size(); ++i)
        if (m.keep[i]) CHECK(std::abs(yp.data[i] - y.data[i]) <= 1e-10 * ynorm);

    // Idempotent at lambda = 1.
    const Image proj2 = data_consistency(proj, y, op, 1.0);
    for (std::size_t i = 0; i < proj.size(); ++i)
        CHECK(std::abs(proj2.data[i] - proj.data[i]) < 1e-10);

    CHECK_THROWS_AS(data_consistency(x, y, op, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(data_consistency(x, y, op, 1.1), std::invalid_argument);
    CHECK_THROWS_AS(data_consistency(Image(4, 4), y, op, 1.0), std::invalid_argument);
}

TEST_CASE("annealed langevin recovers ground truth through a full mask") {
    RngState rng(3);
    const Image mu = gaussian_field(16, 16, rng);
    const GaussianScoreModel oracle(mu, Image(16, 16, 0.25));
    Image xbar = mu;
    for (double& v : xbar.data) v += 0.1 * rng.normal();

    const MeasurementOp op = MeasurementOp::mri(mask_full(16, 16));
    const ComplexField y = op.forward(xbar);
    const SigmaSchedule sched = make_schedule(500, 0.01, 378.0);
    AldParams p; // defaults: n=500, n_start=230, M=3, lambda=1
    RngState srng(4);
    const Image rec = ald_sample(oracle, y, op, p, sched, srng);
    CHECK(psnr(rec, xbar) >= 50.0);
}

TEST_CASE("annealed langevin with lambda=0 samples the prior") {
    RngState rng(5);
    const Image mu = gaussian_field(8, 8, rng);
    const GaussianScoreModel oracle(mu, Image(8, 8, 0.09));
    const MeasurementOp op = MeasurementOp::mri(mask_full(8, 8));
    const ComplexField y = op.forward(mu); // unused at lambda=0

    const SigmaSchedule sched = make_schedule(500, 0.01, 378.0);
    AldParams p;
    p.lambda = 0.0;
    const std::size_t runs = 200;
    Image acc(8, 8), acc2(8, 8);
    RngState srng(6);
    for (std::size_t r = 0; r < runs; ++r) {
        RngState chain = srng.derive(r + 1);
        const Image s = ald_sample(oracle, y, op, p, sched, chain);
        for (std::size_t i = 0; i < s.size(); ++i) {
            acc.data[i] += s.data[i];
            acc2.data[i] += s.data[i] * s.data[i];
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const double mean = acc.data[i] / runs;
        const double var = acc2.data[i] / runs - mean * mean;
        const double se = std::sqrt(var / runs);
        CHECK(std::abs(mean - mu.data[i]) <= 3.0 * se);
    }
}

TEST_CASE("annealed langevin degenerate cases") {
    RngState rng(7);
    const GaussianScoreModel oracle(Image(8, 8, 0.0), Image(8, 8, 1.0));
    const MeasurementOp op = MeasurementOp::mri(mask_full(8, 8));
    const ComplexField y = op.forward(Image(8, 8, 0.5));
    const SigmaSchedule sched = make_schedule(500, 0.01, 378.0);

    // M = 0 inner iterations: the initialization comes back untouched.
    AldParams p;
    p.inner_iters = 0;
    RngState a(11), b(11);
    const Image out = ald_sample(oracle, y, op, p, sched, a);
    const Image init = gaussian_field(8, 8, b);
    CHECK(out.data == init.data);

    // Determinism.
    AldParams q;
    q.n_start = 40; // short run
    RngState c(12), d(12);
    const Image r1 = ald_sample(oracle, y, op, q, sched, c);
    const Image r2 = ald_sample(oracle, y, op, q, sched, d);
    CHECK(r1.data == r2.data);

    // Schedule length mismatch.
    const SigmaSchedule shortsched = make_schedule(10, 0.01, 378.0);
    RngState e(13);
    CHECK_THROWS_AS(ald_sample(oracle, y, op, q, shortsched, e), std::invalid_argument);

    // Divergence reporting.
    const NanModel nan_model(8, 8);
    RngState f(14);
    AldParams pf;
    try {
        ald_sample(nan_model, y, op, pf, sched, f);
        FAIL("expected SamplerDivergence");
    } catch (const SamplerDivergence& ex) {
        CHECK(ex.outer == 229);
        CHECK(ex.inner == 0);
    }
}

TEST_CASE("predictor-corrector recovers ground truth through a full mask") {
    RngState rng(15);
    const Image mu = gaussian_field(16, 16, rng);
    const GaussianScoreModel oracle(mu, Image(16, 16, 0.25));
    Image xbar = mu;
    for (double& v : xbar.data) v += 0.1 * rng.normal();
    const MeasurementOp op = MeasurementOp::mri(mask_full(16, 16));
    const ComplexField y = op.forward(xbar);
    const SigmaSchedule sched = make_schedule(250, 0.01, 378.0);
    PcParams p;
    RngState srng(16);
    const Image rec = pc_sample(oracle, y, op, p, sched, srng);
    CHECK(psnr(rec, xbar) >= 50.0);

    // Determinism.
    RngState s1(17), s2(17);
    const Image r1 = pc_sample(oracle, y, op, p, sched, s1);
    const Image r2 = pc_sample(oracle, y, op, p, sched, s2);
    CHECK(r1.data == r2.data);
}

TEST_CASE("predictor-corrector matches the gaussian posterior mean") {
    RngState rng(18);
    const std::size_t n = 64;
    const Image mu = gaussian_field(8, 8, rng);
    // Diagonal prior keeps the closed form simple but nontrivial.
    Image var(8, 8);
    for (std::size_t i = 0; i < n; ++i) var.data[i] = 0.05 + 0.1 * rng.uniform();
    const GaussianScoreModel oracle(mu, var);

    RngState mrng(19);
    const KMask m = symmetric_mask(8, mrng);
    const MeasurementOp op = MeasurementOp::mri(m);

    Image xbar = mu;
    for (std::size_t i = 0; i < n; ++i) xbar.data[i] += std::sqrt(var.data[i]) * rng.normal();
    const ComplexField y = op.forward(xbar);

    // Closed-form conditional mean of N(mu, D) given the exact (real-valued)
    // measurement equalities R x = r.
    std::vector<std::size_t> kept;
    const Eigen::MatrixXd R = real_measurement_matrix(op, 8, 8, kept);
    Eigen::VectorXd r(2 * kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) {
        r(2 * k) = y.data[kept[k]].real();
        r(2 * k + 1) = y.data[kept[k]].imag();
    }
    Eigen::VectorXd muv(n), dv(n);
    for (std::size_t i = 0; i < n; ++i) {
        muv(i) = mu.data[i];
        dv(i) = var.data[i];
    }
    const Eigen::MatrixXd SigRt = dv.asDiagonal() * R.transpose();
    const Eigen::MatrixXd G = R * SigRt; // R Sigma R^T, rank-deficient
    const Eigen::VectorXd post =
        muv + SigRt * G.completeOrthogonalDecomposition().pseudoInverse() * (r - R * muv);

    const SigmaSchedule sched = make_schedule(250, 0.01, 378.0);
    PcParams p;
    const std::size_t runs = 200;
    Image acc(8, 8), acc2(8, 8);
    RngState srng(20);
    for (std::size_t rep = 0; rep < runs; ++rep) {
        RngState chain = srng.derive(rep + 1);
        const Image s = pc_sample(oracle, y, op, p, sched, chain);
        for (std::size_t i = 0; i < n; ++i) {
            acc.data[i] += s.data[i];
            acc2.data[i] += s.data[i] * s.data[i];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = acc.data[i] / runs;
        const double v = acc2.data[i] / runs - mean * mean;
        const double se = std::sqrt(v / runs) + 1e-12; // fully determined pixels
        CHECK(std::abs(mean - post(i)) <= 3.0 * se);
    }
}

TEST_CASE("predictor-corrector with lambda=0 reproduces prior statistics") {
    RngState rng(21);
    const Image mu = gaussian_field(8, 8, rng);
    Image var(8, 8);
    double tr = 0.0;
    for (std::size_t i = 0; i < var.size(); ++i) {
        var.data[i] = 0.1 + 0.2 * rng.uniform();
        tr += var.data[i];
    }
    const GaussianScoreModel oracle(mu, var);
    const MeasurementOp op = MeasurementOp::mri(mask_full(8, 8));
    const ComplexField y = op.forward(mu);
    const SigmaSchedule sched = make_schedule(250, 0.01, 378.0);
    PcParams p;
    p.lambda = 0.0;

    const std::size_t runs = 500;
    Image acc(8, 8), acc2(8, 8);
    RngState srng(22);
    for (std::size_t rep = 0; rep < runs; ++rep) {
        RngState chain = srng.derive(rep + 1);
        const Image s = pc_sample(oracle, y, op, p, sched, chain);
        for (std::size_t i = 0; i < s.size(); ++i) {
            acc.data[i] += s.data[i];
            acc2.data[i] += s.data[i] * s.data[i];
        }
    }
    double trace_hat = 0.0;
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const double mean = acc.data[i] / runs;
        trace_hat += acc2.data[i] / runs - mean * mean;
    }
    CHECK(trace_hat == doctest::Approx(tr).epsilon(0.10));
}

TEST_CASE("lambda sweep") {
    RngState rng(23);
    const Image mu = gaussian_field(8, 8, rng);
    const GaussianScoreModel oracle(mu, Image(8, 8, 0.16));
    RngState mrng(24);
    const KMask m = symmetric_mask(8, mrng);
    const MeasurementOp op = MeasurementOp::mri(m);
    Image xbar = mu;
    for (double& v : xbar.data) v += 0.4 * rng.normal();
    const ComplexField y = op.forward(xbar);
    const SigmaSchedule sched = make_schedule(250, 0.01, 378.0);
    PcParams base;

    // A single lambda = 0 entry is an unconditional sample (finite, right dims).
    RngState u(25);
    const auto uncond = lambda_sweep(oracle, y, op, {0.0}, base, sched, u);
    REQUIRE(uncond.size() == 1);
    CHECK(all_finite(uncond[0]));

    // The lambda = 1 entry is bit-identical to pc_sample from the same state.
    std::vector<double> lambdas;
    for (int k = 0; k <= 20; ++k) lambdas.push_back(k / 20.0);
    RngState shared(26);
    const auto sweep = lambda_sweep(oracle, y, op, lambdas, base, sched, shared);
    REQUIRE(sweep.size() == lambdas.size());
    RngState solo(26);
    PcParams p1 = base;
    p1.lambda = 1.0;
    const Image direct = pc_sample(oracle, y, op, p1, sched, solo);
    CHECK(sweep.back().data == direct.data);

    // Data fidelity ||A x - y|| is (almost) nonincreasing in lambda.
    auto fidelity = [&](const Image& x) {
        const ComplexField ax = op.forward(x);
        double s = 0.0;
        for (std::size_t i = 0; i < ax.size(); ++i) s += std::norm(ax.data[i] - y.data[i]);
        return std::sqrt(s);
    };
    std::size_t violations = 0;
    double prev = fidelity(sweep[0]);
    for (std::size_t k = 1; k < sweep.size(); ++k) {
        const double f = fidelity(sweep[k]);
        if (f > prev * (1.0 + 1e-9)) ++violations;
        prev = f;
    }
    CHECK(violations <= 1); // <= 5% of the 20 adjacent comparisons
}
