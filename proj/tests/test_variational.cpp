#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sr/analysis.hpp"
#include "sr/image.hpp"
#include "sr/operators.hpp"
#include "sr/rng.hpp"
#include "sr/variational.hpp"

using namespace sr;

TEST_CASE("charbonnier tv value") {
    // Constant image: rows*cols*eps.
    const Image c(320, 320, 0.7);
    CHECK(tv_value(c, 1e-3) == doctest::Approx(102.4).epsilon(1e-9));

    // 1x2 [0,1]: one unit jump plus a boundary eps term.
    Image j(1, 2);
    j(0, 1) = 1.0;
    CHECK(tv_value(j, 1e-3) ==
          doctest::Approx(std::sqrt(1.0 + 1e-6) + 1e-3).epsilon(1e-12));

    // Lower bound rows*cols*eps.
    RngState rng(1);
    const Image x = gaussian_field(9, 13, rng);
    CHECK(tv_value(x, 1e-3) >= 9 * 13 * 1e-3);

    // Convexity midpoint spot-check.
    const Image a = gaussian_field(9, 13, rng);
    const Image mid = 0.5 * (x + a);
    CHECK(tv_value(mid, 1e-3) <= 0.5 * (tv_value(x, 1e-3) + tv_value(a, 1e-3)) + 1e-12);
}

TEST_CASE("tv gradient matches finite differences") {
    const Image c(8, 8, 0.4);
    for (double v : tv_gradient(c, 1e-3).data) CHECK(v == 0.0);

    RngState rng(2);
    const Image x = gaussian_field(16, 16, rng);
    const Image g = tv_gradient(x, 1e-3);
    const double h = 1e-6;
    double gn = 0.0;
    for (double v : g.data) gn = std::max(gn, std::abs(v));
    for (std::size_t i = 0; i < x.size(); i += 7) { // sample of coordinates
        Image xp = x, xm = x;
        xp.data[i] += h;
        xm.data[i] -= h;
        const double fd = (tv_value(xp, 1e-3) - tv_value(xm, 1e-3)) / (2.0 * h);
        CHECK(std::abs(g.data[i] - fd) <= 1e-5 * std::max(1.0, gn));
    }

    // Directional-derivative chain rule at c = 2: d/dt tv(2x + t*v) =
    // <grad tv(2x), v>.
    const Image v = gaussian_field(16, 16, rng);
    Image x2 = 2.0 * x;
    const Image g2 = tv_gradient(x2, 1e-3);
    Image xt = x2;
    for (std::size_t i = 0; i < xt.size(); ++i) xt.data[i] += h * v.data[i];
    Image xs = x2;
    for (std::size_t i = 0; i < xs.size(); ++i) xs.data[i] -= h * v.data[i];
    const double dd = (tv_value(xt, 1e-3) - tv_value(xs, 1e-3)) / (2.0 * h);
    CHECK(dd == doctest::Approx(dot(g2, v)).epsilon(1e-5));
}

TEST_CASE("tv reconstruction, unregularized limit") {
    // lambda = 0: pure TV descent flattens the image.
    TvParams p;
    p.lambda = 0.0;
    p.max_iters = 4000;
    p.tol = 0.0; // run the full budget
    const MeasurementOp op = MeasurementOp::mri(mask_full(16, 16));
    const TvResult res = reconstruct_tv(ComplexField(16, 16), op, p, 16, 16);
    double gn = 0.0;
    for (double v : tv_gradient(res.x, p.epsilon).data) gn += v * v;
    CHECK(std::sqrt(gn) < 1e-3);
}

TEST_CASE("tv reconstruction of a piecewise-constant phantom") {
    // Blocky 64x64 phantom, acceleration-2 gaussian mask, strong fidelity.
    Image ph(64, 64, 0.1);
    for (std::size_t i = 12; i < 40; ++i)
        for (std::size_t j = 16; j < 52; ++j) ph(i, j) = 0.8;
    for (std::size_t i = 24; i < 34; ++i)
        for (std::size_t j = 28; j < 38; ++j) ph(i, j) = 0.35;

    RngState mrng(3);
    const KMask m = mask_gaussian1d(64, 64, 2.0, 0.08, mrng);
    const MeasurementOp op = MeasurementOp::mri(m);
    const ComplexField y = op.forward(ph);

    TvParams p;
    p.lambda = 1e3;
    p.max_iters = 2000;
    const TvResult res = reconstruct_tv(y, op, p, 64, 64);
    CHECK(all_finite(res.x));
    CHECK(psnr(res.x, ph) >= 35.0);

    // Objective nonincreasing along the trace to 1e-8 slack.
    for (std::size_t k = 1; k < res.trace.size(); ++k)
        CHECK(res.trace[k].objective <= res.trace[k - 1].objective + 1e-8);
    // Trace decomposition is consistent.
    for (const auto& t : res.trace)
        CHECK(t.objective ==
              doctest::Approx(p.lambda * t.data_fidelity + t.tv).epsilon(1e-9));
}

TEST_CASE("tv trace serialization") {
    save_tv_trace({{0, 3.0, 1.0, 2.0}, {1, 2.5, 0.75, 1.75}}, "test_tv_trace.csv");
    std::ifstream f("test_tv_trace.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header == "iter,objective,data_fidelity,tv");
    std::string row;
    std::getline(f, row);
    CHECK(row.substr(0, 2) == "0,");
    std::filesystem::remove("test_tv_trace.csv");
}
