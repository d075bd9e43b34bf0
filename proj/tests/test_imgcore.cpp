#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sr/image.hpp"
#include "sr/rng.hpp"

using namespace sr;

TEST_CASE("fd_h stencil") {
    Image c(5, 7, 3.25);
    const Image gc = fd_h(c);
    for (double v : gc.data) CHECK(v == 0.0);

    Image x(1, 3);
    x(0, 0) = 0.0;
    x(0, 1) = 1.0;
    x(0, 2) = 3.0;
    const Image g = fd_h(x);
    CHECK(g(0, 0) == 1.0);
    CHECK(g(0, 1) == 2.0);
    CHECK(g(0, 2) == 0.0);

    Image col(4, 1);
    for (std::size_t i = 0; i < 4; ++i) col(i, 0) = static_cast<double>(i * i);
    for (double v : fd_h(col).data) CHECK(v == 0.0);
}

TEST_CASE("fd_v stencil and transpose symmetry") {
    Image c(3, 3, -1.5);
    for (double v : fd_v(c).data) CHECK(v == 0.0);

    Image x(3, 1);
    x(0, 0) = 0.0;
    x(1, 0) = 1.0;
    x(2, 0) = 3.0;
    const Image g = fd_v(x);
    CHECK(g(0, 0) == 1.0);
    CHECK(g(1, 0) == 2.0);
    CHECK(g(2, 0) == 0.0);

    // fd_v(x) = transpose(fd_h(transpose(x)))
    RngState rng(7);
    Image a = gaussian_field(6, 4, rng);
    Image at(4, 6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j) at(j, i) = a(i, j);
    const Image lhs = fd_v(a);
    const Image rhs_t = fd_h(at);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(lhs(i, j) == rhs_t(j, i));
}

TEST_CASE("fd_h twice on a linear ramp vanishes in the interior") {
    Image x(3, 8);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 8; ++j) x(i, j) = 2.0 * static_cast<double>(j) + 1.0;
    const Image g2 = fd_h(fd_h(x));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j + 2 < 8; ++j) CHECK(g2(i, j) == 0.0);
}

TEST_CASE("row sums of fd_h telescope") {
    RngState rng(11);
    const Image x = gaussian_field(5, 9, rng);
    const Image g = fd_h(x);
    for (std::size_t i = 0; i < 5; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 9; ++j) s += g(i, j);
        CHECK(s == doctest::Approx(x(i, 8) - x(i, 0)).epsilon(1e-12));
    }
}

TEST_CASE("finite difference adjoints are exact transposes") {
    RngState rng(3);
    const Image x = gaussian_field(7, 5, rng);
    const Image u = gaussian_field(7, 5, rng);
    CHECK(dot(fd_h(x), u) == doctest::Approx(dot(x, fd_h_adjoint(u))).epsilon(1e-12));
    CHECK(dot(fd_v(x), u) == doctest::Approx(dot(x, fd_v_adjoint(u))).epsilon(1e-12));
}

TEST_CASE("gaussian_field moments") {
    RngState rng(12345);
    const std::size_t n = 1000;
    double mean = 0.0, m2 = 0.0;
    std::size_t total = 0;
    for (std::size_t rep = 0; rep < n; ++rep) {
        const Image z = gaussian_field(25, 40, rng); // 1000 values per draw
        for (double v : z.data) {
            mean += v;
            m2 += v * v;
            ++total;
        }
    }
    CHECK(total == 1000000);
    mean /= static_cast<double>(total);
    m2 /= static_cast<double>(total);
    CHECK(std::abs(mean) < 4e-3);
    CHECK(std::abs(m2 - mean * mean - 1.0) < 0.01);
}

TEST_CASE("rng determinism and stream separation") {
    RngState a(99), b(99);
    const Image za = gaussian_field(16, 16, a);
    const Image zb = gaussian_field(16, 16, b);
    for (std::size_t i = 0; i < za.size(); ++i) CHECK(za.data[i] == zb.data[i]);

    RngState base(99);
    RngState s1 = base.derive(1), s2 = base.derive(2);
    Image z1 = gaussian_field(8, 8, s1), z2 = gaussian_field(8, 8, s2);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < z1.size(); ++i)
        if (z1.data[i] != z2.data[i]) ++diff;
    CHECK(diff > 0);

    RngState u(5);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        CHECK(u.uniform_below(7) < 7);
    }
}

TEST_CASE("image file round trip") {
    RngState rng(21);
    Image x = gaussian_field(13, 17, rng);
    const std::string path = "test_imgcore_roundtrip.img";
    save_image(x, path);
    const Image y = load_image(path);
    REQUIRE(y.rows == 13);
    REQUIRE(y.cols == 17);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(y.data[i] == doctest::Approx(x.data[i]).epsilon(1e-6)); // float32 storage
    std::filesystem::remove(path);

    CHECK_THROWS(load_image("does_not_exist_anywhere.img"));
}

TEST_CASE("image arithmetic helpers") {
    RngState rng(2);
    const Image a = gaussian_field(4, 4, rng);
    const Image b = gaussian_field(4, 4, rng);
    const Image s = a + b;
    const Image d = a - b;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(s.data[i] == a.data[i] + b.data[i]);
        CHECK(d.data[i] == a.data[i] - b.data[i]);
    }
    CHECK(norm2(2.0 * a) == doctest::Approx(2.0 * norm2(a)).epsilon(1e-12));
    CHECK(all_finite(a));
    Image bad = a;
    bad.data[5] = std::nan("");
    CHECK(!all_finite(bad));
}
