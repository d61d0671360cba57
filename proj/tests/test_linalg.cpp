#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsdelab/linalg.hpp"
#include "bsdelab/rng.hpp"

using namespace bsdelab;

namespace {

Mat random_symmetric(Rng& rng, std::size_t n) {
    Mat a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = rng.uniform(-2.0, 2.0);
    return a;
}

Mat random_psd(Rng& rng, std::size_t n) {
    Mat g = random_symmetric(rng, n);
    return g.multiply(g.transposed());
}

}  // namespace

TEST_CASE("eigensym reconstructs the matrix") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(6);
        const Mat a = random_symmetric(rng, n);
        const SymEig eig = eigensym(a);
        for (std::size_t j = 0; j < n; ++j) {
            Vec v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = eig.vectors(i, j);
            const Vec av = a.apply(v);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(std::fabs(av[i] - eig.values[j] * v[i]) < 1e-11 * (1.0 + a.max_abs()));
        }
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t l = j; l < n; ++l) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += eig.vectors(i, j) * eig.vectors(i, l);
                CHECK(std::fabs(dot - (j == l ? 1.0 : 0.0)) < 1e-11);
            }
    }
}

TEST_CASE("matrix_sqrt_psd on fixed inputs") {
    CHECK((matrix_sqrt_psd(Mat::identity(3)) - Mat::identity(3)).max_abs() < 1e-12);

    const Mat d = Mat::diag(Vec{4.0, 9.0});
    const Mat r = matrix_sqrt_psd(d);
    CHECK(r(0, 0) == doctest::Approx(2.0));
    CHECK(r(1, 1) == doctest::Approx(3.0));
    CHECK(std::fabs(r(0, 1)) < 1e-12);

    Mat a(2, 2);
    a(0, 0) = a(1, 1) = 2.0;
    a(0, 1) = a(1, 0) = 1.0;
    const Mat s = matrix_sqrt_psd(a);
    CHECK(s(0, 0) == doctest::Approx(1.3660254037844386).epsilon(1e-9));
    CHECK(s(0, 1) == doctest::Approx(0.3660254037844386).epsilon(1e-9));
    const Mat ss = s.multiply(s);
    CHECK((ss - a).max_abs() < 1e-9 * (1.0 + a.max_abs()));
}

TEST_CASE("matrix_sqrt_psd error paths") {
    Mat ns(2, 2);
    ns(0, 1) = 1.0;  // not symmetric
    CHECK_THROWS_AS(matrix_sqrt_psd(ns), std::invalid_argument);

    const Mat neg = Mat::diag(Vec{1.0, -0.5});
    CHECK_THROWS_AS(matrix_sqrt_psd(neg), std::invalid_argument);

    // eigenvalues in [-1e-12, 0) are clamped, not rejected
    const Mat tiny = Mat::diag(Vec{1.0, -0.5e-12});
    const Mat r = matrix_sqrt_psd(tiny);
    CHECK(r(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("sqrt of r*r recovers r for PSD r") {
    Rng rng(202);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + rng.below(5);
        const Mat r = matrix_sqrt_psd(random_psd(rng, n));
        const Mat back = matrix_sqrt_psd(r.multiply(r));
        CHECK((back - r).max_abs() < 1e-9 * (1.0 + r.max_abs()));
    }
}

TEST_CASE("pinv_psd is a pseudo-inverse, including singular input") {
    Rng rng(303);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + rng.below(5);
        Mat a = random_psd(rng, n);
        if (trial % 2 == 0 && n > 1) {
            Mat g(n, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j + 1 < n; ++j) g(i, j) = rng.uniform(-1.0, 1.0);
            a = g.multiply(g.transposed());
        }
        const Mat p = pinv_psd(a);
        const Mat apa = a.multiply(p).multiply(a);
        CHECK((apa - a).max_abs() < 1e-8 * (1.0 + a.max_abs()));
    }
}

TEST_CASE("solve_psd_min_norm solves consistent systems") {
    Rng rng(404);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + rng.below(5);
        const Mat a = random_psd(rng, n);
        Vec x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = rng.uniform(-1.0, 1.0);
        const Vec b = a.apply(x);
        const Vec sol = solve_psd_min_norm(a, b);
        CHECK((a.apply(sol) - b).max_abs() < 1e-8 * (1.0 + b.max_abs()));
    }
}
