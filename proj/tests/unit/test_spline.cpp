#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracle.hpp"
#include "tpbs/error.hpp"
#include "tpbs/spline.hpp"

using namespace tpbs;

TEST_CASE("build_space: degree 0 with two basis functions gives half-unit bins") {
    const auto s = build_space(2, 0);
    CHECK(s.knots == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(eval_basis(s, 0.25, 0).first == 0);
    CHECK(eval_basis(s, 0.75, 0).first == 1);
    CHECK(eval_basis(s, 0.5, 0).first == 1);
}

TEST_CASE("build_space: linear with two basis functions is 1-x and x") {
    const auto s = build_space(2, 1);
    CHECK(s.knots == std::vector<double>{0.0, 0.0, 1.0, 1.0});
    CHECK(s.quad_order == 2);
}

TEST_CASE("build_space: 100 cubic basis functions span 97 uniform intervals") {
    const auto s = build_space(100, 3);
    CHECK(s.num_spans() == 97);
    CHECK(s.knots.size() == 104u);
    CHECK(s.knots == oracle::knots(100, 3));
}

TEST_CASE("build_space rejects too few basis functions") {
    CHECK_THROWS_AS(build_space(3, 3), Error);
    try {
        build_space(1, 1);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidArgument);
    }
}

TEST_CASE("eval_basis: hat functions at 0.25") {
    const auto s = build_space(2, 1);
    const auto v = eval_basis(s, 0.25, 0);
    CHECK(v.first == 0);
    CHECK(v.values[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(v.values[1] == doctest::Approx(0.25).epsilon(1e-15));
    const auto d = eval_basis(s, 0.25, 1);
    CHECK(d.first == 0);
    CHECK(d.values[0] == -1.0);
    CHECK(d.values[1] == 1.0);
}

TEST_CASE("eval_basis: partition of unity for K=5, p=3 at 0.5") {
    const auto v = eval_basis(build_space(5, 3), 0.5, 0);
    CHECK(std::accumulate(v.values.begin(), v.values.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("eval_basis rejects points outside [0, 1]") {
    const auto s = build_space(6, 2);
    for (double x : {-1e-12, 1.0 + 1e-12, std::nan("")}) {
        try {
            eval_basis(s, x, 0);
            FAIL("expected a domain error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Domain);
        }
    }
}

TEST_CASE("eval_basis matches the recursive dense oracle; partition of unity and zero derivative sum") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int p = 0; p <= 5; ++p)
        for (int K : {p + 1, p + 2, 9, 23}) {
            const auto s = build_space(K, p);
            const auto t = oracle::knots(K, p);
            std::vector<double> xs{0.0, 1.0, 0.5};
            for (int i = 0; i < 40; ++i) xs.push_back(u(rng));
            for (int i = 0; i <= K - p; ++i) xs.push_back(static_cast<double>(i) / (K - p));
            for (double x : xs)
                for (int d = 0; d <= 1; ++d) {
                    const auto v = eval_basis(s, x, d);
                    const auto ref = oracle::dense_basis(t, p, x, d);
                    double sum = 0.0;
                    for (int k = 0; k < K; ++k) {
                        const int j = k - v.first;
                        const double got = (j >= 0 && j <= p) ? v.values[j] : 0.0;
                        CHECK(std::abs(got - ref[k]) < 1e-12 * (1.0 + std::abs(ref[k])));
                        sum += got;
                    }
                    CHECK(std::abs(sum - (d == 0 ? 1.0 : 0.0)) < 1e-12 * (d == 0 ? 1.0 : K));
                }
        }
}

namespace {

void check_gram_against_oracle(int K, int p, double a, double b, int d, double tol) {
    const auto s = build_space(K, p);
    const auto g = gram(s, a, b, d);
    const auto ref = oracle::gram(K, p, a, b, d);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            const double r = ref[static_cast<std::size_t>(i) * K + j];
            INFO("K=" << K << " p=" << p << " [" << a << "," << b << "] d=" << d << " i=" << i << " j=" << j);
            CHECK(std::abs(g.at(i, j) - r) < tol * (1.0 + std::abs(r)));
            CHECK(g.at(i, j) == g.at(j, i));
            if (std::abs(i - j) > p) CHECK(g.at(i, j) == 0.0);
        }
}

}  // namespace

TEST_CASE("gram: linear hats on [0,1]") {
    const auto s = build_space(2, 1);
    const auto g0 = gram(s, 0.0, 1.0, 0);
    CHECK(g0.at(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(g0.at(0, 1) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(g0.at(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const auto g1 = gram(s, 0.0, 1.0, 1);
    CHECK(g1.at(0, 0) == doctest::Approx(1.0));
    CHECK(g1.at(0, 1) == doctest::Approx(-1.0));
    CHECK(g1.at(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("gram: linear hats on [0, 0.5] against exact polynomial integration") {
    // 1 - x and x as ascending coefficient lists.
    const std::vector<double> b0{1.0, -1.0}, b1{0.0, 1.0};
    const double e00 = oracle::poly_product_integral(b0, b0, 0.0, 0.5);
    const double e01 = oracle::poly_product_integral(b0, b1, 0.0, 0.5);
    const double e11 = oracle::poly_product_integral(b1, b1, 0.0, 0.5);
    CHECK(e00 == doctest::Approx(7.0 / 24.0).epsilon(1e-15));
    CHECK(e01 == doctest::Approx(1.0 / 12.0).epsilon(1e-15));
    CHECK(e11 == doctest::Approx(1.0 / 24.0).epsilon(1e-15));
    const auto g = gram(build_space(2, 1), 0.0, 0.5, 0);
    CHECK(std::abs(g.at(0, 0) - e00) < 1e-15);
    CHECK(std::abs(g.at(0, 1) - e01) < 1e-15);
    CHECK(std::abs(g.at(1, 1) - e11) < 1e-15);
}

TEST_CASE("gram matches the 64-point composite oracle for p <= 3") {
    for (int p = 0; p <= 3; ++p)
        for (int K : {p + 1, 7, 12})
            for (int d = 0; d <= 1; ++d) {
                check_gram_against_oracle(K, p, 0.0, 1.0, d, 1e-12);
                check_gram_against_oracle(K, p, 0.13, 0.77, d, 1e-12);
                check_gram_against_oracle(K, p, 0.0, 0.3, d, 1e-12);
                check_gram_against_oracle(K, p, 0.9, 1.0, d, 1e-12);
            }
}

TEST_CASE("gram is additive over adjacent intervals") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int p = 0; p <= 4; ++p) {
        const auto s = build_space(11, p);
        for (int trial = 0; trial < 5; ++trial) {
            const double a = u(rng);
            for (int d = 0; d <= 1; ++d) {
                const auto whole = gram(s, 0.0, 1.0, d);
                const auto left = gram(s, 0.0, a, d);
                const auto right = gram(s, a, 1.0, d);
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j)
                        CHECK(std::abs(whole.at(i, j) - left.at(i, j) - right.at(i, j)) < 1e-12);
            }
        }
    }
}

TEST_CASE("gram: empty interval is zero, reversed interval is rejected") {
    const auto s = build_space(6, 3);
    const auto g = gram(s, 0.4, 0.4, 0);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) CHECK(g.at(i, j) == 0.0);
    CHECK_THROWS_AS(gram(s, 0.6, 0.4, 0), Error);
}

TEST_CASE("gram: value Gram positive definite, derivative Gram has constants in its kernel") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int p = 0; p <= 3; ++p) {
        const int K = 9;
        const auto s = build_space(K, p);
        const auto g0 = gram(s, 0.0, 1.0, 0);
        const auto g1 = gram(s, 0.0, 1.0, 1);
        for (int t = 0; t < 20; ++t) {
            std::vector<double> c(K);
            for (double& v : c) v = n(rng);
            CHECK(g0.quadratic_form(c) > 0.0);
            CHECK(g1.quadratic_form(c) >= -1e-12);
            CHECK(gram(s, 0.2, 0.45, 0).quadratic_form(c) >= 0.0);
        }
        const std::vector<double> ones(K, 1.0);
        CHECK(std::abs(g1.quadratic_form(ones)) < 1e-12);
        CHECK(g0.quadratic_form(ones) == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("banded multiply and bilinear form agree with the dense definition") {
    const auto s = build_space(10, 3);
    const auto g = gram(s, 0.1, 0.6, 1);
    std::vector<double> c(10), e(10), out(10);
    for (int i = 0; i < 10; ++i) {
        c[i] = std::sin(i + 1.0);
        e[i] = std::cos(2.0 * i);
    }
    g.multiply(c, out);
    double bil = 0.0;
    for (int i = 0; i < 10; ++i) {
        double row = 0.0;
        for (int j = 0; j < 10; ++j) row += g.at(i, j) * c[j];
        CHECK(std::abs(out[i] - row) < 1e-13);
        bil += e[i] * row;
    }
    CHECK(std::abs(g.bilinear_form(e, c) - bil) < 1e-13);
}

TEST_CASE("basis integrals match quadrature of each basis function") {
    for (int p = 0; p <= 4; ++p) {
        const int K = 8;
        const auto s = build_space(K, p);
        const auto m = basis_integrals(s);
        const auto t = oracle::knots(K, p);
        double total = 0.0;
        for (int k = 0; k < K; ++k) {
            const double ref = oracle::integrate([&](double x) { return oracle::dense_basis(t, p, x, 0)[k]; },
                                                 oracle::breakpoints(t, 0.0, 1.0));
            CHECK(std::abs(m[k] - ref) < 1e-14);
            total += m[k];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    }
}
