#include <doctest.h>

#include <cmath>
#include <random>
#include <functional>

#include "oracle.hpp"
#include "suite.hpp"
#include "tpbs/dirichlet.hpp"
#include "tpbs/error.hpp"

using namespace tpbs;

namespace {

TpbsModel bilinear() {
    TpbsModel m(uniform_spaces(2, 2, 1), 1, 1);
    for (int n = 0; n < 2; ++n) {
        m.factor(n, 0)[0] = 0.0;
        m.factor(n, 0)[1] = 1.0;
    }
    m.out_vector(0)[0] = 1.0;
    return m;
}

LdeConfig points_cfg(double rho, std::vector<std::vector<double>> pts) {
    LdeConfig cfg;
    cfg.rho = rho;
    cfg.points = Matrix(pts.size(), pts.empty() ? 0 : pts[0].size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts[i].size(); ++j) cfg.points(i, j) = pts[i][j];
    return cfg;
}

}  // namespace

TEST_CASE("DE of a constant model is zero") {
    const auto m = init_model(3, 4, 2, uniform_spaces(3, 8, 3), 0, 0.0);
    CHECK(std::abs(dirichlet_energy(m)) < 1e-14);
}

TEST_CASE("DE of x1*x2 is 2/3") {
    CHECK(dirichlet_energy(bilinear()) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("DE matches the brute-force quadrature oracle on random models (N<=4, R<=5, K<=8, p<=3)") {
    const auto res = oracle::check_de_oracle(60, 9);
    INFO(oracle::format_result(res));
    CHECK(res.passed);
}

TEST_CASE("DE matches on a 3-D, rank-3 model with 100-knot-scale spaces") {
    const auto m = oracle::random_model(5, {.max_dim = 3, .max_rank = 3, .max_basis = 3, .max_degree = 3,
                                            .min_degree = 3, .max_outputs = 1});
    CHECK(oracle::rel_err(dirichlet_energy(m), oracle::dirichlet_energy(m)) < 1e-9);
}

TEST_CASE("DE is homogeneous of degree 2 in the output vectors") {
    const auto m = oracle::random_model(21, {});
    auto s = m;
    for (double& v : s.out_vectors()) v *= 3.0;
    CHECK(dirichlet_energy(s) == doctest::Approx(9.0 * dirichlet_energy(m)).epsilon(1e-13));
}

TEST_CASE("decomposition: rank one") {
    auto m = oracle::random_model(4, {.max_dim = 3, .max_rank = 1, .max_basis = 8, .max_degree = 3,
                                      .min_degree = 1, .max_outputs = 1});
    const auto dec = de_decomposition(m);
    CHECK(dec.a0(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(dec.z(0, 0) == doctest::Approx(dec.a1(0, 0)).epsilon(1e-15));
    CHECK(dec.s[0] * dec.s[0] * dec.a1(0, 0) == doctest::Approx(dirichlet_energy(m)).epsilon(1e-12));
}

TEST_CASE("decomposition: identical components have zero angle") {
    auto m = oracle::random_model(8, {.max_dim = 3, .max_rank = 2, .max_basis = 8, .max_degree = 3,
                                      .min_degree = 1, .max_outputs = 2});
    if (m.rank() < 2) m = TpbsModel(m.spaces(), 2, m.output_dim());
    for (int n = 0; n < m.input_dim(); ++n)
        for (std::size_t k = 0; k < m.factor(n, 0).size(); ++k) m.factor(n, 1)[k] = m.factor(n, 0)[k] = 0.3 + k;
    for (int o = 0; o < m.output_dim(); ++o) m.out_vector(1)[o] = m.out_vector(0)[o] = 1.0 + o;
    const auto dec = de_decomposition(m);
    CHECK(dec.a0(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(dec.a0(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("decomposition reproduces DE on random rank-2 models") {
    for (int i = 0; i < 30; ++i) {
        auto m = oracle::random_model(500 + i, {.max_dim = 4, .max_rank = 2, .max_basis = 8, .max_degree = 3,
                                                .min_degree = 0, .max_outputs = 2});
        const auto dec = de_decomposition(m);
        if (dec.any_degenerate) continue;
        const double de = dirichlet_energy(m);
        CHECK(std::abs(dec.quadratic_value() - de) / (1.0 + de) < 1e-9);
        const auto ev = dec.z_eigenvalues();
        CHECK(ev.size() == dec.s.size());
    }
}

TEST_CASE("decomposition flags orthogonal factor pairs and refuses zero factors") {
    TpbsModel m(uniform_spaces(2, 2, 0), 2, 1);
    // Component 0 lives on the left bin of x1, component 1 on the right bin.
    m.factor(0, 0)[0] = 1.0;
    m.factor(0, 1)[1] = 1.0;
    for (int r = 0; r < 2; ++r) {
        m.factor(1, r)[0] = m.factor(1, r)[1] = 1.0;
        m.out_vector(r)[0] = 1.0;
    }
    const auto dec = de_decomposition(m);
    CHECK(dec.any_degenerate);
    CHECK(dec.is_degenerate(0, 1));
    CHECK(!dec.is_degenerate(0, 0));
    CHECK(std::isnan(dec.quadratic_value()));
    CHECK(dec.z_eigenvalues().empty());
    CHECK(dirichlet_energy(m) == 0.0);

    std::fill(m.factor(1, 1).begin(), m.factor(1, 1).end(), 0.0);
    try {
        de_decomposition(m);
        FAIL("expected degenerate error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Degenerate);
    }
    CHECK(std::isfinite(dirichlet_energy(m)));
}

TEST_CASE("LDE: covering box equals DE") {
    for (int i = 0; i < 10; ++i) {
        const auto m = oracle::random_model(40 + i, {});
        const std::vector<double> centre(m.input_dim(), 0.5);
        const double lde = local_dirichlet_energy(m, points_cfg(0.5, {centre}));
        const double de = dirichlet_energy(m);
        CHECK(std::abs(lde - de) <= 1e-12 * (1.0 + de));
    }
}

TEST_CASE("LDE: x1*x2 on [0.25, 0.75]^2 is 13/96") {
    const double v = local_dirichlet_energy(bilinear(), points_cfg(0.25, {{0.5, 0.5}}));
    CHECK(std::abs(v - 13.0 / 96.0) < 1e-12);
}

TEST_CASE("LDE: empty point set gives zero; energy is monotone in rho; boxes add") {
    const auto m = oracle::random_model(3, {.max_dim = 3, .max_rank = 3, .max_basis = 8, .max_degree = 3,
                                            .min_degree = 1, .max_outputs = 1});
    const int N = m.input_dim();
    LdeConfig empty;
    empty.points = Matrix(0, N);
    CHECK(local_dirichlet_energy(m, empty) == 0.0);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> a(2, std::vector<double>(N)), b(3, std::vector<double>(N));
    for (auto& p : a)
        for (double& v : p) v = u(rng);
    for (auto& p : b)
        for (double& v : p) v = u(rng);
    auto ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    double prev = 0.0;
    for (double rho : {0.01, 0.05, 0.1, 0.25, 0.5}) {
        const double cur = local_dirichlet_energy(m, points_cfg(rho, ab));
        CHECK(cur >= prev - 1e-12);
        prev = cur;
        const double sum = local_dirichlet_energy(m, points_cfg(rho, a)) + local_dirichlet_energy(m, points_cfg(rho, b));
        CHECK(std::abs(cur - sum) <= 1e-12 * (1.0 + cur));
        CHECK(cur <= ab.size() * dirichlet_energy(m) + 1e-9);
    }
    const auto per_box = local_dirichlet_energy_per_box(m, points_cfg(0.2, ab));
    CHECK(per_box.size() == ab.size());
}

TEST_CASE("LDE matches the quadrature oracle") {
    for (int i = 0; i < 10; ++i) {
        const auto m = oracle::random_model(70 + i, {.max_dim = 3, .max_rank = 3, .max_basis = 8, .max_degree = 3,
                                                     .min_degree = 0, .max_outputs = 2});
        std::mt19937_64 rng(i);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<std::vector<double>> pts(4, std::vector<double>(m.input_dim()));
        for (auto& p : pts)
            for (double& v : p) v = u(rng);
        const double got = local_dirichlet_energy(m, points_cfg(0.15, pts));
        const double ref = oracle::local_dirichlet_energy(m, pts, 0.15);
        CHECK(oracle::rel_err(got, ref, 1e-12) < 1e-9);
    }
}

TEST_CASE("LDE rejects rho <= 0 and points outside the cube") {
    const auto m = oracle::random_model(1, {});
    const std::vector<double> centre(m.input_dim(), 0.5);
    CHECK_THROWS_AS(local_dirichlet_energy(m, points_cfg(0.0, {centre})), Error);
    std::vector<double> out = centre;
    out[0] = 1.5;
    CHECK_THROWS_AS(local_dirichlet_energy(m, points_cfg(0.1, {out})), Error);
}

namespace {

std::vector<double> flat(const ParamGrad& g) {
    std::vector<double> v = g.coeffs;
    v.insert(v.end(), g.out.begin(), g.out.end());
    return v;
}

std::vector<double> fd_energy(const TpbsModel& m, const std::function<double(const TpbsModel&)>& e) {
    std::vector<double> params = m.coeffs();
    params.insert(params.end(), m.out_vectors().begin(), m.out_vectors().end());
    const std::size_t nc = m.coeffs().size();
    return oracle::central_difference(
        [&](std::span<const double> p) {
            TpbsModel t = m;
            std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(nc), t.coeffs().begin());
            std::copy(p.begin() + static_cast<std::ptrdiff_t>(nc), p.end(), t.out_vectors().begin());
            return e(t);
        },
        params, 1e-5);
}

double rel_norm(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0, n = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += (a[i] - b[i]) * (a[i] - b[i]);
        n += b[i] * b[i];
    }
    return std::sqrt(d) / std::max(std::sqrt(n), 1e-300);
}

}  // namespace

TEST_CASE("energy gradients match central differences") {
    for (int i = 0; i < 8; ++i) {
        const auto m = oracle::random_model(900 + i, {.max_dim = 2, .max_rank = 2, .max_basis = 6, .max_degree = 3,
                                                      .min_degree = 1, .max_outputs = 2});
        CHECK(rel_norm(flat(grad_dirichlet_energy(m)), fd_energy(m, [](const TpbsModel& t) {
                  return dirichlet_energy(t);
              })) < 1e-5);
        const auto cfg = points_cfg(0.2, {std::vector<double>(m.input_dim(), 0.3),
                                          std::vector<double>(m.input_dim(), 0.8)});
        CHECK(rel_norm(flat(grad_local_dirichlet_energy(m, cfg)), fd_energy(m, [&](const TpbsModel& t) {
                  return local_dirichlet_energy(t, cfg);
              })) < 1e-5);
    }
}

TEST_CASE("energy gradient: zero in v for constant models, linear in v") {
    auto m = init_model(3, 3, 2, uniform_spaces(3, 7, 3), 2, 0.0);
    for (double& v : m.out_vectors()) v = 1.5;
    for (double g : grad_dirichlet_energy(m).out) CHECK(std::abs(g) < 1e-13);

    const auto r = oracle::random_model(12, {});
    auto r2 = r;
    for (double& v : r2.out_vectors()) v *= 2.0;
    const auto g1 = grad_dirichlet_energy(r).out;
    const auto g2 = grad_dirichlet_energy(r2).out;
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
}

TEST_CASE("mutation: a sign flip in the cross terms is caught by the quadrature check") {
    const auto res = oracle::check_de_oracle(30, 4, oracle::sign_flipped_energy);
    CHECK_FALSE(res.passed);
    CHECK(res.failing_seed.has_value());
}

TEST_CASE("exponential smallness identity") {
    const auto res = oracle::check_exponential_smallness(20);
    INFO(oracle::format_result(res));
    CHECK(res.passed);
}
