#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "oracle.hpp"
#include "suite.hpp"
#include "tpbs/error.hpp"
#include "tpbs/marginal.hpp"

using namespace tpbs;

namespace {

// g(x) = x1 * x2 with linear hats.
TpbsModel bilinear() {
    TpbsModel m(uniform_spaces(2, 2, 1), 1, 1);
    for (int n = 0; n < 2; ++n) m.factor(n, 0)[1] = 1.0;
    m.out_vector(0)[0] = 1.0;
    return m;
}

const ObservationMask kFirstOnly{{1, 0}};

}  // namespace

TEST_CASE("estimators on x1*x2 with x2 missing") {
    const auto m = bilinear();
    const std::vector<double> x{0.6, 0.123};
    const std::vector<double> means{0.4, 0.3};
    CHECK(predict_full(m, x)[0] == doctest::Approx(0.6 * 0.123));
    CHECK(predict_mean_impute(m, kFirstOnly, x, means)[0] == doctest::Approx(0.18));
    CHECK(predict_uniform_marginal(m, kFirstOnly, x)[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(predict_density_marginal(m, DensityModel::uniform(2), kFirstOnly, x)[0] ==
          doctest::Approx(0.3).epsilon(1e-14));

    // All mass of x2 on [0.5, 1]: E[x2] = 0.75.
    DensityModel upper(1, {2, 2});
    upper.weights() = {1.0};
    upper.marginal(0, 0)[0] = upper.marginal(0, 0)[1] = 1.0;
    upper.marginal(0, 1)[0] = 0.0;
    upper.marginal(0, 1)[1] = 2.0;
    CHECK(predict_density_marginal(m, upper, kFirstOnly, x)[0] == doctest::Approx(0.45).epsilon(1e-14));

    const Marginalizer mg(m, upper);
    CHECK(mg.density(kFirstOnly, x)[0] == doctest::Approx(0.45).epsilon(1e-14));
    CHECK(Marginalizer(m).uniform(kFirstOnly, x)[0] == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("values at missing coordinates are ignored") {
    const auto m = oracle::random_model(31, {.max_dim = 4, .max_rank = 3, .max_basis = 8, .max_degree = 3,
                                             .min_degree = 0, .max_outputs = 2});
    const auto N = static_cast<std::size_t>(m.input_dim());
    if (N < 2) return;
    ObservationMask mask = ObservationMask::all_observed(N);
    mask.observed[0] = 0;
    std::vector<double> a(N, 0.4), b(N, 0.4);
    b[0] = 0.99;
    CHECK(predict_uniform_marginal(m, mask, a) == predict_uniform_marginal(m, mask, b));
}

TEST_CASE("complete observation reduces every estimator to forward") {
    const auto m = oracle::random_model(32, {});
    const auto N = static_cast<std::size_t>(m.input_dim());
    const std::vector<double> x(N, 0.37);
    const auto full = predict_full(m, x);
    const auto mask = ObservationMask::all_observed(N);
    const std::vector<double> means(N, 0.5);
    CHECK(predict_mean_impute(m, mask, x, means) == full);
    CHECK(predict_uniform_marginal(m, mask, x) == full);
    CHECK(predict_density_marginal(m, DensityModel::uniform(N), mask, x) == full);
}

TEST_CASE("marginalization matches the quadrature oracle") {
    const auto res = oracle::check_marginalization(20, 41);
    INFO(oracle::format_result(res));
    CHECK(res.passed);
}

TEST_CASE("mask_suite hides exactly the requested number of coordinates") {
    const auto masks = mask_suite(50, 6, 4, 7);
    REQUIRE(masks.size() == 50);
    std::set<std::vector<std::uint8_t>> distinct;
    for (const auto& mk : masks) {
        CHECK(mk.dim() == 6);
        CHECK(mk.num_missing() == 4);
        distinct.insert(mk.observed);
    }
    CHECK(distinct.size() > 5);
    const auto again = mask_suite(50, 6, 4, 7);
    for (std::size_t i = 0; i < masks.size(); ++i) CHECK(again[i].observed == masks[i].observed);
    CHECK(mask_suite(3, 4, 0, 1)[0].complete());
    CHECK_THROWS_AS(mask_suite(3, 4, 4, 1), Error);
}

TEST_CASE("estimator names and argument checks") {
    CHECK(parse_estimator("pdf") == Estimator::Density);
    CHECK(parse_estimator("mean") == Estimator::MeanImpute);
    CHECK(std::string(to_string(Estimator::Uniform)) == "uniform");
    CHECK_THROWS_AS(parse_estimator("median"), Error);

    const auto m = bilinear();
    const std::vector<double> x{0.5, 0.5};
    CHECK_THROWS_AS(predict_uniform_marginal(m, ObservationMask{{1, 0, 1}}, x), Error);
    CHECK_THROWS_AS(predict_mean_impute(m, kFirstOnly, x, std::vector<double>{0.5}), Error);
    CHECK_THROWS_AS(predict_density_marginal(m, DensityModel::uniform(3), kFirstOnly, x), Error);

    // The observed coordinate falls where the density has no mass.
    DensityModel left(1, {2, 1});
    left.weights() = {1.0};
    left.marginal(0, 0)[0] = 2.0;
    left.marginal(0, 0)[1] = 0.0;
    left.marginal(0, 1)[0] = 1.0;
    const std::vector<double> right{0.9, 0.5};
    try {
        predict_density_marginal(m, left, ObservationMask{{1, 0}}, right);
        FAIL("expected a numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
    }
}

TEST_CASE("prediction CSV layout") {
    const std::vector<PredictionRow> rows{{0, Estimator::Full, 1.5, 2.0, 0}, {3, Estimator::Density, -0.25, 1.0, 2}};
    std::ostringstream os;
    write_predictions(os, rows);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "sample_id,estimator,prediction,target,num_missing");
    std::getline(is, line);
    CHECK(line.rfind("0,full,1.5,2", 0) == 0);
    std::getline(is, line);
    CHECK(line.rfind("3,pdf,-0.25,1", 0) == 0);
}
