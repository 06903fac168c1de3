#include <doctest.h>

#include <cmath>

#include "csdis/dcor.hpp"
#include "csdis/errors.hpp"
#include "support/oracles.hpp"

using namespace csdis;
using namespace csdis::testing;

TEST_CASE("pairwise distances") {
    Matrix x(2, 2);
    x << 0, 0, 3, 4;
    const auto d = pairwise_distances(x);
    CHECK(d(0, 1) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(d(1, 0) == d(0, 1));
    CHECK(d(0, 0) == 0.0);

    Matrix same(3, 2);
    same << 1, 2, 1, 2, 1, 2;
    CHECK(pairwise_distances(same).cwiseAbs().maxCoeff() == 0.0);

    CounterRng rng(5);
    const auto r = random_matrix(4, 2, rng);
    const auto ref = naive_distances(to_rows(r));
    const auto got = pairwise_distances(r);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(std::abs(got(i, j) - ref[i][j]) < 1e-12);
}

TEST_CASE("double centering") {
    Matrix c = Matrix::Constant(4, 4, 2.5);
    CHECK(double_center(c).entries.cwiseAbs().maxCoeff() < 1e-15);
    CHECK(double_center(Matrix::Zero(3, 3)).entries.cwiseAbs().maxCoeff() == 0.0);

    Matrix d(2, 2);
    d << 0, 1, 1, 0;
    const auto a = double_center(d).entries;
    CHECK(a(0, 0) == doctest::Approx(-0.5));
    CHECK(a(0, 1) == doctest::Approx(0.5));
    CHECK(a(1, 0) == doctest::Approx(0.5));
    CHECK(a(1, 1) == doctest::Approx(-0.5));
}

TEST_CASE("dcov") {
    Matrix constant = Matrix::Constant(5, 2, 1.0);
    CounterRng rng(9);
    CHECK(dcov(constant, random_matrix(5, 3, rng)) == 0.0);

    // exact: A = (1/9)[[-8,1,7],[1,-2,1],[7,1,-8]], Σ A² = 360/81, over N² = 40/81
    Matrix x(3, 1);
    x << 0, 1, 2;
    CHECK(std::abs(dcov(x, x) - std::sqrt(40.0) / 9.0) < 1e-15);

    const auto a = random_matrix(8, 3, rng), b = random_matrix(8, 5, rng);
    CHECK(dcov(a, b) == dcov(b, a));
}

TEST_CASE("dcor against the literal oracle") {
    CounterRng rng(17);
    Matrix x = random_matrix(6, 3, rng);
    CHECK(dcor(x, x).dcor == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < 20; ++i) {
        const auto a = random_matrix(6, 1 + rng.below(5), rng);
        const auto b = random_matrix(6, 1 + rng.below(5), rng);
        const double ref = naive_dcor(to_rows(a), to_rows(b));
        CHECK(std::abs(dcor(a, b).dcor - ref) <= 1e-10 * ref);
    }
}

TEST_CASE("dcor degenerate input") {
    CounterRng rng(2);
    CHECK_THROWS_AS(dcor(Matrix::Constant(6, 2, 3.0), random_matrix(6, 2, rng)), DegenerateInput);
    CHECK_THROWS_AS(dcor(random_matrix(6, 2, rng), random_matrix(5, 2, rng)), ShapeError);
}

TEST_CASE("blocked estimator") {
    CounterRng rng(23);
    const auto x = random_matrix(64, 4, rng), y = random_matrix(64, 7, rng);
    const double full = dcor(x, y).dcor;
    CHECK(std::abs(dcor_blocked(x, y, 1).dcor - full) < 1e-10);
    CHECK(std::abs(dcor_blocked(x, y, 64).dcor - full) < 1e-10);
    CHECK(std::abs(dcor_blocked(x, y, 7).dcor - full) < 1e-10);
    CHECK(dcor_blocked(x, y, 1000).dcor == dcor_blocked(x, y, 64).dcor);
}

TEST_CASE("blocked estimator on image-sized rows") {
    CounterRng rng(29);
    const auto x = random_matrix(2048, 12288, rng, 0.0, 1.0);
    const auto y = random_matrix(2048, 3, rng, 0.0, 1.0);
    CHECK(std::abs(dcor_blocked(x, y, 256).dcor - dcor(x, y).dcor) < 1e-10);
}
