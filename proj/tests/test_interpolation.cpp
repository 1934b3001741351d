#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tracelab/interpolation.hpp"

using namespace tracelab;
using oracle::HighFloat;

namespace {

std::vector<double> random_coefficients(std::size_t count, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> c(count);
    for (auto& v : c) v = u(rng);
    return c;
}

template <class S>
S eval_poly(const std::vector<double>& coef, S x) {
    S acc = S(0);
    for (std::size_t k = coef.size(); k-- > 0;) acc = acc * x + S(coef[k]);
    return acc;
}

}  // namespace

TEST(GridSpecTest, NodesAreSymmetric) {
    const GridSpec g{0.5, 4};
    const auto nodes = g.nodes();
    ASSERT_EQ(nodes.size(), 9u);
    for (std::size_t i = 0; i < nodes.size(); ++i) EXPECT_DOUBLE_EQ(nodes[i], -nodes[nodes.size() - 1 - i]);
    EXPECT_DOUBLE_EQ(nodes.back(), 0.5);
    EXPECT_THROW((GridSpec{0.0, 2}.validate()), InvalidArgument);
    EXPECT_THROW((GridSpec{0.5, 0}.validate()), InvalidArgument);
}

TEST(LagrangeWeights, ConstantTermOfSquareIsZero) {
    const GridSpec g{0.7, 1};
    const auto w = lagrange_weights(g, 0);
    double s = 0.0;
    for (int i = -1; i <= 1; ++i) s += w[static_cast<std::size_t>(i + 1)] * g.node(i) * g.node(i);
    EXPECT_NEAR(s, 0.0, 1e-15);
}

TEST(LagrangeWeights, LinearCoefficientOfIdentity) {
    for (int n : {1, 3, 8, 12, 20})
        for (double c : {0.1, 0.5, 1.0}) {
            const GridSpec g{c, n};
            const auto w = lagrange_weights(g, 1);
            double s = 0.0;
            for (int i = -n; i <= n; ++i) s += w[static_cast<std::size_t>(i + n)] * g.node(i);
            EXPECT_NEAR(s, 1.0, 1e-10) << "n=" << n << " c=" << c;
        }
}

TEST(LagrangeWeights, OutOfRangeDegreeThrows) {
    EXPECT_THROW(lagrange_weights(GridSpec{0.5, 2}, 5), InvalidArgument);
    EXPECT_THROW(lagrange_weights(GridSpec{0.5, 2}, -1), InvalidArgument);
}

TEST(LagrangeWeights, MatchVandermondeInverse) {
    for (int n : {1, 2, 5, 10})
        for (int j = 0; j <= 2 * n; j += 3) {
            const auto w = lagrange_weights(GridSpec{0.5, n}, j);
            const auto want = oracle::lagrange_row(0.5, n, j);
            for (std::size_t i = 0; i < w.size(); ++i) ASSERT_NEAR(w[i], want[i], 1e-13 * std::max(1.0, std::abs(want[i])));
        }
}

TEST(LagrangeWeights, LargeGridPathMatchesVandermondeInverse) {
    for (int n : {17, 20}) {
        const auto w = lagrange_weights(GridSpec{1.0, n}, 7);
        const auto want = oracle::lagrange_row(1.0, n, 7);
        for (std::size_t i = 0; i < w.size(); ++i) ASSERT_NEAR(w[i], want[i], 1e-12 * std::max(1.0, std::abs(want[i])));
    }
}

TEST(LagrangeWeights, RecoverRandomPolynomialsExactlyInHighPrecision) {
    // n_deg = 10, c = 0.5: the top weights exceed 1e12, so double evaluations
    // of g lose the low digits. Exact evaluations in 100 digits recover every
    // coefficient well below the 1e-8 target.
    const GridSpec g{0.5, 10};
    Rng rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        const auto coef = random_coefficients(21, rng);
        for (int j = 0; j <= 20; ++j) {
            const auto w = lagrange_weights_as<HighFloat>(g, j);
            HighFloat s = 0;
            for (int i = -10; i <= 10; ++i) s += w[static_cast<std::size_t>(i + 10)] * eval_poly<HighFloat>(coef, HighFloat(i) / 20);
            ASSERT_NEAR(static_cast<double>(s), coef[static_cast<std::size_t>(j)], 1e-8) << "j=" << j;
        }
    }
}

TEST(LagrangeWeights, RecoverRandomPolynomialsInDoubleAtModerateDegree) {
    Rng rng(2);
    for (int n : {2, 4, 6}) {
        const GridSpec g{0.5, n};
        const auto coef = random_coefficients(static_cast<std::size_t>(2 * n + 1), rng);
        for (int j = 0; j <= 2 * n; ++j) {
            const auto w = lagrange_weights(g, j);
            double s = 0.0;
            for (int i = -n; i <= n; ++i) s += w[static_cast<std::size_t>(i + n)] * eval_poly<double>(coef, g.node(i));
            ASSERT_NEAR(s, coef[static_cast<std::size_t>(j)], 1e-8) << "n=" << n << " j=" << j;
        }
    }
}

TEST(LagrangeWeights, InterpolationIdentityAtRandomPoints) {
    Rng rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + trial % 8;
        const GridSpec g{0.5, n};
        const auto coef = random_coefficients(static_cast<std::size_t>(2 * n + 1), rng);
        std::vector<std::vector<double>> rows;
        for (int j = 0; j <= 2 * n; ++j) rows.push_back(lagrange_weights(g, j));
        for (int k = 0; k < 50; ++k) {
            const double x = 0.5 * u(rng);
            // sum_i g(x_i) L_i(x) with L_i(x) = sum_j lambda_{i,j} x^j
            double s = 0.0;
            for (int i = -n; i <= n; ++i) {
                double li = 0.0, p = 1.0;
                for (int j = 0; j <= 2 * n; ++j, p *= x) li += rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(i + n)] * p;
                s += eval_poly<double>(coef, g.node(i)) * li;
            }
            ASSERT_NEAR(s, eval_poly<double>(coef, x), 1e-9) << "n=" << n;
        }
    }
}

TEST(LagrangeWeights, BoundedByPowerEstimate) {
    for (int n = 1; n <= 12; ++n)
        for (double c : {0.1, 0.5, 1.0})
            for (int j = 0; j <= 2 * n; ++j) {
                const GridSpec g{c, n};
                const double bound = lagrange_weight_bound(g, j);
                for (double w : lagrange_weights(g, j)) ASSERT_LE(std::abs(w), bound) << n << " " << c << " " << j;
            }
}

TEST(ExtractCoefficient, ProductAndConstantExamples) {
    const GridSpec g{0.5, 2};
    const std::function<double(std::span<const double>)> prod = [](std::span<const double> z) { return z[0] * z[1]; };
    const auto e = extract_coefficient<double>(prod, g, std::vector<int>{1, 1}, 0.0);
    EXPECT_NEAR(e.value, 1.0, 1e-9);
    EXPECT_EQ(e.error_bound, 0.0);
    const std::function<double(std::span<const double>)> seven = [](std::span<const double>) { return 7.0; };
    const auto c = extract_coefficient<double>(seven, g, std::vector<int>{0, 0, 0}, 0.0);
    EXPECT_NEAR(c.value, 7.0, 1e-12);
    EXPECT_THROW(extract_coefficient<double>(seven, g, std::vector<int>{5}, 0.0), InvalidArgument);
    EXPECT_THROW(extract_coefficient<double>(seven, g, std::vector<int>{1}, -1.0), InvalidArgument);
}

TEST(ExtractCoefficient, CenteredGridExtractsShiftedMonomials) {
    // p(z) = (z - 0.3)^2 + 2 (z - 0.3): coefficient of (z - 0.3)^1 is 2.
    GridSpec g{0.1, 2, 0.3};
    const std::function<double(std::span<const double>)> p = [](std::span<const double> z) {
        const double u = z[0] - 0.3;
        return u * u + 2.0 * u;
    };
    EXPECT_NEAR(extract_coefficient<double>(p, g, std::vector<int>{1}, 0.0).value, 2.0, 1e-10);
}

TEST(ExtractCoefficient, NoisyOracleStaysWithinBounds) {
    const GridSpec g{0.5, 8};
    const std::vector<int> j{2, 1};
    const double delta = 1e-9;
    Rng rng(4);
    // Random bivariate polynomial of degree <= 16 in each variable.
    std::vector<std::vector<double>> coef(17);
    for (auto& row : coef) row = random_coefficients(17, rng);
    auto exact = [&](double a, double b) {
        double s = 0.0;
        for (std::size_t p = 17; p-- > 0;) s = s * a + eval_poly<double>(coef[p], b);
        return s;
    };
    std::uniform_real_distribution<double> noise(-delta, delta);
    for (int trial = 0; trial < 100; ++trial) {
        const std::function<double(std::span<const double>)> f = [&](std::span<const double> z) {
            return exact(z[0], z[1]) + noise(rng);
        };
        const auto e = extract_coefficient<double>(f, g, j, delta);
        const double err = std::abs(e.value - coef[2][1]);
        ASSERT_LE(err, e.error_bound);
        ASSERT_LE(e.error_bound, e.power_bound);
        ASSERT_NEAR(e.power_bound, std::pow(16.0, 10.0) * std::pow(0.5, -3.0) * delta, 1e-6 * e.power_bound);
    }
}

TEST(ExtractCoefficient, RealizedErrorNeverExceedsReturnedBound) {
    Rng rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + trial % 4;
        const GridSpec g{0.5, n};
        const auto coef = random_coefficients(static_cast<std::size_t>(2 * n + 1), rng);
        const double delta = 1e-6;
        const std::function<double(std::span<const double>)> f = [&](std::span<const double> z) {
            return eval_poly<double>(coef, z[0]) + delta * u(rng);
        };
        const int j = trial % (2 * n + 1);
        const auto e = extract_coefficient<double>(f, g, std::vector<int>{j}, delta);
        ASSERT_LE(std::abs(e.value - coef[static_cast<std::size_t>(j)]), e.error_bound);
    }
}

TEST(ExtractCoefficient, ZeroIndexCostsOneBranch) {
    const GridSpec g{0.5, 3};
    const std::function<double(std::span<const double>)> f = [](std::span<const double> z) { return z[0] + z[1]; };
    const auto e = extract_coefficient<double>(f, g, std::vector<int>{0, 1}, 0.0);
    EXPECT_EQ(e.oracle_calls, 6u);  // one node for the zero index times six nonzero weights
    EXPECT_NEAR(e.value, 1.0, 1e-12);
}

TEST(ExtractCoefficient, ComplexValuesAndHighPrecisionWeights) {
    const GridSpec g{0.5, 10};
    Rng rng(6);
    const auto re = random_coefficients(21, rng), im = random_coefficients(21, rng);
    const std::function<Complex(std::span<const double>)> f = [&](std::span<const double> z) {
        return Complex(eval_poly<double>(re, z[0]), eval_poly<double>(im, z[0]));
    };
    const auto e = extract_coefficient<Complex>(f, g, std::vector<int>{3}, 0.0);
    EXPECT_NEAR(std::abs(e.value - Complex(re[3], im[3])), 0.0, 1e-6);
    // The oracle snaps each double node back to its exact value i/20.
    const std::function<HighFloat(std::span<const double>)> hf = [&](std::span<const double> z) {
        return eval_poly<HighFloat>(re, HighFloat(std::lround(z[0] * 20.0)) / 20);
    };
    const auto h = extract_coefficient<HighFloat, HighFloat>(hf, g, std::vector<int>{20}, 0.0);
    EXPECT_NEAR(static_cast<double>(h.value), re[20], 1e-8);
}
