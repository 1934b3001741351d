#pragma once

// Coefficient extraction from noisy point evaluations by Lagrange
// interpolation on an equispaced grid.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <type_traits>
#include <vector>

#include "tracelab/common.hpp"

namespace tracelab {

/// Nodes center + i*c/n_deg for i = -n_deg..n_deg.
struct GridSpec {
    double c = 0.5;
    int n_deg = 1;
    double center = 0.0;

    void validate() const {
        require(std::isfinite(c) && c > 0.0, "grid half-width c must be positive");
        require(n_deg >= 1, "grid degree bound n_deg must be >= 1");
        require(std::isfinite(center), "grid center must be finite");
    }
    [[nodiscard]] int count() const { return 2 * n_deg + 1; }
    [[nodiscard]] double node(int i) const { return center + static_cast<double>(i) * c / static_cast<double>(n_deg); }
    [[nodiscard]] std::vector<double> nodes() const {
        std::vector<double> out;
        for (int i = -n_deg; i <= n_deg; ++i) out.push_back(node(i));
        return out;
    }
};

namespace detail {

// Double-double arithmetic for the large-grid path.
struct DD {
    double hi = 0.0, lo = 0.0;
};

inline DD dd_two_sum(double a, double b) {
    const double s = a + b;
    const double bb = s - a;
    return {s, (a - (s - bb)) + (b - bb)};
}
inline DD dd_add(DD a, DD b) {
    DD s = dd_two_sum(a.hi, b.hi);
    s.lo += a.lo + b.lo;
    return dd_two_sum(s.hi, s.lo);
}
inline DD dd_mul(DD a, double b) {
    const double p = a.hi * b;
    const double e = std::fma(a.hi, b, -p);
    return dd_two_sum(p, e + a.lo * b);
}
inline DD dd_div(DD a, DD b) {
    const double q1 = a.hi / b.hi;
    // r = a - q1*b
    DD prod = dd_mul(b, q1);
    DD r = dd_add(a, {-prod.hi, -prod.lo});
    const double q2 = r.hi / b.hi;
    return dd_two_sum(q1, q2);
}

// Coefficients (ascending) of prod_{i' != i} (u - i') over i' in [-n, n], and
// the denominator prod_{i' != i} (i - i'). Exact for n <= 16.
inline void integer_basis(int n, int i, std::vector<__int128>& num, __int128& den) {
    num.assign(1, 1);
    den = 1;
    for (int k = -n; k <= n; ++k) {
        if (k == i) continue;
        std::vector<__int128> next(num.size() + 1, 0);
        for (std::size_t d = 0; d < num.size(); ++d) {
            next[d + 1] += num[d];
            next[d] -= static_cast<__int128>(k) * num[d];
        }
        num.swap(next);
        den *= static_cast<__int128>(i - k);
    }
}

inline long double to_ld(__int128 v) {
    const bool neg = v < 0;
    unsigned __int128 u = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
    const auto hi = static_cast<std::uint64_t>(u >> 64);
    const auto lo = static_cast<std::uint64_t>(u);
    long double r = static_cast<long double>(hi) * 18446744073709551616.0L + static_cast<long double>(lo);
    return neg ? -r : r;
}

inline void dd_basis(int n, int i, std::vector<DD>& num, DD& den) {
    num.assign(1, DD{1.0, 0.0});
    den = DD{1.0, 0.0};
    for (int k = -n; k <= n; ++k) {
        if (k == i) continue;
        std::vector<DD> next(num.size() + 1);
        for (std::size_t d = 0; d < num.size(); ++d) {
            next[d + 1] = dd_add(next[d + 1], num[d]);
            next[d] = dd_add(next[d], dd_mul(num[d], -static_cast<double>(k)));
        }
        num.swap(next);
        den = dd_mul(den, static_cast<double>(i - k));
    }
}

}  // namespace detail

/// Row j of the weight table: entry i + n_deg is the coefficient of
/// (x - center)^j in the Lagrange basis polynomial of node i.
inline std::vector<double> lagrange_weights(const GridSpec& grid, int j) {
    grid.validate();
    const int n = grid.n_deg;
    require(j >= 0 && j <= 2 * n, "target degree j must lie in [0, 2*n_deg]");
    std::vector<double> row(static_cast<std::size_t>(2 * n + 1));
    // In the scaled variable u = (x - center) * n / c the nodes are the integers -n..n.
    const long double scale = std::pow(static_cast<long double>(n) / grid.c, j);
    for (int i = -n; i <= n; ++i) {
        long double coef;
        if (n <= 16) {
            std::vector<__int128> num;
            __int128 den;
            detail::integer_basis(n, i, num, den);
            coef = detail::to_ld(num[static_cast<std::size_t>(j)]) / detail::to_ld(den);
        } else {
            std::vector<detail::DD> num;
            detail::DD den;
            detail::dd_basis(n, i, num, den);
            const detail::DD q = detail::dd_div(num[static_cast<std::size_t>(j)], den);
            coef = static_cast<long double>(q.hi) + static_cast<long double>(q.lo);
        }
        row[static_cast<std::size_t>(i + n)] = static_cast<double>(coef * scale);
    }
    return row;
}

/// lagrange_weights in an arbitrary real scalar type S (for example a Boost
/// multiprecision float), for oracles whose values carry more than double
/// precision. The numerators are exact integers for n_deg <= 16.
template <class S>
std::vector<S> lagrange_weights_as(const GridSpec& grid, int j) {
    if constexpr (std::is_same_v<S, double>) {
        return lagrange_weights(grid, j);
    } else {
        grid.validate();
        const int n = grid.n_deg;
        require(j >= 0 && j <= 2 * n, "target degree j must lie in [0, 2*n_deg]");
        const S base = S(n) / S(grid.c);
        S scale = S(1);
        for (int e = 0; e < j; ++e) scale *= base;
        auto from_i128 = [](__int128 v) {
            const bool neg = v < 0;
            const unsigned __int128 u = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
            S r = S(static_cast<std::uint64_t>(u >> 64));
            for (int k = 0; k < 64; ++k) r *= S(2);
            r += S(static_cast<std::uint64_t>(u));
            return neg ? S(-r) : r;
        };
        std::vector<S> row(static_cast<std::size_t>(2 * n + 1));
        for (int i = -n; i <= n; ++i) {
            S coef;
            if (n <= 16) {
                std::vector<__int128> num;
                __int128 den;
                detail::integer_basis(n, i, num, den);
                coef = from_i128(num[static_cast<std::size_t>(j)]) / from_i128(den);
            } else {
                std::vector<S> num(1, S(1));
                S den = S(1);
                for (int k = -n; k <= n; ++k) {
                    if (k == i) continue;
                    std::vector<S> next(num.size() + 1, S(0));
                    for (std::size_t d = 0; d < num.size(); ++d) {
                        next[d + 1] += num[d];
                        next[d] -= S(k) * num[d];
                    }
                    num.swap(next);
                    den *= S(i - k);
                }
                coef = num[static_cast<std::size_t>(j)] / den;
            }
            row[static_cast<std::size_t>(i + n)] = coef * scale;
        }
        return row;
    }
}

/// Upper bound (2n)^{2j+1} c^{-j} on |lambda_{i,j}|.
inline double lagrange_weight_bound(const GridSpec& grid, int j) {
    const double two_n = 2.0 * grid.n_deg;
    return std::pow(two_n, 2.0 * j + 1.0) * std::pow(grid.c, -static_cast<double>(j));
}

/// Sum_i |lambda_{i,j}|: noise amplification of one extraction level.
inline double lagrange_amplification(const GridSpec& grid, int j) {
    double s = 0.0;
    for (double v : lagrange_weights(grid, j)) s += std::abs(v);
    return s;
}

template <class V>
struct Extraction {
    V value{};
    double error_bound = 0.0;  // delta * prod_d sum_i |lambda_{i, j_d}|
    double power_bound = 0.0;  // (2n)^{2 j_tot + 2 l} c^{-j_tot} delta
    std::size_t oracle_calls = 0;
};

/// Coefficient of prod_d (z_d - center)^{j_d} of a polynomial given through an
/// oracle accurate to +-delta. Variables are peeled outermost first; a zero
/// weight skips the whole subtree, so j_d = 0 costs a single branch. S is the
/// scalar type of the weights; raise it above double when the oracle is exact
/// to more digits than a double holds.
template <class V, class S = double>
Extraction<V> extract_coefficient(const std::function<V(std::span<const double>)>& oracle, const GridSpec& grid,
                                  std::span<const int> multi_index, double delta) {
    grid.validate();
    require(delta >= 0.0, "delta must be non-negative");
    const std::size_t l = multi_index.size();
    std::vector<std::vector<S>> rows;
    int j_tot = 0;
    double amp = 1.0;
    for (int j : multi_index) {
        require(j >= 0 && j <= 2 * grid.n_deg, "multi-index entries must lie in [0, 2*n_deg]");
        rows.push_back(lagrange_weights_as<S>(grid, j));
        double s = 0.0;
        for (const S& v : rows.back()) s += std::abs(static_cast<double>(v));
        amp *= s;
        j_tot += j;
    }
    Extraction<V> out;
    std::vector<double> point(l, grid.center);
    std::function<V(std::size_t)> level = [&](std::size_t d) -> V {
        if (d == l) {
            ++out.oracle_calls;
            return oracle(point);
        }
        V acc{};
        for (int i = -grid.n_deg; i <= grid.n_deg; ++i) {
            const S& w = rows[d][static_cast<std::size_t>(i + grid.n_deg)];
            if (w == S(0)) continue;
            point[d] = grid.node(i);
            acc += w * level(d + 1);
        }
        point[d] = grid.center;
        return acc;
    };
    out.value = level(0);
    out.error_bound = amp * delta;
    const double two_n = 2.0 * grid.n_deg;
    out.power_bound = std::pow(two_n, 2.0 * j_tot + 2.0 * static_cast<double>(l)) *
                      std::pow(grid.c, -static_cast<double>(j_tot)) * delta;
    return out;
}

}  // namespace tracelab
