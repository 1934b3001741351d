#pragma once

// The auxiliary polynomial h on the unit circle, arc maxima of
// Littlewood-type polynomials, template selection, and separation-point
// search for pairs of candidate strings.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "tracelab/common.hpp"
#include "tracelab/genfun.hpp"

namespace tracelab {

// ---------------------------------------------------------------------------
// h and h~

struct HPolynomial {
    double a = 0.0;
    std::size_t r = 0;
    std::size_t r_star = 0;
    double split = 0.0;          // sum_{j<=r*} 1/log^2(j+3) - sum_{j>r*} 1/log^2(j+3)
    double lambda_a = 0.0;       // normaliser of d_j
    double lambda_tilde = 0.0;   // makes h~(1) = 1
    std::vector<double> d;       // d_1..d_r at index j-1
    std::vector<int> eps;        // +1 for j <= r*, else -1
    std::vector<double> h_tilde; // coefficient of z^j at index j (index 0 is zero)
    std::vector<double> h;       // (1 - a^10) h~

    [[nodiscard]] Complex eval_tilde(Complex z) const { return horner<double, Complex>(h_tilde, z); }
    [[nodiscard]] Complex eval(Complex z) const { return horner<double, Complex>(h, z); }
};

inline HPolynomial build_h(double a) {
    require(std::isfinite(a) && a > 0.0 && a < 1.0, "build_h: a must lie in (0, 1)");
    HPolynomial hp;
    hp.a = a;
    hp.r = static_cast<std::size_t>(std::floor(1.0 / std::sqrt(a)));
    require(hp.r >= 2, "build_h: a too large (r = floor(a^{-1/2}) must be >= 2)");
    const std::size_t r = hp.r;
    std::vector<double> inv_log2(r + 1);
    double total = 0.0;
    for (std::size_t j = 1; j <= r; ++j) {
        const double L = std::log(static_cast<double>(j) + 3.0);
        inv_log2[j] = 1.0 / (L * L);
        total += inv_log2[j];
    }
    // split(r*) = 2 * prefix(r*) - total increases with r*.
    double prefix = 0.0;
    std::optional<std::size_t> found;
    for (std::size_t rs = 1; rs <= r; ++rs) {
        prefix += inv_log2[rs];
        const double s = 2.0 * prefix - total;
        if (s >= 20.0 && s <= 21.0) {
            found = rs;
            hp.split = s;
            break;
        }
        if (s > 21.0) break;
    }
    if (!found)
        throw InvalidArgument("build_h: no r_* gives a split in [20, 21] at a = " + std::to_string(a) +
                              " (total " + std::to_string(total) + ")");
    hp.r_star = *found;
    double dsum = 0.0;
    for (std::size_t j = 1; j <= r; ++j) dsum += inv_log2[j] / static_cast<double>(j * j);
    hp.lambda_a = 1.0 / dsum;
    hp.d.resize(r);
    hp.eps.resize(r);
    double signed_sum = 0.0;
    for (std::size_t j = 1; j <= r; ++j) {
        hp.d[j - 1] = hp.lambda_a * inv_log2[j] / static_cast<double>(j * j);
        hp.eps[j - 1] = j <= hp.r_star ? 1 : -1;
        signed_sum += hp.eps[j - 1] * hp.d[j - 1];
    }
    hp.lambda_tilde = 1.0 / signed_sum;
    hp.h_tilde.assign(r + 1, 0.0);
    hp.h.assign(r + 1, 0.0);
    const double shrink = 1.0 - std::pow(a, 10.0);
    for (std::size_t j = 1; j <= r; ++j) {
        hp.h_tilde[j] = hp.lambda_tilde * hp.eps[j - 1] * hp.d[j - 1];
        hp.h[j] = shrink * hp.h_tilde[j];
    }
    return hp;
}

struct CircleScan {
    double max_abs = 0.0;  // max |h~(e^{2 pi i t})|
    double argmax_t = 0.0;
    double fitted_c5 = 0.0;  // for the chosen C6; 0 when no positive fit exists
    double fitted_C6 = 0.0;
};

/// Grid t = k / G for k = 0..G-1 (t mapped into [-1/2, 1/2)). The decay fit
/// reports c5 = min (1 - |h|) log^2(1/a) / |t| over |t| > C6 sqrt(a), for the
/// smallest C6 in the candidate list giving a positive c5.
inline CircleScan scan_unit_circle(const HPolynomial& hp, std::size_t grid_points,
                                   std::vector<double> C6_candidates = {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    require(grid_points >= 1000, "scan_unit_circle: grid_points must be >= 1000");
    CircleScan out;
    const double L2 = std::pow(std::log(1.0 / hp.a), 2.0);
    std::vector<double> t_of(grid_points), habs(grid_points);
    for (std::size_t k = 0; k < grid_points; ++k) {
        double t = static_cast<double>(k) / static_cast<double>(grid_points);
        if (t >= 0.5) t -= 1.0;
        const Complex z = std::polar(1.0, 2.0 * std::numbers::pi * t);
        const double v = std::abs(hp.eval_tilde(z));
        if (v > out.max_abs) {
            out.max_abs = v;
            out.argmax_t = t;
        }
        t_of[k] = t;
        habs[k] = std::abs(hp.eval(z));
    }
    std::sort(C6_candidates.begin(), C6_candidates.end());
    for (double C6 : C6_candidates) {
        double c5 = std::numeric_limits<double>::infinity();
        const double cut = C6 * std::sqrt(hp.a);
        for (std::size_t k = 0; k < grid_points; ++k) {
            const double at = std::abs(t_of[k]);
            if (at <= cut) continue;
            c5 = std::min(c5, (1.0 - habs[k]) * L2 / at);
        }
        if (std::isfinite(c5) && c5 > 0.0) {
            out.fitted_c5 = c5;
            out.fitted_C6 = C6;
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Littlewood-type polynomials zeta - eta z^d + sum_{j >= tail_start} a_j z^j

struct LittlewoodPoly {
    Complex zeta{1.0, 0.0};
    int eta = 0;
    std::size_t d = 1;
    std::size_t tail_start = 1;  // ceil(n^mu)
    std::vector<double> tail;    // a_j for j = tail_start .. tail_start + tail.size() - 1
    double mu = 0.2;

    [[nodiscard]] std::size_t degree() const { return tail.empty() ? (eta ? d : 0) : tail_start + tail.size() - 1; }

    [[nodiscard]] std::vector<Complex> coefficients() const {
        std::vector<Complex> c(std::max(degree(), d) + 1, 0.0);
        c[0] += zeta;
        if (eta) c[d] -= 1.0;
        for (std::size_t j = 0; j < tail.size(); ++j) c[tail_start + j] += tail[j];
        return c;
    }

    /// Random member of the class with +-1 tail coefficients on [ceil(n^mu), n].
    static LittlewoodPoly random(std::size_t n, double mu, Rng& rng) {
        require(n >= 2 && mu > 0.0 && mu < 1.0, "LittlewoodPoly: need n >= 2 and mu in (0, 1)");
        LittlewoodPoly p;
        p.mu = mu;
        p.tail_start = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), mu)));
        p.zeta = std::polar(1.0, 2.0 * std::numbers::pi * uniform_open0(rng));
        p.eta = random_bit(rng);
        p.d = 1 + static_cast<std::size_t>(rng() % std::max<std::size_t>(1, p.tail_start - 1));
        p.tail.resize(n + 1 - p.tail_start);
        for (auto& v : p.tail) v = random_bit(rng) ? 1.0 : -1.0;
        return p;
    }
};

struct ArcMax {
    double value = 0.0;
    double theta = 0.0;
    bool high_precision = false;
};

namespace detail {

using HiFloat = boost::multiprecision::cpp_bin_float<256, boost::multiprecision::digit_base_2>;
using HiNumber = boost::multiprecision::number<HiFloat>;

inline double hp_abs_eval(const std::vector<Complex>& coef, double rho, double theta, double& log_abs) {
    HiNumber re = 0, im = 0;
    const HiNumber c = HiNumber(rho) * boost::multiprecision::cos(HiNumber(theta));
    const HiNumber s = HiNumber(rho) * boost::multiprecision::sin(HiNumber(theta));
    for (std::size_t k = coef.size(); k-- > 0;) {
        const HiNumber nr = re * c - im * s + HiNumber(coef[k].real());
        const HiNumber ni = re * s + im * c + HiNumber(coef[k].imag());
        re = nr;
        im = ni;
    }
    const HiNumber m2 = re * re + im * im;
    log_abs = m2 > 0 ? static_cast<double>(boost::multiprecision::log(m2)) / 2.0
                     : -std::numeric_limits<double>::infinity();
    return static_cast<double>(boost::multiprecision::sqrt(m2));
}

}  // namespace detail

/// Grid max of |p(rho e^{i theta})| over theta_k = -theta_max + 2 theta_max k/(G-1).
/// Grids G and 2G-1 are nested, so refining never lowers the maximum. When the
/// double maximum falls below 1e-200 the scan is repeated with 256-bit floats.
inline ArcMax arc_max(const LittlewoodPoly& p, double rho, double theta_max, std::size_t grid_points,
                      bool force_high_precision = false) {
    require(rho >= 0.0 && rho <= 1.0, "arc_max: rho must lie in [0, 1]");
    require(theta_max >= 0.0, "arc_max: theta_max must be non-negative");
    require(grid_points >= 1, "arc_max: grid_points must be >= 1");
    const auto coef = p.coefficients();
    auto theta_at = [&](std::size_t k) {
        return grid_points == 1 ? 0.0
                                : -theta_max + 2.0 * theta_max * static_cast<double>(k) /
                                                   static_cast<double>(grid_points - 1);
    };
    ArcMax out;
    out.value = -1.0;
    if (!force_high_precision) {
        for (std::size_t k = 0; k < grid_points; ++k) {
            const double th = theta_at(k);
            const double v = std::abs(horner<Complex, Complex>(coef, std::polar(rho, th)));
            if (v > out.value) {
                out.value = v;
                out.theta = th;
            }
        }
        if (out.value >= 1e-200) return out;
    }
    out.value = -1.0;
    out.high_precision = true;
    for (std::size_t k = 0; k < grid_points; ++k) {
        const double th = theta_at(k);
        double la = 0.0;
        const double v = detail::hp_abs_eval(coef, rho, th, la);
        if (v > out.value) {
            out.value = v;
            out.theta = th;
        }
    }
    return out;
}

/// rho = 1 - n^{-4/5} log^6 n clamped into [0.5, 1 - 1e-3].
inline double clamped_rho(std::size_t n, bool* clamped = nullptr) {
    const double nn = static_cast<double>(n);
    const double raw = 1.0 - std::pow(nn, -0.8) * std::pow(std::log(nn), 6.0);
    const double v = std::clamp(raw, 0.5, 1.0 - 1e-3);
    if (clamped) *clamped = v != raw;
    return v;
}

// ---------------------------------------------------------------------------
// Template selection

/// Smallest period p in [1, max_period] of s (s_i = s_{i+p} for all valid i), or 0.
inline std::size_t smallest_period(const BitString& s, std::size_t max_period) {
    for (std::size_t p = 1; p <= max_period && p < s.size(); ++p) {
        bool ok = true;
        for (std::size_t i = 0; i + p < s.size() && ok; ++i) ok = s[i] == s[i + p];
        if (ok) return p;
    }
    return 0;
}

inline std::size_t period_bound(std::size_t n, std::size_t l) {
    const auto root = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), 0.2) + 1e-12));
    return std::min(root, l > 0 ? l - 1 : 0);
}

/// w' is the last l-1 known bits (positions n-l+1..n-1, 1-indexed); returns
/// w'0 unless it has a period <= n^{1/5}, then w'1.
inline BitString select_template_w(const BitString& x_prefix, std::size_t n, std::size_t l) {
    require(l >= 1, "select_template_w: l must be >= 1");
    require(n >= l, "select_template_w: need n >= l");
    require(x_prefix.size() >= n - 1, "select_template_w: prefix must hold the first n-1 bits");
    const BitString wp = x_prefix.slice(n - l, n - 1);
    const std::size_t bound = period_bound(n, l);
    for (int b : {0, 1}) {
        BitString w = wp;
        w.push_back(b);
        if (smallest_period(w, bound) == 0) return w;
    }
    throw RuntimeError("select_template_w: both w'0 and w'1 have a period <= n^{1/5}");
}

// ---------------------------------------------------------------------------
// Difference polynomial and separation search

struct SparsePoly {
    std::vector<std::pair<std::size_t, int>> terms;  // (exponent, coefficient), exponent ascending
    [[nodiscard]] bool is_zero() const { return terms.empty(); }
    [[nodiscard]] Complex operator()(Complex z) const {
        Complex s = 0.0;
        for (const auto& [e, c] : terms) s += static_cast<double>(c) * std::pow(z, static_cast<double>(e));
        return s;
    }
};

/// Coefficient of z^{k-1} is (-1)^{y0_k} [y0(k+1:k+l) = w] - (-1)^{y1_k} [y1(k+1:k+l) = w].
inline SparsePoly difference_poly(const BitString& y0, const BitString& y1, const BitString& w) {
    require(y0.size() == y1.size(), "difference_poly: y0 and y1 must have equal length");
    const std::size_t l = w.size();
    auto term = [&](const BitString& y, std::size_t k) {  // k is the 0-based storage index
        if (k + l >= y.size()) return 0;
        for (std::size_t i = 0; i < l; ++i)
            if (y[k + 1 + i] != w[i]) return 0;
        return y[k] ? -1 : 1;
    };
    SparsePoly out;
    for (std::size_t k = 0; k < y0.size(); ++k) {
        const int c = term(y0, k) - term(y1, k);
        if (c != 0) out.terms.emplace_back(k, c);
    }
    return out;
}

class NoSeparation : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

enum class SeparationMode { Sparse, Dense };

struct SeparationConfig {
    SeparationMode mode = SeparationMode::Sparse;
    double rho = 0.5;
    double theta_max = 0.5;
    double lo = 0.8, hi = 0.95;  // z_rest interval for DENSE mode
    std::size_t theta_points = 4096;
    std::size_t zrest_points = 64;
    std::size_t max_refinements = 4;
    double floor = 1e-12;
};

struct SeparationResult {
    EvalPoint point;
    double value = 0.0;
    std::size_t theta_points = 0;
    std::size_t zrest_points = 0;
};

/// Grid maximum of |g_{y0}^f - g_{y1}^f| with f = 1_{=w}; the theta grid (and
/// the z_rest grid in DENSE mode) doubles until the maximum is stable to 1%.
/// Ties go to the smallest theta, then the smallest z_rest.
inline SeparationResult find_separation_point(const BitString& y0, const BitString& y1, const BitString& w,
                                              const SeparationConfig& cfg) {
    require(y0.size() == y1.size(), "find_separation_point: y0 and y1 must have equal length");
    require(cfg.theta_points >= 2 && cfg.zrest_points >= 2, "find_separation_point: grids need >= 2 points");
    const BoolFunction f = BoolFunction::indicator(w);
    const std::size_t l = w.size();

    auto diff_coeffs = [&](double zr) {
        const std::vector<Complex> zs(l, Complex(zr, 0.0));
        auto c0 = message_g_coeffs<Complex>(y0, f, zs);
        const auto c1 = message_g_coeffs<Complex>(y1, f, zs);
        c0.resize(std::max(c0.size(), c1.size()), 0.0);
        for (std::size_t k = 0; k < c1.size(); ++k) c0[k] -= c1[k];
        return c0;
    };
    auto scan = [&](std::size_t G, std::size_t Z) {
        SeparationResult best;
        best.value = -1.0;
        best.theta_points = G;
        best.zrest_points = Z;
        const std::size_t nz = cfg.mode == SeparationMode::Sparse ? 1 : Z;
        for (std::size_t iz = 0; iz < nz; ++iz) {
            const double zr = cfg.mode == SeparationMode::Sparse
                                  ? 0.0
                                  : cfg.lo + (cfg.hi - cfg.lo) * static_cast<double>(iz) / static_cast<double>(Z - 1);
            const auto coef = diff_coeffs(zr);
            for (std::size_t k = 0; k < G; ++k) {
                const double th = -cfg.theta_max + 2.0 * cfg.theta_max * static_cast<double>(k) / static_cast<double>(G - 1);
                const Complex z0 = std::polar(cfg.rho, th);
                const double v = std::abs(horner<Complex, Complex>(coef, z0));
                const bool better = v > best.value ||
                                    (v == best.value && (std::abs(th) < std::abs(best.point.z0.imag()) - 1e-300));
                if (better) {
                    best.value = v;
                    best.point = EvalPoint::equal_mode(z0, Complex(zr, 0.0), l);
                }
            }
        }
        return best;
    };

    std::size_t G = cfg.theta_points, Z = cfg.zrest_points;
    SeparationResult best = scan(G, Z);
    for (std::size_t it = 0; it < cfg.max_refinements; ++it) {
        G = 2 * G - 1;
        if (cfg.mode == SeparationMode::Dense) Z = 2 * Z - 1;
        const SeparationResult next = scan(G, Z);
        const bool stable = std::abs(next.value - best.value) <= 0.01 * std::max(next.value, 1e-300);
        best = next;
        if (stable) break;
    }
    if (!(best.value > cfg.floor))
        throw NoSeparation("find_separation_point: maximum " + std::to_string(best.value) + " below floor");
    return best;
}

}  // namespace tracelab
